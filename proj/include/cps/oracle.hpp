#pragma once

#include <functional>
#include <map>
#include <vector>

#include "cps/system.hpp"

namespace cps {

struct EnumerationBudget {
  std::uint64_t max_tree_nodes = 1000000;
  std::uint64_t max_strategy_count = 200000;
};

/// A deterministic history-based control strategy: the joint action may
/// depend on everything realized so far, keyed by the joint-observation
/// sequence (y_1..y_t); past actions are recovered from it by determinism.
using HistoryPolicy =
    std::function<int(int t, const std::vector<int>& y_joint_history)>;

struct OracleCosts {
  double j = 0.0;      // stage + mismatch + terminal, on the model state
  double j_hat = 0.0;  // stage + terminal, on the actual state
  std::uint64_t leaves = 0;
};

/// Exact expected costs by total enumeration: every joint realization of the
/// initial pair, the coupled disturbances, and the sensor outcomes, with
/// compensated summation over leaves. Independent of the belief filter and
/// the dynamic program.
OracleCosts exact_costs(const System& sys, const HistoryPolicy& policy,
                        const EnumerationBudget& budget = {});
double exact_cost(const System& sys, const HistoryPolicy& policy,
                  const EnumerationBudget& budget = {});

/// The realized information equivalence classes: for each decision stage,
/// every joint-observation prefix reachable under some action choices.
/// Enumerating strategies over these classes covers every deterministic
/// history-based strategy without double counting.
struct InformationSets {
  // per stage t: sorted unique prefixes (y_1..y_t); stage 0 holds the empty
  // prefix
  std::vector<std::vector<std::vector<int>>> prefixes;
  std::uint64_t total_slots() const;
};

InformationSets collect_information_sets(const System& sys,
                                         const EnumerationBudget& budget = {});

/// Policy that plays `assignment[slot]` where slots index the information
/// sets stage by stage in sorted order; unseen prefixes fall back to action 0.
HistoryPolicy assignment_policy(const System& sys, const InformationSets& info,
                                std::vector<int> assignment);

HistoryPolicy random_history_policy(const System& sys,
                                    const InformationSets& info,
                                    UniformSource& rng);

struct ExhaustiveResult {
  double optimal_cost = 0.0;
  std::vector<int> witness;  // optimal assignment over the information slots
  std::uint64_t strategies_evaluated = 0;
  std::uint64_t information_slots = 0;
};

/// Minimum expected total cost over every deterministic history-based
/// strategy. Matching the dynamic program's V_0 on an instance certifies
/// that restricting to separated strategies loses nothing there.
ExhaustiveResult exhaustive_optimal(const System& sys,
                                    const EnumerationBudget& budget = {});

/// Seeded random instance with |X|=2, |U^k|=2, |Y^k|=2, T=2: the scale at
/// which exhaustive search stays tractable. Kernel entries are bounded away
/// from zero so every observation stays reachable.
System random_tiny_system(std::uint64_t seed, int subsystems = 1);

}  // namespace cps
