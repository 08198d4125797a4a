#include "cps/oracle.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <set>

namespace cps {

namespace {

struct CostWalker {
  const System& sys;
  const HistoryPolicy& policy;
  const EnumerationBudget& budget;
  KahanSum j, j_hat;
  std::uint64_t nodes = 0;
  std::vector<int> y_hist;

  void walk(int t, int x, int xh, double prob) {
    if (++nodes > budget.max_tree_nodes)
      throw BudgetError("oracle: reachable tree exceeds " +
                        std::to_string(budget.max_tree_nodes) + " nodes");
    if (t == sys.horizon) {
      j.add(prob * terminal_cost(sys, x));
      j_hat.add(prob * terminal_cost(sys, xh));
      return;
    }
    int u = policy(t, y_hist);
    j.add(prob * stage_cost(sys, t, x, u));
    j_hat.add(prob * stage_cost(sys, t, xh, u));
    dvec joint;
    coupled_row(sys, t, x, xh, u, joint);
    const int n = sys.num_states;
    for (int xp = 0; xp < n; ++xp) {
      for (int xhp = 0; xhp < n; ++xhp) {
        double p = joint[static_cast<std::size_t>(xp) * n + xhp];
        if (p == 0.0) continue;
        j.add(prob * p * mismatch_penalty(sys, xp, xhp));
        for (int yj = 0; yj < sys.num_joint_observations(); ++yj) {
          double lik = observation_likelihood_joint(sys, t + 1, xp, yj);
          if (lik == 0.0) continue;
          y_hist.push_back(yj);
          walk(t + 1, xp, xhp, prob * p * lik);
          y_hist.pop_back();
        }
      }
    }
  }
};

// Reachability sweep branching over every action, collecting each realized
// observation prefix per decision stage.
struct InfoWalker {
  const System& sys;
  const EnumerationBudget& budget;
  std::vector<std::set<std::vector<int>>> seen;
  std::uint64_t nodes = 0;
  std::vector<int> y_hist;

  void walk(int t, int x, int xh) {
    if (++nodes > budget.max_tree_nodes)
      throw BudgetError("oracle: information-set sweep exceeds node budget");
    if (t == sys.horizon) return;
    seen[t].insert(y_hist);
    dvec joint;
    const int n = sys.num_states;
    for (int u = 0; u < sys.num_joint_actions(); ++u) {
      coupled_row(sys, t, x, xh, u, joint);
      for (int xp = 0; xp < n; ++xp) {
        for (int xhp = 0; xhp < n; ++xhp) {
          if (joint[static_cast<std::size_t>(xp) * n + xhp] == 0.0) continue;
          for (int yj = 0; yj < sys.num_joint_observations(); ++yj) {
            if (observation_likelihood_joint(sys, t + 1, xp, yj) == 0.0)
              continue;
            y_hist.push_back(yj);
            walk(t + 1, xp, xhp);
            y_hist.pop_back();
          }
        }
      }
    }
  }
};

}  // namespace

OracleCosts exact_costs(const System& sys, const HistoryPolicy& policy,
                        const EnumerationBudget& budget) {
  CostWalker w{sys, policy, budget};
  const int n = sys.num_states;
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh) {
      double p = sys.initial_joint[static_cast<std::size_t>(x) * n + xh];
      if (p > 0.0) w.walk(0, x, xh, p);
    }
  return {w.j.value(), w.j_hat.value(), w.nodes};
}

double exact_cost(const System& sys, const HistoryPolicy& policy,
                  const EnumerationBudget& budget) {
  return exact_costs(sys, policy, budget).j;
}

std::uint64_t InformationSets::total_slots() const {
  std::uint64_t n = 0;
  for (const auto& stage : prefixes) n += stage.size();
  return n;
}

InformationSets collect_information_sets(const System& sys,
                                         const EnumerationBudget& budget) {
  InfoWalker w{sys, budget};
  w.seen.resize(sys.horizon);
  const int n = sys.num_states;
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh)
      if (sys.initial_joint[static_cast<std::size_t>(x) * n + xh] > 0.0)
        w.walk(0, x, xh);
  InformationSets info;
  info.prefixes.resize(sys.horizon);
  for (int t = 0; t < sys.horizon; ++t)
    info.prefixes[t].assign(w.seen[t].begin(), w.seen[t].end());
  return info;
}

HistoryPolicy assignment_policy(const System& sys, const InformationSets& info,
                                std::vector<int> assignment) {
  for (int a : assignment)
    if (a < 0 || a >= sys.num_joint_actions())
      throw std::invalid_argument("assignment_policy: action out of range");
  // slot lookup: prefixes are sorted per stage, so binary search suffices
  auto shared_info = std::make_shared<InformationSets>(info);
  auto shared_assign = std::make_shared<std::vector<int>>(std::move(assignment));
  std::vector<std::uint64_t> offsets(info.prefixes.size() + 1, 0);
  for (std::size_t t = 0; t < info.prefixes.size(); ++t)
    offsets[t + 1] = offsets[t] + info.prefixes[t].size();
  return [shared_info, shared_assign, offsets](
             int t, const std::vector<int>& hist) -> int {
    const auto& stage = shared_info->prefixes[t];
    auto it = std::lower_bound(stage.begin(), stage.end(), hist);
    if (it == stage.end() || *it != hist) return 0;
    std::uint64_t slot = offsets[t] + (it - stage.begin());
    return (*shared_assign)[slot];
  };
}

HistoryPolicy random_history_policy(const System& sys,
                                    const InformationSets& info,
                                    UniformSource& rng) {
  std::vector<int> assignment(info.total_slots());
  for (int& a : assignment) a = rng.next_index(sys.num_joint_actions());
  return assignment_policy(sys, info, std::move(assignment));
}

ExhaustiveResult exhaustive_optimal(const System& sys,
                                    const EnumerationBudget& budget) {
  InformationSets info = collect_information_sets(sys, budget);
  const std::uint64_t slots = info.total_slots();
  const int nu = sys.num_joint_actions();

  double count = 1.0;
  for (std::uint64_t s = 0; s < slots; ++s) {
    count *= nu;
    if (count > static_cast<double>(budget.max_strategy_count))
      throw BudgetError("oracle: strategy space exceeds " +
                        std::to_string(budget.max_strategy_count));
  }

  ExhaustiveResult res;
  res.information_slots = slots;
  res.optimal_cost = std::numeric_limits<double>::infinity();
  std::vector<int> assignment(slots, 0);
  while (true) {
    ++res.strategies_evaluated;
    double cost =
        exact_costs(sys, assignment_policy(sys, info, assignment), budget).j;
    if (cost < res.optimal_cost) {
      res.optimal_cost = cost;
      res.witness = assignment;
    }
    // odometer
    std::size_t i = 0;
    for (; i < assignment.size(); ++i) {
      if (++assignment[i] < nu) break;
      assignment[i] = 0;
    }
    if (i == assignment.size()) break;
  }
  return res;
}

System random_tiny_system(std::uint64_t seed, int subsystems) {
  UniformSource rng(seed);
  System sys;
  sys.num_states = 2;
  sys.num_subsystems = subsystems;
  sys.actions_per_subsystem.assign(subsystems, 2);
  sys.observations_per_subsystem.assign(subsystems, 2);
  sys.horizon = 2;
  sys.coupling = Coupling::SharedDisturbance;

  const int n = sys.num_states;
  const int nu = sys.num_joint_actions();
  auto random_rows = [&](int rows, int cols) {
    dvec data(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (int c = 0; c < cols; ++c) {
        double v = 0.05 + 0.95 * rng.next();
        data[static_cast<std::size_t>(r) * cols + c] = v;
        sum += v;
      }
      for (int c = 0; c < cols; ++c)
        data[static_cast<std::size_t>(r) * cols + c] /= sum;
    }
    return data;
  };

  sys.model_kernel =
      StageTable::stationary(sys.horizon, n * nu, n, random_rows(n * nu, n));
  sys.actual_kernel =
      StageTable::stationary(sys.horizon, n * nu, n, random_rows(n * nu, n));
  for (int k = 0; k < subsystems; ++k)
    sys.observation_kernels.push_back(StageTable::stationary(
        sys.horizon + 1, n, 2, random_rows(n, 2)));

  sys.initial_joint = random_rows(1, n * n);

  dvec stage(static_cast<std::size_t>(n) * nu);
  for (double& v : stage) v = 2.0 * rng.next();
  sys.costs.stage_cost = StageTable::stationary(sys.horizon, n, nu, stage);
  sys.costs.terminal_cost.resize(n);
  for (double& v : sys.costs.terminal_cost) v = 2.0 * rng.next();
  sys.costs.mismatch_weight = rng.next();
  sys.costs.state_metric = squared_index_metric(n);

  validate(sys);
  return sys;
}

}  // namespace cps
