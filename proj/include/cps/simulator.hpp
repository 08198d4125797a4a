#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cps/belief.hpp"
#include "cps/delayed_memory.hpp"
#include "cps/dp.hpp"
#include "cps/system.hpp"

namespace cps {

enum class BeliefMode { Exact, Learned };

// Count-based estimate of the unknown actual transition kernel: transition
// counts over (xhat, u, xhat') with additive smoothing, feeding the exact
// Bayes filter in learned-belief mode. Counts are nonnegative reals: hard
// (integer) counts when observations identify the actual state, posterior
// expected transitions otherwise.
class KernelEstimate {
 public:
  KernelEstimate(int num_states, int num_joint_actions, double pseudo_count = 1.0);

  void add(int x_hat, int u_joint, int x_hat_next, double weight = 1.0);
  double count(int x_hat, int u_joint, int x_hat_next) const;
  double pseudo_count() const { return pseudo_; }

  /// Smoothed row estimate P~(xhat' | xhat, u).
  dvec row(int x_hat, int u_joint) const;
  /// The full estimated kernel as a stationary stage table.
  StageTable as_kernel(int stages) const;

  int num_states() const { return n_; }
  int num_joint_actions() const { return nu_; }

 private:
  int n_, nu_;
  double pseudo_;
  dvec counts_;
};

struct StageLog {
  int x = 0, x_hat = 0;
  std::vector<int> u, y, y_hat;
  dvec belief;  // the strategy-facing belief at this stage
  double cost_model = 0.0, cost_actual = 0.0, mismatch = 0.0;
  std::string memory;  // delayed-sharing views, trace form

  bool operator==(const StageLog&) const = default;
};

struct Trajectory {
  std::vector<StageLog> stages;
  int x_terminal = 0, x_hat_terminal = 0;
  std::vector<int> y_terminal, y_hat_terminal;
  double terminal_model = 0.0, terminal_actual = 0.0;
  double j_model = 0.0;   // stage costs + mismatch penalties + terminal
  double j_actual = 0.0;  // actual-state stage costs + terminal
  std::uint64_t seed = 0;

  bool operator==(const Trajectory&) const = default;
};

// Parallel operation of the CPS model and the actual CPS: both systems step
// under the shared disturbance, both are observed through the shared sensor
// noise, the strategy reads only the belief. Draw order per episode, fixed
// for reproducibility: one uniform for the initial pair, then per stage
// [observation uniforms for k = 1..K], and per transition one uniform (plus
// a second under independent coupling).
//
// In learned mode the filter consumes the estimate as of episode start (the
// estimated kernel replaces the actual kernel); transition counts accrue
// during the episode and take effect from the next episode on.
Trajectory run_episode(const System& sys, const SeparatedStrategy& strategy,
                       BeliefMode mode, KernelEstimate* estimate,
                       std::uint64_t seed, std::vector<int> delays = {});

struct MonteCarloCosts {
  double j_hat_mean = 0.0;  // expected total cost of the actual CPS
  double j_mean = 0.0;      // model objective with the mismatch penalty
  double j_hat_se = 0.0;
  double j_se = 0.0;
  int episodes = 0;
};

MonteCarloCosts monte_carlo_cost(const System& sys,
                                 const SeparatedStrategy& strategy,
                                 BeliefMode mode, int episodes,
                                 std::uint64_t base_seed,
                                 KernelEstimate* estimate = nullptr);

struct Theorem3Report {
  bool trajectories_coincide = true;   // x_t == xhat_t throughout
  bool all_mismatch_zero = true;
  double max_mismatch = 0.0;
  bool per_episode_costs_equal = true;  // j_model == j_actual, every episode
  MonteCarloCosts costs;
  double gap = 0.0;  // |mean J - mean J_hat|
  bool gap_within_3se = true;
};

/// Runs exact-mode episodes and reports (a) whether mismatch penalties
/// vanish along every episode and (b) how the two cost estimates compare.
Theorem3Report theorem3_check(const System& sys,
                              const SeparatedStrategy& strategy, int episodes,
                              std::uint64_t base_seed);

/// A fixed (u_t, y_{t+1}) sequence with positive probability, used to score
/// learned-filter accuracy against the exact filter.
struct ProbeHistory {
  std::vector<int> u;
  std::vector<std::vector<int>> y;
};

ProbeHistory make_probe(const System& sys, const SeparatedStrategy& strategy,
                        std::uint64_t seed);

/// Max over probe stages of the total-variation distance between the beliefs
/// of two filters (e.g. exact kernel vs learned kernel).
double probe_tv_distance(const System& filter_a, const System& filter_b,
                         const ProbeHistory& probe);

struct LearnResult {
  dvec tv_curve;  // per episode, after applying that episode's counts
  std::vector<std::pair<int, KernelEstimate>> estimate_history;  // checkpoints
  KernelEstimate final_estimate;
};

/// Assumption-1 realization: repeated episodes in learned-belief mode with
/// the true actual kernel hidden from the learner (it only ever touches the
/// estimate). After each episode the learned-belief filter is scored against
/// the exact filter on the probe history.
LearnResult learn_online(const System& sys, const SeparatedStrategy& strategy,
                         int episodes, std::uint64_t base_seed,
                         const ProbeHistory& probe);

/// True when the joint observation at stage t is a deterministic injective
/// function of the state, so a state is readable off its observation.
bool observations_identify_state(const System& sys, int t);
int state_from_observation(const System& sys, int t,
                           const std::vector<int>& y);

// trace file: line-delimited per-stage records, header with seed and config
// hash (format documented in the README)
void write_trace(std::ostream& out, const std::vector<Trajectory>& episodes,
                 std::uint64_t config_hash, BeliefMode mode, Coupling coupling);

}  // namespace cps
