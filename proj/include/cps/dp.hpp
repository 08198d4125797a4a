#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cps/belief.hpp"
#include "cps/simplex_grid.hpp"
#include "cps/system.hpp"

namespace cps {

enum class ValueRep { Alpha, Grid };

/// One linear piece of a stage value: value contribution <coef, pi>, tagged
/// with the joint action whose backup generated it.
struct AlphaVector {
  dvec coef;
  int action = 0;
};

// Stage value over the joint-belief simplex. The alpha representation is the
// exact piecewise linear concave form (pointwise minimum of linear pieces,
// finite observation space); the grid representation stores node values on a
// SimplexGrid and interpolates barycentrically.
class ValueFunction {
 public:
  int stage = 0;
  ValueRep rep = ValueRep::Alpha;

  std::vector<AlphaVector> alphas;

  std::shared_ptr<const SimplexGrid> grid;
  dvec node_values;
  std::vector<int> node_actions;

  double value(const dvec& mass) const;
  double value(const JointBelief& pi) const { return value(pi.mass); }

  /// Value at lambda*a + (1-lambda)*b. For the alpha representation the
  /// minimum is taken over per-piece convex combinations, so the concavity
  /// comparison against lambda*V(a) + (1-lambda)*V(b) is exact in floating
  /// point (rounding is monotone); the grid path mixes and interpolates.
  double value_on_segment(const dvec& a, const dvec& b, double lambda) const;
};

struct SolveOptions {
  ValueRep rep = ValueRep::Alpha;
  int grid_resolution = 0;       // 0 = derive from max_grid_nodes
  long long max_grid_nodes = 100000;
  double prune_tol = 1e-12;      // pairwise dominance tolerance
};

/// Joint greedy action at pi by one-step lookahead against V_{t+1}; ties go
/// to the smallest joint-action index.
int greedy_action(const System& sys, const ValueFunction& v_next,
                  const JointBelief& pi);

/// Q(pi, u) for every joint action: immediate cost + expected mismatch +
/// expected continuation through the filter update.
dvec q_values(const System& sys, const ValueFunction& v_next,
              const JointBelief& pi);

// Per-stage maps from the joint belief to a joint action, one component per
// subsystem. Reads nothing but the belief: there is no history argument.
class SeparatedStrategy {
 public:
  SeparatedStrategy() = default;
  SeparatedStrategy(std::shared_ptr<const System> sys,
                    std::shared_ptr<const std::vector<ValueFunction>> values);

  /// Joint action at stage pi.stage.
  int act(const JointBelief& pi) const;
  /// Subsystem k's component of the joint action.
  int component(int k, const JointBelief& pi) const;

  const std::vector<ValueFunction>& values() const { return *values_; }

 private:
  std::shared_ptr<const System> sys_;
  std::shared_ptr<const std::vector<ValueFunction>> values_;
};

struct Solution {
  std::vector<ValueFunction> values;  // index t = 0..T
  SeparatedStrategy strategy;
  double value_at_init = 0.0;         // V_0 at the initial joint belief
};

/// One backward step: V_t from V_{t+1}, including the mismatch penalty
/// term. Also records greedy actions (alpha tags / grid node actions).
ValueFunction backup(const System& sys, const ValueFunction& v_next, int t,
                     const SolveOptions& opts = {});

/// Terminal value V_T(pi) = sum_x c_T(x) * model-marginal(pi).
ValueFunction terminal_value(const System& sys, const SolveOptions& opts = {});

Solution solve(const System& sys, const SolveOptions& opts = {});

using BeliefPolicy = std::function<int(int t, const JointBelief& pi)>;

struct EvalOptions {
  std::uint64_t max_tree_nodes = 1000000;
  bool allow_monte_carlo = false;
  int mc_episodes = 100000;
  std::uint64_t mc_seed = 1;
};

struct EvalResult {
  double value = 0.0;       // expected total cost J_0 (stage + mismatch + terminal)
  bool exact = true;
  double std_error = 0.0;   // 0 when exact
  std::uint64_t leaves = 0;
};

/// Expected total cost of a belief-fed policy: exact forward enumeration over
/// every joint realization when the reachable tree fits the budget, Monte
/// Carlo with a reported standard error otherwise (if allowed).
EvalResult evaluate_policy(const System& sys, const BeliefPolicy& policy,
                           const EvalOptions& opts = {});

struct ConcavityReport {
  int trials = 0;
  int violations = 0;
  double max_violation = 0.0;
  double tolerance = 0.0;
};

/// Samples belief pairs and mixing weights and checks
/// V(mix) >= lambda*V(a) + (1-lambda)*V(b) - tol, with tol = 0 for the alpha
/// representation and grid_interpolation_tolerance for grids.
ConcavityReport check_concavity(const System& sys, const ValueFunction& v,
                                int trials, UniformSource& rng);

/// Documented a-priori bound on grid-interpolation concavity violations:
/// (2T+1) * C_range * (|X|^2 - 1) / m, where C_range bounds the spread of any
/// accumulated cost (stage + mismatch + terminal). Derivation: alpha spreads
/// are at most C_range, the Lipschitz constant in l1 is C_range/2, a
/// triangulation cell has l1 diameter at most 2(|X|^2-1)/m, and interpolation
/// error compounds once per backup plus once per endpoint of the tested
/// segment.
double grid_interpolation_tolerance(const System& sys, int resolution);

/// Uniform (flat Dirichlet) random belief; shared by property tests and the
/// concavity sampler.
JointBelief random_belief(int dim, int stage, UniformSource& rng);

// versioned artifact (text) holding the solved values; reloadable by the
// simulator and the CLI
void save_solution(const Solution& sol, const System& sys,
                   const std::string& path, std::uint64_t config_hash,
                   std::uint64_t seed);
Solution load_solution(const std::string& path,
                       std::shared_ptr<const System> sys);

}  // namespace cps
