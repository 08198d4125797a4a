#pragma once

#include <utility>
#include <vector>

#include "cps/common.hpp"

namespace cps {

/// Whether one disturbance realization drives both the model and the actual
/// transition at each stage, or each draws fresh.
enum class Coupling { SharedDisturbance, Independent };

// A per-stage family of row tables (kernel rows, cost rows). A stationary
// table stores one stage and serves it for every t.
class StageTable {
 public:
  StageTable() = default;

  static StageTable stationary(int stages, int rows, int cols, dvec data);
  static StageTable per_stage(int rows, int cols, std::vector<dvec> data);

  const double* row(int t, int r) const {
    const dvec& d = data_[stationary_ ? 0 : t];
    return d.data() + static_cast<std::size_t>(r) * cols_;
  }
  double at(int t, int r, int c) const { return row(t, r)[c]; }

  int stages() const { return stages_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool is_stationary() const { return stationary_; }

 private:
  int stages_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  bool stationary_ = true;
  std::vector<dvec> data_;  // one entry if stationary, else `stages_` entries
};

struct CostModel {
  StageTable stage_cost;  // rows = x, cols = joint action; stages 0..T-1
  dvec terminal_cost;     // c_T(x)
  double mismatch_weight = 0.0;
  dvec state_metric;      // d(x, xhat), |X| x |X| row-major

  double metric(int x, int x_hat, int num_states) const {
    return state_metric[static_cast<std::size_t>(x) * num_states + x_hat];
  }
};

/// Fills d(x, xhat) = (x - xhat)^2, the default embedding of the squared
/// state discrepancy for abstract finite states.
dvec squared_index_metric(int num_states);

// The paired finite CPS: the model and the actual system share the state
// space, the action sets, and the observation channels; they differ in the
// transition kernel. Immutable after construction; all operations are pure
// given an explicit UniformSource, so values are freely shareable across
// threads and Monte Carlo parallelism reduces to disjoint per-episode seeds.
struct System {
  int num_states = 0;
  int num_subsystems = 0;
  std::vector<int> actions_per_subsystem;
  std::vector<int> observations_per_subsystem;
  int horizon = 0;  // stages 0..T
  Coupling coupling = Coupling::SharedDisturbance;

  // transition rows indexed by r = x * num_joint_actions() + u, stages 0..T-1
  StageTable model_kernel;
  StageTable actual_kernel;
  // per subsystem: rows = x, cols = |Y^k|, stages 0..T
  std::vector<StageTable> observation_kernels;

  dvec initial_joint;  // |X|^2 row-major over (x, xhat)
  CostModel costs;

  int num_joint_actions() const;
  int num_joint_observations() const;

  // Mixed-radix packing with subsystem 0 as the most significant digit.
  int encode_action(const std::vector<int>& u) const;
  std::vector<int> decode_action(int joint) const;
  int encode_observation(const std::vector<int>& y) const;
  std::vector<int> decode_observation(int joint) const;

  int transition_row(int x, int u_joint) const {
    return x * num_joint_actions() + u_joint;
  }
};

struct JointSample {
  int x = 0;
  int x_hat = 0;
  std::vector<int> u;
  std::vector<int> y;
  std::vector<int> y_hat;
};

/// Checks every structural invariant (row sums within 1e-12, nonnegativity,
/// metric symmetry, cardinalities, horizon) and throws ValidationError with
/// the offending location on the first violation.
void validate(const System& sys);

struct StepResult {
  int next_state;
  double draw;  // the uniform used, so the same W_t can drive the actual step
};

StepResult step_model(const System& sys, int t, int x, int u_joint,
                      UniformSource& rng);

/// Shared-disturbance form: consumes the same uniform as step_model through
/// inverse-transform sampling on the actual kernel row.
int step_actual(const System& sys, int t, int x_hat, int u_joint, double draw);
/// Independent form: draws fresh.
int step_actual(const System& sys, int t, int x_hat, int u_joint,
                UniformSource& rng);

int observe(const System& sys, int t, int k, int x, UniformSource& rng);
int observe_with_draw(const System& sys, int t, int k, int x, double draw);

double stage_cost(const System& sys, int t, int x, int u_joint);
double terminal_cost(const System& sys, int x);

/// beta * d(x', xhat'): the discrepancy penalty evaluated at the realized
/// pair of successor states.
double mismatch_penalty(const System& sys, int x_next, int x_hat_next);

/// Joint successor law P(x', xhat' | x, xhat, u) as a |X|^2 row-major array.
/// Under shared disturbance this is the comonotone coupling of the two kernel
/// rows (both rows inverted against the same uniform, so the joint mass of
/// (i, j) is the overlap of their cumulative intervals); under independent
/// coupling it is the product. Matches the sampling semantics of
/// step_model/step_actual exactly.
void coupled_row(const System& sys, int t, int x, int x_hat, int u_joint,
                 dvec& out);

/// Product over subsystems of P(y^k | x) at stage t (Lemma-style likelihood:
/// only the model state enters).
double observation_likelihood(const System& sys, int t, int x,
                              const std::vector<int>& y);
double observation_likelihood_joint(const System& sys, int t, int x,
                                    int y_joint);

/// Copy of the system with the actual kernel replaced; used when the filter
/// must consume a learned estimate instead of the hidden true kernel.
System with_actual_kernel(const System& sys, StageTable kernel);

}  // namespace cps
