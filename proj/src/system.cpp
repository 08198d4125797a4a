#include "cps/system.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cps {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_stochastic(const StageTable& table, const std::string& name,
                      int expected_stages) {
  if (table.stages() != expected_stages) {
    std::ostringstream os;
    os << name << ": expected " << expected_stages << " stages, got "
       << table.stages();
    throw ValidationError(os.str());
  }
  int nstages = table.is_stationary() ? 1 : table.stages();
  for (int t = 0; t < nstages; ++t) {
    for (int r = 0; r < table.rows(); ++r) {
      const double* row = table.row(t, r);
      double sum = 0.0;
      for (int c = 0; c < table.cols(); ++c) {
        if (!(row[c] >= 0.0)) {
          std::ostringstream os;
          os << name << ": negative entry " << row[c] << " at stage " << t
             << " row " << r << " col " << c;
          throw ValidationError(os.str());
        }
        sum += row[c];
      }
      if (std::abs(sum - 1.0) > kRowSumTol) {
        std::ostringstream os;
        os << name << ": row sum " << sum << " != 1 at stage " << t << " row "
           << r;
        throw ValidationError(os.str());
      }
    }
  }
}

}  // namespace

StageTable StageTable::stationary(int stages, int rows, int cols, dvec data) {
  if (static_cast<int>(data.size()) != rows * cols)
    throw ValidationError("stationary table size mismatch");
  StageTable t;
  t.stages_ = stages;
  t.rows_ = rows;
  t.cols_ = cols;
  t.stationary_ = true;
  t.data_.push_back(std::move(data));
  return t;
}

StageTable StageTable::per_stage(int rows, int cols, std::vector<dvec> data) {
  StageTable t;
  t.stages_ = static_cast<int>(data.size());
  t.rows_ = rows;
  t.cols_ = cols;
  t.stationary_ = false;
  for (const dvec& d : data)
    if (static_cast<int>(d.size()) != rows * cols)
      throw ValidationError("per-stage table size mismatch");
  t.data_ = std::move(data);
  return t;
}

dvec squared_index_metric(int num_states) {
  dvec d(static_cast<std::size_t>(num_states) * num_states);
  for (int i = 0; i < num_states; ++i)
    for (int j = 0; j < num_states; ++j)
      d[static_cast<std::size_t>(i) * num_states + j] =
          static_cast<double>(i - j) * (i - j);
  return d;
}

int System::num_joint_actions() const {
  int n = 1;
  for (int a : actions_per_subsystem) n *= a;
  return n;
}

int System::num_joint_observations() const {
  int n = 1;
  for (int o : observations_per_subsystem) n *= o;
  return n;
}

int System::encode_action(const std::vector<int>& u) const {
  int joint = 0;
  for (int k = 0; k < num_subsystems; ++k)
    joint = joint * actions_per_subsystem[k] + u[k];
  return joint;
}

std::vector<int> System::decode_action(int joint) const {
  std::vector<int> u(num_subsystems);
  for (int k = num_subsystems - 1; k >= 0; --k) {
    u[k] = joint % actions_per_subsystem[k];
    joint /= actions_per_subsystem[k];
  }
  return u;
}

int System::encode_observation(const std::vector<int>& y) const {
  int joint = 0;
  for (int k = 0; k < num_subsystems; ++k)
    joint = joint * observations_per_subsystem[k] + y[k];
  return joint;
}

std::vector<int> System::decode_observation(int joint) const {
  std::vector<int> y(num_subsystems);
  for (int k = num_subsystems - 1; k >= 0; --k) {
    y[k] = joint % observations_per_subsystem[k];
    joint /= observations_per_subsystem[k];
  }
  return y;
}

void validate(const System& sys) {
  if (sys.num_states <= 0) throw ValidationError("num_states must be positive");
  if (sys.num_subsystems <= 0)
    throw ValidationError("num_subsystems must be positive");
  if (sys.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (static_cast<int>(sys.actions_per_subsystem.size()) != sys.num_subsystems)
    throw ValidationError("actions_per_subsystem size != num_subsystems");
  if (static_cast<int>(sys.observations_per_subsystem.size()) !=
      sys.num_subsystems)
    throw ValidationError("observations_per_subsystem size != num_subsystems");
  for (int k = 0; k < sys.num_subsystems; ++k) {
    if (sys.actions_per_subsystem[k] <= 0)
      throw ValidationError("action cardinality must be positive (subsystem " +
                            std::to_string(k + 1) + ")");
    if (sys.observations_per_subsystem[k] <= 0)
      throw ValidationError(
          "observation cardinality must be positive (subsystem " +
          std::to_string(k + 1) + ")");
  }

  const int n = sys.num_states;
  const int nu = sys.num_joint_actions();
  if (sys.model_kernel.rows() != n * nu || sys.model_kernel.cols() != n)
    throw ValidationError("model_kernel: wrong shape");
  if (sys.actual_kernel.rows() != n * nu || sys.actual_kernel.cols() != n)
    throw ValidationError("actual_kernel: wrong shape");
  check_stochastic(sys.model_kernel, "model_kernel", sys.horizon);
  check_stochastic(sys.actual_kernel, "actual_kernel", sys.horizon);

  if (static_cast<int>(sys.observation_kernels.size()) != sys.num_subsystems)
    throw ValidationError("observation_kernels: one table per subsystem");
  for (int k = 0; k < sys.num_subsystems; ++k) {
    const StageTable& h = sys.observation_kernels[k];
    if (h.rows() != n || h.cols() != sys.observations_per_subsystem[k])
      throw ValidationError("observation_kernel subsystem " +
                            std::to_string(k + 1) + ": wrong shape");
    check_stochastic(h, "observation_kernel subsystem " + std::to_string(k + 1),
                     sys.horizon + 1);
  }

  if (static_cast<int>(sys.initial_joint.size()) != n * n)
    throw ValidationError("initial_joint: expected |X|^2 entries");
  double mass = 0.0;
  for (double p : sys.initial_joint) {
    if (!(p >= 0.0)) throw ValidationError("initial_joint: negative entry");
    mass += p;
  }
  if (std::abs(mass - 1.0) > kRowSumTol)
    throw ValidationError("initial_joint: total mass " + std::to_string(mass) +
                          " != 1");

  const CostModel& c = sys.costs;
  if (c.stage_cost.rows() != n || c.stage_cost.cols() != nu ||
      c.stage_cost.stages() != sys.horizon)
    throw ValidationError("stage_cost: wrong shape");
  int cost_stages = c.stage_cost.is_stationary() ? 1 : c.stage_cost.stages();
  for (int t = 0; t < cost_stages; ++t)
    for (int x = 0; x < n; ++x)
      for (int u = 0; u < nu; ++u)
        if (!std::isfinite(c.stage_cost.at(t, x, u)))
          throw ValidationError("stage_cost: non-finite entry at stage " +
                                std::to_string(t));
  if (static_cast<int>(c.terminal_cost.size()) != n)
    throw ValidationError("terminal_cost: expected |X| entries");
  for (double v : c.terminal_cost)
    if (!std::isfinite(v)) throw ValidationError("terminal_cost: non-finite");
  if (!(c.mismatch_weight >= 0.0))
    throw ValidationError("mismatch_weight must be nonnegative");
  if (static_cast<int>(c.state_metric.size()) != n * n)
    throw ValidationError("state_metric: expected |X|^2 entries");
  for (int i = 0; i < n; ++i) {
    if (c.metric(i, i, n) != 0.0)
      throw ValidationError("state_metric: nonzero diagonal at state " +
                            std::to_string(i));
    for (int j = 0; j < n; ++j) {
      double dij = c.metric(i, j, n);
      if (!(dij >= 0.0) || !std::isfinite(dij))
        throw ValidationError("state_metric: invalid entry (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
      if (dij != c.metric(j, i, n))
        throw ValidationError("state_metric: not symmetric at (" +
                              std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
}

StepResult step_model(const System& sys, int t, int x, int u_joint,
                      UniformSource& rng) {
  if (t < 0 || t >= sys.horizon)
    throw std::out_of_range("step_model: stage out of range");
  double u = rng.next();
  const double* row = sys.model_kernel.row(t, sys.transition_row(x, u_joint));
  return {inverse_transform(row, sys.num_states, u), u};
}

int step_actual(const System& sys, int t, int x_hat, int u_joint, double draw) {
  if (t < 0 || t >= sys.horizon)
    throw std::out_of_range("step_actual: stage out of range");
  const double* row =
      sys.actual_kernel.row(t, sys.transition_row(x_hat, u_joint));
  return inverse_transform(row, sys.num_states, draw);
}

int step_actual(const System& sys, int t, int x_hat, int u_joint,
                UniformSource& rng) {
  return step_actual(sys, t, x_hat, u_joint, rng.next());
}

int observe(const System& sys, int t, int k, int x, UniformSource& rng) {
  return observe_with_draw(sys, t, k, x, rng.next());
}

int observe_with_draw(const System& sys, int t, int k, int x, double draw) {
  if (t < 0 || t > sys.horizon)
    throw std::out_of_range("observe: stage out of range");
  if (k < 0 || k >= sys.num_subsystems)
    throw std::out_of_range("observe: subsystem out of range");
  const double* row = sys.observation_kernels[k].row(t, x);
  return inverse_transform(row, sys.observations_per_subsystem[k], draw);
}

double stage_cost(const System& sys, int t, int x, int u_joint) {
  return sys.costs.stage_cost.at(t, x, u_joint);
}

double terminal_cost(const System& sys, int x) {
  return sys.costs.terminal_cost[x];
}

double mismatch_penalty(const System& sys, int x_next, int x_hat_next) {
  return sys.costs.mismatch_weight *
         sys.costs.metric(x_next, x_hat_next, sys.num_states);
}

void coupled_row(const System& sys, int t, int x, int x_hat, int u_joint,
                 dvec& out) {
  const int n = sys.num_states;
  out.assign(static_cast<std::size_t>(n) * n, 0.0);
  const double* pm = sys.model_kernel.row(t, sys.transition_row(x, u_joint));
  const double* pa =
      sys.actual_kernel.row(t, sys.transition_row(x_hat, u_joint));
  if (sys.coupling == Coupling::Independent) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out[static_cast<std::size_t>(i) * n + j] = pm[i] * pa[j];
    return;
  }
  // Comonotone coupling: mass of (i, j) is the overlap of the cumulative
  // intervals [cm_{i-1}, cm_i) and [ca_{j-1}, ca_j). Two-pointer sweep over
  // ascending state index keeps the layout identical to inverse_transform.
  int i = 0, j = 0;
  double cm_hi = pm[0], ca_hi = pa[0];
  double lo = 0.0;
  while (i < n && j < n) {
    double hi = std::min(cm_hi, ca_hi);
    if (hi > lo) out[static_cast<std::size_t>(i) * n + j] += hi - lo;
    lo = hi;
    if (cm_hi <= ca_hi) {
      ++i;
      if (i < n) cm_hi += pm[i];
    } else {
      ++j;
      if (j < n) ca_hi += pa[j];
    }
  }
}

double observation_likelihood(const System& sys, int t, int x,
                              const std::vector<int>& y) {
  double lik = 1.0;
  for (int k = 0; k < sys.num_subsystems; ++k)
    lik *= sys.observation_kernels[k].at(t, x, y[k]);
  return lik;
}

double observation_likelihood_joint(const System& sys, int t, int x,
                                    int y_joint) {
  return observation_likelihood(sys, t, x, sys.decode_observation(y_joint));
}

System with_actual_kernel(const System& sys, StageTable kernel) {
  System out = sys;
  out.actual_kernel = std::move(kernel);
  return out;
}

}  // namespace cps
