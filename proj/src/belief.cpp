#include "cps/belief.hpp"

#include <sstream>

namespace cps {

namespace {

std::string impossible_message(int stage, int u_joint,
                               const std::vector<int>& y) {
  std::ostringstream os;
  os << "impossible observation under current belief at stage " << stage
     << " after action " << u_joint << ", y = (";
  for (std::size_t k = 0; k < y.size(); ++k) os << (k ? "," : "") << y[k];
  os << ")";
  return os.str();
}

}  // namespace

double JointBelief::total() const {
  double s = 0.0;
  for (double v : mass) s += v;
  return s;
}

ImpossibleObservation::ImpossibleObservation(int stage, int u_joint,
                                             std::vector<int> y)
    : std::runtime_error(impossible_message(stage, u_joint, y)),
      stage_(stage),
      u_joint_(u_joint),
      y_(std::move(y)) {}

JointBelief init_belief(const System& sys) {
  JointBelief pi;
  pi.mass = sys.initial_joint;
  pi.dim = sys.num_states;
  pi.stage = 0;
  return pi;
}

JointBelief predict(const System& sys, const JointBelief& pi, int u_joint) {
  const int n = pi.dim;
  JointBelief out;
  out.dim = n;
  out.stage = pi.stage + 1;
  out.mass.assign(static_cast<std::size_t>(n) * n, 0.0);
  dvec joint;
  for (int x = 0; x < n; ++x) {
    for (int xh = 0; xh < n; ++xh) {
      double w = pi.at(x, xh);
      if (w == 0.0) continue;
      coupled_row(sys, pi.stage, x, xh, u_joint, joint);
      for (std::size_t idx = 0; idx < joint.size(); ++idx)
        out.mass[idx] += w * joint[idx];
    }
  }
  return out;
}

namespace {

// Applies the model-state likelihood and normalizes; returns the normalizer.
double condition_in_place(const System& sys, JointBelief& predicted,
                          const std::vector<int>& y) {
  const int n = predicted.dim;
  double norm = 0.0;
  for (int x = 0; x < n; ++x) {
    double lik = observation_likelihood(sys, predicted.stage, x, y);
    for (int xh = 0; xh < n; ++xh) {
      predicted.at(x, xh) *= lik;
      norm += predicted.at(x, xh);
    }
  }
  if (norm > 0.0)
    for (double& v : predicted.mass) v /= norm;
  return norm;
}

}  // namespace

JointBelief update(const System& sys, const JointBelief& pi, int u_joint,
                   const std::vector<int>& y) {
  JointBelief out = predict(sys, pi, u_joint);
  if (condition_in_place(sys, out, y) <= 0.0)
    throw ImpossibleObservation(pi.stage, u_joint, y);
  return out;
}

JointBelief condition_on_observation(const System& sys,
                                     const JointBelief& predicted,
                                     const std::vector<int>& y) {
  JointBelief out = predicted;
  if (condition_in_place(sys, out, y) <= 0.0)
    throw ImpossibleObservation(predicted.stage, -1, y);
  return out;
}

std::pair<dvec, dvec> marginals(const JointBelief& pi) {
  const int n = pi.dim;
  dvec model(n, 0.0), actual(n, 0.0);
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh) {
      model[x] += pi.at(x, xh);
      actual[xh] += pi.at(x, xh);
    }
  return {model, actual};
}

dvec observation_weights(const System& sys, const JointBelief& predicted) {
  const int n = predicted.dim;
  dvec model_marginal(n, 0.0);
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh) model_marginal[x] += predicted.at(x, xh);
  dvec w(sys.num_joint_observations(), 0.0);
  for (int yj = 0; yj < sys.num_joint_observations(); ++yj) {
    std::vector<int> y = sys.decode_observation(yj);
    double p = 0.0;
    for (int x = 0; x < n; ++x)
      p += model_marginal[x] * observation_likelihood(sys, predicted.stage, x, y);
    w[yj] = p;
  }
  return w;
}

}  // namespace cps
