#pragma once

#include <utility>
#include <vector>

#include "cps/system.hpp"

namespace cps {

// The information state: the joint conditional distribution of
// (model state, actual state) given everything observed so far. The update
// is policy independent by construction -- note that no operation here
// accepts a strategy argument; the filter consumes only realized actions and
// observations.
struct JointBelief {
  dvec mass;      // |X|^2 row-major over (x, xhat)
  int dim = 0;    // |X|
  int stage = 0;  // t

  double at(int x, int x_hat) const {
    return mass[static_cast<std::size_t>(x) * dim + x_hat];
  }
  double& at(int x, int x_hat) {
    return mass[static_cast<std::size_t>(x) * dim + x_hat];
  }
  double total() const;
};

/// Thrown when an observation has zero probability under the current belief;
/// in exact finite systems this signals a modeling bug, so the simulator
/// aborts the episode with these diagnostics instead of resetting.
class ImpossibleObservation : public std::runtime_error {
 public:
  ImpossibleObservation(int stage, int u_joint, std::vector<int> y);
  int stage() const { return stage_; }
  int action() const { return u_joint_; }
  const std::vector<int>& observation() const { return y_; }

 private:
  int stage_;
  int u_joint_;
  std::vector<int> y_;
};

/// Pi_0: the joint law of (X_0, Xhat_0).
JointBelief init_belief(const System& sys);

/// Pre-observation pushforward through the coupled joint kernel.
JointBelief predict(const System& sys, const JointBelief& pi, int u_joint);

/// Full Bayes step: predict with u_t, then condition on y_{t+1}. The
/// likelihood reads only the model-state component.
JointBelief update(const System& sys, const JointBelief& pi, int u_joint,
                   const std::vector<int>& y);

/// Second half of update: conditions an already-predicted belief on y.
JointBelief condition_on_observation(const System& sys,
                                     const JointBelief& predicted,
                                     const std::vector<int>& y);

/// (model marginal over X, actual marginal over X).
std::pair<dvec, dvec> marginals(const JointBelief& pi);

/// Probability of each joint observation after playing u from pi; weights
/// used by the dynamic program's expectation over Y_{t+1}.
dvec observation_weights(const System& sys, const JointBelief& predicted);

}  // namespace cps
