#pragma once

#include <string>
#include <vector>

#include "cps/common.hpp"

namespace cps {

// The n-step delayed-sharing record. Each completed stage holds the
// observations y_t^{1:K} and the actions u_t^{1:K}; subsystem k's data
// becomes common knowledge after its own delay n_k (delays may be
// asymmetric). Push returns a new value, so the filter and the enumeration
// oracles can branch histories freely.
//
// Time accounting: after pushes for stages 0..t the memory presents the
// stage-t views, i.e. what subsystem k knew at the moment it decided u_t:
//   shared (Delta_t):  every (stage s, subsystem k) record with s <= t - n_k
//   private (Lambda_t^k): observations y^k_{t-n_k+1..t} and actions
//                         u^k_{t-n_k+1..t-1}
// The action of the newest push rides along in the record but appears in no
// view until it migrates into the shared set.
class DelayedMemory {
 public:
  /// Empty record at t = 0, before any observation. Delays must be >= 1.
  static DelayedMemory init(std::vector<int> delays);

  /// Appends the completed stage (y_t^{1:K}, u_t^{1:K}) and advances time.
  DelayedMemory push(const std::vector<int>& y, const std::vector<int>& u) const;

  /// Latest completed stage; -1 before the first push.
  int stage() const { return static_cast<int>(records_y_.size()) - 1; }
  int num_subsystems() const { return static_cast<int>(delays_.size()); }
  const std::vector<int>& delays() const { return delays_; }

  struct SharedItem {
    int stage;
    int subsystem;
    int observation;
    int action;
    bool operator==(const SharedItem&) const = default;
  };

  /// Delta_t, ordered by stage then subsystem.
  std::vector<SharedItem> shared_view() const;

  struct PrivateView {
    int first_stage = 0;            // stage of the oldest windowed observation
    std::vector<int> observations;  // y^k over the window, oldest first
    std::vector<int> actions;       // u^k over the window, excludes u_t
  };

  /// Lambda_t^k.
  PrivateView private_view(int k) const;

  /// Compact single-line form for the trace file (replay and audit).
  std::string to_trace_string() const;

 private:
  std::vector<int> delays_;
  std::vector<std::vector<int>> records_y_;  // per stage, per subsystem
  std::vector<std::vector<int>> records_u_;
};

}  // namespace cps
