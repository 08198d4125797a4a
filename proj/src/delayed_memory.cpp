#include "cps/delayed_memory.hpp"

#include <algorithm>
#include <sstream>

namespace cps {

DelayedMemory DelayedMemory::init(std::vector<int> delays) {
  if (delays.empty()) throw ValidationError("delays: need one per subsystem");
  for (int n : delays)
    if (n < 1) throw ValidationError("delays must be >= 1");
  DelayedMemory m;
  m.delays_ = std::move(delays);
  return m;
}

DelayedMemory DelayedMemory::push(const std::vector<int>& y,
                                  const std::vector<int>& u) const {
  const auto k = delays_.size();
  if (y.size() != k || u.size() != k)
    throw std::invalid_argument("push: dimension mismatch with K");
  DelayedMemory next = *this;
  next.records_y_.push_back(y);
  next.records_u_.push_back(u);
  return next;
}

std::vector<DelayedMemory::SharedItem> DelayedMemory::shared_view() const {
  std::vector<SharedItem> out;
  const int t = stage();
  for (int s = 0; s <= t; ++s)
    for (int k = 0; k < num_subsystems(); ++k)
      if (s <= t - delays_[k])
        out.push_back({s, k, records_y_[s][k], records_u_[s][k]});
  return out;
}

DelayedMemory::PrivateView DelayedMemory::private_view(int k) const {
  if (k < 0 || k >= num_subsystems())
    throw std::out_of_range("private_view: subsystem out of range");
  PrivateView v;
  const int t = stage();
  if (t < 0) return v;
  v.first_stage = std::max(0, t - delays_[k] + 1);
  for (int s = v.first_stage; s <= t; ++s) {
    v.observations.push_back(records_y_[s][k]);
    if (s <= t - 1) v.actions.push_back(records_u_[s][k]);
  }
  return v;
}

std::string DelayedMemory::to_trace_string() const {
  // mem=t:<stage>;d:<stage.k.y.u,...>;l<k>:<y...|u...>...
  std::ostringstream os;
  os << "t:" << stage() << ";d:";
  bool first = true;
  for (const SharedItem& it : shared_view()) {
    if (!first) os << ",";
    first = false;
    os << it.stage << "." << it.subsystem << "." << it.observation << "."
       << it.action;
  }
  for (int k = 0; k < num_subsystems(); ++k) {
    PrivateView v = private_view(k);
    os << ";l" << (k + 1) << ":";
    for (std::size_t i = 0; i < v.observations.size(); ++i) {
      if (i) os << ".";
      os << v.observations[i];
    }
    os << "|";
    for (std::size_t i = 0; i < v.actions.size(); ++i) {
      if (i) os << ".";
      os << v.actions[i];
    }
  }
  return os.str();
}

}  // namespace cps
