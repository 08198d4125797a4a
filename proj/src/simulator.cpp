#include "cps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace cps {

KernelEstimate::KernelEstimate(int num_states, int num_joint_actions,
                               double pseudo_count)
    : n_(num_states), nu_(num_joint_actions), pseudo_(pseudo_count) {
  if (pseudo_count <= 0.0)
    throw std::invalid_argument("KernelEstimate: pseudo count must be > 0");
  counts_.assign(static_cast<std::size_t>(n_) * nu_ * n_, 0.0);
}

void KernelEstimate::add(int x_hat, int u_joint, int x_hat_next, double weight) {
  if (weight < 0.0)
    throw std::invalid_argument("KernelEstimate: negative count weight");
  counts_[(static_cast<std::size_t>(x_hat) * nu_ + u_joint) * n_ + x_hat_next] +=
      weight;
}

double KernelEstimate::count(int x_hat, int u_joint, int x_hat_next) const {
  return counts_[(static_cast<std::size_t>(x_hat) * nu_ + u_joint) * n_ +
                 x_hat_next];
}

dvec KernelEstimate::row(int x_hat, int u_joint) const {
  dvec r(n_);
  double total = 0.0;
  for (int j = 0; j < n_; ++j) {
    r[j] = count(x_hat, u_joint, j) + pseudo_;
    total += r[j];
  }
  for (double& v : r) v /= total;
  return r;
}

StageTable KernelEstimate::as_kernel(int stages) const {
  dvec data(static_cast<std::size_t>(n_) * nu_ * n_);
  for (int x = 0; x < n_; ++x)
    for (int u = 0; u < nu_; ++u) {
      dvec r = row(x, u);
      for (int j = 0; j < n_; ++j)
        data[(static_cast<std::size_t>(x) * nu_ + u) * n_ + j] = r[j];
    }
  return StageTable::stationary(stages, n_ * nu_, n_, std::move(data));
}

bool observations_identify_state(const System& sys, int t) {
  std::vector<int> seen(sys.num_joint_observations(), -1);
  for (int x = 0; x < sys.num_states; ++x) {
    std::vector<int> y(sys.num_subsystems);
    for (int k = 0; k < sys.num_subsystems; ++k) {
      const double* row = sys.observation_kernels[k].row(t, x);
      int arg = 0;
      for (int o = 1; o < sys.observations_per_subsystem[k]; ++o)
        if (row[o] > row[arg]) arg = o;
      if (row[arg] < 1.0 - 1e-9) return false;  // noisy row
      y[k] = arg;
    }
    int yj = sys.encode_observation(y);
    if (seen[yj] != -1) return false;  // not injective
    seen[yj] = x;
  }
  return true;
}

int state_from_observation(const System& sys, int t,
                           const std::vector<int>& y) {
  int yj = sys.encode_observation(y);
  for (int x = 0; x < sys.num_states; ++x) {
    std::vector<int> yx(sys.num_subsystems);
    for (int k = 0; k < sys.num_subsystems; ++k) {
      const double* row = sys.observation_kernels[k].row(t, x);
      int arg = 0;
      for (int o = 1; o < sys.observations_per_subsystem[k]; ++o)
        if (row[o] > row[arg]) arg = o;
      yx[k] = arg;
    }
    if (sys.encode_observation(yx) == yj) return x;
  }
  throw std::invalid_argument("state_from_observation: unmatched observation");
}

namespace {

// Posterior expected transition weights over (xhat, xhat'), conditioned on
// the model observation y_next; the learner's own kernel estimate stands in
// for the unknown actual kernel.
void add_soft_counts(const System& filter_sys, const JointBelief& pi,
                     int u_joint, const std::vector<int>& y_next,
                     KernelEstimate& est) {
  const int n = filter_sys.num_states;
  dvec joint;
  dvec xi(static_cast<std::size_t>(n) * n, 0.0);  // (xhat, xhat') weights
  double z = 0.0;
  for (int x = 0; x < n; ++x) {
    for (int xh = 0; xh < n; ++xh) {
      double w = pi.at(x, xh);
      if (w == 0.0) continue;
      coupled_row(filter_sys, pi.stage, x, xh, u_joint, joint);
      for (int xp = 0; xp < n; ++xp) {
        double lik =
            observation_likelihood(filter_sys, pi.stage + 1, xp, y_next);
        if (lik == 0.0) continue;
        for (int xhp = 0; xhp < n; ++xhp) {
          double m = w * joint[static_cast<std::size_t>(xp) * n + xhp] * lik;
          xi[static_cast<std::size_t>(xh) * n + xhp] += m;
          z += m;
        }
      }
    }
  }
  if (z <= 0.0) return;
  for (int xh = 0; xh < n; ++xh)
    for (int xhp = 0; xhp < n; ++xhp) {
      double m = xi[static_cast<std::size_t>(xh) * n + xhp] / z;
      if (m > 0.0) est.add(xh, u_joint, xhp, m);
    }
}

}  // namespace

Trajectory run_episode(const System& sys, const SeparatedStrategy& strategy,
                       BeliefMode mode, KernelEstimate* estimate,
                       std::uint64_t seed, std::vector<int> delays) {
  if (mode == BeliefMode::Learned && estimate == nullptr)
    throw std::invalid_argument("run_episode: learned mode needs an estimate");
  if (delays.empty()) delays.assign(sys.num_subsystems, 1);

  UniformSource rng(seed);
  const int n = sys.num_states;
  const int K = sys.num_subsystems;
  const int T = sys.horizon;

  // the filter sees the estimated actual kernel in learned mode, frozen for
  // the duration of the episode
  std::optional<System> learned_sys;
  if (mode == BeliefMode::Learned)
    learned_sys = with_actual_kernel(sys, estimate->as_kernel(T));
  const System& filter_sys = learned_sys ? *learned_sys : sys;

  Trajectory traj;
  traj.seed = seed;

  int x, xh;
  {
    int idx = inverse_transform(sys.initial_joint.data(), n * n, rng.next());
    x = idx / n;
    xh = idx % n;
  }

  auto observe_pair = [&](int t, int xm, int xa) {
    std::vector<int> y(K), yh(K);
    for (int k = 0; k < K; ++k) {
      double z = rng.next();  // Z_t^k drives both observation equations
      y[k] = observe_with_draw(sys, t, k, xm, z);
      yh[k] = observe_with_draw(sys, t, k, xa, z);
    }
    return std::make_pair(y, yh);
  };

  auto [y, yh] = observe_pair(0, x, xh);
  JointBelief pi = init_belief(filter_sys);
  DelayedMemory mem = DelayedMemory::init(delays);

  KahanSum j_model, j_actual;
  for (int t = 0; t < T; ++t) {
    StageLog log;
    log.x = x;
    log.x_hat = xh;
    log.y = y;
    log.y_hat = yh;
    log.belief = pi.mass;

    int u_joint = strategy.act(pi);
    log.u = sys.decode_action(u_joint);
    log.cost_model = stage_cost(sys, t, x, u_joint);
    log.cost_actual = stage_cost(sys, t, xh, u_joint);
    j_model.add(log.cost_model);
    j_actual.add(log.cost_actual);

    StepResult s = step_model(sys, t, x, u_joint, rng);
    int xh_next = sys.coupling == Coupling::SharedDisturbance
                      ? step_actual(sys, t, xh, u_joint, s.draw)
                      : step_actual(sys, t, xh, u_joint, rng);
    int x_next = s.next_state;

    log.mismatch = mismatch_penalty(sys, x_next, xh_next);
    j_model.add(log.mismatch);

    auto [y_next, yh_next] = observe_pair(t + 1, x_next, xh_next);

    if (mode == BeliefMode::Learned) {
      if (observations_identify_state(sys, t) &&
          observations_identify_state(sys, t + 1)) {
        estimate->add(state_from_observation(sys, t, yh),
                      u_joint,
                      state_from_observation(sys, t + 1, yh_next), 1.0);
      } else {
        add_soft_counts(filter_sys, pi, u_joint, y_next, *estimate);
      }
    }

    mem = mem.push(y, log.u);
    log.memory = mem.to_trace_string();
    traj.stages.push_back(std::move(log));

    if (t + 1 < T) pi = update(filter_sys, pi, u_joint, y_next);
    x = x_next;
    xh = xh_next;
    y = y_next;
    yh = yh_next;
  }

  traj.x_terminal = x;
  traj.x_hat_terminal = xh;
  traj.y_terminal = y;
  traj.y_hat_terminal = yh;
  traj.terminal_model = terminal_cost(sys, x);
  traj.terminal_actual = terminal_cost(sys, xh);
  j_model.add(traj.terminal_model);
  j_actual.add(traj.terminal_actual);
  traj.j_model = j_model.value();
  traj.j_actual = j_actual.value();
  return traj;
}

MonteCarloCosts monte_carlo_cost(const System& sys,
                                 const SeparatedStrategy& strategy,
                                 BeliefMode mode, int episodes,
                                 std::uint64_t base_seed,
                                 KernelEstimate* estimate) {
  if (episodes < 1)
    throw std::invalid_argument("monte_carlo_cost: episodes must be >= 1");
  KahanSum sj, sj2, sh, sh2;
  for (int e = 0; e < episodes; ++e) {
    Trajectory tr = run_episode(sys, strategy, mode, estimate,
                                base_seed + static_cast<std::uint64_t>(e));
    sj.add(tr.j_model);
    sj2.add(tr.j_model * tr.j_model);
    sh.add(tr.j_actual);
    sh2.add(tr.j_actual * tr.j_actual);
  }
  MonteCarloCosts out;
  out.episodes = episodes;
  out.j_mean = sj.value() / episodes;
  out.j_hat_mean = sh.value() / episodes;
  double vj = std::max(0.0, sj2.value() / episodes - out.j_mean * out.j_mean);
  double vh =
      std::max(0.0, sh2.value() / episodes - out.j_hat_mean * out.j_hat_mean);
  out.j_se = std::sqrt(vj / episodes);
  out.j_hat_se = std::sqrt(vh / episodes);
  return out;
}

Theorem3Report theorem3_check(const System& sys,
                              const SeparatedStrategy& strategy, int episodes,
                              std::uint64_t base_seed) {
  Theorem3Report rep;
  KahanSum sj, sj2, sh, sh2;
  for (int e = 0; e < episodes; ++e) {
    Trajectory tr = run_episode(sys, strategy, BeliefMode::Exact, nullptr,
                                base_seed + static_cast<std::uint64_t>(e));
    for (const StageLog& s : tr.stages) {
      if (s.x != s.x_hat) rep.trajectories_coincide = false;
      if (s.mismatch != 0.0) rep.all_mismatch_zero = false;
      rep.max_mismatch = std::max(rep.max_mismatch, s.mismatch);
    }
    if (tr.x_terminal != tr.x_hat_terminal) rep.trajectories_coincide = false;
    if (tr.j_model != tr.j_actual) rep.per_episode_costs_equal = false;
    sj.add(tr.j_model);
    sj2.add(tr.j_model * tr.j_model);
    sh.add(tr.j_actual);
    sh2.add(tr.j_actual * tr.j_actual);
  }
  rep.costs.episodes = episodes;
  rep.costs.j_mean = sj.value() / episodes;
  rep.costs.j_hat_mean = sh.value() / episodes;
  double vj =
      std::max(0.0, sj2.value() / episodes - rep.costs.j_mean * rep.costs.j_mean);
  double vh = std::max(0.0, sh2.value() / episodes -
                                rep.costs.j_hat_mean * rep.costs.j_hat_mean);
  rep.costs.j_se = std::sqrt(vj / episodes);
  rep.costs.j_hat_se = std::sqrt(vh / episodes);
  rep.gap = std::abs(rep.costs.j_mean - rep.costs.j_hat_mean);
  double scale = 3.0 * (rep.costs.j_se + rep.costs.j_hat_se);
  rep.gap_within_3se = rep.gap <= scale || rep.gap == 0.0;
  return rep;
}

ProbeHistory make_probe(const System& sys, const SeparatedStrategy& strategy,
                        std::uint64_t seed) {
  Trajectory tr = run_episode(sys, strategy, BeliefMode::Exact, nullptr, seed);
  ProbeHistory probe;
  for (std::size_t t = 0; t < tr.stages.size(); ++t) {
    probe.u.push_back(sys.encode_action(tr.stages[t].u));
    probe.y.push_back(t + 1 < tr.stages.size() ? tr.stages[t + 1].y
                                               : tr.y_terminal);
  }
  return probe;
}

double probe_tv_distance(const System& filter_a, const System& filter_b,
                         const ProbeHistory& probe) {
  JointBelief a = init_belief(filter_a);
  JointBelief b = init_belief(filter_b);
  double worst = 0.0;
  for (std::size_t t = 0; t < probe.u.size(); ++t) {
    a = update(filter_a, a, probe.u[t], probe.y[t]);
    b = update(filter_b, b, probe.u[t], probe.y[t]);
    double tv = 0.0;
    for (std::size_t i = 0; i < a.mass.size(); ++i)
      tv += std::abs(a.mass[i] - b.mass[i]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

LearnResult learn_online(const System& sys, const SeparatedStrategy& strategy,
                         int episodes, std::uint64_t base_seed,
                         const ProbeHistory& probe) {
  KernelEstimate estimate(sys.num_states, sys.num_joint_actions(), 1.0);
  LearnResult out{dvec{}, {}, estimate};
  int checkpoint_every = std::max(1, episodes / 20);
  for (int e = 0; e < episodes; ++e) {
    run_episode(sys, strategy, BeliefMode::Learned, &estimate,
                base_seed + static_cast<std::uint64_t>(e));
    System learned = with_actual_kernel(sys, estimate.as_kernel(sys.horizon));
    out.tv_curve.push_back(probe_tv_distance(sys, learned, probe));
    if ((e + 1) % checkpoint_every == 0)
      out.estimate_history.emplace_back(e + 1, estimate);
  }
  out.final_estimate = estimate;
  return out;
}

void write_trace(std::ostream& out, const std::vector<Trajectory>& episodes,
                 std::uint64_t config_hash, BeliefMode mode,
                 Coupling coupling) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash));
  out << "# cpstrace 1 config_hash=" << buf << " seed="
      << (episodes.empty() ? 0 : episodes.front().seed)
      << " mode=" << (mode == BeliefMode::Exact ? "exact" : "learned")
      << " coupling="
      << (coupling == Coupling::SharedDisturbance ? "shared" : "independent")
      << " episodes=" << episodes.size() << "\n";
  out << "# stage records: episode stage x xhat u y yhat cost_model "
         "cost_actual mismatch mem belief\n";
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
    return s;
  };
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Trajectory& tr = episodes[e];
    for (std::size_t t = 0; t < tr.stages.size(); ++t) {
      const StageLog& s = tr.stages[t];
      out << e << " " << t << " " << s.x << " " << s.x_hat << " " << join(s.u)
          << " " << join(s.y) << " " << join(s.y_hat) << " "
          << num(s.cost_model) << " " << num(s.cost_actual) << " "
          << num(s.mismatch) << " mem=" << s.memory << " ";
      for (std::size_t i = 0; i < s.belief.size(); ++i)
        out << (i ? "," : "") << num(s.belief[i]);
      out << "\n";
    }
    out << e << " terminal " << tr.x_terminal << " " << tr.x_hat_terminal
        << " " << join(tr.y_terminal) << " " << join(tr.y_hat_terminal) << " "
        << num(tr.terminal_model) << " " << num(tr.terminal_actual) << " j="
        << num(tr.j_model) << " jhat=" << num(tr.j_actual) << "\n";
  }
}

}  // namespace cps
