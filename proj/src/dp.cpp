#include "cps/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace cps {

namespace {

double dot(const dvec& a, const dvec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Pairwise pointwise dominance for the min representation: a piece is
// dropped when some other piece is everywhere <= it (within tol). Keeps the
// first of exact duplicates so the result is deterministic.
void prune_alphas(std::vector<AlphaVector>& alphas, double tol) {
  std::vector<bool> dead(alphas.size(), false);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (dead[i]) continue;
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      if (i == j || dead[j]) continue;
      bool dominates = true;  // does j make i redundant?
      bool strictly_before = j < i;
      for (std::size_t c = 0; c < alphas[i].coef.size(); ++c) {
        if (alphas[j].coef[c] > alphas[i].coef[c] + tol) {
          dominates = false;
          break;
        }
      }
      if (dominates) {
        // identical pieces: drop the later one only
        bool identical = true;
        for (std::size_t c = 0; c < alphas[i].coef.size(); ++c)
          if (alphas[i].coef[c] != alphas[j].coef[c]) {
            identical = false;
            break;
          }
        if (!identical || strictly_before) {
          dead[i] = true;
          break;
        }
      }
    }
  }
  std::vector<AlphaVector> kept;
  for (std::size_t i = 0; i < alphas.size(); ++i)
    if (!dead[i]) kept.push_back(std::move(alphas[i]));
  alphas = std::move(kept);
}

std::shared_ptr<const SimplexGrid> make_grid(const System& sys,
                                             const SolveOptions& opts) {
  int dim = sys.num_states * sys.num_states;
  int m = opts.grid_resolution > 0
              ? opts.grid_resolution
              : SimplexGrid::suggest_resolution(dim, opts.max_grid_nodes);
  return std::make_shared<SimplexGrid>(dim, m);
}

double cost_range(const StageTable& table, int t) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int r = 0; r < table.rows(); ++r)
    for (int c = 0; c < table.cols(); ++c) {
      double v = table.at(t, r, c);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  return hi - lo;
}

}  // namespace

double ValueFunction::value(const dvec& mass) const {
  if (rep == ValueRep::Alpha) {
    double best = std::numeric_limits<double>::infinity();
    for (const AlphaVector& a : alphas) best = std::min(best, dot(a.coef, mass));
    return best;
  }
  double v = 0.0;
  for (const auto& [idx, w] : grid->barycentric(mass)) v += w * node_values[idx];
  return v;
}

double ValueFunction::value_on_segment(const dvec& a, const dvec& b,
                                       double lambda) const {
  if (rep == ValueRep::Alpha) {
    double best = std::numeric_limits<double>::infinity();
    for (const AlphaVector& al : alphas)
      best = std::min(best,
                      lambda * dot(al.coef, a) + (1.0 - lambda) * dot(al.coef, b));
    return best;
  }
  dvec mix(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    mix[i] = lambda * a[i] + (1.0 - lambda) * b[i];
  return value(mix);
}

ValueFunction terminal_value(const System& sys, const SolveOptions& opts) {
  const int n = sys.num_states;
  ValueFunction v;
  v.stage = sys.horizon;
  v.rep = opts.rep;
  dvec coef(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh)
      coef[static_cast<std::size_t>(x) * n + xh] = sys.costs.terminal_cost[x];
  if (opts.rep == ValueRep::Alpha) {
    v.alphas.push_back({coef, 0});
    return v;
  }
  v.grid = make_grid(sys, opts);
  v.node_values.resize(v.grid->size());
  v.node_actions.assign(v.grid->size(), 0);
  for (int i = 0; i < v.grid->size(); ++i)
    v.node_values[i] = dot(coef, v.grid->node_point(i));
  return v;
}

dvec q_values(const System& sys, const ValueFunction& v_next,
              const JointBelief& pi) {
  if (v_next.stage != pi.stage + 1)
    throw std::invalid_argument("q_values: value function is for stage " +
                                std::to_string(v_next.stage) +
                                ", belief is at stage " +
                                std::to_string(pi.stage));
  const int t = pi.stage;
  const int n = sys.num_states;
  const int nu = sys.num_joint_actions();
  dvec q(nu, 0.0);
  dvec model_marginal(n, 0.0);
  for (int x = 0; x < n; ++x)
    for (int xh = 0; xh < n; ++xh) model_marginal[x] += pi.at(x, xh);

  for (int u = 0; u < nu; ++u) {
    double val = 0.0;
    for (int x = 0; x < n; ++x) val += model_marginal[x] * stage_cost(sys, t, x, u);
    JointBelief predicted = predict(sys, pi, u);
    if (sys.costs.mismatch_weight > 0.0)
      for (int x = 0; x < n; ++x)
        for (int xh = 0; xh < n; ++xh)
          val += predicted.at(x, xh) * mismatch_penalty(sys, x, xh);
    dvec w = observation_weights(sys, predicted);
    for (int yj = 0; yj < sys.num_joint_observations(); ++yj) {
      if (w[yj] <= 0.0) continue;  // zero-probability observations are skipped
      JointBelief posterior =
          condition_on_observation(sys, predicted, sys.decode_observation(yj));
      val += w[yj] * v_next.value(posterior);
    }
    q[u] = val;
  }
  return q;
}

int greedy_action(const System& sys, const ValueFunction& v_next,
                  const JointBelief& pi) {
  dvec q = q_values(sys, v_next, pi);
  int best = 0;
  for (int u = 1; u < static_cast<int>(q.size()); ++u)
    if (q[u] < q[best]) best = u;
  return best;
}

ValueFunction backup(const System& sys, const ValueFunction& v_next, int t,
                     const SolveOptions& opts) {
  if (v_next.stage != t + 1)
    throw std::invalid_argument("backup: V_next must be for stage t+1");
  if (v_next.rep != opts.rep)
    throw std::invalid_argument("backup: representation mismatch between stages");

  const int n = sys.num_states;
  const int d = n * n;
  const int nu = sys.num_joint_actions();
  const int ny = sys.num_joint_observations();

  ValueFunction v;
  v.stage = t;
  v.rep = opts.rep;

  if (opts.rep == ValueRep::Grid) {
    v.grid = v_next.grid;
    v.node_values.resize(v.grid->size());
    v.node_actions.resize(v.grid->size());
    for (int i = 0; i < v.grid->size(); ++i) {
      JointBelief pi;
      pi.mass = v.grid->node_point(i);
      pi.dim = n;
      pi.stage = t;
      dvec q = q_values(sys, v_next, pi);
      int best = 0;
      for (int u = 1; u < nu; ++u)
        if (q[u] < q[best]) best = u;
      v.node_values[i] = q[best];
      v.node_actions[i] = best;
    }
    return v;
  }

  // Exact alpha backup. For each action: the immediate piece collects the
  // stage cost and the expected mismatch penalty; each observation projects
  // every next-stage piece back through kernel * likelihood; the cross-sum
  // over observations enumerates every way of pairing observations with
  // next-stage pieces, pruned incrementally by pairwise dominance.
  std::vector<AlphaVector> result;
  dvec joint;
  for (int u = 0; u < nu; ++u) {
    dvec imm(d, 0.0);
    std::vector<std::vector<dvec>> g_sets(ny);
    for (int y = 0; y < ny; ++y)
      g_sets[y].assign(v_next.alphas.size(), dvec(d, 0.0));
    dvec lik(static_cast<std::size_t>(ny) * n);
    for (int yj = 0; yj < ny; ++yj)
      for (int xp = 0; xp < n; ++xp)
        lik[static_cast<std::size_t>(yj) * n + xp] =
            observation_likelihood_joint(sys, t + 1, xp, yj);

    for (int x = 0; x < n; ++x) {
      for (int xh = 0; xh < n; ++xh) {
        int src = x * n + xh;
        coupled_row(sys, t, x, xh, u, joint);
        imm[src] = stage_cost(sys, t, x, u);
        for (int xp = 0; xp < n; ++xp) {
          for (int xhp = 0; xhp < n; ++xhp) {
            double p = joint[static_cast<std::size_t>(xp) * n + xhp];
            if (p == 0.0) continue;
            imm[src] += p * mismatch_penalty(sys, xp, xhp);
            for (int yj = 0; yj < ny; ++yj) {
              double pl = p * lik[static_cast<std::size_t>(yj) * n + xp];
              if (pl == 0.0) continue;
              for (std::size_t a = 0; a < v_next.alphas.size(); ++a)
                g_sets[yj][a][src] +=
                    pl * v_next.alphas[a].coef[static_cast<std::size_t>(xp) * n + xhp];
            }
          }
        }
      }
    }

    std::vector<AlphaVector> acc;
    acc.push_back({imm, u});
    for (int yj = 0; yj < ny; ++yj) {
      std::vector<AlphaVector> g;
      for (auto& vec : g_sets[yj]) g.push_back({vec, u});
      prune_alphas(g, opts.prune_tol);
      std::vector<AlphaVector> next;
      next.reserve(acc.size() * g.size());
      for (const AlphaVector& a : acc) {
        for (const AlphaVector& b : g) {
          AlphaVector s;
          s.action = u;
          s.coef.resize(d);
          for (int c = 0; c < d; ++c) s.coef[c] = a.coef[c] + b.coef[c];
          next.push_back(std::move(s));
        }
      }
      prune_alphas(next, opts.prune_tol);
      acc = std::move(next);
    }
    for (AlphaVector& a : acc) result.push_back(std::move(a));
  }
  prune_alphas(result, opts.prune_tol);
  v.alphas = std::move(result);
  return v;
}

SeparatedStrategy::SeparatedStrategy(
    std::shared_ptr<const System> sys,
    std::shared_ptr<const std::vector<ValueFunction>> values)
    : sys_(std::move(sys)), values_(std::move(values)) {}

int SeparatedStrategy::act(const JointBelief& pi) const {
  if (!sys_) throw std::logic_error("SeparatedStrategy: empty");
  if (pi.stage < 0 || pi.stage >= sys_->horizon)
    throw std::out_of_range("SeparatedStrategy: stage out of range");
  return greedy_action(*sys_, (*values_)[pi.stage + 1], pi);
}

int SeparatedStrategy::component(int k, const JointBelief& pi) const {
  return sys_->decode_action(act(pi))[k];
}

Solution solve(const System& sys, const SolveOptions& opts) {
  Solution sol;
  sol.values.resize(sys.horizon + 1);
  sol.values[sys.horizon] = terminal_value(sys, opts);
  for (int t = sys.horizon - 1; t >= 0; --t)
    sol.values[t] = backup(sys, sol.values[t + 1], t, opts);
  auto sys_ptr = std::make_shared<const System>(sys);
  auto values_ptr =
      std::make_shared<const std::vector<ValueFunction>>(sol.values);
  sol.strategy = SeparatedStrategy(sys_ptr, values_ptr);
  sol.value_at_init = sol.values[0].value(init_belief(sys));
  return sol;
}

namespace {

struct EnumState {
  const System* sys;
  const BeliefPolicy* policy;
  std::uint64_t max_nodes;
  std::uint64_t nodes = 0;
  KahanSum total;
};

void enumerate(EnumState& st, int t, int x, int xh, double prob,
               const JointBelief& pi) {
  if (++st.nodes > st.max_nodes)
    throw BudgetError("evaluate_policy: reachable tree exceeds " +
                      std::to_string(st.max_nodes) + " nodes");
  const System& sys = *st.sys;
  if (t == sys.horizon) {
    st.total.add(prob * terminal_cost(sys, x));
    return;
  }
  int u = (*st.policy)(t, pi);
  st.total.add(prob * stage_cost(sys, t, x, u));
  JointBelief predicted = predict(sys, pi, u);
  dvec w = observation_weights(sys, predicted);
  dvec joint;
  coupled_row(sys, t, x, xh, u, joint);
  const int n = sys.num_states;
  // mismatch term: depends only on the realized successor pair
  for (int xp = 0; xp < n; ++xp)
    for (int xhp = 0; xhp < n; ++xhp) {
      double p = joint[static_cast<std::size_t>(xp) * n + xhp];
      if (p > 0.0) st.total.add(prob * p * mismatch_penalty(sys, xp, xhp));
    }
  for (int yj = 0; yj < sys.num_joint_observations(); ++yj) {
    if (w[yj] <= 0.0) continue;
    std::vector<int> y = sys.decode_observation(yj);
    JointBelief next_pi = condition_on_observation(sys, predicted, y);
    for (int xp = 0; xp < n; ++xp) {
      double lik = observation_likelihood(sys, t + 1, xp, y);
      if (lik == 0.0) continue;
      for (int xhp = 0; xhp < n; ++xhp) {
        double p = joint[static_cast<std::size_t>(xp) * n + xhp];
        if (p == 0.0) continue;
        enumerate(st, t + 1, xp, xhp, prob * p * lik, next_pi);
      }
    }
  }
}

}  // namespace

EvalResult evaluate_policy(const System& sys, const BeliefPolicy& policy,
                           const EvalOptions& opts) {
  EvalResult res;
  try {
    EnumState st{&sys, &policy, opts.max_tree_nodes};
    JointBelief pi0 = init_belief(sys);
    const int n = sys.num_states;
    for (int x = 0; x < n; ++x)
      for (int xh = 0; xh < n; ++xh) {
        double p = sys.initial_joint[static_cast<std::size_t>(x) * n + xh];
        if (p > 0.0) enumerate(st, 0, x, xh, p, pi0);
      }
    res.value = st.total.value();
    res.exact = true;
    res.leaves = st.nodes;
    return res;
  } catch (const BudgetError&) {
    if (!opts.allow_monte_carlo) throw;
  }

  // Monte Carlo fallback: independent seeded episodes.
  KahanSum sum, sumsq;
  for (int e = 0; e < opts.mc_episodes; ++e) {
    UniformSource rng(opts.mc_seed + static_cast<std::uint64_t>(e));
    const int n = sys.num_states;
    // sample (x0, xhat0) from the initial joint
    int x = 0, xh = 0;
    {
      double u = rng.next();
      int idx = inverse_transform(sys.initial_joint.data(), n * n, u);
      x = idx / n;
      xh = idx % n;
    }
    JointBelief pi = init_belief(sys);
    double cost = 0.0;
    for (int t = 0; t < sys.horizon; ++t) {
      int u = policy(t, pi);
      cost += stage_cost(sys, t, x, u);
      StepResult s = step_model(sys, t, x, u, rng);
      int xhp = sys.coupling == Coupling::SharedDisturbance
                    ? step_actual(sys, t, xh, u, s.draw)
                    : step_actual(sys, t, xh, u, rng);
      x = s.next_state;
      xh = xhp;
      cost += mismatch_penalty(sys, x, xh);
      std::vector<int> y(sys.num_subsystems);
      for (int k = 0; k < sys.num_subsystems; ++k)
        y[k] = observe(sys, t + 1, k, x, rng);
      pi = update(sys, pi, u, y);
    }
    cost += terminal_cost(sys, x);
    sum.add(cost);
    sumsq.add(cost * cost);
  }
  double mean = sum.value() / opts.mc_episodes;
  double var =
      std::max(0.0, sumsq.value() / opts.mc_episodes - mean * mean);
  res.value = mean;
  res.exact = false;
  res.std_error = std::sqrt(var / opts.mc_episodes);
  res.leaves = opts.mc_episodes;
  return res;
}

double grid_interpolation_tolerance(const System& sys, int resolution) {
  double range = 0.0;
  for (int t = 0; t < sys.horizon; ++t)
    range += cost_range(sys.costs.stage_cost, t);
  double dmax = 0.0;
  for (double v : sys.costs.state_metric) dmax = std::max(dmax, v);
  range += sys.horizon * sys.costs.mismatch_weight * dmax;
  double tlo = *std::min_element(sys.costs.terminal_cost.begin(),
                                 sys.costs.terminal_cost.end());
  double thi = *std::max_element(sys.costs.terminal_cost.begin(),
                                 sys.costs.terminal_cost.end());
  range += thi - tlo;
  int d = sys.num_states * sys.num_states;
  return (2.0 * sys.horizon + 1.0) * range * (d - 1) / resolution;
}

JointBelief random_belief(int dim, int stage, UniformSource& rng) {
  JointBelief pi;
  pi.dim = dim;
  pi.stage = stage;
  pi.mass.resize(static_cast<std::size_t>(dim) * dim);
  double total = 0.0;
  for (double& v : pi.mass) {
    v = -std::log(1.0 - rng.next());
    total += v;
  }
  for (double& v : pi.mass) v /= total;
  return pi;
}

ConcavityReport check_concavity(const System& sys, const ValueFunction& v,
                                int trials, UniformSource& rng) {
  ConcavityReport rep;
  rep.trials = trials;
  rep.tolerance = v.rep == ValueRep::Alpha
                      ? 0.0
                      : grid_interpolation_tolerance(sys, v.grid->resolution());
  for (int i = 0; i < trials; ++i) {
    JointBelief a = random_belief(sys.num_states, v.stage, rng);
    JointBelief b = random_belief(sys.num_states, v.stage, rng);
    double lambda = rng.next();
    double lhs = v.value_on_segment(a.mass, b.mass, lambda);
    double rhs = lambda * v.value(a.mass) + (1.0 - lambda) * v.value(b.mass);
    double gap = rhs - lhs;  // positive gap beyond tol = concavity violation
    if (gap > rep.tolerance) {
      ++rep.violations;
      rep.max_violation = std::max(rep.max_violation, gap);
    }
  }
  return rep;
}

void save_solution(const Solution& sol, const System& sys,
                   const std::string& path, std::uint64_t config_hash,
                   std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "cpsdp 1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash));
  out << "config_hash " << buf << " seed " << seed << "\n";
  const ValueFunction& v0 = sol.values.front();
  out << "rep " << (v0.rep == ValueRep::Alpha ? "alpha" : "grid") << " stages "
      << sol.values.size();
  if (v0.rep == ValueRep::Grid) out << " m " << v0.grid->resolution();
  out << "\n";
  for (const ValueFunction& v : sol.values) {
    if (v.rep == ValueRep::Alpha) {
      out << "stage " << v.stage << " alphas " << v.alphas.size() << " dim "
          << (v.alphas.empty() ? 0 : v.alphas.front().coef.size()) << "\n";
      for (const AlphaVector& a : v.alphas) {
        out << a.action;
        for (double c : a.coef) {
          std::snprintf(buf, sizeof buf, " %.17g", c);
          out << buf;
        }
        out << "\n";
      }
    } else {
      out << "stage " << v.stage << " nodes " << v.node_values.size() << "\n";
      for (std::size_t i = 0; i < v.node_values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v.node_values[i]);
        out << v.node_actions[i] << " " << buf << "\n";
      }
    }
  }
}

Solution load_solution(const std::string& path,
                       std::shared_ptr<const System> sys) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "cpsdp" || version != 1)
    throw std::runtime_error(path + ": not a cpsdp v1 artifact");
  std::string key, hash;
  std::uint64_t seed;
  in >> key >> hash >> key >> seed;
  std::string rep_name;
  std::size_t stages;
  in >> key >> rep_name >> key >> stages;
  ValueRep rep = rep_name == "alpha" ? ValueRep::Alpha : ValueRep::Grid;
  std::shared_ptr<const SimplexGrid> grid;
  if (rep == ValueRep::Grid) {
    int m;
    in >> key >> m;
    grid = std::make_shared<SimplexGrid>(sys->num_states * sys->num_states, m);
  }

  Solution sol;
  sol.values.resize(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    int stage;
    in >> key >> stage;
    ValueFunction& v = sol.values[s];
    v.stage = stage;
    v.rep = rep;
    if (rep == ValueRep::Alpha) {
      std::size_t count, dim;
      in >> key >> count >> key >> dim;
      v.alphas.resize(count);
      for (AlphaVector& a : v.alphas) {
        in >> a.action;
        a.coef.resize(dim);
        for (double& c : a.coef) in >> c;
      }
    } else {
      std::size_t count;
      in >> key >> count;
      v.grid = grid;
      v.node_values.resize(count);
      v.node_actions.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        in >> v.node_actions[i] >> v.node_values[i];
    }
  }
  if (!in) throw std::runtime_error(path + ": truncated artifact");
  auto values_ptr =
      std::make_shared<const std::vector<ValueFunction>>(sol.values);
  sol.strategy = SeparatedStrategy(sys, values_ptr);
  sol.value_at_init = sol.values[0].value(init_belief(*sys));
  return sol;
}

}  // namespace cps
