// Command-line surface: load a system description, run
// solve / simulate / filter-trace / example / oracle-check, and emit CSV and
// trace artifacts. Every output embeds the config hash and seed, numbers are
// printed at 12 significant digits, and identical invocations produce
// byte-identical files.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cps/config.hpp"
#include "cps/dp.hpp"
#include "cps/gaussian_example.hpp"
#include "cps/oracle.hpp"
#include "cps/simulator.hpp"

namespace fs = std::filesystem;
using namespace cps;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Options {
  std::string config;
  std::string out_dir;
  std::string policy;
  std::uint64_t seed = 1;
  int episodes = 0;
  std::string mode = "exact";
  double beta = -1.0;  // <0 = keep the config's value
  double rho = 0.5;
  int grid_m = 0;  // 0 = exact alpha representation
  std::string coupling;  // empty = keep the config's value
  int instances = 0;
};

System load_with_overrides(const Options& opt) {
  System sys = load_system(opt.config);
  if (opt.beta >= 0.0) sys.costs.mismatch_weight = opt.beta;
  if (!opt.coupling.empty()) {
    if (opt.coupling == "shared")
      sys.coupling = Coupling::SharedDisturbance;
    else if (opt.coupling == "independent")
      sys.coupling = Coupling::Independent;
    else
      throw ConfigError("--coupling: expected 'shared' or 'independent'");
  }
  validate(sys);
  return sys;
}

SolveOptions solve_options(const Options& opt) {
  SolveOptions so;
  if (opt.grid_m > 0) {
    so.rep = ValueRep::Grid;
    so.grid_resolution = opt.grid_m;
  }
  return so;
}

std::ofstream open_out(const Options& opt, const std::string& name) {
  fs::create_directories(opt.out_dir);
  fs::path p = fs::path(opt.out_dir) / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string header(const Options& opt, const std::string& cmd,
                   std::uint64_t hash) {
  std::string h = "# cpsctl " + cmd + " config_hash=" + hex64(hash) +
                  " seed=" + std::to_string(opt.seed);
  if (opt.beta >= 0.0) h += " beta=" + num(opt.beta);
  if (!opt.coupling.empty()) h += " coupling=" + opt.coupling;
  if (opt.grid_m > 0) h += " grid_m=" + std::to_string(opt.grid_m);
  return h;
}

int cmd_solve(const Options& opt) {
  System sys = load_with_overrides(opt);
  std::uint64_t hash = config_hash(opt.config);
  Solution sol = solve(sys, solve_options(opt));

  save_solution(sol, sys, (fs::path(opt.out_dir) / "values.cpsdp").string(),
                hash, opt.seed);
  std::ofstream csv = open_out(opt, "values.csv");
  csv << header(opt, "solve", hash) << "\n";
  if (sol.values.front().rep == ValueRep::Alpha) {
    csv << "stage,piece,action,coefficients...\n";
    for (const ValueFunction& v : sol.values) {
      for (std::size_t i = 0; i < v.alphas.size(); ++i) {
        csv << v.stage << "," << i << "," << v.alphas[i].action;
        for (double c : v.alphas[i].coef) csv << "," << num(c);
        csv << "\n";
      }
    }
  } else {
    csv << "stage,node,action,value,belief...\n";
    for (const ValueFunction& v : sol.values) {
      for (int i = 0; i < v.grid->size(); ++i) {
        csv << v.stage << "," << i << "," << v.node_actions[i] << ","
            << num(v.node_values[i]);
        for (double b : v.grid->node_point(i)) csv << "," << num(b);
        csv << "\n";
      }
    }
  }
  std::cout << "V0 " << num(sol.value_at_init) << " rep "
            << (sol.values.front().rep == ValueRep::Alpha ? "alpha" : "grid")
            << "\n";
  return 0;
}

int cmd_simulate(const Options& opt) {
  System sys = load_with_overrides(opt);
  std::uint64_t hash = config_hash(opt.config);
  int episodes = opt.episodes > 0 ? opt.episodes : 1000;
  auto sys_ptr = std::make_shared<const System>(sys);

  if (opt.mode == "exact") {
    Solution sol;
    if (!opt.policy.empty())
      sol = load_solution(opt.policy, sys_ptr);
    else
      sol = solve(sys, solve_options(opt));

    MonteCarloCosts costs = monte_carlo_cost(sys, sol.strategy,
                                             BeliefMode::Exact, episodes,
                                             opt.seed);
    Theorem3Report t3 = theorem3_check(sys, sol.strategy, episodes, opt.seed);

    std::vector<Trajectory> traced;
    int n_trace = std::min(episodes, 100);
    for (int e = 0; e < n_trace; ++e)
      traced.push_back(run_episode(sys, sol.strategy, BeliefMode::Exact,
                                   nullptr, opt.seed + e));
    std::ofstream trace = open_out(opt, "trace.txt");
    write_trace(trace, traced, hash, BeliefMode::Exact, sys.coupling);

    std::ofstream csv = open_out(opt, "summary.csv");
    csv << header(opt, "simulate", hash) << " mode=exact episodes="
        << episodes << "\n";
    csv << "metric,value\n";
    csv << "episodes," << episodes << "\n";
    csv << "j_hat_mean," << num(costs.j_hat_mean) << "\n";
    csv << "j_hat_se," << num(costs.j_hat_se) << "\n";
    csv << "j_mean," << num(costs.j_mean) << "\n";
    csv << "j_se," << num(costs.j_se) << "\n";
    csv << "v0," << num(sol.value_at_init) << "\n";
    csv << "mismatch_all_zero," << (t3.all_mismatch_zero ? 1 : 0) << "\n";
    csv << "max_mismatch," << num(t3.max_mismatch) << "\n";
    csv << "trajectories_coincide," << (t3.trajectories_coincide ? 1 : 0)
        << "\n";
    csv << "per_episode_costs_equal," << (t3.per_episode_costs_equal ? 1 : 0)
        << "\n";
    csv << "j_gap," << num(t3.gap) << "\n";
    csv << "j_gap_within_3se," << (t3.gap_within_3se ? 1 : 0) << "\n";
    std::cout << "J_hat " << num(costs.j_hat_mean) << " J " << num(costs.j_mean)
              << " V0 " << num(sol.value_at_init) << "\n";
    return 0;
  }

  if (opt.mode != "learned")
    throw ConfigError("--mode: expected 'exact' or 'learned'");

  // The learner's offline artifact: the dynamic program solved against the
  // smoothing-prior estimate of the unknown actual kernel. The true kernel
  // only ever drives the environment.
  KernelEstimate prior(sys.num_states, sys.num_joint_actions(), 1.0);
  System prior_sys = with_actual_kernel(sys, prior.as_kernel(sys.horizon));
  Solution sol = solve(prior_sys, solve_options(opt));

  ProbeHistory probe = make_probe(sys, sol.strategy, opt.seed);
  LearnResult lr =
      learn_online(sys, sol.strategy, episodes, opt.seed + 1000003, probe);

  std::ofstream curve = open_out(opt, "curve.csv");
  curve << header(opt, "simulate", hash) << " mode=learned episodes="
        << episodes << "\n";
  curve << "episode,tv\n";
  for (std::size_t e = 0; e < lr.tv_curve.size(); ++e)
    curve << (e + 1) << "," << num(lr.tv_curve[e]) << "\n";

  std::ofstream est = open_out(opt, "estimate.csv");
  est << header(opt, "simulate", hash) << " mode=learned episodes=" << episodes
      << "\n";
  est << "xhat,u,xhat_next,count,prob\n";
  for (int xh = 0; xh < sys.num_states; ++xh)
    for (int u = 0; u < sys.num_joint_actions(); ++u) {
      dvec row = lr.final_estimate.row(xh, u);
      for (int xp = 0; xp < sys.num_states; ++xp)
        est << xh << "," << u << "," << xp << ","
            << num(lr.final_estimate.count(xh, u, xp)) << "," << num(row[xp])
            << "\n";
    }

  std::ofstream csv = open_out(opt, "summary.csv");
  csv << header(opt, "simulate", hash) << " mode=learned episodes=" << episodes
      << "\n";
  csv << "metric,value\n";
  csv << "episodes," << episodes << "\n";
  csv << "tv_final," << num(lr.tv_curve.empty() ? 0.0 : lr.tv_curve.back())
      << "\n";
  std::cout << "tv_final "
            << num(lr.tv_curve.empty() ? 0.0 : lr.tv_curve.back()) << "\n";
  return 0;
}

int cmd_filter_trace(const Options& opt) {
  System sys = load_with_overrides(opt);
  std::uint64_t hash = config_hash(opt.config);
  Solution sol = solve(sys, solve_options(opt));
  std::vector<Trajectory> traced{run_episode(sys, sol.strategy,
                                             BeliefMode::Exact, nullptr,
                                             opt.seed)};
  std::ofstream trace = open_out(opt, "trace.txt");
  write_trace(trace, traced, hash, BeliefMode::Exact, sys.coupling);
  std::cout << "stages " << traced.front().stages.size() << " j "
            << num(traced.front().j_model) << "\n";
  return 0;
}

int cmd_example(const Options& opt) {
  int samples = opt.episodes > 0 ? opt.episodes : 1000000;
  gauss::ExampleReport rep = gauss::run_example(opt.rho, samples, opt.seed);

  std::ofstream csv = open_out(opt, "example.csv");
  csv << "# cpsctl example config_hash=" << hex64(0) << " seed=" << opt.seed
      << " rho=" << num(opt.rho) << " samples=" << samples << "\n";
  csv << "record,a,b,c,cost,note\n";
  auto row = [&](const std::string& name, const gauss::ExampleStrategy& g,
                 double cost, const std::string& note) {
    csv << name << "," << num(g.a) << "," << num(g.b) << "," << num(g.c) << ","
        << num(cost) << "," << note << "\n";
  };
  gauss::GaussianInit init;
  init.rho = opt.rho;
  row("analytic_mmse", rep.analytic, rep.cost_analytic, "closed-form optimum");
  row("grid_oracle", rep.grid, gauss::expected_cost(rep.grid, init),
      "independent grid search");
  row("least_squares_oracle", rep.least_squares,
      gauss::expected_cost(rep.least_squares, init),
      "independent normal equations");
  row("reference", rep.reference, rep.cost_reference,
      rep.matches_reference ? "published gains; oracle agrees"
                            : "published gains; DISCREPANCY with oracle");
  for (const auto& r : rep.walkthrough) {
    csv << "walkthrough." << r.name;
    for (int i = 0; i < 3; ++i)
      csv << ","
          << (i < static_cast<int>(r.coefficients.size())
                  ? num(r.coefficients[i])
                  : "");
    csv << ",," << r.note << "\n";
  }
  csv << "binned_regression_gap,,,," << num(rep.binned_gap) << ","
      << "piecewise-constant estimator minus linear; nonpositive up to noise"
      << "\n";

  std::ofstream txt = open_out(opt, "example.txt");
  txt << "gaussian example, rho = " << num(opt.rho) << ", samples = " << samples
      << ", seed = " << opt.seed << "\n\n";
  txt << "analytic gains      a=" << num(rep.analytic.a)
      << " b=" << num(rep.analytic.b) << " c=" << num(rep.analytic.c)
      << "  cost=" << num(rep.cost_analytic) << "\n";
  txt << "grid oracle         a=" << num(rep.grid.a) << " b=" << num(rep.grid.b)
      << " c=" << num(rep.grid.c) << "\n";
  txt << "least-squares       a=" << num(rep.least_squares.a)
      << " b=" << num(rep.least_squares.b) << " c=" << num(rep.least_squares.c)
      << "\n";
  txt << "published reference a=" << num(rep.reference.a)
      << " b=" << num(rep.reference.b) << " c=" << num(rep.reference.c)
      << "  cost=" << num(rep.cost_reference) << "\n\n";
  if (rep.matches_reference) {
    txt << "oracle agrees with the published gains at this covariance\n";
  } else {
    txt << "DISCREPANCY: the oracle optimum differs from the published gains "
           "at covariance "
        << num(opt.rho) << "; they coincide at covariance -0.5\n";
  }
  txt << "\nvalue recursion:\n";
  for (const auto& r : rep.walkthrough) {
    txt << "  " << r.name << " [";
    for (std::size_t i = 0; i < r.coefficients.size(); ++i)
      txt << (i ? ", " : "") << num(r.coefficients[i]);
    txt << "] " << r.note << "\n";
  }

  std::cout << "gains a=" << num(rep.grid.a) << " b=" << num(rep.grid.b)
            << " c=" << num(rep.grid.c)
            << (rep.matches_reference ? " (matches reference)"
                                      : " (DISCREPANCY vs reference)")
            << "\n";
  return 0;
}

int cmd_oracle_check(const Options& opt) {
  std::ofstream csv = open_out(opt, "oracle.csv");
  std::uint64_t hash = opt.config.empty() ? 0 : config_hash(opt.config);
  csv << header(opt, "oracle-check", hash) << " instances=" << opt.instances
      << "\n";
  csv << "instance,v0,oracle,abs_diff,ok\n";
  bool all_ok = true;
  auto run_one = [&](const std::string& name, const System& sys) {
    Solution sol = solve(sys);
    ExhaustiveResult ex = exhaustive_optimal(sys);
    double diff = std::abs(sol.value_at_init - ex.optimal_cost);
    bool ok = diff <= 1e-9;
    all_ok = all_ok && ok;
    csv << name << "," << num(sol.value_at_init) << "," << num(ex.optimal_cost)
        << "," << num(diff) << "," << (ok ? 1 : 0) << "\n";
    std::cout << name << " V0=" << num(sol.value_at_init)
              << " oracle=" << num(ex.optimal_cost) << " diff=" << num(diff)
              << (ok ? " ok" : " MISMATCH") << "\n";
  };
  if (!opt.config.empty()) run_one("config", load_with_overrides(opt));
  for (int i = 0; i < opt.instances; ++i)
    run_one("random" + std::to_string(i),
            random_tiny_system(opt.seed + i, 1 + (i % 2)));
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"separated learning and control for finite cyber-physical "
               "systems"};
  app.require_subcommand(1);

  Options opt;
  const char* env_out = std::getenv("CPS_OUT_DIR");
  opt.out_dir = env_out ? env_out : ".";

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", opt.config, "system description file");
    if (needs_config) c->required();
    cmd->add_option("--out", opt.out_dir,
                    "output directory (default $CPS_OUT_DIR or .)");
    cmd->add_option("--seed", opt.seed, "base random seed");
    cmd->add_option("--episodes", opt.episodes,
                    "episode count (example: Monte Carlo sample count)");
    cmd->add_option("--mode", opt.mode, "belief mode: exact|learned");
    cmd->add_option("--beta", opt.beta, "override mismatch weight");
    cmd->add_option("--rho", opt.rho, "initial covariance for `example`");
    cmd->add_option("--grid-m", opt.grid_m,
                    "belief-grid resolution (0 = exact alpha representation)");
    cmd->add_option("--coupling", opt.coupling,
                    "override coupling: shared|independent");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve the dynamic program");
  add_common(solve_cmd, true);
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "run model and actual system in parallel");
  add_common(sim_cmd, true);
  sim_cmd->add_option("--policy", opt.policy, "solved values artifact to load");
  CLI::App* ft_cmd =
      app.add_subcommand("filter-trace", "trace one episode's beliefs");
  add_common(ft_cmd, true);
  CLI::App* ex_cmd =
      app.add_subcommand("example", "the two-subsystem Gaussian worked example");
  add_common(ex_cmd, false);
  CLI::App* oc_cmd =
      app.add_subcommand("oracle-check", "dynamic program vs exhaustive search");
  add_common(oc_cmd, false);
  oc_cmd->add_option("--instances", opt.instances,
                     "additional random tiny instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return cmd_solve(opt);
    if (sim_cmd->parsed()) return cmd_simulate(opt);
    if (ft_cmd->parsed()) return cmd_filter_trace(opt);
    if (ex_cmd->parsed()) return cmd_example(opt);
    if (oc_cmd->parsed()) return cmd_oracle_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error kind=config msg=\"" << e.what() << "\"\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error kind=validation msg=\"" << e.what() << "\"\n";
    return 3;
  } catch (const BudgetError& e) {
    std::cerr << "error kind=budget msg=\"" << e.what() << "\"\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error kind=runtime msg=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
