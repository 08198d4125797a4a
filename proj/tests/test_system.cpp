#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cps/config.hpp"
#include "cps/system.hpp"
#include "doctest.h"

using namespace cps;

namespace {

// 2-state, 1-subsystem, 2-action scaffold with pluggable rows
System make_two_state(dvec model_rows, dvec actual_rows, dvec obs_rows,
                      dvec initial, double beta = 0.0, int horizon = 2) {
  System sys;
  sys.num_states = 2;
  sys.num_subsystems = 1;
  sys.actions_per_subsystem = {2};
  sys.observations_per_subsystem = {2};
  sys.horizon = horizon;
  sys.coupling = Coupling::SharedDisturbance;
  sys.model_kernel = StageTable::stationary(horizon, 4, 2, std::move(model_rows));
  sys.actual_kernel =
      StageTable::stationary(horizon, 4, 2, std::move(actual_rows));
  sys.observation_kernels.push_back(
      StageTable::stationary(horizon + 1, 2, 2, std::move(obs_rows)));
  sys.initial_joint = std::move(initial);
  sys.costs.stage_cost =
      StageTable::stationary(horizon, 2, 2, {0.0, 1.0, 1.0, 0.0});
  sys.costs.terminal_cost = {0.0, 1.0};
  sys.costs.mismatch_weight = beta;
  sys.costs.state_metric = squared_index_metric(2);
  validate(sys);
  return sys;
}

System default_two_state(double beta = 0.0) {
  return make_two_state({0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                        {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                        {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.4}, beta);
}

}  // namespace

TEST_CASE("validation accepts stochastic rows and rejects bad ones") {
  CHECK_NOTHROW(default_two_state());

  // row sum 1.2
  CHECK_THROWS_WITH_AS(
      make_two_state({0.6, 0.6, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                     {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                     {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.4}),
      doctest::Contains("row sum"), ValidationError);

  // negative mismatch weight
  System sys = default_two_state();
  sys.costs.mismatch_weight = -1.0;
  CHECK_THROWS_AS(validate(sys), ValidationError);

  // negative kernel entry
  CHECK_THROWS_AS(
      make_two_state({1.2, -0.2, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                     {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                     {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.4}),
      ValidationError);

  // initial joint must sum to one
  CHECK_THROWS_AS(
      make_two_state({0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                     {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                     {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.2}),
      ValidationError);

  // horizon >= 1
  sys = default_two_state();
  sys.horizon = 0;
  CHECK_THROWS_AS(validate(sys), ValidationError);

  // asymmetric metric
  sys = default_two_state();
  sys.costs.state_metric = {0.0, 1.0, 2.0, 0.0};
  CHECK_THROWS_AS(validate(sys), ValidationError);
}

TEST_CASE("deterministic kernel rows sample their single successor") {
  System sys = make_two_state({0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0},
                              {0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0},
                              {1.0, 0.0, 0.0, 1.0}, {1.0, 0.0, 0.0, 0.0});
  UniformSource rng(7);
  for (int i = 0; i < 100; ++i) {
    CHECK(step_model(sys, 0, 0, 0, rng).next_state == 1);
    CHECK(step_model(sys, 0, 1, 0, rng).next_state == 0);
  }
}

TEST_CASE("sampling is a deterministic function of the seed") {
  System sys = default_two_state();
  for (std::uint64_t seed : {1ull, 42ull, 999ull}) {
    UniformSource a(seed), b(seed);
    for (int i = 0; i < 50; ++i) {
      StepResult ra = step_model(sys, 0, i % 2, i % 2, a);
      StepResult rb = step_model(sys, 0, i % 2, i % 2, b);
      CHECK(ra.next_state == rb.next_state);
      CHECK(ra.draw == rb.draw);
      CHECK(observe(sys, 0, 0, i % 2, a) == observe(sys, 0, 0, i % 2, b));
    }
  }
}

TEST_CASE("empirical transition frequencies match the kernel row") {
  System sys = make_two_state({0.5, 0.5, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                              {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                              {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.4});
  const int draws = 100000;
  UniformSource rng(123);
  int ones = 0;
  for (int i = 0; i < draws; ++i)
    ones += step_model(sys, 0, 0, 0, rng).next_state;
  double freq = static_cast<double>(ones) / draws;
  CHECK(freq == doctest::Approx(0.5).epsilon(0.02));  // 0.5 +- 0.01 absolute
  CHECK(std::abs(freq - 0.5) < 0.01);
}

TEST_CASE("observation frequencies match the kernel row") {
  System sys = default_two_state();  // obs row for x=0: (0.9, 0.1)
  const int draws = 100000;
  UniformSource rng(5);
  int zeros = 0;
  for (int i = 0; i < draws; ++i)
    zeros += observe(sys, 0, 0, 0, rng) == 0 ? 1 : 0;
  CHECK(std::abs(zeros / static_cast<double>(draws) - 0.9) < 0.01);
}

TEST_CASE("noiseless identity observation returns the state") {
  System sys = make_two_state({0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                              {0.6, 0.4, 0.3, 0.7, 0.5, 0.5, 0.8, 0.2},
                              {1.0, 0.0, 0.0, 1.0}, {0.4, 0.1, 0.1, 0.4});
  UniformSource rng(3);
  for (int i = 0; i < 20; ++i) {
    CHECK(observe(sys, 0, 0, 0, rng) == 0);
    CHECK(observe(sys, 0, 0, 1, rng) == 1);
  }
}

TEST_CASE("identical kernels and a shared draw give identical successors") {
  // quantified over all states, actions, and 1000 seeds
  System sys = make_two_state({0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                              {0.7, 0.3, 0.2, 0.8, 0.4, 0.6, 0.9, 0.1},
                              {0.9, 0.1, 0.2, 0.8}, {0.4, 0.1, 0.1, 0.4});
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    UniformSource rng(seed);
    for (int x = 0; x < 2; ++x)
      for (int u = 0; u < 2; ++u) {
        StepResult s = step_model(sys, 0, x, u, rng);
        CHECK(step_actual(sys, 0, x, u, s.draw) == s.next_state);
      }
  }
}

TEST_CASE("coupled law from shared draws matches the interval overlap") {
  System sys = default_two_state();
  dvec law;
  coupled_row(sys, 0, 0, 0, 0, law);  // model (0.7,0.3) vs actual (0.6,0.4)
  // overlap of cumulative intervals: (0,0) -> 0.6, (0,1) -> 0.1, (1,1) -> 0.3
  CHECK(law[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(law[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(law[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(law[3] == doctest::Approx(0.3).epsilon(1e-12));

  const int draws = 100000;
  UniformSource rng(11);
  dvec freq(4, 0.0);
  for (int i = 0; i < draws; ++i) {
    StepResult s = step_model(sys, 0, 0, 0, rng);
    int xh = step_actual(sys, 0, 0, 0, s.draw);
    freq[s.next_state * 2 + xh] += 1.0;
  }
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(freq[i] / draws - law[i]) < 0.01);
}

TEST_CASE("independent coupling gives the product law") {
  System sys = default_two_state();
  sys.coupling = Coupling::Independent;
  dvec law;
  coupled_row(sys, 0, 0, 1, 0, law);  // model (0.7,0.3), actual row x=1: (0.5,0.5)
  CHECK(law[0] == doctest::Approx(0.35));
  CHECK(law[1] == doctest::Approx(0.35));
  CHECK(law[2] == doctest::Approx(0.15));
  CHECK(law[3] == doctest::Approx(0.15));
}

TEST_CASE("coupled row marginals reproduce the kernel rows") {
  System sys = default_two_state();
  for (int x = 0; x < 2; ++x)
    for (int xh = 0; xh < 2; ++xh)
      for (int u = 0; u < 2; ++u) {
        dvec law;
        coupled_row(sys, 0, x, xh, u, law);
        const double* pm = sys.model_kernel.row(0, sys.transition_row(x, u));
        const double* pa = sys.actual_kernel.row(0, sys.transition_row(xh, u));
        for (int i = 0; i < 2; ++i) {
          CHECK(law[i * 2] + law[i * 2 + 1] == doctest::Approx(pm[i]).epsilon(1e-12));
          CHECK(law[i] + law[2 + i] == doctest::Approx(pa[i]).epsilon(1e-12));
        }
      }
}

TEST_CASE("quadratic cost table entry reproduces the worked-example value") {
  // c(x, u) = 0.5 * (value(x)^2 + value(u)^2) with index = value embedding;
  // at x = 3, u = 1 this is 0.5 * (9 + 1) = 5
  const int n = 4;
  System sys;
  sys.num_states = n;
  sys.num_subsystems = 1;
  sys.actions_per_subsystem = {2};
  sys.observations_per_subsystem = {n};
  sys.horizon = 1;
  dvec eye(n * n, 0.0), kernel(n * 2 * n, 0.0);
  for (int i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  for (int r = 0; r < n * 2; ++r) kernel[r * n] = 1.0;
  sys.model_kernel = StageTable::stationary(1, n * 2, n, kernel);
  sys.actual_kernel = StageTable::stationary(1, n * 2, n, kernel);
  sys.observation_kernels.push_back(StageTable::stationary(2, n, n, eye));
  sys.initial_joint.assign(n * n, 0.0);
  sys.initial_joint[0] = 1.0;
  dvec cost(n * 2);
  for (int x = 0; x < n; ++x)
    for (int u = 0; u < 2; ++u)
      cost[x * 2 + u] = 0.5 * (static_cast<double>(x) * x + u * u);
  sys.costs.stage_cost = StageTable::stationary(1, n, 2, cost);
  sys.costs.terminal_cost.assign(n, 0.0);
  sys.costs.state_metric = squared_index_metric(n);
  validate(sys);

  CHECK(stage_cost(sys, 0, 3, 1) == 5.0);
  CHECK(stage_cost(sys, 0, 0, 0) == 0.0);
}

TEST_CASE("mismatch penalty is beta times the metric") {
  System sys = default_two_state(2.0);
  CHECK(mismatch_penalty(sys, 1, 1) == 0.0);
  CHECK(mismatch_penalty(sys, 0, 1) == 2.0);

  System nobeta = default_two_state(0.0);
  CHECK(mismatch_penalty(nobeta, 0, 1) == 0.0);

  // beta = 2, squared index metric, states 0 and 2 -> 2 * 4 = 8
  System sys3;
  sys3.costs.mismatch_weight = 2.0;
  sys3.costs.state_metric = squared_index_metric(3);
  sys3.num_states = 3;
  CHECK(mismatch_penalty(sys3, 0, 2) == 8.0);
}

TEST_CASE("stage bounds are enforced") {
  System sys = default_two_state();
  UniformSource rng(1);
  CHECK_THROWS_AS(step_model(sys, 2, 0, 0, rng), std::out_of_range);
  CHECK_THROWS_AS(step_actual(sys, 5, 0, 0, 0.3), std::out_of_range);
  CHECK_THROWS_AS(observe(sys, 3, 0, 0, rng), std::out_of_range);
  CHECK_NOTHROW(observe(sys, 2, 0, 0, rng));  // t = T is observable
}

TEST_CASE("cost tables round-trip through the config loader") {
  System sys = load_system(std::string(FIXTURE_DIR) + "/tiny.json");
  CHECK(sys.num_states == 2);
  CHECK(stage_cost(sys, 0, 1, 1) == 0.2);
  CHECK(terminal_cost(sys, 1) == 1.0);
  CHECK(sys.costs.mismatch_weight == 0.5);
}
