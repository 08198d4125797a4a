#pragma once

#include <array>
#include <string>
#include <vector>

#include "cps/common.hpp"

namespace cps::gauss {

// Two-subsystem, horizon-4, delay-2 linear-Gaussian instance. The only live
// decisions are u_2^2 (a function of the second initial component) and u_3^1
// (a function of both), and the objective is
//   (1/2) E[(X^1 + X^2 - u_2 - u_3)^2 + u_3^2].
// Everything here is exact covariance algebra; Monte Carlo appears only as a
// cross-check and inside the independent gain oracles.

struct GaussianInit {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> variance{1.0, 1.0};
  double rho = 0.5;  // covariance of the two components
};

void validate(const GaussianInit& init);

/// Linear strategy: u_2 = a * x2, u_3 = b * (x1 + x2) + c * x2.
struct ExampleStrategy {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// The published closed-form controls u_2 = x2 / 2 and
/// u_3 = (x1 + x2) / 2 - x2 / 4 evaluated at a realization.
std::pair<double, double> closed_form_controls(const std::array<double, 2>& x0);

/// Reference gains implied by those controls: (1/2, 1/2, -1/4).
ExampleStrategy reference_gains();

/// Exact expected cost of a linear strategy from the second moments of
/// (S, X2), S = X1 + X2.
double expected_cost(const ExampleStrategy& g, const GaussianInit& init);

/// Monte Carlo estimate of the same cost; returns (mean, standard error).
std::pair<double, double> expected_cost_monte_carlo(const ExampleStrategy& g,
                                                    const GaussianInit& init,
                                                    int samples,
                                                    std::uint64_t seed);

/// Stage-3 first-order condition gives u_3 = (S - u_2)/2; the stage-2 step
/// is the MMSE estimate of S given X2, so a = Cov(S, X2)/Var(X2), b = 1/2,
/// c = -a/2. With unit variances a = 1 + rho.
ExampleStrategy optimal_linear_gains(const GaussianInit& init);

struct GridSpec {
  double lo = -2.0;
  double hi = 2.0;
  double step = 0.01;
};

/// Independent oracle: exhaustive grid over (a, b, c) minimizing the
/// empirical cost built from sampled second moments.
ExampleStrategy grid_search_gains(const GaussianInit& init, const GridSpec& grid,
                                  int samples, std::uint64_t seed);

/// Independent oracle: normal equations on the sampled second moments.
ExampleStrategy least_squares_gains(const GaussianInit& init, int samples,
                                    std::uint64_t seed);

/// How much a piecewise-constant (binned conditional mean) stage-2 estimator
/// beats the linear one on held samples: linear cost minus binned cost.
/// Nonpositive up to Monte Carlo noise when the true optimum is linear.
double binned_regression_gap(const GaussianInit& init, int bins, int samples,
                             std::uint64_t seed);

struct WalkthroughRecord {
  std::string name;
  dvec coefficients;
  std::string note;
};

/// The two-stage value recursion as numeric coefficient records: the stage-3
/// minimizer, the substituted stage-3 value kernel, the mismatch constant
/// carried through, the stage-2 MMSE gain, the final gains, and the
/// substitution of the true initial values.
std::vector<WalkthroughRecord> dp_walkthrough(const GaussianInit& init);

struct ExampleReport {
  double rho = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
  ExampleStrategy analytic;      // optimal_linear_gains
  ExampleStrategy grid;          // grid_search_gains
  ExampleStrategy least_squares; // least_squares_gains
  ExampleStrategy reference;     // published gains (1/2, 1/2, -1/4)
  double cost_analytic = 0.0;
  double cost_reference = 0.0;
  double binned_gap = 0.0;
  bool matches_reference = false;  // oracle agrees with the published gains
  std::vector<WalkthroughRecord> walkthrough;
};

ExampleReport run_example(double rho, int samples, std::uint64_t seed);

}  // namespace cps::gauss
