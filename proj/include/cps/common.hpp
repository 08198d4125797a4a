#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cps {

using dvec = std::vector<double>;

/// Raised when a system description violates one of its structural
/// invariants. The message carries the location (kernel, stage, row).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class BudgetError : public std::runtime_error {
 public:
  explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic uniform source. mt19937_64 has a fully specified output
// stream; the 53-bit conversion below avoids std::uniform_real_distribution,
// whose draw sequence is implementation-defined. Every sampling operation in
// the library pulls from this wrapper so that (inputs, seed) pins results
// bit-exactly.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double next() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform integer in [0, n).
  int next_index(int n) {
    int i = static_cast<int>(next() * n);
    return i >= n ? n - 1 : i;
  }

  /// Standard normal pair (Box-Muller). Used by the Gaussian example.
  std::pair<double, double> next_normal_pair() {
    double u1 = next();
    double u2 = next();
    while (u1 <= 0.0) u1 = next();
    double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
  }

 private:
  std::mt19937_64 gen_;
};

// Compensated (Kahan) accumulator; removes ordering sensitivity when summing
// many leaf probabilities in the enumeration oracles.
class KahanSum {
 public:
  void add(double v) {
    double y = v - comp_;
    double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// First index i such that u < sum(row[0..i]), cumulating in ascending index
/// order. This fixes the inverse-transform coupling bit-exactly.
inline int inverse_transform(const double* row, int n, double u) {
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += row[i];
    if (u < cum) return i;
  }
  return n - 1;  // guard against rounding in the final partial sum
}

/// FNV-1a 64-bit over raw bytes; used to stamp output files with the config.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cps
