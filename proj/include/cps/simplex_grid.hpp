#pragma once

#include <map>
#include <utility>
#include <vector>

#include "cps/common.hpp"

namespace cps {

// Regular grid over the probability simplex in `dim` coordinates: the nodes
// are all nonnegative integer compositions of the resolution m, i.e. all
// rational distributions with denominator m. Off-node points are resolved by
// barycentric weights within the Freudenthal (Kuhn) triangulation of the
// cumulative-coordinate transform, the standard fixed-grid construction for
// belief-space value functions. The weights are nonnegative, sum to one, and
// reproduce the query point exactly, so interpolating a concave function
// never overestimates it.
class SimplexGrid {
 public:
  SimplexGrid(int dim, int resolution);

  int dim() const { return dim_; }
  int resolution() const { return m_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  const std::vector<int>& node(int idx) const { return nodes_[idx]; }
  dvec node_point(int idx) const;
  int node_index(const std::vector<int>& composition) const;

  /// (node index, weight) pairs for an arbitrary simplex point; zero-weight
  /// vertices are dropped.
  std::vector<std::pair<int, double>> barycentric(const dvec& p) const;

  /// Largest m whose mesh stays within max_nodes (at least 1).
  static int suggest_resolution(int dim, long long max_nodes);
  static long long node_count(int dim, int resolution);

 private:
  int dim_;
  int m_;
  std::vector<std::vector<int>> nodes_;        // lexicographic order
  std::map<std::vector<int>, int> node_index_;
};

}  // namespace cps
