#include "cps/simplex_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cps {

namespace {

void enumerate_compositions(int dim, int total, std::vector<int>& cur,
                            std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dim - 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = 0; v <= total; ++v) {
    cur.push_back(v);
    enumerate_compositions(dim, total - v, cur, out);
    cur.pop_back();
  }
}

}  // namespace

SimplexGrid::SimplexGrid(int dim, int resolution) : dim_(dim), m_(resolution) {
  if (dim < 1 || resolution < 1)
    throw std::invalid_argument("SimplexGrid: dim and resolution must be >= 1");
  std::vector<int> cur;
  enumerate_compositions(dim_, m_, cur, nodes_);
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
    node_index_[nodes_[i]] = i;
}

dvec SimplexGrid::node_point(int idx) const {
  dvec p(dim_);
  for (int i = 0; i < dim_; ++i)
    p[i] = static_cast<double>(nodes_[idx][i]) / m_;
  return p;
}

int SimplexGrid::node_index(const std::vector<int>& composition) const {
  auto it = node_index_.find(composition);
  if (it == node_index_.end())
    throw std::out_of_range("SimplexGrid: unknown node");
  return it->second;
}

std::vector<std::pair<int, double>> SimplexGrid::barycentric(
    const dvec& p) const {
  const int d = dim_;
  if (d == 1) return {{0, 1.0}};

  // Cumulative transform: sigma_j = m * sum_{i >= j} p_i for j = 1..d-1 is
  // nonincreasing in j; compositions map back as x_j = K_j - K_{j+1} with
  // K_0 = m, K_d = 0, so monotone integer vectors are exactly the nodes.
  const int D = d - 1;
  dvec sigma(D);
  double tail = 0.0;
  for (int j = d - 1; j >= 1; --j) {
    tail += std::max(0.0, p[j]);
    sigma[j - 1] = std::min(static_cast<double>(m_), m_ * tail);
  }
  // enforce monotonicity lost to rounding
  for (int j = D - 2; j >= 0; --j) sigma[j] = std::max(sigma[j], sigma[j + 1]);

  std::vector<int> base(D);
  dvec frac(D);
  for (int j = 0; j < D; ++j) {
    double f = std::floor(sigma[j]);
    base[j] = static_cast<int>(f);
    if (base[j] >= m_) {  // sigma exactly m
      base[j] = m_;
      frac[j] = 0.0;
    } else {
      frac[j] = sigma[j] - f;
    }
  }

  // Kuhn simplex: walk the fractional parts in descending order (ties by
  // ascending coordinate, which keeps each vertex monotone).
  std::vector<int> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return frac[a] > frac[b]; });

  std::vector<std::pair<int, double>> result;
  std::vector<int> vertex = base;  // cumulative coordinates K_1..K_{d-1}
  auto emit = [&](double w) {
    if (w <= 1e-15) return;
    std::vector<int> comp(d);
    int prev = m_;
    for (int j = 0; j < D; ++j) {
      comp[j] = prev - vertex[j];
      prev = vertex[j];
    }
    comp[d - 1] = prev;
    result.emplace_back(node_index(comp), w);
  };

  emit(1.0 - frac[order[0]]);
  for (int i = 0; i < D; ++i) {
    vertex[order[i]] += 1;
    double w = (i + 1 < D) ? frac[order[i]] - frac[order[i + 1]]
                           : frac[order[i]];
    emit(w);
  }
  return result;
}

long long SimplexGrid::node_count(int dim, int resolution) {
  // C(m + dim - 1, dim - 1)
  long long c = 1;
  for (int i = 1; i <= dim - 1; ++i) {
    c = c * (resolution + i) / i;
    if (c > (1ll << 40)) return c;  // avoid overflow for absurd inputs
  }
  return c;
}

int SimplexGrid::suggest_resolution(int dim, long long max_nodes) {
  int m = 1;
  while (m < 512 && node_count(dim, m + 1) <= max_nodes) ++m;
  return m;
}

}  // namespace cps
