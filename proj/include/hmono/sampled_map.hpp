#pragma once

#include "quadrature.hpp"
#include "types.hpp"

#include <functional>
#include <vector>

namespace hmono {

// Axis-aligned box with a tensor grid that includes both endpoints per axis.
// Node order is row-major: axis 0 varies slowest.
struct GridSpec {
  Vec box_min;
  Vec box_max;
  std::vector<int> shape;

  int dim() const { return static_cast<int>(shape.size()); }

  std::size_t size() const {
    std::size_t s = 1;
    for (int k : shape) s *= static_cast<std::size_t>(k);
    return s;
  }

  double spacing(int axis) const { return (box_max[axis] - box_min[axis]) / (shape[axis] - 1); }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
  }

  std::vector<int> multi_index(std::size_t idx) const {
    std::vector<int> m(shape.size());
    for (int a = dim() - 1; a >= 0; --a) {
      m[a] = static_cast<int>(idx % shape[a]);
      idx /= shape[a];
    }
    return m;
  }

  std::size_t flat_index(const std::vector<int>& m) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * shape[a] + m[a];
    return idx;
  }

  Vec node(std::size_t idx) const {
    const auto m = multi_index(idx);
    Vec x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = box_min[a] + m[a] * spacing(a);
    return x;
  }

  std::size_t nearest_node(const Vec& x) const {
    std::vector<int> m(shape.size());
    for (int a = 0; a < dim(); ++a) {
      const double t = std::round((x[a] - box_min[a]) / spacing(a));
      m[a] = static_cast<int>(std::clamp(t, 0.0, shape[a] - 1.0));
    }
    return flat_index(m);
  }

  bool contains_ball(const Vec& c, double R) const {
    for (int a = 0; a < dim(); ++a) {
      const double slack = 1e-12 * (box_max[a] - box_min[a]);
      if (c[a] - R < box_min[a] - slack || c[a] + R > box_max[a] + slack) return false;
    }
    return true;
  }
};

inline void validate(const GridSpec& g) {
  const int n = g.dim();
  if (n < 1 || g.box_min.size() != n || g.box_max.size() != n)
    throw input_error("grid: box bounds and shape must have the same dimension");
  for (int a = 0; a < n; ++a) {
    if (g.shape[a] < 2) throw input_error("grid: each axis needs at least 2 points");
    if (!(g.box_max[a] > g.box_min[a])) throw input_error("grid: box_max must exceed box_min on every axis");
  }
}

inline GridSpec make_grid(const Vec& lo, const Vec& hi, const std::vector<int>& shape) {
  GridSpec g{lo, hi, shape};
  validate(g);
  return g;
}

inline GridSpec square_grid(int n, double lo, double hi, int per_axis) {
  return make_grid(Vec::Constant(n, lo), Vec::Constant(n, hi), std::vector<int>(n, per_axis));
}

// A single-valued map sampled at the nodes of a grid.
struct SampledMap {
  GridSpec grid;
  std::vector<Vec> points;
  std::vector<Vec> values;

  int dim() const { return grid.dim(); }
  std::size_t size() const { return points.size(); }
};

inline void validate(const SampledMap& m) {
  validate(m.grid);
  if (m.points.size() != m.grid.size() || m.values.size() != m.grid.size())
    throw input_error("sampled map: point/value count does not match the grid");
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (m.values[i].size() != m.dim()) throw input_error("sampled map: value has wrong dimension");
    if (!m.values[i].allFinite()) throw input_error("sampled map: non-finite value at node " + std::to_string(i));
  }
}

inline SampledMap skeleton(const GridSpec& g) {
  validate(g);
  SampledMap m;
  m.grid = g;
  m.points.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) m.points.push_back(g.node(i));
  m.values = m.points;
  return m;
}

inline SampledMap sample_map(const GridSpec& g, const std::function<Vec(const Vec&)>& T) {
  SampledMap m = skeleton(g);
  for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = T(m.points[i]);
  validate(m);
  return m;
}

// Grid-membership ball rule: a node counts iff it lies in the closed ball,
// with the full cell volume as weight.
inline BallQuadrature grid_ball(const GridSpec& g, const Vec& center, double R) {
  BallQuadrature B;
  B.center = center;
  B.radius = R;
  const double w = g.cell_volume();
  const int n = g.dim();
  std::vector<int> lo(n), hi(n);
  for (int a = 0; a < n; ++a) {
    const double h = g.spacing(a);
    lo[a] = std::max(0, static_cast<int>(std::floor((center[a] - R - g.box_min[a]) / h)));
    hi[a] = std::min(g.shape[a] - 1, static_cast<int>(std::ceil((center[a] + R - g.box_min[a]) / h)));
    if (lo[a] > hi[a]) return B;
  }
  std::vector<int> m = lo;
  const double R2 = R * R * (1.0 + 1e-12);
  while (true) {
    const std::size_t idx = g.flat_index(m);
    const Vec x = g.node(idx);
    if ((x - center).squaredNorm() <= R2) {
      B.nodes.push_back(x);
      B.weights.push_back(w);
      B.grid_index.push_back(idx);
    }
    int a = n - 1;
    while (a >= 0 && ++m[a] > hi[a]) {
      m[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  return B;
}

}  // namespace hmono
