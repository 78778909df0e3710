#pragma once

#include "types.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace hmono {

struct QuadratureSpec {
  int nodes_1d = 32;
  double tolerance = 1e-10;
  int max_nodes = 512;
};

inline void validate(const QuadratureSpec& q) {
  if (q.nodes_1d < 2) throw input_error("quadrature: nodes_1d must be >= 2");
  if (!(q.tolerance > 0.0)) throw input_error("quadrature: tolerance must be positive");
  if (q.max_nodes < q.nodes_1d) throw input_error("quadrature: max_nodes < nodes_1d");
}

struct Rule1D {
  std::vector<double> x;  // nodes in [0,1]
  std::vector<double> w;  // weights summing to 1
};

// Gauss-Legendre on [0,1], nodes by Newton iteration on P_n.
inline const Rule1D& gauss_legendre(int n) {
  thread_local std::map<int, Rule1D> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw input_error("gauss_legendre: n must be >= 1");
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = 0.5 * (1.0 - z);
    r.x[n - 1 - i] = 0.5 * (1.0 + z);
    r.w[i] = r.w[n - 1 - i] = 0.5 * w;
  }
  return cache.emplace(n, std::move(r)).first->second;
}

// Gauss-Legendre composed with the quintic smoothstep u = w^3(10 - 15w + 6w^2).
// The substitution has vanishing first and second derivatives at both ends,
// which tames algebraic endpoint singularities.
inline const Rule1D& graded_legendre(int n) {
  thread_local std::map<int, Rule1D> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const Rule1D& g = gauss_legendre(n);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double w = g.x[i];
    r.x[i] = w * w * w * (10.0 - 15.0 * w + 6.0 * w * w);
    r.w[i] = g.w[i] * 30.0 * w * w * (1.0 - w) * (1.0 - w);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

inline double integrate_1d(const std::function<double(double)>& f, double a, double b, int n, bool graded) {
  const Rule1D& r = graded ? graded_legendre(n) : gauss_legendre(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.w[i] * f(a + (b - a) * r.x[i]);
  return (b - a) * s;
}

// 1-D integral split at the given interior breakpoints, graded on each piece.
inline double integrate_1d_split(const std::function<double(double)>& f, double a, double b, int n,
                                 std::vector<double> breaks) {
  std::sort(breaks.begin(), breaks.end());
  double lo = a, s = 0.0;
  for (double c : breaks) {
    if (c <= lo || c >= b) continue;
    s += integrate_1d(f, lo, c, n, true);
    lo = c;
  }
  return s + integrate_1d(f, lo, b, n, true);
}

using Integrand2D = std::function<double(double, double)>;
using Point2 = std::array<double, 2>;

struct Node2 {
  double s, t, w;
};

// Plain tensor Gauss-Legendre on [0,1]^2.
inline std::vector<Node2> tensor_rule(int nodes_1d) {
  const Rule1D& r = gauss_legendre(nodes_1d);
  std::vector<Node2> out;
  out.reserve(static_cast<std::size_t>(nodes_1d) * nodes_1d);
  for (int i = 0; i < nodes_1d; ++i)
    for (int j = 0; j < nodes_1d; ++j) out.push_back({r.x[i], r.x[j], r.w[i] * r.w[j]});
  return out;
}

// Duffy-collapsed graded rule on triangle (A, B, C); the collapsed vertex A and
// all three edges are graded.
inline void append_triangle_rule(std::vector<Node2>& out, const Point2& A, const Point2& B, const Point2& C,
                                 int nodes_1d) {
  const double e1x = B[0] - A[0], e1y = B[1] - A[1];
  const double e2x = C[0] - B[0], e2y = C[1] - B[1];
  const double det = std::abs(e1x * e2y - e1y * e2x);
  if (det < 1e-300) return;
  const Rule1D& r = graded_legendre(nodes_1d);
  for (int i = 0; i < nodes_1d; ++i) {
    const double u = r.x[i];
    for (int j = 0; j < nodes_1d; ++j) {
      const double v = r.x[j];
      out.push_back({A[0] + u * (e1x + v * e2x), A[1] + u * (e1y + v * e2y), r.w[i] * r.w[j] * u * det});
    }
  }
}

inline double integrate_rule(const Integrand2D& f, const std::vector<Node2>& rule) {
  double s = 0.0;
  for (const Node2& q : rule) s += q.w * f(q.s, q.t);
  return s;
}

inline double gauss_legendre_unit_square(const Integrand2D& f, int nodes_1d) {
  return integrate_rule(f, tensor_rule(nodes_1d));
}

inline double integrate_triangle(const Integrand2D& f, const Point2& A, const Point2& B, const Point2& C,
                                 int nodes_1d) {
  std::vector<Node2> rule;
  append_triangle_rule(rule, A, B, C, nodes_1d);
  return integrate_rule(f, rule);
}

// Where an integrand on [0,1]^2 is non-smooth: nowhere, at a point, or along
// the line a*s + b*t = c.
struct SingularLocus {
  enum Kind { none, point, line } kind = none;
  Point2 at{0.0, 0.0};
  double a = 0.0, b = 0.0, c = 0.0;

  static SingularLocus at_point(double s, double t) {
    SingularLocus L;
    L.kind = point;
    L.at = {s, t};
    return L;
  }
  static SingularLocus along_line(double a, double b, double c) {
    SingularLocus L;
    L.kind = line;
    L.a = a;
    L.b = b;
    L.c = c;
    return L;
  }
};

namespace detail {

inline const std::array<Point2, 4>& square_corners() {
  static const std::array<Point2, 4> c{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}};
  return c;
}

// Sutherland-Hodgman clip of the unit square against sign*(a s + b t - c) >= 0.
inline std::vector<Point2> clip_square(double a, double b, double c, double sign) {
  const auto& sq = square_corners();
  std::vector<Point2> out;
  auto g = [&](const Point2& P) { return sign * (a * P[0] + b * P[1] - c); };
  for (int k = 0; k < 4; ++k) {
    const Point2& P = sq[k];
    const Point2& Q = sq[(k + 1) % 4];
    const double gp = g(P), gq = g(Q);
    if (gp >= 0.0) out.push_back(P);
    if ((gp > 0.0 && gq < 0.0) || (gp < 0.0 && gq > 0.0)) {
      const double t = gp / (gp - gq);
      out.push_back({P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])});
    }
  }
  return out;
}

}  // namespace detail

// Unit-square rule that respects a known singular locus: triangles fanned
// around a point, or the two convex pieces on either side of a line.
inline std::vector<Node2> unit_square_rule(int nodes_1d, const SingularLocus& L) {
  std::vector<Node2> rule;
  switch (L.kind) {
    case SingularLocus::none:
      return tensor_rule(nodes_1d);
    case SingularLocus::point: {
      const Point2 P{std::clamp(L.at[0], 0.0, 1.0), std::clamp(L.at[1], 0.0, 1.0)};
      const auto& sq = detail::square_corners();
      for (int k = 0; k < 4; ++k) append_triangle_rule(rule, P, sq[k], sq[(k + 1) % 4], nodes_1d);
      return rule;
    }
    case SingularLocus::line: {
      for (double sign : {1.0, -1.0}) {
        const auto poly = detail::clip_square(L.a, L.b, L.c, sign);
        for (std::size_t k = 1; k + 1 < poly.size(); ++k)
          append_triangle_rule(rule, poly[0], poly[k], poly[k + 1], nodes_1d);
      }
      return rule;
    }
  }
  return rule;
}

inline double integrate_unit_square(const Integrand2D& f, int nodes_1d, const SingularLocus& L) {
  return integrate_rule(f, unit_square_rule(nodes_1d, L));
}

// Singular locus of s,t -> |z0 + s*za + t*zb| on [0,1]^2: the zero (or
// closest-approach) set of the affine vector field.
inline SingularLocus affine_locus(const Vec& z0, const Vec& za, const Vec& zb) {
  const double scale = z0.norm() + za.norm() + zb.norm();
  if (scale == 0.0) return {};
  const double tiny = 1e-14 * scale;
  const double na = za.norm(), nb = zb.norm();
  if (na <= tiny && nb <= tiny) return {};
  Eigen::Matrix2d G;
  G << za.dot(za), za.dot(zb), za.dot(zb), zb.dot(zb);
  const double det = G.determinant();
  if (det > 1e-12 * G.trace() * G.trace()) {
    const Eigen::Vector2d rhs(-za.dot(z0), -zb.dot(z0));
    const Eigen::Vector2d st = G.ldlt().solve(rhs);
    return SingularLocus::at_point(st[0], st[1]);
  }
  // Parallel directions: |z| depends on one combination of s and t.
  if (na >= nb) {
    const double kappa = zb.dot(za) / (na * na);
    const double sigma = -z0.dot(za) / (na * na);
    return SingularLocus::along_line(1.0, kappa, sigma);
  }
  const double kappa = za.dot(zb) / (nb * nb);
  const double sigma = -z0.dot(zb) / (nb * nb);
  return SingularLocus::along_line(kappa, 1.0, sigma);
}

// ---- balls, spheres and the Newtonian kernel ----

struct BallQuadrature {
  Vec center;
  double radius = 0.0;
  std::vector<Vec> nodes;
  std::vector<double> weights;
  std::vector<std::size_t> grid_index;  // filled only for grid-membership rules

  double volume() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

// Product rule on S^{n-1}: Gauss-Legendre in the n-2 polar angles with their
// sine weights, uniform trapezoid in the azimuth. Weights sum to the sphere area.
inline void sphere_rule(int n, int nodes, std::vector<Vec>& dirs, std::vector<double>& weights) {
  if (n < 2) throw unsupported_dimension("sphere_rule: n must be >= 2");
  dirs.clear();
  weights.clear();
  const int naz = 2 * nodes;
  const Rule1D& g = gauss_legendre(nodes);
  const int npolar = n - 2;
  std::vector<int> idx(npolar, 0);
  while (true) {
    double w_polar = 1.0;
    std::vector<double> sines(npolar), cosines(npolar);
    for (int k = 0; k < npolar; ++k) {
      const double phi = pi * g.x[idx[k]];
      sines[k] = std::sin(phi);
      cosines[k] = std::cos(phi);
      w_polar *= pi * g.w[idx[k]] * std::pow(sines[k], n - 2 - k);
    }
    for (int a = 0; a < naz; ++a) {
      const double th = 2.0 * pi * a / naz;
      Vec u(n);
      double prod = 1.0;
      for (int k = 0; k < npolar; ++k) {
        u[k] = prod * cosines[k];
        prod *= sines[k];
      }
      u[n - 2] = prod * std::cos(th);
      u[n - 1] = prod * std::sin(th);
      dirs.push_back(u);
      weights.push_back(w_polar * 2.0 * pi / naz);
    }
    int k = 0;
    while (k < npolar && ++idx[k] == nodes) idx[k++] = 0;
    if (k == npolar) break;
  }
}

inline double sphere_area(int n) { return n * unit_ball_volume(n); }

// Polar product rule on B_r(center).
inline BallQuadrature ball_polar_rule(const Vec& center, double r, int radial_nodes, int angular_nodes) {
  const int n = static_cast<int>(center.size());
  BallQuadrature B;
  B.center = center;
  B.radius = r;
  std::vector<Vec> dirs;
  std::vector<double> dw;
  sphere_rule(n, angular_nodes, dirs, dw);
  const Rule1D& g = gauss_legendre(radial_nodes);
  for (int i = 0; i < radial_nodes; ++i) {
    const double rho = r * g.x[i];
    const double wr = r * g.w[i] * std::pow(rho, n - 1);
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      B.nodes.push_back(center + rho * dirs[k]);
      B.weights.push_back(wr * dw[k]);
    }
  }
  return B;
}

inline double gamma_radial(double s, int n) {
  return std::pow(s, 2.0 - n) / (n * unit_ball_volume(n) * (2.0 - n));
}

inline double fundamental_solution(const Vec& x, int n) {
  if (n < 3) throw unsupported_dimension("fundamental_solution: requires n >= 3");
  if (x.size() != n) throw input_error("fundamental_solution: vector length differs from n");
  const double r = x.norm();
  if (r == 0.0) throw singularity_error("fundamental_solution: x = 0");
  return gamma_radial(r, n);
}

// s^{n-1} (Gamma(s) - Gamma(rho)), written so the singular factor cancels.
inline double gamma_shell_weight(double s, double rho, int n) {
  if (s <= 0.0) return 0.0;
  const double c = 1.0 / (n * unit_ball_volume(n) * (2.0 - n));
  return c * (s - std::pow(s, n - 1) * std::pow(rho, 2.0 - n));
}

// Integral over B_rho(0) of (Gamma(|x|) - Gamma(rho)) g(|x|).
inline double radial_gamma_moment(double rho, int n, const std::function<double(double)>& g, int nodes = 32) {
  if (n < 3) throw unsupported_dimension("radial_gamma_moment: requires n >= 3");
  if (rho <= 0.0) return 0.0;
  const double area = sphere_area(n);
  return area * integrate_1d([&](double s) { return gamma_shell_weight(s, rho, n) * g(s); }, 0.0, rho, nodes, false);
}

}  // namespace hmono
