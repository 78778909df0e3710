#pragma once

#include "cost_kernel.hpp"
#include "quadrature.hpp"
#include "sampled_map.hpp"

#include <limits>
#include <random>
#include <vector>

namespace hmono {

// h(x-zeta) + h(y-xi) - h(x-xi) - h(y-zeta); >= 0 iff the pair is monotone.
inline double pair_defect(const CostFunction& c, const Vec& x, const Vec& y, const Vec& xi, const Vec& zeta) {
  return c.h_diff(x, zeta) + c.h_diff(y, xi) - c.h_diff(x, xi) - c.h_diff(y, zeta);
}

// Affine segment family z(s,t) = z0 + s za + t zb shared by the averaged Hessian.
struct AffinePatch {
  Vec z0, za, zb;
  Vec at(double s, double t) const { return z0 + s * za + t * zb; }
  SingularLocus locus() const { return affine_locus(z0, za, zb); }
};

inline AffinePatch pairing_patch(const Vec& x, const Vec& y, const Vec& xi, const Vec& zeta) {
  return {y - zeta, zeta - xi, x - y};
}

struct AveragedHessian {
  Mat A;
  double phi = 0.0;
};

inline AveragedHessian averaged_hessian(const CostFunction& c, const AffinePatch& P, int nodes_1d) {
  const int n = c.dim();
  AveragedHessian out{Mat::Zero(n, n), 0.0};
  for (const Node2& q : unit_square_rule(nodes_1d, P.locus())) {
    const Vec z = P.at(q.s, q.t);
    out.A.noalias() += q.w * c.hess(z);
    out.phi += q.w * pow0(z.norm(), c.p() - 2.0);
  }
  out.A = (0.5 * (out.A + out.A.transpose())).eval();
  return out;
}

inline Mat a_matrix(const CostFunction& c, const Vec& x, const Vec& y, const Vec& xi, const Vec& zeta,
                    const QuadratureSpec& q) {
  validate(q);
  return averaged_hessian(c, pairing_patch(x, y, xi, zeta), q.nodes_1d).A;
}

inline double phi_weight(const Vec& x, const Vec& y, const Vec& xi, const Vec& zeta, double p,
                         const QuadratureSpec& q) {
  validate(q);
  if (!(p >= 2.0)) throw input_error("phi_weight: p must be >= 2");
  const AffinePatch P = pairing_patch(x, y, xi, zeta);
  return integrate_unit_square([&](double s, double t) { return pow0(P.at(s, t).norm(), p - 2.0); }, q.nodes_1d,
                               P.locus());
}

// Result of a two-route computation: a direct formula and an integral
// representation of the same quantity.
struct DualValue {
  double direct = 0.0;
  double integral = 0.0;
  int nodes_used = 0;
  double gap() const { return std::abs(direct - integral); }
};

namespace detail {

template <class Integral>
DualValue refine_until_agree(double direct, const QuadratureSpec& q, Integral&& integral_at) {
  validate(q);
  DualValue r{direct, 0.0, q.nodes_1d};
  for (int m = q.nodes_1d;; m *= 2) {
    r.integral = integral_at(m);
    r.nodes_used = m;
    if (r.gap() <= q.tolerance * (1.0 + std::abs(direct)) || 2 * m > q.max_nodes) break;
  }
  return r;
}

}  // namespace detail

// lhs = pair_defect, rhs = <A (x-y), xi-zeta>.
inline DualValue defect_bilinear_identity(const CostFunction& c, const Vec& x, const Vec& y, const Vec& xi,
                                          const Vec& zeta, const QuadratureSpec& q) {
  const Vec u = x - y, w = xi - zeta;
  const AffinePatch P = pairing_patch(x, y, xi, zeta);
  return detail::refine_until_agree(pair_defect(c, x, y, xi, zeta), q, [&](int m) {
    return u.dot(averaged_hessian(c, P, m).A * w);
  });
}

struct Sandwich {
  double lower = 0.0, value = 0.0, upper = 0.0;
};

// lambda Phi |v|^2 <= <A v, v> <= Lambda Phi |v|^2, all from one quadrature.
inline Sandwich ellipticity_sandwich_check(const CostFunction& c, const EllipticityBounds& b, const Vec& x,
                                           const Vec& y, const Vec& xi, const Vec& zeta, const Vec& v,
                                           const QuadratureSpec& q, double slack = 1e-9) {
  validate(q);
  const AveragedHessian ah = averaged_hessian(c, pairing_patch(x, y, xi, zeta), q.nodes_1d);
  const double v2 = v.squaredNorm();
  Sandwich s{b.lambda * ah.phi * v2, v.dot(ah.A * v), b.Lambda * ah.phi * v2};
  const double tol = slack * (1.0 + std::abs(s.value));
  if (s.value < s.lower - tol || s.value > s.upper + tol)
    throw inconsistency_error("ellipticity sandwich violated: lower=" + std::to_string(s.lower) +
                              " value=" + std::to_string(s.value) + " upper=" + std::to_string(s.upper));
  return s;
}

// G(z1,z2,z3) = h(z2-z3) - h(z1-z3) - h(z2) + h(z1) and its double-integral form.
inline DualValue g_eval(const CostFunction& c, const Vec& z1, const Vec& z2, const Vec& z3,
                        const QuadratureSpec& q) {
  const Vec zero = Vec::Zero(z1.size());
  const double direct = c.h_diff(z2, z3) - c.h_diff(z1, z3) - c.h_diff(z2, zero) + c.h_diff(z1, zero);
  const AffinePatch P{z1, z2 - z1, -z3};
  const Vec d = z1 - z2;
  if (d.squaredNorm() == 0.0 || z3.squaredNorm() == 0.0) return {direct, 0.0, q.nodes_1d};
  return detail::refine_until_agree(direct, q, [&](int m) {
    double s = 0.0;
    for (const Node2& nd : unit_square_rule(m, P.locus())) s += nd.w * d.dot(c.hess(P.at(nd.s, nd.t)) * z3);
    return s;
  });
}

// P_{A,b}(x,y) = h(y-Ax-b) - h(y-Ay-b) + h(x-Ay-b) - h(x-Ax-b) and its integral form.
inline DualValue p_ab_eval(const CostFunction& c, const Mat& A, const Vec& b, const Vec& x, const Vec& y,
                           const QuadratureSpec& q) {
  const Vec Ax = A * x + b, Ay = A * y + b;
  const double direct = c.h_diff(y, Ax) - c.h_diff(y, Ay) + c.h_diff(x, Ay) - c.h_diff(x, Ax);
  const Vec dy = y - x, dA = Ay - Ax;
  if (dy.squaredNorm() == 0.0 || dA.squaredNorm() == 0.0) return {direct, 0.0, q.nodes_1d};
  const AffinePatch P{x - Ay, dA, dy};
  return detail::refine_until_agree(direct, q, [&](int m) {
    double s = 0.0;
    for (const Node2& nd : unit_square_rule(m, P.locus())) s += nd.w * dA.dot(c.hess(P.at(nd.s, nd.t)) * dy);
    return s;
  });
}

struct MonotonicityReport {
  std::size_t pairs_tested = 0;
  std::size_t violations = 0;
  double worst_defect = std::numeric_limits<double>::infinity();
  // (x, y, xi, zeta) of the pair with the smallest defect.
  std::vector<Vec> worst_pair;
  double slack = 0.0;

  bool monotone() const { return violations == 0; }
};

// Commutative, associative combination of partial reports.
inline MonotonicityReport merge(const MonotonicityReport& a, const MonotonicityReport& b) {
  MonotonicityReport r;
  r.pairs_tested = a.pairs_tested + b.pairs_tested;
  r.violations = a.violations + b.violations;
  r.slack = std::max(a.slack, b.slack);
  const bool take_a = a.worst_defect < b.worst_defect ||
                      (a.worst_defect == b.worst_defect && !a.worst_pair.empty() &&
                       (b.worst_pair.empty() || std::lexicographical_compare(
                                                    a.worst_pair[0].data(), a.worst_pair[0].data() + a.worst_pair[0].size(),
                                                    b.worst_pair[0].data(), b.worst_pair[0].data() + b.worst_pair[0].size())));
  r.worst_defect = take_a ? a.worst_defect : b.worst_defect;
  r.worst_pair = take_a ? a.worst_pair : b.worst_pair;
  return r;
}

// Diameter of the bounding box of all points and values.
inline double configuration_scale(const std::vector<Vec>& pts, const std::vector<Vec>& vals) {
  if (pts.empty()) return 0.0;
  Vec lo = pts[0], hi = pts[0];
  for (const auto* set : {&pts, &vals})
    for (const Vec& v : *set) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  return (hi - lo).norm();
}

inline double monotone_slack(double scale, double p, double rel = 1e-9) { return rel * (1.0 + std::pow(scale, p)); }

namespace detail {

inline void record_pair(MonotonicityReport& r, const CostFunction& c, const std::vector<Vec>& pts,
                        const std::vector<Vec>& vals, std::size_t i, std::size_t j) {
  const double d = pair_defect(c, pts[i], pts[j], vals[i], vals[j]);
  ++r.pairs_tested;
  if (d < -r.slack) ++r.violations;
  if (d < r.worst_defect) {
    r.worst_defect = d;
    r.worst_pair = {pts[i], pts[j], vals[i], vals[j]};
  }
}

}  // namespace detail

// Pair scan over an arbitrary point set. Exhaustive when all pairs fit the
// budget, otherwise a seeded sample split evenly between near, mid and far
// pairs (thirds of the point-set diameter).
inline MonotonicityReport check_pairs_monotone(const CostFunction& c, const std::vector<Vec>& pts,
                                               const std::vector<Vec>& vals, std::size_t pair_budget,
                                               std::uint64_t seed, double slack_rel = 1e-9) {
  if (pair_budget < 1) throw input_error("check_map_monotone: pair_budget must be >= 1");
  if (pts.size() != vals.size()) throw input_error("check_map_monotone: points and values differ in length");
  MonotonicityReport r;
  r.slack = monotone_slack(configuration_scale(pts, vals), c.p(), slack_rel);
  const std::size_t N = pts.size();
  if (N < 2) return r;
  const std::size_t all = N * (N - 1) / 2;
  if (all <= pair_budget) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) detail::record_pair(r, c, pts, vals, i, j);
    return r;
  }
  double diam = 0.0;
  {
    Vec lo = pts[0], hi = pts[0];
    for (const Vec& v : pts) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    diam = (hi - lo).norm();
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  std::size_t remaining = pair_budget;
  for (int stratum = 0; stratum < 3; ++stratum) {
    const std::size_t quota = stratum == 2 ? remaining : pair_budget / 3;
    const double lo = diam * stratum / 3.0, hi = diam * (stratum + 1) / 3.0;
    std::size_t got = 0, attempts = 0;
    while (got < quota) {
      const std::size_t i = pick(rng), j = pick(rng);
      if (i == j) continue;
      const double d = (pts[i] - pts[j]).norm();
      // Give up on the stratum constraint when the stratum is nearly empty.
      const bool in = (d >= lo && (d < hi || stratum == 2)) || attempts > 50 * quota;
      ++attempts;
      if (!in) continue;
      detail::record_pair(r, c, pts, vals, i, j);
      ++got;
    }
    remaining -= quota;
  }
  return r;
}

inline MonotonicityReport check_map_monotone(const CostFunction& c, const SampledMap& m, std::size_t pair_budget,
                                             std::uint64_t seed, double slack_rel = 1e-9) {
  validate(m);
  return check_pairs_monotone(c, m.points, m.values, pair_budget, seed, slack_rel);
}

}  // namespace hmono
