#pragma once

#include "cost_kernel.hpp"
#include "lemma_suite.hpp"
#include "monotone_core.hpp"
#include "quadrature.hpp"
#include "sampled_map.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hmono {

struct AffineFrame {
  Mat A;
  Vec b;

  static AffineFrame zero(int n) { return {Mat::Zero(n, n), Vec::Zero(n)}; }
  static AffineFrame identity(int n) { return {Mat::Identity(n, n), Vec::Zero(n)}; }

  Vec residual(const Vec& x, const Vec& Tx) const { return Tx - A * x - b; }
  double operator_norm() const { return Eigen::JacobiSVD<Mat>(A).singularValues()(0); }
};

struct BallSpec {
  Vec center;
  double radius = 0.0;
  double beta = 0.5;
};

inline void validate_ball(const SampledMap& m, const BallSpec& ball) {
  if (ball.center.size() != m.dim()) throw input_error("ball: center has wrong dimension");
  if (!(ball.radius > 0.0)) throw input_error("ball: radius must be positive");
  if (!(ball.beta > 0.0 && ball.beta < 1.0)) throw input_error("ball: beta must lie in (0,1)");
  if (!m.grid.contains_ball(ball.center, ball.radius)) throw input_error("ball: B_R(x0) is not inside the map domain");
}

inline constexpr std::size_t min_ball_nodes = 8;

// Riemann sum of |u|^{p-1} over grid nodes in B_R(x0).
inline double delta_integral(const SampledMap& m, const AffineFrame& f, const BallSpec& ball, double p) {
  validate_ball(m, ball);
  const BallQuadrature B = grid_ball(m.grid, ball.center, ball.radius);
  if (B.nodes.size() < min_ball_nodes)
    throw resolution_error("delta_integral: only " + std::to_string(B.nodes.size()) + " grid nodes in the ball");
  double s = 0.0;
  for (std::size_t k = 0; k < B.nodes.size(); ++k) {
    const std::size_t i = B.grid_index[k];
    s += B.weights[k] * pow0(f.residual(m.points[i], m.values[i]).norm(), p - 1.0);
  }
  return s;
}

// H(r) = C (delta r^{-n} + r^{p-1}).
inline double h_profile(double delta, double r, double C, int n, double p) {
  if (!(r > 0.0)) throw domain_error("h_profile: r must be positive");
  return C * (delta * std::pow(r, -n) + std::pow(r, p - 1.0));
}

// Minimizer of H over (0, inf).
inline double r_star(double delta, int n, double p) {
  if (delta < 0.0) throw domain_error("r_star: delta must be >= 0");
  if (delta == 0.0) return 0.0;
  return std::pow(n * delta / (p - 1.0), 1.0 / (n + p - 1.0));
}

// Delta value at which r_star reaches (1-beta)R/2.
inline double delta_threshold(double R, double beta, int n, double p) {
  if (!(R > 0.0) || !(beta > 0.0 && beta < 1.0)) throw domain_error("delta_threshold: need R > 0, beta in (0,1)");
  return std::pow(0.5 * (1.0 - beta) * R, n + p - 1.0) * (p - 1.0) / n;
}

// C(n,p,beta): the small branch applies iff avg^{1/(p-1)} <= C(n,p,beta) R.
inline double branch_constant(int n, double p, double beta) {
  return std::pow(std::pow(0.5 * (1.0 - beta), n + p - 1.0) * (p - 1.0) / (n * unit_ball_volume(n)), 1.0 / (p - 1.0));
}

struct BoundConstants {
  double K1 = 0.0;
  double K2 = 0.0;
};

// Branch constants obtained by evaluating H at r_star (small branch) and at
// (1-beta)R/2 (large branch), with C the calibration constant inside H.
inline BoundConstants bound_constants(int n, double p, double beta, double C) {
  const double a = n / (p - 1.0);
  const double kappa1 = std::pow(a, -n / (n + p - 1.0)) + std::pow(a, (p - 1.0) / (n + p - 1.0));
  const double kappa2 = (p + n - 1.0) / (p - 1.0);
  const double w = unit_ball_volume(n);
  return {std::pow(C * kappa1, 1.0 / (p - 1.0)) * std::pow(w, 1.0 / (n + p - 1.0)),
          std::pow(C * kappa2 * std::pow(0.5 * (1.0 - beta), -n) * w, 1.0 / (p - 1.0))};
}

enum class Branch { small, large };

inline std::string branch_name(Branch b) { return b == Branch::small ? "small" : "large"; }

struct EstimateReport {
  double delta = 0.0;
  double delta0 = 0.0;
  double r_star = 0.0;
  Branch branch = Branch::small;
  double bound = 0.0;
  double empirical_sup = 0.0;
  double calibration_C = 1.0;
  double average = 0.0;         // mean of |u|^{p-1} over B_R
  double branch_C = 0.0;        // C(n,p,beta)
  double K1 = 0.0, K2 = 0.0;
  std::size_t ball_nodes = 0;
  std::size_t inner_nodes = 0;
};

// Two-branch bound from the data average alone.
inline void assemble_bound(EstimateReport& r, int n, double p, double R, double beta) {
  r.r_star = hmono::r_star(r.delta, n, p);
  r.delta0 = delta_threshold(R, beta, n, p);
  r.average = r.delta / (unit_ball_volume(n) * std::pow(R, n));
  r.branch_C = branch_constant(n, p, beta);
  const BoundConstants k = bound_constants(n, p, beta, r.calibration_C);
  r.K1 = k.K1;
  r.K2 = k.K2;
  const double scaled = std::pow(R, -(p - 1.0)) * r.average;
  if (std::pow(r.average, 1.0 / (p - 1.0)) <= r.branch_C * R) {
    r.branch = Branch::small;
    r.bound = k.K1 * R * std::pow(scaled, 1.0 / (n + p - 1.0));
  } else {
    r.branch = Branch::large;
    r.bound = k.K2 * R * std::pow(scaled, 1.0 / (p - 1.0));
  }
}

inline EstimateReport linfty_bound(const SampledMap& m, const AffineFrame& f, const BallSpec& ball, double p,
                                   double C_calibration) {
  if (!(C_calibration > 0.0)) throw input_error("linfty_bound: calibration constant must be positive");
  EstimateReport r;
  r.calibration_C = C_calibration;
  r.delta = delta_integral(m, f, ball, p);
  r.ball_nodes = grid_ball(m.grid, ball.center, ball.radius).nodes.size();
  const BallQuadrature inner = grid_ball(m.grid, ball.center, ball.beta * ball.radius);
  r.inner_nodes = inner.nodes.size();
  for (std::size_t i : inner.grid_index) r.empirical_sup = std::max(r.empirical_sup, f.residual(m.points[i], m.values[i]).norm());
  assemble_bound(r, m.dim(), p, ball.radius, ball.beta);
  return r;
}

// Least-squares affine fit T(x) ~ A x + b over the grid nodes in a ball.
inline AffineFrame fit_affine_frame(const SampledMap& m, const Vec& center, double R) {
  const BallQuadrature B = grid_ball(m.grid, center, R);
  const int n = m.dim();
  if (B.nodes.size() < static_cast<std::size_t>(n + 1)) throw resolution_error("fit_affine_frame: too few nodes");
  Mat X(B.nodes.size(), n + 1), Y(B.nodes.size(), n);
  for (std::size_t k = 0; k < B.nodes.size(); ++k) {
    const std::size_t i = B.grid_index[k];
    X(k, 0) = 1.0;
    X.row(k).tail(n) = m.points[i].transpose();
    Y.row(k) = m.values[i].transpose();
  }
  const Mat W = X.colPivHouseholderQr().solve(Y);
  return {W.bottomRows(n).transpose(), W.row(0).transpose()};
}

struct CalibrationCase {
  const SampledMap* map;
  AffineFrame frame;
  BallSpec ball;
};

// Smallest C for which every training case satisfies empirical_sup <= bound.
// The bound scales as C^{1/(p-1)} in both branches.
inline double calibrate_constant(const std::vector<CalibrationCase>& cases, double p) {
  double C = 0.0;
  for (const auto& c : cases) {
    const EstimateReport r = linfty_bound(*c.map, c.frame, c.ball, p, 1.0);
    if (r.bound > 0.0) C = std::max(C, std::pow(r.empirical_sup / r.bound, p - 1.0));
  }
  if (!(C > 0.0)) throw input_error("calibrate_constant: training family gives no information");
  return C;
}

struct ScalingProbe {
  double slope = 0.0;
  Branch branch = Branch::small;
  std::vector<double> eps;
  std::vector<double> data;   // avg^{1/(p-1)}
  std::vector<double> bound;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  const std::size_t k = x.size();
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

// Log-log slope of the bound against the L^{p-1} data size over the family
// T_eps = A x + b + eps u(x).
inline ScalingProbe scaling_exponent_probe(const SampledMap& m, const AffineFrame& f, const BallSpec& ball, double p,
                                           const std::vector<double>& eps, double C = 1.0) {
  if (eps.size() < 4) throw probe_invalid("scaling probe: need at least 4 scale values");
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  if (!(*lo > 0.0) || *hi / *lo < 10.0 * (1.0 - 1e-12)) throw probe_invalid("scaling probe: scales must span a decade");
  ScalingProbe out;
  SampledMap me = m;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const Vec base = f.A * m.points[i] + f.b;
      me.values[i] = base + eps[k] * (m.values[i] - base);
    }
    const EstimateReport r = linfty_bound(me, f, ball, p, C);
    if (k == 0) out.branch = r.branch;
    if (r.branch != out.branch) throw probe_invalid("scaling probe: family mixes small and large branches");
    if (!(r.average > 0.0)) throw probe_invalid("scaling probe: zero data in the ball");
    out.eps.push_back(eps[k]);
    out.data.push_back(std::pow(r.average, 1.0 / (p - 1.0)));
    out.bound.push_back(r.bound);
  }
  out.slope = loglog_slope(out.data, out.bound);
  return out;
}

struct GLowerCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool skipped = false;
  bool pass = true;
};

// G(w + delta u, w, u) >= delta lambda C_p |u|^2 g^{p-2} at node y, where
// w = y - A y - b, u = T y - A y - b and g = max(|w|, |u|).
inline GLowerCheck g_lower_bound_check(const CostFunction& c, const SampledMap& m, const AffineFrame& f,
                                       std::size_t node, double delta, const EllipticityBounds& e,
                                       const QuadratureSpec& q = {}) {
  const JLowerConstant k = j_lower_constant(c.p());
  if (!(delta > 0.0 && delta <= k.delta0)) throw input_error("g_lower_bound_check: need 0 < delta <= delta0");
  const Vec& y = m.points.at(node);
  const Vec w = y - f.A * y - f.b;
  const Vec u = f.residual(y, m.values[node]);
  GLowerCheck out;
  const double un = u.norm();
  if (un == 0.0) {
    out.skipped = true;
    return out;
  }
  const Vec omega = u / un;
  const double r = delta * un;
  out.lhs = g_eval(c, w + r * omega, w, u, q).direct;
  out.rhs = delta * e.lambda * k.C_p * un * un * pow0(std::max(w.norm(), un), c.p() - 2.0);
  out.pass = out.lhs >= out.rhs - 1e-10 * (1.0 + std::abs(out.rhs));
  return out;
}

// ---- mean-value representation with the Newtonian kernel ----

using ScalarField = std::function<double(const Vec&)>;

struct GreenTerms {
  double value = 0.0;       // v(y)
  double average = 0.0;     // ball average of v
  double correction = 0.0;  // n r^{-n} int_0^r rho^{n-1} int_{B_rho} (Gamma - Gamma(rho)) lap v
  double residual = 0.0;
};

inline GreenTerms green_identity_terms(const ScalarField& v, const ScalarField& lap_v, const Vec& y, double r,
                                       int n, int nodes) {
  if (n < 3) throw unsupported_dimension("green identity: requires n >= 3");
  if (y.size() != n) throw input_error("green identity: y has wrong dimension");
  if (!(r > 0.0)) throw input_error("green identity: r must be positive");
  if (nodes < 2) throw input_error("green identity: nodes must be >= 2");
  GreenTerms g;
  g.value = v(y);
  const BallQuadrature B = ball_polar_rule(y, r, nodes, nodes);
  double s = 0.0;
  for (std::size_t k = 0; k < B.nodes.size(); ++k) s += B.weights[k] * v(B.nodes[k]);
  g.average = s / (unit_ball_volume(n) * std::pow(r, n));

  std::vector<Vec> dirs;
  std::vector<double> dw;
  sphere_rule(n, nodes, dirs, dw);
  auto sphere_lap = [&](double rad) {
    double a = 0.0;
    for (std::size_t k = 0; k < dirs.size(); ++k) a += dw[k] * lap_v(y + rad * dirs[k]);
    return a;
  };
  auto inner = [&](double rho) {
    return integrate_1d([&](double t) { return gamma_shell_weight(t, rho, n) * sphere_lap(t); }, 0.0, rho, nodes,
                        false);
  };
  const double outer =
      integrate_1d([&](double rho) { return std::pow(rho, n - 1) * inner(rho); }, 0.0, r, nodes, false);
  g.correction = n * std::pow(r, -n) * outer;
  g.residual = std::abs(g.value - g.average - g.correction);
  return g;
}

inline double green_identity_residual(const ScalarField& v, const ScalarField& lap_v, const Vec& y, double r, int n,
                                      const QuadratureSpec& q) {
  validate(q);
  return green_identity_terms(v, lap_v, y, r, n, q.nodes_1d).residual;
}

}  // namespace hmono
