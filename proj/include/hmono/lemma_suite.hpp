#pragma once

#include "cost_kernel.hpp"
#include "monotone_core.hpp"
#include "quadrature.hpp"

#include <string>

namespace hmono {

struct LemmaReport {
  std::string lemma_id;     // "double-integral", "single-integral" or "gradient-gap"
  double p = 0.0;
  double quad_value = 0.0;  // the integral or gap being bounded
  double lower_bound = 0.0;
  double upper_bound = 0.0;  // +inf for one-sided checks
  double margin = 0.0;       // smallest distance to a bound; negative means violated
  bool pass = false;
};

inline double lemma_slack(double value) { return 1e-10 * (1.0 + std::abs(value)); }

// ---- double integral J(v1, v2; delta) ----

// J = int_0^1 int_0^1 |v1 - (t - s delta) v2|^{p-2} ds dt.
inline double j_double(const Vec& v1, const Vec& v2, double delta, double p, const QuadratureSpec& q) {
  validate(q);
  if (!(delta > 0.0 && delta < 1.0)) throw input_error("j_double: delta must lie in (0,1)");
  if (!(p >= 2.0)) throw input_error("j_double: p must be >= 2");
  const Vec za = delta * v2, zb = -v2;
  return integrate_unit_square([&](double s, double t) { return pow0((v1 + s * za + t * zb).norm(), p - 2.0); },
                               q.nodes_1d, affine_locus(v1, za, zb));
}

// Closed forms of the two strip integrals
//   I  = int_0^delta int_{sigma-delta}^{sigma} (1-|tau|)^{p-2} dtau dsigma
//   II = int_delta^1 int_{sigma-delta}^{sigma} (1-tau)^{p-2} dtau dsigma.
inline double closed_I(double delta, double p) {
  return 2.0 * delta / (p - 1.0) - 2.0 / (p * (p - 1.0)) + 2.0 * std::pow(1.0 - delta, p) / (p * (p - 1.0));
}

inline double closed_II(double delta, double p) {
  return (1.0 - std::pow(delta, p) - std::pow(1.0 - delta, p)) / (p * (p - 1.0));
}

// Nested graded Gauss-Legendre evaluation of the same strip integrals.
inline double quad_I(double delta, double p, int nodes = 48) {
  auto inner = [&](double sigma) {
    return integrate_1d_split([&](double tau) { return pow0(1.0 - std::abs(tau), p - 2.0); }, sigma - delta, sigma,
                              nodes, {0.0});
  };
  return integrate_1d(inner, 0.0, delta, nodes, true);
}

inline double quad_II(double delta, double p, int nodes = 48) {
  auto inner = [&](double sigma) {
    return integrate_1d([&](double tau) { return pow0(1.0 - tau, p - 2.0); }, sigma - delta, sigma, nodes, true);
  };
  return integrate_1d(inner, delta, 1.0, nodes, true);
}

struct JLowerConstant {
  double C_p = 0.0;
  double delta0 = 0.0;
  double case_large_v1 = 0.0;  // inf_{delta <= delta0} (I+II)/delta
  double case_large_v2 = 0.0;  // min over length-1/2 windows of |s|^{p-2}
};

// Constants of the double-integral lower bound from the two cases of its
// proof, evaluated numerically.
inline JLowerConstant j_lower_constant(double p) {
  if (!(p >= 2.0)) throw input_error("j_lower_constant: p must be >= 2");
  const double limit = 1.0 / (p - 1.0);  // (I+II)/delta as delta -> 0
  auto ratio = [&](double d) { return (closed_I(d, p) + closed_II(d, p)) / d; };
  JLowerConstant k;
  const int grid = 2000;
  k.delta0 = 0.5;
  double inf_ratio = limit;
  for (int i = 1; i <= grid; ++i) {
    const double d = 0.5 * i / grid;
    const double r = ratio(d);
    if (r < 0.5 * limit) {
      k.delta0 = 0.5 * (i - 1) / grid;
      break;
    }
    inf_ratio = std::min(inf_ratio, r);
  }
  k.case_large_v1 = inf_ratio;
  // min over alpha in [-1,1] of int_{alpha-1/2}^{alpha} |s|^{p-2} ds, attained
  // at alpha = 1/4 where the window is centred on the origin.
  k.case_large_v2 = 2.0 * std::pow(0.25, p - 1.0) / (p - 1.0);
  k.C_p = std::min(k.case_large_v1, k.case_large_v2);
  return k;
}

// J >= C_p max(|v1|,|v2|)^{p-2}.
inline LemmaReport verify_j_lower(const Vec& v1, const Vec& v2, double delta, double p,
                                  const QuadratureSpec& q = {}) {
  const JLowerConstant k = j_lower_constant(p);
  if (delta > k.delta0) throw input_error("verify_j_lower: delta exceeds delta0(p)");
  LemmaReport r;
  r.lemma_id = "double-integral";
  r.p = p;
  r.quad_value = j_double(v1, v2, delta, p, q);
  r.lower_bound = k.C_p * pow0(std::max(v1.norm(), v2.norm()), p - 2.0);
  r.upper_bound = std::numeric_limits<double>::infinity();
  r.margin = r.quad_value - r.lower_bound;
  r.pass = r.margin >= -lemma_slack(r.quad_value);
  return r;
}

// ---- single integral and gradient gap ----

// J = int_0^1 |v1 + t v2|^{p-2} dt, split at the closest approach to 0.
inline double j_single(const Vec& v1, const Vec& v2, double p, const QuadratureSpec& q = {}) {
  validate(q);
  auto f = [&](double t) { return pow0((v1 + t * v2).norm(), p - 2.0); };
  const double n2 = v2.squaredNorm();
  std::vector<double> breaks;
  if (n2 > 0.0) breaks.push_back(-v1.dot(v2) / n2);
  return integrate_1d_split(f, 0.0, 1.0, q.nodes_1d, breaks);
}

struct SingleConstants {
  double c_p = 0.0;
  double C_p = 0.0;
};

inline SingleConstants j_single_constants(double p) {
  return {std::min(1.0 / (p - 1.0), std::pow(2.0, 2.0 - p) / (p - 1.0)), (std::pow(2.0, p - 1.0) - 1.0) / (p - 1.0)};
}

inline LemmaReport verify_j_single_sandwich(const Vec& v1, const Vec& v2, double p, const QuadratureSpec& q = {}) {
  const SingleConstants k = j_single_constants(p);
  const double m = pow0(std::max(v1.norm(), v2.norm()), p - 2.0);
  LemmaReport r;
  r.lemma_id = "single-integral";
  r.p = p;
  r.quad_value = j_single(v1, v2, p, q);
  r.lower_bound = k.c_p * m;
  r.upper_bound = k.C_p * m;
  r.margin = std::min(r.quad_value - r.lower_bound, r.upper_bound - r.quad_value);
  r.pass = r.margin >= -lemma_slack(r.quad_value);
  return r;
}

inline double gradient_gap(const CostFunction& c, const Vec& a, const Vec& b) {
  return (c.grad(a) - c.grad(b)).dot(a - b);
}

struct GapReport {
  LemmaReport sandwich;
  double norm_value = 0.0;  // |Dh(a) - Dh(b)|
  double norm_bound = 0.0;  // lambda c_p |a-b|^{p-1}
  bool pass = false;
};

// lambda c_p |a-b|^p <= gap <= Lambda C_p |a-b|^2 max(|b|,|a-b|)^{p-2}
// and |Dh(a)-Dh(b)| >= lambda c_p |a-b|^{p-1}.
inline GapReport verify_gap_sandwich(const CostFunction& c, const Vec& a, const Vec& b, const EllipticityBounds& e) {
  const double p = c.p();
  const SingleConstants k = j_single_constants(p);
  const double d = (a - b).norm();
  GapReport g;
  LemmaReport& r = g.sandwich;
  r.lemma_id = "gradient-gap";
  r.p = p;
  r.quad_value = gradient_gap(c, a, b);
  r.lower_bound = e.lambda * k.c_p * pow0(d, p);
  r.upper_bound = e.Lambda * k.C_p * d * d * pow0(std::max(b.norm(), d), p - 2.0);
  r.margin = std::min(r.quad_value - r.lower_bound, r.upper_bound - r.quad_value);
  r.pass = r.margin >= -lemma_slack(r.quad_value);
  g.norm_value = (c.grad(a) - c.grad(b)).norm();
  g.norm_bound = e.lambda * k.c_p * pow0(d, p - 1.0);
  g.pass = r.pass && g.norm_value >= g.norm_bound - lemma_slack(g.norm_value);
  return g;
}

}  // namespace hmono
