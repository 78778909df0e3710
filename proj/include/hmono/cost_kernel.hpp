#pragma once

#include "types.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

namespace hmono {

enum class CostForm { isotropic, anisotropic, custom };

// User-supplied kernel triple. Validated by homogeneity sampling before use.
struct CustomKernel {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
};

class CostFunction {
 public:
  static CostFunction isotropic(int n, double p) {
    CostFunction c(n, p);
    c.form_ = CostForm::isotropic;
    return c;
  }

  // h(x) = (x^T M x)^{p/2}; M must be symmetric positive definite.
  static CostFunction anisotropic(const Mat& M, double p) {
    if (M.rows() != M.cols() || M.rows() < 2) throw input_error("anisotropic cost: M must be square, n >= 2");
    if (!M.allFinite()) throw input_error("anisotropic cost: M has non-finite entries");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff()))
      throw structural_error("anisotropic cost: M is not symmetric");
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw structural_error("anisotropic cost: M is not positive definite");
    CostFunction c(static_cast<int>(M.rows()), p);
    c.form_ = CostForm::anisotropic;
    c.M_ = M;
    c.Minv_ = llt.solve(Mat::Identity(M.rows(), M.cols()));
    return c;
  }

  static CostFunction custom(int n, double p, CustomKernel k, std::uint64_t seed = 7);

  int dim() const { return n_; }
  double p() const { return p_; }
  CostForm form() const { return form_; }
  const Mat& M() const { return M_; }

  double h(const Vec& x) const {
    require_finite(x, "eval_h");
    switch (form_) {
      case CostForm::isotropic: return pow0(x.norm(), p_);
      case CostForm::anisotropic: return pow0(std::sqrt(std::max(0.0, x.dot(M_ * x))), p_);
      case CostForm::custom: return custom_->h(x);
    }
    return 0.0;
  }

  Vec grad(const Vec& x) const {
    require_finite(x, "grad_h");
    switch (form_) {
      case CostForm::isotropic: {
        const double r = x.norm();
        if (r == 0.0) return Vec::Zero(x.size());
        return p_ * pow0(r, p_ - 2.0) * x;
      }
      case CostForm::anisotropic: {
        const Vec Mx = M_ * x;
        const double q = std::max(0.0, x.dot(Mx));
        if (q == 0.0) return Vec::Zero(x.size());
        return p_ * pow0(q, 0.5 * p_ - 1.0) * Mx;
      }
      case CostForm::custom: return custom_->grad(x);
    }
    return Vec();
  }

  Mat hess(const Vec& x) const {
    require_finite(x, "hess_h");
    const Eigen::Index n = x.size();
    switch (form_) {
      case CostForm::isotropic: {
        if (p_ == 2.0) return 2.0 * Mat::Identity(n, n);
        const double r = x.norm();
        if (r == 0.0) return Mat::Zero(n, n);
        Mat H = p_ * std::pow(r, p_ - 2.0) * Mat::Identity(n, n);
        H.noalias() += p_ * (p_ - 2.0) * std::pow(r, p_ - 4.0) * x * x.transpose();
        return H;
      }
      case CostForm::anisotropic: {
        if (p_ == 2.0) return 2.0 * M_;
        const Vec Mx = M_ * x;
        const double q = std::max(0.0, x.dot(Mx));
        if (q == 0.0) return Mat::Zero(n, n);
        Mat H = p_ * std::pow(q, 0.5 * p_ - 1.0) * M_;
        H.noalias() += p_ * (p_ - 2.0) * std::pow(q, 0.5 * p_ - 2.0) * Mx * Mx.transpose();
        return H;
      }
      case CostForm::custom: return custom_->hess(x);
    }
    return Mat();
  }

  // h(a - b) without a temporary; inputs are assumed finite.
  double h_diff(const Vec& a, const Vec& b) const {
    switch (form_) {
      case CostForm::isotropic: {
        const double r2 = (a - b).squaredNorm();
        if (p_ == 2.0) return r2;
        if (p_ == 3.0) return r2 * std::sqrt(r2);
        if (p_ == 4.0) return r2 * r2;
        return r2 == 0.0 ? 0.0 : std::pow(r2, 0.5 * p_);
      }
      case CostForm::anisotropic: {
        const double q = std::max(0.0, (a - b).dot(M_ * (a - b)));
        return q == 0.0 ? 0.0 : std::pow(q, 0.5 * p_);
      }
      case CostForm::custom: return custom_->h(a - b);
    }
    return 0.0;
  }

  // Inverse of the gradient map, w -> x with Dh(x) = w. Built-in forms only.
  Vec grad_inverse(const Vec& w) const {
    const double wn = w.norm();
    if (wn == 0.0) return Vec::Zero(w.size());
    switch (form_) {
      case CostForm::isotropic:
        return std::pow(wn / p_, 1.0 / (p_ - 1.0)) * (w / wn);
      case CostForm::anisotropic: {
        // Dh(x) = p q^{p/2-1} M x, so x = M^{-1} w / (p q^{p/2-1}) and
        // q^{p-1} = w^T M^{-1} w / p^2.
        const Vec Miw = Minv_ * w;
        const double q = std::pow(w.dot(Miw) / (p_ * p_), 1.0 / (p_ - 1.0));
        return Miw / (p_ * pow0(q, 0.5 * p_ - 1.0));
      }
      case CostForm::custom: break;
    }
    throw input_error("grad_inverse: not available for custom kernels");
  }

 private:
  CostFunction(int n, double p) : n_(n), p_(p) {
    if (n < 2) throw input_error("cost: dimension must be >= 2");
    if (!(p >= 2.0) || !std::isfinite(p)) throw input_error("cost: exponent must be a finite p >= 2");
  }

  int n_;
  double p_;
  CostForm form_ = CostForm::isotropic;
  Mat M_;
  Mat Minv_;
  std::shared_ptr<const CustomKernel> custom_;
};

// Homogeneity sampling for user kernels: degrees p, p-1, p-2 for h, Dh, D^2h.
inline void validate_homogeneity(const CostFunction& c, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01(0.0, 1.0);
  const double p = c.p();
  for (int k = 0; k < samples; ++k) {
    Vec x(c.dim());
    for (int i = 0; i < c.dim(); ++i) x[i] = N01(rng);
    for (double t : {0.5, 2.0, 10.0}) {
      const Vec tx = t * x;
      const double h1 = c.h(tx), h0 = std::pow(t, p) * c.h(x);
      if (!(h1 >= 0.0) || std::abs(h1 - h0) > 1e-9 * (1.0 + std::abs(h1)))
        throw structural_error("kernel fails degree-p homogeneity or sign at x=" + vec_str(x));
      const Vec g1 = c.grad(tx), g0 = std::pow(t, p - 1.0) * c.grad(x);
      if ((g1 - g0).norm() > 1e-9 * (1.0 + g1.norm()))
        throw structural_error("kernel gradient fails degree-(p-1) homogeneity at x=" + vec_str(x));
      const Mat H1 = c.hess(tx), H0 = std::pow(t, p - 2.0) * c.hess(x);
      if ((H1 - H0).norm() > 1e-9 * (1.0 + H1.norm()))
        throw structural_error("kernel Hessian fails degree-(p-2) homogeneity at x=" + vec_str(x));
    }
  }
  if (c.h(Vec::Zero(c.dim())) != 0.0) throw structural_error("kernel: h(0) != 0");
}

inline CostFunction CostFunction::custom(int n, double p, CustomKernel k, std::uint64_t seed) {
  if (!k.h || !k.grad || !k.hess) throw input_error("custom cost: h, grad and hess must all be provided");
  CostFunction c(n, p);
  c.form_ = CostForm::custom;
  c.custom_ = std::make_shared<const CustomKernel>(std::move(k));
  validate_homogeneity(c, 100, seed);
  return c;
}

struct EllipticityBounds {
  double lambda = 0.0;
  double Lambda = 0.0;
};

// Deterministic quasi-uniform points on S^{n-1}. `phase` in [0,1) shifts the
// whole pattern, giving an independent sample for cross-checks.
inline std::vector<Vec> sphere_points(int n, int count, double phase = 0.0) {
  std::vector<Vec> pts;
  pts.reserve(count);
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * pi * (k + phase) / count;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      pts.push_back(u);
    }
    return pts;
  }
  if (n == 3) {
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = 2.0 * pi * (k / golden + phase);
      Vec u(3);
      u << r * std::cos(a), r * std::sin(a), z;
      pts.push_back(u);
    }
    return pts;
  }
  // Kronecker sequence pushed through the normal quantile, then normalized.
  std::vector<double> alpha(n);
  for (int i = 0; i < n; ++i) alpha[i] = std::fmod(std::sqrt(2.0 + 3.0 * i + i * i), 1.0);
  for (int k = 0; k < count; ++k) {
    Vec g(n);
    for (int i = 0; i < n; ++i) {
      double t = std::fmod((k + 1) * alpha[i] + phase + 0.5 * i / n, 1.0);
      t = std::clamp(t, 1e-12, 1.0 - 1e-12);
      g[i] = std::sqrt(2.0) * boost::math::erf_inv(2.0 * t - 1.0);
    }
    const double gn = g.norm();
    if (gn == 0.0) continue;
    pts.push_back(g / gn);
  }
  return pts;
}

namespace detail {

inline Eigen::Vector2d hess_extremes(const CostFunction& c, const Vec& u) {
  Eigen::SelfAdjointEigenSolver<Mat> es(c.hess(u), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

// Local pattern search on the sphere for the extreme eigenvalue, starting at u.
inline double refine_extreme(const CostFunction& c, Vec u, bool minimize) {
  const int n = c.dim();
  auto f = [&](const Vec& v) {
    const auto e = hess_extremes(c, v);
    return minimize ? e[0] : -e[1];
  };
  double best = f(u);
  double step = 0.1;
  while (step > 1e-10) {
    bool moved = false;
    for (int i = 0; i < n && !moved; ++i) {
      for (double s : {step, -step}) {
        Vec v = u;
        v[i] += s;
        v.normalize();
        const double fv = f(v);
        if (fv < best) {
          best = fv;
          u = v;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return minimize ? best : -best;
}

}  // namespace detail

// Extreme Hessian eigenvalues over the unit sphere. The sampled extremes are
// polished by a local search so that the pair also encloses points outside
// the sample.
inline EllipticityBounds ellipticity_bounds(const CostFunction& c, int sphere_sample_count) {
  if (sphere_sample_count < 1) throw input_error("ellipticity_bounds: sample count must be >= 1");
  const auto pts = sphere_points(c.dim(), sphere_sample_count);
  EllipticityBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Vec umin, umax;
  for (const Vec& u : pts) {
    const auto e = detail::hess_extremes(c, u);
    if (!(e[0] > 0.0)) throw structural_error("Hessian not positive definite at unit vector " + vec_str(u));
    if (e[0] < b.lambda) { b.lambda = e[0]; umin = u; }
    if (e[1] > b.Lambda) { b.Lambda = e[1]; umax = u; }
  }
  if (c.form() != CostForm::isotropic) {
    b.lambda = std::min(b.lambda, detail::refine_extreme(c, umin, true));
    b.Lambda = std::max(b.Lambda, detail::refine_extreme(c, umax, false));
    if (!(b.lambda > 0.0)) throw structural_error("Hessian not positive definite near unit vector " + vec_str(umin));
  }
  return b;
}

}  // namespace hmono
