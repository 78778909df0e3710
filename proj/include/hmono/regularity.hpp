#pragma once

#include "cost_kernel.hpp"
#include "estimates.hpp"
#include "monotone_core.hpp"
#include "sampled_map.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace hmono {

// ---- test functions ----

// Tensor product of exp(1 - 1/(1 - t^2)) in each axis; support is the box
// center +- halfwidth.
struct Bump {
  Vec center;
  Vec halfwidth;
  double scale = 1.0;

  double operator()(const Vec& x) const {
    double v = scale;
    for (Eigen::Index a = 0; a < x.size(); ++a) {
      const double t = (x[a] - center[a]) / halfwidth[a];
      if (std::abs(t) >= 1.0) return 0.0;
      v *= std::exp(1.0 - 1.0 / (1.0 - t * t));
    }
    return v;
  }
};

inline void check_bump_inside(const GridSpec& g, const Bump& b) {
  for (int a = 0; a < g.dim(); ++a)
    if (b.center[a] - b.halfwidth[a] < g.box_min[a] || b.center[a] + b.halfwidth[a] > g.box_max[a])
      throw input_error("bump support escapes the domain on axis " + std::to_string(a));
}

// Seeded bumps whose supports stay at least `margin_cells` cells inside the box.
inline std::vector<Bump> make_bump_family(const GridSpec& g, int count, std::uint64_t seed, int margin_cells = 2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Bump> out;
  const int n = g.dim();
  for (int k = 0; k < count; ++k) {
    Bump b{Vec(n), Vec(n), 1.0};
    for (int a = 0; a < n; ++a) {
      const double h = g.spacing(a), L = g.box_max[a] - g.box_min[a];
      const double wmin = 4.0 * h, wmax = std::max(wmin, 0.25 * L);
      b.halfwidth[a] = wmin + (wmax - wmin) * U(rng);
      const double lo = g.box_min[a] + b.halfwidth[a] + margin_cells * h;
      const double hi = g.box_max[a] - b.halfwidth[a] - margin_cells * h;
      if (lo > hi)
        throw resolution_error("bump family: grid too coarse on axis " + std::to_string(a) + " (need about " +
                               std::to_string(2 * (4 + margin_cells)) + " cells for the narrowest bump)");
      b.center[a] = lo + (hi - lo) * U(rng);
    }
    out.push_back(b);
  }
  return out;
}

inline double bump_mass(const GridSpec& g, const Bump& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += b(g.node(i));
  return s * g.cell_volume();
}

// ---- bounded-deformation inequality ----

enum class BdScheme {
  pair_difference,  // weighted pair defects along a lattice direction; exact sign for monotone samples
  central_pairing   // D^2h and Dh of x - Tx against central differences of the bump
};

struct BdResult {
  double min_value = std::numeric_limits<double>::infinity();
  double min_ratio = std::numeric_limits<double>::infinity();  // min of value / bump mass
  std::size_t argmin = 0;
  std::vector<double> values;
  std::vector<double> masses;
};

namespace detail {

// Integer grid offset parallel to xi, if one with entries |k_a| <= 4 exists.
inline std::optional<std::vector<int>> lattice_offset(const GridSpec& g, const Vec& xi) {
  const int n = g.dim();
  std::vector<int> k(n, 0);
  for (int mag = 1; mag <= 4; ++mag) {
    std::vector<int> cand(n);
    bool ok = true;
    // Scale so the largest |xi_a / h_a| maps to mag.
    double big = 0.0;
    for (int a = 0; a < n; ++a) big = std::max(big, std::abs(xi[a] / g.spacing(a)));
    for (int a = 0; a < n && ok; ++a) {
      const double c = mag * (xi[a] / g.spacing(a)) / big;
      cand[a] = static_cast<int>(std::lround(c));
      if (std::abs(c - cand[a]) > 1e-9) ok = false;
    }
    if (ok) return cand;
  }
  return std::nullopt;
}

inline std::vector<Vec> fields_F(const SampledMap& m) {
  std::vector<Vec> F(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) F[i] = m.points[i] - m.values[i];
  return F;
}

// Central difference of phi along axis a at node idx (phi vanishes beyond the
// bump support, which stays inside the grid).
inline double central_diff(const GridSpec& g, const std::vector<double>& phi, std::size_t idx, int a) {
  auto mi = g.multi_index(idx);
  const int k = mi[a];
  const double fwd = k + 1 < g.shape[a] ? (mi[a] = k + 1, phi[g.flat_index(mi)]) : 0.0;
  mi[a] = k;
  const double bwd = k > 0 ? (mi[a] = k - 1, phi[g.flat_index(mi)]) : 0.0;
  return (fwd - bwd) / (2.0 * g.spacing(a));
}

inline std::vector<double> sample_bump(const GridSpec& g, const Bump& b) {
  std::vector<double> phi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) phi[i] = b(g.node(i));
  return phi;
}

}  // namespace detail

// Left-hand side of the bounded-deformation inequality for one bump.
inline double bd_value(const CostFunction& c, const SampledMap& m, const Vec& xi, const Bump& bump, BdScheme scheme) {
  const GridSpec& g = m.grid;
  check_bump_inside(g, bump);
  const std::vector<double> phi = detail::sample_bump(g, bump);
  const double vol = g.cell_volume();
  double total = 0.0;
  if (scheme == BdScheme::pair_difference) {
    const auto k = detail::lattice_offset(g, xi);
    if (!k) throw input_error("bd check: direction is not aligned with a small grid offset");
    Vec d(g.dim());
    for (int a = 0; a < g.dim(); ++a) d[a] = (*k)[a] * g.spacing(a);
    const double t2 = d.squaredNorm();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (phi[i] == 0.0) continue;
      auto mi = g.multi_index(i);
      for (int a = 0; a < g.dim(); ++a) {
        mi[a] -= (*k)[a];
        if (mi[a] < 0 || mi[a] >= g.shape[a]) throw input_error("bd check: bump support too close to the boundary");
      }
      const std::size_t j = g.flat_index(mi);
      total += phi[i] * pair_defect(c, m.points[i], m.points[j], m.values[i], m.values[j]) / t2;
    }
    return total * vol;
  }
  const Vec u = xi.normalized();
  for (std::size_t i = 0; i < g.size(); ++i) {
    double dphi = 0.0;
    for (int a = 0; a < g.dim(); ++a) dphi += u[a] * detail::central_diff(g, phi, i, a);
    if (phi[i] == 0.0 && dphi == 0.0) continue;
    const Vec F = m.points[i] - m.values[i];
    total += phi[i] * u.dot(c.hess(F) * u) + c.grad(F).dot(u) * dphi;
  }
  return total * vol;
}

inline BdResult bd_inequality_min(const CostFunction& c, const SampledMap& m, const Vec& xi,
                                  const std::vector<Bump>& bumps, BdScheme scheme = BdScheme::pair_difference) {
  validate(m);
  if (std::abs(xi.norm() - 1.0) > 1e-12) throw input_error("bd check: direction must be a unit vector");
  BdResult r;
  for (std::size_t k = 0; k < bumps.size(); ++k) {
    const double v = bd_value(c, m, xi, bumps[k], scheme);
    const double mass = bump_mass(m.grid, bumps[k]);
    r.values.push_back(v);
    r.masses.push_back(mass);
    if (v < r.min_value) {
      r.min_value = v;
      r.argmin = k;
    }
    if (mass > 0.0) r.min_ratio = std::min(r.min_ratio, v / mass);
  }
  return r;
}

// Coordinate axes and pairwise diagonals, each with both signs on the axes.
inline std::vector<Vec> bd_directions(int n) {
  std::vector<Vec> out;
  for (int a = 0; a < n; ++a) {
    out.push_back(Vec::Unit(n, a));
    out.push_back(-Vec::Unit(n, a));
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      out.push_back((Vec::Unit(n, a) + Vec::Unit(n, b)) / std::sqrt(2.0));
      out.push_back((Vec::Unit(n, a) - Vec::Unit(n, b)) / std::sqrt(2.0));
    }
  return out;
}

// <a_ij, phi> = int h_ij(F) phi + (1/2) int (h_i(F) d_j phi + h_j(F) d_i phi), F = x - Tx,
// derivatives of phi by central differences (summation by parts on the grid).
inline double a_entry_pairing(const CostFunction& c, const SampledMap& m, int i, int j, const Bump& bump) {
  const GridSpec& g = m.grid;
  if (i < 0 || j < 0 || i >= g.dim() || j >= g.dim()) throw input_error("a_entry_pairing: index out of range");
  check_bump_inside(g, bump);
  const std::vector<double> phi = detail::sample_bump(g, bump);
  double total = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double di = detail::central_diff(g, phi, k, i), dj = detail::central_diff(g, phi, k, j);
    if (phi[k] == 0.0 && di == 0.0 && dj == 0.0) continue;
    const Vec F = m.points[k] - m.values[k];
    const Vec G = c.grad(F);
    total += c.hess(F)(i, j) * phi[k] + 0.5 * (G[i] * dj + G[j] * di);
  }
  return total * g.cell_volume();
}

// ---- pointwise profiles ----

struct RegularityProfile {
  Vec center;
  std::vector<double> radii;
  std::vector<double> ratios;
  double fitted_rate = 0.0;
  std::string classification;
  bool bounded = false;
  bool decaying = false;
};

// Log-spaced decreasing radii from r_max to r_min.
inline std::vector<double> radius_decade(double r_max, double r_min, int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(r_max * std::pow(r_min / r_max, static_cast<double>(k) / (count - 1)));
  return out;
}

inline void check_radii(const SampledMap& m, const Vec& x0, const std::vector<double>& radii) {
  if (radii.size() < 2) throw input_error("profile: need at least two radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0)) throw input_error("profile: radii must be positive");
    if (k && !(radii[k] < radii[k - 1])) throw input_error("profile: radii must be strictly decreasing");
  }
  if (!m.grid.contains_ball(x0, radii.front())) throw input_error("profile: largest ball leaves the domain");
}

inline std::string class_label(bool little, double k, double q) {
  std::ostringstream s;
  s << (little ? "t^{" : "T^{");
  if (std::abs(k - std::round(k)) < 1e-12) s << std::llround(k);
  else s << k;
  s << ",";
  if (std::isinf(q)) s << "inf";
  else if (std::abs(q - std::round(q)) < 1e-12) s << std::llround(q);
  else s << q;
  s << "}";
  return s.str();
}

// Bounded: max ratio <= 2 x median. Decaying: fitted rate >= 0.2 or all ratios
// negligible.
inline void classify(RegularityProfile& P, double k, double q, double scale) {
  std::vector<double> pos_r, pos_v;
  double mx = 0.0;
  for (std::size_t i = 0; i < P.ratios.size(); ++i) {
    mx = std::max(mx, P.ratios[i]);
    if (P.ratios[i] > 0.0) {
      pos_r.push_back(P.radii[i]);
      pos_v.push_back(P.ratios[i]);
    }
  }
  std::vector<double> s = P.ratios;
  std::nth_element(s.begin(), s.begin() + s.size() / 2, s.end());
  double med = s[s.size() / 2];
  if (s.size() % 2 == 0) {
    const double lo = *std::max_element(s.begin(), s.begin() + s.size() / 2);
    med = 0.5 * (med + lo);
  }
  const bool negligible = mx <= 1e-12 * (1.0 + scale);
  P.fitted_rate = pos_r.size() >= 2 ? loglog_slope(pos_r, pos_v) : 0.0;
  P.bounded = negligible || mx <= 2.0 * med;
  P.decaying = negligible || P.fitted_rate >= 0.2;
  if (P.decaying) P.classification = class_label(true, k, q);
  else if (P.bounded) P.classification = class_label(false, k, q);
  else P.classification = "inconclusive";
}

enum class FitDegree { constant, affine };

inline RegularityProfile tkp_profile(const SampledMap& m, const Vec& x0, double k, double q,
                                     const std::vector<double>& radii, FitDegree fit) {
  validate(m);
  check_radii(m, x0, radii);
  const int n = m.dim();
  RegularityProfile P;
  P.center = x0;
  P.radii = radii;
  double scale = 0.0;
  for (const Vec& v : m.values) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  for (double R : radii) {
    const BallQuadrature B = grid_ball(m.grid, x0, R);
    if (B.nodes.size() < static_cast<std::size_t>(2 * (n + 1)))
      throw resolution_error("tkp_profile: " + std::to_string(B.nodes.size()) + " nodes in B_R, need " +
                             std::to_string(2 * (n + 1)));
    const int cols = fit == FitDegree::constant ? 1 : n + 1;
    Mat X(B.nodes.size(), cols), Y(B.nodes.size(), n);
    for (std::size_t r = 0; r < B.nodes.size(); ++r) {
      const std::size_t i = B.grid_index[r];
      X(r, 0) = 1.0;
      if (cols > 1) X.row(r).tail(n) = (m.points[i] - x0).transpose();
      Y.row(r) = m.values[i].transpose();
    }
    const Mat W = X.colPivHouseholderQr().solve(Y);
    const Mat E = Y - X * W;
    double acc = 0.0;
    for (Eigen::Index r = 0; r < E.rows(); ++r) {
      const double e = E.row(r).norm();
      acc = std::isinf(q) ? std::max(acc, e) : acc + std::pow(e, q);
    }
    const double val = std::isinf(q) ? acc : std::pow(acc / E.rows(), 1.0 / q);
    P.ratios.push_back(val / std::pow(R, k));
  }
  classify(P, k, q, scale);
  return P;
}

inline RegularityProfile holder_profile(const SampledMap& m, const Vec& x0, double p,
                                        const std::vector<double>& radii) {
  validate(m);
  check_radii(m, x0, radii);
  const std::size_t c = m.grid.nearest_node(x0);
  if ((m.points[c] - x0).norm() > 1e-9 * (1.0 + x0.norm())) throw input_error("holder_profile: x0 must be a grid node");
  RegularityProfile P;
  P.center = x0;
  P.radii = radii;
  double scale = 0.0;
  for (const Vec& v : m.values) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double expo = 1.0 / (p - 1.0);
  for (double R : radii) {
    const BallQuadrature B = grid_ball(m.grid, x0, R);
    if (B.nodes.size() < static_cast<std::size_t>(2 * (m.dim() + 1))) throw resolution_error("holder_profile: ball too small");
    double sup = 0.0;
    for (std::size_t i : B.grid_index) sup = std::max(sup, (m.values[i] - m.values[c]).norm());
    P.ratios.push_back(sup / std::pow(R, expo));
  }
  classify(P, expo, std::numeric_limits<double>::infinity(), scale);
  return P;
}

// Average of |Dh(x - Tx) - Dh(x0 - Tx0)| over B_R divided by R.
inline RegularityProfile dh_composition_t11_probe(const CostFunction& c, const SampledMap& m, const Vec& x0,
                                                  const std::vector<double>& radii) {
  validate(m);
  check_radii(m, x0, radii);
  const std::size_t c0 = m.grid.nearest_node(x0);
  if ((m.points[c0] - x0).norm() > 1e-9 * (1.0 + x0.norm())) throw input_error("t11 probe: x0 must be a grid node");
  const Vec g0 = c.grad(m.points[c0] - m.values[c0]);
  RegularityProfile P;
  P.center = x0;
  P.radii = radii;
  double scale = g0.norm();
  for (double R : radii) {
    const BallQuadrature B = grid_ball(m.grid, x0, R);
    if (B.nodes.size() < static_cast<std::size_t>(2 * (m.dim() + 1))) throw resolution_error("t11 probe: ball too small");
    double s = 0.0;
    for (std::size_t i : B.grid_index) {
      const Vec gi = c.grad(m.points[i] - m.values[i]);
      scale = std::max(scale, gi.norm());
      s += (gi - g0).norm();
    }
    P.ratios.push_back(s / B.grid_index.size() / R);
  }
  classify(P, 1.0, 1.0, scale);
  return P;
}

}  // namespace hmono
