#pragma once

#include "cost_kernel.hpp"
#include "monotone_core.hpp"
#include "sampled_map.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace hmono {

// Largest instance the exact solver accepts. Grid maps on 64x64 nodes need 4096.
inline constexpr std::size_t assignment_cap = 4096;

struct Assignment {
  std::vector<Vec> sources;
  std::vector<Vec> targets;
  std::vector<int> permutation;  // source i -> target permutation[i]
  double total_cost = 0.0;
};

// Sum of h(source_i - target_perm[i]), accumulated in source order.
inline double assignment_cost(const CostFunction& c, const std::vector<Vec>& src, const std::vector<Vec>& tgt,
                              const std::vector<int>& perm) {
  double t = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) t += c.h_diff(src[i], tgt[perm[i]]);
  return t;
}

namespace detail {

// Dense linear assignment by successive shortest augmenting paths with
// potentials, warm-started by column reduction. cost is row-major n x n.
inline std::vector<int> solve_lsap(const std::vector<double>& cost, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, inf), spc(n);
  std::vector<int> col4row(n, -1), row4col(n, -1), path(n, -1), remaining(n), argmin(n, 0);
  std::vector<char> SR(n), SC(n);

  for (int i = 0; i < n; ++i) {
    const double* row = &cost[static_cast<std::size_t>(i) * n];
    for (int j = 0; j < n; ++j)
      if (row[j] < v[j]) {
        v[j] = row[j];
        argmin[j] = i;
      }
  }
  for (int j = 0; j < n; ++j)
    if (col4row[argmin[j]] < 0) {
      col4row[argmin[j]] = j;
      row4col[j] = argmin[j];
    }

  for (int cur = 0; cur < n; ++cur) {
    if (col4row[cur] >= 0) continue;
    std::fill(spc.begin(), spc.end(), inf);
    std::fill(SR.begin(), SR.end(), 0);
    std::fill(SC.begin(), SC.end(), 0);
    int nr = n;
    for (int j = 0; j < n; ++j) remaining[j] = n - 1 - j;
    double min_val = 0.0;
    int i = cur, sink = -1;
    while (sink < 0) {
      SR[i] = 1;
      double lowest = inf;
      int index = -1;
      const double* row = &cost[static_cast<std::size_t>(i) * n];
      const double ui = u[i];
      for (int it = 0; it < nr; ++it) {
        const int j = remaining[it];
        const double r = min_val + row[j] - ui - v[j];
        if (r < spc[j]) {
          path[j] = i;
          spc[j] = r;
        }
        if (spc[j] < lowest || (spc[j] == lowest && row4col[j] < 0)) {
          lowest = spc[j];
          index = it;
        }
      }
      if (index < 0 || lowest == inf) throw inconsistency_error("assignment: infeasible cost matrix");
      min_val = lowest;
      const int j = remaining[index];
      if (row4col[j] < 0)
        sink = j;
      else
        i = row4col[j];
      SC[j] = 1;
      remaining[index] = remaining[--nr];
    }
    u[cur] += min_val;
    for (int k = 0; k < n; ++k) {
      if (SR[k] && k != cur) u[k] += min_val - spc[col4row[k]];
      if (SC[k]) v[k] -= min_val - spc[k];
    }
    int j = sink;
    while (true) {
      const int r = path[j];
      row4col[j] = r;
      std::swap(col4row[r], j);
      if (r == cur) break;
    }
  }
  return col4row;
}

}  // namespace detail

// Exact optimal assignment for C_ij = h(x_i - y_j).
inline Assignment solve_discrete_ot(const CostFunction& c, const std::vector<Vec>& sources,
                                    const std::vector<Vec>& targets, std::size_t cap = assignment_cap) {
  if (sources.size() != targets.size())
    throw input_error("solve_discrete_ot: " + std::to_string(sources.size()) + " sources vs " +
                      std::to_string(targets.size()) + " targets");
  if (sources.size() > cap)
    throw input_error("solve_discrete_ot: N=" + std::to_string(sources.size()) + " exceeds the cap " +
                      std::to_string(cap));
  for (const auto* set : {&sources, &targets})
    for (const Vec& x : *set) {
      if (x.size() != c.dim()) throw input_error("solve_discrete_ot: point dimension differs from cost dimension");
      if (!x.allFinite()) throw input_error("solve_discrete_ot: non-finite point");
    }
  Assignment a;
  a.sources = sources;
  a.targets = targets;
  const int n = static_cast<int>(sources.size());
  if (n == 0) return a;
  std::vector<double> C(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) C[static_cast<std::size_t>(i) * n + j] = c.h_diff(sources[i], targets[j]);
  a.permutation = detail::solve_lsap(C, n);
  a.total_cost = assignment_cost(c, sources, targets, a.permutation);
  return a;
}

// ---- densities ----

struct DensitySpec {
  enum Kind { uniform, gaussian, two_bump } kind = uniform;
  Vec center;        // gaussian / first bump
  double sigma = 0.2;
  Vec center2;       // second bump
  double sigma2 = 0.2;
  double weight = 0.5;  // mass of the first bump
};

inline std::string density_name(DensitySpec::Kind k) {
  switch (k) {
    case DensitySpec::uniform: return "uniform";
    case DensitySpec::gaussian: return "gaussian";
    case DensitySpec::two_bump: return "two-bump";
  }
  return "?";
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double q) {
  q = std::clamp(q, 1e-300, 1.0 - 1e-16);
  return std::sqrt(2.0) * boost::math::erf_inv(2.0 * q - 1.0);
}

// Quantile of N(c, s^2) truncated to [lo, hi].
inline double truncated_normal_quantile(double u, double c, double s, double lo, double hi) {
  const double a = normal_cdf((lo - c) / s), b = normal_cdf((hi - c) / s);
  const double x = c + s * normal_quantile(a + u * (b - a));
  return std::clamp(x, lo, hi);
}

}  // namespace detail

// Stratified, seeded-jitter sample of a density on the box of grid g: one
// point per grid cell of the unit cube, pushed through per-axis quantiles.
// jitter in [0,1] is the fraction of a cell each point may move.
inline std::vector<Vec> sample_density(const DensitySpec& d, const GridSpec& g, std::uint64_t seed,
                                       double jitter = 0.5) {
  validate(g);
  const int n = g.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  std::vector<Vec> out;
  out.reserve(g.size());
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const auto m = g.multi_index(idx);
    Vec u(n);
    for (int a = 0; a < n; ++a) u[a] = std::clamp((m[a] + 0.5 + jitter * U(rng)) / g.shape[a], 0.0, 1.0);
    Vec x(n);
    const Vec c1 = d.center.size() == n ? d.center : Vec(0.5 * (g.box_min + g.box_max));
    const Vec c2 = d.center2.size() == n ? d.center2 : c1;
    switch (d.kind) {
      case DensitySpec::uniform:
        for (int a = 0; a < n; ++a) x[a] = g.box_min[a] + u[a] * (g.box_max[a] - g.box_min[a]);
        break;
      case DensitySpec::gaussian:
        for (int a = 0; a < n; ++a) x[a] = detail::truncated_normal_quantile(u[a], c1[a], d.sigma, g.box_min[a], g.box_max[a]);
        break;
      case DensitySpec::two_bump: {
        const bool first = u[0] < d.weight;
        Vec v = u;
        v[0] = first ? u[0] / d.weight : (u[0] - d.weight) / (1.0 - d.weight);
        const Vec& c = first ? c1 : c2;
        const double s = first ? d.sigma : d.sigma2;
        for (int a = 0; a < n; ++a) x[a] = detail::truncated_normal_quantile(v[a], c[a], s, g.box_min[a], g.box_max[a]);
        break;
      }
    }
    out.push_back(x);
  }
  return out;
}

inline void validate(const DensitySpec& d) {
  if (!(d.sigma > 0.0) || !(d.sigma2 > 0.0)) throw input_error("density: sigma must be positive");
  if (d.kind == DensitySpec::two_bump && !(d.weight > 0.0 && d.weight < 1.0))
    throw input_error("density: two-bump weight must lie in (0,1)");
}

// ---- generators ----

struct generator_rejected : error {
  MonotonicityReport report;
  generator_rejected(const std::string& what, MonotonicityReport r) : error(what), report(std::move(r)) {}
};

struct GeneratorSpec {
  enum Kind { identity, translation, scaling, ot_grid } kind = identity;
  Vec shift;                 // translation
  double scale = 1.0;        // scaling, s >= 0
  DensitySpec target;        // ot_grid target density; the source is the uniform grid itself
  std::uint64_t seed = 1;
  double jitter = 0.5;
  std::size_t pair_budget = 10'000'000;
};

inline std::string generator_name(GeneratorSpec::Kind k) {
  switch (k) {
    case GeneratorSpec::identity: return "identity";
    case GeneratorSpec::translation: return "translation";
    case GeneratorSpec::scaling: return "scaling";
    case GeneratorSpec::ot_grid: return "ot_grid";
  }
  return "?";
}

// Builds the map and verifies it; a map that fails verification is rejected.
inline SampledMap make_generator_map(const GeneratorSpec& spec, const CostFunction& c, const GridSpec& g) {
  if (g.dim() != c.dim()) throw input_error("generator: grid dimension differs from cost dimension");
  SampledMap m = skeleton(g);
  switch (spec.kind) {
    case GeneratorSpec::identity: break;
    case GeneratorSpec::translation:
      if (spec.shift.size() != g.dim()) throw input_error("generator: translation vector has wrong dimension");
      for (Vec& v : m.values) v += spec.shift;
      break;
    case GeneratorSpec::scaling:
      if (!(spec.scale >= 0.0)) throw input_error("generator: scaling requires s >= 0");
      for (Vec& v : m.values) v *= spec.scale;
      break;
    case GeneratorSpec::ot_grid: {
      validate(spec.target);
      const auto targets = sample_density(spec.target, g, spec.seed, spec.jitter);
      const Assignment a = solve_discrete_ot(c, m.points, targets);
      for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = targets[a.permutation[i]];
      break;
    }
  }
  const MonotonicityReport r = check_map_monotone(c, m, spec.pair_budget, spec.seed);
  if (!r.monotone())
    throw generator_rejected(generator_name(spec.kind) + " generator failed verification: " +
                                 std::to_string(r.violations) + " violations, worst defect " +
                                 std::to_string(r.worst_defect),
                             r);
  return m;
}

struct NegativeSpec {
  enum Kind { reflection, shuffled_ot } kind = reflection;
  DensitySpec target;
  std::uint64_t seed = 1;
  double jitter = 0.5;
  std::size_t pair_budget = 10'000'000;
};

// Deliberately non-monotone maps for negative controls.
inline SampledMap make_negative_map(const NegativeSpec& spec, const CostFunction& c, const GridSpec& g) {
  if (g.dim() != c.dim()) throw input_error("negative map: grid dimension differs from cost dimension");
  SampledMap m = skeleton(g);
  switch (spec.kind) {
    case NegativeSpec::reflection:
      for (Vec& v : m.values) v = -v;
      break;
    case NegativeSpec::shuffled_ot: {
      const auto targets = sample_density(spec.target, g, spec.seed, spec.jitter);
      const Assignment a = solve_discrete_ot(c, m.points, targets);
      for (std::size_t i = 0; i < m.size(); ++i) m.values[i] = targets[a.permutation[i]];
      // Swapping the images of a pair flips the sign of its defect, so any
      // pair with a strictly positive defect yields a violation.
      const double slack = monotone_slack(configuration_scale(m.points, m.values), c.p());
      std::mt19937_64 rng(spec.seed);
      std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
      bool swapped = false;
      for (int attempt = 0; attempt < 100000 && !swapped; ++attempt) {
        const std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        if (pair_defect(c, m.points[i], m.points[j], m.values[i], m.values[j]) > 2.0 * slack) {
          std::swap(m.values[i], m.values[j]);
          swapped = true;
        }
      }
      if (!swapped) throw control_failure("shuffled_ot: no pair with positive defect to swap");
      break;
    }
  }
  const MonotonicityReport r = check_map_monotone(c, m, spec.pair_budget, spec.seed);
  if (r.monotone()) throw control_failure("negative control passed the monotonicity check");
  return m;
}

}  // namespace hmono
