#pragma once

#include "cost_kernel.hpp"
#include "estimates.hpp"
#include "io.hpp"
#include "lemma_suite.hpp"
#include "monotone_core.hpp"
#include "regularity.hpp"
#include "transport_gen.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/json_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hmono {

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> s{"verify-lemmas", "check-monotone", "ot-generate", "estimate-linfty",
                                          "holder-scan",   "bd-check",       "tkp-scan",    "green-check"};
  return s;
}

struct ConfigEntry {
  std::string key;  // section.name
  std::string value;
  std::string help;
};

// Every recognised key with its default. Order is the order of --print-defaults.
inline const std::vector<ConfigEntry>& config_defaults() {
  static const std::vector<ConfigEntry> d{
      {"run.scenario", "verify-lemmas", "one of the scenario names"},
      {"run.seed", "1", "master seed; every random choice derives from it"},
      {"run.out", "hmono-out", "output directory for reports"},
      {"cost.dimension", "2", "n >= 2"},
      {"cost.exponent", "2", "p >= 2"},
      {"cost.form", "isotropic", "isotropic | anisotropic"},
      {"cost.matrix", "", "anisotropic M, row-major comma list"},
      {"quadrature.nodes_1d", "32", "Gauss-Legendre nodes per axis"},
      {"quadrature.tolerance", "1e-10", "dual-route agreement target before doubling nodes"},
      {"quadrature.max_nodes", "512", "ceiling for node doubling"},
      {"map.source", "generator", "file | generator | negative"},
      {"map.path", "", "map file for source=file"},
      {"map.kind", "ot_grid", "generator: identity | translation | scaling | ot_grid; negative: reflection | shuffled_ot"},
      {"map.grid_shape", "16,16", "nodes per axis"},
      {"map.box_min", "0,0", "lower box corner"},
      {"map.box_max", "1,1", "upper box corner"},
      {"map.shift", "", "translation vector"},
      {"map.scale", "1", "scaling factor s >= 0"},
      {"map.target", "gaussian", "target density: uniform | gaussian | two-bump"},
      {"map.center", "", "gaussian centre / first bump (default: box centre)"},
      {"map.sigma", "0.2", "gaussian width / first bump width"},
      {"map.center2", "", "second bump centre"},
      {"map.sigma2", "0.2", "second bump width"},
      {"map.weight", "0.5", "mass of the first bump"},
      {"map.jitter", "0.5", "fraction of a cell each target sample may move"},
      {"map.pair_budget", "10000000", "pairs checked when verifying generated maps"},
      {"verify-lemmas.p_grid", "2,2.5,3,4", "exponents to test"},
      {"verify-lemmas.samples", "100", "random inputs per exponent and lemma"},
      {"check-monotone.pair_budget", "10000000", "pairs to test; exhaustive when all pairs fit"},
      {"estimate-linfty.frame", "fit", "fit | zero | identity | explicit"},
      {"estimate-linfty.A", "", "explicit A, row-major"},
      {"estimate-linfty.b", "", "explicit b"},
      {"estimate-linfty.x0", "", "ball centre (default: box centre)"},
      {"estimate-linfty.R", "0.25", "ball radius"},
      {"estimate-linfty.beta", "0.5", "inner ball fraction"},
      {"estimate-linfty.C", "1", "calibration constant inside H"},
      {"estimate-linfty.profile_points", "41", "rows of the (r, H(r)) table"},
      {"profile.centers", "50", "sampled centres for holder-scan and tkp-scan"},
      {"profile.r_max_cells", "20", "largest radius in grid spacings"},
      {"profile.r_min_cells", "2", "smallest radius in grid spacings"},
      {"profile.radii", "8", "radii per profile"},
      {"profile.pass_fraction", "0.9", "fraction of centres that must pass"},
      {"profile.min_slope", "-0.05", "smallest admissible log-log trend of the Holder ratio"},
      {"tkp-scan.k", "1", "order k"},
      {"tkp-scan.q", "inf", "exponent q (number or inf)"},
      {"tkp-scan.fit", "affine", "constant | affine"},
      {"bd-check.bumps", "20", "test functions in the family"},
      {"bd-check.scheme", "pair_difference", "pair_difference | central_pairing"},
      {"bd-check.tolerance", "1e-6", "allowed negative value per unit bump mass"},
      {"green-check.field", "quadratic", "constant | linear | quadratic | exponential"},
      {"green-check.y", "0.1,0.2,0.3", "centre"},
      {"green-check.r", "1", "radius"},
      {"green-check.nodes", "16", "nodes per quadrature axis"},
  };
  return d;
}

class ExperimentConfig {
 public:
  ExperimentConfig() {
    for (const auto& e : config_defaults()) values_[e.key] = e.value;
  }

  static ExperimentConfig from_file(const std::string& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
      const auto ext = std::filesystem::path(path).extension().string();
      if (ext == ".json")
        pt::read_json(path, tree);
      else
        pt::read_ini(path, tree);
    } catch (const pt::ptree_error& e) {
      throw config_error(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw config_error("config: top-level key '" + section + "' must be inside a section");
      for (const auto& [key, val] : body) {
        if (!val.empty()) {
          // JSON arrays: join the elements with commas.
          std::string joined;
          for (const auto& [k2, v2] : val) joined += (joined.empty() ? "" : ",") + v2.get_value<std::string>();
          c.set(section + "." + key, joined);
        } else {
          c.set(section + "." + key, val.get_value<std::string>());
        }
      }
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw config_error("config: unknown field '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw config_error("config: unknown field '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw config_error("config: field '" + key + "' expects a number, got '" + s + "'");
    }
  }

  long long integer(const std::string& key) const {
    const double v = num(key);
    if (v != std::floor(v)) throw config_error("config: field '" + key + "' expects an integer");
    return static_cast<long long>(v);
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw config_error("config: field '" + key + "' has a non-numeric entry '" + tok + "'");
      }
    }
    return out;
  }

  Vec vec(const std::string& key, int n) const {
    const auto v = list(key);
    if (static_cast<int>(v.size()) != n)
      throw config_error("config: field '" + key + "' needs " + std::to_string(n) + " entries");
    return Eigen::Map<const Vec>(v.data(), n);
  }

  // Canonical text: every key in sorted order. Hashing it tags the reports.
  // Every field except the output directory, which does not affect results.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_)
      if (k != "run.out") s += k + "=" + v + "\n";
    return s;
  }

  std::string hash() const { return hex64(fnv1a(canonical())); }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string print_defaults() {
  std::ostringstream os;
  std::string section;
  for (const auto& e : config_defaults()) {
    const auto dot = e.key.find('.');
    const std::string sec = e.key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << "; " << e.help << "\n" << e.key.substr(dot + 1) << " = " << e.value << "\n";
  }
  return os.str();
}

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 check failed, 2 configuration error, 3 runtime error
  std::vector<std::string> files;
  std::string message;
};

namespace detail {

inline CostFunction cost_from(const ExperimentConfig& c, std::optional<double> p_override = std::nullopt) {
  const int n = static_cast<int>(c.integer("cost.dimension"));
  const double p = p_override ? *p_override : c.num("cost.exponent");
  const std::string& form = c.str("cost.form");
  if (form == "isotropic") return CostFunction::isotropic(n, p);
  if (form == "anisotropic") {
    const auto m = c.list("cost.matrix");
    if (static_cast<int>(m.size()) != n * n) throw config_error("config: cost.matrix needs n*n entries");
    Mat M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = m[i * n + j];
    return CostFunction::anisotropic(M, p);
  }
  throw config_error("config: cost.form must be isotropic or anisotropic");
}

inline QuadratureSpec quad_from(const ExperimentConfig& c) {
  QuadratureSpec q{static_cast<int>(c.integer("quadrature.nodes_1d")), c.num("quadrature.tolerance"),
                   static_cast<int>(c.integer("quadrature.max_nodes"))};
  try {
    validate(q);
  } catch (const input_error& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return q;
}

inline GridSpec grid_from(const ExperimentConfig& c, int n) {
  const auto shape = c.list("map.grid_shape");
  if (static_cast<int>(shape.size()) != n) throw config_error("config: map.grid_shape needs n entries");
  std::vector<int> s(shape.begin(), shape.end());
  try {
    return make_grid(c.vec("map.box_min", n), c.vec("map.box_max", n), s);
  } catch (const input_error& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

inline DensitySpec density_from(const ExperimentConfig& c, int n) {
  DensitySpec d;
  const std::string& t = c.str("map.target");
  if (t == "uniform") d.kind = DensitySpec::uniform;
  else if (t == "gaussian") d.kind = DensitySpec::gaussian;
  else if (t == "two-bump") d.kind = DensitySpec::two_bump;
  else throw config_error("config: map.target must be uniform, gaussian or two-bump");
  if (!c.str("map.center").empty()) d.center = c.vec("map.center", n);
  if (!c.str("map.center2").empty()) d.center2 = c.vec("map.center2", n);
  d.sigma = c.num("map.sigma");
  d.sigma2 = c.num("map.sigma2");
  d.weight = c.num("map.weight");
  return d;
}

inline std::uint64_t seed_from(const ExperimentConfig& c) {
  const long long s = c.integer("run.seed");
  if (s < 0) throw config_error("config: run.seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

inline SampledMap map_from(const ExperimentConfig& c, const CostFunction& cost) {
  const std::string& src = c.str("map.source");
  const int n = cost.dim();
  if (src == "file") {
    SampledMap m = read_map_file(c.str("map.path"));
    if (m.dim() != n) throw input_error("map file dimension differs from cost.dimension");
    return m;
  }
  const GridSpec g = grid_from(c, n);
  const std::string& kind = c.str("map.kind");
  const std::uint64_t seed = seed_from(c);
  if (src == "generator") {
    GeneratorSpec s;
    if (kind == "identity") s.kind = GeneratorSpec::identity;
    else if (kind == "translation") s.kind = GeneratorSpec::translation;
    else if (kind == "scaling") s.kind = GeneratorSpec::scaling;
    else if (kind == "ot_grid") s.kind = GeneratorSpec::ot_grid;
    else throw config_error("config: map.kind '" + kind + "' is not a generator");
    if (s.kind == GeneratorSpec::translation) s.shift = c.vec("map.shift", n);
    s.scale = c.num("map.scale");
    s.target = density_from(c, n);
    s.seed = seed;
    s.jitter = c.num("map.jitter");
    s.pair_budget = static_cast<std::size_t>(c.integer("map.pair_budget"));
    return make_generator_map(s, cost, g);
  }
  if (src == "negative") {
    NegativeSpec s;
    if (kind == "reflection") s.kind = NegativeSpec::reflection;
    else if (kind == "shuffled_ot") s.kind = NegativeSpec::shuffled_ot;
    else throw config_error("config: map.kind '" + kind + "' is not a negative control");
    s.target = density_from(c, n);
    s.seed = seed;
    s.jitter = c.num("map.jitter");
    s.pair_budget = static_cast<std::size_t>(c.integer("map.pair_budget"));
    return make_negative_map(s, cost, g);
  }
  throw config_error("config: map.source must be file, generator or negative");
}

// Independent stream per (seed, tag, index).
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline Vec uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = U(rng);
  return v;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

// Seeded profile centres: grid nodes whose largest ball stays inside the box.
inline std::vector<std::size_t> profile_centers(const GridSpec& g, double r_max, int count, std::uint64_t seed) {
  std::vector<std::size_t> admissible;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.contains_ball(g.node(i), r_max)) admissible.push_back(i);
  if (admissible.empty()) throw input_error("profile: no grid node admits the largest radius");
  std::mt19937_64 rng = stream(seed, 0x70726f66, 0);
  std::shuffle(admissible.begin(), admissible.end(), rng);
  if (static_cast<int>(admissible.size()) > count) admissible.resize(count);
  std::sort(admissible.begin(), admissible.end());
  return admissible;
}

inline std::vector<double> profile_radii(const ExperimentConfig& c, const GridSpec& g) {
  double h = g.spacing(0);
  for (int a = 1; a < g.dim(); ++a) h = std::min(h, g.spacing(a));
  const int k = static_cast<int>(c.integer("profile.radii"));
  if (k < 2) throw config_error("config: profile.radii must be >= 2");
  return radius_decade(c.num("profile.r_max_cells") * h, c.num("profile.r_min_cells") * h, k);
}

// ---- scenarios ----

inline int run_verify_lemmas(const ExperimentConfig& c, Report& rep) {
  const int n = static_cast<int>(c.integer("cost.dimension"));
  const auto grid = c.list("verify-lemmas.p_grid");
  const long long samples = c.integer("verify-lemmas.samples");
  if (grid.empty() || samples < 1) throw config_error("config: verify-lemmas needs a p_grid and samples >= 1");
  const std::uint64_t seed = seed_from(c);
  const QuadratureSpec q = quad_from(c);
  std::size_t failures = 0;
  std::map<std::string, double> worst;
  for (std::size_t pi = 0; pi < grid.size(); ++pi) {
    const double p = grid[pi];
    const CostFunction cost = cost_from(c, p);
    const EllipticityBounds e = ellipticity_bounds(cost, 256);
    const double delta = 0.5 * j_lower_constant(p).delta0;
    for (long long s = 0; s < samples; ++s) {
      auto rng = stream(seed, pi, static_cast<std::uint64_t>(s));
      const Vec v1 = uniform_vec(rng, n, -1.0, 1.0), v2 = uniform_vec(rng, n, -1.0, 1.0);
      const Vec a = uniform_vec(rng, n, -2.0, 2.0), b = uniform_vec(rng, n, -2.0, 2.0);
      const GapReport gap = verify_gap_sandwich(cost, a, b, e);
      LemmaReport g = gap.sandwich;
      g.pass = gap.pass;
      for (const LemmaReport& r : {verify_j_lower(v1, v2, delta, p, q), verify_j_single_sandwich(v1, v2, p, q), g}) {
        rep.row({r.lemma_id, fmt(p), std::to_string(s), fmt(r.quad_value), fmt(r.lower_bound), fmt(r.upper_bound),
                 fmt(r.margin), r.pass ? "1" : "0"});
        if (!r.pass) ++failures;
        auto it = worst.find(r.lemma_id);
        if (it == worst.end() || r.margin < it->second) worst[r.lemma_id] = r.margin;
      }
    }
  }
  rep.set("rows", rep.rows());
  rep.set("failures", failures);
  for (const auto& [k, v] : worst) rep.set("worst_margin." + k, v);
  return failures ? 1 : 0;
}

inline int run_check_monotone(const ExperimentConfig& c, Report& rep) {
  const CostFunction cost = cost_from(c);
  SampledMap m;
  try {
    m = map_from(c, cost);
  } catch (const generator_rejected& e) {
    rep.set("map_rejected", std::string(e.what()));
    summarize(rep, e.report);
    return 1;
  } catch (const control_failure& e) {
    rep.set("control_failure", std::string(e.what()));
    return 1;
  }
  const auto r = check_map_monotone(cost, m, static_cast<std::size_t>(c.integer("check-monotone.pair_budget")),
                                    seed_from(c));
  rep.row({std::to_string(m.size()), std::to_string(r.pairs_tested), std::to_string(r.violations),
           fmt(r.pairs_tested ? r.worst_defect : 0.0), fmt(r.slack)});
  summarize(rep, r);
  rep.set("monotone", r.monotone());
  return r.monotone() ? 0 : 1;
}

inline int run_ot_generate(const ExperimentConfig& c, Report& rep, const std::string& out,
                           std::vector<std::string>& files) {
  const CostFunction cost = cost_from(c);
  const GridSpec g = grid_from(c, cost.dim());
  const DensitySpec d = density_from(c, cost.dim());
  validate(d);
  SampledMap m = skeleton(g);
  const auto targets = sample_density(d, g, seed_from(c), c.num("map.jitter"));
  const Assignment a = solve_discrete_ot(cost, m.points, targets);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.values[i] = targets[a.permutation[i]];
    rep.row({std::to_string(i), std::to_string(a.permutation[i]), fmt_vec(m.points[i]), fmt_vec(m.values[i])});
  }
  std::filesystem::create_directories(out);
  write_map_file(m, out + "/ot_map.txt");
  {
    std::ofstream os(out + "/assignment.tsv");
    write_assignment(a, os);
  }
  files.push_back(out + "/ot_map.txt");
  files.push_back(out + "/assignment.tsv");
  const auto r = check_map_monotone(cost, m, static_cast<std::size_t>(c.integer("map.pair_budget")), seed_from(c));
  rep.set("nodes", m.size());
  rep.set("total_cost", a.total_cost);
  summarize(rep, r);
  return r.monotone() ? 0 : 1;
}

inline int run_estimate(const ExperimentConfig& c, Report& rep) {
  const CostFunction cost = cost_from(c);
  const SampledMap m = map_from(c, cost);
  const int n = m.dim();
  BallSpec ball;
  ball.center = c.str("estimate-linfty.x0").empty() ? Vec(0.5 * (m.grid.box_min + m.grid.box_max))
                                                     : c.vec("estimate-linfty.x0", n);
  ball.radius = c.num("estimate-linfty.R");
  ball.beta = c.num("estimate-linfty.beta");
  const std::string& fr = c.str("estimate-linfty.frame");
  AffineFrame f;
  if (fr == "fit") f = fit_affine_frame(m, ball.center, ball.radius);
  else if (fr == "zero") f = AffineFrame::zero(n);
  else if (fr == "identity") f = AffineFrame::identity(n);
  else if (fr == "explicit") {
    const auto a = c.list("estimate-linfty.A");
    if (static_cast<int>(a.size()) != n * n) throw config_error("config: estimate-linfty.A needs n*n entries");
    f.A = Mat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.A(i, j) = a[i * n + j];
    f.b = c.vec("estimate-linfty.b", n);
  } else
    throw config_error("config: estimate-linfty.frame must be fit, zero, identity or explicit");
  const EstimateReport r = linfty_bound(m, f, ball, cost.p(), c.num("estimate-linfty.C"));
  rep.set("delta", r.delta);
  rep.set("delta0", r.delta0);
  rep.set("r_star", r.r_star);
  rep.set("branch", branch_name(r.branch));
  rep.set("bound", r.bound);
  rep.set("empirical_sup", r.empirical_sup);
  rep.set("calibration_C", r.calibration_C);
  rep.set("average", r.average);
  rep.set("branch_constant", r.branch_C);
  rep.set("K1", r.K1);
  rep.set("K2", r.K2);
  rep.set("A", fmt_vec(Eigen::Map<const Vec>(Mat(f.A.transpose()).data(), n * n)));
  rep.set("b", fmt_vec(f.b));
  const long long pts = c.integer("estimate-linfty.profile_points");
  const double mid = r.r_star > 0.0 ? r.r_star : ball.radius;
  for (long long k = 0; k < pts; ++k) {
    const double rr = mid * std::pow(10.0, -1.0 + 2.0 * k / std::max(1LL, pts - 1));
    rep.row({fmt(rr), fmt(h_profile(r.delta, rr, r.calibration_C, n, cost.p()))});
  }
  // The estimate itself is the contract being tested.
  return r.empirical_sup <= r.bound * (1.0 + 1e-12) ? 0 : 1;
}

inline int run_holder(const ExperimentConfig& c, Report& rep) {
  const CostFunction cost = cost_from(c);
  const SampledMap m = map_from(c, cost);
  const auto radii = profile_radii(c, m.grid);
  const auto centers = profile_centers(m.grid, radii.front(), static_cast<int>(c.integer("profile.centers")),
                                       seed_from(c));
  const double min_slope = c.num("profile.min_slope");
  std::size_t slope_ok = 0, t11_ok = 0;
  for (std::size_t idx : centers) {
    const Vec x0 = m.points[idx];
    const RegularityProfile H = holder_profile(m, x0, cost.p(), radii);
    const RegularityProfile D = dh_composition_t11_probe(cost, m, x0, radii);
    const bool ok = H.fitted_rate >= min_slope;
    slope_ok += ok;
    t11_ok += D.bounded;
    rep.row({fmt_vec(x0), join(radii), join(H.ratios), fmt(H.fitted_rate), H.classification, ok ? "1" : "0",
             join(D.ratios), D.classification, D.bounded ? "1" : "0"});
  }
  const double f1 = double(slope_ok) / centers.size(), f2 = double(t11_ok) / centers.size();
  const double need = c.num("profile.pass_fraction");
  rep.set("centers", centers.size());
  rep.set("holder_pass_fraction", f1);
  rep.set("t11_bounded_fraction", f2);
  rep.set("required_fraction", need);
  return (f1 >= need && f2 >= need) ? 0 : 1;
}

inline int run_tkp(const ExperimentConfig& c, Report& rep) {
  const CostFunction cost = cost_from(c);
  const SampledMap m = map_from(c, cost);
  const auto radii = profile_radii(c, m.grid);
  const auto centers = profile_centers(m.grid, radii.front(), static_cast<int>(c.integer("profile.centers")),
                                       seed_from(c));
  const std::string& fit = c.str("tkp-scan.fit");
  if (fit != "affine" && fit != "constant") throw config_error("config: tkp-scan.fit must be affine or constant");
  const double k = c.num("tkp-scan.k"), q = c.num("tkp-scan.q");
  if (!(q >= 1.0)) throw config_error("config: tkp-scan.q must be >= 1 or inf");
  std::map<std::string, std::size_t> counts;
  for (std::size_t idx : centers) {
    const RegularityProfile P =
        tkp_profile(m, m.points[idx], k, q, radii, fit == "affine" ? FitDegree::affine : FitDegree::constant);
    ++counts[P.classification];
    rep.row({fmt_vec(m.points[idx]), join(radii), join(P.ratios), fmt(P.fitted_rate), P.classification});
  }
  rep.set("centers", centers.size());
  for (const auto& [cls, cnt] : counts) rep.set("class." + cls, cnt);
  return 0;
}

inline int run_bd(const ExperimentConfig& c, Report& rep) {
  const CostFunction cost = cost_from(c);
  SampledMap m;
  try {
    m = map_from(c, cost);
  } catch (const generator_rejected& e) {
    rep.set("map_rejected", std::string(e.what()));
    return 1;
  }
  const std::string& sch = c.str("bd-check.scheme");
  BdScheme scheme;
  if (sch == "pair_difference") scheme = BdScheme::pair_difference;
  else if (sch == "central_pairing") scheme = BdScheme::central_pairing;
  else throw config_error("config: bd-check.scheme must be pair_difference or central_pairing");
  const auto bumps = make_bump_family(m.grid, static_cast<int>(c.integer("bd-check.bumps")), seed_from(c));
  double worst = std::numeric_limits<double>::infinity();
  for (const Vec& xi : bd_directions(m.dim())) {
    const BdResult r = bd_inequality_min(cost, m, xi, bumps, scheme);
    for (std::size_t k = 0; k < bumps.size(); ++k)
      rep.row({fmt_vec(xi), std::to_string(k), fmt(r.values[k]), fmt(r.masses[k]), fmt(r.values[k] / r.masses[k])});
    worst = std::min(worst, r.min_ratio);
  }
  const double tol = c.num("bd-check.tolerance");
  rep.set("min_value_per_mass", worst);
  rep.set("tolerance", tol);
  return worst >= -tol ? 0 : 1;
}

inline int run_green(const ExperimentConfig& c, Report& rep) {
  const int n = static_cast<int>(c.integer("cost.dimension"));
  const Vec y = c.vec("green-check.y", n);
  const double r = c.num("green-check.r");
  const int nodes = static_cast<int>(c.integer("green-check.nodes"));
  const std::string& field = c.str("green-check.field");
  ScalarField v, lap;
  double tol = 1e-9;
  bool convergence = false;
  if (field == "constant") {
    v = [](const Vec&) { return 3.0; };
    lap = [](const Vec&) { return 0.0; };
  } else if (field == "linear") {
    v = [](const Vec& x) { return 1.0 + x.sum(); };
    lap = [](const Vec&) { return 0.0; };
  } else if (field == "quadratic") {
    v = [y](const Vec& x) { return (x - y).squaredNorm(); };
    lap = [n](const Vec&) { return 2.0 * n; };
    tol = 1e-3 * r * r;
  } else if (field == "exponential") {
    v = [](const Vec& x) { return std::exp(2.0 * x[0]); };
    lap = [](const Vec& x) { return 4.0 * std::exp(2.0 * x[0]); };
    convergence = true;
  } else
    throw config_error("config: green-check.field must be constant, linear, quadratic or exponential");
  const GreenTerms g1 = green_identity_terms(v, lap, y, r, n, nodes);
  const GreenTerms g2 = green_identity_terms(v, lap, y, r, n, 2 * nodes);
  for (const auto& [m, g] : {std::pair{nodes, g1}, std::pair{2 * nodes, g2}})
    rep.row({std::to_string(m), fmt(g.value), fmt(g.average), fmt(g.correction), fmt(g.residual)});
  rep.set("residual", g1.residual);
  rep.set("residual_refined", g2.residual);
  bool ok;
  if (convergence) {
    const double ratio = g2.residual > 0.0 ? g1.residual / g2.residual : std::numeric_limits<double>::infinity();
    // Once both levels sit at rounding level the ratio carries no information.
    const bool at_roundoff = g1.residual <= 1e-12 * (1.0 + std::abs(g1.value));
    rep.set("refinement_ratio", ratio);
    rep.set("at_roundoff", std::string(at_roundoff ? "yes" : "no"));
    ok = at_roundoff || ratio >= 2.5;
  } else {
    rep.set("tolerance", tol);
    ok = g1.residual <= tol;
  }
  return ok ? 0 : 1;
}

inline std::vector<std::string> report_columns(const std::string& scenario) {
  if (scenario == "verify-lemmas") return {"lemma", "p", "sample", "value", "lower", "upper", "margin", "pass"};
  if (scenario == "check-monotone") return {"nodes", "pairs_tested", "violations", "worst_defect", "slack"};
  if (scenario == "ot-generate") return {"source", "target", "x", "T"};
  if (scenario == "estimate-linfty") return {"r", "H"};
  if (scenario == "holder-scan")
    return {"center", "radii", "holder_ratios", "holder_rate", "holder_class", "holder_ok", "t11_ratios", "t11_class",
            "t11_bounded"};
  if (scenario == "tkp-scan") return {"center", "radii", "ratios", "rate", "class"};
  if (scenario == "bd-check") return {"direction", "bump", "value", "mass", "value_per_mass"};
  if (scenario == "green-check") return {"nodes", "v_y", "average", "correction", "residual"};
  throw config_error("config: unknown scenario '" + scenario + "'");
}

}  // namespace detail

// Runs one scenario and writes <out>/<scenario>.tsv and .summary. Output is a
// pure function of the configuration.
inline RunResult run(const ExperimentConfig& c) {
  RunResult res;
  const std::string scenario = c.str("run.scenario");
  const std::string out = c.str("run.out");
  std::vector<std::string> cols;
  try {
    cols = detail::report_columns(scenario);
  } catch (const config_error& e) {
    res.exit_code = 2;
    res.message = e.what();
    return res;
  }
  Report rep(scenario, cols);
  std::ostringstream prov;
  prov << "# tool=hmono " << tool_version << "\n# scenario=" << scenario << "\n# seed=" << c.str("run.seed")
       << "\n# config_hash=" << c.hash() << "\n";
  try {
    int code = 0;
    if (scenario == "verify-lemmas") code = detail::run_verify_lemmas(c, rep);
    else if (scenario == "check-monotone") code = detail::run_check_monotone(c, rep);
    else if (scenario == "ot-generate") code = detail::run_ot_generate(c, rep, out, res.files);
    else if (scenario == "estimate-linfty") code = detail::run_estimate(c, rep);
    else if (scenario == "holder-scan") code = detail::run_holder(c, rep);
    else if (scenario == "tkp-scan") code = detail::run_tkp(c, rep);
    else if (scenario == "bd-check") code = detail::run_bd(c, rep);
    else if (scenario == "green-check") code = detail::run_green(c, rep);
    res.exit_code = code;
    rep.set("status", std::string(code == 0 ? "pass" : "check-failed"));
  } catch (const config_error& e) {
    res.exit_code = 2;
    res.message = e.what();
    rep.set("status", std::string("usage-error"));
    rep.set("error", res.message);
  } catch (const std::exception& e) {
    res.exit_code = 3;
    res.message = e.what();
    rep.set("status", std::string("runtime-error"));
    rep.set("error", res.message);
  }
  try {
    const auto paths = rep.write(out, prov.str());
    res.files.insert(res.files.end(), paths.begin(), paths.end());
  } catch (const std::exception& e) {
    res.exit_code = 3;
    res.message = e.what();
  }
  return res;
}

}  // namespace hmono
