#pragma once

#include "monotone_core.hpp"
#include "sampled_map.hpp"
#include "transport_gen.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hmono {

inline constexpr const char* tool_version = "1.0.0";

// Shortest round-trip representation of a double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_vec(const Vec& v, char sep = ',') {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt(v[i]);
  }
  return s;
}

// 64-bit FNV-1a, used to tag reports with the configuration they came from.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- map files ----
// Text format: a one-line JSON header {"n", "grid_shape", "box_min", "box_max"}
// followed by one row "x_1 .. x_n T_1 .. T_n" per node in grid order. A single
// JSON document with an additional "values" array is also accepted.

inline void write_map(const SampledMap& m, std::ostream& os) {
  nlohmann::json h;
  h["n"] = m.dim();
  h["grid_shape"] = m.grid.shape;
  h["box_min"] = std::vector<double>(m.grid.box_min.data(), m.grid.box_min.data() + m.dim());
  h["box_max"] = std::vector<double>(m.grid.box_max.data(), m.grid.box_max.data() + m.dim());
  os << h.dump() << "\n";
  for (std::size_t i = 0; i < m.size(); ++i) os << fmt_vec(m.points[i], ' ') << ' ' << fmt_vec(m.values[i], ' ') << "\n";
}

inline void write_map_file(const SampledMap& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw input_error("cannot write map file " + path);
  write_map(m, os);
}

namespace detail {

inline Vec json_vec(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw input_error(std::string("map header: missing array '") + key + "'");
  const auto v = j[key].get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline GridSpec header_grid(const nlohmann::json& h) {
  if (!h.contains("n") || !h.contains("grid_shape")) throw input_error("map header: needs n and grid_shape");
  GridSpec g{json_vec(h, "box_min"), json_vec(h, "box_max"), h["grid_shape"].get<std::vector<int>>()};
  if (h["n"].get<int>() != g.dim()) throw input_error("map header: n does not match grid_shape");
  validate(g);
  return g;
}

}  // namespace detail

inline SampledMap read_map(std::istream& is) {
  std::string first;
  std::getline(is, first);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(first);
  } catch (const nlohmann::json::exception&) {
    // Possibly a multi-line JSON document.
    std::stringstream rest;
    rest << first << "\n" << is.rdbuf();
    try {
      h = nlohmann::json::parse(rest.str());
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("map file: unreadable header: ") + e.what());
    }
  }
  SampledMap m = skeleton(detail::header_grid(h));
  const int n = m.dim();
  if (h.contains("values")) {
    const auto& vals = h["values"];
    if (!vals.is_array() || vals.size() != m.size()) throw input_error("map file: 'values' must list one vector per node");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto v = vals[i].get<std::vector<double>>();
      if (static_cast<int>(v.size()) != n) throw input_error("map file: value " + std::to_string(i) + " has wrong length");
      m.values[i] = Eigen::Map<const Vec>(v.data(), n);
    }
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      Vec x(n), t(n);
      for (int a = 0; a < n; ++a)
        if (!(is >> x[a])) throw input_error("map file: truncated at row " + std::to_string(i));
      for (int a = 0; a < n; ++a)
        if (!(is >> t[a])) throw input_error("map file: truncated at row " + std::to_string(i));
      if ((x - m.points[i]).norm() > 1e-9 * (1.0 + x.norm()))
        throw input_error("map file: row " + std::to_string(i) + " is not the expected grid node");
      m.values[i] = t;
    }
  }
  validate(m);
  return m;
}

inline SampledMap read_map_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw input_error("cannot open map file " + path);
  return read_map(is);
}

inline void write_assignment(const Assignment& a, std::ostream& os) {
  os << "source\ttarget\n";
  for (std::size_t i = 0; i < a.permutation.size(); ++i) os << i << '\t' << a.permutation[i] << "\n";
  os << "# total_cost=" << fmt(a.total_cost) << "\n";
}

// ---- reports ----

// A flat table plus a summary record, written with a provenance header.
class Report {
 public:
  Report(std::string name, std::vector<std::string> columns) : name_(std::move(name)), columns_(std::move(columns)) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw inconsistency_error("report " + name_ + ": row width mismatch");
    rows_.push_back(cells);
  }
  void set(const std::string& key, const std::string& value) { summary_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, fmt(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  std::size_t rows() const { return rows_.size(); }
  const std::string& name() const { return name_; }

  std::string table_text(const std::string& provenance) const {
    std::ostringstream os;
    os << provenance;
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "\t" : "") << columns_[i];
    os << "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "\t" : "") << r[i];
      os << "\n";
    }
    return os.str();
  }

  std::string summary_text(const std::string& provenance) const {
    std::ostringstream os;
    os << provenance;
    for (const auto& [k, v] : summary_) os << k << "=" << v << "\n";
    return os.str();
  }

  // Writes <dir>/<name>.tsv and <dir>/<name>.summary; returns the paths.
  std::vector<std::string> write(const std::string& dir, const std::string& provenance) const {
    std::filesystem::create_directories(dir);
    const std::string t = dir + "/" + name_ + ".tsv", s = dir + "/" + name_ + ".summary";
    std::ofstream(t) << table_text(provenance);
    std::ofstream(s) << summary_text(provenance);
    if (!std::filesystem::exists(t) || !std::filesystem::exists(s)) throw input_error("cannot write reports in " + dir);
    return {t, s};
  }

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::pair<std::string, std::string>> summary_;
};

inline void summarize(Report& r, const MonotonicityReport& m) {
  r.set("pairs_tested", m.pairs_tested);
  r.set("violations", m.violations);
  r.set("worst_defect", m.pairs_tested ? m.worst_defect : 0.0);
  r.set("slack", m.slack);
  if (m.worst_pair.size() == 4) {
    r.set("worst_x", fmt_vec(m.worst_pair[0]));
    r.set("worst_y", fmt_vec(m.worst_pair[1]));
    r.set("worst_xi", fmt_vec(m.worst_pair[2]));
    r.set("worst_zeta", fmt_vec(m.worst_pair[3]));
  }
}

}  // namespace hmono
