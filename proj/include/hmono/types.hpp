#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hmono {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy. Each kind maps to one failure mode named in the module
// contracts; callers that only care about "something went wrong" can catch
// hmono::error.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct domain_error : error { using error::error; };
struct structural_error : error { using error::error; };
struct input_error : error { using error::error; };
struct resolution_error : error { using error::error; };
struct inconsistency_error : error { using error::error; };
struct unsupported_dimension : error { using error::error; };
struct probe_invalid : error { using error::error; };
struct singularity_error : error { using error::error; };
struct control_failure : error { using error::error; };
struct config_error : error { using error::error; };

inline bool all_finite(const Vec& x) { return x.allFinite(); }

inline void require_finite(const Vec& x, const char* what) {
  if (!x.allFinite()) throw domain_error(std::string(what) + ": non-finite input");
}

// |x|^e with the convention 0^0 = 1.
inline double pow0(double r, double e) {
  if (e == 0.0) return 1.0;
  if (r == 0.0) return 0.0;
  return std::pow(r, e);
}

inline std::string vec_str(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + ")";
}

inline constexpr double pi = 3.14159265358979323846;

// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
  return std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

}  // namespace hmono
