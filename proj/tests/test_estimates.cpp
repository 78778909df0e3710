#include <catch_amalgamated.hpp>

#include <random>

#include <hmono/estimates.hpp>
#include <hmono/transport_gen.hpp>

using namespace hmono;
using Catch::Approx;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// T(x) = x + amp * (sin(3 x_0 + 1), cos(2 x_1)) and its 3-D analogue.
SampledMap perturbed_identity(int n, int per_axis, double amp) {
  return sample_map(square_grid(n, -1, 1, per_axis), [&](const Vec& x) {
    Vec u(n);
    for (int a = 0; a < n; ++a) u[a] = a % 2 == 0 ? std::sin(3 * x[a] + 1) : std::cos(2 * x[a]);
    return Vec(x + amp * u);
  });
}

SampledMap ot_map(const GridSpec& g, double p, DensitySpec target, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = GeneratorSpec::ot_grid;
  s.target = std::move(target);
  s.seed = seed;
  return make_generator_map(s, CostFunction::isotropic(g.dim(), p), g);
}

}  // namespace

TEST_CASE("delta integral examples", "[estimates]") {
  const GridSpec g = square_grid(2, -1, 1, 64);
  const BallSpec ball{v2(0, 0), 1.0, 0.5};
  const auto id = sample_map(g, [](const Vec& x) { return x; });
  CHECK(delta_integral(id, AffineFrame::identity(2), ball, 2) == 0.0);
  // u = c constant: |c| |B_1|.
  const auto shifted = sample_map(g, [](const Vec& x) { return Vec(x + v2(0.3, 0.4)); });
  CHECK(delta_integral(shifted, AffineFrame::identity(2), ball, 2) == Approx(0.5 * pi).epsilon(0.03));
  // u = x: int_{B_1} |x| dx = 2 pi / 3.
  CHECK(delta_integral(id, AffineFrame::zero(2), ball, 2) == Approx(2 * pi / 3).epsilon(0.02));
  const GridSpec coarse = square_grid(2, -1, 1, 4);
  CHECK_THROWS_AS(delta_integral(sample_map(coarse, [](const Vec& x) { return x; }), AffineFrame::zero(2),
                                 BallSpec{v2(0, 0), 0.5, 0.5}, 2),
                  resolution_error);
  CHECK_THROWS_AS(delta_integral(id, AffineFrame::zero(2), BallSpec{v2(0.5, 0), 1.0, 0.5}, 2), input_error);
  CHECK_THROWS_AS(delta_integral(id, AffineFrame::zero(2), BallSpec{v2(0, 0), 0.5, 1.0}, 2), input_error);
}

TEST_CASE("profile quantities", "[estimates]") {
  CHECK(h_profile(0, 2, 1.5, 2, 3) == Approx(1.5 * 4));
  CHECK(h_profile(1.0 / 3, 1, 1, 3, 2) == Approx(4.0 / 3));
  CHECK_THROWS_AS(h_profile(1, 0, 1, 2, 2), domain_error);
  CHECK(r_star(1.0 / 3, 3, 2) == Approx(1));
  CHECK(r_star(0, 3, 2) == 0.0);
  CHECK(r_star(1, 2, 3) == Approx(1));
  CHECK(delta_threshold(2, 0.5, 2, 2) == Approx(1.0 / 16));
  CHECK(delta_threshold(4, 0.5, 3, 2) == Approx(1.0 / 3));
  CHECK(delta_threshold(2, 1 - 1e-9, 2, 2) < 1e-20);
  CHECK_THROWS_AS(delta_threshold(2, 0, 2, 2), domain_error);
}

TEST_CASE("r_star minimizes the profile", "[estimates][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> E(-6, 2);
  for (int n : {2, 3, 4})
    for (double p : {2.0, 2.5, 3.0, 4.0})
      for (int k = 0; k < 10; ++k) {
        const double delta = std::pow(10.0, E(rng));
        const double r0 = r_star(delta, n, p), H0 = h_profile(delta, r0, 1.0, n, p);
        const double e = 1e-4 * r0;
        CHECK(h_profile(delta, r0 - e, 1.0, n, p) > H0);
        CHECK(h_profile(delta, r0 + e, 1.0, n, p) > H0);
        for (int i = 0; i < 100; ++i) {
          const double r = r0 * std::pow(10.0, -1.0 + 2.0 * i / 99);
          CHECK(h_profile(delta, r, 1.0, n, p) >= H0 * (1 - 1e-14));
        }
      }
}

TEST_CASE("linfty bound degenerate cases", "[estimates]") {
  const GridSpec g = square_grid(2, -1, 1, 33);
  const BallSpec ball{v2(0, 0), 0.8, 0.5};
  const auto id = sample_map(g, [](const Vec& x) { return x; });
  const auto r = linfty_bound(id, AffineFrame::identity(2), ball, 2, 1.0);
  CHECK(r.delta == 0.0);
  CHECK(r.bound == 0.0);
  CHECK(r.empirical_sup == 0.0);
  CHECK(r.branch == Branch::small);
  const auto lin = sample_map(g, [](const Vec& x) { return Vec(2 * x + v2(1, -1)); });
  AffineFrame f{2 * Mat::Identity(2, 2), v2(1, -1)};
  CHECK(linfty_bound(lin, f, ball, 3, 1.0).bound <= 1e-13);
  CHECK(f.operator_norm() == Approx(2));
  CHECK_THROWS_AS(linfty_bound(id, AffineFrame::identity(2), ball, 2, 0.0), input_error);
  // The fitted frame recovers an affine map.
  const AffineFrame fit = fit_affine_frame(lin, v2(0, 0), 0.8);
  CHECK((fit.A - f.A).norm() <= 1e-12);
  CHECK((fit.b - f.b).norm() <= 1e-12);
}

TEST_CASE("branch selection matches the r_star split", "[estimates][property]") {
  for (int n : {2, 3})
    for (double p : {2.0, 3.0})
      for (double amp : {1e-6, 1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0}) {
        const auto m = perturbed_identity(n, n == 2 ? 41 : 17, amp);
        for (double beta : {0.25, 0.5, 0.75}) {
          const BallSpec ball{Vec::Zero(n), 0.9, beta};
          const auto r = linfty_bound(m, AffineFrame::identity(n), ball, p, 1.0);
          const double split = 0.5 * (1 - beta) * ball.radius;
          if (r.branch == Branch::small)
            CHECK(r.r_star <= split * (1 + 1e-12));
          else
            CHECK(r.r_star >= split * (1 - 1e-12));
          CHECK((r.branch == Branch::small) == (r.delta <= r.delta0 * (1 + 1e-12)));
        }
      }
}

TEST_CASE("bound is monotone in the data", "[estimates][property]") {
  const auto m = perturbed_identity(2, 41, 1.0);
  const BallSpec ball{v2(0, 0), 0.9, 0.5};
  for (double p : {2.0, 3.0}) {
    double prev = 0;
    for (double eps : {1e-5, 1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0}) {
      SampledMap me = m;
      for (std::size_t i = 0; i < m.size(); ++i) me.values[i] = m.points[i] + eps * (m.values[i] - m.points[i]);
      const double b = linfty_bound(me, AffineFrame::identity(2), ball, p, 1.0).bound;
      CHECK(b >= prev);
      prev = b;
    }
  }
}

TEST_CASE("scaling exponent probe", "[estimates]") {
  const std::vector<double> eps{1, 2, 4, 7, 10};
  for (auto [n, p] : {std::pair{2, 2.0}, {2, 3.0}, {3, 2.0}, {3, 3.0}}) {
    const BallSpec ball{Vec::Zero(n), 0.9, 0.5};
    const auto small = scaling_exponent_probe(perturbed_identity(n, n == 2 ? 41 : 17, 1e-6), AffineFrame::identity(n),
                                              ball, p, eps);
    CHECK(small.branch == Branch::small);
    const double expected = (p - 1) / (n + p - 1);
    CHECK(small.slope == Approx(expected).margin(0.1 * expected));
    const auto large = scaling_exponent_probe(perturbed_identity(n, n == 2 ? 41 : 17, 10.0), AffineFrame::identity(n),
                                              ball, p, eps);
    CHECK(large.branch == Branch::large);
    CHECK(large.slope == Approx(1).margin(0.05));
  }
  const BallSpec ball{v2(0, 0), 0.9, 0.5};
  const auto m = perturbed_identity(2, 41, 1e-3);
  CHECK_THROWS_AS(scaling_exponent_probe(m, AffineFrame::identity(2), ball, 2, {1, 2, 3}), probe_invalid);
  CHECK_THROWS_AS(scaling_exponent_probe(m, AffineFrame::identity(2), ball, 2, {1, 2, 3, 4}), probe_invalid);
  // A family straddling the branch split is rejected.
  CHECK_THROWS_AS(scaling_exponent_probe(m, AffineFrame::identity(2), ball, 2, {1e-2, 1, 1e2, 1e4}), probe_invalid);
}

TEST_CASE("pointwise G lower bound", "[estimates]") {
  // p = 2: G(w + r w_hat, w, u) = 2 r |u| exactly and C_2 = 1/2, lambda = 2.
  const auto c2 = CostFunction::isotropic(2, 2);
  const auto e2 = ellipticity_bounds(c2, 64);
  const GridSpec g = square_grid(2, -1, 1, 9);
  const auto m = sample_map(g, [](const Vec& x) { return Vec(1.5 * x + v2(0.2, 0)); });
  const auto chk = g_lower_bound_check(c2, m, AffineFrame::identity(2), 20, 0.25, e2);
  const Vec u = 0.5 * m.points[20] + v2(0.2, 0);
  CHECK(chk.lhs == Approx(2 * 0.25 * u.squaredNorm()));
  CHECK(chk.rhs == Approx(0.25 * 2 * 0.5 * u.squaredNorm()));
  CHECK(chk.pass);
  // u = 0 at a node: skipped.
  const auto id = sample_map(g, [](const Vec& x) { return x; });
  CHECK(g_lower_bound_check(c2, id, AffineFrame::identity(2), 3, 0.25, e2).skipped);
  // Shrinking u sends both sides to zero.
  const auto c3 = CostFunction::isotropic(2, 3);
  const auto e3 = ellipticity_bounds(c3, 64);
  for (double amp : {1e-2, 1e-4, 1e-6}) {
    const auto mm = perturbed_identity(2, 9, amp);
    const auto r = g_lower_bound_check(c3, mm, AffineFrame::identity(2), 40, 0.25, e3);
    CHECK(r.pass);
    CHECK(std::abs(r.lhs) <= 10 * amp * amp);
    CHECK(r.rhs <= 10 * amp * amp);
  }
  CHECK_THROWS_AS(g_lower_bound_check(c3, m, AffineFrame::identity(2), 0, 0.9, e3), input_error);
}

TEST_CASE("pointwise G lower bound across OT maps", "[estimates][property]") {
  const GridSpec g = square_grid(2, -1, 1, 12);
  std::mt19937_64 rng(12);
  for (double p : {2.0, 3.0}) {
    const auto c = CostFunction::isotropic(2, p);
    const auto e = ellipticity_bounds(c, 256);
    const double delta = j_lower_constant(p).delta0 / 2;
    std::size_t checked = 0, fails = 0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto m = ot_map(g, p, DensitySpec{DensitySpec::gaussian, v2(0.2, -0.1), 0.4}, seed);
      const AffineFrame frames[] = {AffineFrame::zero(2), fit_affine_frame(m, v2(0, 0), 1.0)};
      std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
      for (int k = 0; k < 25; ++k)
        for (const auto& f : frames) {
          const auto r = g_lower_bound_check(c, m, f, pick(rng), delta, e);
          if (r.skipped) continue;
          ++checked;
          fails += !r.pass;
        }
    }
    CHECK(checked >= 200);
    CHECK(fails == 0);
  }
}

TEST_CASE("calibration fits the smallest covering constant", "[estimates]") {
  const GridSpec g = square_grid(2, -1, 1, 14);
  const BallSpec ball{v2(0, 0), 0.9, 0.5};
  for (double p : {2.0, 3.0}) {
    std::vector<SampledMap> train;
    for (std::uint64_t s = 1; s <= 3; ++s)
      train.push_back(ot_map(g, p, DensitySpec{DensitySpec::gaussian, v2(0, 0), 0.4 + 0.1 * s}, s));
    std::vector<CalibrationCase> cases;
    for (const auto& m : train) cases.push_back({&m, fit_affine_frame(m, ball.center, ball.radius), ball});
    const double C = calibrate_constant(cases, p);
    CHECK(C > 0);
    double tightest = 0;
    for (const auto& cs : cases) {
      const auto r = linfty_bound(*cs.map, cs.frame, cs.ball, p, C);
      CHECK(r.empirical_sup <= r.bound * (1 + 1e-12));
      tightest = std::max(tightest, r.empirical_sup / r.bound);
    }
    CHECK(tightest == Approx(1).epsilon(1e-12));
    // Any smaller constant fails on some training map.
    bool fails = false;
    for (const auto& cs : cases)
      fails |= linfty_bound(*cs.map, cs.frame, cs.ball, p, 0.99 * C).empirical_sup >
               linfty_bound(*cs.map, cs.frame, cs.ball, p, 0.99 * C).bound;
    CHECK(fails);
  }
  const auto id = sample_map(g, [](const Vec& x) { return x; });
  CHECK_THROWS_AS(calibrate_constant({{&id, AffineFrame::identity(2), ball}}, 2), input_error);
}

TEST_CASE("mean-value identity with the Newtonian kernel", "[estimates]") {
  Vec y(3);
  y << 0.1, -0.2, 0.3;
  const QuadratureSpec q{};
  auto cst = [](const Vec&) { return 2.5; };
  auto zero = [](const Vec&) { return 0.0; };
  auto lin = [](const Vec& x) { return 1.0 + 2 * x[0] - x[1] + 0.5 * x[2]; };
  for (double r : {0.5, 1.0}) {
    CHECK(green_identity_residual(cst, zero, y, r, 3, q) <= 1e-9);
    CHECK(green_identity_residual(lin, zero, y, r, 3, q) <= 1e-9);
    auto sq = [&](const Vec& x) { return (x - y).squaredNorm(); };
    auto lap = [](const Vec&) { return 6.0; };
    const auto t = green_identity_terms(sq, lap, y, r, 3, q.nodes_1d);
    CHECK(t.value == 0.0);
    CHECK(t.average == Approx(0.6 * r * r).epsilon(1e-10));
    CHECK(t.correction == Approx(-0.6 * r * r).epsilon(1e-10));
    CHECK(t.residual <= 1e-3 * r * r);
  }
  Vec y4 = Vec::Constant(4, 0.1);
  auto sq4 = [&](const Vec& x) { return (x - y4).squaredNorm(); };
  CHECK(green_identity_residual(sq4, [](const Vec&) { return 8.0; }, y4, 0.7, 4, q) <= 1e-9);
  CHECK_THROWS_AS(green_identity_residual(cst, zero, v2(0, 0), 1.0, 2, q), unsupported_dimension);
}

TEST_CASE("mean-value identity residual converges under refinement", "[estimates][property]") {
  Vec y(3);
  y << 0.1, -0.2, 0.3;
  auto v = [](const Vec& x) { return std::exp(x[0]) * std::cos(0.5 * x[1]) + std::pow(x[2], 4); };
  auto lap = [](const Vec& x) { return 0.75 * std::exp(x[0]) * std::cos(0.5 * x[1]) + 12 * x[2] * x[2]; };
  for (int m : {4, 6}) {
    const double coarse = green_identity_terms(v, lap, y, 1.0, 3, m).residual;
    const double fine = green_identity_terms(v, lap, y, 1.0, 3, 2 * m).residual;
    CHECK(coarse > 1e-10);
    CHECK(fine * 2.5 <= coarse);
  }
}
