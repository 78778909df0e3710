#include <catch_amalgamated.hpp>

#include <hmono/quadrature.hpp>
#include <hmono/sampled_map.hpp>

using namespace hmono;
using Catch::Approx;

TEST_CASE("Gauss-Legendre basics", "[quadrature]") {
  CHECK(gauss_legendre_unit_square([](double, double) { return 1.0; }, 8) == Approx(1).epsilon(1e-15));
  CHECK(gauss_legendre_unit_square([](double s, double t) { return s * t; }, 8) == Approx(0.25).epsilon(1e-15));
  // Exact up to degree 2n-1 per axis.
  for (int n : {2, 5, 16}) {
    const int d = 2 * n - 1;
    const double v = gauss_legendre_unit_square([&](double s, double t) { return std::pow(s, d) * std::pow(t, d); }, n);
    CHECK(v == Approx(1.0 / ((d + 1.0) * (d + 1.0))).epsilon(1e-13));
  }
  const Rule1D& r = gauss_legendre(33);
  double sw = 0;
  for (double w : r.w) sw += w;
  CHECK(sw == Approx(1).epsilon(1e-14));
}

TEST_CASE("kinked integrand against a midpoint oracle", "[quadrature]") {
  auto f = [](double s, double t) { return std::abs(0.3 - (t - 0.2 * s)); };
  // 10^6-node midpoint oracle.
  double mid = 0;
  const int m = 1000;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) mid += f((i + 0.5) / m, (j + 0.5) / m);
  mid /= double(m) * m;
  // Kink along t - 0.2 s = 0.3, i.e. -0.2 s + t = 0.3.
  const double split = integrate_unit_square(f, 64, SingularLocus::along_line(-0.2, 1.0, 0.3));
  CHECK(std::abs(split - mid) <= 1e-6);
  CHECK(split == Approx(79.0 / 300.0).epsilon(1e-13));
  // The plain tensor rule sees the kink; it converges only algebraically.
  const double plain = gauss_legendre_unit_square(f, 64);
  CHECK(std::abs(plain - 79.0 / 300.0) > 1e-7);
}

TEST_CASE("Gauss-Legendre convergence on smooth integrands", "[quadrature][property]") {
  auto f = [](double s, double t) { return std::exp(s * t) * std::cos(3 * s + t); };
  const double ref = gauss_legendre_unit_square(f, 40);
  for (int n : {2, 3, 4, 5}) {
    const double e1 = std::abs(gauss_legendre_unit_square(f, n) - ref);
    const double e2 = std::abs(gauss_legendre_unit_square(f, 2 * n) - ref);
    CHECK(e2 * 10 <= e1);
  }
}

TEST_CASE("point and line loci integrate algebraic singularities", "[quadrature]") {
  // |(s,t) - (0.3,0.6)|^{0.5}: reference by the same rule at double nodes.
  auto f = [](double s, double t) { return std::pow(std::hypot(s - 0.3, t - 0.6), 0.5); };
  const auto L = SingularLocus::at_point(0.3, 0.6);
  CHECK(integrate_unit_square(f, 24, L) == Approx(integrate_unit_square(f, 96, L)).epsilon(1e-8));
  // |s + t - 1|^{0.5} integrates to 2 * int_0^1 u * u^{0.5} du / ... exactly 2/5 * 2 / 2.
  auto g = [](double s, double t) { return std::sqrt(std::abs(s + t - 1.0)); };
  // Exact value: int over the square of |s+t-1|^{1/2} = 2 * int_0^1 (1-u) u^{1/2} du = 2*(2/3-2/5) = 8/15.
  CHECK(integrate_unit_square(g, 32, SingularLocus::along_line(1, 1, 1)) == Approx(8.0 / 15.0).epsilon(1e-11));
  // Triangle rule reproduces areas.
  CHECK(integrate_triangle([](double, double) { return 1.0; }, {0, 0}, {1, 0}, {0, 1}, 4) == Approx(0.5).epsilon(1e-14));
}

TEST_CASE("affine locus detection", "[quadrature]") {
  Vec z0(2), za(2), zb(2);
  z0 << -0.3, -0.6;
  za << 1, 0;
  zb << 0, 1;
  auto L = affine_locus(z0, za, zb);
  REQUIRE(L.kind == SingularLocus::point);
  CHECK(L.at[0] == Approx(0.3));
  CHECK(L.at[1] == Approx(0.6));
  za << 1, 0;
  zb << 1, 0;
  z0 << -1, 0;
  L = affine_locus(z0, za, zb);
  REQUIRE(L.kind == SingularLocus::line);
  // s + t = 1
  CHECK(L.b / L.a == Approx(1.0));
  CHECK(L.c / L.a == Approx(1.0));
  CHECK(affine_locus(z0, Vec::Zero(2), Vec::Zero(2)).kind == SingularLocus::none);
}

TEST_CASE("fundamental solution examples", "[quadrature]") {
  CHECK(fundamental_solution(Vec::Unit(3, 0), 3) == Approx(-1.0 / (4 * pi)).epsilon(1e-14));
  CHECK(fundamental_solution(2 * Vec::Unit(3, 1), 3) == Approx(-1.0 / (8 * pi)).epsilon(1e-14));
  CHECK(fundamental_solution(Vec::Unit(4, 2), 4) == Approx(-1.0 / (4 * pi * pi)).epsilon(1e-14));
  CHECK_THROWS_AS(fundamental_solution(Vec::Zero(3), 3), singularity_error);
  CHECK_THROWS_AS(fundamental_solution(Vec::Unit(2, 0), 2), unsupported_dimension);
}

TEST_CASE("radial moment of the Newtonian kernel", "[quadrature]") {
  auto one = [](double) { return 1.0; };
  CHECK(radial_gamma_moment(1.0, 3, one) == Approx(-1.0 / 6.0).epsilon(1e-13));
  CHECK(radial_gamma_moment(2.0, 4, one) == Approx(-0.5).epsilon(1e-13));
  CHECK(radial_gamma_moment(1e-9, 3, one) == Approx(0.0).margin(1e-17));
  for (int n : {3, 4, 5})
    for (double rho : {0.5, 1.0, 2.0}) CHECK(std::abs(radial_gamma_moment(rho, n, one) + rho * rho / (2 * n)) <= 1e-9);
  // A non-constant radial profile against a direct 3-D Monte-Carlo-free reduction:
  // g(s) = s^2 in n=3: 4 pi int_0^1 s^2 (-(1/s - 1)/(4 pi)) s^2 ds = -(1/4 - 1/5).
  CHECK(radial_gamma_moment(1.0, 3, [](double s) { return s * s; }) == Approx(-0.05).epsilon(1e-13));
}

TEST_CASE("ball quadrature volumes", "[quadrature]") {
  for (int n : {2, 3}) {
    const double r = 0.7;
    const auto B = ball_polar_rule(Vec::Zero(n), r, 64, 64);
    CHECK(std::abs(B.volume() / (unit_ball_volume(n) * std::pow(r, n)) - 1) <= 0.01);
    for (double w : B.weights) CHECK(w >= 0);
  }
  // Grid-membership rule at default resolution.
  const GridSpec g = square_grid(2, -1, 1, 129);
  const auto G = grid_ball(g, Vec::Zero(2), 0.8);
  CHECK(std::abs(G.volume() / (pi * 0.64) - 1) <= 0.01);
  CHECK(unit_ball_volume(3) == Approx(4 * pi / 3));
  CHECK(unit_ball_volume(4) == Approx(pi * pi / 2));
  std::vector<Vec> dirs;
  std::vector<double> w;
  sphere_rule(4, 24, dirs, w);
  double area = 0;
  for (double x : w) area += x;
  CHECK(area == Approx(sphere_area(4)).epsilon(1e-10));
}
