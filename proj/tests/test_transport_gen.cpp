#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include <hmono/transport_gen.hpp>

using namespace hmono;
using Catch::Approx;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::vector<Vec> random_points(std::mt19937_64& rng, int N, int n) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<Vec> out(N, Vec(n));
  for (Vec& v : out)
    for (int a = 0; a < n; ++a) v[a] = U(rng);
  return out;
}

double brute_force_min(const CostFunction& c, const std::vector<Vec>& s, const std::vector<Vec>& t) {
  std::vector<int> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do best = std::min(best, assignment_cost(c, s, t, perm));
  while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

bool is_bijection(std::vector<int> p) {
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] != static_cast<int>(i)) return false;
  return true;
}

}  // namespace

TEST_CASE("assignment examples", "[transport_gen]") {
  const auto c = CostFunction::isotropic(2, 2);
  const auto a = solve_discrete_ot(c, {v2(0, 0), v2(1, 0)}, {v2(0, 1), v2(1, 1)});
  CHECK(a.permutation == std::vector<int>{0, 1});
  CHECK(a.total_cost == Approx(2));
  CHECK(assignment_cost(c, a.sources, a.targets, {1, 0}) == Approx(4));

  const auto one = solve_discrete_ot(c, {v2(3, 1)}, {v2(-2, 0.5)});
  CHECK(one.permutation == std::vector<int>{0});
  CHECK(one.total_cost == Approx(25.25));

  std::mt19937_64 rng(3);
  for (double p : {2.0, 3.0, 4.5}) {
    const auto pts = random_points(rng, 40, 2);
    const auto same = solve_discrete_ot(CostFunction::isotropic(2, p), pts, pts);
    std::vector<int> id(40);
    std::iota(id.begin(), id.end(), 0);
    CHECK(same.permutation == id);
    CHECK(same.total_cost == 0.0);
  }
  CHECK_THROWS_AS(solve_discrete_ot(c, {v2(0, 0)}, {v2(0, 0), v2(1, 1)}), input_error);
  CHECK(solve_discrete_ot(c, {}, {}).permutation.empty());
}

TEST_CASE("assignment cap is enforced", "[transport_gen]") {
  const auto c = CostFunction::isotropic(2, 2);
  std::vector<Vec> pts(5, v2(0, 0));
  CHECK_THROWS_AS(solve_discrete_ot(c, pts, pts, 4), input_error);
  CHECK_NOTHROW(solve_discrete_ot(c, pts, pts, 5));
}

TEST_CASE("exactness against brute force", "[transport_gen][property]") {
  std::mt19937_64 rng(17);
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const auto c = CostFunction::isotropic(2, p);
    for (int N = 1; N <= 8; ++N) {
      for (int rep = 0; rep < (N <= 6 ? 5 : 2); ++rep) {
        const auto s = random_points(rng, N, 2), t = random_points(rng, N, 2);
        const auto a = solve_discrete_ot(c, s, t);
        CHECK(is_bijection(a.permutation));
        CHECK(a.total_cost == Approx(brute_force_min(c, s, t)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("optimal assignments are 2-cycle optimal and monotone", "[transport_gen][property]") {
  std::mt19937_64 rng(23);
  for (double p : {2.0, 3.0, 4.0}) {
    const auto c = CostFunction::isotropic(2, p);
    for (int N : {16, 64, 200}) {
      const auto s = random_points(rng, N, 2), t = random_points(rng, N, 2);
      const auto a = solve_discrete_ot(c, s, t);
      REQUIRE(is_bijection(a.permutation));
      std::vector<Vec> img(N);
      for (int i = 0; i < N; ++i) img[i] = t[a.permutation[i]];
      const auto r = check_pairs_monotone(c, s, img, std::size_t(N) * N, 1);
      CHECK(r.pairs_tested == std::size_t(N) * (N - 1) / 2);
      CHECK(r.violations == 0);
      // Transposing any pair cannot lower the cost.
      const double tol = 1e-9 * (1 + a.total_cost);
      for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
          auto q = a.permutation;
          std::swap(q[i], q[j]);
          CHECK(assignment_cost(c, s, t, q) >= a.total_cost - tol);
        }
    }
  }
  // Anisotropic cost in three dimensions.
  Mat M(3, 3);
  M << 2, 0.3, 0, 0.3, 1, 0.1, 0, 0.1, 0.5;
  const auto c = CostFunction::anisotropic(M, 3);
  const auto s = random_points(rng, 120, 3), t = random_points(rng, 120, 3);
  const auto a = solve_discrete_ot(c, s, t);
  std::vector<Vec> img(120);
  for (int i = 0; i < 120; ++i) img[i] = t[a.permutation[i]];
  CHECK(check_pairs_monotone(c, s, img, 1000000, 1).violations == 0);
}

TEST_CASE("defect depends only on matching-side differences", "[transport_gen][property]") {
  std::mt19937_64 rng(29);
  for (double p : {2.0, 2.5, 3.0, 4.0}) {
    const auto c = CostFunction::isotropic(2, p);
    for (int k = 0; k < 200; ++k) {
      const auto q = random_points(rng, 4, 2);
      const Vec w = 3 * random_points(rng, 1, 2)[0];
      const double d0 = pair_defect(c, q[0], q[1], q[2], q[3]);
      const double d1 = pair_defect(c, q[0] + w, q[1] + w, q[2] + w, q[3] + w);
      CHECK(d1 == Approx(d0).epsilon(1e-9).margin(1e-11));
    }
  }
}

TEST_CASE("density samples", "[transport_gen]") {
  const GridSpec g = square_grid(2, 0, 1, 16);
  DensitySpec u;
  const auto a = sample_density(u, g, 5), b = sample_density(u, g, 5), c = sample_density(u, g, 6);
  REQUIRE(a.size() == 256);
  CHECK((a[100] - b[100]).norm() == 0.0);
  CHECK((a[100] - c[100]).norm() > 0.0);
  DensitySpec gs{DensitySpec::gaussian, v2(0.5, 0.5), 0.1};
  for (const Vec& x : sample_density(gs, g, 1)) {
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
  // Stratification puts the sample mean close to the center.
  Vec mean = Vec::Zero(2);
  for (const Vec& x : sample_density(gs, g, 1)) mean += x / 256.0;
  CHECK((mean - v2(0.5, 0.5)).norm() < 0.02);
  DensitySpec bad{DensitySpec::two_bump, v2(0.2, 0.2), 0.1, v2(0.8, 0.8), 0.1, 1.5};
  CHECK_THROWS_AS(validate(bad), input_error);
  bad.weight = 0.3;
  const auto tb = sample_density(bad, g, 2);
  std::size_t near_first = 0;
  for (const Vec& x : tb) near_first += (x - v2(0.2, 0.2)).norm() < (x - v2(0.8, 0.8)).norm();
  CHECK(near_first == Approx(0.3 * 256).margin(8));
}

TEST_CASE("generator maps", "[transport_gen]") {
  const GridSpec g = square_grid(2, 0, 1, 8);
  const auto c3 = CostFunction::isotropic(2, 3), c2 = CostFunction::isotropic(2, 2);
  GeneratorSpec s;
  const auto id = make_generator_map(s, c3, g);
  CHECK(check_map_monotone(c3, id, 1000000, 1).violations == 0);
  s.kind = GeneratorSpec::translation;
  s.shift = v2(5, 0);
  const auto tr = make_generator_map(s, c2, g);
  CHECK(tr.values[10] == tr.points[10] + v2(5, 0));
  s.kind = GeneratorSpec::scaling;
  s.scale = 0.0;
  const auto zero = make_generator_map(s, c2, g);
  CHECK(zero.values[7].norm() == 0.0);
  s.scale = -1;
  CHECK_THROWS_AS(make_generator_map(s, c2, g), input_error);
  s.kind = GeneratorSpec::ot_grid;
  s.target = DensitySpec{DensitySpec::gaussian, v2(0.5, 0.5), 0.15};
  for (double p : {2.0, 3.0, 4.0}) {
    const auto cp = CostFunction::isotropic(2, p);
    const auto m = make_generator_map(s, cp, g);
    CHECK(check_map_monotone(cp, m, 1000000, 1).violations == 0);
  }
}

TEST_CASE("negative controls", "[transport_gen]") {
  const GridSpec g = square_grid(2, -1, 1, 5);
  const auto c2 = CostFunction::isotropic(2, 2);
  NegativeSpec ns;
  const auto refl = make_negative_map(ns, c2, g);
  const auto r = check_map_monotone(c2, refl, 1000000, 1);
  const double hmin = g.spacing(0);
  CHECK(r.worst_defect <= -2 * hmin * hmin);
  CHECK(check_map_monotone(CostFunction::isotropic(2, 3), make_negative_map(ns, CostFunction::isotropic(2, 3), g),
                           1000000, 1)
            .violations > 0);

  // N = 16 shuffled assignment: its swapped pair must violate, checked by
  // brute force over all pairs.
  const GridSpec g4 = square_grid(2, 0, 1, 4);
  ns.kind = NegativeSpec::shuffled_ot;
  ns.target = DensitySpec{DensitySpec::gaussian, v2(0.4, 0.6), 0.2};
  const auto sh = make_negative_map(ns, c2, g4);
  std::size_t viol = 0;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = i + 1; j < 16; ++j)
      viol += pair_defect(c2, sh.points[i], sh.points[j], sh.values[i], sh.values[j]) < -1e-9;
  CHECK(viol >= 1);
}
