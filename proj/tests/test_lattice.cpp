// Tests for the permutohedral-lattice Gaussian filter: frozen reference
// values, agreement with the exact brute-force transform, operator
// invariants (linearity, symmetry, mass conservation), determinism, and
// input validation.

#include "catch_amalgamated.hpp"
#include "coloc/lattice.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace {

using coloc::PermutohedralLattice;
using coloc::brute_force_filter;

std::vector<double> uniform_cloud(std::uint64_t seed, std::size_t n, int d,
                                  double lo, double hi) {
  std::mt19937_64 gen(seed);
  std::vector<double> out(n * static_cast<std::size_t>(d));
  for (double& x : out)
    x = lo + (hi - lo) * ((gen() >> 11) * 0x1.0p-53);
  return out;
}

std::vector<double> uniform_values(std::uint64_t seed, std::size_t n,
                                   double lo, double hi) {
  return uniform_cloud(seed, n, 1, lo, hi);
}

double sup_relative_error(const std::vector<double>& approx,
                          const std::vector<double>& exact) {
  double sup = 0.0, cap = 0.0;
  for (double e : exact) cap = std::max(cap, std::abs(e));
  for (std::size_t i = 0; i < approx.size(); ++i)
    sup = std::max(sup, std::abs(approx[i] - exact[i]));
  return sup / cap;
}

}  // namespace

TEST_CASE("single point filtering is the identity") {
  std::vector<double> features{3.7, -1.2};
  std::vector<double> values{2.5};
  PermutohedralLattice lat(features, 2);
  REQUIRE(lat.point_count() == 1);
  REQUIRE(lat.dimension() == 2);

  auto out = lat.filter(values, 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == Catch::Approx(2.5).margin(1e-12));

  // d+1 simplex corners with convex barycentric weights.
  double wsum = 0.0;
  for (int r = 0; r <= 2; ++r) {
    double w = lat.barycentric(0, r);
    CHECK(w >= -1e-12);
    CHECK(w <= 1.0 + 1e-12);
    CHECK(lat.vertex_index(0, r) < lat.vertex_count());
    wsum += w;
  }
  CHECK(wsum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("distant points do not interact") {
  std::vector<double> features{0.0, 20.0};
  std::vector<double> values{1.0, 0.0};
  PermutohedralLattice lat(features, 1);
  auto out = lat.filter(values, 1);
  CHECK(out[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(out[1] == Catch::Approx(0.0).margin(1e-9));

  auto norm = lat.filter_normalized(values, 1);
  CHECK(norm[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(norm[1] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("bit-identical features couple with weight exactly one") {
  std::vector<double> features{1.25, -0.5, 1.25, -0.5};
  std::vector<double> values{1.0, 0.0};
  PermutohedralLattice lat(features, 2);
  auto out = lat.filter(values, 1);
  CHECK(out[0] == Catch::Approx(1.0).margin(1e-9));
  CHECK(out[1] == Catch::Approx(1.0).margin(1e-9));

  // Identical inputs land on the same simplex with the same weights.
  for (int r = 0; r <= 2; ++r) {
    CHECK(lat.vertex_index(0, r) == lat.vertex_index(1, r));
    CHECK(lat.barycentric(0, r) == lat.barycentric(1, r));
  }
}

TEST_CASE("brute force transform of two points at distance sqrt(2)") {
  std::vector<double> features{0.0, 0.0, 1.0, 1.0};
  std::vector<double> values{1.0, 0.0};
  auto out = brute_force_filter(features, 2, values, 1);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(out[1] == Catch::Approx(std::exp(-1.0)).margin(1e-12));
  CHECK(out[1] == Catch::Approx(0.3679).margin(5e-5));
}

TEST_CASE("fast filter matches brute force on random clouds") {
  struct Case {
    int d;
    std::size_t n;
    std::uint64_t seed;
  };
  for (const Case& c : {Case{2, 700, 11}, Case{3, 500, 22}, Case{5, 800, 33}}) {
    INFO("dimension " << c.d << ", " << c.n << " points");
    auto features = uniform_cloud(c.seed, c.n, c.d, 0.0, 3.0);
    auto values = uniform_values(c.seed + 1, c.n, 0.0, 1.0);
    PermutohedralLattice lat(features, c.d);
    auto fast = lat.filter(values, 1);
    auto exact = brute_force_filter(features, c.d, values, 1);
    CHECK(sup_relative_error(fast, exact) < 0.05);
  }
}

TEST_CASE("normalized filter matches brute force ratios") {
  const int d = 3;
  const std::size_t n = 400;
  auto features = uniform_cloud(44, n, d, 0.0, 3.0);
  auto values = uniform_values(45, n, 0.0, 1.0);
  PermutohedralLattice lat(features, d);
  auto fast = lat.filter_normalized(values, 1);

  auto num = brute_force_filter(features, d, values, 1);
  std::vector<double> ones(n, 1.0);
  auto den = brute_force_filter(features, d, ones, 1);
  std::vector<double> exact(n);
  for (std::size_t i = 0; i < n; ++i) exact[i] = num[i] / den[i];
  CHECK(sup_relative_error(fast, exact) < 0.05);
}

TEST_CASE("filtering is linear") {
  const int d = 3;
  const std::size_t n = 300;
  auto features = uniform_cloud(55, n, d, 0.0, 3.0);
  auto u = uniform_values(56, n, -1.0, 1.0);
  auto v = uniform_values(57, n, 0.0, 1.0);
  PermutohedralLattice lat(features, d);
  auto fu = lat.filter(u, 1);
  auto fv = lat.filter(v, 1);

  std::vector<double> combo(n);
  for (std::size_t i = 0; i < n; ++i) combo[i] = 2.5 * u[i] - 1.25 * v[i];
  auto fc = lat.filter(combo, 1);

  double scale = 0.0;
  for (double x : fc) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < n; ++i)
    CHECK(std::abs(fc[i] - (2.5 * fu[i] - 1.25 * fv[i])) <= 1e-10 * scale);
}

TEST_CASE("implied kernel is symmetric") {
  for (int d : {2, 5}) {
    INFO("dimension " << d);
    const std::size_t n = 400;
    auto features = uniform_cloud(66 + d, n, d, 0.0, 3.0);
    auto u = uniform_values(67, n, -1.0, 1.0);
    auto v = uniform_values(68, n, 0.0, 1.0);
    PermutohedralLattice lat(features, d);
    auto fu = lat.filter(u, 1);
    auto fv = lat.filter(v, 1);
    double uv = 0.0, vu = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      uv += u[i] * fv[i];
      vu += fu[i] * v[i];
      scale += std::abs(u[i] * fv[i]);
    }
    CHECK(std::abs(uv - vu) <= 1e-9 * scale);
  }
}

TEST_CASE("filtering all ones conserves at least the self weight") {
  // Dense cloud: every output is at least 1.
  const std::size_t n = 500;
  auto features = uniform_cloud(77, n, 3, 0.0, 3.0);
  std::vector<double> ones(n, 1.0);
  PermutohedralLattice lat(features, 3);
  auto out = lat.filter(ones, 1);
  for (double x : out) CHECK(x >= 1.0 - 1e-12);

  // Isolated points: the output is exactly the self weight.
  std::vector<double> far{0.0, 0.0, 40.0, 0.0, 0.0, 40.0};
  std::vector<double> ones3(3, 1.0);
  PermutohedralLattice lat3(far, 2);
  auto iso = lat3.filter(ones3, 1);
  for (double x : iso) {
    CHECK(x >= 1.0 - 1e-12);
    CHECK(x <= 1.0 + 1e-9);
  }
}

TEST_CASE("barycentric weights are convex for every point") {
  const int d = 3;
  const std::size_t n = 200;
  auto features = uniform_cloud(88, n, d, -2.0, 2.0);
  PermutohedralLattice lat(features, d);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int r = 0; r <= d; ++r) {
      double w = lat.barycentric(i, r);
      CHECK(w >= -1e-12);
      CHECK(w <= 1.0 + 1e-12);
      CHECK(lat.vertex_index(i, r) < lat.vertex_count());
      sum += w;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("filtering is deterministic, reusable, and thread-invariant") {
  const int d = 3;
  const std::size_t n = 300;
  auto features = uniform_cloud(99, n, d, 0.0, 3.0);
  std::vector<double> values(n * 3);
  auto flat = uniform_values(100, n * 3, -1.0, 1.0);
  values = flat;

  PermutohedralLattice a(features, d);
  PermutohedralLattice b(features, d);
  auto out1 = a.filter(values, 3, 1);
  auto out2 = a.filter(values, 3, 1);   // reuse of the same object
  auto out3 = b.filter(values, 3, 1);   // independent identical build
  auto out4 = a.filter(values, 3, 4);   // channel-parallel
  REQUIRE(out1.size() == values.size());
  for (std::size_t i = 0; i < out1.size(); ++i) {
    CHECK(out1[i] == out2[i]);
    CHECK(out1[i] == out3[i]);
    CHECK(out1[i] == out4[i]);
  }
}

TEST_CASE("default blur radius adapts to dimension") {
  std::vector<double> f2{0.1, 0.2};
  CHECK(PermutohedralLattice(f2, 2).radius() == 3);
  std::vector<double> f5{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(PermutohedralLattice(f5, 5).radius() == 2);
  std::vector<double> f8(8, 0.25);
  CHECK(PermutohedralLattice(f8, 8).radius() == 1);
}

TEST_CASE("lattice constructor validates its inputs") {
  std::vector<double> ok{1.0, 2.0};
  CHECK_THROWS_AS(PermutohedralLattice(ok, 0), std::invalid_argument);
  CHECK_THROWS_AS(PermutohedralLattice(ok, -3), std::invalid_argument);
  CHECK_THROWS_AS(PermutohedralLattice(std::vector<double>{}, 2),
                  std::invalid_argument);
  std::vector<double> ragged{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(PermutohedralLattice(ragged, 2), std::invalid_argument);
  std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(PermutohedralLattice(inf, 2), std::invalid_argument);
  std::vector<double> nan{std::numeric_limits<double>::quiet_NaN(), 0.0};
  CHECK_THROWS_AS(PermutohedralLattice(nan, 1), std::invalid_argument);
  CHECK_THROWS_AS(PermutohedralLattice(ok, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(PermutohedralLattice(ok, 2, -1), std::invalid_argument);

  // Unsupported (dimension, radius) combinations fail fast instead of
  // exhausting memory on vertex growth.
  std::vector<double> f6(6, 0.5);
  CHECK_THROWS_AS(PermutohedralLattice(f6, 6, 3), std::invalid_argument);
  std::vector<double> f8(8, 0.5);
  CHECK_THROWS_AS(PermutohedralLattice(f8, 8, 2), std::invalid_argument);
  std::vector<double> f9(9, 0.5);
  CHECK_THROWS_AS(PermutohedralLattice(f9, 9), std::invalid_argument);
}

TEST_CASE("filter validates values, channels, and threads") {
  std::vector<double> features{0.0, 1.0, 2.0};
  PermutohedralLattice lat(features, 1);
  std::vector<double> three(3, 1.0);
  std::vector<double> four(4, 1.0);
  CHECK_THROWS_AS(lat.filter(four, 1), std::invalid_argument);
  CHECK_THROWS_AS(lat.filter(three, 0), std::invalid_argument);
  CHECK_THROWS_AS(lat.filter(three, 2), std::invalid_argument);
  CHECK_THROWS_AS(lat.filter(three, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(lat.vertex_index(3, 0), std::out_of_range);
  CHECK_THROWS_AS(lat.barycentric(0, 2), std::out_of_range);
}

TEST_CASE("brute force filter rejects oversized and malformed inputs") {
  std::vector<double> big(20001, 0.0);
  std::vector<double> vals(20001, 1.0);
  CHECK_THROWS_AS(brute_force_filter(big, 1, vals, 1), std::length_error);

  std::vector<double> f{1.0, 2.0, 3.0};
  std::vector<double> v{1.0};
  CHECK_THROWS_AS(brute_force_filter(f, 2, v, 1), std::invalid_argument);
  std::vector<double> f2{1.0, 2.0};
  CHECK_THROWS_AS(brute_force_filter(f2, 2, v, 0), std::invalid_argument);
  std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(brute_force_filter(f2, 2, wrong, 1), std::invalid_argument);
}
