#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "psdetect/grid_field.hpp"
#include "psdetect/matern.hpp"
#include "psdetect/random_field.hpp"
#include "test_helpers.hpp"

using namespace psdetect;

TEST_CASE("matern correlation is 1 at zero lag") {
  for (double nu : {0.5, 1.0, 1.5, 2.5})
    for (double range : {0.02, 0.2, 1.0}) {
      MaternParams p{nu, 1.0, range};
      CHECK(matern_correlation(0.0, p) == 1.0);
    }
}

TEST_CASE("practical-range calibration forces correlation 0.1 at the range") {
  for (double nu : {0.5, 1.0, 1.7, 3.0})
    for (double range : {0.02, 0.2, 1.0, 3.5}) {
      MaternParams p{nu, 1.3, range};
      CHECK(matern_correlation(range, p) == doctest::Approx(0.1).epsilon(1e-9));
    }
}

TEST_CASE("nu = 1/2 reduces to the exponential with scale range/ln 10") {
  MaternParams p{0.5, 1.0, 0.2};
  const double expected = std::exp(-0.1 * std::log(10.0) / 0.2);
  CHECK(matern_correlation(0.1, p) == doctest::Approx(expected).epsilon(1e-12));
  // spot-check a few more distances against the closed form
  for (double d : {0.01, 0.05, 0.3, 1.0})
    CHECK(matern_correlation(d, p) ==
          doctest::Approx(std::exp(-d * std::log(10.0) / 0.2)).epsilon(1e-12));
}

TEST_CASE("matern correlation rejects bad input") {
  MaternParams p{1.0, 1.0, 0.2};
  CHECK_THROWS_AS(matern_correlation(std::nan(""), p), error);
  CHECK_THROWS_AS(matern_correlation(-0.1, p), error);
  CHECK_THROWS_AS(matern_correlation(0.1, MaternParams{0.0, 1.0, 0.2}), error);
  CHECK_THROWS_AS(matern_correlation(0.1, MaternParams{1.0, -1.0, 0.2}), error);
  CHECK_THROWS_AS(matern_correlation(0.1, MaternParams{1.0, 1.0, 0.0}), error);
}

TEST_CASE("matern correlation decreases monotonically in distance") {
  for (double nu : {0.5, 1.0, 1.5, 2.5}) {
    for (double range : {0.02, 0.2, 1.0, 3.0}) {
      MaternParams p{nu, 1.0, range};
      double prev = 1.0;
      for (int i = 1; i <= 400; ++i) {
        const double d = i * 0.005;
        const double r = matern_correlation(d, p);
        CHECK(r <= prev + 1e-15);
        prev = r;
      }
    }
  }
}

TEST_CASE("fast shape table matches the exact evaluation") {
  for (double nu : {0.5, 1.0, 2.0}) {
    const MaternShape& shape = MaternShape::get(nu);
    double worst = 0.0;
    for (int i = 1; i < 30000; ++i) {
      const double x = i * 0.002;
      worst = std::max(worst, std::fabs(shape.fast(x) - shape.exact(x)));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("simulate_field is deterministic and scales linearly in sigma") {
  MaternParams p1{1.0, 1.0, 0.2};
  MaternParams p2{1.0, 2.0, 0.2};
  Rng a(7), b(7), c(7);
  const GridField f1 = simulate_field(p1, 12, a);
  const GridField f2 = simulate_field(p1, 12, b);
  const GridField f3 = simulate_field(p2, 12, c);
  for (std::size_t i = 0; i < f1.values().size(); ++i) {
    CHECK(f1.values()[i] == f2.values()[i]);
    CHECK(f3.values()[i] == 2.0 * f1.values()[i]);
  }
}

TEST_CASE("simulated field moments and covariance match the model") {
  MaternParams params{1.0, 1.0, 0.2};
  const int res = 10, n = res * res, reps = 10000;
  std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
  const int a = 1 * res + 1, b = 5 * res + 6;
  double cross = 0.0;
  Rng rng(42);
  for (int r = 0; r < reps; ++r) {
    const GridField f = simulate_field(params, res, rng);
    const auto& v = f.values();
    for (int i = 0; i < n; ++i) {
      sum[i] += v[i];
      sumsq[i] += v[i] * v[i];
    }
    cross += v[a] * v[b];
  }
  for (int i = 0; i < n; ++i) {
    const double mean = sum[i] / reps;
    const double var = sumsq[i] / reps - mean * mean;
    CHECK(std::fabs(mean) < 0.05);
    CHECK(std::fabs(var - 1.0) < 0.05);
  }
  const double h = 1.0 / (res - 1);
  const double d = std::hypot((a % res - b % res) * h, (a / res - b / res) * h);
  const double expected = matern_correlation(d, params);
  const double emp_cov = cross / reps - (sum[a] / reps) * (sum[b] / reps);
  // MC s.e. of a Gaussian covariance estimate
  const double se = std::sqrt((1.0 + expected * expected) / reps);
  CHECK(std::fabs(emp_cov - expected) < 3.0 * se);
  // a nearby pair with substantial correlation
  const int a2 = 4 * res + 4, b2 = 4 * res + 5;
  double cross2 = 0.0;
  Rng rng2(43);
  std::vector<double> s2a, s2b;
  double suma2 = 0, sumb2 = 0;
  for (int r = 0; r < reps; ++r) {
    const GridField f = simulate_field(params, res, rng2);
    suma2 += f.values()[a2];
    sumb2 += f.values()[b2];
    cross2 += f.values()[a2] * f.values()[b2];
  }
  const double d2 = h;
  const double expected2 = matern_correlation(d2, params);
  const double emp2 = cross2 / reps - (suma2 / reps) * (sumb2 / reps);
  const double se2 = std::sqrt((1.0 + expected2 * expected2) / reps);
  CHECK(std::fabs(emp2 - expected2) < 3.0 * se2);
}

TEST_CASE("simulate_field guards its resolution bounds") {
  MaternParams p{1.0, 1.0, 0.2};
  Rng rng(1);
  CHECK_THROWS_AS(simulate_field(p, 1, rng), error);
  CHECK_THROWS_AS(simulate_field(p, 129, rng), error);
}

TEST_CASE("bilinear interpolation: node exactness, cell average, constants") {
  // 2x2 lattice with corner values {0,0,0,4}: the cell centre averages to 1
  GridField f(2, {0.0, 0.0, 0.0, 4.0});
  CHECK(f(0.5, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f(0.0, 0.0) == 0.0);
  CHECK(f(1.0, 1.0) == 4.0);

  Rng rng(5);
  MaternParams p{1.0, 1.0, 0.3};
  const GridField g = simulate_field(p, 9, rng);
  for (int iy = 0; iy < 9; ++iy)
    for (int ix = 0; ix < 9; ++ix)
      CHECK(g(g.node_coord(ix), g.node_coord(iy)) == g.at_node(ix, iy));

  const GridField c = GridField::constant(16, 3.25);
  Rng prng(6);
  for (int i = 0; i < 200; ++i) {
    const Point u = prng.point_in_unit_square();
    CHECK(c.interpolate(u) == doctest::Approx(3.25).epsilon(1e-15));
  }

  CHECK_THROWS_AS(c.interpolate(Point{1.2, 0.3}), error);
  CHECK_THROWS_AS(c.interpolate(Point{0.2, -0.01}), error);
}

TEST_CASE("grid CSV round-trips values, resolution and params") {
  namespace fs = std::filesystem;
  Rng rng(11);
  MaternParams p{1.0, 1.5, 0.25};
  const GridField f = simulate_field(p, 7, rng);
  const auto path = fs::temp_directory_path() / "psdetect_grid_test.csv";
  f.write_csv(path.string());
  const GridField g = GridField::read_csv(path.string());
  REQUIRE(g.resolution() == 7);
  REQUIRE(g.params().has_value());
  CHECK(g.params()->nu == p.nu);
  CHECK(g.params()->sigma == p.sigma);
  CHECK(g.params()->range == p.range);
  for (std::size_t i = 0; i < f.values().size(); ++i)
    CHECK(f.values()[i] == g.values()[i]);
  fs::remove(path);
}

TEST_CASE("grid CSV rejects malformed input") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "psdetect_grid_bad.csv";
  {
    std::FILE* out = std::fopen(path.string().c_str(), "w");
    std::fputs("x,y,value\n0,0,1\n0,1,oops\n", out);
    std::fclose(out);
  }
  CHECK_THROWS_WITH_AS(GridField::read_csv(path.string()),
                       doctest::Contains("line 3"), error);
  fs::remove(path);
}
