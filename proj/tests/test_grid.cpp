#include "facetflow/grid.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

using namespace facetflow;

TEST_CASE("gradient exactness", "[grid]") {
  auto g = Grid::rectangle(17, 13, 0.125, Vec2(-0.3, 0.2));
  ScalarField u(g);
  SECTION("affine fields give exact edge values") {
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i) {
        Vec2 x = g->pos(i, j);
        u(i, j) = 1.5 * x.x() - 2.5 * x.y() + 0.7;
      }
    VectorField f = gradient(u);
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i + 1 < g->nx(); ++i)
        CHECK(f.x[g->x_edge(i, j)] == Catch::Approx(1.5).epsilon(1e-12));
    for (int j = 0; j + 1 < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i)
        CHECK(f.y[g->y_edge(i, j)] == Catch::Approx(-2.5).epsilon(1e-12));
  }
  SECTION("constant field gives the zero field") {
    for (auto& v : u.v) v = 4.2;
    VectorField f = gradient(u);
    for (double v : f.x) CHECK(v == 0.0);
    for (double v : f.y) CHECK(v == 0.0);
  }
  SECTION("x^2 gives the exact midpoint derivative") {
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i) u(i, j) = sq(g->pos(i, j).x());
    VectorField f = gradient(u);
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i + 1 < g->nx(); ++i) {
        double xm = 0.5 * (g->pos(i, j).x() + g->pos(i + 1, j).x());
        CHECK(f.x[g->x_edge(i, j)] == Catch::Approx(2.0 * xm).epsilon(1e-12));
      }
  }
}

TEST_CASE("divergence and summation by parts", "[grid]") {
  SECTION("divergence of an affine gradient vanishes") {
    auto g = Grid::rectangle(17, 17, 0.1);
    ScalarField u(g);
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i)
        u(i, j) = 2.0 * g->pos(i, j).x() - 3.0 * g->pos(i, j).y();
    ScalarField d = divergence(gradient(u));
    for (int n : g->interior_nodes()) CHECK(std::abs(d.v[n]) < 1e-12);
  }
  SECTION("five-point laplacian is exact on quadratics") {
    auto g = Grid::rectangle(17, 17, 0.1);
    ScalarField u(g);
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i) u(i, j) = g->pos(i, j).squaredNorm();
    ScalarField d = divergence(gradient(u));
    for (int n : g->interior_nodes()) CHECK(d.v[n] == Catch::Approx(4.0).epsilon(1e-11));
  }
  SECTION("adjointness on random fields, disk mask included") {
    for (auto grid : {Grid::rectangle(15, 11, 0.125), Grid::disk(1.0, 0.11)}) {
      std::mt19937_64 rng(17);
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      for (int trial = 0; trial < 100; ++trial) {
        VectorField f(grid);
        for (int j = 0; j < grid->ny(); ++j)
          for (int i = 0; i + 1 < grid->nx(); ++i)
            if (grid->x_edge_active(i, j)) f.x[grid->x_edge(i, j)] = uni(rng);
        for (int j = 0; j + 1 < grid->ny(); ++j)
          for (int i = 0; i < grid->nx(); ++i)
            if (grid->y_edge_active(i, j)) f.y[grid->y_edge(i, j)] = uni(rng);
        ScalarField v(grid);
        for (int n : grid->interior_nodes()) v.v[n] = uni(rng);
        ScalarField dv = divergence(f);
        VectorField gv = gradient(v);
        double a = 0.0, b = 0.0;
        for (int n = 0; n < grid->n_nodes(); ++n) a += dv.v[n] * v.v[n];
        for (size_t e = 0; e < f.x.size(); ++e) b += f.x[e] * gv.x[e];
        for (size_t e = 0; e < f.y.size(); ++e) b += f.y[e] * gv.y[e];
        REQUIRE(std::abs(a + b) < 1e-12 * (1.0 + std::abs(a)));
      }
    }
  }
}

TEST_CASE("disk mask geometry", "[grid]") {
  double R = 1.0, h = 1.0 / 40.0;
  auto g = Grid::disk(R, h);
  double area = g->n_interior() * h * h;
  CHECK(std::abs(area - M_PI * R * R) <= 2.0 * h * 2.0 * M_PI * R);
  // every interior node keeps 4 non-exterior neighbors (grid invariant)
  for (int j = 0; j < g->ny(); ++j)
    for (int i = 0; i < g->nx(); ++i)
      if (g->kind(i, j) == NodeKind::interior) {
        CHECK(g->active(i - 1, j));
        CHECK(g->active(i + 1, j));
        CHECK(g->active(i, j - 1));
        CHECK(g->active(i, j + 1));
      }
}

TEST_CASE("parabolic metric", "[grid]") {
  CHECK(d_p(Vec2(1, 2), 0.5, Vec2(1, 2), 0.5) == 0.0);
  CHECK(d_p(Vec2(0, 0), 0.0, Vec2(0, 0), 0.04) == Catch::Approx(0.2));
  CHECK(d_p(Vec2(0.3, 0), 0.0, Vec2(0, 0), 0.04) == Catch::Approx(0.3));
  SECTION("triangle inequality on random triples") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (int i = 0; i < 100000; ++i) {
      Vec2 x1(uni(rng), uni(rng)), x2(uni(rng), uni(rng)), x3(uni(rng), uni(rng));
      double t1 = uni(rng), t2 = uni(rng), t3 = uni(rng);
      REQUIRE(d_p(x1, t1, x3, t3) <=
              d_p(x1, t1, x2, t2) + d_p(x2, t2, x3, t3) + 1e-12);
    }
  }
}

namespace {

TimeSlab make_slab(std::shared_ptr<const Grid> g, int slices, double dt,
                   const std::function<double(double, double, double)>& f) {
  TimeSlab slab(g);
  for (int m = 0; m < slices; ++m) {
    ScalarField u(g);
    for (int j = 0; j < g->ny(); ++j)
      for (int i = 0; i < g->nx(); ++i)
        if (g->active(i, j)) {
          Vec2 x = g->pos(i, j);
          u(i, j) = f(x.x(), x.y(), m * dt);
        }
    slab.append(m * dt, u);
  }
  return slab;
}

}  // namespace

TEST_CASE("cylinder averages", "[grid]") {
  auto g = Grid::rectangle(33, 33, 1.0 / 32.0);
  SECTION("constant field averages to the constant") {
    TimeSlab slab = make_slab(g, 8, 0.01, [](double, double, double) { return 3.25; });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.07, 0.2);
    CHECK(cylinder_average(slab, q, [&](int n, int m) {
            return slab.slice(m).v[n];
          }) == Catch::Approx(3.25));
  }
  SECTION("half-space indicator averages to one half up to quantization") {
    TimeSlab slab = make_slab(g, 8, 0.01, [](double x, double, double) {
      return x > 0.5 ? 1.0 : 0.0;
    });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.07, 0.25);
    double mean = cylinder_average(slab, q, [&](int n, int m) { return slab.slice(m).v[n]; });
    CHECK(std::abs(mean - 0.5) < 0.05);
  }
  SECTION("shrinking radius converges to the point value") {
    TimeSlab slab = make_slab(g, 12, 0.005, [](double x, double y, double) {
      return std::sin(2.0 * x) * std::cos(1.5 * y);
    });
    Vec2 c(0.5, 0.5);
    double target = std::sin(1.0) * std::cos(0.75);
    double prev_err = 1e9;
    for (double r : {0.3, 0.2, 0.1}) {
      double mean = cylinder_average(slab, ParabolicCylinder(c, 0.055, r),
                                     [&](int n, int m) { return slab.slice(m).v[n]; });
      double err = std::abs(mean - target);
      CHECK(err < prev_err + 1e-12);
      prev_err = err;
    }
    CHECK(prev_err < 0.02);
  }
  SECTION("too-small cylinders raise a domain error with realized counts") {
    TimeSlab slab = make_slab(g, 3, 0.01, [](double, double, double) { return 0.0; });
    try {
      cylinder_average(slab, ParabolicCylinder(Vec2(0.5, 0.5), 0.02, 0.01),
                       [](int, int) { return 0.0; });
      FAIL("expected a domain error");
    } catch (const std::domain_error& e) {
      CHECK(std::string(e.what()).find("nodes") != std::string::npos);
    }
  }
}

TEST_CASE("slab CSV round trip is bit-exact", "[grid]") {
  auto g = Grid::disk(0.5, 0.06);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  TimeSlab slab(g);
  for (int m = 0; m < 3; ++m) {
    ScalarField u(g);
    for (int n = 0; n < g->n_nodes(); ++n)
      if (g->kind(n) != NodeKind::exterior) u.v[n] = uni(rng) / 3.0;
    slab.append(m * 0.1, u);
  }
  std::string path = "/tmp/facetflow_roundtrip.csv";
  write_slab_csv(slab, path);
  TimeSlab back = read_slab_csv(g, path);
  REQUIRE(back.n_slices() == slab.n_slices());
  for (int m = 0; m < slab.n_slices(); ++m) {
    CHECK(back.time(m) == slab.time(m));
    for (int n = 0; n < g->n_nodes(); ++n) CHECK(back.slice(m).v[n] == slab.slice(m).v[n]);
  }
  std::remove(path.c_str());
}

TEST_CASE("slab invariants", "[grid]") {
  auto g = Grid::rectangle(5, 5, 0.25);
  TimeSlab slab(g);
  slab.append(0.0, ScalarField(g));
  CHECK_THROWS_AS(slab.append(0.0, ScalarField(g)), std::invalid_argument);
  ScalarField bad(g);
  bad.v[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(slab.append(1.0, bad), std::runtime_error);
}
