#include "facetflow/density.hpp"
#include "facetflow/verification.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace facetflow;

namespace {

// Independent oracle: moments of the bump j(x) = (4/pi)(1-|x|^2)^3 by plain
// composite Simpson in polar coordinates (no shared code with the library).
double bump_moment_simpson(double power, int n = 4000) {
  auto f = [&](double rho) {
    return (4.0 / M_PI) * std::pow(1.0 - rho * rho, 3.0) * std::pow(rho, power) * rho;
  };
  double acc = 0.0, h = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    double a = i * h, b = a + h;
    acc += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
  }
  return 2.0 * M_PI * acc;
}

}  // namespace

TEST_CASE("surrogate density closed forms", "[density]") {
  SECTION("pure quadratic at the origin") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{2.0, 0.0, 1.0}, 0.1);
    CHECK(d.eval(Vec2(0, 0)) == Catch::Approx(0.005).epsilon(1e-14));
    // grad(z) = z and hess = I for the shifted quadratic
    Vec2 z(0.3, -0.7);
    CHECK((d.grad(z) - z).norm() < 1e-14);
    CHECK((d.hess(z) - Mat2::Identity()).norm() < 1e-14);
  }
  SECTION("1-part gradient tends to the unit vector") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{2.0, 1.0, 0.0}, 1e-6);
    Vec2 g = d.grad(Vec2(3.0, 4.0));
    CHECK(g.x() == Catch::Approx(0.6).margin(1e-9));
    CHECK(g.y() == Catch::Approx(0.8).margin(1e-9));
  }
  SECTION("grad(0) = 0 and hess(0) is a multiple of the identity") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{3.0, 1.0, 2.0}, 0.05);
    CHECK(d.grad(Vec2::Zero()).norm() == 0.0);
    Mat2 h0 = d.hess(Vec2::Zero());
    CHECK(h0(0, 1) == Catch::Approx(0.0).margin(1e-14));
    CHECK(h0(0, 0) == Catch::Approx(h0(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("mollified value at the origin matches the first bump moment", "[density]") {
  const double m1_oracle = bump_moment_simpson(1.0);
  CHECK(m1_oracle == Catch::Approx(128.0 / 315.0).epsilon(1e-10));
  for (double eps : {0.1, 0.05}) {
    MollifiedDensity d = MollifiedDensity::quadrature(DensityParams{2.0, 1.0, 0.0}, eps);
    CHECK(d.eval(Vec2::Zero()) == Catch::Approx(eps * m1_oracle).epsilon(1e-9));
  }
}

TEST_CASE("mollified 1-part sandwiches |z|", "[density]") {
  const double eps = 0.05;
  MollifiedDensity d = MollifiedDensity::quadrature(DensityParams{2.0, 1.0, 0.0}, eps);
  SECTION("eval(z) >= |z| and eval(z) - |z| <= eps") {
    Vec2 z(10.0 * eps, 0.0);
    double v = d.eval(z);
    CHECK(v >= z.norm());
    CHECK(v - z.norm() <= eps);
  }
  SECTION("g(r) - r decreasing far from the mollification scale") {
    double prev = std::numeric_limits<double>::infinity();
    for (double r = 3.0 * eps; r < 2.0; r += 0.05) {
      double gap = d.eval(Vec2(r, 0.0)) - r;
      CHECK(gap >= -1e-12);
      CHECK(gap <= eps);
      CHECK(gap <= prev + 1e-12);
      prev = gap;
    }
  }
}

TEST_CASE("radial profile invariants", "[density]") {
  RadialProfile prof = RadialProfile::build(1.0, 0.1);
  CHECK(std::abs(prof.deriv(0.0)) < 1e-9);
  CHECK(prof.max_quadrature_error() < 1e-8);
  // |g'| stays below the subgradient bound (unit coefficient)
  for (double r = 0.0; r < 5.0; r += 0.017)
    CHECK(prof.deriv(r) <= 1.0 + 1e-9);
}

TEST_CASE("eval is radially symmetric in both modes", "[density]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  MollifiedDensity ds = MollifiedDensity::surrogate(DensityParams{1.5, 1.0, 1.0}, 0.05);
  MollifiedDensity dq = MollifiedDensity::quadrature(DensityParams{1.5, 1.0, 1.0}, 0.05);
  for (int i = 0; i < 50; ++i) {
    double r = 4.0 * uni(rng), a = 2.0 * M_PI * uni(rng), b = 2.0 * M_PI * uni(rng);
    Vec2 z1(r * std::cos(a), r * std::sin(a)), z2(r * std::cos(b), r * std::sin(b));
    CHECK(ds.eval(z1) == Catch::Approx(ds.eval(z2)).margin(1e-13));
    CHECK(dq.eval(z1) == Catch::Approx(dq.eval(z2)).margin(1e-13));
  }
}

TEST_CASE("hessian eigenvalue fit and containment, quadrature p=3", "[density]") {
  MollifiedDensity d = MollifiedDensity::quadrature(DensityParams{3.0, 1.0, 1.0}, 0.05);
  HessianFit fit = fit_hessian_constants(d);
  CHECK(fit.lambda > 0.0);
  CHECK(fit.Lambda < 1e3);
  CHECK(fit.K > 0.0);
  CHECK(fit.min_e1_eig > -1e-10);
  CHECK(fit.max_grad_e1 <= 1.0 + 1e-9);
  // fresh samples stay inside the fitted brackets
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    double angle = 2.0 * M_PI * uni(rng);
    Vec2 z = 5.0 * uni(rng) * Vec2(std::cos(angle), std::sin(angle));
    double w = 0.05 * 0.05 + z.squaredNorm();
    double lo, hi;
    sym_eig2(d.ep_hess(z), lo, hi);
    double scale = std::pow(w, 0.5);
    CHECK(lo >= fit.lambda * scale * (1 - 1e-8) - 1e-12);
    CHECK(hi <= fit.Lambda * scale * (1 + 1e-8) + 1e-12);
    sym_eig2(d.e1_hess(z), lo, hi);
    CHECK(hi <= fit.K / std::sqrt(w) * (1 + 1e-8) + 1e-12);
  }
}

TEST_CASE("strong monotonicity gap", "[density]") {
  SECTION("identical arguments") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{3.0, 1.0, 1.0}, 0.05);
    CHECK(d.strong_monotonicity_gap(Vec2(1, 2), Vec2(1, 2)) == 0.0);
  }
  SECTION("linear gradient in the quadratic case") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{2.0, 0.0, 1.0}, 0.1);
    Vec2 z1(0.4, -1.0), z2(2.0, 0.3);
    CHECK(d.strong_monotonicity_gap(z1, z2) ==
          Catch::Approx((z1 - z2).squaredNorm()).epsilon(1e-13));
  }
  SECTION("p = 3 batch: sign and a positive cubic lower constant") {
    MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{3.0, 1.0, 1.0}, 0.05);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100000; ++i) {
      Vec2 z1(uni(rng), uni(rng)), z2(uni(rng), uni(rng));
      double dz = (z1 - z2).norm();
      if (dz < 1e-6) continue;
      double gap = d.strong_monotonicity_gap(z1, z2);
      REQUIRE(gap >= -1e-12);
      worst_ratio = std::min(worst_ratio, gap / (dz * dz * dz));
    }
    CHECK(worst_ratio > 0.0);
  }
}

TEST_CASE("finite differences recover grad and hess", "[density]") {
  for (DensityMode mode : {DensityMode::surrogate, DensityMode::quadrature}) {
    MollifiedDensity d = mode == DensityMode::surrogate
                             ? MollifiedDensity::surrogate(DensityParams{1.5, 1.0, 1.0}, 0.05)
                             : MollifiedDensity::quadrature(DensityParams{1.5, 1.0, 1.0}, 0.05);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double eg[2] = {0, 0}, eh[2] = {0, 0};
    const double steps[2] = {1e-3, 1e-4};
    for (int i = 0; i < 100; ++i) {
      double a = 2.0 * M_PI * uni(rng);
      Vec2 z = (0.05 + 4.0 * uni(rng)) * Vec2(std::cos(a), std::sin(a));
      for (int k = 0; k < 2; ++k) {
        for (int c = 0; c < 2; ++c) {
          Vec2 dz = Vec2::Zero();
          dz[c] = steps[k];
          double fd = (d.eval(z + dz) - d.eval(z - dz)) / (2 * steps[k]);
          eg[k] = std::max(eg[k], std::abs(fd - d.grad(z)[c]));
          Vec2 fdg = (d.grad(z + dz) - d.grad(z - dz)) / (2 * steps[k]);
          eh[k] = std::max(eh[k], (fdg - d.hess(z).col(c)).norm());
        }
      }
    }
    CHECK(std::log10(eg[0] / eg[1]) >= 1.9);
    CHECK(std::log10(eh[0] / eh[1]) >= 1.9);
  }
}

TEST_CASE("parameter validation", "[density]") {
  CHECK_THROWS_AS(MollifiedDensity::surrogate(DensityParams{1.0, 1.0, 1.0}, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(MollifiedDensity::surrogate(DensityParams{2.0, -1.0, 1.0}, 0.1),
                  std::invalid_argument);
  // eps = 0 with a live 1-part is a differential inclusion, not a density
  CHECK_THROWS_AS(MollifiedDensity::surrogate(DensityParams{2.0, 1.0, 1.0}, 0.0),
                  std::invalid_argument);
  CHECK_NOTHROW(MollifiedDensity::surrogate(DensityParams{2.0, 0.0, 1.0}, 0.0));
  CHECK_THROWS_AS(MollifiedDensity::quadrature(DensityParams{2.0, 1.0, 1.0}, 0.0),
                  std::invalid_argument);
}
