#include "facetflow/diagnostics.hpp"
#include "facetflow/scenarios.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace facetflow;

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

TEST_CASE("pointwise composite fields", "[diagnostics]") {
  auto g = Grid::rectangle(21, 21, 0.05);
  SECTION("flat slice gives a zero truncation square and a full facet") {
    TimeSlab slab = make_slab(g, 2, 0.01, [](double, double, double) { return 1.0; });
    ScalarField u2 = u_delta_eps_field(slab, 0, 0.1, 0.05);
    for (int n : g->interior_nodes()) CHECK(u2.v[n] == 0.0);
    FacetMask fm = facet_mask(slab, 0, 0.1, 0.05);
    for (int n : g->interior_nodes()) CHECK(fm.mask[n] == 1);
    CHECK(fm.n_components == 1);
  }
  SECTION("strong shear empties the facet and squares the excess") {
    TimeSlab slab = make_slab(g, 2, 0.01, [](double x, double, double) { return 0.8 * x; });
    double eps = 0.05, delta = 0.1;
    FacetMask fm = facet_mask(slab, 0, delta, eps);
    for (int n : g->interior_nodes()) CHECK(fm.mask[n] == 0);
    ScalarField u2 = u_delta_eps_field(slab, 0, delta, eps);
    double expect = sq(std::sqrt(eps * eps + 0.64) - delta);
    for (int n : g->interior_nodes())
      CHECK(u2.v[n] == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("superlevel ratio", "[diagnostics]") {
  auto g = Grid::rectangle(33, 33, 1.0 / 32.0);
  double eps = 0.01, delta = 0.05;
  SECTION("uniform shear saturates the ratio") {
    TimeSlab slab = make_slab(g, 4, 0.01, [](double x, double, double) { return 0.5 * x; });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.03, 0.2);
    double mu = 0.3;  // more headroom than the field uses
    CHECK(superlevel_ratio(slab, q, delta, eps, mu, 0.125) == 1.0);
  }
  SECTION("flat field gives ratio zero") {
    TimeSlab slab = make_slab(g, 4, 0.01, [](double, double, double) { return 0.0; });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.03, 0.2);
    CHECK(superlevel_ratio(slab, q, delta, eps, 0.3, 0.125) == 0.0);
  }
  SECTION("half-and-half synthetic split") {
    // continuous two-slope field: V is about 0.2 left and 0.8 right of x=0.5
    TimeSlab slab = make_slab(g, 4, 0.01, [](double x, double, double) {
      return x > 0.5 ? 0.1 + 0.8 * (x - 0.5) : 0.2 * x;
    });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.03, 0.25);
    double ratio = superlevel_ratio(slab, q, delta, eps, 0.75, 0.125);
    CHECK(ratio > 0.35);
    CHECK(ratio < 0.65);
  }
  SECTION("monotone in mu and nu") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    TimeSlab slab = make_slab(g, 4, 0.01, [&](double x, double y, double) {
      return 0.3 * x + 0.2 * y * y;
    });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.03, 0.2);
    for (int trial = 0; trial < 50; ++trial) {
      double mu1 = 0.05 + uni(rng), mu2 = mu1 + uni(rng);
      double nu1 = 0.01 + 0.2 * uni(rng), nu2 = std::min(0.249, nu1 + 0.2 * uni(rng));
      CHECK(superlevel_ratio(slab, q, delta, eps, mu2, nu1) <=
            superlevel_ratio(slab, q, delta, eps, mu1, nu1) + 1e-15);
      CHECK(superlevel_ratio(slab, q, delta, eps, mu1, nu2) >=
            superlevel_ratio(slab, q, delta, eps, mu1, nu1) - 1e-15);
    }
  }
}

TEST_CASE("branch classification", "[diagnostics]") {
  auto g = Grid::rectangle(65, 65, 1.0 / 64.0);
  double eps = 0.004, delta = 0.05, nu = 0.125;
  SECTION("constant gradient above the level is non-degenerate for any nu") {
    TimeSlab slab = make_slab(g, 4, 0.001, [](double x, double, double) { return 0.4 * x; });
    CylinderStats st = classify_branch(slab, ParabolicCylinder(Vec2(0.5, 0.5), 0.003, 0.1),
                                       delta, eps, nu);
    CHECK(st.branch == Branch::nondegenerate);
    CHECK(!st.flat);
    CHECK(st.ratio_S == 1.0);
  }
  SECTION("flat slice classifies flat with kappa 0") {
    TimeSlab slab = make_slab(g, 4, 0.001, [](double, double, double) { return 7.0; });
    CylinderStats st = classify_branch(slab, ParabolicCylinder(Vec2(0.5, 0.5), 0.003, 0.1),
                                       delta, eps, nu);
    CHECK(st.flat);
    CHECK(st.branch == Branch::degenerate);
    CHECK(st.kappa_hat == 0.0);
  }
  SECTION("the decay op refuses the wrong branch") {
    TimeSlab slab = make_slab(g, 4, 0.001, [](double x, double, double) { return 0.4 * x; });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.003, 0.1);
    double mu = sup_truncated_modulus(slab, q.scaled(2.0), delta, eps);
    CHECK_THROWS_AS(degiorgi_sup_decay(slab, q, delta, eps, mu, nu), std::domain_error);
  }
}

TEST_CASE("oscillation energy", "[diagnostics]") {
  auto g = Grid::rectangle(65, 65, 1.0 / 64.0);
  SECTION("constant gradient has zero oscillation") {
    TimeSlab slab = make_slab(g, 6, 0.002, [](double x, double y, double) {
      return 0.3 * x - 0.1 * y;
    });
    double phi = oscillation_energy(slab, ParabolicCylinder(Vec2(0.5, 0.5), 0.01, 0.2));
    CHECK(phi < 1e-24);
  }
  SECTION("the cylinder mean minimizes the quadratic oscillation") {
    TimeSlab slab = make_slab(g, 6, 0.002, [](double x, double y, double t) {
      return std::sin(3 * x) * y + 0.2 * t * x;
    });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.01, 0.2);
    double phi = oscillation_energy(slab, q);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      Vec2 xi(uni(rng), uni(rng));
      double competitor = cylinder_average(slab, q, [&](int n, int m) {
        return (slab.nodal_gradient(m)[n] - xi).squaredNorm();
      });
      CHECK(phi <= competitor + 1e-14);
    }
  }
  SECTION("smooth fields decay at slope about two") {
    TimeSlab slab = make_slab(g, 40, 5e-4, [](double x, double y, double) {
      return std::sin(M_PI * x) * std::sin(M_PI * y);
    });
    OscillationReport rep =
        oscillation_decay(slab, Vec2(0.5, 0.5), 0.019, {0.3, 0.15, 0.075});
    CHECK(rep.fitted_slope > 1.5);
    CHECK(rep.fitted_slope < 2.5);
    CHECK(rep.phi[1] < rep.phi[0]);
    CHECK(rep.phi[2] < rep.phi[1]);
  }
}

TEST_CASE("moser exponents", "[diagnostics]") {
  SECTION("p = 2 gives (1, 2, sigma)") {
    MoserExponents e = moser_exponents(2.0, std::numeric_limits<double>::infinity(), 3.0);
    CHECK(e.d == Catch::Approx(1.0));
    CHECK(e.d1 == Catch::Approx(2.0));
    CHECK(e.d2 == Catch::Approx(3.0));
  }
  SECTION("p = 3 gives (3/2, 2)") {
    MoserExponents e = moser_exponents(3.0, 8.0, 3.0);
    CHECK(e.d == Catch::Approx(1.5));
    CHECK(e.d1 == Catch::Approx(2.0));
  }
  SECTION("both case-split formulas agree at p = 2") {
    MoserExponents lo = moser_exponents(2.0 - 1e-10, 8.0, 3.0);
    MoserExponents hi = moser_exponents(2.0, 8.0, 3.0);
    CHECK(std::abs(lo.d - hi.d) < 1e-8);
    CHECK(std::abs(lo.d1 - hi.d1) < 1e-8);
    CHECK(std::abs(lo.d2 - hi.d2) < 1e-8);
  }
  SECTION("sigma outside (2, q/2) is rejected") {
    CHECK_THROWS_AS(moser_exponents(2.0, 8.0, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(moser_exponents(2.0, 8.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("holder fit", "[diagnostics]") {
  auto g = Grid::rectangle(129, 129, 1.0 / 128.0);
  TimeSlab slab = make_slab(g, 3, 1e-4, [](double, double, double) { return 0.0; });
  SECTION("affine field flags flat") {
    ParabolicCylinder q(Vec2(0.5, 0.5), 2e-4, 0.4);
    HolderEstimate est = holder_fit(slab, q, [&](int, int) { return Vec2(1.0, 2.0); },
                                    2000, 11);
    CHECK(est.flat);
  }
  SECTION("synthetic half-exponent ramp recovers alpha = 0.5") {
    Vec2 x0(0.5, 0.5);
    ParabolicCylinder q(x0, 2e-4, 0.45);
    HolderEstimate est = holder_fit(
        slab, q,
        [&](int n, int) {
          return Vec2(std::sqrt((slab.grid()->pos(n) - x0).norm()), 0.0);
        },
        30000, 11);
    CHECK(!est.flat);
    CHECK(est.alpha_hat > 0.45);
    CHECK(est.alpha_hat < 0.55);
  }
  SECTION("smooth fields fit a positive exponent near one") {
    ParabolicCylinder q(Vec2(0.5, 0.5), 2e-4, 0.45);
    HolderEstimate est = holder_fit(
        slab, q,
        [&](int n, int) {
          Vec2 x = slab.grid()->pos(n);
          return Vec2(std::sin(2.0 * x.x()), std::cos(1.0 + x.y()));
        },
        4000, 11);
    CHECK(est.alpha_hat > 0.8);
    CHECK(est.alpha_hat < 1.2);
  }
}

TEST_CASE("subgradient witness", "[diagnostics]") {
  auto g = Grid::rectangle(33, 33, 1.0 / 32.0);
  double eps = 1e-3, delta = 0.05;
  MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{2.0, 1.0, 1.0}, eps);
  SECTION("bounded by b1 on a flat slice, aligned on strong shear") {
    TimeSlab slab = make_slab(g, 2, 0.01, [](double x, double, double) { return 0.5 * x; });
    SubgradientWitness w = subgradient_witness(slab, 0, d, delta);
    CHECK(w.max_abs_over_b1 <= 1.0 + 1e-8);
    CHECK(w.n_checked > 0);
    // |grad u| = 0.5 >> eps: Z within O(eps^2/|grad u|^2) of the unit vector
    CHECK(w.worst_alignment >= 1.0 - 2.0 * eps * eps / 0.25);
    CHECK(w.fitted_c < 2.0);
  }
  SECTION("zero-gradient slice stays inside the subdifferential ball") {
    TimeSlab slab = make_slab(g, 2, 0.01, [](double, double, double) { return 1.0; });
    SubgradientWitness w = subgradient_witness(slab, 0, d, delta);
    CHECK(w.max_abs_over_b1 <= 1e-10);
    CHECK(w.n_checked == 0);
  }
}

TEST_CASE("beta exponent", "[diagnostics]") {
  CHECK(holder_beta(8.0, 0.5) == Catch::Approx(0.5));
  CHECK(holder_beta(std::numeric_limits<double>::infinity(), 0.7) == Catch::Approx(0.7));
  CHECK_THROWS_AS(holder_beta(3.0, 0.5), std::invalid_argument);
}

TEST_CASE("comparison with the frozen flow", "[diagnostics]") {
  auto g = Grid::rectangle(41, 41, 1.0 / 40.0);
  double eps = 0.004, delta = 0.05, nu = 0.125;
  MollifiedDensity d = MollifiedDensity::surrogate(DensityParams{2.0, 1.0, 1.0}, eps);
  SECTION("caloric data yields a vanishing comparison error") {
    TimeSlab slab = make_slab(g, 21, 2e-3, [](double x, double y, double) {
      return 0.8 * x - 0.3 * y;
    });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.04, 0.28);
    ComparisonReport rep = comparison_experiment(slab, q, d, delta, nu, 0.0,
                                                 std::numeric_limits<double>::infinity(),
                                                 0.5);
    CHECK(rep.comparison_error < 1e-18);
    CHECK(rep.phi_rho < 1e-18);
  }
  SECTION("degenerate cylinders are refused") {
    TimeSlab slab = make_slab(g, 21, 2e-3, [](double, double, double) { return 0.0; });
    ParabolicCylinder q(Vec2(0.5, 0.5), 0.04, 0.28);
    CHECK_THROWS_AS(comparison_experiment(slab, q, d, delta, nu, 0.0,
                                          std::numeric_limits<double>::infinity(), 0.5),
                    std::domain_error);
  }
  SECTION("comparison error decreases with the radius on a manufactured run") {
    // tilted solution with a gentle ripple: the gradient stays near (0.8, 0),
    // so every cylinder lands on the non-degenerate branch
    ProblemSpec ps;
    ps.grid = Grid::rectangle(65, 65, 1.0 / 64.0);
    ps.density = DensityParams{2.0, 1.0, 1.0};
    ps.eps = 5e-3;
    ps.T = 0.02;
    auto exact = [](double x, double y, double t) {
      return 0.8 * x + 0.02 * std::sin(2.0 * x + y + 0.5 * t);
    };
    ps.u_star = exact;
    MollifiedDensity dd = MollifiedDensity::surrogate(ps.density, ps.eps);
    ps.f = detail::manufactured_forcing(exact, dd);
    StepperConfig cfg;
    cfg.dt = 5e-4;
    SolveResult res = run(ps, cfg);
    double prev = std::numeric_limits<double>::infinity();
    for (double rho : {0.2, 0.15, 0.1}) {
      ComparisonReport rep = comparison_experiment(
          res.slab, ParabolicCylinder(Vec2(0.5, 0.5), 0.02, rho), dd, delta, nu, 0.0,
          std::numeric_limits<double>::infinity(), 0.5);
      CHECK(rep.comparison_error <= prev + 1e-18);
      prev = rep.comparison_error;
    }
  }
}
