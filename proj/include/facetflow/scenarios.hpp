#pragma once

#include "facetflow/diagnostics.hpp"
#include "facetflow/solver.hpp"

#include <array>
#include <functional>
#include <future>
#include <string>
#include <vector>

namespace facetflow {

// ---------------------------------------------------------------------------
// Bingham laminar pipe flow on a disk: du/dt - b1 div(grad u/|grad u|)
//                                            - b2 lap u = f(t).
// ---------------------------------------------------------------------------

struct BinghamPipeSpec {
  double R = 1.0;
  double b1 = 1.0;
  double b2 = 1.0;
  double f = 4.0;                        // constant pressure gradient
  std::function<double(double)> f_of_t;  // optional; overrides the constant
  double eps = 1e-3;
  double h = 1.0 / 64.0;

  void validate() const {
    require(R > 0.0 && h > 0.0 && b2 > 0.0 && b1 >= 0.0, "bingham: bad geometry/material");
    require(eps > 0.0 && eps < 1.0, "bingham: eps must lie in (0,1)");
  }
  double forcing(double t) const { return f_of_t ? f_of_t(t) : f; }
};

/// Steady velocity profile: u(r) = int_r^R (f s/2 - b1)_+ / b2 ds, in closed
/// form; constant on the plug r <= 2 b1 / f.
inline double bingham_exact_profile(double r, const BinghamPipeSpec& spec) {
  require(!spec.f_of_t, "bingham_exact_profile: constant forcing only");
  if (spec.f <= 0.0) throw std::domain_error("bingham_exact_profile: requires f > 0");
  require(r >= 0.0 && r <= spec.R, "bingham_exact_profile: r outside [0, R]");
  auto outer = [&](double s) {
    return (spec.f * (spec.R * spec.R - s * s) / 4.0 - spec.b1 * (spec.R - s)) /
           spec.b2;
  };
  double r0 = 2.0 * spec.b1 / spec.f;
  if (r0 >= spec.R) return 0.0;  // sub-yield forcing: no flow
  return r >= r0 ? outer(r) : outer(r0);
}

struct SteadyMarchConfig {
  StepperConfig stepper{0.2, 2e-9, 60, 1e-10, 0.5, 60, 1e-4};
  double steady_tol = 1e-8;  // stop when |u_new - u_old|_inf / dt < steady_tol
  double t_max = 60.0;       // configured horizon; non-convergence is an error
  int tail_steps = 0;        // optional fine-resolution tail slab
  double tail_dt = 1e-4;
};

struct BinghamRunResult {
  SolveResult solve;           // uniform-dt march, last slice near-steady
  TimeSlab tail;               // fine uniform-dt tail (empty if not requested)
  double t_steady = 0.0;
  double linf_rel_error = -1.0;      // vs the exact profile (constant f only)
  double plug_radius_estimate = 0.0;
  double plug_radius_exact = 0.0;
  double plug_threshold = 0.0;       // facet-mask level used by the estimator
  double steady_residual = 0.0;      // RMS pointwise stationary residual
};

namespace detail {

template <class Density>
TimeSlab march_tail(std::shared_ptr<const Grid> grid, const Density& density,
                    const ScalarField& u_steady, double t_start,
                    const std::vector<double>& f_nodal, double tail_dt,
                    int tail_steps, const StepperConfig& cfg) {
  TimeSlab tail(grid);
  tail.append(t_start, u_steady);
  ImplicitStepper<Density> stepper(grid, density, cfg);
  ScalarField u = u_steady;
  ScalarField u_old = u_steady;
  for (int k = 1; k <= tail_steps; ++k) {
    StepStats st = stepper.step(u, u_old, f_nodal, tail_dt);
    if (!st.converged) throw std::runtime_error("tail march: step did not converge");
    tail.append(t_start + k * tail_dt, u);
    u_old = u;
  }
  return tail;
}

}  // namespace detail

/// March the pipe flow from rest to the steady state and compare with the
/// closed-form profile.  The facet-mask level of the plug estimator scales
/// with max(4 eps, f h / (2 b2)) so that the threshold bias stays below the
/// grid quantization.
inline BinghamRunResult run_bingham(const BinghamPipeSpec& spec,
                                    const SteadyMarchConfig& march) {
  spec.validate();
  auto grid = Grid::disk(spec.R, spec.h);
  DensityParams params{2.0, spec.b1, spec.b2};
  MollifiedDensity density = MollifiedDensity::surrogate(params, spec.eps);
  ImplicitStepper<MollifiedDensity> stepper(grid, density, march.stepper);

  BinghamRunResult out;
  out.solve.slab = TimeSlab(grid);
  ScalarField u(grid);
  out.solve.slab.append(0.0, u);
  ScalarField u_old = u;

  const double dt = march.stepper.dt;
  double t = 0.0;
  bool steady = false;
  std::vector<double> f_nodal(grid->n_nodes(), 0.0);
  while (t < march.t_max) {
    double t_new = t + dt;
    double fv = spec.forcing(t_new);
    for (int n : grid->interior_nodes()) f_nodal[n] = fv;
    StepStats st = stepper.step(u, u_old, f_nodal, dt);
    if (!st.converged)
      throw std::runtime_error("run_bingham: step at t = " + std::to_string(t_new) +
                               " did not converge");
    st.t = t_new;
    out.solve.steps.push_back(st);
    out.solve.slab.append(t_new, u);
    double diff = 0.0;
    for (int n : grid->interior_nodes())
      diff = std::max(diff, std::abs(u.v[n] - u_old.v[n]));
    u_old = u;
    t = t_new;
    if (diff / dt < march.steady_tol) {
      steady = true;
      break;
    }
  }
  if (!steady)
    throw std::runtime_error("run_bingham: no steady state within t_max = " +
                             std::to_string(march.t_max));
  out.t_steady = t;

  {  // stationary residual (mass term vanishes with u_old = u)
    Eigen::VectorXd r;
    stepper.residual(u, u, f_nodal, 1.0, r);
    out.steady_residual = std::sqrt(r.squaredNorm() / std::max(1, grid->n_interior()));
  }

  if (!spec.f_of_t) {
    double umax = 0.0, err = 0.0;
    for (int n : grid->interior_nodes()) {
      double ue = bingham_exact_profile(grid->pos(n).norm(), spec);
      umax = std::max(umax, std::abs(ue));
      err = std::max(err, std::abs(u.v[n] - ue));
    }
    out.linf_rel_error = umax > 0.0 ? err / umax : err;
    out.plug_radius_exact = std::min(spec.R, 2.0 * spec.b1 / spec.f);

    out.plug_threshold = std::max(4.0 * spec.eps, spec.f * spec.h / (2.0 * spec.b2));
    FacetMask fm = facet_mask(out.solve.slab, out.solve.slab.n_slices() - 1,
                              out.plug_threshold, spec.eps);
    double first_violation = spec.R;
    for (int n : grid->interior_nodes())
      if (!fm.mask[n]) first_violation = std::min(first_violation, grid->pos(n).norm());
    out.plug_radius_estimate = first_violation;
  }

  if (march.tail_steps > 0) {
    out.tail = detail::march_tail(grid, density, u, t, f_nodal, march.tail_dt,
                                  march.tail_steps, march.stepper);
  }
  return out;
}

/// Fixed-horizon pipe-flow problem (used by the eps sweeps).
inline ProblemSpec bingham_problem(const BinghamPipeSpec& spec, double eps, double T) {
  ProblemSpec ps;
  ps.grid = Grid::disk(spec.R, spec.h);
  ps.density = DensityParams{2.0, spec.b1, spec.b2};
  ps.eps = eps;
  ps.T = T;
  double fc = spec.f;
  auto ft = spec.f_of_t;
  ps.f = [fc, ft](double, double, double t) { return ft ? ft(t) : fc; };
  return ps;
}

// ---------------------------------------------------------------------------
// Crystal-surface relaxation (constant mobility): dh/dt = mu (lap_1 + lap_3) h,
// i.e. p = 3 with b1 = b3 = mu; cone initial data flattens at the tip.
// ---------------------------------------------------------------------------

struct SpohnSpec {
  double mobility = 1.0;
  double eps = 1e-2;
  double h = 1.0 / 32.0;
  double cone_height = 0.5;
  double cone_radius = 0.5;
  double T = 0.02;
  double dt = 1e-3;
};

inline ProblemSpec spohn_problem(const SpohnSpec& s) {
  ProblemSpec ps;
  ps.grid = Grid::rectangle(static_cast<int>(std::round(2.0 / s.h)) + 1,
                            static_cast<int>(std::round(2.0 / s.h)) + 1, s.h,
                            Vec2(-1.0, -1.0));
  ps.density = DensityParams{3.0, s.mobility, s.mobility};
  ps.eps = s.eps;
  ps.T = s.T;
  double A = s.cone_height, R0 = s.cone_radius;
  ps.u_star = [A, R0](double x, double y, double) {
    return A * positive_part(1.0 - std::hypot(x, y) / R0);
  };
  return ps;
}

struct SpohnResult {
  SolveResult solve;
  std::vector<double> facet_area;     // per slice, facet component area at the tip
  std::vector<double> density_energy; // per slice, sum h^2 E_eps(grad h)
};

/// Density part of the functional on one slice (dissipation diagnostic).
inline double density_energy_of_slice(const TimeSlab& slab, int m,
                                      const MollifiedDensity& density) {
  ImplicitStepper<MollifiedDensity> st(slab.grid(), density, StepperConfig{});
  std::vector<double> zero_f(slab.grid()->n_nodes(), 0.0);
  return st.energy(slab.slice(m), slab.slice(m), zero_f, 1.0);
}

inline SpohnResult run_spohn(const SpohnSpec& s, double facet_delta = 0.05) {
  ProblemSpec ps = spohn_problem(s);
  StepperConfig cfg;
  cfg.dt = s.dt;
  SpohnResult out;
  out.solve = run(ps, cfg);
  MollifiedDensity density = MollifiedDensity::surrogate(ps.density, ps.eps);
  for (int m = 0; m < out.solve.slab.n_slices(); ++m) {
    FacetMask fm = facet_mask(out.solve.slab, m, facet_delta, ps.eps);
    const Grid& g = *ps.grid;
    double area = 0.0;
    for (int n : g.interior_nodes())
      if (fm.mask[n] && g.pos(n).norm() < 0.5 * s.cone_radius) area += g.h() * g.h();
    out.facet_area.push_back(area);
    out.density_energy.push_back(density_energy_of_slice(out.solve.slab, m, density));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manufactured solutions: f is synthesized from a chosen u* through the
// density by fourth-order numerical differentiation.
// ---------------------------------------------------------------------------

struct ManufacturedCase {
  std::string family;
  ProblemSpec spec;
  SpaceTimeFn exact;
};

namespace detail {

inline double diff4(const std::function<double(double)>& f, double x, double a) {
  return (-f(x + 2 * a) + 8.0 * f(x + a) - 8.0 * f(x - a) + f(x - 2 * a)) / (12.0 * a);
}

/// f = d_t u* - div grad E_eps(grad u*), all derivatives by 4th-order stencils.
inline SpaceTimeFn manufactured_forcing(const SpaceTimeFn& exact,
                                        const MollifiedDensity& density,
                                        double a_space = 2e-3, double a_time = 2e-3) {
  return [exact, density, a_space, a_time](double x, double y, double t) {
    auto grad_exact = [&](double xx, double yy) {
      double gx = diff4([&](double s) { return exact(s, yy, t); }, xx, a_space);
      double gy = diff4([&](double s) { return exact(xx, s, t); }, yy, a_space);
      return Vec2(gx, gy);
    };
    double du_dt = diff4([&](double s) { return exact(x, y, s); }, t, a_time);
    double dfx = diff4([&](double s) { return density.grad(grad_exact(s, y)).x(); },
                       x, a_space);
    double dfy = diff4([&](double s) { return density.grad(grad_exact(x, s)).y(); },
                       y, a_space);
    return du_dt - dfx - dfy;
  };
}

}  // namespace detail

inline ManufacturedCase manufactured_case(const std::string& family, int n_nodes,
                                          double T) {
  ManufacturedCase mc;
  mc.family = family;
  double h = 1.0 / (n_nodes - 1);
  mc.spec.grid = Grid::rectangle(n_nodes, n_nodes, h);
  mc.spec.T = T;
  if (family == "separable-heat") {
    mc.spec.density = DensityParams{2.0, 0.0, 1.0};
    mc.spec.eps = 0.0;
    mc.exact = [](double x, double y, double t) {
      return std::exp(-2.0 * M_PI * M_PI * t) * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    mc.spec.u_star = mc.exact;
    mc.spec.f = nullptr;  // exact heat eigenfunction: zero forcing
  } else if (family == "smooth-bump") {
    mc.spec.density = DensityParams{3.0, 0.0, 1.0};
    mc.spec.eps = 0.05;
    mc.exact = [](double x, double y, double t) {
      return (1.0 + 0.25 * std::sin(2.0 * t)) * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    mc.spec.u_star = mc.exact;
    MollifiedDensity density = MollifiedDensity::surrogate(mc.spec.density, mc.spec.eps);
    mc.spec.f = detail::manufactured_forcing(mc.exact, density);
  } else if (family == "traveling-ramp") {
    mc.spec.density = DensityParams{2.0, 1.0, 1.0};
    mc.spec.eps = 0.02;
    mc.exact = [](double x, double y, double t) {
      (void)y;
      double xi = (x - 0.3 - 0.3 * t) / 0.1;
      // softplus ramp: gradient magnitude sweeps (0, 0.5)
      double sp = xi > 30.0 ? xi : std::log1p(std::exp(xi));
      return 0.05 * sp;
    };
    mc.spec.u_star = mc.exact;
    MollifiedDensity density = MollifiedDensity::surrogate(mc.spec.density, mc.spec.eps);
    mc.spec.f = detail::manufactured_forcing(mc.exact, density);
  } else {
    throw std::invalid_argument("manufactured_case: unknown family '" + family + "'");
  }
  return mc;
}

/// Discrete L^2 error of the final slice against the exact solution.
inline double final_slice_l2_error(const SolveResult& result, const SpaceTimeFn& exact) {
  const TimeSlab& slab = result.slab;
  const Grid& g = *slab.grid();
  double t = slab.time(slab.n_slices() - 1);
  const ScalarField& u = slab.slice(slab.n_slices() - 1);
  double acc = 0.0;
  for (int n : g.interior_nodes()) {
    Vec2 x = g.pos(n);
    acc += sq(u.v[n] - exact(x.x(), x.y(), t)) * g.h() * g.h();
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Epsilon sweep: identical problem at decreasing regularization, with the
// L^p gradient distances and sup distances of truncated gradients.
// ---------------------------------------------------------------------------

struct SweepResult {
  std::vector<double> eps;
  std::vector<double> succ_lp;    // |grad u_{e_i} - grad u_{e_i+1}|_{L^p}
  std::vector<double> succ_sup;   // sup |G_{2d,e_i}(...) - G_{2d,e_i+1}(...)|
  std::vector<std::array<double, 4>> pairwise;  // eps_i, eps_j, lp, sup
  bool lp_strictly_decreasing = true;
  bool sup_strictly_decreasing = true;
};

inline SweepResult epsilon_sweep(const std::function<ProblemSpec(double)>& make_spec,
                                 const std::vector<double>& eps_list,
                                 const StepperConfig& cfg, double delta, double p_norm,
                                 int workers = 1) {
  require(!eps_list.empty(), "epsilon_sweep: empty eps list");
  for (size_t i = 0; i + 1 < eps_list.size(); ++i)
    require(eps_list[i] > eps_list[i + 1], "epsilon_sweep: eps list must strictly decrease");
  for (double e : eps_list)
    require(e > 0.0 && e < delta / 8.0, "epsilon_sweep: every eps must satisfy eps < delta/8");

  std::vector<SolveResult> runs(eps_list.size());
  if (workers > 1) {
    std::vector<std::future<SolveResult>> fut;
    for (double e : eps_list)
      fut.push_back(std::async(std::launch::async,
                               [&make_spec, &cfg, e] { return run(make_spec(e), cfg); }));
    for (size_t i = 0; i < fut.size(); ++i) runs[i] = fut[i].get();
  } else {
    for (size_t i = 0; i < eps_list.size(); ++i) runs[i] = run(make_spec(eps_list[i]), cfg);
  }

  const TimeSlab& ref = runs[0].slab;
  const Grid& g = *ref.grid();
  for (size_t i = 1; i < runs.size(); ++i)
    require(runs[i].slab.n_slices() == ref.n_slices(),
            "epsilon_sweep: sweep members must share the time partition");

  SweepResult out;
  out.eps = eps_list;
  auto lp_dist = [&](size_t a, size_t b) {
    double acc = 0.0;
    for (int m = 1; m < ref.n_slices(); ++m) {
      double dt = runs[a].slab.time(m) - runs[a].slab.time(m - 1);
      const auto& ga = runs[a].slab.nodal_gradient(m);
      const auto& gb = runs[b].slab.nodal_gradient(m);
      for (int n : g.interior_nodes())
        acc += std::pow((ga[n] - gb[n]).norm(), p_norm) * g.h() * g.h() * dt;
    }
    return std::pow(acc, 1.0 / p_norm);
  };
  auto sup_dist = [&](size_t a, size_t b) {
    double sup = 0.0;
    for (int m = 1; m < ref.n_slices(); ++m) {
      const auto& ga = runs[a].slab.nodal_gradient(m);
      const auto& gb = runs[b].slab.nodal_gradient(m);
      for (int n : g.interior_nodes())
        sup = std::max(sup, (g_delta_eps(ga[n], 2.0 * delta, eps_list[a]) -
                             g_delta_eps(gb[n], 2.0 * delta, eps_list[b]))
                                .norm());
    }
    return sup;
  };

  for (size_t i = 0; i < eps_list.size(); ++i)
    for (size_t j = i + 1; j < eps_list.size(); ++j)
      out.pairwise.push_back({eps_list[i], eps_list[j], lp_dist(i, j), sup_dist(i, j)});
  for (size_t i = 0; i + 1 < eps_list.size(); ++i) {
    out.succ_lp.push_back(lp_dist(i, i + 1));
    out.succ_sup.push_back(sup_dist(i, i + 1));
  }
  for (size_t i = 0; i + 1 < out.succ_lp.size(); ++i) {
    if (!(out.succ_lp[i] > out.succ_lp[i + 1])) out.lp_strictly_decreasing = false;
    if (!(out.succ_sup[i] > out.succ_sup[i + 1])) out.sup_strictly_decreasing = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curated cylinder sets for the pipe-flow dichotomy diagnostics
// ---------------------------------------------------------------------------

struct CuratedCylinders {
  std::vector<ParabolicCylinder> plug;     // centered inside the plug
  std::vector<ParabolicCylinder> annulus;  // centered in the shear annulus
  ParabolicCylinder holder;                // large cylinder for the Hoelder fit
  ParabolicCylinder moser;                 // outer cylinder for the sup bound
};

/// Snap a point to the nearest grid node.
inline Vec2 snap_to_node(const Grid& g, const Vec2& x) {
  int i = static_cast<int>(std::round((x.x() - g.origin().x()) / g.h()));
  int j = static_cast<int>(std::round((x.y() - g.origin().y()) / g.h()));
  i = std::clamp(i, 0, g.nx() - 1);
  j = std::clamp(j, 0, g.ny() - 1);
  return g.pos(i, j);
}

inline CuratedCylinders curate_bingham_cylinders(const Grid& g, double R, double r0,
                                                 double rho, int n_plug,
                                                 int n_annulus, double t0) {
  CuratedCylinders out;
  double r_plug = std::max(0.0, std::min(0.4 * r0, r0 - 2.0 * rho - 2.0 * g.h()));
  for (int k = 0; k < n_plug; ++k) {
    Vec2 target = Vec2::Zero();
    if (k > 0) {
      double th = 2.0 * M_PI * (k - 1) / std::max(1, n_plug - 1);
      target = r_plug * Vec2(std::cos(th), std::sin(th));
    }
    out.plug.emplace_back(snap_to_node(g, target), t0, rho);
  }
  double r_ann = R - (2.0 * rho + 6.0 * g.h());
  for (int k = 0; k < n_annulus; ++k) {
    double th = 2.0 * M_PI * k / std::max(1, n_annulus);
    Vec2 target = r_ann * Vec2(std::cos(th), std::sin(th));
    out.annulus.emplace_back(snap_to_node(g, target), t0, rho);
  }
  out.holder = ParabolicCylinder(snap_to_node(g, Vec2(r0, 0.0)), t0,
                                 std::max(0.25, R - r0 - 4.0 * g.h()));
  out.moser = ParabolicCylinder(Vec2::Zero(), t0, 0.85 * R);
  return out;
}

/// Angular-to-radial variance ratio of a slice on a disk grid (symmetry
/// check).  Within each radius bin the local linear trend in r is projected
/// out, so the quantization of node radii does not count as asymmetry.
inline double angular_anisotropy(const ScalarField& u) {
  const Grid& g = *u.grid;
  require(g.shape() == Grid::Shape::disk, "angular_anisotropy: disk grids only");
  int n_bins = static_cast<int>(std::floor(g.disk_radius() / g.h()));
  std::vector<std::vector<std::pair<double, double>>> bins(n_bins);  // (r, u)
  for (int n : g.interior_nodes()) {
    int b = static_cast<int>(g.pos(n).norm() / g.h());
    if (b < n_bins) bins[b].emplace_back(g.pos(n).norm(), u.v[n]);
  }
  double within = 0.0, grand = 0.0, grand2 = 0.0;
  int bins_used = 0;
  for (const auto& bin : bins) {
    if (bin.size() < 8) continue;
    double sr = 0, su = 0, srr = 0, sru = 0;
    for (auto [r, v] : bin) { sr += r; su += v; srr += r * r; sru += r * v; }
    double k = static_cast<double>(bin.size());
    double denom = k * srr - sr * sr;
    double slope = denom > 0.0 ? (k * sru - sr * su) / denom : 0.0;
    double mean_r = sr / k, mean_u = su / k;
    double resid = 0.0;
    for (auto [r, v] : bin) resid += sq(v - mean_u - slope * (r - mean_r));
    within += resid / k;
    grand += mean_u;
    grand2 += mean_u * mean_u;
    ++bins_used;
  }
  if (bins_used < 2) return 0.0;
  double radial_var = grand2 / bins_used - sq(grand / bins_used);
  double angular_var = within / bins_used;
  return radial_var > 0.0 ? angular_var / radial_var : 0.0;
}

}  // namespace facetflow
