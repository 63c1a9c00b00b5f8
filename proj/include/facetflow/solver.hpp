#pragma once

#include "facetflow/core.hpp"
#include "facetflow/density.hpp"
#include "facetflow/grid.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <functional>
#include <limits>
#include <vector>

namespace facetflow {

// ---------------------------------------------------------------------------
// Discretization: each lattice cell is split into two triangles along the
// cross diagonal and the density is evaluated at the constant per-triangle
// gradient (one x- and one y-difference).  The implicit step minimizes
//   J(u) = sum_nodes h^2 [ (u-u_old)^2/(2 dt) - f u ] + sum_T (h^2/2) E(g_T)
// whose exact gradient is the discrete weak form and whose exact Hessian is
// symmetric positive definite.  The piecewise-linear quadrature makes affine
// fields discretely caloric on arbitrary masked domains, and in the quadratic
// case the stationarity system is the standard 5-point scheme.
// ---------------------------------------------------------------------------

struct StepperConfig {
  double dt = 1e-2;
  double newton_tol = 1e-10;  // RMS of the pointwise residual
  int newton_max = 50;
  double linear_tol = 1e-10;
  double damping = 0.5;       // line-search backtracking factor
  int max_backtracks = 60;
  double armijo = 1e-4;

  void validate() const {
    require(dt > 0.0 && newton_tol > 0.0 && linear_tol > 0.0, "stepper: positive tolerances required");
    require(newton_max > 0 && max_backtracks > 0, "stepper: positive iteration caps required");
    require(damping > 0.0 && damping < 1.0, "stepper: damping must lie in (0,1)");
  }
};

struct StepStats {
  double t = 0.0;
  int newton_iters = 0;
  double energy = 0.0;    // J at the accepted iterate
  double residual = 0.0;  // RMS pointwise residual
  bool converged = false;
};


template <class Density>
class ImplicitStepper {
 public:
  ImplicitStepper(std::shared_ptr<const Grid> grid, const Density& density,
                  StepperConfig cfg)
      : grid_(std::move(grid)), density_(density), cfg_(cfg) {
    cfg_.validate();
  }

  const StepperConfig& config() const { return cfg_; }

  /// Total incremental functional J(u; u_old, dt, f).
  double energy(const ScalarField& u, const ScalarField& u_old,
                const std::vector<double>& f_nodal, double dt) const {
    const Grid& g = *grid_;
    const double h2 = g.h() * g.h();
    double node_part = 0.0;
    for (int n : g.interior_nodes()) {
      double du = u.v[n] - u_old.v[n];
      node_part += du * du / (2.0 * dt) - f_nodal[n] * u.v[n];
    }
    double energy_part = 0.0;
    for_each_triangle(u, [&](const Vec2& gvec, const int*, const Vec2*) {
      energy_part += density_.eval(gvec);
    });
    return h2 * (node_part + 0.5 * energy_part);
  }

  /// One damped Newton step sequence solving the implicit minimization.
  /// `u` enters with the Dirichlet values of the new time level already
  /// written on non-interior nodes and is replaced by the minimizer.
  StepStats step(ScalarField& u, const ScalarField& u_old,
                 const std::vector<double>& f_nodal, double dt) {
    const Grid& g = *grid_;
    const int n_unknown = g.n_interior();
    const double h2 = g.h() * g.h();
    StepStats stats;

    Eigen::VectorXd r(n_unknown), d(n_unknown);
    double J = energy(u, u_old, f_nodal, dt);

    for (int it = 0; it <= cfg_.newton_max; ++it) {
      residual(u, u_old, f_nodal, dt, r);
      stats.residual = std::sqrt(r.squaredNorm() / std::max(1, n_unknown));
      stats.energy = J;
      if (stats.residual <= cfg_.newton_tol) {
        stats.newton_iters = it;
        stats.converged = true;
        return stats;
      }
      if (it == cfg_.newton_max) break;

      assemble_hessian(u, dt);
      if (!factorized_pattern_) {
        solver_.analyzePattern(H_);
        factorized_pattern_ = true;
      }
      bool reuse = density_.constant_hessian() && have_numeric_ && dt == numeric_dt_;
      if (!reuse) {
        solver_.factorize(H_);
        if (solver_.info() != Eigen::Success)
          throw std::runtime_error("newton_step: sparse factorization failed");
        have_numeric_ = true;
        numeric_dt_ = dt;
      }
      d = solver_.solve(-r);
      double relres = (H_ * d + r).norm() / std::max(r.norm(), 1e-300);
      if (relres > std::max(cfg_.linear_tol, 1e-8))
        throw std::runtime_error("newton_step: linear solve stagnation, relative residual " +
                                 std::to_string(relres));

      double slope = h2 * r.dot(d);  // <grad J, d> in physical units
      double alpha = 1.0;
      int bt = 0;
      ScalarField trial = u;
      // once the predicted decrease drops below the evaluation noise of J the
      // Armijo comparison is meaningless; accept within that noise
      const double j_noise = 1e-13 * (1.0 + std::abs(J));
      for (;; ++bt) {
        apply_update(trial, u, d, alpha);
        double J_trial = energy(trial, u_old, f_nodal, dt);
        if (J_trial <= J + cfg_.armijo * alpha * slope + j_noise) {
          J = J_trial;
          break;
        }
        if (bt >= cfg_.max_backtracks)
          throw std::runtime_error("newton_step: line search exhausted (J = " +
                                   std::to_string(J) + ", trial = " +
                                   std::to_string(J_trial) + ")");
        alpha *= cfg_.damping;
      }
      u = trial;
    }
    stats.newton_iters = cfg_.newton_max;
    stats.converged = false;
    return stats;
  }

  /// Pointwise residual of the discrete weak form (gradient of J / h^2).
  void residual(const ScalarField& u, const ScalarField& u_old,
                const std::vector<double>& f_nodal, double dt,
                Eigen::VectorXd& r) const {
    const Grid& g = *grid_;
    r.setZero(g.n_interior());
    for (int n : g.interior_nodes())
      r[g.unknown(n)] = (u.v[n] - u_old.v[n]) / dt - f_nodal[n];
    for_each_triangle(u, [&](const Vec2& gvec, const int* nodes, const Vec2* dcol) {
      Vec2 de = density_.grad(gvec);
      for (int a = 0; a < 3; ++a)
        if (int q = g.unknown(nodes[a]); q >= 0) r[q] += 0.5 * de.dot(dcol[a]);
    });
  }

 private:
  // Two triangles per cell, the split diagonal alternating with cell parity
  // so the nonlinear quadrature carries no preferred direction; a triangle is
  // present when its three vertices are non-exterior.  Calls fn with the
  // constant gradient, the vertex node ids, and d(gradient)/d(u_vertex).
  template <class Fn>
  void for_each_triangle(const ScalarField& u, Fn&& fn) const {
    const Grid& g = *grid_;
    const double inv_h = 1.0 / g.h();
    for (int j = 0; j + 1 < g.ny(); ++j)
      for (int i = 0; i + 1 < g.nx(); ++i) {
        const int a = g.idx(i, j), b = g.idx(i + 1, j), c = g.idx(i, j + 1),
                  d = g.idx(i + 1, j + 1);
        const bool A = g.active(i, j), B = g.active(i + 1, j),
                   C = g.active(i, j + 1), D = g.active(i + 1, j + 1);
        if ((i + j) % 2 == 0) {
          if (A && B && C) {
            int nodes[3] = {a, b, c};
            Vec2 dcol[3] = {Vec2(-inv_h, -inv_h), Vec2(inv_h, 0.0), Vec2(0.0, inv_h)};
            fn(Vec2((u.v[b] - u.v[a]) * inv_h, (u.v[c] - u.v[a]) * inv_h), nodes, dcol);
          }
          if (D && B && C) {
            int nodes[3] = {d, c, b};
            Vec2 dcol[3] = {Vec2(inv_h, inv_h), Vec2(-inv_h, 0.0), Vec2(0.0, -inv_h)};
            fn(Vec2((u.v[d] - u.v[c]) * inv_h, (u.v[d] - u.v[b]) * inv_h), nodes, dcol);
          }
        } else {
          if (A && B && D) {
            int nodes[3] = {a, b, d};
            Vec2 dcol[3] = {Vec2(-inv_h, 0.0), Vec2(inv_h, -inv_h), Vec2(0.0, inv_h)};
            fn(Vec2((u.v[b] - u.v[a]) * inv_h, (u.v[d] - u.v[b]) * inv_h), nodes, dcol);
          }
          if (A && D && C) {
            int nodes[3] = {a, d, c};
            Vec2 dcol[3] = {Vec2(0.0, -inv_h), Vec2(inv_h, 0.0), Vec2(-inv_h, inv_h)};
            fn(Vec2((u.v[d] - u.v[c]) * inv_h, (u.v[c] - u.v[a]) * inv_h), nodes, dcol);
          }
        }
      }
  }

  void assemble_hessian(const ScalarField& u, double dt) {
    const Grid& g = *grid_;
    triplets_.clear();
    for (int n : g.interior_nodes())
      triplets_.emplace_back(g.unknown(n), g.unknown(n), 1.0 / dt);
    for_each_triangle(u, [&](const Vec2& gvec, const int* nodes, const Vec2* dcol) {
      Mat2 he = density_.hess(gvec);
      for (int a = 0; a < 3; ++a) {
        int qa = g.unknown(nodes[a]);
        if (qa < 0) continue;
        for (int b = 0; b < 3; ++b) {
          int qb = g.unknown(nodes[b]);
          if (qb < 0) continue;
          triplets_.emplace_back(qa, qb, 0.5 * dcol[a].dot(he * dcol[b]));
        }
      }
    });
    H_.resize(g.n_interior(), g.n_interior());
    H_.setFromTriplets(triplets_.begin(), triplets_.end());
  }

  void apply_update(ScalarField& trial, const ScalarField& base,
                    const Eigen::VectorXd& d, double alpha) const {
    const Grid& g = *grid_;
    trial.v = base.v;
    for (int n : g.interior_nodes()) trial.v[n] = base.v[n] + alpha * d[g.unknown(n)];
  }

  std::shared_ptr<const Grid> grid_;
  Density density_;
  StepperConfig cfg_;
  Eigen::SparseMatrix<double> H_;
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool factorized_pattern_ = false;
  bool have_numeric_ = false;
  double numeric_dt_ = -1.0;
};

/// Incremental functional of one implicit step (spec-level entry point).
template <class Density>
double incremental_energy(const ScalarField& u_new, const ScalarField& u_old,
                          double dt, const std::vector<double>& f_nodal,
                          const Density& density) {
  ImplicitStepper<Density> stepper(u_new.grid, density, StepperConfig{});
  return stepper.energy(u_new, u_old, f_nodal, dt);
}

// ---------------------------------------------------------------------------
// Initial boundary value problem
// ---------------------------------------------------------------------------

using SpaceTimeFn = std::function<double(double, double, double)>;

struct ProblemSpec {
  std::shared_ptr<const Grid> grid;
  DensityParams density;
  double eps = 0.1;
  DensityMode mode = DensityMode::surrogate;
  double T = 1.0;
  SpaceTimeFn f;       // forcing f(x, y, t); null means 0
  SpaceTimeFn u_star;  // boundary + initial data; null means 0
  double forcing_q = std::numeric_limits<double>::infinity();

  void validate() const {
    require(grid != nullptr, "problem: grid required");
    density.validate();
    require(density.bp > 0.0, "problem: bp must be positive");
    require(eps >= 0.0 && eps < 1.0, "problem: eps must lie in [0,1)");
    if (eps == 0.0)
      require(density.b1 == 0.0 && density.p >= 2.0,
              "problem: eps = 0 requires b1 = 0 and p >= 2");
    require(T > 0.0, "problem: horizon must be positive");
    require(forcing_q > 4.0, "problem: forcing integrability q must exceed n+2 = 4");
  }

  double eval_f(double x, double y, double t) const { return f ? f(x, y, t) : 0.0; }
  double eval_u_star(double x, double y, double t) const {
    return u_star ? u_star(x, y, t) : 0.0;
  }
};

struct SolveResult {
  TimeSlab slab;
  std::vector<StepStats> steps;
};

namespace detail {

inline void fill_boundary(ScalarField& u, const ProblemSpec& spec, double t) {
  const Grid& g = *u.grid;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.kind(i, j) == NodeKind::boundary) {
        Vec2 x = g.pos(i, j);
        u(i, j) = spec.eval_u_star(x.x(), x.y(), t);
      }
}

inline std::vector<double> forcing_at(const ProblemSpec& spec, double t) {
  const Grid& g = *spec.grid;
  std::vector<double> f(g.n_nodes(), 0.0);
  for (int n : g.interior_nodes()) {
    Vec2 x = g.pos(n);
    f[n] = spec.eval_f(x.x(), x.y(), t);
  }
  return f;
}

}  // namespace detail

/// Backward-Euler march over [0, T] with fixed dt.
inline SolveResult run(const ProblemSpec& spec, const StepperConfig& cfg) {
  spec.validate();
  cfg.validate();
  require(cfg.dt <= spec.T, "run: dt must not exceed the horizon");
  MollifiedDensity density = spec.mode == DensityMode::surrogate
                                 ? MollifiedDensity::surrogate(spec.density, spec.eps)
                                 : MollifiedDensity::quadrature(spec.density, spec.eps);
  const Grid& g = *spec.grid;

  ScalarField u(spec.grid);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      if (g.active(i, j)) {
        Vec2 x = g.pos(i, j);
        u(i, j) = spec.eval_u_star(x.x(), x.y(), 0.0);
      }

  SolveResult result;
  result.slab = TimeSlab(spec.grid);
  result.slab.append(0.0, u);

  ImplicitStepper<MollifiedDensity> stepper(spec.grid, density, cfg);
  ScalarField u_old = u;
  double t = 0.0;
  int step_index = 0;
  while (t < spec.T - 1e-12 * spec.T) {
    double dt = std::min(cfg.dt, spec.T - t);
    double t_new = t + dt;
    detail::fill_boundary(u, spec, t_new);
    std::vector<double> f_nodal = detail::forcing_at(spec, t_new);
    StepStats stats;
    try {
      stats = stepper.step(u, u_old, f_nodal, dt);
    } catch (const std::exception& e) {
      throw std::runtime_error("run: step " + std::to_string(step_index) +
                               " (t = " + std::to_string(t_new) + ") failed: " + e.what());
    }
    if (!stats.converged)
      throw std::runtime_error("run: step " + std::to_string(step_index) +
                               " did not converge (residual " +
                               std::to_string(stats.residual) + ")");
    stats.t = t_new;
    result.steps.push_back(stats);
    result.slab.append(t_new, u);
    u_old = u;
    t = t_new;
    ++step_index;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Frozen-coefficient Dirichlet heat flow on the half cylinder Q_{rho/2},
// with constant coefficient A = hess E_eps((grad u)_rho).
// ---------------------------------------------------------------------------

struct FrozenFlowResult {
  TimeSlab local;                // v on the local grid
  std::shared_ptr<const Grid> local_grid;
  std::vector<int> parent_node;  // local node -> parent node index
  int first_parent_slice = 0;    // parent slice matching local slice 0
  Mat2 coefficient = Mat2::Identity();
  Vec2 average_gradient = Vec2::Zero();
};

namespace detail {

/// Lattice-aligned disk sub-grid of `parent` around `center` with radius r.
inline std::shared_ptr<Grid> make_sub_disk(const Grid& parent, const Vec2& center,
                                           double r, std::vector<int>& parent_node);

}  // namespace detail

inline FrozenFlowResult solve_frozen_heat_flow(const TimeSlab& slab,
                                               const ParabolicCylinder& q,
                                               const MollifiedDensity& density,
                                               double delta, double mu,
                                               StepperConfig cfg = {}) {
  Vec2 avg = cylinder_mean_gradient(slab, q);
  if (avg.norm() < delta + 0.25 * mu)
    throw std::domain_error("frozen heat flow: degenerate average gradient |xi| = " +
                            std::to_string(avg.norm()) + " < delta + mu/4 = " +
                            std::to_string(delta + 0.25 * mu));
  Mat2 a = density.hess(avg);
  double lo, hi;
  sym_eig2(a, lo, hi);
  if (!(lo > 0.0))
    throw std::domain_error("frozen heat flow: coefficient not positive definite");

  const Grid& parent = *slab.grid();
  FrozenFlowResult out;
  out.coefficient = a;
  out.average_gradient = avg;
  std::shared_ptr<Grid> local = detail::make_sub_disk(parent, q.center, 0.5 * q.r,
                                                      out.parent_node);
  out.local_grid = local;

  // parent slices covering (t0 - r^2/4, t0]
  const double t_start = q.t0 - 0.25 * q.r * q.r;
  const double t_eps = 1e-12 * std::max(1.0, std::abs(q.t0));
  int m0 = -1, m1 = -1;
  for (int m = 0; m < slab.n_slices(); ++m) {
    if (slab.time(m) <= t_start + t_eps) m0 = m;
    if (slab.time(m) <= q.t0 + t_eps) m1 = m;
  }
  if (m0 < 0 || m1 <= m0)
    throw std::domain_error("frozen heat flow: slab does not cover the cylinder in time");
  out.first_parent_slice = m0;

  auto restrict_slice = [&](int m) {
    ScalarField v(local);
    const ScalarField& u = slab.slice(m);
    for (int n = 0; n < local->n_nodes(); ++n)
      if (local->kind(n) != NodeKind::exterior) v.v[n] = u.v[out.parent_node[n]];
    return v;
  };

  QuadraticDensity qd{a};
  ImplicitStepper<QuadraticDensity> stepper(local, qd, cfg);
  std::vector<double> zero_f(local->n_nodes(), 0.0);

  ScalarField v = restrict_slice(m0);
  out.local = TimeSlab(local);
  out.local.append(slab.time(m0), v);
  for (int m = m0 + 1; m <= m1; ++m) {
    double dt = slab.time(m) - slab.time(m - 1);
    ScalarField bc = restrict_slice(m);
    ScalarField v_new = v;
    for (int n = 0; n < local->n_nodes(); ++n)
      if (local->kind(n) == NodeKind::boundary) v_new.v[n] = bc.v[n];
    StepStats stats = stepper.step(v_new, v, zero_f, dt);
    if (!stats.converged)
      throw std::runtime_error("frozen heat flow: step did not converge");
    out.local.append(slab.time(m), v_new);
    v = v_new;
  }
  return out;
}

namespace detail {

inline std::shared_ptr<Grid> make_sub_disk(const Grid& parent, const Vec2& center,
                                           double r, std::vector<int>& parent_node) {
  const double h = parent.h();
  const Vec2& po = parent.origin();
  int i_lo = static_cast<int>(std::floor((center.x() - r - po.x()) / h)) - 1;
  int i_hi = static_cast<int>(std::ceil((center.x() + r - po.x()) / h)) + 1;
  int j_lo = static_cast<int>(std::floor((center.y() - r - po.y()) / h)) - 1;
  int j_hi = static_cast<int>(std::ceil((center.y() + r - po.y()) / h)) + 1;
  require(i_lo >= 0 && j_lo >= 0 && i_hi < parent.nx() && j_hi < parent.ny(),
          "frozen heat flow: cylinder leaves the parent grid");

  int nx = i_hi - i_lo + 1, ny = j_hi - j_lo + 1;
  std::vector<NodeKind> kind(static_cast<size_t>(nx) * ny, NodeKind::exterior);
  auto lidx = [nx](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Vec2 x = po + Vec2((i_lo + i) * h, (j_lo + j) * h);
      if ((x - center).norm() < r) {
        require(parent.kind(i_lo + i, j_lo + j) == NodeKind::interior,
                "frozen heat flow: cylinder touches the domain boundary");
        kind[lidx(i, j)] = NodeKind::interior;
      }
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (kind[lidx(i, j)] != NodeKind::exterior) continue;
      bool near = false;
      for (int dj = -1; dj <= 1 && !near; ++dj)
        for (int di = -1; di <= 1 && !near; ++di) {
          int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
          if (kind[lidx(ii, jj)] == NodeKind::interior) near = true;
        }
      if (near) {
        require(parent.active(i_lo + i, j_lo + j),
                "frozen heat flow: Dirichlet ring touches exterior nodes");
        kind[lidx(i, j)] = NodeKind::boundary;
      }
    }

  std::shared_ptr<Grid> local = Grid::masked(nx, ny, h,
                                             po + Vec2(i_lo * h, j_lo * h),
                                             std::move(kind));
  parent_node.resize(local->n_nodes());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      parent_node[local->idx(i, j)] = parent.idx(i_lo + i, j_lo + j);
  return local;
}

}  // namespace detail

}  // namespace facetflow
