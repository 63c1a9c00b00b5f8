#pragma once

#include "facetflow/core.hpp"
#include "facetflow/grid.hpp"

#include <cmath>

namespace facetflow {

// ---------------------------------------------------------------------------
// Truncation maps.  Convention: whenever the scalar prefactor vanishes the
// result is the zero vector, which covers z = 0 in every admissible regime.
// ---------------------------------------------------------------------------

struct TruncationParams {
  double delta = 0.05;
  double eps = 0.0;

  void validate() const {
    require(delta > 0.0 && delta < 1.0, "truncation: delta must lie in (0,1)");
    require(eps >= 0.0 && eps < delta, "truncation: requires 0 <= eps < delta");
  }
  /// The Lipschitz bound on the doubled-level map needs eps < delta/8.
  bool lipschitz_regime() const { return eps > 0.0 && eps < delta / 8.0; }
};

/// (|z| - delta)_+ z/|z|
inline Vec2 g_delta(const Vec2& z, double delta) {
  require(delta >= 0.0, "g_delta: delta must be non-negative");
  double r = z.norm();
  double pre = positive_part(r - delta);
  if (pre == 0.0) return Vec2::Zero();
  return pre / r * z;
}

/// (sqrt(eps^2+|z|^2) - delta)_+ z/|z|; needs eps < delta so that z = 0 is
/// covered by the vanishing prefactor.
inline Vec2 g_delta_eps(const Vec2& z, double delta, double eps) {
  if (!(eps >= 0.0 && eps < delta))
    throw std::domain_error("g_delta_eps: requires 0 <= eps < delta");
  double r = z.norm();
  double pre = positive_part(std::sqrt(eps * eps + r * r) - delta);
  if (pre == 0.0) return Vec2::Zero();
  return pre / r * z;
}

/// (eps^2+|z|^2)^((p-1)/2) z, a bijection of the plane.
inline Vec2 g_p_eps(const Vec2& z, double p, double eps) {
  require(p > 1.0, "g_p_eps: p must exceed 1");
  require(eps >= 0.0, "g_p_eps: eps must be non-negative");
  double w = eps * eps + z.squaredNorm();
  return std::pow(w, 0.5 * (p - 1.0)) * z;
}

/// Inverse of g_p_eps by a safeguarded Newton iteration on the radial part.
inline Vec2 g_p_eps_inverse(const Vec2& w, double p, double eps,
                            double tol = 1e-14, int max_iter = 200) {
  double target = w.norm();
  if (target == 0.0) return Vec2::Zero();
  auto radial = [&](double s) {
    return s * std::pow(eps * eps + s * s, 0.5 * (p - 1.0));
  };
  // bracket
  double hi = std::max(1.0, std::pow(target, 1.0 / p));
  while (radial(hi) < target) hi *= 2.0;
  double lo = 0.0, s = std::min(hi, std::pow(target, 1.0 / p));
  for (int it = 0; it < max_iter; ++it) {
    double w2 = eps * eps + s * s;
    double f = s * std::pow(w2, 0.5 * (p - 1.0)) - target;
    if (f > 0.0) hi = s;
    else lo = s;
    double df = std::pow(w2, 0.5 * (p - 1.0)) *
                (1.0 + (p - 1.0) * s * s / w2);
    double step = f / df;
    double next = s - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= tol * std::max(1.0, s)) { s = next; break; }
    s = next;
  }
  return s / target * w;
}

/// Scalar soft threshold at level k.
inline double soft_threshold(double sigma, double k) {
  if (sigma > k) return sigma - k;
  if (sigma < -k) return sigma + k;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Field-level maps
// ---------------------------------------------------------------------------

/// Regularized gradient modulus V_eps = sqrt(eps^2 + |grad u|^2) per node.
struct ModulusField {
  std::shared_ptr<const Grid> grid;
  std::vector<double> v;
  double eps = 0.0;
};

inline ModulusField modulus_field(const VectorField& grad_u, double eps) {
  require(eps >= 0.0, "modulus_field: eps must be non-negative");
  ModulusField mf;
  mf.grid = grad_u.grid;
  mf.eps = eps;
  std::vector<Vec2> gn = node_gradient(grad_u);
  mf.v.resize(gn.size());
  for (size_t n = 0; n < gn.size(); ++n)
    mf.v[n] = std::sqrt(eps * eps + gn[n].squaredNorm());
  return mf;
}

inline ModulusField modulus_field_from_nodal(const std::vector<Vec2>& gn,
                                             std::shared_ptr<const Grid> grid,
                                             double eps) {
  ModulusField mf;
  mf.grid = std::move(grid);
  mf.eps = eps;
  mf.v.resize(gn.size());
  for (size_t n = 0; n < gn.size(); ++n)
    mf.v[n] = std::sqrt(eps * eps + gn[n].squaredNorm());
  return mf;
}

/// W_k = sqrt(k^2 + sum_j g_k(d_j u)^2) from nodal partial derivatives.
inline ScalarField w_k_field(const VectorField& grad_u, double k) {
  if (!(k >= 1.0)) throw std::domain_error("w_k_field: requires k >= 1");
  ScalarField out(grad_u.grid);
  std::vector<Vec2> gn = node_gradient(grad_u);
  for (size_t n = 0; n < gn.size(); ++n) {
    if (grad_u.grid->kind(static_cast<int>(n)) == NodeKind::exterior) continue;
    double vx = soft_threshold(gn[n].x(), k);
    double vy = soft_threshold(gn[n].y(), k);
    out.v[n] = std::sqrt(k * k + vx * vx + vy * vy);
  }
  return out;
}

}  // namespace facetflow
