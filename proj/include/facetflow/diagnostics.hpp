#pragma once

#include "facetflow/core.hpp"
#include "facetflow/density.hpp"
#include "facetflow/grid.hpp"
#include "facetflow/solver.hpp"
#include "facetflow/truncation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace facetflow {

// ---------------------------------------------------------------------------
// Pointwise fields derived from one slab slice
// ---------------------------------------------------------------------------

inline double modulus_at(const TimeSlab& slab, int m, int node, double eps) {
  return std::sqrt(eps * eps + slab.nodal_gradient(m)[node].squaredNorm());
}

/// (V_eps - delta)_+^2 per node.
inline ScalarField u_delta_eps_field(const TimeSlab& slab, int m, double delta,
                                     double eps) {
  const Grid& g = *slab.grid();
  ScalarField out(slab.grid());
  for (int n = 0; n < g.n_nodes(); ++n) {
    if (g.kind(n) == NodeKind::exterior) continue;
    out.v[n] = sq(positive_part(modulus_at(slab, m, n, eps) - delta));
  }
  return out;
}

/// Mask of {V_eps <= delta} with 4-connected component labels and areas.
struct FacetMask {
  std::shared_ptr<const Grid> grid;
  std::vector<std::uint8_t> mask;       // 1 on the facet, non-exterior nodes only
  std::vector<int> component;           // component id or -1
  std::vector<double> component_area;   // h^2 * node count per component
  int n_components = 0;
  bool empty() const { return n_components == 0; }
};

inline FacetMask facet_mask(const TimeSlab& slab, int m, double delta, double eps) {
  const Grid& g = *slab.grid();
  FacetMask fm;
  fm.grid = slab.grid();
  fm.mask.assign(g.n_nodes(), 0);
  fm.component.assign(g.n_nodes(), -1);
  for (int n = 0; n < g.n_nodes(); ++n)
    if (g.kind(n) != NodeKind::exterior && modulus_at(slab, m, n, eps) <= delta)
      fm.mask[n] = 1;
  std::vector<int> stack;
  for (int seed = 0; seed < g.n_nodes(); ++seed) {
    if (!fm.mask[seed] || fm.component[seed] >= 0) continue;
    int id = fm.n_components++;
    int count = 0;
    stack.assign(1, seed);
    fm.component[seed] = id;
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      ++count;
      int i = n % g.nx(), j = n / g.nx();
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        int ii = i + di[k], jj = j + dj[k];
        if (ii < 0 || jj < 0 || ii >= g.nx() || jj >= g.ny()) continue;
        int nn = g.idx(ii, jj);
        if (fm.mask[nn] && fm.component[nn] < 0) {
          fm.component[nn] = id;
          stack.push_back(nn);
        }
      }
    }
    fm.component_area.push_back(count * g.h() * g.h());
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Cylinder statistics: superlevel sets and the degenerate/non-degenerate split
// ---------------------------------------------------------------------------

/// sup over the cylinder of (V_eps - delta)_+ (at least one sample required).
inline double sup_truncated_modulus(const TimeSlab& slab, const ParabolicCylinder& q,
                                    double delta, double eps) {
  CylinderIndex ix = cylinder_nodes(slab, q);
  if (ix.empty())
    throw std::domain_error("sup_truncated_modulus: empty cylinder (" +
                            std::to_string(ix.nodes.size()) + " nodes, " +
                            std::to_string(ix.slices.size()) + " slices)");
  double sup = 0.0;
  for (int m : ix.slices)
    for (int n : ix.nodes)
      sup = std::max(sup, positive_part(modulus_at(slab, m, n, eps) - delta));
  return sup;
}

/// Fraction of cylinder samples with V_eps - delta > (1-nu) mu.
inline double superlevel_ratio(const TimeSlab& slab, const ParabolicCylinder& q,
                               double delta, double eps, double mu, double nu) {
  require(mu > 0.0, "superlevel_ratio: mu must be positive");
  CylinderIndex ix = cylinder_nodes(slab, q);
  if (ix.empty())
    throw std::domain_error("superlevel_ratio: empty cylinder");
  const double threshold = delta + (1.0 - nu) * mu;
  std::size_t hits = 0;
  for (int m : ix.slices)
    for (int n : ix.nodes)
      if (modulus_at(slab, m, n, eps) > threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ix.n_samples());
}

enum class Branch { degenerate, nondegenerate };

struct CylinderStats {
  ParabolicCylinder q;
  double mu = 0.0;       // sup of (V_eps - delta)_+ over the doubled cylinder
  double nu = 0.125;
  double ratio_S = 0.0;  // |S_{rho,mu,nu}| / |Q_rho|
  bool flat = false;     // mu <= delta: the doubled-level truncation vanishes
  Branch branch = Branch::degenerate;
  double kappa_hat = 0.0;  // degenerate branch: sup over the shrunken cylinder / mu
};

/// sup of (V_eps-delta)_+ over Q_{sqrt(nu) rho / 3} together with the
/// contraction factor kappa_hat; refuses on the non-degenerate branch.
inline std::pair<double, double> degiorgi_sup_decay(const TimeSlab& slab,
                                                    const ParabolicCylinder& q,
                                                    double delta, double eps,
                                                    double mu, double nu) {
  if (mu > 0.0) {
    double ratio = superlevel_ratio(slab, q, delta, eps, mu, nu);
    if (ratio > 1.0 - nu)
      throw std::domain_error("degiorgi_sup_decay: cylinder is on the non-degenerate branch");
  }
  ParabolicCylinder inner(q.center, q.t0, std::sqrt(nu) * q.r / 3.0);
  CylinderIndex ix = cylinder_nodes(slab, inner);
  if (ix.empty())
    throw std::domain_error("degiorgi_sup_decay: inner cylinder empty");
  double sup = 0.0;
  for (int m : ix.slices)
    for (int n : ix.nodes)
      sup = std::max(sup, positive_part(modulus_at(slab, m, n, eps) - delta));
  return {sup, mu > 0.0 ? sup / mu : 0.0};
}

inline CylinderStats classify_branch(const TimeSlab& slab, const ParabolicCylinder& q,
                                     double delta, double eps, double nu) {
  require(nu > 0.0 && nu < 0.25, "classify_branch: nu must lie in (0, 1/4)");
  CylinderStats st;
  st.q = q;
  st.nu = nu;
  st.mu = sup_truncated_modulus(slab, q.scaled(2.0), delta, eps);
  st.flat = (st.mu <= delta);
  st.ratio_S = st.mu > 0.0 ? superlevel_ratio(slab, q, delta, eps, st.mu, nu) : 0.0;
  st.branch = st.ratio_S > 1.0 - nu ? Branch::nondegenerate : Branch::degenerate;
  if (st.branch == Branch::degenerate)
    st.kappa_hat = degiorgi_sup_decay(slab, q, delta, eps, st.mu, nu).second;
  return st;
}

// ---------------------------------------------------------------------------
// Oscillation energy
// ---------------------------------------------------------------------------

/// Phi(r) = mean over Q_r of |grad u - (grad u)_r|^2 (minimizing mean).
inline double oscillation_energy(const TimeSlab& slab, const ParabolicCylinder& q) {
  Vec2 mean = cylinder_mean_gradient(slab, q);
  return cylinder_average(slab, q, [&](int n, int m) {
    return (slab.nodal_gradient(m)[n] - mean).squaredNorm();
  });
}

struct OscillationReport {
  Vec2 center = Vec2::Zero();
  double t0 = 0.0;
  std::vector<double> radii;
  std::vector<double> phi;
  double fitted_slope = 0.0;  // log-log slope of Phi(r) vs r
};

inline OscillationReport oscillation_decay(const TimeSlab& slab, const Vec2& center,
                                           double t0, std::vector<double> radii) {
  require(!radii.empty(), "oscillation_decay: need at least one radius");
  OscillationReport rep;
  rep.center = center;
  rep.t0 = t0;
  std::sort(radii.begin(), radii.end(), std::greater<double>());
  for (double r : radii) {
    rep.radii.push_back(r);
    rep.phi.push_back(oscillation_energy(slab, ParabolicCylinder(center, t0, r)));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (size_t i = 0; i < rep.radii.size(); ++i) {
    if (rep.phi[i] <= 0.0) continue;
    double lx = std::log(rep.radii[i]), ly = std::log(rep.phi[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    ++k;
  }
  if (k >= 2) rep.fitted_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return rep;
}

// ---------------------------------------------------------------------------
// Moser-bound functionals
// ---------------------------------------------------------------------------

struct MoserExponents {
  double d = 1.0, d1 = 2.0, d2 = 1.0;
};

/// Exponents of the local sup bound for n = 2, per the p >= 2 / p < 2 split.
inline MoserExponents moser_exponents(double p, double q, double sigma) {
  require(p > 1.0, "moser_exponents: p must exceed 1 (= 2n/(n+2) for n = 2)");
  require(q > 4.0, "moser_exponents: q must exceed n + 2 = 4");
  if (std::isfinite(q)) require(sigma > 2.0 && sigma < q / 2.0,
                                "moser_exponents: sigma must lie in (2, q/2)");
  else require(sigma > 2.0, "moser_exponents: sigma must exceed 2");
  MoserExponents e;
  if (p >= 2.0) {
    e.d = 0.5 * p;
    e.d1 = 2.0;
  } else {
    e.d = 2.0 * p / (p * 4.0 - 4.0);
    e.d1 = p / (p - 1.0);
  }
  e.d2 = 2.0 * e.d * sigma / p;  // n = 2 branch
  return e;
}

struct MoserReport {
  MoserExponents exponents;
  double theta = 0.5;
  double sup_inner = 0.0;   // sup of V_eps over Q_{theta R}
  double f_norm = 0.0;      // ||f||_{L^q(Q_R)}
  double mean_vp = 0.0;     // mean of V_eps^p over Q_R
  double rhs_core = 0.0;
  double ratio = 0.0;       // sup_inner / rhs_core, the unknown constant C
};

inline MoserReport moser_report(const TimeSlab& slab, const ParabolicCylinder& qR,
                                double theta, double p, double q, double sigma,
                                const SpaceTimeFn& f, double eps) {
  require(theta > 0.0 && theta < 1.0, "moser_report: theta must lie in (0,1)");
  MoserReport rep;
  rep.exponents = moser_exponents(p, q, sigma);
  rep.theta = theta;

  CylinderIndex ix = cylinder_nodes(slab, qR);
  if (ix.nodes.size() < 4 || ix.slices.size() < 2)
    throw std::domain_error("moser_report: outer cylinder too small");
  const Grid& g = *slab.grid();
  double h2 = g.h() * g.h();
  double vol = 0.0, fq = 0.0, fmax = 0.0, vp = 0.0;
  for (size_t si = 0; si < ix.slices.size(); ++si) {
    int m = ix.slices[si];
    double dt = m > 0 ? slab.time(m) - slab.time(m - 1) : 0.0;
    if (si == 0 || dt <= 0.0) dt = slab.time(ix.slices[1]) - slab.time(ix.slices[0]);
    for (int n : ix.nodes) {
      Vec2 x = g.pos(n);
      double fv = f ? std::abs(f(x.x(), x.y(), slab.time(m))) : 0.0;
      fmax = std::max(fmax, fv);
      if (std::isfinite(q)) fq += std::pow(fv, q) * h2 * dt;
      vol += h2 * dt;
      vp += std::pow(modulus_at(slab, m, n, eps), p) * h2 * dt;
    }
  }
  rep.f_norm = std::isfinite(q) ? std::pow(fq, 1.0 / q) : fmax;
  rep.mean_vp = vp / vol;

  ParabolicCylinder q_in(qR.center, qR.t0, theta * qR.r);
  rep.sup_inner = 0.0;
  CylinderIndex in = cylinder_nodes(slab, q_in);
  if (in.empty()) throw std::domain_error("moser_report: inner cylinder empty");
  for (int m : in.slices)
    for (int n : in.nodes) rep.sup_inner = std::max(rep.sup_inner, modulus_at(slab, m, n, eps));

  rep.rhs_core = std::pow(1.0 + std::pow(rep.f_norm, rep.exponents.d1) + rep.mean_vp,
                          rep.exponents.d / p) /
                 std::pow(1.0 - theta, rep.exponents.d2);
  rep.ratio = rep.sup_inner / rep.rhs_core;
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical Hoelder modulus of a space-time field over a cylinder
// ---------------------------------------------------------------------------

struct HolderEstimate {
  double alpha_hat = 0.0;
  double c_hat = 0.0;
  double residual = 0.0;  // RMS residual of the log-log fit
  int n_pairs = 0;        // pairs accepted into the distance window
  int n_bins = 0;
  bool flat = false;      // every sampled oscillation below 1e-14
  std::uint64_t seed = 0;
  std::vector<double> bin_d, bin_osc;  // per-bin (distance, max oscillation)
};

/// Least-squares fit of log(max |G(X1)-G(X2)|) against log d_p over
/// log-spaced distance bins in [4h, rho/4].  The per-bin maximum estimates
/// the modulus of continuity, which is what the exponent describes; half the
/// pairs are anchored at the extreme field values, where the modulus is
/// realized, the rest are uniform.
template <class FieldFn>
HolderEstimate holder_fit(const TimeSlab& slab, const ParabolicCylinder& q,
                          FieldFn&& field, int n_pairs, std::uint64_t seed) {
  require(n_pairs >= 100, "holder_fit: need at least 100 pairs");
  const Grid& g = *slab.grid();
  const double d_min = 4.0 * g.h(), d_max = q.r / 4.0;
  require(d_max > d_min, "holder_fit: cylinder too small for the distance window");

  CylinderIndex ix = cylinder_nodes(slab, q);
  std::vector<int> nodes;
  for (int n : ix.nodes)
    if (g.kind(n) == NodeKind::interior) nodes.push_back(n);
  if (nodes.size() < 8 || ix.slices.size() < 1)
    throw std::domain_error("holder_fit: cylinder too small");

  struct Sample {
    int node, slice;
    double mag;
  };
  std::vector<Sample> samples;
  samples.reserve(nodes.size() * ix.slices.size());
  for (int m : ix.slices)
    for (int n : nodes) samples.push_back({n, m, field(n, m).norm()});

  // anchors: extreme |G| samples, most extreme first (the modulus of
  // continuity is realized near the field extremes)
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const size_t k_extreme = std::min<size_t>(64, samples.size() / 4);
  std::partial_sort(order.begin(), order.begin() + k_extreme, order.end(),
                    [&](size_t a, size_t b) { return samples[a].mag < samples[b].mag; });
  std::vector<size_t> anchors_lo(order.begin(), order.begin() + k_extreme);
  std::partial_sort(order.begin(), order.begin() + k_extreme, order.end(),
                    [&](size_t a, size_t b) { return samples[a].mag > samples[b].mag; });
  std::vector<size_t> anchors_hi(order.begin(), order.begin() + k_extreme);

  HolderEstimate est;
  est.seed = seed;
  const int n_bins = 12;
  std::vector<double> bin_max(n_bins, 0.0), bin_logd(n_bins, 0.0);
  std::vector<int> bin_count(n_bins, 0);
  const double log_lo = std::log(d_min), log_hi = std::log(d_max);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto pick_anchor = [&]() -> const Sample& {
    const auto& list = uni(rng) < 0.5 ? anchors_lo : anchors_hi;
    double u = uni(rng);
    return samples[list[static_cast<size_t>(u * u * list.size())]];
  };

  int accepted = 0;
  long attempts = 0;
  const long max_attempts = 400L * n_pairs;
  double global_max = 0.0;
  while (accepted < n_pairs && attempts < max_attempts) {
    ++attempts;
    const Sample& sa = (attempts % 3 != 0) ? pick_anchor() : samples[pick(rng)];
    const Sample& sb = samples[pick(rng)];
    double d = d_p(g.pos(sa.node), slab.time(sa.slice), g.pos(sb.node),
                   slab.time(sb.slice));
    if (d < d_min || d > d_max) continue;
    ++accepted;
    double osc = (field(sa.node, sa.slice) - field(sb.node, sb.slice)).norm();
    global_max = std::max(global_max, osc);
    int bin = std::min(n_bins - 1,
                       static_cast<int>(n_bins * (std::log(d) - log_lo) /
                                        (log_hi - log_lo)));
    if (osc > bin_max[bin]) {
      bin_max[bin] = osc;
      bin_logd[bin] = std::log(d);
    }
    ++bin_count[bin];
  }
  est.n_pairs = accepted;
  if (global_max < 1e-14) {
    est.flat = true;
    return est;
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int k = 0;
  for (int b = 0; b < n_bins; ++b) {
    if (bin_count[b] < 5 || bin_max[b] < 1e-14) continue;
    est.bin_d.push_back(std::exp(bin_logd[b]));
    est.bin_osc.push_back(bin_max[b]);
    double lx = bin_logd[b], ly = std::log(bin_max[b]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    ++k;
  }
  est.n_bins = k;
  if (k < 4) throw std::runtime_error("holder_fit: too few populated distance bins");
  double denom = k * sxx - sx * sx;
  est.alpha_hat = (k * sxy - sx * sy) / denom;
  double intercept = (sy - est.alpha_hat * sx) / k;
  est.c_hat = std::exp(intercept);
  double ss = 0.0;
  for (size_t i = 0; i < est.bin_d.size(); ++i) {
    double pred = intercept + est.alpha_hat * std::log(est.bin_d[i]);
    ss += sq(std::log(est.bin_osc[i]) - pred);
  }
  est.residual = std::sqrt(ss / k);
  return est;
}

/// Convenience: fit the truncated gradient G_{2 delta, eps}(grad u).
inline HolderEstimate holder_fit_truncated_gradient(const TimeSlab& slab,
                                                    const ParabolicCylinder& q,
                                                    double delta, double eps,
                                                    int n_pairs, std::uint64_t seed) {
  return holder_fit(slab, q,
                    [&](int n, int m) {
                      return g_delta_eps(slab.nodal_gradient(m)[n], 2.0 * delta, eps);
                    },
                    n_pairs, seed);
}

// ---------------------------------------------------------------------------
// Subgradient witness Z = grad E_{1,eps}(grad u)
// ---------------------------------------------------------------------------

struct SubgradientWitness {
  std::vector<Vec2> z;  // nodal, zero on non-interior nodes
  double max_abs_over_b1 = 0.0;
  double worst_alignment = 1.0;  // min of <Z, grad u> / (b1 |grad u|) on {V > 2 delta}
  double fitted_c = 0.0;         // (1 - alignment) delta^2 / eps^2, worst case
  int n_checked = 0;
};

inline SubgradientWitness subgradient_witness(const TimeSlab& slab, int m,
                                              const MollifiedDensity& density,
                                              double delta) {
  require(density.params().b1 > 0.0, "subgradient_witness: requires b1 > 0");
  const Grid& g = *slab.grid();
  const double b1 = density.params().b1;
  const double eps = density.eps();
  SubgradientWitness w;
  w.z.assign(g.n_nodes(), Vec2::Zero());
  const auto& gn = slab.nodal_gradient(m);
  for (int n : g.interior_nodes()) {
    Vec2 z = density.e1_grad(gn[n]);
    w.z[n] = z;
    w.max_abs_over_b1 = std::max(w.max_abs_over_b1, z.norm() / b1);
    double v = std::sqrt(eps * eps + gn[n].squaredNorm());
    if (v > 2.0 * delta) {
      double gnorm = gn[n].norm();
      if (gnorm > 0.0) {
        double align = z.dot(gn[n]) / (b1 * gnorm);
        w.worst_alignment = std::min(w.worst_alignment, align);
        if (eps > 0.0)
          w.fitted_c = std::max(w.fitted_c, (1.0 - align) * delta * delta / (eps * eps));
        ++w.n_checked;
      }
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Comparison with the frozen-coefficient heat flow
// ---------------------------------------------------------------------------

struct ComparisonReport {
  double comparison_error = 0.0;  // mean over Q_{rho/2} of |grad u - grad v|^2
  double phi_rho = 0.0;           // oscillation energy of u at radius rho
  double beta = 0.5;
  double f_term = 0.0;            // F^2 rho^(2 beta)
  double mu = 0.0;
  Vec2 average_gradient = Vec2::Zero();
  Mat2 coefficient = Mat2::Identity();
  std::vector<double> v_decay_sigma;  // heat-flow oscillation decay of v
  std::vector<double> v_decay_ratio;  // Phi_v(sigma rho) / Phi_v(rho/2)
};

inline double holder_beta(double q, double beta0) {
  if (std::isfinite(q)) {
    require(q > 4.0, "beta: q must exceed n + 2 = 4");
    return 1.0 - 4.0 / q;
  }
  require(beta0 > 0.0 && beta0 < 1.0, "beta: beta0 must lie in (0,1)");
  return beta0;
}

inline ComparisonReport comparison_experiment(const TimeSlab& slab,
                                              const ParabolicCylinder& q,
                                              const MollifiedDensity& density,
                                              double delta, double nu, double f_bound,
                                              double q_integrability, double beta0,
                                              StepperConfig cfg = {}) {
  CylinderStats st = classify_branch(slab, q, delta, density.eps(), nu);
  if (st.branch == Branch::degenerate)
    throw std::domain_error("comparison_experiment: cylinder is degenerate");

  ComparisonReport rep;
  rep.mu = st.mu;
  rep.phi_rho = oscillation_energy(slab, q);
  rep.beta = holder_beta(q_integrability, beta0);
  rep.f_term = f_bound * f_bound * std::pow(q.r, 2.0 * rep.beta);

  FrozenFlowResult flow = solve_frozen_heat_flow(slab, q, density, delta, st.mu, cfg);
  rep.average_gradient = flow.average_gradient;
  rep.coefficient = flow.coefficient;

  // mean over Q_{rho/2} of |grad u - grad v|^2, matching nodes through the
  // local-to-parent map; the initial slice (where v = u) lies outside the
  // half-open time window.
  const Grid& lg = *flow.local_grid;
  double acc = 0.0;
  std::size_t count = 0;
  for (int lm = 1; lm < flow.local.n_slices(); ++lm) {
    const auto& gv = flow.local.nodal_gradient(lm);
    const auto& gu = slab.nodal_gradient(flow.first_parent_slice + lm);
    for (int n : lg.interior_nodes()) {
      acc += (gu[flow.parent_node[n]] - gv[n]).squaredNorm();
      ++count;
    }
  }
  if (count == 0) throw std::domain_error("comparison_experiment: empty comparison cylinder");
  rep.comparison_error = acc / static_cast<double>(count);

  double t0 = flow.local.time(flow.local.n_slices() - 1);
  double phi_half = oscillation_energy(flow.local, ParabolicCylinder(q.center, t0, 0.5 * q.r));
  for (double sigma : {0.25, 0.125}) {
    ParabolicCylinder qs(q.center, t0, sigma * q.r);
    CylinderIndex ix = cylinder_nodes(flow.local, qs);
    if (ix.nodes.size() < 4 || ix.slices.size() < 2) break;
    rep.v_decay_sigma.push_back(sigma);
    rep.v_decay_ratio.push_back(phi_half > 0.0
                                    ? oscillation_energy(flow.local, qs) / phi_half
                                    : 0.0);
  }
  return rep;
}

}  // namespace facetflow
