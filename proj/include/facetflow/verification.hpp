#pragma once

#include "facetflow/density.hpp"
#include "facetflow/truncation.hpp"

#include <random>
#include <string>
#include <vector>

namespace facetflow {

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct SuiteOutcome {
  std::vector<CheckResult> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

inline void add_check(SuiteOutcome& out, const std::string& name, bool pass,
                      const std::string& detail) {
  out.checks.push_back({name, pass, detail});
}

inline Vec2 random_dir(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 2.0 * M_PI);
  double th = uni(rng);
  return Vec2(std::cos(th), std::sin(th));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Structural inequalities of the mollified densities: Hessian eigenvalue
// bounds with empirically fitted constants, their stability across eps,
// strong monotonicity, and finite-difference consistency of grad and hess.
// ---------------------------------------------------------------------------

struct StructuralFitRow {
  double p, eps;
  DensityMode mode;
  HessianFit fit;
};

struct StructuralSuite {
  SuiteOutcome outcome;
  std::vector<StructuralFitRow> fits;
};

inline StructuralSuite density_structural_suite(
    const std::vector<double>& ps = {1.5, 2.0, 3.0},
    const std::vector<double>& eps_set = {0.1, 0.05, 0.025},
    const std::vector<DensityMode>& modes = {DensityMode::surrogate,
                                             DensityMode::quadrature},
    int n_samples = 10000, std::uint64_t seed = 1, double b1 = 1.0, double bp = 1.0) {
  StructuralSuite suite;
  auto& out = suite.outcome;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (DensityMode mode : modes) {
    const char* mode_name = mode == DensityMode::surrogate ? "surrogate" : "quadrature";
    for (double p : ps) {
      std::vector<HessianFit> fits_by_eps;
      for (double eps : eps_set) {
        DensityParams params{p, b1, bp};
        MollifiedDensity density =
            mode == DensityMode::surrogate
                ? MollifiedDensity::surrogate(params, eps)
                : MollifiedDensity::quadrature(params, eps);
        HessianFit fit = fit_hessian_constants(density);
        fits_by_eps.push_back(fit);
        suite.fits.push_back({p, eps, mode, fit});
        std::string tag = std::string(mode_name) + " p=" + std::to_string(p) +
                          " eps=" + std::to_string(eps);

        // containment of fresh samples in the fitted eigenvalue brackets
        std::mt19937_64 rng(seed + 77);
        bool contained = true, e1_ok = true, grad_ok = true;
        double worst = 0.0;
        const double slack = 1.0 + 1e-8;
        for (int i = 0; i < n_samples; ++i) {
          double r = (i % 5 == 0) ? std::pow(10.0, -5.0 + 5.0 * uni(rng)) * 5.0
                                  : uni(rng) * 5.0;
          Vec2 z = r * detail::random_dir(rng);
          double w = eps * eps + z.squaredNorm();
          double lo, hi;
          sym_eig2(density.ep_hess(z), lo, hi);
          double scale = std::pow(w, 0.5 * p - 1.0);
          if (lo < fit.lambda * scale / slack - 1e-12 ||
              hi > fit.Lambda * scale * slack + 1e-12) {
            contained = false;
            worst = std::max({worst, fit.lambda * scale - lo, hi - fit.Lambda * scale});
          }
          sym_eig2(density.e1_hess(z), lo, hi);
          if (lo < -1e-10 * b1 || hi > fit.K / std::sqrt(w) * slack + 1e-12)
            e1_ok = false;
          if (density.e1_grad(z).norm() > b1 * (1.0 + 1e-8)) grad_ok = false;
        }
        detail::add_check(out, tag + " hess containment", contained,
                          contained ? "" : "excess " + std::to_string(worst));
        detail::add_check(out, tag + " e1 bounds (0 <= hess <= K/V)", e1_ok, "");
        detail::add_check(out, tag + " |grad E1| <= b1", grad_ok, "");

        // strong monotonicity: sign, and the p-split lower bound
        std::mt19937_64 rng2(seed + 101);
        bool sign_ok = true, lower_ok = true;
        double c_fit = std::numeric_limits<double>::infinity();
        std::vector<std::pair<Vec2, Vec2>> batch_b;
        for (int i = 0; i < n_samples; ++i) {
          Vec2 z1 = uni(rng2) * 5.0 * detail::random_dir(rng2);
          Vec2 z2 = uni(rng2) * 5.0 * detail::random_dir(rng2);
          if ((z1 - z2).norm() < 1e-6) continue;
          double gap = density.strong_monotonicity_gap(z1, z2);
          if (gap < -1e-12) sign_ok = false;
          if (p >= 2.0) {
            double ratio = gap / (fit.lambda * std::pow((z1 - z2).norm(), p));
            if (i % 2 == 0) c_fit = std::min(c_fit, ratio);
            else batch_b.emplace_back(z1, z2);
          } else {
            double wsum = eps * eps + z1.squaredNorm() + z2.squaredNorm();
            double bound = 0.999 * fit.lambda * std::pow(wsum, 0.5 * p - 1.0) *
                           (z1 - z2).squaredNorm();
            if (gap < bound - 1e-14) lower_ok = false;
          }
        }
        if (p >= 2.0) {
          for (auto& [z1, z2] : batch_b) {
            double gap = density.strong_monotonicity_gap(z1, z2);
            if (gap < 0.95 * c_fit * fit.lambda * std::pow((z1 - z2).norm(), p) - 1e-14)
              lower_ok = false;
          }
          if (!(c_fit > 0.0)) lower_ok = false;
        }
        detail::add_check(out, tag + " monotonicity sign", sign_ok, "");
        detail::add_check(out, tag + " monotonicity lower bound", lower_ok,
                          p >= 2.0 ? "fitted c = " + std::to_string(c_fit) : "");

        // finite-difference consistency of grad and hess
        std::mt19937_64 rng3(seed + 202);
        double eg[2] = {0.0, 0.0}, eh[2] = {0.0, 0.0};
        const double steps[2] = {1e-3, 1e-4};
        for (int i = 0; i < 100; ++i) {
          Vec2 z = (0.05 + uni(rng3) * 4.0) * detail::random_dir(rng3);
          for (int k = 0; k < 2; ++k) {
            double hstep = steps[k];
            for (int c = 0; c < 2; ++c) {
              Vec2 dz = Vec2::Zero();
              dz[c] = hstep;
              double fd = (density.eval(z + dz) - density.eval(z - dz)) / (2 * hstep);
              eg[k] = std::max(eg[k], std::abs(fd - density.grad(z)[c]));
              Vec2 fdg = (density.grad(z + dz) - density.grad(z - dz)) / (2 * hstep);
              eh[k] = std::max(eh[k], (fdg - density.hess(z).col(c)).norm());
            }
          }
        }
        double order_g = std::log10(eg[0] / std::max(eg[1], 1e-300));
        double order_h = std::log10(eh[0] / std::max(eh[1], 1e-300));
        detail::add_check(out, tag + " grad = d(eval), order", order_g >= 1.9,
                          "observed " + std::to_string(order_g));
        detail::add_check(out, tag + " hess = d(grad), order", order_h >= 1.9,
                          "observed " + std::to_string(order_h));
      }

      // eps-stability of the fitted constants (within 5 percent)
      auto spread = [&](auto pick) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& f : fits_by_eps) {
          lo = std::min(lo, pick(f));
          hi = std::max(hi, pick(f));
        }
        return hi / lo - 1.0;
      };
      double s_lambda = spread([](const HessianFit& f) { return f.lambda; });
      double s_Lambda = spread([](const HessianFit& f) { return f.Lambda; });
      double s_K = b1 > 0.0 ? spread([](const HessianFit& f) { return f.K; }) : 0.0;
      std::string tag = std::string(mode_name) + " p=" + std::to_string(p);
      detail::add_check(out, tag + " lambda stable across eps", s_lambda <= 0.05,
                        "spread " + std::to_string(s_lambda));
      detail::add_check(out, tag + " Lambda stable across eps", s_Lambda <= 0.05,
                        "spread " + std::to_string(s_Lambda));
      detail::add_check(out, tag + " K stable across eps", s_K <= 0.05,
                        "spread " + std::to_string(s_K));
    }
  }

  // surrogate/quadrature agreement bracket for the 1-part: r <= g(r) <= r + eps
  for (double eps : eps_set) {
    MollifiedDensity dq = MollifiedDensity::quadrature(DensityParams{2.0, 1.0, 0.0}, eps);
    MollifiedDensity dsur = MollifiedDensity::surrogate(DensityParams{2.0, 1.0, 0.0}, eps);
    bool ok = true;
    double worst_gap = 0.0;
    for (int i = 0; i <= 400; ++i) {
      double r = 8.0 * i / 400.0;
      Vec2 z(r, 0.0);
      double val_q = dq.eval(z);  // bp = 0: pure 1-part
      double val_s = dsur.eval(z);
      if (val_q < r - 1e-9 || val_q > r + eps * (1.0 + 1e-9)) ok = false;
      if (val_s < r - 1e-9 || val_s > r + eps * (1.0 + 1e-9)) ok = false;
      if (r >= 2.0 * eps) worst_gap = std::max(worst_gap, std::abs(val_q - val_s));
    }
    detail::add_check(out, "E1 bracket r <= g <= r+eps, eps=" + std::to_string(eps), ok,
                      "mode gap beyond 2eps: " + std::to_string(worst_gap) +
                          " (logged, ~C eps^2)");
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Truncation maps: the explicit Lipschitz constant, uniform delta-continuity,
// exact support identity, ray monotonicity, and the bijection G_{p,eps}.
// ---------------------------------------------------------------------------

inline SuiteOutcome truncation_suite(int n_pairs = 100000, std::uint64_t seed = 2) {
  SuiteOutcome out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  {  // Lipschitz constant of G_{2 delta, eps} under eps < delta/8
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < n_pairs; ++i) {
      double delta = 0.01 + 0.98 * uni(rng);
      double eps = uni(rng) * delta / 8.0;
      if (eps == 0.0) eps = 1e-6 * delta;
      double scale = (i % 3 == 0) ? 2.0 * delta : 5.0;
      Vec2 z1 = scale * uni(rng) * detail::random_dir(rng);
      Vec2 z2 = (i % 4 == 0)
                    ? Vec2(z1 + 2.0 * eps * uni(rng) * detail::random_dir(rng))
                    : Vec2(scale * uni(rng) * detail::random_dir(rng));
      double dz = (z1 - z2).norm();
      if (dz < 1e-14) continue;
      double dG = (g_delta_eps(z1, 2.0 * delta, eps) - g_delta_eps(z2, 2.0 * delta, eps)).norm();
      worst = std::max(worst, dG / dz);
      if (dG > kTruncationLipschitz * dz * (1.0 + 1e-12)) ok = false;
    }
    detail::add_check(out, "G_{2delta,eps} Lipschitz <= 1+64/sqrt(255)", ok,
                      "worst quotient " + std::to_string(worst) + " vs " +
                          std::to_string(kTruncationLipschitz));
  }

  {  // uniform continuity in the truncation level
    bool ok = true;
    for (int i = 0; i < n_pairs / 10; ++i) {
      double d1 = uni(rng), d2 = uni(rng);
      Vec2 z = 5.0 * uni(rng) * detail::random_dir(rng);
      double diff = (g_delta(z, d1) - g_delta(z, d2)).norm();
      if (diff > std::abs(d1 - d2) * (1.0 + 1e-12) + 1e-15) ok = false;
    }
    detail::add_check(out, "sup |G_d1 - G_d2| <= |d1 - d2|", ok, "");
  }

  {  // exact support: G_{delta,eps}(z) = 0  iff  V_eps(z) <= delta
    bool ok = true;
    for (int i = 0; i < n_pairs / 10; ++i) {
      double delta = 0.05 + 0.9 * uni(rng);
      double eps = uni(rng) * delta * 0.99;
      Vec2 z = 2.0 * delta * uni(rng) * detail::random_dir(rng);
      bool zero = g_delta_eps(z, delta, eps).norm() == 0.0;
      bool below = std::sqrt(eps * eps + z.squaredNorm()) <= delta;
      if (zero != below) ok = false;
    }
    detail::add_check(out, "support identity (bit-exact)", ok, "");
  }

  {  // |G_{delta,eps}| nondecreasing along rays
    bool ok = true;
    for (int i = 0; i < n_pairs / 10; ++i) {
      double delta = 0.05 + 0.9 * uni(rng);
      double eps = uni(rng) * delta * 0.9;
      Vec2 dir = detail::random_dir(rng);
      double t1 = 3.0 * uni(rng), t2 = 3.0 * uni(rng);
      if (t1 > t2) std::swap(t1, t2);
      if (g_delta_eps(t1 * dir, delta, eps).norm() >
          g_delta_eps(t2 * dir, delta, eps).norm() + 1e-14)
        ok = false;
    }
    detail::add_check(out, "|G_{delta,eps}| monotone along rays", ok, "");
  }

  {  // G_{p,eps}: inverse bound and monotonicity, constants fitted
    for (double p : {1.5, 2.0, 3.0}) {
      double eps = 0.05;
      bool inv_ok = true, mono_ok = true;
      double c_inv = 0.0, c_mono = std::numeric_limits<double>::infinity();
      std::mt19937_64 rng2(seed + 5);
      for (int i = 0; i < 10000; ++i) {
        Vec2 w = 10.0 * uni(rng2) * detail::random_dir(rng2);
        Vec2 z = g_p_eps_inverse(w, p, eps);
        if ((g_p_eps(z, p, eps) - w).norm() > 1e-10 * (1.0 + w.norm())) inv_ok = false;
        if (w.norm() > 1e-8)
          c_inv = std::max(c_inv, z.norm() / std::pow(w.norm(), 1.0 / p));
        Vec2 z1 = 5.0 * uni(rng2) * detail::random_dir(rng2);
        Vec2 z2 = 5.0 * uni(rng2) * detail::random_dir(rng2);
        double dz = (z1 - z2).norm();
        if (dz < 1e-9) continue;
        double lhs = (g_p_eps(z1, p, eps) - g_p_eps(z2, p, eps)).norm();
        double denom = std::max(std::pow(z1.norm(), p - 1.0), std::pow(z2.norm(), p - 1.0));
        if (denom > 1e-12) c_mono = std::min(c_mono, lhs / (denom * dz));
      }
      if (!(c_mono > 0.0)) mono_ok = false;
      detail::add_check(out, "G_p inverse bound, p=" + std::to_string(p), inv_ok,
                        "fitted C(p) = " + std::to_string(c_inv));
      detail::add_check(out, "G_p monotonicity, p=" + std::to_string(p), mono_ok,
                        "fitted c(p) = " + std::to_string(c_mono));
    }
  }
  return out;
}

}  // namespace facetflow
