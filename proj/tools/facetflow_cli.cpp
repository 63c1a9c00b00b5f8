// Batch front end: parse a config file, orchestrate runs, sweeps,
// verification suites, and cylinder diagnostics; emit fields, reports,
// and plot-ready CSV tables.

#include "facetflow/facetflow.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace ff = facetflow;
namespace fs = std::filesystem;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int workers = 1;
};

ff::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << path << "'\n";
    std::exit(2);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  ff::ParseOutcome outcome = ff::parse_config(ss.str());
  if (!outcome.ok()) {
    std::cerr << outcome.describe();
    std::cerr << "error: " << outcome.errors.size() << " config violation(s)\n";
    std::exit(2);
  }
  return *outcome.config;
}

void echo_config(ff::Report& rep, const ff::RunConfig& cfg, std::uint64_t seed) {
  rep.add("run.scenario", cfg.scenario, ff::Provenance::configured);
  rep.add("run.seed", static_cast<int>(seed), ff::Provenance::configured);
  rep.add("density.p", cfg.density.p, ff::Provenance::configured);
  rep.add("density.b1", cfg.density.b1, ff::Provenance::configured);
  rep.add("density.bp", cfg.density.bp, ff::Provenance::configured);
  rep.add("density.eps", cfg.eps, ff::Provenance::configured);
  rep.add("density.mode",
          cfg.mode == ff::DensityMode::surrogate ? "surrogate" : "quadrature",
          ff::Provenance::configured);
  rep.add("grid.shape", cfg.grid_shape, ff::Provenance::configured);
  rep.add("grid.h", cfg.h, ff::Provenance::configured);
  rep.add("diagnostics.delta", cfg.delta, ff::Provenance::configured);
  rep.add("diagnostics.nu", cfg.nu, ff::Provenance::configured);
  rep.add("diagnostics.beta0", cfg.beta0, ff::Provenance::configured);
}

void write_steps_csv(const std::vector<ff::StepStats>& steps, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "step,t,newton_iters,J,residual\n");
  for (size_t k = 0; k < steps.size(); ++k)
    std::fprintf(fp, "%zu,%.17g,%d,%.17g,%.17g\n", k, steps[k].t,
                 steps[k].newton_iters, steps[k].energy, steps[k].residual);
  std::fclose(fp);
}

void add_density_fit(ff::Report& rep, const ff::MollifiedDensity& density) {
  ff::HessianFit fit = ff::fit_hessian_constants(density);
  rep.add("energy.lambda", fit.lambda, ff::Provenance::fitted);
  rep.add("energy.Lambda", fit.Lambda, ff::Provenance::fitted);
  if (density.params().b1 > 0.0) {
    rep.add("energy.K", fit.K, ff::Provenance::fitted);
    rep.add("energy.max_grad_e1", fit.max_grad_e1, ff::Provenance::measured);
  }
}

std::shared_ptr<const ff::Grid> make_grid(const ff::RunConfig& cfg) {
  if (cfg.grid_shape == "disk") return ff::Grid::disk(cfg.R, cfg.h);
  return ff::Grid::rectangle(cfg.nx, cfg.ny, cfg.h, ff::Vec2(cfg.origin_x, cfg.origin_y));
}

int cmd_run(const ff::RunConfig& cfg, const CliOptions& opt) {
  ff::Report rep;
  echo_config(rep, cfg, opt.seed);

  if (cfg.scenario == "bingham") {
    ff::BinghamPipeSpec spec;
    spec.R = cfg.R;
    spec.b1 = cfg.density.b1;
    spec.b2 = cfg.density.bp;
    spec.f = cfg.f_const;
    spec.eps = cfg.eps;
    spec.h = cfg.h;
    ff::SteadyMarchConfig march;
    march.stepper = cfg.stepper();
    march.steady_tol = cfg.steady_tol;
    march.t_max = cfg.t_max;
    march.tail_steps = cfg.tail_steps;
    march.tail_dt = cfg.tail_dt;
    ff::BinghamRunResult res = ff::run_bingham(spec, march);

    ff::write_slab_csv(res.solve.slab, opt.out_dir + "/fields.csv");
    if (res.tail.n_slices() > 0) ff::write_slab_csv(res.tail, opt.out_dir + "/tail.csv");
    write_steps_csv(res.solve.steps, opt.out_dir + "/steps.csv");

    rep.add("bingham.f", spec.f, ff::Provenance::configured);
    rep.add("bingham.t_steady", res.t_steady, ff::Provenance::measured);
    rep.add("bingham.steady_residual", res.steady_residual, ff::Provenance::measured);
    rep.add("bingham.linf_rel_error", res.linf_rel_error, ff::Provenance::measured);
    rep.add("bingham.plug_radius_exact", res.plug_radius_exact, ff::Provenance::configured);
    rep.add("bingham.plug_radius_estimate", res.plug_radius_estimate,
            ff::Provenance::measured);
    rep.add("bingham.plug_threshold", res.plug_threshold, ff::Provenance::configured);
    rep.add("bingham.angular_anisotropy",
            ff::angular_anisotropy(res.solve.slab.slice(res.solve.slab.n_slices() - 1)),
            ff::Provenance::measured);

    ff::MollifiedDensity density =
        ff::MollifiedDensity::surrogate(ff::DensityParams{2.0, spec.b1, spec.b2}, spec.eps);
    add_density_fit(rep, density);
    if (spec.b1 > 0.0) {
      ff::SubgradientWitness w = ff::subgradient_witness(
          res.solve.slab, res.solve.slab.n_slices() - 1, density, cfg.delta);
      rep.add("subgradient.max_abs_over_b1", w.max_abs_over_b1, ff::Provenance::measured);
      rep.add("subgradient.worst_alignment", w.worst_alignment, ff::Provenance::measured);
      rep.add("subgradient.c", w.fitted_c, ff::Provenance::fitted);
      rep.add("subgradient.n_checked", w.n_checked, ff::Provenance::measured);
    }
  } else if (cfg.scenario == "spohn") {
    ff::SpohnSpec spec;
    spec.mobility = cfg.density.b1;
    spec.eps = cfg.eps;
    spec.h = cfg.h;
    spec.T = cfg.T;
    spec.dt = cfg.dt;
    ff::SpohnResult res = ff::run_spohn(spec, cfg.delta);
    ff::write_slab_csv(res.solve.slab, opt.out_dir + "/fields.csv");
    write_steps_csv(res.solve.steps, opt.out_dir + "/steps.csv");
    rep.add("spohn.facet_area_initial", res.facet_area.front(), ff::Provenance::measured);
    rep.add("spohn.facet_area_final", res.facet_area.back(), ff::Provenance::measured);
    bool monotone = true;
    for (size_t m = 1; m < res.density_energy.size(); ++m)
      if (res.density_energy[m] > res.density_energy[m - 1] + 1e-12) monotone = false;
    rep.add("spohn.energy_initial", res.density_energy.front(), ff::Provenance::measured);
    rep.add("spohn.energy_final", res.density_energy.back(), ff::Provenance::measured);
    rep.add("spohn.energy_nonincreasing", monotone ? "true" : "false",
            ff::Provenance::measured);
  } else {
    // manufactured families
    ff::ManufacturedCase mc = ff::manufactured_case(cfg.scenario, cfg.nx, cfg.T);
    ff::StepperConfig sc = cfg.stepper();
    ff::SolveResult res = ff::run(mc.spec, sc);
    ff::write_slab_csv(res.slab, opt.out_dir + "/fields.csv");
    write_steps_csv(res.steps, opt.out_dir + "/steps.csv");
    rep.add("manufactured.family", mc.family, ff::Provenance::configured);
    rep.add("manufactured.l2_error", ff::final_slice_l2_error(res, mc.exact),
            ff::Provenance::measured);
  }

  rep.write(opt.out_dir + "/report.txt");
  std::cout << "run: artifacts written to " << opt.out_dir << "\n";
  return 0;
}

int cmd_sweep(const ff::RunConfig& cfg, const CliOptions& opt) {
  if (cfg.scenario != "bingham") {
    std::cerr << "error: sweep supports the bingham scenario\n";
    return 2;
  }
  if (cfg.eps_list.empty()) {
    std::cerr << "error: sweep requires [sweep] eps_list\n";
    return 2;
  }
  ff::BinghamPipeSpec spec;
  spec.R = cfg.R;
  spec.b1 = cfg.density.b1;
  spec.b2 = cfg.density.bp;
  spec.f = cfg.f_const;
  spec.h = cfg.h;
  spec.eps = cfg.eps_list.front();

  std::string csv = opt.out_dir + "/sweep.csv";
  std::FILE* fp = std::fopen(csv.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + csv);
  std::fprintf(fp, "eps_i,eps_j,lp_dist,sup_trunc_dist\n");

  ff::Report rep;
  echo_config(rep, cfg, opt.seed);
  if (cfg.eps_list.size() == 1) {
    std::fclose(fp);
    std::cout << "warning: single-eps sweep, pairwise table is empty\n";
    rep.add("sweep.n_eps", 1, ff::Provenance::configured);
    rep.write(opt.out_dir + "/sweep_report.txt");
    return 0;
  }

  ff::StepperConfig sc = cfg.stepper();
  ff::SweepResult sw = ff::epsilon_sweep(
      [&](double e) { return ff::bingham_problem(spec, e, cfg.T); }, cfg.eps_list, sc,
      cfg.delta, cfg.density.p, opt.workers);
  for (const auto& row : sw.pairwise)
    std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", row[0], row[1], row[2], row[3]);
  std::fclose(fp);

  rep.add("sweep.n_eps", static_cast<int>(sw.eps.size()), ff::Provenance::configured);
  for (size_t i = 0; i < sw.succ_lp.size(); ++i) {
    rep.add("sweep.lp_dist_" + std::to_string(i), sw.succ_lp[i], ff::Provenance::measured);
    rep.add("sweep.sup_dist_" + std::to_string(i), sw.succ_sup[i], ff::Provenance::measured);
  }
  rep.add("sweep.lp_strictly_decreasing", sw.lp_strictly_decreasing ? "true" : "false",
          ff::Provenance::measured);
  rep.add("sweep.sup_strictly_decreasing", sw.sup_strictly_decreasing ? "true" : "false",
          ff::Provenance::measured);
  rep.write(opt.out_dir + "/sweep_report.txt");
  std::cout << "sweep: " << sw.pairwise.size() << " pairs written to " << csv << "\n";
  return (sw.lp_strictly_decreasing && sw.sup_strictly_decreasing) ? 0 : 1;
}

int cmd_verify(const ff::RunConfig& cfg, const CliOptions& opt) {
  (void)cfg;
  ff::StructuralSuite density_suite =
      ff::density_structural_suite({1.5, 2.0, 3.0}, {0.1, 0.05, 0.025},
                                   {ff::DensityMode::surrogate, ff::DensityMode::quadrature},
                                   10000, opt.seed + 1);
  ff::SuiteOutcome trunc = ff::truncation_suite(100000, opt.seed + 2);

  ff::Report rep;
  int fails = 0;
  auto emit = [&](const ff::SuiteOutcome& suite) {
    for (const auto& c : suite.checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
      if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
      std::cout << "\n";
      rep.add(c.name, c.pass ? "pass" : "fail", ff::Provenance::measured);
      if (!c.pass) ++fails;
    }
  };
  emit(density_suite.outcome);
  emit(trunc);
  for (const auto& row : density_suite.fits) {
    std::string key = std::string("fit.") +
                      (row.mode == ff::DensityMode::surrogate ? "sur" : "quad") +
                      ".p" + std::to_string(row.p) + ".eps" + std::to_string(row.eps);
    rep.add(key + ".lambda", row.fit.lambda, ff::Provenance::fitted);
    rep.add(key + ".Lambda", row.fit.Lambda, ff::Provenance::fitted);
    rep.add(key + ".K", row.fit.K, ff::Provenance::fitted);
  }
  rep.write(opt.out_dir + "/verify_report.txt");
  std::cout << (fails == 0 ? "verify: all suites pass\n"
                           : "verify: " + std::to_string(fails) + " failure(s)\n");
  return fails == 0 ? 0 : 1;
}

int cmd_diagnose(const ff::RunConfig& cfg, const CliOptions& opt) {
  auto grid = make_grid(cfg);
  std::string slab_path = fs::exists(opt.out_dir + "/tail.csv")
                              ? opt.out_dir + "/tail.csv"
                              : opt.out_dir + "/fields.csv";
  ff::TimeSlab slab = ff::read_slab_csv(grid, slab_path);
  if (slab.n_slices() < 2) {
    std::cerr << "error: slab in " << slab_path << " has fewer than 2 slices\n";
    return 2;
  }
  ff::MollifiedDensity density =
      cfg.mode == ff::DensityMode::surrogate
          ? ff::MollifiedDensity::surrogate(cfg.density, cfg.eps)
          : ff::MollifiedDensity::quadrature(cfg.density, cfg.eps);

  std::vector<ff::ParabolicCylinder> cylinders = cfg.cylinders;
  ff::ParabolicCylinder holder_q, moser_q;
  bool have_big = false;
  if (cfg.cylinder_auto == "bingham") {
    double r0 = std::min(cfg.R, 2.0 * cfg.density.b1 / cfg.f_const);
    ff::CuratedCylinders cur = ff::curate_bingham_cylinders(
        *grid, cfg.R, r0, cfg.cyl_rho, cfg.n_plug, cfg.n_annulus,
        slab.time(slab.n_slices() - 1));
    for (const auto& q : cur.plug) cylinders.push_back(q);
    for (const auto& q : cur.annulus) cylinders.push_back(q);
    holder_q = cur.holder;
    moser_q = cur.moser;
    have_big = true;
  }
  if (cylinders.empty()) {
    std::cerr << "error: no cylinders configured (set [cylinders] auto or cylinder=...)\n";
    return 2;
  }

  std::string cyl_path = opt.out_dir + "/cylinders.txt";
  std::FILE* fp = std::fopen(cyl_path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + cyl_path);
  std::string phi_path = opt.out_dir + "/phi.csv";
  std::FILE* fphi = std::fopen(phi_path.c_str(), "w");
  if (!fphi) {
    std::fclose(fp);
    throw std::runtime_error("cannot open " + phi_path);
  }
  std::fprintf(fphi, "cylinder,r,phi\n");

  for (size_t k = 0; k < cylinders.size(); ++k) {
    const auto& q = cylinders[k];
    ff::CylinderStats st = ff::classify_branch(slab, q, cfg.delta, cfg.eps, cfg.nu);
    std::fprintf(fp,
                 "cylinder %zu: center=(%.17g,%.17g) t0=%.17g r=%.17g mu=%.17g "
                 "nu=%.17g ratio_S=%.17g branch=%s flat=%s kappa_hat=%.17g\n",
                 k, q.center.x(), q.center.y(), q.t0, q.r, st.mu, st.nu, st.ratio_S,
                 st.branch == ff::Branch::nondegenerate ? "nondegenerate" : "degenerate",
                 st.flat ? "true" : "false", st.kappa_hat);
    try {
      ff::OscillationReport osc =
          ff::oscillation_decay(slab, q.center, q.t0, {q.r, 0.5 * q.r, 0.25 * q.r});
      for (size_t i = 0; i < osc.radii.size(); ++i)
        std::fprintf(fphi, "%zu,%.17g,%.17g\n", k, osc.radii[i], osc.phi[i]);
    } catch (const std::domain_error&) {
      // cylinder too small for the full radius family; skip its phi table
    }
  }
  std::fclose(fp);
  std::fclose(fphi);

  ff::Report rep;
  echo_config(rep, cfg, opt.seed);
  rep.add("diagnose.slab", slab_path, ff::Provenance::configured);
  rep.add("diagnose.n_cylinders", static_cast<int>(cylinders.size()),
          ff::Provenance::configured);

  if (have_big) {
    try {
      ff::HolderEstimate est = ff::holder_fit_truncated_gradient(
          slab, holder_q, cfg.delta, cfg.eps, cfg.n_pairs, opt.seed);
      rep.add("holder.alpha_hat", est.alpha_hat, ff::Provenance::fitted);
      rep.add("holder.C_hat", est.c_hat, ff::Provenance::fitted);
      rep.add("holder.residual", est.residual, ff::Provenance::measured);
      rep.add("holder.n_pairs", est.n_pairs, ff::Provenance::measured);
      rep.add("holder.flat", est.flat ? "true" : "false", ff::Provenance::measured);
      rep.add("holder.seed", static_cast<int>(est.seed), ff::Provenance::configured);
      std::FILE* fh = std::fopen((opt.out_dir + "/holder.csv").c_str(), "w");
      if (fh) {
        std::fprintf(fh, "d,osc\n");
        for (size_t i = 0; i < est.bin_d.size(); ++i)
          std::fprintf(fh, "%.17g,%.17g\n", est.bin_d[i], est.bin_osc[i]);
        std::fclose(fh);
      }
    } catch (const std::exception& e) {
      rep.add("holder.skipped", std::string(e.what()), ff::Provenance::measured);
    }

    try {
      ff::MoserReport mr =
          ff::moser_report(slab, moser_q, cfg.moser_theta, cfg.density.p, cfg.forcing_q,
                           cfg.sigma, [&](double, double, double) { return cfg.f_const; },
                           cfg.eps);
      rep.add("moser.d", mr.exponents.d, ff::Provenance::configured);
      rep.add("moser.d1", mr.exponents.d1, ff::Provenance::configured);
      rep.add("moser.d2", mr.exponents.d2, ff::Provenance::configured);
      rep.add("moser.sup_inner", mr.sup_inner, ff::Provenance::measured);
      rep.add("moser.rhs_core", mr.rhs_core, ff::Provenance::measured);
      rep.add("moser.ratio", mr.ratio, ff::Provenance::measured);
    } catch (const std::exception& e) {
      rep.add("moser.skipped", std::string(e.what()), ff::Provenance::measured);
    }
  }
  if (cfg.density.b1 > 0.0) {
    ff::SubgradientWitness w =
        ff::subgradient_witness(slab, slab.n_slices() - 1, density, cfg.delta);
    rep.add("subgradient.max_abs_over_b1", w.max_abs_over_b1, ff::Provenance::measured);
    rep.add("subgradient.worst_alignment", w.worst_alignment, ff::Provenance::measured);
    rep.add("subgradient.c", w.fitted_c, ff::Provenance::fitted);
  }
  rep.write(opt.out_dir + "/diagnostics.txt");
  std::cout << "diagnose: " << cylinders.size() << " cylinder records in " << cyl_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facetflow: very singular parabolic flow simulator and diagnostics"};
  app.require_subcommand(1);

  CliOptions opt;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* copt = sub->add_option("--config", opt.config_path, "configuration file");
    if (config_required) copt->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "random seed for fits and samples");
    sub->add_option("--workers", opt.workers, "parallel sweep members");
  };
  CLI::App* c_run = app.add_subcommand("run", "solve one scenario and emit fields");
  CLI::App* c_sweep = app.add_subcommand("sweep", "run an eps sweep");
  CLI::App* c_verify = app.add_subcommand("verify", "structural inequality suites");
  CLI::App* c_diag = app.add_subcommand("diagnose", "cylinder diagnostics on a slab");
  add_common(c_run, true);
  add_common(c_sweep, true);
  add_common(c_verify, false);
  add_common(c_diag, true);

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(opt.out_dir);
    ff::RunConfig cfg;
    if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
    if (c_run->parsed()) return cmd_run(cfg, opt);
    if (c_sweep->parsed()) return cmd_sweep(cfg, opt);
    if (c_verify->parsed()) return cmd_verify(cfg, opt);
    if (c_diag->parsed()) return cmd_diagnose(cfg, opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
