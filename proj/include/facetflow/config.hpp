#pragma once

#include "facetflow/density.hpp"
#include "facetflow/grid.hpp"
#include "facetflow/solver.hpp"

#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace facetflow {

// ---------------------------------------------------------------------------
// Line-oriented `key = value` configuration with [section] headers.
// Parsing reports every violation, not just the first.
// ---------------------------------------------------------------------------

struct RunConfig {
  // [run]
  std::string scenario = "bingham";
  // [density]
  DensityParams density{2.0, 1.0, 1.0};
  double eps = 1e-3;
  DensityMode mode = DensityMode::surrogate;
  // [grid]
  std::string grid_shape = "disk";
  double R = 1.0;
  double h = 1.0 / 64.0;
  int nx = 65, ny = 65;
  double origin_x = 0.0, origin_y = 0.0;
  // [time]
  double dt = 0.2;
  double T = 1.0;
  bool steady_stop = true;
  double steady_tol = 1e-8;
  double t_max = 60.0;
  int tail_steps = 0;
  double tail_dt = 1e-4;
  // [newton]
  double newton_tol = 2e-9;
  int newton_max = 60;
  double linear_tol = 1e-10;
  double damping = 0.5;
  // [forcing]
  double f_const = 4.0;
  double forcing_q = std::numeric_limits<double>::infinity();
  // [diagnostics]
  double delta = 0.05;
  double nu = 0.125;
  double beta0 = 0.5;
  double sigma = 3.0;
  int n_pairs = 2000;
  double moser_theta = 0.5;
  // [sweep]
  std::vector<double> eps_list;
  // [cylinders]
  std::string cylinder_auto;  // "" or "bingham"
  int n_annulus = 10;
  int n_plug = 10;
  double cyl_rho = 0.033;
  std::vector<ParabolicCylinder> cylinders;

  StepperConfig stepper() const {
    StepperConfig cfg;
    cfg.dt = dt;
    cfg.newton_tol = newton_tol;
    cfg.newton_max = newton_max;
    cfg.linear_tol = linear_tol;
    cfg.damping = damping;
    return cfg;
  }
};

struct ConfigError {
  int line = 0;  // 0: semantic error not tied to a line
  std::string key;
  std::string message;
};

struct ParseOutcome {
  std::optional<RunConfig> config;
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty() && config.has_value(); }
  std::string describe() const {
    std::string out;
    for (const auto& e : errors) {
      out += "config";
      if (e.line > 0) out += " line " + std::to_string(e.line);
      if (!e.key.empty()) out += " [" + e.key + "]";
      out += ": " + e.message + "\n";
    }
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s == "inf" || s == "infinity") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_int(const std::string& s, int& out) {
  try {
    size_t pos = 0;
    out = std::stoi(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1") { out = true; return true; }
  if (s == "false" || s == "0") { out = false; return true; }
  return false;
}

inline bool parse_double_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_double(trim(item), v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace detail

inline ParseOutcome parse_config(const std::string& text) {
  using detail::trim;
  ParseOutcome out;
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  auto err = [&](int line, const std::string& key, const std::string& msg) {
    out.errors.push_back({line, key, msg});
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        err(lineno, "", "malformed section header '" + raw + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {
          "run", "density", "grid", "time", "newton", "forcing",
          "diagnostics", "sweep", "cylinders"};
      if (!known.count(section))
        err(lineno, section, "unknown section");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      err(lineno, "", "expected 'key = value', got '" + raw + "'");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string qual = section + "." + key;

    auto set_d = [&](double& slot) {
      if (!detail::parse_double(value, slot)) err(lineno, qual, "not a number: '" + value + "'");
    };
    auto set_i = [&](int& slot) {
      if (!detail::parse_int(value, slot)) err(lineno, qual, "not an integer: '" + value + "'");
    };
    auto set_b = [&](bool& slot) {
      if (!detail::parse_bool(value, slot)) err(lineno, qual, "not a boolean: '" + value + "'");
    };

    if (qual == "run.scenario") cfg.scenario = value;
    else if (qual == "density.p") set_d(cfg.density.p);
    else if (qual == "density.b1") set_d(cfg.density.b1);
    else if (qual == "density.bp") set_d(cfg.density.bp);
    else if (qual == "density.eps") set_d(cfg.eps);
    else if (qual == "density.mode") {
      if (value == "surrogate") cfg.mode = DensityMode::surrogate;
      else if (value == "quadrature") cfg.mode = DensityMode::quadrature;
      else err(lineno, qual, "mode must be surrogate or quadrature");
    }
    else if (qual == "grid.shape") cfg.grid_shape = value;
    else if (qual == "grid.R") set_d(cfg.R);
    else if (qual == "grid.h") set_d(cfg.h);
    else if (qual == "grid.nx") set_i(cfg.nx);
    else if (qual == "grid.ny") set_i(cfg.ny);
    else if (qual == "grid.origin_x") set_d(cfg.origin_x);
    else if (qual == "grid.origin_y") set_d(cfg.origin_y);
    else if (qual == "time.dt") set_d(cfg.dt);
    else if (qual == "time.T") set_d(cfg.T);
    else if (qual == "time.steady_stop") set_b(cfg.steady_stop);
    else if (qual == "time.steady_tol") set_d(cfg.steady_tol);
    else if (qual == "time.t_max") set_d(cfg.t_max);
    else if (qual == "time.tail_steps") set_i(cfg.tail_steps);
    else if (qual == "time.tail_dt") set_d(cfg.tail_dt);
    else if (qual == "newton.tol") set_d(cfg.newton_tol);
    else if (qual == "newton.max_iters") set_i(cfg.newton_max);
    else if (qual == "newton.linear_tol") set_d(cfg.linear_tol);
    else if (qual == "newton.damping") set_d(cfg.damping);
    else if (qual == "forcing.f") set_d(cfg.f_const);
    else if (qual == "forcing.q") set_d(cfg.forcing_q);
    else if (qual == "diagnostics.delta") set_d(cfg.delta);
    else if (qual == "diagnostics.nu") set_d(cfg.nu);
    else if (qual == "diagnostics.beta0") set_d(cfg.beta0);
    else if (qual == "diagnostics.sigma") set_d(cfg.sigma);
    else if (qual == "diagnostics.n_pairs") set_i(cfg.n_pairs);
    else if (qual == "diagnostics.moser_theta") set_d(cfg.moser_theta);
    else if (qual == "sweep.eps_list") {
      if (!detail::parse_double_list(value, cfg.eps_list))
        err(lineno, qual, "expected a comma-separated list of numbers");
    }
    else if (qual == "cylinders.auto") cfg.cylinder_auto = value;
    else if (qual == "cylinders.n_annulus") set_i(cfg.n_annulus);
    else if (qual == "cylinders.n_plug") set_i(cfg.n_plug);
    else if (qual == "cylinders.rho") set_d(cfg.cyl_rho);
    else if (qual == "cylinders.cylinder") {
      std::vector<double> vals;
      if (!detail::parse_double_list(value, vals) || vals.size() != 4)
        err(lineno, qual, "expected 'cx,cy,t0,r'");
      else if (vals[3] <= 0.0)
        err(lineno, qual, "cylinder radius must be positive");
      else
        cfg.cylinders.emplace_back(Vec2(vals[0], vals[1]), vals[2], vals[3]);
    }
    else err(lineno, qual, "unknown key");
  }

  // ---- semantic validation: collect every violation -----------------------
  auto check = [&](bool good, const std::string& key, const std::string& msg) {
    if (!good) err(0, key, msg);
  };
  static const std::set<std::string> scenarios = {
      "bingham", "spohn", "separable-heat", "smooth-bump", "traveling-ramp"};
  check(scenarios.count(cfg.scenario) == 1, "run.scenario",
        "unknown scenario '" + cfg.scenario + "'");
  check(cfg.density.p > 1.0, "density.p", "p must exceed 1");
  check(cfg.density.bp > 0.0, "density.bp", "bp must be positive");
  check(cfg.density.b1 >= 0.0, "density.b1", "b1 must be non-negative");
  check(cfg.eps >= 0.0 && cfg.eps < 1.0, "density.eps", "eps must lie in [0,1)");
  if (cfg.eps == 0.0)
    check(cfg.density.b1 == 0.0 && cfg.density.p >= 2.0, "density.eps",
          "eps = 0 requires b1 = 0 and p >= 2");
  check(cfg.grid_shape == "disk" || cfg.grid_shape == "rectangle", "grid.shape",
        "shape must be disk or rectangle");
  check(cfg.R > 0.0, "grid.R", "R must be positive");
  check(cfg.h > 0.0, "grid.h", "h must be positive");
  check(cfg.nx >= 3 && cfg.ny >= 3, "grid.nx", "need at least 3 nodes per direction");
  check(cfg.dt > 0.0, "time.dt", "dt must be positive");
  check(cfg.T > 0.0, "time.T", "T must be positive");
  check(cfg.dt <= cfg.T || cfg.steady_stop, "time.dt", "dt must not exceed T");
  check(cfg.steady_tol > 0.0, "time.steady_tol", "steady_tol must be positive");
  check(cfg.tail_steps >= 0, "time.tail_steps", "tail_steps must be non-negative");
  check(cfg.tail_dt > 0.0, "time.tail_dt", "tail_dt must be positive");
  check(cfg.newton_tol > 0.0, "newton.tol", "tolerance must be positive");
  check(cfg.newton_max > 0, "newton.max_iters", "iteration cap must be positive");
  check(cfg.linear_tol > 0.0, "newton.linear_tol", "tolerance must be positive");
  check(cfg.damping > 0.0 && cfg.damping < 1.0, "newton.damping",
        "damping must lie in (0,1)");
  check(cfg.forcing_q > 4.0, "forcing.q", "q must exceed n + 2 = 4");
  check(cfg.delta > 0.0 && cfg.delta < 1.0, "diagnostics.delta",
        "delta must lie in (0,1)");
  if (cfg.eps > 0.0)
    check(cfg.eps < cfg.delta / 8.0, "density.eps",
          "violates eps < delta/8 (eps = " + std::to_string(cfg.eps) +
              ", delta/8 = " + std::to_string(cfg.delta / 8.0) + ")");
  check(cfg.nu > 0.0 && cfg.nu < 0.25, "diagnostics.nu", "nu must lie in (0, 1/4)");
  check(cfg.beta0 > 0.0 && cfg.beta0 < 1.0, "diagnostics.beta0",
        "beta0 must lie in (0,1)");
  if (std::isfinite(cfg.forcing_q))
    check(cfg.sigma > 2.0 && cfg.sigma < cfg.forcing_q / 2.0, "diagnostics.sigma",
          "sigma must lie in (2, q/2)");
  else
    check(cfg.sigma > 2.0, "diagnostics.sigma", "sigma must exceed 2");
  check(cfg.n_pairs >= 100, "diagnostics.n_pairs", "need at least 100 pairs");
  check(cfg.moser_theta > 0.0 && cfg.moser_theta < 1.0, "diagnostics.moser_theta",
        "theta must lie in (0,1)");
  for (size_t i = 0; i + 1 < cfg.eps_list.size(); ++i)
    check(cfg.eps_list[i] > cfg.eps_list[i + 1], "sweep.eps_list",
          "eps list must strictly decrease");
  for (double e : cfg.eps_list)
    check(e > 0.0 && e < cfg.delta / 8.0, "sweep.eps_list",
          "every sweep eps must satisfy eps < delta/8");
  check(cfg.cylinder_auto.empty() || cfg.cylinder_auto == "bingham",
        "cylinders.auto", "auto must be 'bingham' when set");

  if (out.errors.empty()) out.config = cfg;
  return out;
}

}  // namespace facetflow
