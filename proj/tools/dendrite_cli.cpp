// dendrite: command-line front end for the phase-field dendrite solver.
//
//   dendrite run        --config FILE --out DIR [--preset full|desk] [--k K] [--set key=value]...
//   dendrite converge   --config FILE --out DIR [--k K]
//   dendrite stability  --config FILE --out DIR
//   dendrite check
//   dendrite info       [--config FILE]

#include <dendrite/checks.hpp>
#include <dendrite/config.hpp>
#include <dendrite/experiments.hpp>
#include <dendrite/manufactured.hpp>
#include <dendrite/presets.hpp>
#include <dendrite/sim.hpp>

#include <CLI11.hpp>
#include <fftw3.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dendrite;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string preset = "full";
  int k = 0;  // 0: from config (or all three for converge)
};

ExperimentConfig load(const Options& o) {
  auto cfg = parse_config(o.config, o.overrides, o.preset);
  if (o.k != 0) cfg.sim.scheme.order = o.k;
  cfg.sim.output_dir = o.out;
  return cfg;
}

void print_params(std::ostream& os, const ExperimentConfig& c) {
  const auto& p = c.sim.params;
  const auto& g = c.sim.grid;
  os << "name        " << c.sim.name << '\n'
     << "grid        " << g.dim() << "D, N=" << g.points(0) << ", L=" << g.length(0) << '\n'
     << "model       tau=" << p.tau << " eps=" << p.eps << " lambda=" << p.lambda << " K=" << p.latent_K
     << " D=" << p.diff_D << " sigma=" << p.sigma << " beta=" << p.folds << " form=" << to_string(p.aniso_form)
     << '\n'
     << "stabilizers S1=" << p.s1 << " S2=" << p.s2 << '\n'
     << "time        dt=" << c.sim.scheme.dt << " steps=" << c.sim.n_steps << " T=" << c.final_time.value_or(0.0)
     << " order=" << c.sim.scheme.order << '\n'
     << "initial     " << to_string(c.sim.initial.kind) << '\n';
}

int cmd_run(const Options& o) {
  const auto cfg = load(o);
  print_params(std::cout, cfg);
  const auto r = run(cfg.sim);
  const auto& last = r.reports.empty() ? r.initial : r.reports.back();
  std::cout << std::setprecision(10) << "steps       " << last.step << " (t=" << last.t << ")\n"
            << "final       E=" << last.E << " q=" << last.q << " area=" << last.area << '\n'
            << "zeta cases  " << r.zeta_case_counts[0] << ' ' << r.zeta_case_counts[1] << ' '
            << r.zeta_case_counts[2] << '\n'
            << "wall        " << r.wall_seconds << " s\n"
            << "output      " << o.out << '\n';
  if (cfg.is_manufactured() && r.status == exit_code::ok) {
    const double T = last.t;
    const double ep = std::sqrt(l2_norm_sq(difference(r.final_phi, exact_phi(cfg.sim.grid, T))));
    const double eu = std::sqrt(l2_norm_sq(difference(r.final_u, exact_u(cfg.sim.grid, T))));
    std::cout << "L2 error    phi=" << ep << " u=" << eu << '\n';
  }
  if (r.status != exit_code::ok) std::cerr << "error: " << r.error << '\n';
  return r.status;
}

struct SlopeWindow {
  double lo, hi;
};

SlopeWindow slope_window(int k) {
  switch (k) {
    case 1: return {0.85, 1.15};
    case 2: return {1.8, 2.2};
    default: return {2.6, 3.4};
  }
}

int cmd_converge(const Options& o) {
  const auto cfg = load(o);
  if (!cfg.is_manufactured()) throw ConfigError("initial.kind", 0, "converge needs initial.kind = manufactured");
  const auto mcase = cfg.manufactured();
  std::vector<int> orders = o.k != 0 ? std::vector<int>{o.k} : std::vector<int>{1, 2, 3};
  bool ok = true;
  fs::create_directories(o.out);
  for (int k : orders) {
    const auto res = convergence_study(mcase, k, cfg.converge_dt, false, cfg.sim.scheme);
    std::ofstream csv(fs::path(o.out) / ("convergence_" + cfg.sim.name + "_k" + std::to_string(k) + ".csv"));
    write_convergence_csv(csv, res);
    std::cout << "BDF" << k << " (" << cfg.sim.name << ")\n";
    std::cout << "  dt            err_phi        err_u          case3\n";
    for (const auto& row : res.rows) {
      std::cout << "  " << std::setw(12) << std::left << row.dt << std::right << std::scientific
                << std::setprecision(4) << "  " << row.err_phi << "  " << row.err_u << "  " << row.zeta_cases[2]
                << std::defaultfloat << (row.diverged ? "  diverged: " + row.message : "") << '\n';
    }
    const auto w = slope_window(k);
    const bool pass = !res.any_diverged && res.slope_phi >= w.lo && res.slope_phi <= w.hi && res.slope_u >= w.lo &&
                      res.slope_u <= w.hi;
    std::cout << std::setprecision(4) << "  slope phi=" << res.slope_phi << " u=" << res.slope_u << "  expected ["
              << w.lo << ", " << w.hi << "]  " << (pass ? "ok" : "OUT OF RANGE") << "\n";
    ok = ok && pass;
  }
  return ok ? exit_code::ok : exit_code::acceptance_failure;
}

int cmd_stability(const Options& o) {
  const auto cfg = load(o);
  if (cfg.is_manufactured()) throw ConfigError("initial.kind", 0, "stability needs a physical initial condition");
  const auto rows = stability_sweep(cfg, o.out);
  bool stabilized_ok = true;
  std::cout << "  S      dt      verdict          max dE/E0     case3\n";
  for (const auto& r : rows) {
    std::string verdict = r.status != exit_code::ok ? "diverged" : r.energy_monotone ? "decaying" : "NON-MONOTONE";
    std::cout << "  " << std::setw(5) << r.s << "  " << std::setw(6) << r.dt << "  " << std::setw(14) << std::left
              << verdict << std::right << "  " << std::setw(12) << std::scientific << std::setprecision(3)
              << r.max_rise << std::defaultfloat << "  " << r.case3 << '\n';
    if (r.s > 0.0 && !r.energy_monotone) stabilized_ok = false;
  }
  std::cout << (stabilized_ok ? "stabilized runs: energy decays for every dt\n"
                              : "stabilized runs: energy NOT monotone for some dt\n");
  return stabilized_ok ? exit_code::ok : exit_code::acceptance_failure;
}

int cmd_check() {
  bool ok = true;
  for (const auto& c : run_invariant_checks()) {
    std::cout << describe(c) << '\n';
    ok = ok && c.passed;
  }
  return ok ? exit_code::ok : exit_code::acceptance_failure;
}

int cmd_info(const Options& o) {
  std::cout << "dendrite solver\n"
            << "fft backend  " << fftw_version << '\n'
            << "presets     ";
  for (const auto& n : preset_names()) std::cout << ' ' << n;
  std::cout << '\n';
  if (!o.config.empty()) print_params(std::cout, load(o));
  return exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-field dendritic growth solver"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", o.config, "experiment config (.ini)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override section.key=value (repeatable)");
    auto* out = sub->add_option("--out", o.out, "output directory");
    if (needs_out) out->required();
    sub->add_option("--preset", o.preset, "preset variant")->check(CLI::IsMember({"full", "desk"}));
    sub->add_option("--k", o.k, "BDF order")->check(CLI::IsMember({1, 2, 3}));
  };
  auto* run_cmd = app.add_subcommand("run", "run one simulation");
  add_common(run_cmd, true);
  auto* conv_cmd = app.add_subcommand("converge", "temporal convergence study on a manufactured config");
  add_common(conv_cmd, true);
  auto* stab_cmd = app.add_subcommand("stability", "energy behaviour with and without stabilization");
  add_common(stab_cmd, true);
  auto* check_cmd = app.add_subcommand("check", "built-in invariant checks");
  auto* info_cmd = app.add_subcommand("info", "print build and config information");
  info_cmd->add_option("--config", o.config, "experiment config (.ini)")->check(CLI::ExistingFile);
  info_cmd->add_option("--set", o.overrides, "override section.key=value (repeatable)");
  info_cmd->add_option("--preset", o.preset, "preset variant")->check(CLI::IsMember({"full", "desk"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code::config_error;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(o);
    if (conv_cmd->parsed()) return cmd_converge(o);
    if (stab_cmd->parsed()) return cmd_stability(o);
    if (check_cmd->parsed()) return cmd_check();
    if (info_cmd->parsed()) return cmd_info(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code::config_error;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return exit_code::divergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code::ok;
}
