#pragma once

// Experiment drivers built on run(): the stabilization sweep and helpers that
// read monotonicity and growth verdicts off a run's reports.

#include <dendrite/config.hpp>
#include <dendrite/sim.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace dendrite {

/// Largest rise E^{n+1} - E^n over a run, relative to E(0). Non-positive means monotone.
inline double max_energy_rise(const RunResult& r) {
  double worst = -1e300, prev = r.initial.E;
  for (const auto& s : r.reports) {
    worst = std::max(worst, s.E - prev);
    prev = s.E;
  }
  return r.reports.empty() ? 0.0 : worst / std::abs(r.initial.E);
}

/// Largest relative rise of q; the scheme guarantees this is <= 0 up to roundoff.
inline double max_q_rise(const RunResult& r) {
  double worst = -1e300, prev = r.initial.q;
  for (const auto& s : r.reports) {
    worst = std::max(worst, (s.q - prev) / prev);
    prev = s.q;
  }
  for (const auto& s : r.startup_reports) worst = std::max(worst, (s.q - s.q_prev) / s.q_prev);
  return r.reports.empty() ? 0.0 : worst;
}

/// True if area strictly increases at every step after `from_step`.
inline bool area_strictly_increasing(const RunResult& r, long from_step) {
  double prev = -1.0;
  bool first = true;
  for (const auto& s : r.reports) {
    if (s.step < from_step) continue;
    if (!first && !(s.area > prev)) return false;
    prev = s.area;
    first = false;
  }
  return !first;
}

struct StabilityRow {
  double s = 0.0;
  double dt = 0.0;
  int status = exit_code::ok;
  std::string error;
  double max_rise = 0.0;  // relative to E(0)
  bool energy_monotone = false;
  long case3 = 0;
  double final_E = 0.0;
};

inline constexpr double kEnergyMonotoneTol = 1e-8;

inline std::string stability_subdir(double s, double dt) {
  std::ostringstream os;
  os << "S" << s << "_dt" << dt;
  return os.str();
}

using RunObserver = std::function<void(const SimConfig&, const RunResult&)>;

/// Every (S1 = S2 = s, dt) pair from the config, each run to the config's final time.
inline std::vector<StabilityRow> stability_sweep(const ExperimentConfig& base, const std::filesystem::path& out_dir,
                                                 const RunObserver& observe = {}) {
  std::vector<StabilityRow> rows;
  const double T = base.final_time.value_or(static_cast<double>(base.sim.n_steps) * base.sim.scheme.dt);
  for (double s : base.stability_s) {
    for (double dt : base.stability_dt) {
      SimConfig c = base.sim;
      c.params.s1 = c.params.s2 = s;
      c.scheme.dt = dt;
      c.n_steps = std::max(1L, std::lround(T / dt));
      c.snapshot_every = 0;
      if (!out_dir.empty()) c.output_dir = out_dir / stability_subdir(s, dt);
      const auto r = run(c);
      if (observe) observe(c, r);
      StabilityRow row;
      row.s = s;
      row.dt = dt;
      row.status = r.status;
      row.error = r.error;
      row.max_rise = max_energy_rise(r);
      row.energy_monotone = r.status == exit_code::ok && row.max_rise <= kEnergyMonotoneTol;
      row.case3 = r.zeta_case_counts[2];
      row.final_E = r.reports.empty() ? r.initial.E : r.reports.back().E;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace dendrite
