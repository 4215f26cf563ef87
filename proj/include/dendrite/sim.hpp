#pragma once

// Simulation runner: initial conditions, the time loop, diagnostics.csv,
// binary snapshots with JSON sidecars and run_summary.json.

#include <dendrite/manufactured.hpp>
#include <dendrite/model.hpp>
#include <dendrite/scheme.hpp>
#include <dendrite/spectral.hpp>

#include <json.hpp>

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dendrite {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config_error = 2;
inline constexpr int divergence = 3;
inline constexpr int acceptance_failure = 4;
}  // namespace exit_code

enum class InitialKind { single_nucleus, three_nuclei, nucleus_3d, manufactured };

inline const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::single_nucleus: return "single_nucleus";
    case InitialKind::three_nuclei: return "three_nuclei";
    case InitialKind::nucleus_3d: return "nucleus_3d";
    case InitialKind::manufactured: return "manufactured";
  }
  return "?";
}

/// How the initial temperature is built from phi0.
enum class TemperatureInit {
  sign_rule,  // 0 where phi0 > 0, u_cold elsewhere
  uniform,    // u_cold everywhere
};

using Point = std::array<double, 3>;

struct InitialCondition {
  InitialKind kind = InitialKind::single_nucleus;
  std::vector<Point> centers{{std::numbers::pi, std::numbers::pi, std::numbers::pi}};
  double radius = 0.02;
  double width = 0.072;
  double u_cold = -0.55;
  TemperatureInit u_mode = TemperatureInit::sign_rule;
};

struct SimConfig {
  std::string name = "run";
  Grid grid = Grid::periodic(2, 128);
  ModelParams params;
  SchemeOptions scheme;
  long n_steps = 1;
  long snapshot_every = 100;    // 0 disables snapshots
  long diagnostics_every = 1;   // 0 disables diagnostics.csv
  InitialCondition initial;
  std::filesystem::path output_dir;  // empty: no files written
  std::uint64_t seed = 0;            // reserved

  void validate() const {
    params.validate(grid.dim());
    if (!(scheme.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
    BdfTableau::of(scheme.order);
    const bool want3d = initial.kind == InitialKind::nucleus_3d;
    if (want3d != (grid.dim() == 3)) {
      throw std::invalid_argument(std::string("initial condition ") + to_string(initial.kind) +
                                  " does not match grid dimension " + std::to_string(grid.dim()));
    }
    if (initial.kind == InitialKind::three_nuclei && initial.centers.size() != 3) {
      throw std::invalid_argument("three_nuclei needs exactly 3 centers");
    }
    if (initial.kind != InitialKind::manufactured && initial.centers.empty()) {
      throw std::invalid_argument("initial condition needs a center");
    }
  }
};

// -- initial conditions ------------------------------------------------------------------

namespace detail {
inline double distance(const Point& c, double x, double y, double z, int dim) {
  const double dx = x - c[0], dy = y - c[1];
  const double dz = dim == 3 ? z - c[2] : 0.0;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline RealField temperature_from(const RealField& phi0, double u_cold, TemperatureInit mode) {
  RealField u(phi0.grid, u_cold);
  if (mode == TemperatureInit::sign_rule) {
    for (std::size_t i = 0; i < u.size(); ++i)
      if (phi0[i] > 0.0) u[i] = 0.0;
  }
  return u;
}
}  // namespace detail

inline std::pair<RealField, RealField> init_single_nucleus(const Grid& grid, const Point& center, double radius,
                                                           double width, double u_cold,
                                                           TemperatureInit mode = TemperatureInit::sign_rule) {
  const int dim = grid.dim();
  auto phi = sample(grid, [&](double x, double y, double z) {
    return std::tanh((radius - detail::distance(center, x, y, z, dim)) / width);
  });
  auto u = detail::temperature_from(phi, u_cold, mode);
  return {std::move(phi), std::move(u)};
}

/// sum_i tanh((radius - r_i) / width) + (n - 1): each nucleus adds +1 inside, -1 outside.
inline std::pair<RealField, RealField> init_three_nuclei(const Grid& grid, const std::vector<Point>& centers,
                                                         double radius, double width, double u_cold,
                                                         TemperatureInit mode = TemperatureInit::sign_rule) {
  if (grid.dim() != 2) throw UnsupportedConfiguration("three_nuclei is a 2D initial condition");
  const double offset = static_cast<double>(centers.size()) - 1.0;
  auto phi = sample(grid, [&](double x, double y, double z) {
    double s = offset;
    for (const auto& c : centers) s += std::tanh((radius - detail::distance(c, x, y, z, 2)) / width);
    return s;
  });
  auto u = detail::temperature_from(phi, u_cold, mode);
  return {std::move(phi), std::move(u)};
}

inline std::pair<RealField, RealField> init_nucleus_3d(const Grid& grid, const Point& center, double radius,
                                                       double width, double u_cold = -0.55) {
  if (grid.dim() != 3) throw UnsupportedConfiguration("nucleus_3d needs a 3D grid");
  return init_single_nucleus(grid, center, radius, width, u_cold, TemperatureInit::sign_rule);
}

inline std::vector<Point> three_nuclei_centers() {
  constexpr double pi = std::numbers::pi;
  return {{0.8 * pi, 1.3 * pi, 0.0}, {0.75 * pi, 0.75 * pi, 0.0}, {1.3 * pi, pi, 0.0}};
}

/// Manufactured runs carry an exact-solution forcing; its kind follows sigma.
inline ManufacturedCase manufactured_case_for(const SimConfig& c) {
  ManufacturedCase m;
  m.kind = c.params.sigma == 0.0 ? ManufacturedKind::isotropic : ManufacturedKind::anisotropic;
  m.params = c.params;
  m.grid = c.grid;
  m.final_time = c.scheme.dt * static_cast<double>(c.n_steps);
  return m;
}

inline std::pair<RealField, RealField> build_initial(const SimConfig& c) {
  const auto& ic = c.initial;
  switch (ic.kind) {
    case InitialKind::single_nucleus:
      return init_single_nucleus(c.grid, ic.centers.front(), ic.radius, ic.width, ic.u_cold, ic.u_mode);
    case InitialKind::three_nuclei:
      return init_three_nuclei(c.grid, ic.centers, ic.radius, ic.width, ic.u_cold, ic.u_mode);
    case InitialKind::nucleus_3d: return init_nucleus_3d(c.grid, ic.centers.front(), ic.radius, ic.width, ic.u_cold);
    case InitialKind::manufactured: return {exact_phi(c.grid, 0.0), exact_u(c.grid, 0.0)};
  }
  throw std::invalid_argument("unknown initial condition");
}

// -- snapshots -----------------------------------------------------------------------------

struct SnapshotError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SnapshotMeta {
  int dim = 2;
  std::vector<int> shape;
  std::vector<double> lengths;
  double time = 0.0;
  std::string field;
  std::string endianness = "little";
  int version = 1;
};

inline constexpr int kSnapshotVersion = 1;

inline std::string snapshot_stem(const std::string& name, long step) {
  std::ostringstream os;
  os << name << '_' << std::setw(6) << std::setfill('0') << step;
  return os.str();
}

/// Writes <dir>/<name>_<step>.bin (raw little-endian doubles, row-major) and the .json sidecar.
inline std::filesystem::path write_snapshot(const RealField& f, const std::filesystem::path& dir,
                                            const std::string& name, long step, double time) {
  std::filesystem::create_directories(dir);
  const auto stem = dir / snapshot_stem(name, step);
  auto bin = stem;
  bin += ".bin";
  auto js = stem;
  js += ".json";
  {
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw SnapshotError("cannot open " + bin.string());
    if constexpr (std::endian::native == std::endian::little) {
      os.write(reinterpret_cast<const char*>(f.values.data()),
               static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    } else {
      for (double v : f.values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
      }
    }
  }
  nlohmann::ordered_json meta;
  meta["dim"] = f.grid.dim();
  std::vector<int> shape;
  std::vector<double> lengths;
  for (int i = 0; i < f.grid.dim(); ++i) {
    shape.push_back(f.grid.points(i));
    lengths.push_back(f.grid.length(i));
  }
  meta["shape"] = shape;
  meta["lengths"] = lengths;
  meta["time"] = time;
  meta["field"] = name;
  meta["endianness"] = "little";
  meta["version"] = kSnapshotVersion;
  std::ofstream jo(js);
  jo << std::setprecision(17) << meta.dump(2) << '\n';
  return bin;
}

/// Accepts the .bin path, the .json path or the common stem.
inline std::pair<RealField, SnapshotMeta> read_snapshot(std::filesystem::path path) {
  if (path.extension() == ".bin" || path.extension() == ".json") path.replace_extension();
  auto bin = path;
  bin += ".bin";
  auto js = path;
  js += ".json";

  std::ifstream ji(js);
  if (!ji) throw SnapshotError("missing snapshot sidecar " + js.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ji);
  } catch (const std::exception& e) {
    throw SnapshotError("malformed snapshot sidecar " + js.string() + ": " + e.what());
  }
  auto need = [&](const char* key) -> const nlohmann::json& {
    if (!meta.contains(key)) throw SnapshotError(std::string("snapshot header missing key '") + key + "'");
    return meta.at(key);
  };
  SnapshotMeta m;
  try {
    m.version = need("version").get<int>();
    if (m.version != kSnapshotVersion) throw SnapshotError("snapshot header key 'version': unsupported value");
    m.endianness = need("endianness").get<std::string>();
    if (m.endianness != "little") throw SnapshotError("snapshot header key 'endianness': expected \"little\"");
    m.dim = need("dim").get<int>();
    m.shape = need("shape").get<std::vector<int>>();
    m.lengths = need("lengths").get<std::vector<double>>();
    m.time = need("time").get<double>();
    m.field = need("field").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError(std::string("snapshot header type error: ") + e.what());
  }
  if (m.dim != 2 && m.dim != 3) throw SnapshotError("snapshot header key 'dim': must be 2 or 3");
  if (static_cast<int>(m.shape.size()) != m.dim) throw SnapshotError("snapshot header key 'shape': length != dim");
  if (static_cast<int>(m.lengths.size()) != m.dim) throw SnapshotError("snapshot header key 'lengths': length != dim");

  std::array<int, 3> pts{1, 1, 1};
  std::array<double, 3> len{0, 0, 0};
  for (int i = 0; i < m.dim; ++i) {
    pts[i] = m.shape[i];
    len[i] = m.lengths[i];
  }
  Grid grid;
  try {
    grid = Grid(m.dim, pts, len);
  } catch (const std::invalid_argument& e) {
    throw SnapshotError(std::string("snapshot header key 'shape': ") + e.what());
  }
  RealField f(grid);
  std::ifstream bi(bin, std::ios::binary | std::ios::ate);
  if (!bi) throw SnapshotError("missing snapshot data " + bin.string());
  const auto bytes = static_cast<std::size_t>(bi.tellg());
  if (bytes != f.size() * sizeof(double)) throw SnapshotError("snapshot data size does not match header key 'shape'");
  bi.seekg(0);
  std::vector<unsigned char> raw(bytes);
  bi.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[8 * i + b]) << (8 * b);
    f.values[i] = std::bit_cast<double>(bits);
  }
  return {std::move(f), std::move(m)};
}

// -- diagnostics ------------------------------------------------------------------------------

inline constexpr const char* kDiagnosticsHeader = "step,t,E,E1,q,qbar,xi,eta,zeta,zeta_case,H,area";

inline void write_diagnostics_row(std::ostream& os, const StepReport& r) {
  os << r.step << ',' << r.t << ',' << r.E << ',' << r.E1 << ',' << r.q << ',' << r.qbar << ',' << r.xi << ','
     << r.eta << ',' << r.zeta << ',' << r.zeta_case << ',' << r.dissipation << ',' << r.area << '\n';
}

/// Row for the initial state (zeta_case = 0 marks "no step taken").
inline StepReport initial_report(const RealField& phi, const RealField& u, const ModelParams& p) {
  StepReport r;
  const auto e = energy_parts(phi, u, p);
  r.E = e.total;
  r.E1 = e.e1;
  r.q = r.qbar = r.q_prev = r.E_bar = e.total;
  r.dissipation = dissipation_H(phi, u, p);
  r.area = crystal_area(phi);
  r.zeta_case = 0;
  r.order = 0;
  return r;
}

// -- runner --------------------------------------------------------------------------------------

struct RunResult {
  int status = exit_code::ok;
  std::string error;
  StepReport initial;
  std::vector<StepReport> reports;          // one per coarse step
  std::vector<StepReport> startup_reports;  // fine start-up steps, if any
  std::array<long, 3> zeta_case_counts{0, 0, 0};
  long linear_solves = 0;
  long advances = 0;
  long monotonicity_warnings = 0;
  double wall_seconds = 0.0;
  RealField final_phi;
  RealField final_u;
};

inline void write_run_summary(const std::filesystem::path& path, const SimConfig& c, const RunResult& r) {
  nlohmann::ordered_json j;
  j["name"] = c.name;
  j["status"] = r.status;
  if (!r.error.empty()) j["error"] = r.error;
  const StepReport& last = r.reports.empty() ? r.initial : r.reports.back();
  j["steps"] = last.step;
  j["final"] = {{"t", last.t}, {"E", last.E}, {"E1", last.E1}, {"q", last.q}, {"area", last.area}};
  j["zeta_case_counts"] = r.zeta_case_counts;
  j["monotonicity_warnings"] = r.monotonicity_warnings;
  j["linear_solves"] = r.linear_solves;
  j["advances"] = r.advances;
  j["wall_seconds"] = r.wall_seconds;
  std::ofstream os(path);
  os << std::setprecision(17) << j.dump(2) << '\n';
}

/// Build the initial state, run n_steps and persist outputs under output_dir.
/// Divergence is reported through status/error; outputs written so far are kept.
inline RunResult run(const SimConfig& config) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  RunResult result;
  const bool files = !config.output_dir.empty();
  std::ofstream diag;
  if (files) {
    std::filesystem::create_directories(config.output_dir);
    if (config.diagnostics_every > 0) {
      diag.open(config.output_dir / "diagnostics.csv");
      diag << std::setprecision(17) << kDiagnosticsHeader << '\n';
    }
  }
  auto record = [&](const StepReport& r) {
    if (diag.is_open() && r.step % config.diagnostics_every == 0) write_diagnostics_row(diag, r);
  };
  // `back` selects a level in the history (0 = newest). The last step is always written.
  auto snapshot = [&](const StepperState& s, long step, double t, std::size_t back = 0) {
    if (!files || config.snapshot_every <= 0) return;
    if (step % config.snapshot_every != 0 && step != config.n_steps) return;
    write_snapshot(s.history_phi.at(back), config.output_dir, "phi", step, t);
    write_snapshot(s.history_u.at(back), config.output_dir, "u", step, t);
  };

  auto [phi0, u0] = build_initial(config);
  SchemeOptions opt = config.scheme;
  Forcing forcing;
  if (config.initial.kind == InitialKind::manufactured) {
    opt.forced = true;
    auto mcase = manufactured_case_for(config);
    forcing = [mcase](double t) { return dendrite::forcing(mcase, t); };
  }
  StepperState state(config.grid, config.params, opt);
  result.initial = initial_report(phi0, u0, config.params);
  record(result.initial);

  try {
    result.startup_reports = startup(state, std::move(phi0), std::move(u0), forcing);
    for (long level = 0; level <= state.step_index; ++level) {
      snapshot(state, level, static_cast<double>(level) * config.scheme.dt,
               static_cast<std::size_t>(state.step_index - level));
    }
    // Coarse-step rows for the levels produced during start-up.
    if (!result.startup_reports.empty()) {
      const auto per = result.startup_reports.size() / static_cast<std::size_t>(state.step_index);
      for (long level = 1; level <= state.step_index; ++level) {
        StepReport r = result.startup_reports[static_cast<std::size_t>(level) * per - 1];
        r.step = level;
        r.t = static_cast<double>(level) * config.scheme.dt;
        r.dt = config.scheme.dt;
        r.q_prev = level == 1 ? result.initial.q : result.reports.back().q;
        result.reports.push_back(r);
        record(r);
      }
    }
    while (state.step_index < config.n_steps) {
      auto r = advance(state, forcing);
      ++result.advances;
      result.reports.push_back(r);
      record(r);
      snapshot(state, r.step, r.t);
    }
  } catch (const DivergenceError& e) {
    result.status = exit_code::divergence;
    result.error = e.what();
  }
  result.zeta_case_counts = state.zeta_case_counts;
  result.linear_solves = state.linear_solves;
  result.monotonicity_warnings = state.monotonicity_warnings;
  if (!state.history_phi.empty()) {
    result.final_phi = state.phi();
    result.final_u = state.u();
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (files) write_run_summary(config.output_dir / "run_summary.json", config, result);
  return result;
}

}  // namespace dendrite
