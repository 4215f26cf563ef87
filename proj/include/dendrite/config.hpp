#pragma once

// INI-style experiment configuration. Sections [grid] [model] [time] [scheme]
// [initial] [output] plus [manufactured] and [stability] for the sweep
// commands. [preset.desk] / [preset.full] hold "section.key = value" lines
// applied on top when that preset is selected; --set overrides come last.

#include <dendrite/manufactured.hpp>
#include <dendrite/model.hpp>
#include <dendrite/scheme.hpp>
#include <dendrite/sim.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dendrite {

struct ConfigError : std::runtime_error {
  std::string key;
  int line = 0;  // 0: not from a file line (override or whole-config invariant)
  ConfigError(std::string key_, int line_, const std::string& what)
      : std::runtime_error(format(key_, line_, what)), key(std::move(key_)), line(line_) {}

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!key.empty()) s += key + ": ";
    return s + what;
  }
};

struct ExperimentConfig {
  SimConfig sim;
  std::optional<double> final_time;
  std::optional<long> steps;
  std::vector<double> converge_dt{default_dt_list()};
  std::vector<double> stability_dt{0.05, 0.1, 0.5, 1.0};
  std::vector<double> stability_s{4.0, 0.0};

  bool is_manufactured() const { return sim.initial.kind == InitialKind::manufactured; }

  /// Manufactured case built from the same grid and model block.
  ManufacturedCase manufactured() const {
    auto c = manufactured_case_for(sim);
    if (final_time) c.final_time = *final_time;
    return c;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

/// '#' starts a comment anywhere; ';' only at the start of a line, since it separates points.
inline std::string strip_comment(const std::string& line) {
  const auto first = line.find_first_not_of(" \t");
  if (first != std::string::npos && line[first] == ';') return "";
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

/// Reals with an optional pi factor: "0.1", "1e-3", "2pi", "4*pi/5", "pi", "-0.55".
inline std::optional<double> parse_real(const std::string& raw) {
  static const std::regex re(R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*(\*?\s*pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$)");
  std::smatch m;
  if (!std::regex_match(raw, m, re)) return std::nullopt;
  if (!m[1].matched && !m[2].matched) return std::nullopt;
  double v = 1.0;
  if (m[1].matched) {
    auto x = to_number(m[1].str());
    if (!x) return std::nullopt;
    v = *x;
  }
  if (m[2].matched) v *= std::numbers::pi;
  if (m[3].matched) {
    auto d = to_number(m[3].str());
    if (!d || *d == 0.0) return std::nullopt;
    v /= *d;
  }
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

inline ConfigError type_error(const std::string& key, const Entry& e, const char* expected) {
  return ConfigError(key, e.line, std::string("expected ") + expected + ", got '" + e.value + "'");
}

inline double as_real(const std::string& key, const Entry& e) {
  auto v = parse_real(e.value);
  if (!v) throw type_error(key, e, "a real number");
  return *v;
}

inline long as_int(const std::string& key, const Entry& e) {
  long v = 0;
  const auto s = trim(e.value);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw type_error(key, e, "an integer");
  return v;
}

inline bool as_bool(const std::string& key, const Entry& e) {
  const auto s = trim(e.value);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw type_error(key, e, "a boolean");
}

inline std::vector<double> as_real_list(const std::string& key, const Entry& e) {
  std::vector<double> out;
  for (const auto& item : split(e.value, ',')) {
    auto v = parse_real(item);
    if (!v) throw type_error(key, e, "a comma-separated list of reals");
    out.push_back(*v);
  }
  if (out.empty()) throw type_error(key, e, "a non-empty list");
  return out;
}

/// Points separated by ';', coordinates by ','.
inline std::vector<Point> as_points(const std::string& key, const Entry& e) {
  std::vector<Point> out;
  for (const auto& item : split(e.value, ';')) {
    if (item.empty()) continue;
    Entry sub{item, e.line};
    auto xs = as_real_list(key, sub);
    if (xs.size() < 2 || xs.size() > 3) throw type_error(key, e, "points with 2 or 3 coordinates");
    Point p{xs[0], xs[1], xs.size() == 3 ? xs[2] : std::numbers::pi};
    out.push_back(p);
  }
  if (out.empty()) throw type_error(key, e, "at least one point");
  return out;
}

struct GridSpec {
  int dim = 2;
  int n = 128;
  double length = 2.0 * std::numbers::pi;
};

struct Builder {
  ExperimentConfig cfg;
  GridSpec grid;
};

inline const std::map<std::string, std::function<void(Builder&, const std::string&, const Entry&)>>& setters() {
  using F = std::function<void(Builder&, const std::string&, const Entry&)>;
  static const std::map<std::string, F> table = {
      {"grid.dim", [](Builder& b, const std::string& k, const Entry& e) { b.grid.dim = static_cast<int>(as_int(k, e)); }},
      {"grid.n", [](Builder& b, const std::string& k, const Entry& e) { b.grid.n = static_cast<int>(as_int(k, e)); }},
      {"grid.length", [](Builder& b, const std::string& k, const Entry& e) { b.grid.length = as_real(k, e); }},
      {"model.tau", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.tau = as_real(k, e); }},
      {"model.eps", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.eps = as_real(k, e); }},
      {"model.lambda", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.lambda = as_real(k, e); }},
      {"model.K", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.latent_K = as_real(k, e); }},
      {"model.D", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.diff_D = as_real(k, e); }},
      {"model.sigma", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.sigma = as_real(k, e); }},
      {"model.beta", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.folds = static_cast<int>(as_int(k, e)); }},
      {"model.S1", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.s1 = as_real(k, e); }},
      {"model.S2", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.params.s2 = as_real(k, e); }},
      {"model.form",
       [](Builder& b, const std::string& k, const Entry& e) {
         const auto s = trim(e.value);
         if (s == "quartic") b.cfg.sim.params.aniso_form = AnisoForm::quartic;
         else if (s == "trig") b.cfg.sim.params.aniso_form = AnisoForm::trig;
         else throw type_error(k, e, "'quartic' or 'trig'");
       }},
      {"time.dt", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.dt = as_real(k, e); }},
      {"time.T", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.final_time = as_real(k, e); }},
      {"time.steps", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.steps = as_int(k, e); }},
      {"scheme.order", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.order = static_cast<int>(as_int(k, e)); }},
      {"scheme.step2", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.step2 = as_bool(k, e); }},
      {"scheme.dealias", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.dealias = as_bool(k, e); }},
      {"scheme.forcing_work", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.forcing_work = as_bool(k, e); }},
      {"scheme.startup_substeps",
       [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.scheme.startup_substeps = static_cast<int>(as_int(k, e)); }},
      {"initial.kind",
       [](Builder& b, const std::string& k, const Entry& e) {
         const auto s = trim(e.value);
         auto& kind = b.cfg.sim.initial.kind;
         if (s == "single_nucleus") kind = InitialKind::single_nucleus;
         else if (s == "three_nuclei") kind = InitialKind::three_nuclei;
         else if (s == "nucleus_3d") kind = InitialKind::nucleus_3d;
         else if (s == "manufactured") kind = InitialKind::manufactured;
         else throw type_error(k, e, "single_nucleus, three_nuclei, nucleus_3d or manufactured");
       }},
      {"initial.centers", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.initial.centers = as_points(k, e); }},
      {"initial.radius", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.initial.radius = as_real(k, e); }},
      {"initial.width", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.initial.width = as_real(k, e); }},
      {"initial.u_cold", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.initial.u_cold = as_real(k, e); }},
      {"initial.u_mode",
       [](Builder& b, const std::string& k, const Entry& e) {
         const auto s = trim(e.value);
         if (s == "sign") b.cfg.sim.initial.u_mode = TemperatureInit::sign_rule;
         else if (s == "uniform") b.cfg.sim.initial.u_mode = TemperatureInit::uniform;
         else throw type_error(k, e, "'sign' or 'uniform'");
       }},
      {"output.name", [](Builder& b, const std::string&, const Entry& e) { b.cfg.sim.name = trim(e.value); }},
      {"output.snapshot_every", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.snapshot_every = as_int(k, e); }},
      {"output.diagnostics_every",
       [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.diagnostics_every = as_int(k, e); }},
      {"output.seed",
       [](Builder& b, const std::string& k, const Entry& e) { b.cfg.sim.seed = static_cast<std::uint64_t>(as_int(k, e)); }},
      {"manufactured.dt_list", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.converge_dt = as_real_list(k, e); }},
      {"stability.dt_list", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.stability_dt = as_real_list(k, e); }},
      {"stability.s_values", [](Builder& b, const std::string& k, const Entry& e) { b.cfg.stability_s = as_real_list(k, e); }},
  };
  return table;
}

inline const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"grid.n",    "model.tau", "model.eps", "model.lambda", "model.K",
                                                "model.D",   "time.dt",   "initial.kind"};
  return keys;
}

struct ParsedText {
  std::map<std::string, Entry> base;                                 // section.key -> value
  std::map<std::string, std::map<std::string, Entry>> presets;      // preset name -> overrides
};

inline ParsedText parse_ini(std::istream& in) {
  ParsedText out;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", line_no, "malformed section header '" + line + "'");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.rfind("preset.", 0) == 0) out.presets[section.substr(7)];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", line_no, "expected 'key = value'");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(key, line_no, "key outside of any section");
    if (section.rfind("preset.", 0) == 0) {
      auto& slot = out.presets[section.substr(7)];
      if (slot.count(key)) throw ConfigError(section + "." + key, line_no, "duplicate key");
      slot[key] = {value, line_no};
    } else {
      const auto path = section + "." + key;
      if (out.base.count(path)) throw ConfigError(path, line_no, "duplicate key");
      out.base[path] = {value, line_no};
    }
  }
  return out;
}

inline void apply(Builder& b, const std::string& key, const Entry& e) {
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, e.line, "unknown key");
  it->second(b, key, e);
}

inline ExperimentConfig finish(Builder& b, const std::map<std::string, Entry>& merged) {
  for (const auto& k : required_keys()) {
    if (!merged.count(k)) throw ConfigError(k, 0, "missing required key");
  }
  auto line_of = [&](const std::string& k) {
    auto it = merged.find(k);
    return it == merged.end() ? 0 : it->second.line;
  };
  auto& cfg = b.cfg;
  try {
    cfg.sim.grid = Grid::periodic(b.grid.dim, b.grid.n, b.grid.length);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("grid.n", line_of("grid.n"), e.what());
  }
  try {
    cfg.sim.params.validate(b.grid.dim);
  } catch (const std::exception& e) {
    const std::string what = e.what();
    const std::string first = what.substr(0, what.find(' '));
    static const std::map<std::string, std::string> by_word = {
        {"tau", "model.tau"},     {"eps", "model.eps"},     {"lambda", "model.lambda"}, {"K", "model.K"},
        {"D", "model.D"},         {"sigma", "model.sigma"}, {"folds", "model.beta"},    {"stabilizers", "model.S1"},
        {"quartic", "model.beta"}, {"trig", "model.form"},   {"3D", "model.beta"}};
    auto it = by_word.find(first);
    const std::string key = it == by_word.end() ? "model" : it->second;
    throw ConfigError(key, line_of(key), what);
  }
  const double dt = cfg.sim.scheme.dt;
  if (!(dt > 0.0)) throw ConfigError("time.dt", line_of("time.dt"), "must be > 0");
  if (cfg.steps && cfg.final_time) {
    throw ConfigError("time.steps", line_of("time.steps"), "give either time.T or time.steps, not both");
  }
  if (cfg.final_time) {
    const double ratio = *cfg.final_time / dt;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("time.T", line_of("time.T"), "must be a positive integer multiple of time.dt");
    }
    cfg.sim.n_steps = n;
  } else if (cfg.steps) {
    cfg.sim.n_steps = *cfg.steps;
    cfg.final_time = static_cast<double>(*cfg.steps) * dt;
  } else if (!cfg.is_manufactured()) {
    throw ConfigError("time.T", 0, "missing required key (or time.steps)");
  }
  if (cfg.sim.scheme.order < 1 || cfg.sim.scheme.order > 3) {
    throw ConfigError("scheme.order", line_of("scheme.order"), "must be 1, 2 or 3");
  }
  if (cfg.is_manufactured()) {
    if (!cfg.final_time) cfg.final_time = 1.0;
    try {
      cfg.manufactured().validate();
    } catch (const std::exception& e) {
      throw ConfigError("initial.kind", line_of("initial.kind"), e.what());
    }
  }
  try {
    cfg.sim.validate();
  } catch (const std::exception& e) {
    throw ConfigError("initial.kind", line_of("initial.kind"), e.what());
  }
  return cfg;
}

}  // namespace detail

/// Parse configuration text. `preset` selects a [preset.<name>] block ("" or
/// "full" without such a block means the base values). Overrides are "section.key=value".
inline ExperimentConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {},
                                          const std::string& preset = "") {
  std::istringstream in(text);
  auto parsed = detail::parse_ini(in);
  auto merged = parsed.base;
  if (!preset.empty()) {
    auto it = parsed.presets.find(preset);
    if (it == parsed.presets.end()) {
      if (preset != "full") throw ConfigError("preset." + preset, 0, "preset not defined in config");
    } else {
      for (const auto& [k, e] : it->second) merged[k] = e;
    }
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigError(ov, 0, "override must look like section.key=value");
    merged[detail::trim(std::string_view(ov).substr(0, eq))] = {detail::trim(std::string_view(ov).substr(eq + 1)), 0};
  }
  detail::Builder b;
  b.cfg.sim.params.s1 = 0.0;
  b.cfg.sim.params.s2 = 0.0;
  b.cfg.sim.params.sigma = 0.0;
  for (const auto& [k, e] : merged) detail::apply(b, k, e);
  return detail::finish(b, merged);
}

inline ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                                     const std::string& preset = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), overrides, preset);
}

}  // namespace dendrite
