#pragma once

// Built-in experiment presets. Each has a "full" variant with the published
// parameters and a "desk" variant sized for CI. The shipped configs/*.ini
// files encode the same values.

#include <dendrite/config.hpp>

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dendrite {

enum class PresetVariant { full, desk };

inline PresetVariant parse_variant(const std::string& s) {
  if (s == "full") return PresetVariant::full;
  if (s == "desk") return PresetVariant::desk;
  throw std::invalid_argument("preset variant must be 'full' or 'desk', got '" + s + "'");
}

inline std::vector<std::string> preset_names() {
  return {"isotropic", "anisotropic", "stability", "fourfold", "sixfold", "three_nuclei", "fourfold_3d"};
}

namespace detail {

inline void set_time(ExperimentConfig& c, double dt, double T) {
  c.sim.scheme.dt = dt;
  c.final_time = T;
  c.sim.n_steps = std::lround(T / dt);
}

inline ExperimentConfig manufactured_preset(const ManufacturedCase& m, const std::string& name) {
  ExperimentConfig c;
  c.sim.name = name;
  c.sim.grid = m.grid;
  c.sim.params = m.params;
  c.sim.initial.kind = InitialKind::manufactured;
  c.sim.scheme.order = 3;
  set_time(c, 0.01, 1.0);
  return c;
}

/// Shared 2D dendrite setup: one nucleus of radius 0.02 at the centre.
inline ExperimentConfig dendrite_2d(const std::string& name, double K, PresetVariant v) {
  ExperimentConfig c;
  c.sim.name = name;
  c.sim.grid = Grid::periodic(2, 512);
  auto& p = c.sim.params;
  p.tau = 4.4e3;
  p.eps = 1.12e-2;
  p.lambda = 380.0;
  p.diff_D = 2.25e-4;
  p.latent_K = K;
  p.sigma = 0.05;
  p.folds = 4;
  p.aniso_form = AnisoForm::quartic;
  p.s1 = 4.0;
  p.s2 = 4.0;
  c.sim.scheme.order = 3;
  c.sim.initial.kind = InitialKind::single_nucleus;
  c.sim.initial.centers = {{std::numbers::pi, std::numbers::pi, std::numbers::pi}};
  c.sim.initial.radius = 0.02;
  c.sim.initial.width = 0.072;
  c.sim.initial.u_cold = -0.55;
  c.sim.initial.u_mode = TemperatureInit::sign_rule;
  set_time(c, 0.01, v == PresetVariant::full ? 10.0 : 5.0);
  return c;
}

}  // namespace detail

inline ExperimentConfig preset(const std::string& name, PresetVariant v = PresetVariant::full) {
  ExperimentConfig c;
  if (name == "isotropic") {
    c = detail::manufactured_preset(isotropic_case(128), name);
  } else if (name == "anisotropic") {
    c = detail::manufactured_preset(anisotropic_case(128), name);
  } else if (name == "stability") {
    c.sim.name = name;
    c.sim.grid = Grid::periodic(2, 128);
    auto& p = c.sim.params;
    p.tau = 1e2;
    p.eps = 0.1;
    p.lambda = 1.0;
    p.diff_D = 2.25e-1;
    p.latent_K = 1.0;
    p.sigma = 0.05;
    p.folds = 4;
    p.s1 = 4.0;
    p.s2 = 4.0;
    c.sim.scheme.order = 1;
    c.sim.initial.kind = InitialKind::single_nucleus;
    c.sim.initial.centers = {{std::numbers::pi, std::numbers::pi, std::numbers::pi}};
    c.sim.initial.radius = 1.5;
    c.sim.initial.width = 0.1;
    c.sim.initial.u_cold = -0.55;
    c.sim.initial.u_mode = TemperatureInit::uniform;
    detail::set_time(c, 0.1, 10.0);
  } else if (name == "fourfold") {
    c = detail::dendrite_2d(name, 0.6, v);
  } else if (name == "sixfold") {
    c = detail::dendrite_2d(name, 0.6, v);
    c.sim.params.aniso_form = AnisoForm::trig;
    c.sim.params.folds = 6;
  } else if (name == "three_nuclei") {
    c = detail::dendrite_2d(name, 0.6, v);
    c.sim.initial.kind = InitialKind::three_nuclei;
    c.sim.initial.centers = three_nuclei_centers();
  } else if (name == "fourfold_3d") {
    c.sim.name = name;
    c.sim.grid = Grid::periodic(3, v == PresetVariant::full ? 128 : 64);
    auto& p = c.sim.params;
    p.tau = 2.5e4;
    p.eps = 3e-2;
    p.lambda = 260.0;
    p.diff_D = 2e-4;
    p.latent_K = 1.0;
    p.sigma = 0.05;
    p.folds = 4;
    p.s1 = 4.0;
    p.s2 = 4.0;
    c.sim.scheme.order = 3;
    c.sim.initial.kind = InitialKind::nucleus_3d;
    c.sim.initial.centers = {{std::numbers::pi, std::numbers::pi, std::numbers::pi}};
    c.sim.initial.radius = 0.2;
    c.sim.initial.width = 0.072;
    c.sim.initial.u_cold = -0.55;
    detail::set_time(c, 0.1, v == PresetVariant::full ? 100.0 : 10.0);
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace dendrite
