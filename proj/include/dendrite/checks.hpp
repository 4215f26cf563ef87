#pragma once

// Self-contained invariant checks shared by the `check` subcommand and the
// acceptance binary.

#include <dendrite/model.hpp>
#include <dendrite/presets.hpp>
#include <dendrite/scheme.hpp>
#include <dendrite/sim.hpp>
#include <dendrite/spectral.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dendrite {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

inline std::string describe(const CheckResult& c) {
  std::ostringstream os;
  os.precision(3);
  os << (c.passed ? "PASS " : "FAIL ") << c.name << "  measured=" << c.measured << " tol=" << c.tolerance;
  if (!c.detail.empty()) os << "  (" << c.detail << ")";
  return os.str();
}

/// Random 2D gradients with |g| log-uniform in [0.1, 10] and uniform direction.
inline std::vector<std::array<double, 2>> random_gradients(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> logr(std::log(0.1), std::log(10.0));
  std::vector<std::array<double, 2>> out(n);
  for (auto& g : out) {
    const double r = std::exp(logr(rng)), a = angle(rng);
    g = {r * std::cos(a), r * std::sin(a)};
  }
  return out;
}

inline ModelParams check_params(AnisoForm form, double sigma = 0.05) {
  ModelParams p;
  p.sigma = sigma;
  p.folds = 4;
  p.aniso_form = form;
  return p;
}

/// Quartic and trigonometric fourfold m agree.
inline CheckResult check_aniso_forms_agree(std::size_t n = 10000, std::uint64_t seed = 1) {
  const auto pq = check_params(AnisoForm::quartic), pt = check_params(AnisoForm::trig);
  double worst = 0.0;
  for (const auto& g : random_gradients(n, seed)) {
    const double mq = anisotropy_at(g, pq).m, mt = anisotropy_at(g, pt).m;
    worst = std::max(worst, std::abs(mq - mt));
  }
  return {"anisotropy quartic vs trig m", worst <= 1e-12, worst, 1e-12, std::to_string(n) + " gradients"};
}

/// H against a central finite difference of m in the gradient variable.
inline CheckResult check_aniso_H_gradient(AnisoForm form, std::size_t n = 10000, std::uint64_t seed = 2) {
  const auto p = check_params(form);
  double worst = 0.0;
  for (const auto& g : random_gradients(n, seed)) {
    const double r = std::hypot(g[0], g[1]);
    const double h = 1e-5 * r;
    const auto H = anisotropy_at(g, p).H;
    double err2 = 0.0, ref2 = 0.0;
    for (int d = 0; d < 2; ++d) {
      auto gp = g, gm = g;
      gp[d] += h;
      gm[d] -= h;
      const double fd = (anisotropy_at(gp, p).m - anisotropy_at(gm, p).m) / (2.0 * h);
      err2 += (H[d] - fd) * (H[d] - fd);
      ref2 += H[d] * H[d];
    }
    // Near directions where H vanishes, measure against the natural scale sigma/|g|.
    const double scale = std::max(std::sqrt(ref2), p.sigma / r);
    worst = std::max(worst, std::sqrt(err2) / scale);
  }
  return {std::string("anisotropy H vs finite difference (") + to_string(form) + ")", worst <= 1e-6, worst, 1e-6,
          std::to_string(n) + " gradients"};
}

inline CheckResult check_aniso_bounds(std::size_t n = 10000, std::uint64_t seed = 3) {
  double worst = 0.0;
  for (auto form : {AnisoForm::quartic, AnisoForm::trig}) {
    const auto p = check_params(form);
    for (const auto& g : random_gradients(n, seed)) {
      const double m = anisotropy_at(g, p).m;
      worst = std::max({worst, (1.0 - p.sigma) - m, m - (1.0 + p.sigma)});
    }
  }
  const double tol = 1e-15;
  return {"anisotropy bounds 1-sigma <= m <= 1+sigma", worst <= tol, std::max(worst, 0.0), tol, "both forms"};
}

inline RealField random_field(const Grid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  RealField f(grid);
  for (auto& v : f.values) v = nd(rng);
  return f;
}

inline CheckResult check_round_trip(const Grid& grid) {
  const auto f = random_field(grid, 11);
  const auto back = to_real(to_spectral(f));
  const double err = max_abs(difference(back, f)) / max_abs(f);
  return {"transform round trip " + std::to_string(grid.dim()) + "D", err <= 1e-12, err, 1e-12, ""};
}

inline CheckResult check_parseval(const Grid& grid) {
  const auto f = random_field(grid, 12);
  const double a = l2_norm_sq(f), b = l2_norm_sq(to_spectral(f));
  const double rel = std::abs(a - b) / a;
  return {"Parseval " + std::to_string(grid.dim()) + "D", rel <= 1e-12, rel, 1e-12, ""};
}

/// Derivatives of a product of resolved tones against their closed forms.
inline CheckResult check_tone_derivatives(const Grid& grid) {
  const bool three = grid.dim() == 3;
  auto f = sample(grid, [&](double x, double y, double z) {
    return std::sin(3 * x) * std::cos(2 * y) * (three ? std::cos(z) : 1.0);
  });
  auto fx = sample(grid, [&](double x, double y, double z) {
    return 3 * std::cos(3 * x) * std::cos(2 * y) * (three ? std::cos(z) : 1.0);
  });
  auto fy = sample(grid, [&](double x, double y, double z) {
    return -2 * std::sin(3 * x) * std::sin(2 * y) * (three ? std::cos(z) : 1.0);
  });
  const double lam = three ? -14.0 : -13.0;
  const auto g = gradient(f);
  const auto lap = laplacian(f);
  double err = std::max(max_abs(difference(g[0], fx)), max_abs(difference(g[1], fy)));
  err = std::max(err, max_abs(difference(lap, scaled(f, lam))) / std::abs(lam));
  return {"tone derivative exactness " + std::to_string(grid.dim()) + "D", err <= 1e-11, err, 1e-11, ""};
}

/// Short unforced run: q never increases, qbar stays positive.
inline CheckResult check_q_monotone_smoke(int order = 2, long steps = 40) {
  auto cfg = preset("stability").sim;
  cfg.grid = Grid::periodic(2, 64);
  cfg.scheme.order = order;
  cfg.scheme.dt = 0.5;
  cfg.n_steps = steps;
  const auto r = run(cfg);
  double worst = 0.0;
  bool qbar_pos = true;
  double q_prev = r.initial.q;
  for (const auto& s : r.reports) {
    worst = std::max(worst, (s.q - q_prev) / q_prev);
    qbar_pos = qbar_pos && s.qbar > 0.0;
    q_prev = s.q;
  }
  const bool ok = r.status == exit_code::ok && worst <= 1e-12 && qbar_pos;
  return {"q non-increasing smoke run", ok, std::max(worst, 0.0), 1e-12,
          r.status == exit_code::ok ? "" : r.error};
}

inline std::vector<CheckResult> run_invariant_checks() {
  std::vector<CheckResult> out;
  out.push_back(check_aniso_forms_agree());
  out.push_back(check_aniso_H_gradient(AnisoForm::quartic));
  out.push_back(check_aniso_H_gradient(AnisoForm::trig));
  out.push_back(check_aniso_bounds());
  for (const auto& g : {Grid::periodic(2, 64), Grid::periodic(3, 16)}) {
    out.push_back(check_round_trip(g));
    out.push_back(check_parseval(g));
    out.push_back(check_tone_derivatives(g));
  }
  out.push_back(check_q_monotone_smoke());
  return out;
}

}  // namespace dendrite
