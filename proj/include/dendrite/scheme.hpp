#pragma once

// Two-step time integrator. Step 1 computes an intermediate (phi, u) with a
// stabilized BDF-k scheme (linear terms implicit, everything else
// extrapolated), solved mode by mode in Fourier space. Step 2 rescales the
// intermediate solution by eta = 1 - (1 - xi)^(k+1), xi = qbar / E, and
// relaxes the auxiliary scalar q towards the recomputed energy under the
// dissipation constraint, which makes q non-increasing at every step.

#include <dendrite/model.hpp>
#include <dendrite/spectral.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dendrite {

struct DivergenceError : std::runtime_error {
  long step;
  DivergenceError(long step_index, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step_index) + ": " + what), step(step_index) {}
};

struct ConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};

struct BdfTableau {
  int k = 1;
  double alpha = 1.0;
  std::array<double, 3> a{1.0, 0.0, 0.0};  // A_k weights, newest level first
  std::array<double, 3> b{1.0, 0.0, 0.0};  // B_k weights, newest level first

  static BdfTableau of(int order) {
    switch (order) {
      case 1: return {1, 1.0, {1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
      case 2: return {2, 1.5, {2.0, -0.5, 0.0}, {2.0, -1.0, 0.0}};
      case 3: return {3, 11.0 / 6.0, {3.0, -1.5, 1.0 / 3.0}, {3.0, -3.0, 1.0}};
      default: throw std::invalid_argument("BDF order must be 1, 2 or 3");
    }
  }
};

struct SchemeOptions {
  int order = 1;
  double dt = 0.01;
  /// Debug switch: skip the eta rescaling and freeze q.
  bool step2 = true;
  /// 2/3-rule truncation of the nonlinear right-hand sides.
  bool dealias = false;
  /// Manufactured forcing present: q-monotonicity failures are logged instead of thrown.
  bool forced = false;
  /// With forcing, subtract the forcing power from the dissipation driving q, so q
  /// tracks the energy of the forced system.
  bool forcing_work = true;
  /// Sub-steps per coarse step while building the BDF history. 1 = plain order
  /// ramp 1, 2, ..., k on the coarse step; 0 = automatic (ceil(4 / sqrt(dt)) for k >= 2).
  int startup_substeps = 0;

  int resolved_substeps() const {
    if (startup_substeps > 0) return startup_substeps;
    if (order < 2) return 1;
    return std::max(1, static_cast<int>(std::ceil(4.0 / std::sqrt(dt))));
  }
};

struct StepReport {
  long step = 0;
  double t = 0.0;
  double E = 0.0;
  double E1 = 0.0;
  double q = 0.0;
  double qbar = 0.0;
  double xi = 1.0;
  double eta = 1.0;
  double zeta = 0.0;
  double dissipation = 0.0;  // H at the intermediate solution
  double area = 0.0;
  int zeta_case = 1;
  int order = 1;
  double q_prev = 0.0;
  double E_bar = 1.0;
  double dt = 0.0;
};

/// A pair of forcing fields evaluated at a given time.
struct ForcingTerms {
  RealField phi;
  RealField u;
};
using Forcing = std::function<ForcingTerms(double t)>;

struct StepperState {
  ModelParams params;
  SchemeOptions options;
  Grid grid;
  std::deque<RealField> history_phi;  // newest first
  std::deque<RealField> history_u;
  double q = 1.0;
  long step_index = 0;
  double time = 0.0;
  std::array<long, 3> zeta_case_counts{0, 0, 0};
  long linear_solves = 0;
  long monotonicity_warnings = 0;
  bool started = false;

  StepperState() = default;
  StepperState(const Grid& g, const ModelParams& p, const SchemeOptions& o) : params(p), options(o), grid(g) {
    params.validate(g.dim());
    if (!(o.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    BdfTableau::of(o.order);
  }

  /// Order used for the next step: ramps 1, 2, ... up to the target order.
  int current_order() const { return std::min<int>(options.order, static_cast<int>(step_index) + 1); }

  const RealField& phi() const { return history_phi.front(); }
  const RealField& u() const { return history_u.front(); }
};

// -- BDF combinations -----------------------------------------------------------------

namespace detail {
inline RealField combine(const std::deque<RealField>& history, const std::array<double, 3>& w, int k) {
  if (static_cast<int>(history.size()) < k) {
    throw std::invalid_argument("insufficient history for BDF order " + std::to_string(k));
  }
  RealField out(history.front().grid);
  for (int i = 0; i < k; ++i) axpy(w[i], history[i], out);
  return out;
}
}  // namespace detail

/// A_k(phi^n) = sum_i a_i phi^{n+1-i}.
inline RealField extrapolate_A(const std::deque<RealField>& history, const BdfTableau& t) {
  return detail::combine(history, t.a, t.k);
}

/// B_k(phi^n) = sum_i b_i phi^{n+1-i}.
inline RealField extrapolate_B(const std::deque<RealField>& history, const BdfTableau& t) {
  return detail::combine(history, t.b, t.k);
}

// -- per-mode solves -------------------------------------------------------------------

inline double phase_divisor(const ModelParams& p, const BdfTableau& t, double dt, double k2) {
  return p.tau * t.alpha / dt + p.s2 / (p.eps * p.eps) + p.s1 * k2;
}

inline double heat_divisor(const ModelParams& p, const BdfTableau& t, double dt, double k2) {
  return t.alpha / dt + p.diff_D * k2;
}

namespace detail {
template <typename Divisor>
RealField diagonal_solve(StepperState& s, SpectralField rhs, Divisor&& divisor) {
  const auto& k2 = mode_norm_sq(rhs.grid);
  for (std::size_t i = 0; i < rhs.coeffs.size(); ++i) rhs.coeffs[i] /= divisor(k2[i]);
  ++s.linear_solves;
  return to_real(rhs);
}
}  // namespace detail

/// Intermediate phase field from the stabilized BDF-k phase equation.
inline RealField solve_phase(StepperState& s, const RealField* forcing_phi = nullptr) {
  const auto tab = BdfTableau::of(s.current_order());
  const auto& p = s.params;
  const double dt = s.options.dt;
  const auto A = extrapolate_A(s.history_phi, tab);
  const auto Bphi = extrapolate_B(s.history_phi, tab);
  const auto Bu = extrapolate_B(s.history_u, tab);

  // Pointwise part: f(B phi) - (s2/eps^2) B phi + 4 lambda eps F(B phi) B u - forcing.
  RealField pointwise(s.grid);
  const double s2c = p.s2 / (p.eps * p.eps);
  const double c = 4.0 * p.lambda * p.eps;
  for (std::size_t i = 0; i < pointwise.size(); ++i) {
    const double b = Bphi[i];
    pointwise[i] = bulk_f(b, p.eps) - s2c * b + c * bulk_F(b, p.eps) * Bu[i];
    if (forcing_phi) pointwise[i] -= (*forcing_phi)[i];
  }
  const auto Bphi_hat = to_spectral(Bphi);
  auto rhs = aniso_operator_spectral(Bphi_hat, p, s.options.dealias);
  auto point_hat = to_spectral(pointwise);
  if (s.options.dealias) dealias(point_hat);
  const auto A_hat = to_spectral(A);
  const auto& k2 = mode_norm_sq(s.grid);
  const double inertia = p.tau / dt;
  for (std::size_t i = 0; i < rhs.coeffs.size(); ++i) {
    // rhs = (tau/dt) A - [aniso + s1 lap B phi + pointwise]
    rhs.coeffs[i] = inertia * A_hat.coeffs[i] - (rhs.coeffs[i] - p.s1 * k2[i] * Bphi_hat.coeffs[i] + point_hat.coeffs[i]);
  }
  if (!all_finite(rhs)) throw DivergenceError(s.step_index + 1, "non-finite phase right-hand side");
  return detail::diagonal_solve(s, std::move(rhs), [&](double kk) { return phase_divisor(p, tab, dt, kk); });
}

/// Intermediate temperature; needs the intermediate phase field.
inline RealField solve_heat(StepperState& s, const RealField& phi_bar, const RealField* forcing_u = nullptr) {
  const auto tab = BdfTableau::of(s.current_order());
  const auto& p = s.params;
  const double dt = s.options.dt;
  const auto Aphi = extrapolate_A(s.history_phi, tab);
  const auto Au = extrapolate_A(s.history_u, tab);
  const auto Bphi = extrapolate_B(s.history_phi, tab);
  RealField rhs(s.grid);
  const double c = 4.0 * p.eps * p.eps * p.latent_K;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    rhs[i] = Au[i] / dt + c * bulk_F(Bphi[i], p.eps) * (tab.alpha * phi_bar[i] - Aphi[i]) / dt;
    if (forcing_u) rhs[i] += (*forcing_u)[i];
  }
  if (!all_finite(rhs)) throw DivergenceError(s.step_index + 1, "non-finite heat right-hand side");
  auto rhs_hat = to_spectral(rhs);
  return detail::diagonal_solve(s, std::move(rhs_hat), [&](double kk) { return heat_divisor(p, tab, dt, kk); });
}

// -- auxiliary variable ------------------------------------------------------------------

struct QbarUpdate {
  double qbar;
  double E_bar;
  double H_bar;
};

/// qbar = q_n / (1 + dt H/E), from given intermediate energy and dissipation.
inline double qbar_from(double q_n, double E_bar, double H_bar, double dt) {
  return q_n / (1.0 + dt * H_bar / E_bar);
}

inline QbarUpdate update_qbar(double q_n, const RealField& phi_bar, const RealField& u_bar, const ModelParams& p,
                              double dt) {
  if (!(q_n > 0.0)) throw ConsistencyError("update_qbar: q must be positive");
  QbarUpdate r;
  r.E_bar = energy_total(phi_bar, u_bar, p);
  r.H_bar = dissipation_H(phi_bar, u_bar, p);
  r.qbar = qbar_from(q_n, r.E_bar, r.H_bar, dt);
  return r;
}

struct XiEta {
  double xi;
  double eta;
};

inline XiEta xi_eta(double qbar, double E_bar, int k) {
  const double xi = qbar / E_bar;
  return {xi, 1.0 - std::pow(1.0 - xi, k + 1)};
}

inline std::pair<RealField, RealField> apply_eta(const RealField& phi_bar, const RealField& u_bar, double eta) {
  return {scaled(phi_bar, eta), scaled(u_bar, eta)};
}

struct Relaxation {
  double zeta;
  double q_next;
  int case_id;
};

/// Picks zeta in [0, 1] as small as the dissipation constraint allows.
inline Relaxation relax_q(double qbar, double E_bar, double H_bar, double E_next, double dt, bool strict = true) {
  const double allowed = dt * (qbar / E_bar) * H_bar;
  Relaxation r{0.0, E_next, 1};
  if (qbar >= E_next) {
    r.case_id = 1;
  } else if (qbar - E_next + allowed >= 0.0 || E_next - qbar <= 1e-14 * E_next) {
    r.case_id = 2;
  } else {
    r.case_id = 3;
    r.zeta = 1.0 - dt * qbar * H_bar / (E_bar * (E_next - qbar));
    // Only reachable with a negative effective dissipation (forced runs).
    if (!strict) r.zeta = std::clamp(r.zeta, 0.0, 1.0);
    r.q_next = r.zeta * qbar + (1.0 - r.zeta) * E_next;
  }
  const double slack = 1e-12 * std::max(1.0, qbar);
  const bool violated = !(r.zeta >= 0.0 && r.zeta <= 1.0) || (r.q_next - qbar) / dt > qbar / E_bar * H_bar + slack;
  if (violated && strict) {
    std::ostringstream os;
    os.precision(17);
    os << "relaxation constraint violated: qbar=" << qbar << " E_bar=" << E_bar << " H_bar=" << H_bar
       << " E_next=" << E_next << " zeta=" << r.zeta;
    throw ConsistencyError(os.str());
  }
  return r;
}

// -- driver --------------------------------------------------------------------------------

namespace detail {

/// One step at the state's current order. Exactly two per-mode linear solves.
inline StepReport advance_once(StepperState& s, const Forcing& forcing) {
  const auto& p = s.params;
  const double dt = s.options.dt;
  const int k = s.current_order();
  const double t_next = s.time + dt;

  std::optional<ForcingTerms> f;
  if (forcing) f = forcing(t_next);

  auto phi_bar = solve_phase(s, f ? &f->phi : nullptr);
  auto u_bar = solve_heat(s, phi_bar, f ? &f->u : nullptr);
  if (!all_finite(phi_bar) || !all_finite(u_bar)) {
    throw DivergenceError(s.step_index + 1, "non-finite intermediate solution");
  }

  StepReport r;
  r.step = s.step_index + 1;
  r.t = t_next;
  r.order = k;
  r.q_prev = s.q;
  r.dt = dt;

  if (!(s.q > 0.0)) throw ConsistencyError("q must stay positive");
  r.E_bar = energy_total(phi_bar, u_bar, p);
  const auto diss = dissipation_parts(phi_bar, u_bar, p);
  double H_eff = diss.H;
  if (f && s.options.forcing_work) H_eff -= forcing_power(diss.residual, u_bar, f->phi, f->u, p);
  const double denom = 1.0 + dt * H_eff / r.E_bar;
  if (!(denom > 0.0) || !std::isfinite(denom)) throw DivergenceError(r.step, "auxiliary update denominator <= 0");
  r.qbar = s.q / denom;
  r.dissipation = H_eff;

  RealField phi_next, u_next;
  double q_next = s.q;
  if (s.options.step2) {
    const auto xe = xi_eta(r.qbar, r.E_bar, k);
    r.xi = xe.xi;
    r.eta = xe.eta;
    std::tie(phi_next, u_next) = apply_eta(phi_bar, u_bar, xe.eta);
  } else {
    r.xi = r.qbar / r.E_bar;
    r.eta = 1.0;
    phi_next = std::move(phi_bar);
    u_next = std::move(u_bar);
  }

  const auto parts = energy_parts(phi_next, u_next, p);
  r.E = parts.total;
  r.E1 = parts.e1;
  if (!std::isfinite(r.E)) throw DivergenceError(r.step, "non-finite energy");

  if (s.options.step2) {
    const auto rel = relax_q(r.qbar, r.E_bar, H_eff, parts.total, dt, !f.has_value());
    r.zeta = rel.zeta;
    r.zeta_case = rel.case_id;
    q_next = rel.q_next;
    ++s.zeta_case_counts[rel.case_id - 1];
  }
  r.q = q_next;
  r.area = crystal_area(phi_next);

  if (q_next > s.q * (1.0 + 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "q increased at step " << r.step << ": q_prev=" << s.q << " q_next=" << q_next << " qbar=" << r.qbar
       << " E_bar=" << r.E_bar << " H=" << r.dissipation << " E_next=" << r.E;
    if (!s.options.forced) throw ConsistencyError(os.str());
    ++s.monotonicity_warnings;
  }

  const std::size_t keep = static_cast<std::size_t>(s.options.order);
  s.history_phi.push_front(std::move(phi_next));
  s.history_u.push_front(std::move(u_next));
  while (s.history_phi.size() > keep) s.history_phi.pop_back();
  while (s.history_u.size() > keep) s.history_u.pop_back();
  s.q = q_next;
  s.time = t_next;
  ++s.step_index;
  return r;
}

}  // namespace detail

/// Initial state: history = (phi0, u0), q0 = E(phi0, u0). With refined startup
/// (order >= 2) the first k-1 coarse steps are integrated on a finer step so the
/// start-up error does not dominate the BDF-k error; the returned reports are
/// those fine steps.
inline std::vector<StepReport> startup(StepperState& s, RealField phi0, RealField u0, const Forcing& forcing = {}) {
  if (s.step_index != 0) throw std::logic_error("startup called on an advanced state");
  require_same_grid(s.grid, phi0.grid, "startup");
  require_same_grid(s.grid, u0.grid, "startup");
  s.q = energy_total(phi0, u0, s.params);
  s.history_phi.assign(1, std::move(phi0));
  s.history_u.assign(1, std::move(u0));
  s.time = 0.0;
  s.started = true;

  std::vector<StepReport> fine_reports;
  const int k = s.options.order;
  const int m = s.options.resolved_substeps();
  if (k < 2 || m <= 1) return fine_reports;

  StepperState fine = s;
  fine.options.dt = s.options.dt / m;
  std::deque<RealField> coarse_phi{s.history_phi.front()};
  std::deque<RealField> coarse_u{s.history_u.front()};
  for (int level = 1; level < k; ++level) {
    for (int j = 0; j < m; ++j) {
      auto r = detail::advance_once(fine, forcing);
      fine_reports.push_back(r);
    }
    coarse_phi.push_front(fine.phi());
    coarse_u.push_front(fine.u());
  }
  s.history_phi = std::move(coarse_phi);
  s.history_u = std::move(coarse_u);
  s.q = fine.q;
  s.time = s.options.dt * (k - 1);
  s.step_index = k - 1;
  for (int i = 0; i < 3; ++i) s.zeta_case_counts[i] += fine.zeta_case_counts[i];
  s.monotonicity_warnings += fine.monotonicity_warnings;
  s.linear_solves = fine.linear_solves;
  return fine_reports;
}

/// One full step of the scheme.
inline StepReport advance(StepperState& s, const Forcing& forcing = {}) {
  if (!s.started) throw std::logic_error("advance called before startup");
  return detail::advance_once(s, forcing);
}

}  // namespace dendrite
