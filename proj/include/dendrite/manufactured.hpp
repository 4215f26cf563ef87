#pragma once

// Manufactured solutions phi = sin x cos y cos t, u = cos x sin y cos t with
// forcing computed as the residual of the governing equations, and the
// temporal convergence-order harness built on them.

#include <dendrite/model.hpp>
#include <dendrite/scheme.hpp>
#include <dendrite/spectral.hpp>

#include <cmath>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace dendrite {

enum class ManufacturedKind { isotropic, anisotropic };

inline const char* to_string(ManufacturedKind k) {
  return k == ManufacturedKind::isotropic ? "isotropic" : "anisotropic";
}

struct ManufacturedCase {
  ManufacturedKind kind = ManufacturedKind::isotropic;
  ModelParams params;
  double final_time = 1.0;
  Grid grid = Grid::periodic(2, 128);

  void validate() const {
    if (grid.dim() != 2) throw UnsupportedConfiguration("manufactured cases are 2D only");
    if (kind == ManufacturedKind::isotropic && params.sigma != 0.0) {
      throw std::invalid_argument("isotropic manufactured case requires sigma = 0");
    }
    params.validate(2);
    if (!(final_time > 0.0)) throw std::invalid_argument("final_time must be > 0");
  }
};

/// Isotropic accuracy test parameters.
inline ManufacturedCase isotropic_case(int n = 128) {
  ManufacturedCase c;
  c.kind = ManufacturedKind::isotropic;
  c.params.tau = 10.0;
  c.params.eps = 1.0;
  c.params.lambda = 1.0;
  c.params.diff_D = 1.0;
  c.params.latent_K = 1.0;
  c.params.sigma = 0.0;
  c.params.s1 = 4.0;
  c.params.s2 = 4.0;
  c.grid = Grid::periodic(2, n);
  return c;
}

/// Fourfold anisotropic accuracy test parameters.
inline ManufacturedCase anisotropic_case(int n = 128) {
  ManufacturedCase c;
  c.kind = ManufacturedKind::anisotropic;
  c.params.tau = 4e3;
  c.params.eps = 1.0;
  c.params.lambda = 1.0;
  c.params.diff_D = 1.0;
  c.params.latent_K = 0.01;
  c.params.sigma = 0.05;
  c.params.folds = 4;
  c.params.s1 = 4.0;
  c.params.s2 = 4.0;
  c.grid = Grid::periodic(2, n);
  return c;
}

inline void require_2d(const Grid& grid) {
  if (grid.dim() != 2) throw UnsupportedConfiguration("manufactured solutions are 2D only");
}

inline RealField exact_phi(const Grid& grid, double t) {
  require_2d(grid);
  const double ct = std::cos(t);
  return sample(grid, [ct](double x, double y, double) { return std::sin(x) * std::cos(y) * ct; });
}

inline RealField exact_u(const Grid& grid, double t) {
  require_2d(grid);
  const double ct = std::cos(t);
  return sample(grid, [ct](double x, double y, double) { return std::cos(x) * std::sin(y) * ct; });
}

inline RealField exact_phi_t(const Grid& grid, double t) { return scaled(exact_phi(grid, 0.0), -std::sin(t)); }
inline RealField exact_u_t(const Grid& grid, double t) { return scaled(exact_u(grid, 0.0), -std::sin(t)); }

/// Residual forcing of the exact fields:
///   f_phi = tau phi_t + dE/dphi + 4 lambda eps F(phi) u
///   f_u   = u_t - D lap u - 4 eps^2 K F(phi) phi_t
inline ForcingTerms forcing(const ManufacturedCase& c, double t) {
  const auto& p = c.params;
  const auto phi = exact_phi(c.grid, t);
  const auto u = exact_u(c.grid, t);
  const auto phi_t = exact_phi_t(c.grid, t);
  const auto u_t = exact_u_t(c.grid, t);

  ForcingTerms f{variational_dE(phi, p), laplacian(u)};
  const double cphi = 4.0 * p.lambda * p.eps;
  const double cu = 4.0 * p.eps * p.eps * p.latent_K;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double F = bulk_F(phi[i], p.eps);
    f.phi[i] += p.tau * phi_t[i] + cphi * F * u[i];
    f.u[i] = u_t[i] - p.diff_D * f.u[i] - cu * F * phi_t[i];
  }
  return f;
}

struct ConvergenceRow {
  double dt = 0.0;
  double err_phi = 0.0;
  double err_u = 0.0;
  bool diverged = false;
  std::string message;
  std::array<long, 3> zeta_cases{0, 0, 0};
  std::vector<StepReport> reports;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double slope_phi = 0.0;
  double slope_u = 0.0;
  bool any_diverged = false;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// One manufactured run to final_time; returns L2 errors at the final time.
inline ConvergenceRow manufactured_run(const ManufacturedCase& c, int order, double dt, bool keep_reports = false,
                                       SchemeOptions opt = {}) {
  ConvergenceRow row;
  row.dt = dt;
  opt.order = order;
  opt.dt = dt;
  opt.forced = true;
  StepperState s(c.grid, c.params, opt);
  const long steps = std::lround(c.final_time / dt);
  const Forcing f = [&c](double t) { return forcing(c, t); };
  try {
    auto fine = startup(s, exact_phi(c.grid, 0.0), exact_u(c.grid, 0.0), f);
    if (keep_reports) row.reports = std::move(fine);
    while (s.step_index < steps) {
      auto r = advance(s, f);
      if (keep_reports) row.reports.push_back(r);
    }
    const double T = static_cast<double>(steps) * dt;
    row.err_phi = std::sqrt(l2_norm_sq(difference(s.phi(), exact_phi(c.grid, T))));
    row.err_u = std::sqrt(l2_norm_sq(difference(s.u(), exact_u(c.grid, T))));
    if (!std::isfinite(row.err_phi) || !std::isfinite(row.err_u)) {
      row.diverged = true;
      row.message = "non-finite error";
    }
  } catch (const DivergenceError& e) {
    row.diverged = true;
    row.message = e.what();
  }
  row.zeta_cases = s.zeta_case_counts;
  return row;
}

inline ConvergenceResult convergence_study(const ManufacturedCase& c, int order, const std::vector<double>& dt_list,
                                           bool keep_reports = false, const SchemeOptions& opt = {}) {
  c.validate();
  if (dt_list.size() < 4) throw std::invalid_argument("convergence_study needs at least 4 time steps");
  for (std::size_t i = 1; i < dt_list.size(); ++i) {
    if (!(dt_list[i] < dt_list[i - 1])) throw std::invalid_argument("dt_list must be decreasing");
  }
  ConvergenceResult out;
  std::vector<double> x, yp, yu;
  for (double dt : dt_list) {
    auto row = manufactured_run(c, order, dt, keep_reports, opt);
    if (row.diverged) {
      out.any_diverged = true;
    } else {
      x.push_back(row.dt);
      yp.push_back(row.err_phi);
      yu.push_back(row.err_u);
    }
    out.rows.push_back(std::move(row));
  }
  out.slope_phi = loglog_slope(x, yp);
  out.slope_u = loglog_slope(x, yu);
  return out;
}

inline std::vector<double> default_dt_list() { return {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80, 1.0 / 160}; }

inline void write_convergence_csv(std::ostream& os, const ConvergenceResult& r) {
  os.precision(17);
  os << "dt,err_phi,err_u\n";
  for (const auto& row : r.rows) {
    if (row.diverged) {
      os << row.dt << ",nan,nan\n";
    } else {
      os << row.dt << ',' << row.err_phi << ',' << row.err_u << '\n';
    }
  }
}

}  // namespace dendrite
