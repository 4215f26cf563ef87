#pragma once

// Anisotropic phase-field / heat model: double-well potential, anisotropy
// coefficient m(grad phi) and its gradient H, energies, variational
// derivatives and the dissipation functional.

#include <dendrite/spectral.hpp>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dendrite {

struct UnsupportedConfiguration : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class AnisoForm { quartic, trig };

inline const char* to_string(AnisoForm f) { return f == AnisoForm::quartic ? "quartic" : "trig"; }

struct ModelParams {
  double tau = 1.0;       // relaxation time
  double eps = 1.0;       // interface width
  double lambda = 1.0;    // coupling strength
  double latent_K = 1.0;  // latent heat
  double diff_D = 1.0;    // thermal diffusivity
  double sigma = 0.0;     // anisotropy strength
  int folds = 4;
  double s1 = 0.0;
  double s2 = 0.0;
  AnisoForm aniso_form = AnisoForm::quartic;
  double grad_reg = 1e-12;

  /// Throws std::invalid_argument naming the offending parameter.
  void validate(int dim) const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    positive(tau, "tau");
    positive(eps, "eps");
    positive(lambda, "lambda");
    positive(latent_K, "K");
    positive(diff_D, "D");
    positive(grad_reg, "grad_reg");
    if (!(sigma >= 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must be in [0, 1)");
    if (folds < 0) throw std::invalid_argument("folds must be >= 0");
    if (!(s1 >= 0.0) || !(s2 >= 0.0)) throw std::invalid_argument("stabilizers s1, s2 must be >= 0");
    if (aniso_form == AnisoForm::quartic) {
      if (!(sigma < 1.0 / 3.0)) throw std::invalid_argument("sigma must be < 1/3 for quartic form");
      if (folds != 4 && sigma > 0.0) throw UnsupportedConfiguration("quartic anisotropy requires folds = 4");
    }
    if (dim == 3) {
      if (aniso_form == AnisoForm::trig) throw UnsupportedConfiguration("trig anisotropy is 2D only");
      if (folds != 4) throw UnsupportedConfiguration("3D runs require folds = 4");
    }
  }
};

// -- bulk potential ----------------------------------------------------------------

inline double bulk_F(double phi, double eps) {
  const double w = phi * phi - 1.0;
  return w * w / (4.0 * eps * eps);
}

inline double bulk_f(double phi, double eps) { return (phi * phi * phi - phi) / (eps * eps); }

inline RealField bulk_F(const RealField& phi, double eps) {
  RealField out(phi.grid);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bulk_F(phi[i], eps);
  return out;
}

inline RealField bulk_f(const RealField& phi, double eps) {
  RealField out(phi.grid);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = bulk_f(phi[i], eps);
  return out;
}

// -- anisotropy ----------------------------------------------------------------------

struct Anisotropy {
  double m = 1.0;
  std::array<double, 3> H{0.0, 0.0, 0.0};
};

/// m and H = dm/d(grad phi) at one gradient vector of length dim.
inline Anisotropy anisotropy_at(std::span<const double> g, const ModelParams& p) {
  Anisotropy a;
  const std::size_t dim = g.size();
  double g2 = 0.0;
  for (double c : g) g2 += c * c;
  if (g2 <= p.grad_reg || p.sigma == 0.0) return a;

  const double sigma = p.sigma;
  if (p.aniso_form == AnisoForm::quartic) {
    double s4 = 0.0;
    for (double c : g) s4 += c * c * c * c;
    const double g4 = g2 * g2;
    a.m = (1.0 - 3.0 * sigma) + 4.0 * sigma * s4 / g4;
    const double pre = 16.0 * sigma / (g4 * g2);
    for (std::size_t i = 0; i < dim; ++i) a.H[i] = pre * g[i] * (g[i] * g[i] * g2 - s4);
  } else {
    if (dim != 2) throw UnsupportedConfiguration("trig anisotropy is 2D only");
    const double theta = std::atan2(g[1], g[0]);
    const double beta = static_cast<double>(p.folds);
    a.m = 1.0 + sigma * std::cos(beta * theta);
    const double pre = sigma * beta * std::sin(beta * theta) / g2;
    a.H[0] = pre * g[1];
    a.H[1] = -pre * g[0];
  }
  return a;
}

inline RealField aniso_m(const VectorField& grad, const ModelParams& p) {
  const Grid& grid = grad.front().grid;
  const int dim = grid.dim();
  RealField out(grid);
  std::array<double, 3> g{};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int d = 0; d < dim; ++d) g[d] = grad[d][i];
    out[i] = anisotropy_at(std::span<const double>(g.data(), dim), p).m;
  }
  return out;
}

inline VectorField aniso_H(const VectorField& grad, const ModelParams& p) {
  const Grid& grid = grad.front().grid;
  const int dim = grid.dim();
  VectorField out(dim, RealField(grid));
  std::array<double, 3> g{};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (int d = 0; d < dim; ++d) g[d] = grad[d][i];
    const auto a = anisotropy_at(std::span<const double>(g.data(), dim), p);
    for (int d = 0; d < dim; ++d) out[d][i] = a.H[d];
  }
  return out;
}

/// Anisotropic flux m^2 grad phi + |grad phi|^2 m H, pointwise.
inline VectorField aniso_flux(const VectorField& grad, const ModelParams& p) {
  const Grid& grid = grad.front().grid;
  const int dim = grid.dim();
  VectorField out(dim, RealField(grid));
  std::array<double, 3> g{};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double g2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      g[d] = grad[d][i];
      g2 += g[d] * g[d];
    }
    const auto a = anisotropy_at(std::span<const double>(g.data(), dim), p);
    for (int d = 0; d < dim; ++d) out[d][i] = a.m * a.m * g[d] + g2 * a.m * a.H[d];
  }
  return out;
}

// -- variational derivatives ------------------------------------------------------------

/// Spectral coefficients of -div(m^2 grad phi + |grad phi|^2 m H), from phi's coefficients.
inline SpectralField aniso_operator_spectral(const SpectralField& phi_hat, const ModelParams& p,
                                             bool dealiased = false) {
  auto div = divergence_spectral(aniso_flux(gradient(phi_hat), p));
  if (dealiased) dealias(div);
  for (auto& c : div.coeffs) c = -c;
  return div;
}

/// dE/dphi = -div(m^2 grad phi + |grad phi|^2 m H) + f(phi). Independent of s1, s2.
inline RealField variational_dE(const RealField& phi, const ModelParams& p) {
  auto out = to_real(aniso_operator_spectral(to_spectral(phi), p));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bulk_f(phi[i], p.eps);
  return out;
}

/// dE2/dphi = -s1 lap phi + (s2/eps^2) phi.
inline RealField variational_dE2(const RealField& phi, const ModelParams& p) {
  auto out = laplacian(phi);
  const double c = p.s2 / (p.eps * p.eps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -p.s1 * out[i] + c * phi[i];
  return out;
}

/// dE1/dphi = dE/dphi + s1 lap phi - (s2/eps^2) phi.
inline RealField variational_dE1(const RealField& phi, const ModelParams& p) {
  const auto phi_hat = to_spectral(phi);
  auto op = aniso_operator_spectral(phi_hat, p);
  const auto& k2 = mode_norm_sq(phi.grid);
  for (std::size_t i = 0; i < op.coeffs.size(); ++i) op.coeffs[i] -= p.s1 * k2[i] * phi_hat.coeffs[i];
  auto out = to_real(op);
  const double c = p.s2 / (p.eps * p.eps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bulk_f(phi[i], p.eps) - c * phi[i];
  return out;
}

// -- energies -------------------------------------------------------------------------------

struct EnergyParts {
  double total = 1.0;  // E = E1 + E2
  double e1 = 0.0;
  double e2 = 1.0;
};

/// E, E1 and E2 from precomputed gradient of phi.
inline EnergyParts energy_parts(const RealField& phi, const RealField& u, const VectorField& grad,
                                const ModelParams& p) {
  require_same_grid(phi.grid, u.grid, "energy");
  const int dim = phi.grid.dim();
  const double heat = p.lambda / (2.0 * p.eps * p.latent_K);
  const double s2c = p.s2 / (2.0 * p.eps * p.eps);
  double aniso = 0.0, grad2 = 0.0, bulk = 0.0, usq = 0.0, phisq = 0.0;
  std::array<double, 3> g{};
  for (std::size_t i = 0; i < phi.size(); ++i) {
    double g2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      g[d] = grad[d][i];
      g2 += g[d] * g[d];
    }
    const double m = anisotropy_at(std::span<const double>(g.data(), dim), p).m;
    aniso += 0.5 * m * m * g2;
    grad2 += g2;
    bulk += bulk_F(phi[i], p.eps);
    usq += u[i] * u[i];
    phisq += phi[i] * phi[i];
  }
  const double h = phi.grid.cell_volume();
  EnergyParts e;
  e.total = h * (aniso + heat * usq + bulk) + 1.0;
  e.e2 = h * (0.5 * p.s1 * grad2 + s2c * phisq) + 1.0;
  e.e1 = h * (aniso - 0.5 * p.s1 * grad2 + heat * usq + bulk - s2c * phisq);
  return e;
}

inline EnergyParts energy_parts(const RealField& phi, const RealField& u, const ModelParams& p) {
  return energy_parts(phi, u, gradient(phi), p);
}

inline double energy_total(const RealField& phi, const RealField& u, const ModelParams& p) {
  return energy_parts(phi, u, p).total;
}

inline double energy_E1(const RealField& phi, const RealField& u, const ModelParams& p) {
  return energy_parts(phi, u, p).e1;
}

inline double energy_E2(const RealField& phi, const ModelParams& p) {
  const double s2c = p.s2 / (2.0 * p.eps * p.eps);
  return 0.5 * p.s1 * grad_norm_sq(phi) + s2c * l2_norm_sq(phi) + 1.0;
}

struct DissipationParts {
  double H = 0.0;
  RealField residual;  // dE/dphi + 4 lambda eps F(phi) u
};

inline DissipationParts dissipation_parts(const RealField& phi, const RealField& u, const ModelParams& p) {
  require_same_grid(phi.grid, u.grid, "dissipation_H");
  DissipationParts d;
  d.residual = variational_dE(phi, p);
  const double c = 4.0 * p.lambda * p.eps;
  for (std::size_t i = 0; i < d.residual.size(); ++i) d.residual[i] += c * bulk_F(phi[i], p.eps) * u[i];
  d.H = l2_norm_sq(d.residual) / p.tau + p.lambda * p.diff_D / (p.eps * p.latent_K) * grad_norm_sq(u);
  return d;
}

/// (1/tau) ||dE/dphi + 4 lambda eps F(phi) u||^2 + (lambda D / (eps K)) ||grad u||^2.
inline double dissipation_H(const RealField& phi, const RealField& u, const ModelParams& p) {
  return dissipation_parts(phi, u, p).H;
}

/// Energy input rate of external forcing (f_phi, f_u): with forcing, dE/dt = -H + W.
inline double forcing_power(const RealField& residual, const RealField& u, const RealField& f_phi,
                            const RealField& f_u, const ModelParams& p) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    a += f_phi[i] * residual[i];
    b += f_u[i] * u[i];
  }
  const double h = u.grid.cell_volume();
  return h * (a / p.tau + p.lambda / (p.eps * p.latent_K) * b);
}

/// Integral of (1 + phi)/2.
inline double crystal_area(const RealField& phi) {
  double s = 0.0;
  for (double v : phi.values) s += 0.5 * (1.0 + v);
  return s * phi.grid.cell_volume();
}

}  // namespace dendrite
