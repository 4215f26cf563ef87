#pragma once

// Periodic tensor grids on (0, L_1) x ... x (0, L_d), real-to-complex FFTs,
// spectral differentiation and rectangle-rule quadrature.
//
// Internally every grid is handled as a 3D box: a 2D grid of shape (N0, N1)
// is stored as (1, N0, N1). Values are row-major with the last dimension
// fastest. Spectral coefficients use the half-spectrum layout of FFTW's r2c
// transform along the last dimension.

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dendrite {

using Complex = std::complex<double>;

struct GridMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Grid {
 public:
  Grid() = default;

  Grid(int dim, std::array<int, 3> points, std::array<double, 3> lengths)
      : dim_(dim), points_(points), lengths_(lengths) {
    if (dim != 2 && dim != 3) {
      throw std::invalid_argument("grid dimension must be 2 or 3");
    }
    for (int i = 0; i < dim; ++i) {
      if (points_[i] < 8 || points_[i] % 2 != 0) {
        throw std::invalid_argument("grid points per dimension must be even and >= 8 (got " +
                                    std::to_string(points_[i]) + ")");
      }
      if (!(lengths_[i] > 0.0)) {
        throw std::invalid_argument("grid lengths must be positive");
      }
    }
    for (int i = dim; i < 3; ++i) {
      points_[i] = 1;
      lengths_[i] = 0.0;
    }
  }

  /// Square/cubic grid with n points per dimension over (0, 2*pi)^dim.
  static Grid periodic(int dim, int n, double length = 2.0 * std::numbers::pi) {
    return Grid(dim, {n, n, n}, {length, length, length});
  }

  int dim() const { return dim_; }
  int points(int i) const { return points_[i]; }
  double length(int i) const { return lengths_[i]; }
  double spacing(int i) const { return lengths_[i] / points_[i]; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int i = 0; i < dim_; ++i) n *= static_cast<std::size_t>(points_[i]);
    return n;
  }

  /// Volume element of the rectangle rule.
  double cell_volume() const {
    double v = 1.0;
    for (int i = 0; i < dim_; ++i) v *= spacing(i);
    return v;
  }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim_; ++i) v *= lengths_[i];
    return v;
  }

  /// Shape padded to three dimensions with leading ones.
  std::array<int, 3> box() const {
    if (dim_ == 2) return {1, points_[0], points_[1]};
    return points_;
  }

  /// Half-spectrum shape padded to three dimensions.
  std::array<int, 3> spectral_box() const {
    auto b = box();
    b[2] = b[2] / 2 + 1;
    return b;
  }

  std::size_t spectral_size() const {
    auto b = spectral_box();
    return static_cast<std::size_t>(b[0]) * b[1] * b[2];
  }

  /// Coordinate of grid index j along dimension i: x_j = j * h_i.
  double coordinate(int i, int j) const { return j * spacing(i); }

  friend bool operator==(const Grid& a, const Grid& b) {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i) {
      if (a.points_[i] != b.points_[i] || a.lengths_[i] != b.lengths_[i]) return false;
    }
    return true;
  }

 private:
  int dim_ = 2;
  std::array<int, 3> points_{8, 8, 1};
  std::array<double, 3> lengths_{2.0 * std::numbers::pi, 2.0 * std::numbers::pi, 0.0};
};

struct RealField {
  Grid grid;
  std::vector<double> values;

  RealField() = default;
  explicit RealField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

struct SpectralField {
  Grid grid;
  std::vector<Complex> coeffs;

  SpectralField() = default;
  explicit SpectralField(const Grid& g) : grid(g), coeffs(g.spectral_size(), Complex{}) {}

  std::size_t size() const { return coeffs.size(); }
};

using VectorField = std::vector<RealField>;

inline void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": grid mismatch");
}

/// Sample a function of the grid coordinates. fn receives (x, y, z); z = 0 in 2D.
template <typename Fn>
RealField sample(const Grid& grid, Fn&& fn) {
  RealField out(grid);
  const auto b = grid.box();
  std::size_t idx = 0;
  for (int a = 0; a < b[0]; ++a) {
    for (int c = 0; c < b[1]; ++c) {
      for (int e = 0; e < b[2]; ++e, ++idx) {
        if (grid.dim() == 2) {
          out.values[idx] = fn(grid.coordinate(0, c), grid.coordinate(1, e), 0.0);
        } else {
          out.values[idx] = fn(grid.coordinate(0, a), grid.coordinate(1, c), grid.coordinate(2, e));
        }
      }
    }
  }
  return out;
}

// -- wavenumbers ---------------------------------------------------------------

struct Wavenumbers {
  std::vector<int> index;      ///< 0, 1, ..., N/2-1, -N/2, ..., -1
  std::vector<double> scaled;  ///< 2*pi*k/L
  std::size_t nyquist = 0;     ///< position of the -N/2 entry
};

inline Wavenumbers wavenumbers_1d(int n, double length) {
  Wavenumbers w;
  w.index.resize(n);
  w.scaled.resize(n);
  for (int j = 0; j < n; ++j) {
    const int k = j < n / 2 ? j : j - n;
    w.index[j] = k;
    w.scaled[j] = 2.0 * std::numbers::pi * k / length;
  }
  w.nyquist = static_cast<std::size_t>(n / 2);
  return w;
}

/// Full-spectrum wavenumber tables, one per grid dimension.
inline std::vector<Wavenumbers> wavenumbers(const Grid& grid) {
  std::vector<Wavenumbers> out;
  for (int i = 0; i < grid.dim(); ++i) out.push_back(wavenumbers_1d(grid.points(i), grid.length(i)));
  return out;
}

inline double wavenumber_norm_sq(const Grid& grid, std::span<const int> k) {
  double s = 0.0;
  for (int i = 0; i < grid.dim(); ++i) {
    const double ki = 2.0 * std::numbers::pi * k[i] / grid.length(i);
    s += ki * ki;
  }
  return s;
}

namespace detail {

/// Wavenumber tables over the padded half-spectrum box.
struct ModeTables {
  std::array<std::vector<double>, 3> k;          // scaled wavenumber per box axis
  std::array<std::vector<int>, 3> index;         // integer wavenumber per box axis
  std::array<std::vector<char>, 3> nyquist;      // 1 where |index| = N/2
  std::vector<double> k2;                        // |k|^2 per coefficient
};

struct FftPlan {
  std::array<int, 3> box{};
  std::size_t n_real = 0;
  std::size_t n_spec = 0;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ModeTables modes;

  FftPlan() = default;
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    if (real_buf) fftw_free(real_buf);
    if (spec_buf) fftw_free(spec_buf);
  }
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline ModeTables build_modes(const Grid& grid) {
  ModeTables t;
  const auto box = grid.box();
  const auto sbox = grid.spectral_box();
  // Map padded box axis -> grid dimension.
  const int offset = grid.dim() == 2 ? 1 : 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = box[axis];
    const int m = sbox[axis];
    t.k[axis].assign(m, 0.0);
    t.index[axis].assign(m, 0);
    t.nyquist[axis].assign(m, 0);
    if (axis < offset) continue;
    const double length = grid.length(axis - offset);
    for (int j = 0; j < m; ++j) {
      const int k = j < n / 2 ? j : j - n;
      // Last axis stores j = 0..N/2; the N/2 entry is the Nyquist mode.
      const int kk = (axis == 2 && j == n / 2) ? -n / 2 : k;
      t.index[axis][j] = kk;
      t.k[axis][j] = 2.0 * std::numbers::pi * kk / length;
      t.nyquist[axis][j] = (std::abs(kk) == n / 2) ? 1 : 0;
    }
  }
  t.k2.resize(static_cast<std::size_t>(sbox[0]) * sbox[1] * sbox[2]);
  std::size_t idx = 0;
  for (int a = 0; a < sbox[0]; ++a)
    for (int b = 0; b < sbox[1]; ++b)
      for (int c = 0; c < sbox[2]; ++c, ++idx)
        t.k2[idx] = t.k[0][a] * t.k[0][a] + t.k[1][b] * t.k[1][b] + t.k[2][c] * t.k[2][c];
  return t;
}

struct GridKey {
  int dim;
  std::array<int, 3> n;
  std::array<double, 3> l;
  friend bool operator<(const GridKey& a, const GridKey& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    if (a.n != b.n) return a.n < b.n;
    return a.l < b.l;
  }
};

/// Per-thread plan cache. FFTW_ESTIMATE keeps plans (and results) deterministic.
inline FftPlan& plan_for(const Grid& grid) {
  thread_local std::map<GridKey, std::unique_ptr<FftPlan>> cache;
  GridKey key{grid.dim(), {grid.points(0), grid.points(1), grid.points(2)},
              {grid.length(0), grid.length(1), grid.length(2)}};
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  auto plan = std::make_unique<FftPlan>();
  plan->box = grid.box();
  plan->n_real = grid.size();
  plan->n_spec = grid.spectral_size();
  plan->modes = build_modes(grid);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan->real_buf = fftw_alloc_real(plan->n_real);
    plan->spec_buf = fftw_alloc_complex(plan->n_spec);
    const int rank = grid.dim();
    const int* shape = grid.dim() == 2 ? &plan->box[1] : &plan->box[0];
    plan->forward = fftw_plan_dft_r2c(rank, shape, plan->real_buf, plan->spec_buf, FFTW_ESTIMATE);
    plan->backward = fftw_plan_dft_c2r(rank, shape, plan->spec_buf, plan->real_buf, FFTW_ESTIMATE);
  }
  auto& ref = *plan;
  cache.emplace(key, std::move(plan));
  return ref;
}

inline const ModeTables& modes_for(const Grid& grid) { return plan_for(grid).modes; }

}  // namespace detail

/// Discrete Fourier coefficients: c_k = (1/N_total) sum_j f_j exp(-i k x_j).
inline SpectralField to_spectral(const RealField& f) {
  auto& plan = detail::plan_for(f.grid);
  if (f.values.size() != plan.n_real) throw GridMismatch("to_spectral: value count does not match grid");
  std::copy(f.values.begin(), f.values.end(), plan.real_buf);
  fftw_execute(plan.forward);
  SpectralField out(f.grid);
  const double scale = 1.0 / static_cast<double>(plan.n_real);
  for (std::size_t i = 0; i < plan.n_spec; ++i) {
    out.coeffs[i] = Complex(plan.spec_buf[i][0], plan.spec_buf[i][1]) * scale;
  }
  return out;
}

/// Inverse of to_spectral: f_j = sum_k c_k exp(i k x_j).
inline RealField to_real(const SpectralField& F) {
  auto& plan = detail::plan_for(F.grid);
  if (F.coeffs.size() != plan.n_spec) throw GridMismatch("to_real: coefficient count does not match grid");
  for (std::size_t i = 0; i < plan.n_spec; ++i) {
    plan.spec_buf[i][0] = F.coeffs[i].real();
    plan.spec_buf[i][1] = F.coeffs[i].imag();
  }
  fftw_execute(plan.backward);
  RealField out(F.grid);
  std::copy(plan.real_buf, plan.real_buf + plan.n_real, out.values.begin());
  return out;
}

/// Visit every stored coefficient with its integer wavenumber vector.
template <typename Fn>
void for_each_mode(const Grid& grid, Fn&& fn) {
  const auto& m = detail::modes_for(grid);
  const auto sbox = grid.spectral_box();
  const int offset = grid.dim() == 2 ? 1 : 0;
  std::size_t idx = 0;
  std::array<int, 3> k{};
  for (int a = 0; a < sbox[0]; ++a)
    for (int b = 0; b < sbox[1]; ++b)
      for (int c = 0; c < sbox[2]; ++c, ++idx) {
        const std::array<int, 3> box_k{m.index[0][a], m.index[1][b], m.index[2][c]};
        for (int i = 0; i < grid.dim(); ++i) k[i] = box_k[i + offset];
        fn(idx, std::span<const int>(k.data(), grid.dim()));
      }
}

/// |k|^2 for each stored coefficient.
inline const std::vector<double>& mode_norm_sq(const Grid& grid) { return detail::modes_for(grid).k2; }

/// Multiplicity of each stored coefficient in the full spectrum (1 or 2).
inline double half_spectrum_weight(const Grid& grid, std::size_t idx) {
  const auto sbox = grid.spectral_box();
  const int c = static_cast<int>(idx % sbox[2]);
  const int n_last = grid.box()[2];
  return (c == 0 || c == n_last / 2) ? 1.0 : 2.0;
}

/// Spectral partial derivative along grid dimension `axis`. Nyquist mode zeroed.
inline SpectralField derivative(const SpectralField& F, int axis) {
  const auto& m = detail::modes_for(F.grid);
  const auto sbox = F.grid.spectral_box();
  const int box_axis = axis + (F.grid.dim() == 2 ? 1 : 0);
  SpectralField out(F.grid);
  std::size_t idx = 0;
  for (int a = 0; a < sbox[0]; ++a)
    for (int b = 0; b < sbox[1]; ++b)
      for (int c = 0; c < sbox[2]; ++c, ++idx) {
        const int j = box_axis == 0 ? a : (box_axis == 1 ? b : c);
        if (m.nyquist[box_axis][j]) continue;
        out.coeffs[idx] = Complex(0.0, m.k[box_axis][j]) * F.coeffs[idx];
      }
  return out;
}

inline SpectralField laplacian(const SpectralField& F) {
  const auto& k2 = mode_norm_sq(F.grid);
  SpectralField out(F.grid);
  for (std::size_t i = 0; i < out.coeffs.size(); ++i) out.coeffs[i] = -k2[i] * F.coeffs[i];
  return out;
}

inline VectorField gradient(const SpectralField& F) {
  VectorField g;
  g.reserve(F.grid.dim());
  for (int i = 0; i < F.grid.dim(); ++i) g.push_back(to_real(derivative(F, i)));
  return g;
}

inline VectorField gradient(const RealField& f) { return gradient(to_spectral(f)); }

inline RealField laplacian(const RealField& f) { return to_real(laplacian(to_spectral(f))); }

/// Spectral divergence, returned as coefficients.
inline SpectralField divergence_spectral(const VectorField& v) {
  if (v.empty()) throw GridMismatch("divergence: empty vector field");
  const Grid& grid = v.front().grid;
  if (static_cast<int>(v.size()) != grid.dim()) throw GridMismatch("divergence: component count != dim");
  SpectralField acc(grid);
  for (int i = 0; i < grid.dim(); ++i) {
    require_same_grid(grid, v[i].grid, "divergence");
    const auto d = derivative(to_spectral(v[i]), i);
    for (std::size_t j = 0; j < acc.coeffs.size(); ++j) acc.coeffs[j] += d.coeffs[j];
  }
  return acc;
}

inline RealField divergence(const VectorField& v) { return to_real(divergence_spectral(v)); }

/// Zero every coefficient with |k_i| > N_i/3 in some dimension (2/3 rule).
inline void dealias(SpectralField& F) {
  const auto& m = detail::modes_for(F.grid);
  const auto sbox = F.grid.spectral_box();
  const auto box = F.grid.box();
  std::size_t idx = 0;
  for (int a = 0; a < sbox[0]; ++a)
    for (int b = 0; b < sbox[1]; ++b)
      for (int c = 0; c < sbox[2]; ++c, ++idx) {
        if (3 * std::abs(m.index[0][a]) > box[0] || 3 * std::abs(m.index[1][b]) > box[1] ||
            3 * std::abs(m.index[2][c]) > box[2]) {
          F.coeffs[idx] = Complex{};
        }
      }
}

// -- quadrature ----------------------------------------------------------------

inline double integrate(const RealField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s * f.grid.cell_volume();
}

inline double l2_norm_sq(const RealField& f) {
  double s = 0.0;
  for (double v : f.values) s += v * v;
  return s * f.grid.cell_volume();
}

inline double grad_norm_sq(const VectorField& g) {
  double s = 0.0;
  for (const auto& c : g) s += l2_norm_sq(c);
  return s;
}

inline double grad_norm_sq(const RealField& f) { return grad_norm_sq(gradient(f)); }

/// Parseval: integral of f^2 from the coefficients, Vol * sum_k |c_k|^2.
inline double l2_norm_sq(const SpectralField& F) {
  double s = 0.0;
  for (std::size_t i = 0; i < F.coeffs.size(); ++i) s += half_spectrum_weight(F.grid, i) * std::norm(F.coeffs[i]);
  return s * F.grid.volume();
}

// -- pointwise arithmetic --------------------------------------------------------

inline RealField& axpy(double a, const RealField& x, RealField& y) {
  require_same_grid(x.grid, y.grid, "axpy");
  for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += a * x.values[i];
  return y;
}

inline RealField scaled(const RealField& x, double a) {
  RealField out = x;
  for (double& v : out.values) v *= a;
  return out;
}

inline RealField difference(const RealField& a, const RealField& b) {
  require_same_grid(a.grid, b.grid, "difference");
  RealField out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
  return out;
}

inline double max_abs(const RealField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const RealField& f) {
  for (double v : f.values)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool all_finite(const SpectralField& F) {
  for (const auto& c : F.coeffs)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

}  // namespace dendrite
