#pragma once

// Periodic spectral tools on a rectangle [0, Lx) x [0, Ly): 2-D FFT of grid
// samples, sparse Fourier series evaluable (with derivatives) at arbitrary
// points, and the periodic Poisson solve.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/jet.hpp"

namespace magsys {

/// Uniform grid samples on a periodic rectangle; values[j * nx + i] = h(i*Lx/nx, j*Ly/ny).
struct GridSamples {
  int nx = 0;
  int ny = 0;
  double side_x = 1.0;
  double side_y = 1.0;
  std::vector<double> values;

  double x(int i) const { return side_x * i / nx; }
  double y(int j) const { return side_y * j / ny; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Full complex forward (sign = -1) or backward (sign = +1) 2-D DFT, unnormalised.
inline std::vector<std::complex<double>> dft2(const std::vector<std::complex<double>>& in, int nx,
                                              int ny, int sign) {
  std::vector<std::complex<double>> out(in.size());
  std::vector<std::complex<double>> buf(in);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(ny, nx, reinterpret_cast<fftw_complex*>(buf.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

inline int signed_wavenumber(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace detail

/// Real trigonometric series h(x,y) = sum_k Re(c_k exp(i(wx kx x + wy ky y))).
///
/// Only one representative of each conjugate pair (k, -k) is stored; its
/// coefficient already carries the factor 2.
class FourierSeries {
 public:
  struct Mode {
    int kx;
    int ky;
    std::complex<double> coeff;
  };

  FourierSeries() = default;
  FourierSeries(double side_x, double side_y) : side_x_(side_x), side_y_(side_y) {}

  /// Series from grid samples, dropping modes below rel_cutoff * max|c|.
  static FourierSeries from_samples(const GridSamples& g, double rel_cutoff = 1e-15) {
    std::vector<std::complex<double>> in(g.values.begin(), g.values.end());
    const auto out = detail::dft2(in, g.nx, g.ny, FFTW_FORWARD);
    const double norm = 1.0 / (static_cast<double>(g.nx) * g.ny);
    double cmax = 0.0;
    for (const auto& c : out) cmax = std::max(cmax, std::abs(c) * norm);
    FourierSeries s(g.side_x, g.side_y);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::complex<double> c = out[static_cast<std::size_t>(j) * g.nx + i] * norm;
        if (std::abs(c) <= rel_cutoff * cmax || std::abs(c) == 0.0) continue;
        const int kx = detail::signed_wavenumber(i, g.nx);
        const int ky = detail::signed_wavenumber(j, g.ny);
        const bool nyq_x = (g.nx % 2 == 0 && i == g.nx / 2);
        const bool nyq_y = (g.ny % 2 == 0 && j == g.ny / 2);
        // Keep the half plane kx > 0, or kx == 0 and ky >= 0; conjugates are implied.
        const bool self_conj = (kx == 0 || nyq_x) && (ky == 0 || nyq_y);
        if (self_conj) {
          s.modes_.push_back({kx, ky, c});
          continue;
        }
        if (nyq_x || nyq_y) {
          // Aliased Nyquist modes: represent as their real (cosine-like) part.
          s.modes_.push_back({kx, ky, c});
          continue;
        }
        if (kx > 0 || (kx == 0 && ky > 0)) s.modes_.push_back({kx, ky, 2.0 * c});
      }
    return s;
  }

  void add_mode(int kx, int ky, std::complex<double> c) { modes_.push_back({kx, ky, c}); }

  const std::vector<Mode>& modes() const { return modes_; }
  double side_x() const { return side_x_; }
  double side_y() const { return side_y_; }
  double wx() const { return 2.0 * std::numbers::pi / side_x_; }
  double wy() const { return 2.0 * std::numbers::pi / side_y_; }

  double value(double x, double y) const {
    double v = 0.0;
    for (const auto& m : modes_) {
      const double th = wx() * m.kx * x + wy() * m.ky * y;
      v += m.coeff.real() * std::cos(th) - m.coeff.imag() * std::sin(th);
    }
    return v;
  }

  template <int K>
  Jet<K> jet(double x, double y) const {
    Jet<K> r;
    double fx[K + 1];
    fx[0] = 1.0;
    for (int n = 1; n <= K; ++n) fx[n] = fx[n - 1] * n;
    for (const auto& m : modes_) {
      const double a = wx() * m.kx, b = wy() * m.ky;
      const std::complex<double> e = m.coeff * std::polar(1.0, a * x + b * y);
      const std::complex<double> ia(0.0, a), ib(0.0, b);
      std::complex<double> pa(1.0, 0.0);
      for (int i = 0; i <= K; ++i) {
        std::complex<double> pab = pa;
        for (int j = 0; i + j <= K; ++j) {
          r.coeff_ref(i, j) += (e * pab).real() / (fx[i] * fx[j]);
          pab *= ib;
        }
        pa *= ia;
      }
    }
    return r;
  }

  /// Mean value (the k = 0 coefficient).
  double mean() const {
    for (const auto& m : modes_)
      if (m.kx == 0 && m.ky == 0) return m.coeff.real();
    return 0.0;
  }

  FourierSeries scaled(double s) const {
    FourierSeries r = *this;
    for (auto& m : r.modes_) m.coeff *= s;
    return r;
  }

  /// Solve Laplace(phi) = *this for phi with zero mean; the mean of *this is ignored.
  FourierSeries poisson_solution() const {
    FourierSeries r(side_x_, side_y_);
    for (const auto& m : modes_) {
      if (m.kx == 0 && m.ky == 0) continue;
      const double k2 = std::pow(wx() * m.kx, 2) + std::pow(wy() * m.ky, 2);
      r.modes_.push_back({m.kx, m.ky, -m.coeff / k2});
    }
    return r;
  }

  /// Partial derivative series.
  FourierSeries derivative(int ix, int iy) const {
    FourierSeries r(side_x_, side_y_);
    for (const auto& m : modes_) {
      const std::complex<double> f =
          std::pow(std::complex<double>(0.0, wx() * m.kx), ix) *
          std::pow(std::complex<double>(0.0, wy() * m.ky), iy);
      r.modes_.push_back({m.kx, m.ky, m.coeff * f});
    }
    return r;
  }

 private:
  double side_x_ = 1.0;
  double side_y_ = 1.0;
  std::vector<Mode> modes_;
};

}  // namespace magsys
