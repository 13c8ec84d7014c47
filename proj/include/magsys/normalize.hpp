#pragma once

// Normalisation of magnetic functions: spectral primitives of zero-mean
// densities, the Moser map pulling f/f_avg mu back to mu, strongness
// thresholds, the multi-index sets I_{h,k} with their polynomials B_{h,k}, and
// a sampled Gronwall witness for the time-one map of the magnetic flow.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "magsys/dop853.hpp"
#include "magsys/errors.hpp"
#include "magsys/field.hpp"
#include "magsys/flow.hpp"
#include "magsys/orbit.hpp"
#include "magsys/spectral.hpp"
#include "magsys/surface.hpp"

namespace magsys {

// One-forms on the torus ------------------------------------------------------------

/// zeta = zx dx + zy dy with trigonometric-series components.
struct SurfaceOneForm {
  FourierSeries zx;
  FourierSeries zy;

  std::array<double, 2> value(double x, double y) const { return {zx.value(x, y), zy.value(x, y)}; }
  /// d zeta / (dx ^ dy) = d_x zy - d_y zx.
  double exterior_derivative(double x, double y) const {
    return zy.jet<1>(x, y).dx() - zx.jet<1>(x, y).dy();
  }
};

namespace detail {

inline void require_torus(const Surface& s, const char* what) {
  if (!s.is_torus()) throw UnsupportedOperation(std::string(what) + " is implemented on tori only");
}

inline GridSamples sample_density(const Surface& s, const ScalarField& h, int n) {
  GridSamples g{n, n, s.side_x(), s.side_y(), {}};
  g.values.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const ChartPoint p{g.x(i), g.y(j), 0};
      g.values[static_cast<std::size_t>(j) * n + i] = s.field_value(h, p) * std::exp(2.0 * s.log_factor_value(p));
    }
  return g;
}

/// sup over an n x n grid of |nabla^j zeta| for j = 0..2.
inline std::array<double, 3> one_form_sup_norms(const Surface& s, const SurfaceOneForm& z, int n) {
  std::array<double, 3> out{};
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const ChartPoint p{s.side_x() * i / n, s.side_y() * j / n, 0};
      const Jet<2> u = s.log_factor<2>(p);
      std::vector<Jet<2>> t{z.zx.jet<2>(p.x, p.y), z.zy.jet<2>(p.x, p.y)};
      for (int k = 0; k <= 2; ++k) {
        out[static_cast<std::size_t>(k)] = std::max(out[static_cast<std::size_t>(k)], tensor_norm(t, k + 1, u.value()));
        if (k < 2) t = covariant_derivative(t, k + 1, u);
      }
    }
  return out;
}

}  // namespace detail

struct HodgePrimitive {
  SurfaceOneForm zeta;
  FourierSeries potential;  ///< phi with Laplace(phi) = h e^{2u}
  double residual = 0.0;    ///< sup |d zeta - h mu| / (dx ^ dy) on a shifted grid
  std::array<double, 3> schauder_ratio{};  ///< ||zeta||_{C^k} / ||h||_{C^k}, k = 0..2
};

struct HodgeOptions {
  int resolution = 256;
  int norm_resolution = 64;
  double mean_tol = 1e-10;
};

/// Co-exact primitive of h mu on a torus: zeta = -phi_y dx + phi_x dy with
/// Laplace(phi) = h e^{2u}, so d zeta = h mu.
inline HodgePrimitive hodge_primitive(const Surface& surface, const ScalarField& h, const HodgeOptions& opts = {}) {
  detail::require_torus(surface, "hodge primitive");
  const GridSamples g = detail::sample_density(surface, h, opts.resolution);
  double mean = 0.0, scale = 0.0;
  for (double v : g.values) {
    mean += v;
    scale += std::abs(v);
  }
  mean /= static_cast<double>(g.values.size());
  scale /= static_cast<double>(g.values.size());
  if (std::abs(mean) > opts.mean_tol * std::max(1.0, scale))
    throw PreconditionError("density has nonzero average " + std::to_string(mean * surface.side_x() * surface.side_y()) +
                            "; a primitive exists only for zero mean");
  HodgePrimitive out;
  const FourierSeries rhs = FourierSeries::from_samples(g, 1e-14);
  out.potential = rhs.poisson_solution();
  out.zeta.zx = out.potential.derivative(0, 1).scaled(-1.0);
  out.zeta.zy = out.potential.derivative(1, 0);
  const int m = std::min(opts.resolution, 64);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const double x = surface.side_x() * (i + 0.37) / m, y = surface.side_y() * (j + 0.61) / m;
      const ChartPoint p{x, y, 0};
      const double target = surface.field_value(h, p) * std::exp(2.0 * surface.log_factor_value(p));
      out.residual = std::max(out.residual, std::abs(out.zeta.exterior_derivative(x, y) - target));
    }
  const auto zn = detail::one_form_sup_norms(surface, out.zeta, opts.norm_resolution);
  const FieldNorms hn = field_norms(surface, h, opts.norm_resolution);
  double zc = 0.0;
  for (int k = 0; k <= 2; ++k) {
    zc += zn[static_cast<std::size_t>(k)];
    const double hc = hn.ck(k);
    out.schauder_ratio[static_cast<std::size_t>(k)] = hc > 0.0 ? zc / hc : 0.0;
  }
  return out;
}

// Moser normalisation -------------------------------------------------------------------

struct MoserOptions {
  int resolution = 256;
  IntegratorOptions integrator{1e-12, 1e-14, 1'000'000, std::numeric_limits<double>::infinity()};
  int threads = 0;
  int hodge_resolution = 128;
};

struct MoserResult {
  double f_avg = 0.0;
  HodgePrimitive primitive;
  int resolution = 0;
  double side_x = 1.0, side_y = 1.0;
  std::vector<std::array<double, 2>> image;  ///< psi of grid point (i, j) at index j*n + i (lift)
  std::vector<double> defect;                ///< pullback defect at each grid point
  double pullback_defect = 0.0;              ///< sup |defect|
  double max_displacement = 0.0;
  bool identity = false;
  FourierSeries displacement_x, displacement_y;  ///< trigonometric interpolation of psi - id
  std::shared_ptr<const std::function<std::array<double, 6>(double, double)>> flow_map;

  /// psi by trigonometric interpolation of the grid displacement.
  std::array<double, 2> interpolate(double x, double y) const {
    if (identity) return {x, y};
    return {x + displacement_x.value(x, y), y + displacement_y.value(x, y)};
  }
  /// psi and its differential by integrating the Moser flow: (x', y', J00, J01, J10, J11).
  std::array<double, 6> map_with_differential(double x, double y) const {
    if (identity || !flow_map) return {x, y, 1.0, 0.0, 0.0, 1.0};
    return (*flow_map)(x, y);
  }
};

namespace detail {

struct MoserField {
  const Surface* surface;
  ScalarField f_norm;
  FourierSeries phi;

  /// Y_s and its Jacobian at (x, y).
  void eval(double s, double x, double y, double& yx, double& yy, Eigen::Matrix2d& dy) const {
    const Jet<2> p = phi.jet<2>(x, y);
    const ChartPoint cp{x, y, 0};
    const Jet<1> u = surface->log_factor<1>(cp);
    const Jet<1> fn = surface->field_jet<1>(f_norm, cp);
    const double q = s * fn.value() + 1.0 - s;
    if (!(q > 0.0)) throw ConsistencyError("interpolating density q(f, s) is not positive");
    const double w = std::exp(-2.0 * u.value()) / q;
    yx = -p.dx() * w;
    yy = -p.dy() * w;
    // d(w) = w (-2 du - s dfn / q)
    const double wx = w * (-2.0 * u.dx() - s * fn.dx() / q), wy = w * (-2.0 * u.dy() - s * fn.dy() / q);
    dy << -p.dxx() * w - p.dx() * wx, -p.dxy() * w - p.dx() * wy,  //
        -p.dxy() * w - p.dy() * wx, -p.dyy() * w - p.dy() * wy;
  }

  std::array<double, 6> flow(double x, double y, const IntegratorOptions& opts) const {
    using S = std::array<double, 6>;
    auto rhs = [&](double s, const S& z, S& dz) {
      double yx, yy;
      Eigen::Matrix2d a;
      eval(s, z[0], z[1], yx, yy, a);
      dz[0] = yx;
      dz[1] = yy;
      // d/ds J = DY J with J row-major (z[2], z[3]; z[4], z[5]).
      dz[2] = a(0, 0) * z[2] + a(0, 1) * z[4];
      dz[3] = a(0, 0) * z[3] + a(0, 1) * z[5];
      dz[4] = a(1, 0) * z[2] + a(1, 1) * z[4];
      dz[5] = a(1, 0) * z[3] + a(1, 1) * z[5];
    };
    Dop853<6> solver(opts, false);
    const auto res = solver.integrate(rhs, 0.0, S{x, y, 1.0, 0.0, 0.0, 1.0}, 1.0);
    if (res.status != IntegrationStatus::Completed)
      throw IntegrationError("Moser flow failed", res.t, {res.y[0], res.y[1], 0.0});
    return res.y;
  }
};

}  // namespace detail

/// Pullback defect det(d psi) f_norm(psi) e^{2u(psi)} / e^{2u} - 1.
inline double pullback_defect_at(const Surface& surface, const ScalarField& f_norm, double x, double y,
                                 const std::array<double, 6>& m) {
  const ChartPoint to{m[0], m[1], 0};
  const double det = m[2] * m[5] - m[3] * m[4];
  return det * surface.field_value(f_norm, to) * std::exp(2.0 * (surface.log_factor_value(to) -
                                                                 surface.log_factor_value({x, y, 0}))) -
         1.0;
}

/// Moser map psi with psi^*(f / f_avg mu) = mu.  Tori: time-one map of
/// Y_s = -grad(phi) e^{-2u} / q_s with q_s = s f_norm + 1 - s and Laplace(phi) =
/// (f_norm - 1) e^{2u}.  Sphere: constant f only (psi = identity).
inline MoserResult moser_normalize(const Surface& surface, const ScalarField& f, const MoserOptions& opts = {}) {
  MoserResult out;
  out.resolution = opts.resolution;
  if (!surface.is_compact()) throw UnsupportedOperation("Moser normalisation needs a compact surface");
  const FieldNorms fn0 = field_norms(surface, f, surface.is_torus() ? std::min(opts.resolution, 128) : 64);
  if (!(fn0.minimum > 0.0)) throw PositivityError("Moser normalisation needs min f > 0");
  out.f_avg = f.is_constant() ? f.constant_value() : average(surface, f, 256);
  if (surface.is_sphere()) {
    if (!f.is_constant())
      throw UnsupportedOperation("Moser normalisation on the sphere is implemented for constant f only");
    out.identity = true;
    out.side_x = out.side_y = 0.0;
    return out;
  }
  out.side_x = surface.side_x();
  out.side_y = surface.side_y();
  const int n = opts.resolution;
  out.image.resize(static_cast<std::size_t>(n) * n);
  out.defect.assign(out.image.size(), 0.0);
  const ScalarField f_norm = f.scaled(1.0 / out.f_avg);
  if (f.is_constant()) {
    out.identity = true;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out.image[static_cast<std::size_t>(j) * n + i] = {out.side_x * i / n, out.side_y * j / n};
    out.displacement_x = FourierSeries(out.side_x, out.side_y);
    out.displacement_y = FourierSeries(out.side_x, out.side_y);
    return out;
  }
  HodgeOptions ho;
  ho.resolution = opts.hodge_resolution;
  ho.mean_tol = 1e-8;
  out.primitive = hodge_primitive(surface, f_norm.shifted(-1.0), ho);
  auto field = std::make_shared<detail::MoserField>(detail::MoserField{&surface, f_norm, out.primitive.potential});
  const IntegratorOptions iopts = opts.integrator;
  std::vector<double> dx(out.image.size()), dy(out.image.size());
  parallel_for(n * n, opts.threads, [&](int k) {
    const int i = k % n, j = k / n;
    const double x = out.side_x * i / n, y = out.side_y * j / n;
    const auto m = field->flow(x, y, iopts);
    const auto kk = static_cast<std::size_t>(k);
    out.image[kk] = {m[0], m[1]};
    out.defect[kk] = pullback_defect_at(surface, f_norm, x, y, m);
    dx[kk] = m[0] - x;
    dy[kk] = m[1] - y;
  });
  for (std::size_t k = 0; k < out.defect.size(); ++k) {
    out.pullback_defect = std::max(out.pullback_defect, std::abs(out.defect[k]));
    out.max_displacement = std::max(out.max_displacement, std::hypot(dx[k], dy[k]));
  }
  out.displacement_x = FourierSeries::from_samples({n, n, out.side_x, out.side_y, dx}, 1e-13);
  out.displacement_y = FourierSeries::from_samples({n, n, out.side_x, out.side_y, dy}, 1e-13);
  out.flow_map = std::make_shared<const std::function<std::array<double, 6>(double, double)>>(
      [field, iopts](double x, double y) { return field->flow(x, y, iopts); });
  return out;
}

// Strongness -----------------------------------------------------------------------------

struct StrongnessReport {
  std::array<double, 3> brackets{};  ///< <f>_1, <f>_2, <f>_3
  double f_avg = 0.0;
  double C = 0.0;

  double threshold(double c) const {
    return (std::pow(brackets[2], 4) + std::pow(brackets[1], 6)) * std::exp(c * brackets[0] * brackets[0]);
  }
  double threshold() const { return threshold(C); }
  bool is_strong(double c) const { return f_avg > threshold(c); }
  bool is_strong() const { return is_strong(C); }
  /// Smallest s with s f being C-strong (strict inequality needs s > s*).
  double minimal_rescaling(double c) const { return threshold(c) / f_avg; }
  double minimal_rescaling() const { return minimal_rescaling(C); }
  /// Report for s f: brackets are scale invariant, the average scales.
  StrongnessReport rescaled(double s) const {
    StrongnessReport r = *this;
    r.f_avg *= s;
    return r;
  }
};

inline StrongnessReport strongness(const Surface& surface, const ScalarField& f, double C, int resolution = 256) {
  if (!surface.is_compact()) throw UnsupportedOperation("strongness needs a compact surface");
  const FieldNorms n = field_norms(surface, f, resolution);
  if (!(n.minimum > 0.0)) throw PositivityError("strongness needs min f > 0 (found " + std::to_string(n.minimum) + ")");
  StrongnessReport r;
  for (int k = 1; k <= 3; ++k) r.brackets[static_cast<std::size_t>(k - 1)] = n.ck(k) / n.minimum;
  r.f_avg = f.is_constant() ? f.constant_value() : average(surface, f, resolution);
  r.C = C;
  return r;
}

// Multi-index sets --------------------------------------------------------------------------

using MultiIndex = std::vector<int>;

/// I_{h,k}: a in N^{k+1} with 0 < sum_j (j + 1) a_j <= h + k, in lexicographic order.
inline std::vector<MultiIndex> index_set(int h, int k) {
  if (h < 0 || k < 0) throw PreconditionError("index set needs h, k >= 0");
  std::vector<MultiIndex> out;
  MultiIndex a(static_cast<std::size_t>(k + 1), 0);
  const int budget = h + k;
  auto rec = [&](auto&& self, int j, int used) -> void {
    if (j > k) {
      if (used > 0) out.push_back(a);
      return;
    }
    for (int v = 0; used + (j + 1) * v <= budget; ++v) {
      a[static_cast<std::size_t>(j)] = v;
      self(self, j + 1, used + (j + 1) * v);
    }
    a[static_cast<std::size_t>(j)] = 0;
  };
  rec(rec, 0, 0);
  return out;
}

/// B_{h,k}(x) = sum over I_{h,k} of x^a.
inline double bhk(int h, int k, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != k + 1)
    throw ArityError("B_{h,k} with k = " + std::to_string(k) + " takes " + std::to_string(k + 1) +
                     " arguments, got " + std::to_string(x.size()));
  double sum = 0.0;
  for (const auto& a : index_set(h, k)) {
    double term = 1.0;
    for (std::size_t j = 0; j < a.size(); ++j) term *= std::pow(x[j], a[j]);
    sum += term;
  }
  return sum;
}

// Gronwall witness -----------------------------------------------------------------------

struct GronwallOptions {
  int samples = 100;
  unsigned seed = 1;
  double time = 1.0;
  double fd_step = 1e-4;   ///< for first derivatives
  double fd_step2 = 1e-3;  ///< for second derivatives
  int trajectory_points = 200;
  IntegratorOptions integrator{1e-12, 1e-13, 5'000'000, std::numeric_limits<double>::infinity()};
};

struct GronwallReport {
  int samples = 0;
  int skipped = 0;                    ///< jets discarded because they changed chart
  std::array<double, 3> grad_x{};     ///< <nabla X>_{C^k} = 1 + sum_{j<=k} sup |D^j (DX)|, k = 0..2
  std::array<double, 3> flow_norms{}; ///< ||d Phi_1||_{C^j} = sum_{i<=j} sup |D^i d Phi_1|
  double lhs = 0.0;                   ///< B_{2,2}(flow_norms)
  double rhs_factor = 0.0;            ///< <nabla X>_{C^2} + <nabla X>_{C^1}^2
  double calibration = 0.0;           ///< smallest C >= 0 with lhs <= rhs_factor e^{C <nabla X>_{C^0}}
  int first_order_checked = 0;
  int first_order_violations = 0;
  double worst_first_order_ratio = 0.0;  ///< max ||d Phi_1|| / exp(max ||DX||) over samples
  std::vector<std::string> warnings;
};

namespace detail {

inline double spectral_norm(const Eigen::Matrix3d& m) {
  return Eigen::JacobiSVD<Eigen::Matrix3d>(m).singularValues()(0);
}

inline UnitTangentState shifted_state(const UnitTangentState& s, int axis, double h) {
  UnitTangentState t = s;
  (axis == 0 ? t.x : axis == 1 ? t.y : t.phi) += h;
  return t;
}

}  // namespace detail

/// Initial conditions for the witness: tori uniformly, sphere near the centre
/// of chart 0 (so that time-one jets stay in one chart), hyperbolic chart in r < 0.3.
inline std::vector<UnitTangentState> gronwall_samples(const Surface& surface, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<UnitTangentState> out;
  while (static_cast<int>(out.size()) < n) {
    const double phi = 2.0 * std::numbers::pi * u01(rng);
    if (surface.is_torus()) {
      out.push_back({surface.side_x() * u01(rng), surface.side_y() * u01(rng), phi, 0});
    } else {
      const double r = 0.3 * std::sqrt(u01(rng)), th = 2.0 * std::numbers::pi * u01(rng);
      out.push_back({r * std::cos(th), r * std::sin(th), phi, 0});
    }
  }
  return out;
}

inline GronwallReport gronwall_witness(const Surface& surface, const ScalarField& f, const GronwallOptions& opts = {}) {
  GronwallReport rep;
  const auto seeds = gronwall_samples(surface, opts.samples, opts.seed);
  if (opts.samples < 20) rep.warnings.push_back("fewer than 20 sampled jets; calibration has low confidence");
  std::array<double, 3> supA{};   // sup |DX|, |D(DX)|, |D^2(DX)|
  std::array<double, 3> supD{};   // sup |dPhi|, |D dPhi|, |D^2 dPhi|
  const double h1 = opts.fd_step, h2 = opts.fd_step2;
  auto jacobian_derivs = [&](const UnitTangentState& s) {
    std::array<double, 3> v{};
    v[0] = detail::spectral_norm(magnetic_jacobian(surface, f, s));
    double d1 = 0.0, d2 = 0.0;
    const Eigen::Matrix3d a0 = magnetic_jacobian(surface, f, s);
    for (int i = 0; i < 3; ++i) {
      const Eigen::Matrix3d ap = magnetic_jacobian(surface, f, detail::shifted_state(s, i, h1));
      const Eigen::Matrix3d am = magnetic_jacobian(surface, f, detail::shifted_state(s, i, -h1));
      d1 += ((ap - am) / (2.0 * h1)).squaredNorm();
      for (int j = 0; j < 3; ++j) {
        Eigen::Matrix3d second;
        if (i == j) {
          second = (magnetic_jacobian(surface, f, detail::shifted_state(s, i, h2)) - 2.0 * a0 +
                    magnetic_jacobian(surface, f, detail::shifted_state(s, i, -h2))) /
                   (h2 * h2);
        } else {
          auto at = [&](double si, double sj) {
            return magnetic_jacobian(surface, f, detail::shifted_state(detail::shifted_state(s, i, si), j, sj));
          };
          second = (at(h2, h2) - at(h2, -h2) - at(-h2, h2) + at(-h2, -h2)) / (4.0 * h2 * h2);
        }
        d2 += second.squaredNorm();
      }
    }
    v[1] = std::sqrt(d1);
    v[2] = std::sqrt(d2);
    return v;
  };

  for (const auto& s0 : seeds) {
    const DenseTrajectory traj = integrate_dense(surface, f, s0, opts.time, opts.integrator);
    double amax = 0.0;
    for (int k = 0; k <= opts.trajectory_points; ++k) {
      const UnitTangentState s = traj.state_at(opts.time * k / opts.trajectory_points);
      const auto v = jacobian_derivs(s);
      amax = std::max(amax, v[0]);
      for (std::size_t q = 0; q < 3; ++q) supA[q] = std::max(supA[q], v[q]);
    }
    auto jet = [&](const UnitTangentState& s) {
      return integrate_with_variation(surface, f, s, opts.time, opts.integrator);
    };
    const FlowJet j0 = jet(s0);
    if (j0.state.chart != s0.chart) {
      ++rep.skipped;
      continue;
    }
    ++rep.samples;
    const double n0 = detail::spectral_norm(j0.differential);
    ++rep.first_order_checked;
    const double ratio = n0 / std::exp(opts.time * amax);
    rep.worst_first_order_ratio = std::max(rep.worst_first_order_ratio, ratio);
    if (ratio > 1.0) ++rep.first_order_violations;
    supD[0] = std::max(supD[0], n0);
    double d1 = 0.0, d2 = 0.0;
    std::array<Eigen::Matrix3d, 3> plus, minus;
    for (int i = 0; i < 3; ++i) {
      plus[static_cast<std::size_t>(i)] = jet(detail::shifted_state(s0, i, h2)).differential;
      minus[static_cast<std::size_t>(i)] = jet(detail::shifted_state(s0, i, -h2)).differential;
      d1 += ((plus[static_cast<std::size_t>(i)] - minus[static_cast<std::size_t>(i)]) / (2.0 * h2)).squaredNorm();
    }
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        Eigen::Matrix3d second;
        if (i == k) {
          second = (plus[static_cast<std::size_t>(i)] - 2.0 * j0.differential + minus[static_cast<std::size_t>(i)]) /
                   (h2 * h2);
        } else if (k > i) {
          auto at = [&](double si, double sk) {
            return jet(detail::shifted_state(detail::shifted_state(s0, i, si), k, sk)).differential;
          };
          second = (at(h2, h2) - at(h2, -h2) - at(-h2, h2) + at(-h2, -h2)) / (4.0 * h2 * h2);
          d2 += second.squaredNorm();  // counted twice by symmetry
        } else {
          continue;
        }
        d2 += second.squaredNorm();
      }
    supD[1] = std::max(supD[1], std::sqrt(d1));
    supD[2] = std::max(supD[2], std::sqrt(d2));
  }
  double acc = 1.0, accD = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    acc += supA[k];
    rep.grad_x[k] = acc;
    accD += supD[k];
    rep.flow_norms[k] = accD;
  }
  rep.lhs = bhk(2, 2, {rep.flow_norms[0], rep.flow_norms[1], rep.flow_norms[2]});
  rep.rhs_factor = rep.grad_x[2] + rep.grad_x[1] * rep.grad_x[1];
  rep.calibration = std::max(0.0, std::log(rep.lhs / rep.rhs_factor) / rep.grad_x[0]);
  if (rep.skipped > 0) rep.warnings.push_back(std::to_string(rep.skipped) + " jets left the starting chart");
  return rep;
}

}  // namespace magsys
