#pragma once

// Model surfaces as conformal charts g = e^{2u}(dx^2 + dy^2), and the metric
// quantities built on them: curvature, integration of densities, and C^k
// norms of scalar fields.
//
// Round sphere of radius R: two stereographic charts.  Chart 0 projects from
// the north pole, P = R(2x, 2y, r^2 - 1)/(1 + r^2); chart 1 is w = 1/z,
// P = R(2x, -2y, 1 - r^2)/(1 + r^2).  Both have u = log(2R/(1 + r^2)) and the
// orientation of chart 0.  Tori use the lift R^2 with periodic data.  The
// hyperbolic chart is the Poincare disc of curvature -k^2.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/field.hpp"
#include "magsys/jet.hpp"
#include "magsys/quadrature.hpp"
#include "magsys/spectral.hpp"

namespace magsys {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

/// Angle wrapped to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

struct ChartPoint {
  double x = 0.0;
  double y = 0.0;
  int chart = 0;
};

enum class SurfaceKind { RoundSphere, FlatTorus, ConformalTorus, HyperbolicChart };

class Surface {
 public:
  static Surface round_sphere(double radius = 1.0) {
    if (!(radius > 0.0)) throw PreconditionError("sphere radius must be positive");
    Surface s(SurfaceKind::RoundSphere);
    s.radius_ = radius;
    return s;
  }
  static Surface flat_torus(double side_x = 1.0, double side_y = 1.0) {
    if (!(side_x > 0.0 && side_y > 0.0)) throw PreconditionError("torus sides must be positive");
    Surface s(SurfaceKind::FlatTorus);
    s.side_x_ = side_x;
    s.side_y_ = side_y;
    return s;
  }
  /// Torus with metric e^{2u}(dx^2+dy^2); u is resampled into a trigonometric series.
  static Surface conformal_torus(const ScalarField& log_factor, double side_x = 1.0, double side_y = 1.0,
                                 int resolution = 256) {
    Surface s = flat_torus(side_x, side_y);
    s.kind_ = SurfaceKind::ConformalTorus;
    if (log_factor.is_fourier()) {
      s.u_ = std::get<FourierSeries>(log_factor.source());
      s.u_ = s.u_.scaled(log_factor.scale());
      if (log_factor.offset() != 0.0) s.u_.add_mode(0, 0, log_factor.offset());
    } else {
      GridSamples g{resolution, resolution, side_x, side_y, {}};
      g.values.resize(static_cast<std::size_t>(resolution) * resolution);
      for (int j = 0; j < resolution; ++j)
        for (int i = 0; i < resolution; ++i)
          g.values[static_cast<std::size_t>(j) * resolution + i] =
              log_factor.evaluate<double>(g.x(i), g.y(j), 0.0);
      s.u_ = FourierSeries::from_samples(g);
    }
    s.u_field_ = log_factor;
    return s;
  }
  static Surface hyperbolic_chart(double curvature = -1.0) {
    if (!(curvature < 0.0)) throw PreconditionError("hyperbolic chart needs negative curvature");
    Surface s(SurfaceKind::HyperbolicChart);
    s.k_ = std::sqrt(-curvature);
    return s;
  }

  SurfaceKind kind() const { return kind_; }
  bool is_sphere() const { return kind_ == SurfaceKind::RoundSphere; }
  bool is_torus() const { return kind_ == SurfaceKind::FlatTorus || kind_ == SurfaceKind::ConformalTorus; }
  bool is_compact() const { return kind_ != SurfaceKind::HyperbolicChart; }
  double radius() const { return radius_; }
  double side_x() const { return side_x_; }
  double side_y() const { return side_y_; }
  /// k with curvature -k^2 (hyperbolic chart only).
  double hyperbolic_scale() const { return k_; }
  const FourierSeries& log_factor_series() const { return u_; }
  const ScalarField& log_factor_field() const { return u_field_; }

  std::string name() const {
    switch (kind_) {
      case SurfaceKind::RoundSphere: return "round_sphere";
      case SurfaceKind::FlatTorus: return "flat_torus";
      case SurfaceKind::ConformalTorus: return "conformal_torus";
      case SurfaceKind::HyperbolicChart: return "hyperbolic_chart";
    }
    return "unknown";
  }

  double area() const {
    switch (kind_) {
      case SurfaceKind::RoundSphere: return 4.0 * std::numbers::pi * radius_ * radius_;
      case SurfaceKind::FlatTorus: return side_x_ * side_y_;
      case SurfaceKind::ConformalTorus: {
        // Trapezoid rule is exact for the band-limited e^{2u} up to aliasing.
        const int n = 256;
        double sum = 0.0;
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) sum += std::exp(2.0 * u_.value(side_x_ * i / n, side_y_ * j / n));
        return sum * side_x_ * side_y_ / (static_cast<double>(n) * n);
      }
      case SurfaceKind::HyperbolicChart: break;
    }
    throw UnsupportedOperation("area is undefined on the non-compact hyperbolic chart");
  }

  int euler_characteristic() const {
    if (is_sphere()) return 2;
    if (is_torus()) return 0;
    throw UnsupportedOperation("Euler characteristic is undefined on the hyperbolic chart");
  }

  void check_domain(const ChartPoint& p) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("non-finite chart point");
    if (kind_ == SurfaceKind::HyperbolicChart && p.x * p.x + p.y * p.y >= 1.0)
      throw DomainError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") lies outside the unit disc of the hyperbolic chart");
    if (is_sphere() && p.chart != 0 && p.chart != 1) throw DomainError("sphere chart index must be 0 or 1");
  }

  /// Jet of the log conformal factor u at p.
  template <int K>
  Jet<K> log_factor(const ChartPoint& p) const {
    switch (kind_) {
      case SurfaceKind::FlatTorus: return Jet<K>(0.0);
      case SurfaceKind::ConformalTorus: return u_.jet<K>(p.x, p.y);
      case SurfaceKind::RoundSphere: {
        const auto x = Jet<K>::variable_x(p.x), y = Jet<K>::variable_y(p.y);
        return std::log(2.0 * radius_) - log(1.0 + x * x + y * y);
      }
      case SurfaceKind::HyperbolicChart: {
        check_domain(p);
        const auto x = Jet<K>::variable_x(p.x), y = Jet<K>::variable_y(p.y);
        return std::log(2.0 / k_) - log(1.0 - x * x - y * y);
      }
    }
    return Jet<K>(0.0);
  }

  double log_factor_value(const ChartPoint& p) const {
    switch (kind_) {
      case SurfaceKind::FlatTorus: return 0.0;
      case SurfaceKind::ConformalTorus: return u_.value(p.x, p.y);
      case SurfaceKind::RoundSphere: return std::log(2.0 * radius_ / (1.0 + p.x * p.x + p.y * p.y));
      case SurfaceKind::HyperbolicChart:
        check_domain(p);
        return std::log(2.0 / (k_ * (1.0 - p.x * p.x - p.y * p.y)));
    }
    return 0.0;
  }

  /// Jet of a field at p in the chart of p.
  template <int K>
  Jet<K> field_jet(const ScalarField& f, const ChartPoint& p) const {
    const auto x = Jet<K>::variable_x(p.x), y = Jet<K>::variable_y(p.y);
    if (!is_sphere()) {
      if (kind_ == SurfaceKind::HyperbolicChart) check_domain(p);
      return f.evaluate<Jet<K>>(x, y, Jet<K>(0.0));
    }
    if (f.is_fourier()) throw UnsupportedOperation("trigonometric-series fields live on the torus only");
    const Jet<K> r2 = x * x + y * y;
    const Jet<K> inv = reciprocal(1.0 + r2);
    const double sy = p.chart == 0 ? 1.0 : -1.0;
    const double sz = p.chart == 0 ? 1.0 : -1.0;
    return f.evaluate<Jet<K>>(2.0 * x * inv, sy * 2.0 * y * inv, sz * (r2 - 1.0) * inv);
  }

  double field_value(const ScalarField& f, const ChartPoint& p) const {
    if (!is_sphere()) {
      if (kind_ == SurfaceKind::HyperbolicChart) check_domain(p);
      return f.evaluate<double>(p.x, p.y, 0.0);
    }
    const Vec3 a = unit_ambient(p);
    return f.evaluate<double>(a[0], a[1], a[2]);
  }

  double field_at_ambient(const ScalarField& f, const Vec3& unit) const {
    return f.evaluate<double>(unit[0], unit[1], unit[2]);
  }

  // Sphere embedding -------------------------------------------------------

  Vec3 unit_ambient(const ChartPoint& p) const {
    const double r2 = p.x * p.x + p.y * p.y;
    const double inv = 1.0 / (1.0 + r2);
    if (p.chart == 0) return {2.0 * p.x * inv, 2.0 * p.y * inv, (r2 - 1.0) * inv};
    return {2.0 * p.x * inv, -2.0 * p.y * inv, (1.0 - r2) * inv};
  }
  Vec3 ambient(const ChartPoint& p) const { return radius_ * unit_ambient(p); }

  /// Ambient image of the chart vector (vx, vy) at p, for the unit sphere.
  Vec3 unit_ambient_vector(const ChartPoint& p, double vx, double vy) const {
    const double x = p.x, y = p.y, r2 = x * x + y * y, d = 1.0 + r2, d2 = d * d;
    // Partial derivatives of (2x, 2y, r^2 - 1)/(1 + r^2).
    const Vec3 px{2.0 * (d - 2.0 * x * x) / d2, -4.0 * x * y / d2, 4.0 * x / d2};
    const Vec3 py{-4.0 * x * y / d2, 2.0 * (d - 2.0 * y * y) / d2, 4.0 * y / d2};
    Vec3 v = vx * px + vy * py;
    if (p.chart == 1) v = {v[0], -v[1], -v[2]};
    return v;
  }

  /// Chart point of a unit ambient vector, in the chart that keeps r <= 1.
  ChartPoint chart_from_unit_ambient(const Vec3& a) const {
    if (a[2] <= 0.0) return {a[0] / (1.0 - a[2]), a[1] / (1.0 - a[2]), 0};
    return {a[0] / (1.0 + a[2]), -a[1] / (1.0 + a[2]), 1};
  }

  /// Chart vector at p of an ambient tangent vector v (unit sphere scale).
  std::array<double, 2> chart_vector_from_unit_ambient(const ChartPoint& p, const Vec3& v) const {
    const Vec3 a = unit_ambient(p);
    if (p.chart == 0) {
      const double s = 1.0 - a[2];
      return {v[0] / s + a[0] * v[2] / (s * s), v[1] / s + a[1] * v[2] / (s * s)};
    }
    const double s = 1.0 + a[2];
    return {v[0] / s - a[0] * v[2] / (s * s), -v[1] / s + a[1] * v[2] / (s * s)};
  }

 private:
  explicit Surface(SurfaceKind k) : kind_(k) {}

  SurfaceKind kind_;
  double radius_ = 1.0;
  double side_x_ = 1.0;
  double side_y_ = 1.0;
  double k_ = 1.0;
  FourierSeries u_;
  ScalarField u_field_;
};

// Curvature and integration ---------------------------------------------------

inline double gaussian_curvature(const Surface& s, const ChartPoint& p) {
  s.check_domain(p);
  switch (s.kind()) {
    case SurfaceKind::RoundSphere: return 1.0 / (s.radius() * s.radius());
    case SurfaceKind::FlatTorus: return 0.0;
    case SurfaceKind::HyperbolicChart: return -s.hyperbolic_scale() * s.hyperbolic_scale();
    case SurfaceKind::ConformalTorus: {
      const Jet<2> u = s.log_factor<2>(p);
      return -std::exp(-2.0 * u.value()) * (u.dxx() + u.dyy());
    }
  }
  return 0.0;
}

/// Quadrature points of a compact surface with weights summing to its area.
/// Torus: uniform n x n grid.  Sphere: n Gauss-Legendre nodes in z times n
/// longitudes.
struct SurfaceQuadrature {
  std::vector<ChartPoint> points;
  std::vector<double> weights;
};

inline SurfaceQuadrature surface_quadrature(const Surface& s, int n) {
  if (!s.is_compact()) throw UnsupportedOperation("integration over the non-compact hyperbolic chart");
  SurfaceQuadrature q;
  if (s.is_torus()) {
    const double cell = s.side_x() * s.side_y() / (static_cast<double>(n) * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const ChartPoint p{s.side_x() * i / n, s.side_y() * j / n, 0};
        q.points.push_back(p);
        q.weights.push_back(cell * std::exp(2.0 * s.log_factor_value(p)));
      }
    return q;
  }
  const QuadratureRule gl = gauss_legendre(n);
  const double r2 = s.radius() * s.radius();
  for (int i = 0; i < n; ++i) {
    const double z = gl.nodes[static_cast<std::size_t>(i)];
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n; ++j) {
      const double lon = 2.0 * std::numbers::pi * (j + 0.5) / n;
      q.points.push_back(s.chart_from_unit_ambient({rho * std::cos(lon), rho * std::sin(lon), z}));
      q.weights.push_back(r2 * gl.weights[static_cast<std::size_t>(i)] * 2.0 * std::numbers::pi / n);
    }
  }
  return q;
}

/// Integral of h against the area form.
template <class Fn>
double integrate_function(const Surface& s, const Fn& h, int resolution = 256) {
  const SurfaceQuadrature q = surface_quadrature(s, resolution);
  double sum = 0.0;
  for (std::size_t i = 0; i < q.points.size(); ++i) sum += q.weights[i] * h(q.points[i]);
  return sum;
}

inline double integrate_density(const Surface& s, const ScalarField& h, int resolution = 256) {
  return integrate_function(s, [&](const ChartPoint& p) { return s.field_value(h, p); }, resolution);
}

inline double average(const Surface& s, const ScalarField& h, int resolution = 256) {
  return integrate_density(s, h, resolution) / s.area();
}

// C^k norms -----------------------------------------------------------------

/// Covariant derivative of a covariant tensor field of the given rank, with
/// components given as jets in flat index order (first index most significant).
/// The new index is prepended.
template <int K>
std::vector<Jet<K>> covariant_derivative(const std::vector<Jet<K>>& t, int rank, const Jet<K>& u) {
  const std::array<Jet<K>, 2> du{u.d_dx(), u.d_dy()};
  const int n = 1 << rank;
  std::vector<Jet<K>> out(static_cast<std::size_t>(2 * n));
  for (int k = 0; k < 2; ++k)
    for (int idx = 0; idx < n; ++idx) {
      const Jet<K>& c = t[static_cast<std::size_t>(idx)];
      Jet<K> v = k == 0 ? c.d_dx() : c.d_dy();
      for (int s = 0; s < rank; ++s) {
        const int shift = rank - 1 - s;
        const int i = (idx >> shift) & 1;
        for (int m = 0; m < 2; ++m) {
          // Christoffel symbols of e^{2u}(dx^2+dy^2).
          Jet<K> gamma(0.0);
          if (m == k) gamma += du[static_cast<std::size_t>(i)];
          if (m == i) gamma += du[static_cast<std::size_t>(k)];
          if (k == i) gamma -= du[static_cast<std::size_t>(m)];
          const int idx2 = (idx & ~(1 << shift)) | (m << shift);
          v -= gamma * t[static_cast<std::size_t>(idx2)];
        }
      }
      out[static_cast<std::size_t>(k * n + idx)] = v;
    }
  return out;
}

/// Pointwise metric norm of a rank-r covariant tensor.
template <int K>
double tensor_norm(const std::vector<Jet<K>>& t, int rank, double u) {
  double sum = 0.0;
  for (const auto& c : t) sum += c.value() * c.value();
  return std::exp(-rank * u) * std::sqrt(sum);
}

/// |nabla^j h|_g for j = 0..3 at p (Frobenius norms).
inline std::array<double, 4> covariant_norms_at(const Surface& s, const ScalarField& h, const ChartPoint& p) {
  const Jet<3> u = s.log_factor<3>(p);
  std::vector<Jet<3>> t{s.field_jet<3>(h, p)};
  std::array<double, 4> out{};
  for (int j = 0; j <= 3; ++j) {
    out[static_cast<std::size_t>(j)] = tensor_norm(t, j, u.value());
    if (j < 3) t = covariant_derivative(t, j, u);
  }
  return out;
}

/// Points over which sup norms are taken: torus n x n grid, sphere colatitude
/// midpoints times longitudes.
inline std::vector<ChartPoint> sup_grid(const Surface& s, int n) {
  std::vector<ChartPoint> pts;
  if (s.is_torus()) {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) pts.push_back({s.side_x() * i / n, s.side_y() * j / n, 0});
  } else if (s.is_sphere()) {
    for (int i = 0; i < n; ++i) {
      const double th = std::numbers::pi * (i + 0.5) / n;
      for (int j = 0; j < n; ++j) {
        const double lon = 2.0 * std::numbers::pi * j / n;
        pts.push_back(s.chart_from_unit_ambient(
            {std::sin(th) * std::cos(lon), std::sin(th) * std::sin(lon), std::cos(th)}));
      }
    }
  } else {
    throw UnsupportedOperation("sup norms need a compact surface");
  }
  return pts;
}

struct FieldNorms {
  std::array<double, 4> sup{};  ///< sup |nabla^j h|
  double minimum = 0.0;

  double ck(int k) const {
    double r = 0.0;
    for (int j = 0; j <= k; ++j) r += sup[static_cast<std::size_t>(j)];
    return r;
  }
};

inline FieldNorms field_norms(const Surface& s, const ScalarField& h, int resolution = 256) {
  FieldNorms n;
  n.minimum = std::numeric_limits<double>::infinity();
  for (const ChartPoint& p : sup_grid(s, resolution)) {
    const auto v = covariant_norms_at(s, h, p);
    for (std::size_t j = 0; j < 4; ++j) n.sup[j] = std::max(n.sup[j], v[j]);
    n.minimum = std::min(n.minimum, s.field_value(h, p));
  }
  return n;
}

/// ||h||_{C^k} = sum_{j<=k} sup |nabla^j h|.
inline double ck_norm(const Surface& s, const ScalarField& h, int k, int resolution = 256) {
  if (k < 0 || k > 3) throw PreconditionError("C^k norm order must be in 0..3");
  return field_norms(s, h, resolution).ck(k);
}

/// ||h||_{C^k} / min h.
inline double bracket(const Surface& s, const ScalarField& h, int k, int resolution = 256) {
  if (k < 0 || k > 3) throw PreconditionError("C^k norm order must be in 0..3");
  const FieldNorms n = field_norms(s, h, resolution);
  if (!(n.minimum > 0.0))
    throw PositivityError("bracket needs min h > 0 (found " + std::to_string(n.minimum) + ")");
  return n.ck(k) / n.minimum;
}

}  // namespace magsys
