#pragma once

// Riemannian length, capping-disc flux and magnetic length of closed orbits.
//
// The capping integral is the f-weighted signed area enclosed by the curve:
// by Green's theorem it equals the line integral of G dy with
// G(x, y) = int_{x_ref}^{x} f e^{2u}(s, y) ds, taken in the torus lift, in the
// planar chart, or in a pole chart of the sphere.  On the sphere the pole
// chart sees the complement of the admissible cap when the image curve turns
// counter-clockwise, so cap = flux - (tau + 1)/2 * int_S2 f mu.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/flow.hpp"
#include "magsys/orbit.hpp"
#include "magsys/quadrature.hpp"

namespace magsys {

struct RiemannianLength {
  double period = 0.0;
  double alpha_can = 0.0;  ///< line integral of the canonical one-form
};

/// Length of a unit-speed orbit, as its period and as the integral of
/// alpha_can = e^u (cos phi dx + sin phi dy) over the closed sampled curve.
inline RiemannianLength riemannian_length(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit) {
  RiemannianLength out;
  out.period = orbit.period;
  const std::size_t n = orbit.samples.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const UnitTangentState& s = orbit.samples[i];
    const StateDerivative d = magnetic_derivative(surface, f, s);
    const double eu = std::exp(surface.log_factor_value(s.point()));
    sum += eu * (std::cos(s.phi) * d[0] + std::sin(s.phi) * d[1]);
  }
  out.alpha_can = sum * orbit.period / static_cast<double>(n);
  return out;
}

struct CappingResult {
  double value = 0.0;         ///< int of f over the admissible cap (signed)
  double error_estimate = 0.0;
  double flux = 0.0;          ///< raw flux in the chart used
  int chart_turning = 0;      ///< turning number in that chart
  std::optional<Vec3> pole;   ///< sphere: pole of the chart
  std::string chart;
};

struct CappingOptions {
  double max_panel = 0.1;
  int gauss_points = 8;
  int sphere_quadrature = 256;  ///< resolution for int_S2 f mu
};

namespace detail {

/// Planar curve data for the Green flux: positions and d/dt (chart y).
struct GreenCurve {
  std::vector<double> x, y, ydot;
  double period = 0.0;
};

template <class Density>
double green_flux(const GreenCurve& c, const Density& density, int stride, const CappingOptions& opts,
                  const QuadratureRule& rule) {
  double xref = 0.0;
  for (double v : c.x) xref += v;
  xref /= static_cast<double>(c.x.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.x.size(); i += static_cast<std::size_t>(stride), ++count) {
    const double y = c.y[i];
    const double g = composite_gauss([&](double s) { return density(s, y); }, xref, c.x[i], opts.max_panel, rule);
    sum += g * c.ydot[i];
  }
  return sum * c.period / static_cast<double>(count);
}

inline void require_admissible(const ClosedOrbit& orbit) {
  if (!orbit.in_h_infty)
    throw AdmissibilityError("orbit is not in the fibre class (turning number " +
                             std::to_string(orbit.turning_number) +
                             "); capping discs for the reversed class need the time-reversed pipeline");
}

}  // namespace detail

/// Capping integral by Green's theorem on the uniformly timed orbit samples
/// (periodic trapezoid rule); the error estimate compares with every other sample.  On the sphere `pole`
/// selects the chart (default: farthest of 64 spread points from the curve).
inline CappingResult capping_integral(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit,
                                      std::optional<Vec3> pole = std::nullopt, const CappingOptions& opts = {}) {
  detail::require_admissible(orbit);
  CappingResult out;
  const QuadratureRule rule = gauss_legendre(opts.gauss_points);
  detail::GreenCurve c;
  c.period = orbit.period;
  const int n = static_cast<int>(orbit.samples.size()) - 1;
  if (!surface.is_sphere()) {
    for (int i = 0; i < n; ++i) {
      const UnitTangentState& s = orbit.samples[static_cast<std::size_t>(i)];
      const StateDerivative d = magnetic_derivative(surface, f, s);
      c.x.push_back(s.x);
      c.y.push_back(s.y);
      c.ydot.push_back(d[1]);
    }
    auto density = [&](double x, double y) {
      const ChartPoint p{x, y, 0};
      return surface.field_value(f, p) * std::exp(2.0 * surface.log_factor_value(p));
    };
    out.flux = detail::green_flux(c, density, 1, opts, rule);
    out.error_estimate = std::abs(out.flux - detail::green_flux(c, density, 2, opts, rule));
    out.value = out.flux;
    out.chart_turning = orbit.turning_number;
    out.chart = surface.is_torus() ? "lift" : "chart";
    return out;
  }
  const std::vector<UnitTangentState>& states = orbit.samples;
  std::vector<Vec3> unit;
  for (const auto& s : states) unit.push_back(surface.unit_ambient(s.point()));
  const Vec3 q = pole ? normalized(*pole) : farthest_pole(unit);
  double dmin = std::numeric_limits<double>::infinity();
  for (const Vec3& p : unit) dmin = std::min(dmin, norm(p - q));
  if (dmin < 1e-2) throw ResolutionError("pole too close to the curve support");
  const PoleChart chart = PoleChart::from_pole(q);
  const double R = surface.radius();
  std::vector<std::array<double, 2>> vel;
  for (int i = 0; i < n; ++i) {
    const AmbientFrame fr = ambient_frame(surface, states[static_cast<std::size_t>(i)]);
    const auto p = chart.point(unit[static_cast<std::size_t>(i)]);
    const auto v = chart.vector(unit[static_cast<std::size_t>(i)], (1.0 / R) * fr.velocity);
    c.x.push_back(p[0]);
    c.y.push_back(p[1]);
    c.ydot.push_back(v[1]);
    vel.push_back(v);
  }
  vel.push_back(vel.front());
  auto density = [&](double x, double y) {
    const double w = 2.0 * R / (1.0 + x * x + y * y);
    return surface.field_at_ambient(f, chart.inverse(x, y)) * w * w;
  };
  out.flux = detail::green_flux(c, density, 1, opts, rule);
  const double half = detail::green_flux(c, density, 2, opts, rule);
  out.chart_turning = static_cast<int>(std::lround(velocity_winding(vel)));
  const int m = (out.chart_turning + 1) / 2;
  const double total = m != 0 ? integrate_density(surface, f, opts.sphere_quadrature) : 0.0;
  out.value = out.flux - m * total;
  out.error_estimate = std::abs(out.flux - half);
  out.pole = q;
  out.chart = "pole";
  return out;
}

/// Winding-number flux on a grid (coarse cross-check of capping_integral).
struct CappingData {
  std::string chart;
  std::optional<Vec3> pole;
  int resolution = 0;
  double cell = 0.0;
  std::array<double, 2> origin{0.0, 0.0};
  std::vector<int> winding;  ///< row-major, resolution^2; excluded points hold 0
  double flux_integral = 0.0;
};

namespace detail {

inline double winding_angle(const std::vector<std::array<double, 2>>& pts, double px, double py) {
  double sum = 0.0;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % n];
    const double ax = a[0] - px, ay = a[1] - py, bx = b[0] - px, by = b[1] - py;
    sum += std::atan2(ax * by - ay * bx, ax * bx + ay * by);
  }
  return sum / (2.0 * std::numbers::pi);
}

}  // namespace detail

/// Grid winding numbers w(p) by angle summation and the flux sum of w f mu.
/// Points within two cells of the curve are excluded and receive the average
/// weight of their non-excluded neighbours.
inline CappingData winding_capping(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit,
                                   int resolution, std::optional<Vec3> pole = std::nullopt) {
  detail::require_admissible(orbit);
  CappingData out;
  out.resolution = resolution;
  std::vector<std::array<double, 2>> pts;
  const std::size_t n = orbit.samples.size() - 1;
  std::optional<PoleChart> chart;
  if (surface.is_sphere()) {
    std::vector<Vec3> unit;
    for (const auto& s : orbit.samples) unit.push_back(surface.unit_ambient(s.point()));
    out.pole = pole ? normalized(*pole) : farthest_pole(unit);
    chart = PoleChart::from_pole(*out.pole);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(chart->point(unit[i]));
    out.chart = "pole";
  } else {
    for (std::size_t i = 0; i < n; ++i) pts.push_back({orbit.samples[i].x, orbit.samples[i].y});
    out.chart = surface.is_torus() ? "lift" : "chart";
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : pts) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  const double side = std::max(x1 - x0, y1 - y0) * 1.1;
  const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
  out.cell = side / resolution;
  out.origin = {cx - 0.5 * side, cy - 0.5 * side};
  const double h = out.cell;
  const int N = resolution;
  std::vector<double> w(static_cast<std::size_t>(N) * N, 0.0);
  std::vector<char> excluded(w.size(), 0);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const double px = out.origin[0] + (i + 0.5) * h, py = out.origin[1] + (j + 0.5) * h;
      double dmin = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k)
        dmin = std::min(dmin, detail::point_segment_distance({px, py}, pts[k], pts[(k + 1) % n]));
      const auto idx = static_cast<std::size_t>(j) * N + i;
      if (dmin < 2.0 * h) {
        excluded[idx] = 1;
        continue;
      }
      w[idx] = std::round(detail::winding_angle(pts, px, py));
    }
  out.winding.assign(w.size(), 0);
  for (std::size_t k = 0; k < w.size(); ++k) out.winding[k] = static_cast<int>(w[k]);
  std::vector<double> weight = w;
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const auto idx = static_cast<std::size_t>(j) * N + i;
      if (!excluded[idx]) continue;
      double s = 0.0;
      int cnt = 0;
      for (int dj = -3; dj <= 3; ++dj)
        for (int di = -3; di <= 3; ++di) {
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= N || jj >= N) continue;
          const auto k = static_cast<std::size_t>(jj) * N + ii;
          if (excluded[k]) continue;
          s += w[k];
          ++cnt;
        }
      weight[idx] = cnt ? s / cnt : 0.0;
    }
  double flux = 0.0;
  const double R = surface.radius();
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      const auto idx = static_cast<std::size_t>(j) * N + i;
      if (weight[idx] == 0.0) continue;
      const double px = out.origin[0] + (i + 0.5) * h, py = out.origin[1] + (j + 0.5) * h;
      double dens;
      if (chart) {
        const double cf = 2.0 * R / (1.0 + px * px + py * py);
        dens = surface.field_at_ambient(f, chart->inverse(px, py)) * cf * cf;
      } else {
        const ChartPoint p{px, py, 0};
        dens = surface.field_value(f, p) * std::exp(2.0 * surface.log_factor_value(p));
      }
      flux += weight[idx] * dens * h * h;
    }
  if (chart) {
    std::vector<std::array<double, 2>> vel;
    for (const auto& s : orbit.samples) {
      const AmbientFrame fr = ambient_frame(surface, s);
      vel.push_back(chart->vector((1.0 / R) * fr.position, fr.velocity));
    }
    const int tau = static_cast<int>(std::lround(velocity_winding(vel)));
    const int m = (tau + 1) / 2;
    if (m != 0) flux -= m * integrate_density(surface, f, 256);
  }
  out.flux_integral = flux;
  return out;
}

/// Richardson extrapolation of the grid flux over resolutions n and 2n.
inline double winding_capping_extrapolated(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit,
                                           int resolution, std::optional<Vec3> pole = std::nullopt) {
  const double a = winding_capping(surface, f, orbit, resolution, pole).flux_integral;
  const double b = winding_capping(surface, f, orbit, 2 * resolution, pole).flux_integral;
  return (4.0 * b - a) / 3.0;
}

struct MagneticLength {
  double length = 0.0;
  double length_alpha_can = 0.0;
  CappingResult capping;
  double magnetic_length = 0.0;
};

/// l_f(c) = l(c) + int_cap f mu.
inline MagneticLength magnetic_length(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit,
                                      std::optional<Vec3> pole = std::nullopt, const CappingOptions& opts = {}) {
  MagneticLength out;
  const RiemannianLength l = riemannian_length(surface, f, orbit);
  out.length = l.period;
  out.length_alpha_can = l.alpha_can;
  out.capping = capping_integral(surface, f, orbit, pole, opts);
  out.magnetic_length = out.length + out.capping.value;
  return out;
}

/// Poles spread over the sphere, ordered by decreasing distance from the
/// curve, for disc-independence checks.
inline std::vector<Vec3> spread_poles(const Surface& surface, const ClosedOrbit& orbit, int count,
                                      int candidates = 64) {
  std::vector<Vec3> unit;
  for (const auto& s : orbit.samples) unit.push_back(surface.unit_ambient(s.point()));
  std::vector<std::pair<double, Vec3>> scored;
  for (const Vec3& c : fibonacci_sphere(candidates)) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const Vec3& p : unit) dmin = std::min(dmin, norm(p - c));
    scored.push_back({dmin, c});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Vec3> out;
  for (int i = 0; i < count && i < static_cast<int>(scored.size()); ++i)
    out.push_back(scored[static_cast<std::size_t>(i)].second);
  return out;
}

}  // namespace magsys
