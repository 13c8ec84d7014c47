#pragma once

// The magnetic vector field on the unit tangent bundle in chart coordinates
// (x, y, phi), phi the angle of the velocity against the chart frame, and its
// integration together with the linearised flow.
//
// With g = e^{2u}(dx^2+dy^2) and a unit-speed curve of geodesic curvature -f:
//
//   x'   = e^{-u} cos(phi)
//   y'   = e^{-u} sin(phi)
//   phi' = -f + e^{-u} (u_y cos(phi) - u_x sin(phi))
//
// so that for f > 0 curves turn clockwise in the oriented chart.  The fibre
// vector field is V = -2 pi d/dphi (fibres run clockwise, one turn per unit
// time); the global angle with dphi_V(V) = 1 is -phi / (2 pi).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "magsys/dop853.hpp"
#include "magsys/errors.hpp"
#include "magsys/field.hpp"
#include "magsys/surface.hpp"

namespace magsys {

struct UnitTangentState {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;
  int chart = 0;

  ChartPoint point() const { return {x, y, chart}; }

  /// Same state with phi in [0, 2 pi).
  UnitTangentState wrapped() const {
    UnitTangentState s = *this;
    s.phi = std::fmod(phi, 2.0 * std::numbers::pi);
    if (s.phi < 0.0) s.phi += 2.0 * std::numbers::pi;
    return s;
  }
};

using StateDerivative = std::array<double, 3>;

inline StateDerivative magnetic_derivative(const Surface& surface, const ScalarField& f,
                                           const UnitTangentState& s) {
  const ChartPoint p = s.point();
  const Jet<1> u = surface.log_factor<1>(p);
  const double fv = surface.field_value(f, p);
  const double e = std::exp(-u.value()), c = std::cos(s.phi), sn = std::sin(s.phi);
  return {e * c, e * sn, -fv + e * (u.dy() * c - u.dx() * sn)};
}

/// Jacobian of magnetic_derivative with respect to (x, y, phi).
inline Eigen::Matrix3d magnetic_jacobian(const Surface& surface, const ScalarField& f,
                                         const UnitTangentState& s) {
  const ChartPoint p = s.point();
  const Jet<2> u = surface.log_factor<2>(p);
  const Jet<1> fj = surface.field_jet<1>(f, p);
  const double e = std::exp(-u.value()), c = std::cos(s.phi), sn = std::sin(s.phi);
  const double ux = u.dx(), uy = u.dy(), uxx = u.dxx(), uxy = u.dxy(), uyy = u.dyy();
  const double g = uy * c - ux * sn;
  Eigen::Matrix3d a;
  a << -ux * e * c, -uy * e * c, -e * sn,  //
      -ux * e * sn, -uy * e * sn, e * c,   //
      -fj.dx() + e * (-ux * g + uxy * c - uxx * sn), -fj.dy() + e * (-uy * g + uyy * c - uxy * sn),
      e * (-uy * sn - ux * c);
  return a;
}

/// | (x', y') |_g - 1 for a state derivative.
inline double speed_defect(const Surface& surface, const UnitTangentState& s, const StateDerivative& d) {
  const double u = surface.log_factor_value(s.point());
  return std::abs(std::exp(u) * std::hypot(d[0], d[1]) - 1.0);
}

// Sphere charts ---------------------------------------------------------------

/// The same point of T^1 S^2 in the other stereographic chart (z -> 1/z).
inline UnitTangentState switch_chart(const UnitTangentState& s) {
  const double r2 = s.x * s.x + s.y * s.y;
  return {s.x / r2, -s.y / r2, s.phi + std::numbers::pi - 2.0 * std::atan2(s.y, s.x), 1 - s.chart};
}

/// Derivative of switch_chart at s.
inline Eigen::Matrix3d chart_switch_jacobian(const UnitTangentState& s) {
  const double x = s.x, y = s.y, r2 = x * x + y * y, r4 = r2 * r2;
  Eigen::Matrix3d j;
  j << (y * y - x * x) / r4, -2.0 * x * y / r4, 0.0,  //
      2.0 * x * y / r4, (y * y - x * x) / r4, 0.0,    //
      2.0 * y / r2, -2.0 * x / r2, 1.0;
  return j;
}

inline UnitTangentState to_chart(const Surface& surface, const UnitTangentState& s, int chart) {
  if (!surface.is_sphere() || s.chart == chart) return s;
  return switch_chart(s);
}

/// Chart with r <= 1 on the sphere; identity elsewhere.
inline UnitTangentState preferred_chart(const Surface& surface, const UnitTangentState& s) {
  if (surface.is_sphere() && s.x * s.x + s.y * s.y > 1.0) return switch_chart(s);
  return s;
}

/// Ambient position (radius scale) and unit velocity of a sphere state.
struct AmbientFrame {
  Vec3 position;
  Vec3 velocity;
};

inline AmbientFrame ambient_frame(const Surface& surface, const UnitTangentState& s) {
  const ChartPoint p = s.point();
  const double e = std::exp(-surface.log_factor_value(p)) * surface.radius();
  const Vec3 v = surface.unit_ambient_vector(p, e * std::cos(s.phi), e * std::sin(s.phi));
  return {surface.ambient(p), v};
}

/// State from a unit ambient position and a unit tangent vector.
inline UnitTangentState state_from_ambient(const Surface& surface, const Vec3& unit_position,
                                           const Vec3& unit_velocity) {
  const ChartPoint p = surface.chart_from_unit_ambient(unit_position);
  const auto w = surface.chart_vector_from_unit_ambient(p, unit_velocity);
  return {p.x, p.y, std::atan2(w[1], w[0]), p.chart};
}

// Integration -----------------------------------------------------------------

struct TrajectorySample {
  double t = 0.0;
  UnitTangentState state;
  double speed_defect = 0.0;
};

/// Dense solution over [0, T]: one seventh-order polynomial per step.
class DenseTrajectory {
 public:
  struct Segment {
    DenseSegment<3> poly;
    int chart = 0;
  };

  double duration() const { return duration_; }
  const UnitTangentState& start() const { return start_; }
  const UnitTangentState& end() const { return end_; }
  double max_speed_defect() const { return max_speed_defect_; }
  long steps() const { return static_cast<long>(segments_.size()); }
  const std::vector<Segment>& segments() const { return segments_; }

  UnitTangentState state_at(double t) const {
    if (segments_.empty()) return start_;
    if (t <= 0.0) return start_;
    if (t >= duration_) return end_;
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const Segment& s) { return v < s.poly.t0; });
    const Segment& seg = *(it == segments_.begin() ? it : std::prev(it));
    const auto y = seg.poly.eval(t);
    return {y[0], y[1], y[2], seg.chart};
  }

  std::vector<TrajectorySample> sample(const Surface& surface, const ScalarField& f, int count) const {
    std::vector<TrajectorySample> out;
    out.reserve(static_cast<std::size_t>(count) + 1);
    for (int i = 0; i <= count; ++i) {
      const double t = duration_ * i / count;
      const UnitTangentState s = state_at(t);
      out.push_back({t, s, speed_defect(surface, s, magnetic_derivative(surface, f, s))});
    }
    return out;
  }

 private:
  friend DenseTrajectory integrate_dense(const Surface&, const ScalarField&, const UnitTangentState&, double,
                                         const IntegratorOptions&);
  double duration_ = 0.0;
  UnitTangentState start_, end_;
  double max_speed_defect_ = 0.0;
  std::vector<Segment> segments_;
};

namespace detail {

inline void throw_integration_failure(IntegrationStatus st, double t, const std::array<double, 3>& y) {
  if (st == IntegrationStatus::StepUnderflow)
    throw IntegrationError("step size underflow at t = " + std::to_string(t), t, y);
  if (st == IntegrationStatus::TooManySteps)
    throw IntegrationError("step limit exceeded at t = " + std::to_string(t), t, y);
}

inline bool needs_chart_switch(const Surface& surface, double x, double y) {
  return surface.is_sphere() && x * x + y * y > 2.25;
}

}  // namespace detail

inline DenseTrajectory integrate_dense(const Surface& surface, const ScalarField& f, const UnitTangentState& s0,
                                       double T, const IntegratorOptions& opts = {}) {
  if (!(T >= 0.0)) throw PreconditionError("integration time must be non-negative");
  surface.check_domain(s0.point());
  DenseTrajectory traj;
  traj.duration_ = T;
  traj.start_ = s0;
  int chart = s0.chart;
  auto rhs = [&](double, const std::array<double, 3>& y, std::array<double, 3>& dy) {
    dy = magnetic_derivative(surface, f, {y[0], y[1], y[2], chart});
  };
  Dop853<3> solver(opts, true);
  std::array<double, 3> y0{s0.x, s0.y, s0.phi};
  double last_t = 0.0;
  std::array<double, 3> last_y = y0;
  auto res = solver.integrate(rhs, 0.0, y0, T, [&](const DenseSegment<3>& seg, std::array<double, 3>& y) {
    traj.segments_.push_back({seg, chart});
    UnitTangentState s{y[0], y[1], y[2], chart};
    traj.max_speed_defect_ =
        std::max(traj.max_speed_defect_, speed_defect(surface, s, magnetic_derivative(surface, f, s)));
    last_t = seg.t1();
    last_y = y;
    if (detail::needs_chart_switch(surface, y[0], y[1])) {
      s = switch_chart(s);
      chart = s.chart;
      y = {s.x, s.y, s.phi};
      return StepAction::StateModified;
    }
    return StepAction::Continue;
  });
  detail::throw_integration_failure(res.status, last_t, last_y);
  traj.end_ = {res.y[0], res.y[1], res.y[2], chart};
  return traj;
}

struct Trajectory {
  std::vector<TrajectorySample> samples;
  UnitTangentState final_state;
  double max_speed_defect = 0.0;
  long steps = 0;
};

/// Integrate for time T and return `sample_count + 1` uniformly spaced samples.
inline Trajectory integrate(const Surface& surface, const ScalarField& f, const UnitTangentState& s0, double T,
                            const IntegratorOptions& opts = {}, int sample_count = 256) {
  if (!(T > 0.0)) throw PreconditionError("integration time must be positive");
  const DenseTrajectory d = integrate_dense(surface, f, s0, T, opts);
  Trajectory out;
  out.samples = d.sample(surface, f, sample_count);
  out.final_state = d.end();
  out.steps = d.steps();
  out.max_speed_defect = d.max_speed_defect();
  for (const auto& s : out.samples) out.max_speed_defect = std::max(out.max_speed_defect, s.speed_defect);
  return out;
}

/// State and differential of the time-T map.  On the sphere the differential
/// maps the tangent space in the chart of `state0` to the chart of `state`.
struct FlowJet {
  UnitTangentState state0;
  UnitTangentState state;
  Eigen::Matrix3d differential = Eigen::Matrix3d::Identity();
  StateDerivative velocity{};  ///< X_f at the final state
};

inline FlowJet integrate_with_variation(const Surface& surface, const ScalarField& f,
                                        const UnitTangentState& s0, double T, const IntegratorOptions& opts = {}) {
  if (!(T >= 0.0)) throw PreconditionError("integration time must be non-negative");
  surface.check_domain(s0.point());
  FlowJet jet;
  jet.state0 = s0;
  jet.state = s0;
  jet.velocity = magnetic_derivative(surface, f, s0);
  if (T == 0.0) return jet;
  int chart = s0.chart;
  using State12 = std::array<double, 12>;
  auto rhs = [&](double, const State12& y, State12& dy) {
    const UnitTangentState s{y[0], y[1], y[2], chart};
    const StateDerivative d = magnetic_derivative(surface, f, s);
    const Eigen::Matrix3d a = magnetic_jacobian(surface, f, s);
    dy[0] = d[0];
    dy[1] = d[1];
    dy[2] = d[2];
    Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> m(y.data() + 3);
    Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> dm(dy.data() + 3);
    dm = a * m;
  };
  State12 y0{s0.x, s0.y, s0.phi, 1, 0, 0, 0, 1, 0, 0, 0, 1};
  Dop853<12> solver(opts, false);
  double last_t = 0.0;
  std::array<double, 3> last_y{s0.x, s0.y, s0.phi};
  auto res = solver.integrate(rhs, 0.0, y0, T, [&](const DenseSegment<12>& seg, State12& y) {
    last_t = seg.t1();
    last_y = {y[0], y[1], y[2]};
    if (detail::needs_chart_switch(surface, y[0], y[1])) {
      const UnitTangentState s{y[0], y[1], y[2], chart};
      const Eigen::Matrix3d j = chart_switch_jacobian(s);
      Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> m(y.data() + 3);
      const Eigen::Matrix3d mm = j * m;
      m = mm;
      const UnitTangentState t = switch_chart(s);
      chart = t.chart;
      y[0] = t.x;
      y[1] = t.y;
      y[2] = t.phi;
      return StepAction::StateModified;
    }
    return StepAction::Continue;
  });
  detail::throw_integration_failure(res.status, last_t, last_y);
  jet.state = {res.y[0], res.y[1], res.y[2], chart};
  Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> m(res.y.data() + 3);
  jet.differential = m;
  jet.velocity = magnetic_derivative(surface, f, jet.state);
  return jet;
}

/// Distance in T^1M used for closure and deduplication: chart/lift distance
/// with wrapped angle on tori and the hyperbolic chart, ambient position plus
/// ambient unit velocity (scaled by the radius) on the sphere.
inline double phase_distance(const Surface& surface, const UnitTangentState& a, const UnitTangentState& b) {
  if (surface.is_sphere()) {
    const AmbientFrame fa = ambient_frame(surface, a), fb = ambient_frame(surface, b);
    const Vec3 dp = fa.position - fb.position;
    const Vec3 dv = surface.radius() * (fa.velocity - fb.velocity);
    return std::sqrt(dot(dp, dp) + dot(dv, dv));
  }
  double dx = a.x - b.x, dy = a.y - b.y;
  if (surface.is_torus()) {
    dx -= surface.side_x() * std::round(dx / surface.side_x());
    dy -= surface.side_y() * std::round(dy / surface.side_y());
  }
  const double dphi = wrap_angle(a.phi - b.phi);
  return std::sqrt(dx * dx + dy * dy + dphi * dphi);
}

}  // namespace magsys
