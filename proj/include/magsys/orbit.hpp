#pragma once

// Closed magnetic geodesics: shooting with Newton on (state, period), prime
// period extraction, turning numbers and class membership, and seed surveys.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/flow.hpp"

namespace magsys {

struct OrbitOptions {
  IntegratorOptions integrator{1e-12, 1e-13, 5'000'000, std::numeric_limits<double>::infinity()};
  double newton_tol = 1e-10;
  double closure_tol = 1e-8;
  int max_iterations = 40;
  int samples = 512;
  double degenerate_ratio = 1e-6;
  int max_subperiod = 8;
};

struct ClosedOrbit {
  UnitTangentState start;
  double period = 0.0;
  std::vector<UnitTangentState> samples;  ///< samples + 1 states at t_i = i T / samples
  bool prime = false;
  int turning_number = 0;
  std::array<int, 2> lattice_shift{0, 0};
  bool contractible = true;
  bool in_h_infty = false;
  double closure_residual = 0.0;
  bool degenerate = false;
  int iterations = 0;
  std::vector<double> residual_history;
  int multiplicity = 1;
  int seed_index = -1;

  double time(std::size_t i) const { return period * static_cast<double>(i) / static_cast<double>(samples.size() - 1); }
};

// Stereographic chart from an arbitrary pole -----------------------------------

/// psi(P) = (P.e1, P.e2) / (1 - P.q) on the unit sphere, (e1, e2, q) a positive
/// frame; it has the orientation of the sphere charts.
struct PoleChart {
  Vec3 e1, e2, q;

  static PoleChart from_pole(const Vec3& pole) {
    PoleChart c;
    c.q = normalized(pole);
    const Vec3 a = std::abs(c.q[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    c.e1 = normalized(a - dot(a, c.q) * c.q);
    c.e2 = cross(c.q, c.e1);
    return c;
  }

  std::array<double, 2> point(const Vec3& p) const {
    const double d = 1.0 - dot(p, q);
    return {dot(p, e1) / d, dot(p, e2) / d};
  }
  std::array<double, 2> vector(const Vec3& p, const Vec3& v) const {
    const double d = 1.0 - dot(p, q), vq = dot(v, q);
    return {dot(v, e1) / d + dot(p, e1) * vq / (d * d), dot(v, e2) / d + dot(p, e2) * vq / (d * d)};
  }
  Vec3 inverse(double x, double y) const {
    const double r2 = x * x + y * y, inv = 1.0 / (1.0 + r2);
    return (2.0 * x * inv) * e1 + (2.0 * y * inv) * e2 + ((r2 - 1.0) * inv) * q;
  }
};

/// Points on the unit sphere spread by the golden-angle spiral.
inline std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> pts;
  const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n, r = std::sqrt(1.0 - z * z);
    pts.push_back({r * std::cos(ga * i), r * std::sin(ga * i), z});
  }
  return pts;
}

/// Candidate pole farthest from the unit-sphere points of the curve.
inline Vec3 farthest_pole(const std::vector<Vec3>& curve, int candidates = 64) {
  Vec3 best{0, 0, 1};
  double best_d = -1.0;
  for (const Vec3& c : fibonacci_sphere(candidates)) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const Vec3& p : curve) dmin = std::min(dmin, norm(p - c));
    if (dmin > best_d) {
      best_d = dmin;
      best = c;
    }
  }
  return best;
}

// Residuals ----------------------------------------------------------------------

struct ReturnResidual {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  UnitTangentState end;  ///< end state in the chart of the start
  std::array<int, 2> lattice_shift{0, 0};
};

namespace detail {

inline ReturnResidual residual_between(const Surface& surface, const UnitTangentState& end_raw,
                                       const UnitTangentState& s) {
  ReturnResidual out;
  out.end = to_chart(surface, end_raw, s.chart);
  double dx = out.end.x - s.x, dy = out.end.y - s.y;
  if (surface.is_torus()) {
    const double kx = std::round(dx / surface.side_x()), ky = std::round(dy / surface.side_y());
    out.lattice_shift = {static_cast<int>(kx), static_cast<int>(ky)};
    dx -= kx * surface.side_x();
    dy -= ky * surface.side_y();
  }
  out.r << dx, dy, wrap_angle(out.end.phi - s.phi);
  return out;
}

}  // namespace detail

/// Phi_T(s) - s in the chart of s, angle wrapped to (-pi, pi], lattice-reduced on tori.
inline ReturnResidual return_residual(const Surface& surface, const ScalarField& f, const UnitTangentState& s,
                                      double T, const IntegratorOptions& opts = OrbitOptions{}.integrator) {
  if (!(T > 0.0)) throw PreconditionError("return time must be positive");
  return detail::residual_between(surface, integrate_dense(surface, f, s, T, opts).end(), s);
}

/// Lattice-reduced phase distance (tori) / plain phase distance elsewhere.
inline double closure_gap(const Surface& surface, const UnitTangentState& a, const UnitTangentState& b) {
  return phase_distance(surface, a, b);
}

// Period guesses ------------------------------------------------------------------

/// Period scale for a field: 2 pi / f_avg when positive, else 2 pi / sqrt(K_f), else 2 pi.
inline double period_scale(double f_avg, double k_f) {
  if (f_avg > 0.0) return 2.0 * std::numbers::pi / f_avg;
  if (k_f > 0.0) return 2.0 * std::numbers::pi / std::sqrt(k_f);
  return 2.0 * std::numbers::pi;
}

/// Time of the first good closest return of the orbit through s within [t_lo, t_hi]:
/// the earliest local minimum of the phase distance within 1.5x of the global one.
inline std::optional<double> closest_return(const Surface& surface, const ScalarField& f, const UnitTangentState& s,
                                            double t_lo, double t_hi, const IntegratorOptions& opts) {
  const DenseTrajectory traj = integrate_dense(surface, f, s, t_hi, opts);
  const int n = std::max(400, static_cast<int>(16 * traj.steps()));
  std::vector<double> t(static_cast<std::size_t>(n) + 1), d(t.size());
  for (int i = 0; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    t[k] = t_lo + (t_hi - t_lo) * i / n;
    d[k] = closure_gap(surface, traj.state_at(t[k]), s);
  }
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < t.size(); ++i)
    if (d[i] <= d[i - 1] && d[i] <= d[i + 1]) minima.push_back(i);
  if (minima.empty()) return std::nullopt;
  double gmin = std::numeric_limits<double>::infinity();
  for (auto i : minima) gmin = std::min(gmin, d[i]);
  std::size_t pick = minima.back();
  for (auto i : minima)
    if (d[i] <= 1.5 * gmin + 1e-12) {
      pick = i;
      break;
    }
  // Golden-section refinement on the dense output.
  double a = t[pick - 1], b = t[pick + 1];
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  auto dist = [&](double tt) { return closure_gap(surface, traj.state_at(tt), s); };
  double c = b - g * (b - a), e = a + g * (b - a), fc = dist(c), fe = dist(e);
  for (int it = 0; it < 60 && b - a > 1e-13 * std::max(1.0, b); ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = dist(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = dist(e);
    }
  }
  return 0.5 * (a + b);
}

// Newton shooting -----------------------------------------------------------------

struct NewtonOutcome {
  bool converged = false;
  UnitTangentState state;
  double period = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  int iterations = 0;
  std::vector<double> history;
  std::string diagnostic;
};

/// Least-squares Newton on (x, y, phi, T) for Phi_T(s) = s.  The 3x4 Jacobian
/// [dPhi_T - I | X_f] is inverted through a truncated SVD (minimum-norm step).
inline NewtonOutcome newton_closed_orbit(const Surface& surface, const ScalarField& f, const UnitTangentState& seed,
                                         double T_guess, const OrbitOptions& opts = {}) {
  NewtonOutcome out;
  UnitTangentState s = preferred_chart(surface, seed);
  double T = T_guess;
  if (!(T > 0.0)) throw PreconditionError("period guess must be positive");
  const double max_move = surface.is_torus() ? 0.25 * std::min(surface.side_x(), surface.side_y()) : 0.5;
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    s = preferred_chart(surface, s);
    const FlowJet jet = integrate_with_variation(surface, f, s, T, opts.integrator);
    Eigen::Matrix3d jc = Eigen::Matrix3d::Identity();
    if (surface.is_sphere() && jet.state.chart != s.chart) jc = chart_switch_jacobian(jet.state);
    const ReturnResidual rr = detail::residual_between(surface, jet.state, s);
    const double rn = rr.r.norm();
    out.history.push_back(rn);
    out.state = s;
    out.period = T;
    out.residual = rn;
    if (rn <= opts.newton_tol) {
      out.converged = true;
      break;
    }
    Eigen::Matrix<double, 3, 4> J;
    J.leftCols<3>() = jc * jet.differential - Eigen::Matrix3d::Identity();
    J.col(3) = jc * Eigen::Vector3d(jet.velocity[0], jet.velocity[1], jet.velocity[2]);
    Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0), smin = sv(2);
    if (!(smax > 0.0)) {
      out.diagnostic = "zero Jacobian";
      break;
    }
    if (smin < opts.degenerate_ratio * smax) out.degenerate = true;
    Eigen::Vector4d step = Eigen::Vector4d::Zero();
    const Eigen::Vector3d ur = svd.matrixU().transpose() * rr.r;
    for (int k = 0; k < 3; ++k)
      if (sv(k) > opts.degenerate_ratio * smax) step -= (ur(k) / sv(k)) * svd.matrixV().col(k);
    const double move = step.head<2>().norm();
    if (move > max_move) step *= max_move / move;
    if (T + step(3) < 0.5 * T) step *= 0.5 * T / std::abs(step(3));

    bool accepted = false;
    double lambda = 1.0;
    for (int ls = 0; ls < 12; ++ls, lambda *= 0.5) {
      UnitTangentState trial{s.x + lambda * step(0), s.y + lambda * step(1), s.phi + lambda * step(2), s.chart};
      const double Tt = T + lambda * step(3);
      try {
        const double rt = return_residual(surface, f, trial, Tt, opts.integrator).r.norm();
        if (rt < (1.0 - 1e-4 * lambda) * rn) {
          s = trial;
          T = Tt;
          accepted = true;
          break;
        }
      } catch (const DomainError&) {
      }
    }
    if (!accepted) {
      out.diagnostic = "line search stalled at residual " + std::to_string(rn);
      break;
    }
  }
  if (!out.converged && out.residual <= opts.closure_tol) out.converged = true;
  if (!out.converged && out.diagnostic.empty())
    out.diagnostic = "no convergence after " + std::to_string(out.iterations) + " iterations";
  return out;
}

// Turning numbers and class membership -------------------------------------------

namespace detail {

inline int round_turning(double turns) {
  const double r = std::round(turns);
  if (std::abs(turns - r) > 0.01)
    throw ResolutionError("turning number " + std::to_string(turns) + " is not within 0.01 of an integer");
  return static_cast<int>(r);
}

inline std::vector<Vec3> unit_positions(const Surface& surface, const std::vector<UnitTangentState>& samples) {
  std::vector<Vec3> pts;
  pts.reserve(samples.size());
  for (const auto& s : samples) pts.push_back(surface.unit_ambient(s.point()));
  return pts;
}

}  // namespace detail

/// Planar image of a sphere curve under the pole chart, with chart velocities.
struct PlanarCurve {
  std::vector<std::array<double, 2>> points;
  std::vector<std::array<double, 2>> velocities;
};

inline PlanarCurve pole_chart_image(const Surface& surface, const std::vector<UnitTangentState>& samples,
                                    const PoleChart& chart) {
  PlanarCurve c;
  for (const auto& s : samples) {
    const AmbientFrame fr = ambient_frame(surface, s);
    const Vec3 p = (1.0 / surface.radius()) * fr.position;
    c.points.push_back(chart.point(p));
    c.velocities.push_back(chart.vector(p, fr.velocity));
  }
  return c;
}

/// Winding of the velocity of a closed sample sequence, in turns.
inline double velocity_winding(const std::vector<std::array<double, 2>>& velocities) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < velocities.size(); ++i) {
    const double a0 = std::atan2(velocities[i][1], velocities[i][0]);
    const double a1 = std::atan2(velocities[i + 1][1], velocities[i + 1][0]);
    sum += wrap_angle(a1 - a0);
  }
  return sum / (2.0 * std::numbers::pi);
}

/// Turning number of the sampled closed curve.  Planar charts and tori use the
/// chart (lift) velocity; the sphere uses the pole chart from `pole`, or from
/// the farthest of 64 spread points when no pole is given.
inline int turning_number(const Surface& surface, const std::vector<UnitTangentState>& samples,
                          std::optional<Vec3> pole = std::nullopt) {
  if (samples.size() < 3) throw PreconditionError("turning number needs a sampled closed curve");
  if (!surface.is_sphere()) {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) sum += wrap_angle(samples[i + 1].phi - samples[i].phi);
    return detail::round_turning(sum / (2.0 * std::numbers::pi));
  }
  const auto pts = detail::unit_positions(surface, samples);
  const Vec3 q = pole ? normalized(*pole) : farthest_pole(pts);
  double dmin = std::numeric_limits<double>::infinity();
  for (const Vec3& p : pts) dmin = std::min(dmin, norm(p - q));
  if (dmin < 1e-3) throw ResolutionError("pole lies on the curve support");
  const PlanarCurve img = pole_chart_image(surface, samples, PoleChart::from_pole(q));
  return detail::round_turning(velocity_winding(img.velocities));
}

inline int turning_number(const Surface& surface, const ClosedOrbit& orbit) {
  return turning_number(surface, orbit.samples);
}

/// Membership in the class of the oriented fibre: sphere orbits need odd turning
/// number, tori a contractible lift turning -1, the hyperbolic chart turning -1.
inline bool in_lambda_h_infty(const Surface& surface, const ClosedOrbit& orbit) {
  if (surface.is_sphere()) return orbit.turning_number % 2 != 0;
  if (surface.is_torus()) return orbit.contractible && orbit.turning_number == -1;
  return orbit.turning_number == -1;
}

// Embeddedness -------------------------------------------------------------------

struct EmbeddingCheck {
  bool embedded = false;
  bool inconclusive = false;
  double min_separation = 0.0;  ///< smallest distance between non-adjacent segments
};

namespace detail {

inline double orient2(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c) {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

inline double point_segment_distance(const std::array<double, 2>& p, const std::array<double, 2>& a,
                                     const std::array<double, 2>& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1], l2 = vx * vx + vy * vy;
  double t = l2 > 0.0 ? ((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p[0] - a[0] - t * vx, p[1] - a[1] - t * vy);
}

}  // namespace detail

/// Self-intersection scan of a closed polygon (last point joins the first).
/// Near-touching non-adjacent segments (closer than `touch_tol`) are reported
/// as inconclusive.
inline EmbeddingCheck polygon_embedding(const std::vector<std::array<double, 2>>& pts, double touch_tol) {
  EmbeddingCheck out;
  const std::size_t n = pts.size();
  out.min_separation = std::numeric_limits<double>::infinity();
  if (n < 3) return out;
  // Bounding boxes speed up the quadratic scan.
  std::vector<std::array<double, 4>> box(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % n];
    box[i] = {std::min(a[0], b[0]), std::max(a[0], b[0]), std::min(a[1], b[1]), std::max(a[1], b[1])};
  }
  bool crossing = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      if (box[i][0] > box[j][1] + touch_tol || box[j][0] > box[i][1] + touch_tol ||
          box[i][2] > box[j][3] + touch_tol || box[j][2] > box[i][3] + touch_tol)
        continue;
      const auto &a = pts[i], &b = pts[(i + 1) % n], &c = pts[j], &d = pts[(j + 1) % n];
      const double o1 = detail::orient2(a, b, c), o2 = detail::orient2(a, b, d);
      const double o3 = detail::orient2(c, d, a), o4 = detail::orient2(c, d, b);
      if (((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0)
        crossing = true;
      const double sep = std::min({detail::point_segment_distance(a, c, d), detail::point_segment_distance(b, c, d),
                                   detail::point_segment_distance(c, a, b), detail::point_segment_distance(d, a, b)});
      out.min_separation = std::min(out.min_separation, sep);
    }
  out.embedded = !crossing;
  out.inconclusive = !crossing && out.min_separation < touch_tol;
  return out;
}

/// Certificate that the orbit bounds a disc on its right (clockwise): embedded
/// (sphere pole chart / torus lift) and, on tori and the hyperbolic chart,
/// contractible with turning number -1.  A false result is not a proof of failure.
inline EmbeddingCheck is_negatively_alexandrov_embedded(const Surface& surface, const ClosedOrbit& orbit) {
  std::vector<std::array<double, 2>> pts;
  std::size_t n = orbit.samples.size() - 1;
  if (surface.is_sphere()) {
    const auto unit = detail::unit_positions(surface, orbit.samples);
    const PoleChart chart = PoleChart::from_pole(farthest_pole(unit));
    for (std::size_t i = 0; i < n; ++i) pts.push_back(chart.point(unit[i]));
  } else {
    if (!orbit.contractible) return {};
    for (std::size_t i = 0; i < n; ++i) pts.push_back({orbit.samples[i].x, orbit.samples[i].y});
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    scale = std::max(scale, std::hypot(pts[(i + 1) % n][0] - pts[i][0], pts[(i + 1) % n][1] - pts[i][1]));
  EmbeddingCheck c = polygon_embedding(pts, 1e-3 * scale);
  if (!surface.is_sphere() && orbit.turning_number != -1) c.embedded = false;
  if (!c.embedded) c.inconclusive = false;
  return c;
}

// Orbit construction ---------------------------------------------------------------

/// Dense samples, turning number and flags of the closed orbit through s with period T.
inline ClosedOrbit make_closed_orbit(const Surface& surface, const ScalarField& f, const UnitTangentState& s, double T,
                                     const OrbitOptions& opts = {}) {
  ClosedOrbit o;
  o.start = s;
  o.period = T;
  const DenseTrajectory traj = integrate_dense(surface, f, s, T, opts.integrator);
  o.samples.reserve(static_cast<std::size_t>(opts.samples) + 1);
  for (int i = 0; i <= opts.samples; ++i) o.samples.push_back(traj.state_at(T * i / opts.samples));
  const ReturnResidual rr = detail::residual_between(surface, traj.end(), s);
  o.lattice_shift = rr.lattice_shift;
  o.contractible = !surface.is_torus() || (rr.lattice_shift[0] == 0 && rr.lattice_shift[1] == 0);
  o.closure_residual = closure_gap(surface, traj.end(), s);
  o.turning_number = turning_number(surface, o.samples);
  o.in_h_infty = in_lambda_h_infty(surface, o);
  o.prime = true;
  for (int m = 2; m <= opts.max_subperiod; ++m) {
    const double gap = closure_gap(surface, traj.state_at(T / m), s);
    if (gap <= 10.0 * std::max(o.closure_residual, 1e-14)) o.prime = false;
  }
  return o;
}

struct OrbitSearch {
  std::optional<ClosedOrbit> orbit;
  NewtonOutcome newton;
  std::string diagnostic;
};

/// Newton from (seed, T_guess), then reduction to the prime period by a
/// sub-period scan (T/m for m = max_subperiod..2, each confirmed by Newton).
inline OrbitSearch find_closed_orbit(const Surface& surface, const ScalarField& f, const UnitTangentState& seed,
                                     double T_guess, const OrbitOptions& opts = {}) {
  OrbitSearch out;
  out.newton = newton_closed_orbit(surface, f, seed, T_guess, opts);
  if (!out.newton.converged) {
    out.diagnostic = out.newton.diagnostic;
    return out;
  }
  UnitTangentState s = out.newton.state;
  double T = out.newton.period;
  bool degenerate = out.newton.degenerate;
  for (bool reduced = true; reduced;) {
    reduced = false;
    const DenseTrajectory traj = integrate_dense(surface, f, s, T, opts.integrator);
    for (int m = opts.max_subperiod; m >= 2 && !reduced; --m) {
      if (closure_gap(surface, traj.state_at(T / m), s) > 1e-4) continue;
      const NewtonOutcome sub = newton_closed_orbit(surface, f, s, T / m, opts);
      if (sub.converged && std::abs(sub.period - T / m) < 1e-6 * T) {
        s = sub.state;
        T = sub.period;
        degenerate = degenerate || sub.degenerate;
        reduced = true;
      }
    }
  }
  ClosedOrbit o = make_closed_orbit(surface, f, s, T, opts);
  if (o.closure_residual > opts.closure_tol) {
    out.diagnostic = "closure residual " + std::to_string(o.closure_residual) + " above tolerance";
    return out;
  }
  o.degenerate = degenerate;
  o.iterations = out.newton.iterations;
  o.residual_history = out.newton.history;
  out.orbit = std::move(o);
  return out;
}

/// m-fold iterate: period and turning number multiplied by m.
inline ClosedOrbit iterate(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit, int m,
                           const OrbitOptions& opts = {}) {
  if (m < 1) throw PreconditionError("iterate count must be positive");
  OrbitOptions o = opts;
  o.samples = static_cast<int>(orbit.samples.size() - 1) * m;
  ClosedOrbit it = make_closed_orbit(surface, f, orbit.start, m * orbit.period, o);
  it.multiplicity = orbit.multiplicity * m;
  it.prime = m == 1 && orbit.prime;
  it.degenerate = orbit.degenerate;
  it.seed_index = orbit.seed_index;
  return it;
}

// Phase-space geometry of sample sets ------------------------------------------------

/// Coordinates used for distances between orbits: ambient position and scaled
/// velocity on the sphere; lift coordinates and angle elsewhere.
using PhasePoint = std::array<double, 6>;

inline PhasePoint phase_point(const Surface& surface, const UnitTangentState& s) {
  if (surface.is_sphere()) {
    const AmbientFrame fr = ambient_frame(surface, s);
    const double r = surface.radius();
    return {fr.position[0], fr.position[1], fr.position[2], r * fr.velocity[0], r * fr.velocity[1], r * fr.velocity[2]};
  }
  return {s.x, s.y, s.phi, 0.0, 0.0, 0.0};
}

inline double phase_gap(const Surface& surface, const PhasePoint& a, const PhasePoint& b) {
  if (surface.is_sphere()) {
    double s = 0.0;
    for (std::size_t i = 0; i < 6; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  double dx = a[0] - b[0], dy = a[1] - b[1];
  if (surface.is_torus()) {
    dx -= surface.side_x() * std::round(dx / surface.side_x());
    dy -= surface.side_y() * std::round(dy / surface.side_y());
  }
  const double dp = wrap_angle(a[2] - b[2]);
  return std::sqrt(dx * dx + dy * dy + dp * dp);
}

/// Time average of the phase coordinates over one period (angles and torus
/// positions as circular means), a cheap invariant under time shifts.
inline std::array<double, 6> phase_centroid(const Surface& surface, const ClosedOrbit& orbit) {
  const std::size_t n = orbit.samples.size() - 1;
  std::array<double, 6> c{};
  if (surface.is_sphere()) {
    for (std::size_t i = 0; i < n; ++i) {
      const PhasePoint p = phase_point(surface, orbit.samples[i]);
      for (std::size_t k = 0; k < 6; ++k) c[k] += p[k] / static_cast<double>(n);
    }
    return c;
  }
  double mx = 0, my = 0, cp = 0, sp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += orbit.samples[i].x / static_cast<double>(n);
    my += orbit.samples[i].y / static_cast<double>(n);
    cp += std::cos(orbit.samples[i].phi) / static_cast<double>(n);
    sp += std::sin(orbit.samples[i].phi) / static_cast<double>(n);
  }
  if (surface.is_torus()) {
    mx -= surface.side_x() * std::floor(mx / surface.side_x());
    my -= surface.side_y() * std::floor(my / surface.side_y());
  }
  return {mx, my, cp, sp, 0.0, 0.0};
}

inline double centroid_gap(const Surface& surface, const std::array<double, 6>& a, const std::array<double, 6>& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1];
  if (surface.is_torus()) {
    dx -= surface.side_x() * std::round(dx / surface.side_x());
    dy -= surface.side_y() * std::round(dy / surface.side_y());
  }
  double s = dx * dx + dy * dy;
  for (std::size_t k = 2; k < 6; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

namespace detail {

/// Cubic Lagrange interpolation of the phase points at fractional index t.
inline PhasePoint interpolate_phase(const std::vector<PhasePoint>& pts, double t) {
  const int n = static_cast<int>(pts.size()) - 1;
  int i0 = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, std::max(0, n - 3));
  PhasePoint out{};
  for (int a = 0; a < 4; ++a) {
    double w = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a) w *= (t - (i0 + b)) / static_cast<double>(a - b);
    for (std::size_t k = 0; k < 6; ++k) out[k] += w * pts[static_cast<std::size_t>(i0 + a)][k];
  }
  return out;
}

inline double distance_to_curve(const Surface& surface, const PhasePoint& p, const std::vector<PhasePoint>& curve) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < curve.size(); ++j) {
    const double d = phase_gap(surface, p, curve[j]);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  const double lo = std::max(0.0, static_cast<double>(best) - 1.0);
  const double hi = std::min(static_cast<double>(curve.size() - 1), static_cast<double>(best) + 1.0);
  double a = lo, b = hi;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  auto dist = [&](double t) { return phase_gap(surface, p, interpolate_phase(curve, t)); };
  double c = b - g * (b - a), e = a + g * (b - a), fc = dist(c), fe = dist(e);
  for (int it = 0; it < 40; ++it) {
    if (fc < fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - g * (b - a);
      fc = dist(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + g * (b - a);
      fe = dist(e);
    }
  }
  return std::min(bd, std::min(fc, fe));
}

}  // namespace detail

/// Hausdorff distance in T^1M between the sample sets of two orbits, with the
/// second curve refined by cubic interpolation between samples.
inline double hausdorff_distance(const Surface& surface, const ClosedOrbit& a, const ClosedOrbit& b) {
  std::vector<PhasePoint> pa, pb;
  for (const auto& s : a.samples) pa.push_back(phase_point(surface, s));
  for (const auto& s : b.samples) pb.push_back(phase_point(surface, s));
  double h = 0.0;
  for (const auto& p : pa) h = std::max(h, detail::distance_to_curve(surface, p, pb));
  for (const auto& p : pb) h = std::max(h, detail::distance_to_curve(surface, p, pa));
  return h;
}

// Surveys -------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on `threads` workers (0: hardware concurrency).
template <class Fn>
void parallel_for(int n, int threads, const Fn& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct SeedGrid {
  int n1 = 0;  ///< torus: x cells; sphere: height bands; hyperbolic: grid side
  int n2 = 0;  ///< torus: y cells; sphere: longitudes
  int headings = 0;
  double disc_radius = 0.5;  ///< hyperbolic chart: seeds lie in this disc
};

/// Torus: uniform positions times headings.  Sphere: height midpoints times
/// longitudes times headings.  Hyperbolic chart: grid points inside a disc.
inline std::vector<UnitTangentState> seed_grid(const Surface& surface, const SeedGrid& g) {
  std::vector<UnitTangentState> seeds;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j)
      for (int k = 0; k < g.headings; ++k) {
        const double phi = two_pi * (k + 0.25) / g.headings;
        if (surface.is_torus()) {
          seeds.push_back({surface.side_x() * (i + 0.5) / g.n1, surface.side_y() * (j + 0.5) / g.n2, phi, 0});
        } else if (surface.is_sphere()) {
          const double z = -1.0 + 2.0 * (i + 0.5) / g.n1, rho = std::sqrt(1.0 - z * z);
          const double lon = two_pi * (j + 0.5) / g.n2;
          const ChartPoint p = surface.chart_from_unit_ambient({rho * std::cos(lon), rho * std::sin(lon), z});
          seeds.push_back({p.x, p.y, phi, p.chart});
        } else {
          const double x = g.disc_radius * (-1.0 + 2.0 * (i + 0.5) / g.n1);
          const double y = g.disc_radius * (-1.0 + 2.0 * (j + 0.5) / g.n2);
          if (x * x + y * y < g.disc_radius * g.disc_radius) seeds.push_back({x, y, phi, 0});
        }
      }
  return seeds;
}

struct SurveyOptions {
  OrbitOptions orbit;
  double dedupe_tol = 1e-5;
  int threads = 0;
  double bracket_low = 0.2;
  double bracket_high = 5.0;
  double period_scale = 0.0;  ///< T0; 0 means derive from the field
  bool filter = true;         ///< keep only prime orbits in the fibre class
};

struct SurveyResult {
  std::vector<ClosedOrbit> orbits;
  int seeds = 0;
  int converged = 0;
  int outside_class = 0;
  int not_prime = 0;
  int duplicates = 0;
  double period_scale = 0.0;
  std::vector<std::string> failures;  ///< one diagnostic per failed seed (in seed order)
};

/// Deduplicates orbits already sorted by (period, seed index): an orbit is
/// dropped when an earlier one has equal period and Hausdorff distance below tol.
inline std::vector<ClosedOrbit> dedupe_orbits(const Surface& surface, std::vector<ClosedOrbit> orbits, double tol,
                                              int* removed = nullptr) {
  std::vector<ClosedOrbit> kept;
  std::vector<std::array<double, 6>> centroids;
  int dropped = 0;
  for (auto& o : orbits) {
    const auto c = phase_centroid(surface, o);
    bool dup = false;
    for (std::size_t k = 0; k < kept.size() && !dup; ++k) {
      if (std::abs(kept[k].period - o.period) > std::max(1e-6 * o.period, 10.0 * tol)) continue;
      if (centroid_gap(surface, centroids[k], c) > 100.0 * tol + 1e-6) continue;
      if (hausdorff_distance(surface, kept[k], o) <= tol) dup = true;
    }
    if (dup) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(o));
    centroids.push_back(c);
  }
  if (removed) *removed = dropped;
  return kept;
}

inline void sort_orbits(std::vector<ClosedOrbit>& orbits) {
  std::sort(orbits.begin(), orbits.end(), [](const ClosedOrbit& a, const ClosedOrbit& b) {
    if (a.period != b.period) return a.period < b.period;
    return a.seed_index < b.seed_index;
  });
}

/// Mean of f over the surface (compact) or over the seed points (hyperbolic chart).
inline double field_average_for_seeds(const Surface& surface, const ScalarField& f,
                                      const std::vector<UnitTangentState>& seeds) {
  if (surface.is_compact()) return average(surface, f, 128);
  double s = 0.0;
  for (const auto& p : seeds) s += surface.field_value(f, p.point());
  return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

inline SurveyResult survey(const Surface& surface, const ScalarField& f, const std::vector<UnitTangentState>& seeds,
                           const SurveyOptions& opts = {}) {
  SurveyResult out;
  out.seeds = static_cast<int>(seeds.size());
  if (seeds.empty()) return out;
  double T0 = opts.period_scale;
  if (!(T0 > 0.0)) {
    const double favg = field_average_for_seeds(surface, f, seeds);
    double kf = favg * favg;
    if (surface.is_compact()) kf += 2.0 * std::numbers::pi * surface.euler_characteristic() / surface.area();
    else kf += gaussian_curvature(surface, seeds.front().point());
    T0 = period_scale(favg, kf);
  }
  out.period_scale = T0;

  std::vector<std::optional<ClosedOrbit>> slots(seeds.size());
  std::vector<std::string> diag(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), opts.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const auto guess =
          closest_return(surface, f, seeds[k], opts.bracket_low * T0, opts.bracket_high * T0, opts.orbit.integrator);
      if (!guess) {
        diag[k] = "no return within the period bracket";
        return;
      }
      OrbitSearch r = find_closed_orbit(surface, f, seeds[k], *guess, opts.orbit);
      if (!r.orbit) {
        diag[k] = r.diagnostic;
        return;
      }
      r.orbit->seed_index = i;
      slots[k] = std::move(r.orbit);
    } catch (const Error& e) {
      diag[k] = e.what();
    }
  });

  std::vector<ClosedOrbit> found;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k]) {
      out.failures.push_back("seed " + std::to_string(k) + ": " + diag[k]);
      continue;
    }
    ++out.converged;
    if (opts.filter && !slots[k]->in_h_infty) {
      ++out.outside_class;
      continue;
    }
    if (opts.filter && !slots[k]->prime) {
      ++out.not_prime;
      continue;
    }
    found.push_back(std::move(*slots[k]));
  }
  sort_orbits(found);
  out.orbits = dedupe_orbits(surface, std::move(found), opts.dedupe_tol, &out.duplicates);
  return out;
}

}  // namespace magsys
