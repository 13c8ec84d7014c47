#pragma once

// One-forms on the unit tangent bundle built from alpha_can, the connection
// form eta, the fibre angle and pulled-back surface forms; line integrals over
// orbits and fibres; pointwise probes of exterior derivatives; closed-form
// volumes and actions with numerical witnesses.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/flow.hpp"
#include "magsys/maglen.hpp"
#include "magsys/normalize.hpp"
#include "magsys/orbit.hpp"
#include "magsys/surface.hpp"
#include "magsys/sysdia.hpp"

namespace magsys {

/// Tangent vector to T^1 M in chart coordinates (dx, dy, dphi).
using BundleVector = std::array<double, 3>;

/// c_can alpha_can + c_eta eta + c_angle dphi_P + c_zeta p^* zeta.
///
/// alpha_can = e^u (cos phi dx + sin phi dy), eta = -(dphi - u_y dx + u_x dy) / 2 pi,
/// dphi_P = -dphi / 2 pi (torus only, where the chart frame is global).  The
/// fibre generator V = -2 pi d/dphi has eta(V) = dphi_P(V) = 1.
class OneFormOnBundle {
 public:
  static OneFormOnBundle alpha_can(const Surface& s) { return OneFormOnBundle(s, "alpha_can", 1.0, 0.0, 0.0); }
  static OneFormOnBundle eta(const Surface& s) { return OneFormOnBundle(s, "eta", 0.0, 1.0, 0.0); }
  static OneFormOnBundle fibre_angle(const Surface& s) {
    if (!s.is_torus()) throw UnsupportedOperation("a global fibre angle exists on the torus only");
    return OneFormOnBundle(s, "dphi_P", 0.0, 0.0, 1.0);
  }
  /// Sphere: (area / chi) eta; the correction primitive vanishes on the round sphere.
  static OneFormOnBundle alpha_infty(const Surface& s) {
    if (!s.is_sphere()) throw UnsupportedOperation("alpha_infty is implemented on the round sphere only");
    return OneFormOnBundle(s, "alpha_infty", 0.0, s.area() / s.euler_characteristic(), 0.0);
  }
  /// Primitive of Omega_f = d alpha_can + f mu (sphere, constant f) or of
  /// Omega_f - f_avg mu (torus, f_avg > 0).
  static OneFormOnBundle alpha_f(const Surface& s, const ScalarField& f, int resolution = 256) {
    if (s.is_sphere()) {
      if (!f.is_constant())
        throw UnsupportedOperation("alpha_f on the sphere is implemented for constant f only");
      return OneFormOnBundle(s, "alpha_f", 1.0, s.area() * f.constant_value() / s.euler_characteristic(), 0.0);
    }
    if (!s.is_torus()) throw UnsupportedOperation("alpha_f needs a compact surface");
    const double fa = field_average(s, f, resolution);
    if (!(fa > 0.0)) throw PreconditionError("alpha_f on the torus needs f_avg > 0");
    const AverageLength al = average_length_from(s, fa);
    OneFormOnBundle out(s, "alpha_f", 1.0, 0.0, -*al.value);
    if (!f.is_constant()) {
      HodgeOptions ho;
      ho.resolution = resolution;
      ho.mean_tol = 1e-8;
      out.zeta_ = hodge_primitive(s, f.shifted(-fa), ho).zeta;
    }
    return out;
  }

  /// Scaled copy.
  OneFormOnBundle scaled(double c, std::string name) const {
    OneFormOnBundle r = *this;
    r.c_can_ *= c;
    r.c_eta_ *= c;
    r.c_angle_ *= c;
    r.c_zeta_ *= c;
    r.name_ = std::move(name);
    return r;
  }

  double operator()(const UnitTangentState& s, const BundleVector& v) const {
    const ChartPoint p = s.point();
    const Jet<1> u = surface_.log_factor<1>(p);
    double out = 0.0;
    if (c_can_ != 0.0) out += c_can_ * std::exp(u.value()) * (std::cos(s.phi) * v[0] + std::sin(s.phi) * v[1]);
    if (c_eta_ != 0.0) out -= c_eta_ * (v[2] - u.dy() * v[0] + u.dx() * v[1]) / (2.0 * std::numbers::pi);
    if (c_angle_ != 0.0) out -= c_angle_ * v[2] / (2.0 * std::numbers::pi);
    if (zeta_ && c_zeta_ != 0.0) {
      const auto z = zeta_->value(s.x, s.y);
      out += c_zeta_ * (z[0] * v[0] + z[1] * v[1]);
    }
    return out;
  }

  const std::string& name() const { return name_; }
  const Surface& surface() const { return surface_; }
  double eta_coefficient() const { return c_eta_; }
  double angle_coefficient() const { return c_angle_; }
  const std::optional<SurfaceOneForm>& zeta() const { return zeta_; }

 private:
  OneFormOnBundle(const Surface& s, std::string name, double c_can, double c_eta, double c_angle)
      : surface_(s), name_(std::move(name)), c_can_(c_can), c_eta_(c_eta), c_angle_(c_angle) {}

  Surface surface_;
  std::string name_;
  double c_can_ = 0.0, c_eta_ = 0.0, c_angle_ = 0.0, c_zeta_ = 1.0;
  std::optional<SurfaceOneForm> zeta_;
};

// Closed curves in T^1 M ----------------------------------------------------------

/// Uniformly parametrised closed curve: velocity[i] is the derivative at
/// t_i = i duration / n (no repeated endpoint).
struct BundleLoop {
  std::vector<UnitTangentState> states;
  std::vector<BundleVector> velocity;
  double duration = 1.0;
};

inline BundleLoop orbit_loop(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit) {
  BundleLoop loop;
  loop.duration = orbit.period;
  for (std::size_t i = 0; i + 1 < orbit.samples.size(); ++i) {
    loop.states.push_back(orbit.samples[i]);
    loop.velocity.push_back(magnetic_derivative(surface, f, orbit.samples[i]));
  }
  return loop;
}

/// The fibre over p traversed by the flow of V = -2 pi d/dphi in unit time.
inline BundleLoop fibre_loop(const ChartPoint& p, int n = 64) {
  BundleLoop loop;
  for (int k = 0; k < n; ++k) {
    loop.states.push_back({p.x, p.y, -2.0 * std::numbers::pi * k / n, p.chart});
    loop.velocity.push_back({0.0, 0.0, -2.0 * std::numbers::pi});
  }
  return loop;
}

/// Periodic trapezoid rule.
inline double line_integral(const OneFormOnBundle& form, const BundleLoop& loop) {
  if (loop.states.empty()) throw PreconditionError("empty loop");
  double sum = 0.0;
  for (std::size_t i = 0; i < loop.states.size(); ++i) sum += form(loop.states[i], loop.velocity[i]);
  return sum * loop.duration / static_cast<double>(loop.states.size());
}

// Pointwise probes ------------------------------------------------------------------

/// p^* mu (a, b).
inline double pullback_area(const Surface& surface, const UnitTangentState& s, const BundleVector& a,
                            const BundleVector& b) {
  return std::exp(2.0 * surface.log_factor_value(s.point())) * (a[0] * b[1] - a[1] * b[0]);
}

/// d alpha (a, b) from circulations over coordinate circles of radius h and
/// h / 2 (Richardson).
inline double exterior_derivative(const OneFormOnBundle& form, const UnitTangentState& s, const BundleVector& a,
                                  const BundleVector& b, double h = 1e-2, int nodes = 64) {
  auto circulation = [&](double r) {
    double sum = 0.0;
    for (int k = 0; k < nodes; ++k) {
      const double th = 2.0 * std::numbers::pi * k / nodes, c = std::cos(th), sn = std::sin(th);
      UnitTangentState q = s;
      q.x += r * (c * a[0] + sn * b[0]);
      q.y += r * (c * a[1] + sn * b[1]);
      q.phi += r * (c * a[2] + sn * b[2]);
      const BundleVector v{r * (-sn * a[0] + c * b[0]), r * (-sn * a[1] + c * b[1]), r * (-sn * a[2] + c * b[2])};
      sum += form(q, v);
    }
    return sum * 2.0 * std::numbers::pi / nodes / (std::numbers::pi * r * r);
  };
  return (4.0 * circulation(0.5 * h) - circulation(h)) / 3.0;
}

/// (beta ^ omega)(a, b, c) for a one-form value beta(.) and two-form omega(., .).
template <class One, class Two>
double wedge_one_two(const One& beta, const Two& omega, const BundleVector& a, const BundleVector& b,
                     const BundleVector& c) {
  return beta(a) * omega(b, c) - beta(b) * omega(a, c) + beta(c) * omega(a, b);
}

struct ProbeFrame {
  UnitTangentState state;
  std::array<BundleVector, 3> v;
};

/// Random states away from chart edges with random tangent frames.
inline std::vector<ProbeFrame> probe_frames(const Surface& surface, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0), sym(-1.0, 1.0);
  std::vector<ProbeFrame> out;
  for (int i = 0; i < n; ++i) {
    ProbeFrame f;
    if (surface.is_torus()) {
      f.state = {surface.side_x() * u01(rng), surface.side_y() * u01(rng), 2.0 * std::numbers::pi * u01(rng), 0};
    } else {
      const double r = (surface.is_sphere() ? 1.0 : 0.6) * std::sqrt(u01(rng)), th = 2.0 * std::numbers::pi * u01(rng);
      f.state = {r * std::cos(th), r * std::sin(th), 2.0 * std::numbers::pi * u01(rng), 0};
    }
    for (auto& w : f.v) w = {sym(rng), sym(rng), sym(rng)};
    out.push_back(f);
  }
  return out;
}

struct IdentityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  ///< worst |lhs - rhs| / max(1, |rhs|) over probes
  int probes = 0;
};

inline void record(IdentityCheck& c, double lhs, double rhs) {
  const double r = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
  if (c.probes == 0 || r > c.residual) {
    c.residual = r;
    c.lhs = lhs;
    c.rhs = rhs;
  }
  ++c.probes;
}

/// eta(V) = 1.
inline IdentityCheck check_eta_normalisation(const Surface& surface, int n = 100, unsigned seed = 11) {
  IdentityCheck c{"eta(V) = 1"};
  const auto eta = OneFormOnBundle::eta(surface);
  for (const auto& p : probe_frames(surface, n, seed)) record(c, eta(p.state, {0.0, 0.0, -2.0 * std::numbers::pi}), 1.0);
  return c;
}

/// d eta = (K / 2 pi) p^* mu.
inline IdentityCheck check_deta_curvature(const Surface& surface, int n = 1000, unsigned seed = 12) {
  IdentityCheck c{"d eta = K/(2 pi) mu"};
  const auto eta = OneFormOnBundle::eta(surface);
  for (const auto& p : probe_frames(surface, n, seed)) {
    const double k = gaussian_curvature(surface, p.state.point());
    record(c, exterior_derivative(eta, p.state, p.v[0], p.v[1]),
           k / (2.0 * std::numbers::pi) * pullback_area(surface, p.state, p.v[0], p.v[1]));
  }
  return c;
}

/// alpha_can ^ d alpha_can = 2 pi eta ^ p^* mu.
inline IdentityCheck check_contact_identity(const Surface& surface, int n = 200, unsigned seed = 13) {
  IdentityCheck c{"alpha_can ^ d alpha_can = 2 pi eta ^ mu"};
  const auto al = OneFormOnBundle::alpha_can(surface);
  const auto eta = OneFormOnBundle::eta(surface);
  for (const auto& p : probe_frames(surface, n, seed)) {
    const auto& s = p.state;
    const double lhs = wedge_one_two([&](const BundleVector& v) { return al(s, v); },
                                     [&](const BundleVector& a, const BundleVector& b) {
                                       return exterior_derivative(al, s, a, b);
                                     },
                                     p.v[0], p.v[1], p.v[2]);
    const double rhs = 2.0 * std::numbers::pi *
                       wedge_one_two([&](const BundleVector& v) { return eta(s, v); },
                                     [&](const BundleVector& a, const BundleVector& b) {
                                       return pullback_area(surface, s, a, b);
                                     },
                                     p.v[0], p.v[1], p.v[2]);
    record(c, lhs, rhs);
  }
  return c;
}

/// d alpha_f = Omega_f - [torus] f_avg mu, with Omega_f = d alpha_can + f mu.
inline IdentityCheck check_alpha_f_primitive(const Surface& surface, const ScalarField& f, int n = 200,
                                             unsigned seed = 14) {
  IdentityCheck c{"d alpha_f = Omega_f"};
  const auto af = OneFormOnBundle::alpha_f(surface, f);
  const auto al = OneFormOnBundle::alpha_can(surface);
  const double shift = surface.is_torus() ? field_average(surface, f) : 0.0;
  for (const auto& p : probe_frames(surface, n, seed)) {
    const double fv = surface.field_value(f, p.state.point());
    record(c, exterior_derivative(af, p.state, p.v[0], p.v[1]),
           exterior_derivative(al, p.state, p.v[0], p.v[1]) +
               (fv - shift) * pullback_area(surface, p.state, p.v[0], p.v[1]));
  }
  return c;
}

// Volumes and actions ---------------------------------------------------------------

/// P(A): chi A^2 / 2 on the sphere, area * A on the torus.
inline double zoll_polynomial(const Surface& surface, double A) {
  if (surface.is_sphere()) return 0.5 * surface.euler_characteristic() * A * A;
  if (surface.is_torus()) return surface.area() * A;
  throw UnsupportedOperation("Zoll polynomial needs a compact surface");
}

/// Vol(Omega_f) = area^2 K_f / (2 chi) on the sphere; the normalised torus volume is 0.
inline double volume_closed_form(const Surface& surface, double f_avg) {
  if (surface.is_sphere())
    return surface.area() * surface.area() * average_curvature_from(surface, f_avg) /
           (2.0 * surface.euler_characteristic());
  if (surface.is_torus()) return 0.0;
  throw UnsupportedOperation("volume needs a compact surface");
}

/// Vol(Omega_infty) = area^2 / (2 chi) on the sphere.
inline double volume_infty(const Surface& surface) {
  if (!surface.is_sphere()) throw UnsupportedOperation("Vol(Omega_infty) is implemented on the sphere only");
  return surface.area() * surface.area() / (2.0 * surface.euler_characteristic());
}

/// Sphere, constant f: (1/2) int alpha_f ^ Omega_f from probes of the fibrewise
/// constant ratio to eta ^ mu (whose integral is the area).
inline IdentityCheck sphere_volume_probe(const Surface& surface, const ScalarField& f, int n = 200,
                                         unsigned seed = 15) {
  if (!surface.is_sphere() || !f.is_constant())
    throw UnsupportedOperation("the volume probe assumes constant f on the round sphere");
  IdentityCheck c{"Vol(Omega_f)"};
  const auto af = OneFormOnBundle::alpha_f(surface, f);
  const auto al = OneFormOnBundle::alpha_can(surface);
  const auto eta = OneFormOnBundle::eta(surface);
  const double fv = f.constant_value();
  const double closed = volume_closed_form(surface, fv);
  for (const auto& p : probe_frames(surface, n, seed)) {
    const auto& s = p.state;
    auto omega = [&](const BundleVector& a, const BundleVector& b) {
      return exterior_derivative(al, s, a, b) + fv * pullback_area(surface, s, a, b);
    };
    const double top = wedge_one_two([&](const BundleVector& v) { return af(s, v); }, omega, p.v[0], p.v[1], p.v[2]);
    const double vol = wedge_one_two([&](const BundleVector& v) { return eta(s, v); },
                                     [&](const BundleVector& a, const BundleVector& b) {
                                       return pullback_area(surface, s, a, b);
                                     },
                                     p.v[0], p.v[1], p.v[2]);
    if (std::abs(vol) < 1e-3) continue;
    record(c, 0.5 * surface.area() * top / vol, closed);
  }
  return c;
}

/// Torus: Vol((1/f_avg) alpha_f) by the trapezoid rule on an n x n x m grid of
/// T^1 T^2 (expected 0).
inline double torus_normalised_volume(const Surface& surface, const ScalarField& f, int n = 64, int m = 32) {
  if (!surface.is_torus()) throw UnsupportedOperation("torus volume on a non-torus surface");
  const auto af = OneFormOnBundle::alpha_f(surface, f);
  const double fa = field_average(surface, f);
  const double e = -af.angle_coefficient() / (2.0 * std::numbers::pi) / fa;
  double sum = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = surface.side_x() * i / n, y = surface.side_y() * j / n;
      const Jet<1> u = surface.log_factor<1>({x, y, 0});
      const double eu = std::exp(u.value());
      double zx = 0.0, zy = 0.0, curl = 0.0;
      if (af.zeta()) {
        const Jet<1> jx = af.zeta()->zx.jet<1>(x, y), jy = af.zeta()->zy.jet<1>(x, y);
        zx = jx.value();
        zy = jy.value();
        curl = jy.dx() - jx.dy();
      }
      for (int k = 0; k < m; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / m, c = std::cos(phi), s = std::sin(phi);
        const double a = (eu * c + zx) / fa, b = (eu * s + zy) / fa;
        const double a_phi = -eu * s / fa, b_phi = eu * c / fa;
        const double curl_ab = (eu * (u.dx() * s - u.dy() * c) + curl) / fa;
        const double density = -a * b_phi + b * a_phi + e * curl_ab;
        sum += e * eu * eu + 0.5 * density;
      }
    }
  const double cell = surface.side_x() * surface.side_y() * 2.0 * std::numbers::pi / (static_cast<double>(n) * n * m);
  // Orientation of T^1 M: int eta ^ mu = area gives int dx dy dphi = -int int int.
  return -sum * cell;
}

struct ActionCheck {
  double action = 0.0;       ///< from the line integral of alpha_f (plus the cap term on the torus)
  double closed_form = 0.0;  ///< l_f + area f_avg / chi, or (l_f - l_bar) / f_avg
  double line_integral = 0.0;
  double cap_area = 0.0;     ///< torus: int_cap mu
  double magnetic_length = 0.0;
  double residual = 0.0;
};

inline ActionCheck orbit_action(const Surface& surface, const ScalarField& f, const ClosedOrbit& orbit) {
  ActionCheck out;
  const auto af = OneFormOnBundle::alpha_f(surface, f);
  out.line_integral = line_integral(af, orbit_loop(surface, f, orbit));
  out.magnetic_length = magnetic_length(surface, f, orbit).magnetic_length;
  const double fa = field_average(surface, f);
  if (surface.is_sphere()) {
    out.action = out.line_integral;
    out.closed_form = out.magnetic_length + surface.area() * fa / surface.euler_characteristic();
  } else {
    out.cap_area = capping_integral(surface, ScalarField::constant(1.0), orbit).value;
    out.action = out.line_integral / fa + out.cap_area;
    out.closed_form = (out.magnetic_length - *average_length_from(surface, fa).value) / fa;
  }
  out.residual = std::abs(out.action - out.closed_form);
  return out;
}

/// Action of alpha_infty on a fibre: area / chi.
inline double fibre_action_infty(const Surface& surface, const ChartPoint& p = {0.0, 0.0, 0}) {
  return line_integral(OneFormOnBundle::alpha_infty(surface), fibre_loop(p));
}

}  // namespace magsys
