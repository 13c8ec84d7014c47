#pragma once

// Average curvature K_f = f_avg^2 + 2 pi chi / area, average length
// 2 pi / (f_avg + sqrt(K_f)) and the min/max comparison over surveyed orbits.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "magsys/errors.hpp"
#include "magsys/maglen.hpp"
#include "magsys/orbit.hpp"

namespace magsys {

inline double field_average(const Surface& surface, const ScalarField& f, int resolution = 256) {
  if (f.is_constant()) return f.constant_value();
  return average(surface, f, resolution);
}

inline double average_curvature_from(const Surface& surface, double f_avg) {
  if (!surface.is_compact()) throw UnsupportedOperation("average curvature needs a compact surface");
  return f_avg * f_avg + 2.0 * std::numbers::pi * surface.euler_characteristic() / surface.area();
}

inline double average_curvature(const Surface& surface, const ScalarField& f, int resolution = 256) {
  return average_curvature_from(surface, field_average(surface, f, resolution));
}

struct AverageLength {
  std::optional<double> value;        ///< 2 pi / (f_avg + sqrt K_f)
  std::optional<double> prime_value;  ///< 2 pi / (-f_avg + sqrt K_f)
  std::string reason;                 ///< why value is undefined
  std::string prime_reason;
};

inline AverageLength average_length_from(const Surface& surface, double f_avg) {
  AverageLength out;
  if (!surface.is_compact()) {
    out.reason = out.prime_reason = "average length is undefined on the non-compact hyperbolic chart";
    return out;
  }
  const double kf = average_curvature_from(surface, f_avg);
  if (kf < 0.0) {
    out.reason = out.prime_reason = "average curvature is negative";
    return out;
  }
  const double root = std::sqrt(kf);
  const double den = f_avg + root, den_prime = -f_avg + root;
  // On the torus sqrt(K_f) = |f_avg|; the denominators vanish exactly for one sign.
  const double eps = 1e-14 * std::max(1.0, root);
  if (std::abs(den) > eps) out.value = 2.0 * std::numbers::pi / den;
  else out.reason = "average length is real only when f_avg > 0 on the torus";
  if (std::abs(den_prime) > eps) out.prime_value = 2.0 * std::numbers::pi / den_prime;
  else out.prime_reason = "reversed average length is real only when f_avg < 0 on the torus";
  return out;
}

inline AverageLength average_length(const Surface& surface, const ScalarField& f, int resolution = 256) {
  if (!surface.is_compact()) return average_length_from(surface, 0.0);
  return average_length_from(surface, field_average(surface, f, resolution));
}

enum class Verdict { Holds, Violated, UndefinedEllBar, EmptyOrbitSet };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Violated: return "violated";
    case Verdict::UndefinedEllBar: return "undefined_ellbar";
    case Verdict::EmptyOrbitSet: return "empty_orbit_set";
  }
  return "unknown";
}

struct OrbitLengthRecord {
  int seed_index = -1;
  double period = 0.0;
  double length_alpha_can = 0.0;
  double capping_integral = 0.0;
  double capping_error = 0.0;
  double magnetic_length = 0.0;
  int turning_number = 0;
  bool degenerate = false;
  std::string chart;
  std::optional<Vec3> pole;
};

struct SysDiaReport {
  double f_avg = 0.0;
  double K_f = 0.0;
  std::optional<double> ell_bar;
  std::optional<double> ell_bar_prime;
  std::string ell_bar_reason;
  double ell_min = 0.0;
  double ell_max = 0.0;
  Verdict verdict = Verdict::EmptyOrbitSet;
  bool zoll_flag = false;
  double zoll_tol = 1e-4;
  double report_tol = 1e-6;
  std::vector<OrbitLengthRecord> per_orbit;
  int seeds = 0;
};

struct VerdictOptions {
  double zoll_tol = 1e-4;
  double report_tol = 1e-6;  ///< slack in the comparison l_min <= l_bar <= l_max
  int resolution = 256;
  CappingOptions capping;
};

inline OrbitLengthRecord orbit_length_record(const Surface& surface, const ScalarField& f, const ClosedOrbit& o,
                                             const CappingOptions& copts = {}) {
  const MagneticLength ml = magnetic_length(surface, f, o, std::nullopt, copts);
  OrbitLengthRecord r;
  r.seed_index = o.seed_index;
  r.period = o.period;
  r.length_alpha_can = ml.length_alpha_can;
  r.capping_integral = ml.capping.value;
  r.capping_error = ml.capping.error_estimate;
  r.magnetic_length = ml.magnetic_length;
  r.turning_number = o.turning_number;
  r.degenerate = o.degenerate;
  r.chart = ml.capping.chart;
  r.pole = ml.capping.pole;
  return r;
}

inline SysDiaReport verdict(const Surface& surface, const ScalarField& f, const std::vector<ClosedOrbit>& orbits,
                            const VerdictOptions& opts = {}) {
  if (!surface.is_compact()) throw UnsupportedOperation("systolic reports need a compact surface");
  SysDiaReport rep;
  rep.zoll_tol = opts.zoll_tol;
  rep.report_tol = opts.report_tol;
  rep.f_avg = field_average(surface, f, opts.resolution);
  rep.K_f = average_curvature_from(surface, rep.f_avg);
  const AverageLength al = average_length_from(surface, rep.f_avg);
  rep.ell_bar = al.value;
  rep.ell_bar_prime = al.prime_value;
  rep.ell_bar_reason = al.reason;
  for (const auto& o : orbits) rep.per_orbit.push_back(orbit_length_record(surface, f, o, opts.capping));
  if (rep.per_orbit.empty()) {
    rep.verdict = Verdict::EmptyOrbitSet;
    return rep;
  }
  rep.ell_min = rep.ell_max = rep.per_orbit.front().magnetic_length;
  for (const auto& r : rep.per_orbit) {
    rep.ell_min = std::min(rep.ell_min, r.magnetic_length);
    rep.ell_max = std::max(rep.ell_max, r.magnetic_length);
  }
  if (!rep.ell_bar) {
    rep.verdict = Verdict::UndefinedEllBar;
    return rep;
  }
  const double lb = *rep.ell_bar;
  rep.verdict = (rep.ell_min <= lb + opts.report_tol && lb <= rep.ell_max + opts.report_tol) ? Verdict::Holds
                                                                                              : Verdict::Violated;
  rep.zoll_flag = rep.ell_max - rep.ell_min <= opts.zoll_tol && std::abs(rep.ell_max - lb) <= opts.zoll_tol &&
                  std::abs(rep.ell_min - lb) <= opts.zoll_tol;
  return rep;
}

}  // namespace magsys
