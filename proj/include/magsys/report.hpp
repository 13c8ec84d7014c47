#pragma once

// JSON records for orbits and reports, CSV exports, a plain-text verdict table
// and a standalone SVG plot of magnetic lengths.

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "magsys/config.hpp"
#include "magsys/forms.hpp"
#include "magsys/normalize.hpp"
#include "magsys/orbit.hpp"
#include "magsys/sysdia.hpp"

namespace magsys {

using nlohmann::json;

namespace detail {

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json vec_json(const std::optional<Vec3>& v) {
  if (!v) return nullptr;
  return json::array({(*v)[0], (*v)[1], (*v)[2]});
}

}  // namespace detail

/// Envelope shared by every report.
inline json report_header(const std::string& command, const ExperimentConfig& c) {
  return {{"tool", "magsys"}, {"version", kToolVersion}, {"command", command}, {"config_hash", config_hash(c)}};
}

inline json state_json(const UnitTangentState& s) {
  return {{"x", s.x}, {"y", s.y}, {"phi", s.phi}, {"chart", s.chart}};
}

inline json orbit_json(const ClosedOrbit& o) {
  return {{"period", o.period},
          {"turning_number", o.turning_number},
          {"prime", o.prime},
          {"in_h_infty", o.in_h_infty},
          {"residual", o.closure_residual},
          {"degenerate", o.degenerate},
          {"contractible", o.contractible},
          {"lattice_shift", json::array({o.lattice_shift[0], o.lattice_shift[1]})},
          {"multiplicity", o.multiplicity},
          {"newton_iterations", o.iterations},
          {"seed_index", o.seed_index},
          {"start", state_json(o.start)}};
}

/// Samples of a closed orbit as CSV: t, x, y, phi, speed_defect.
inline void write_orbit_csv(std::ostream& os, const Surface& surface, const ScalarField& f, const ClosedOrbit& o) {
  os << "t,x,y,phi,chart,speed_defect\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < o.samples.size(); ++i) {
    const auto& s = o.samples[i];
    os << o.time(i) << ',' << s.x << ',' << s.y << ',' << s.phi << ',' << s.chart << ','
       << speed_defect(surface, s, magnetic_derivative(surface, f, s)) << '\n';
  }
}

inline json survey_json(const SurveyResult& r) {
  return {{"seeds", r.seeds},
          {"converged", r.converged},
          {"orbits", r.orbits.size()},
          {"outside_class", r.outside_class},
          {"not_prime", r.not_prime},
          {"duplicates", r.duplicates},
          {"failures", r.failures.size()},
          {"period_scale", r.period_scale}};
}

inline json sysdia_json(const SysDiaReport& r) {
  json per = json::array();
  for (const auto& o : r.per_orbit)
    per.push_back({{"seed_index", o.seed_index},
                   {"period", o.period},
                   {"length", o.length_alpha_can},
                   {"capping_integral", o.capping_integral},
                   {"capping_error", o.capping_error},
                   {"magnetic_length", o.magnetic_length},
                   {"turning_number", o.turning_number},
                   {"degenerate", o.degenerate},
                   {"chart", o.chart},
                   {"q", detail::vec_json(o.pole)}});
  const bool empty = r.per_orbit.empty();
  return {{"f_avg", r.f_avg},
          {"K_f", r.K_f},
          {"ell_bar", detail::opt_json(r.ell_bar)},
          {"ell_bar_prime", detail::opt_json(r.ell_bar_prime)},
          {"ell_bar_reason", r.ell_bar_reason},
          {"ell_min", empty ? json(nullptr) : json(r.ell_min)},
          {"ell_max", empty ? json(nullptr) : json(r.ell_max)},
          {"verdict", to_string(r.verdict)},
          {"zoll_flag", r.zoll_flag},
          {"zoll_tol", r.zoll_tol},
          {"report_tol", r.report_tol},
          {"seeds", r.seeds},
          {"per_orbit", per}};
}

inline json strongness_json(const StrongnessReport& r) {
  return {{"brackets", json::array({r.brackets[0], r.brackets[1], r.brackets[2]})},
          {"f_avg", r.f_avg},
          {"C", r.C},
          {"threshold", r.threshold()},
          {"is_strong", r.is_strong()},
          {"s_star", r.minimal_rescaling()},
          {"note", "C is a calibration input; the theorem-level constant is not determined here"}};
}

inline json moser_json(const MoserResult& m, double tol) {
  json j = {{"f_avg", m.f_avg},
            {"resolution", m.resolution},
            {"identity", m.identity},
            {"pullback_defect", m.pullback_defect},
            {"defect_tol", tol},
            {"within_tol", m.pullback_defect <= tol},
            {"max_displacement", m.max_displacement}};
  if (!m.identity)
    j["primitive"] = {{"residual", m.primitive.residual},
                      {"schauder_ratio", json::array({m.primitive.schauder_ratio[0], m.primitive.schauder_ratio[1],
                                                      m.primitive.schauder_ratio[2]})}};
  return j;
}

/// Displacement field psi - id on the grid: i, j, x, y, dx, dy, defect.
inline void write_displacement_csv(std::ostream& os, const MoserResult& m) {
  os << "i,j,x,y,dx,dy,defect\n" << std::setprecision(17);
  const int n = m.resolution;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double x = m.side_x * i / n, y = m.side_y * j / n;
      const auto k = static_cast<std::size_t>(j) * n + i;
      const auto img = m.image.empty() ? std::array<double, 2>{x, y} : m.image[k];
      os << i << ',' << j << ',' << x << ',' << y << ',' << img[0] - x << ',' << img[1] - y << ','
         << (m.defect.empty() ? 0.0 : m.defect[k]) << '\n';
    }
}

inline json identity_json(const IdentityCheck& c) {
  return {{"identity", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"residual", c.residual}, {"probes", c.probes}};
}

inline json identity_json(const std::string& name, double lhs, double rhs) {
  return {{"identity", name}, {"lhs", lhs}, {"rhs", rhs}, {"residual", std::abs(lhs - rhs)}, {"probes", 1}};
}

inline json gronwall_json(const GronwallReport& g) {
  return {{"samples", g.samples},
          {"skipped", g.skipped},
          {"grad_x", json::array({g.grad_x[0], g.grad_x[1], g.grad_x[2]})},
          {"flow_norms", json::array({g.flow_norms[0], g.flow_norms[1], g.flow_norms[2]})},
          {"lhs", g.lhs},
          {"rhs_without_C", g.rhs_factor},
          {"calibrated_C", g.calibration},
          {"first_order_checked", g.first_order_checked},
          {"first_order_violations", g.first_order_violations},
          {"worst_first_order_ratio", g.worst_first_order_ratio},
          {"warnings", g.warnings}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void print_verdict_table(std::ostream& os, const SysDiaReport& r) {
  char buf[160];
  os << "orbit  seed      period   magnetic_length  turning\n";
  for (std::size_t i = 0; i < r.per_orbit.size(); ++i) {
    const auto& o = r.per_orbit[i];
    std::snprintf(buf, sizeof buf, "%5zu %5d %12.9f %16.10f %8d\n", i, o.seed_index, o.period, o.magnetic_length,
                  o.turning_number);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "f_avg = %.12g  K_f = %.12g\n", r.f_avg, r.K_f);
  os << buf;
  if (r.ell_bar) std::snprintf(buf, sizeof buf, "ell_bar = %.12g\n", *r.ell_bar);
  else std::snprintf(buf, sizeof buf, "ell_bar undefined: %s\n", r.ell_bar_reason.c_str());
  os << buf;
  if (!r.per_orbit.empty()) {
    std::snprintf(buf, sizeof buf, "ell_min = %.12g  ell_max = %.12g\n", r.ell_min, r.ell_max);
    os << buf;
  }
  os << "verdict: " << to_string(r.verdict) << (r.zoll_flag ? " (Zoll-consistent)" : "") << '\n';
}

/// Magnetic length per orbit index against the average-length line.
inline std::string verdict_svg(const SysDiaReport& r) {
  const double w = 640, h = 400, m = 50;
  double lo = r.per_orbit.empty() ? 0.0 : r.ell_min, hi = r.per_orbit.empty() ? 1.0 : r.ell_max;
  if (r.ell_bar) {
    lo = std::min(lo, *r.ell_bar);
    hi = std::max(hi, *r.ell_bar);
  }
  const double pad = std::max(1e-9, 0.1 * (hi - lo) + 1e-6 * std::abs(hi));
  lo -= pad;
  hi += pad;
  const std::size_t n = std::max<std::size_t>(r.per_orbit.size(), 1);
  auto X = [&](double i) { return m + (w - 2 * m) * (n == 1 ? 0.5 : i / (n - 1.0)); };
  auto Y = [&](double v) { return h - m - (h - 2 * m) * (v - lo) / (hi - lo); };
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\"" << h - m
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">orbit index</text>\n";
  os << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12 " << h / 2
     << ")\" text-anchor=\"middle\">magnetic length</text>\n";
  os << "<text x=\"" << m << "\" y=\"" << m - 8 << "\">" << lo << " .. " << hi << "</text>\n";
  if (r.ell_bar)
    os << "<line x1=\"" << m << "\" y1=\"" << Y(*r.ell_bar) << "\" x2=\"" << w - m << "\" y2=\"" << Y(*r.ell_bar)
       << "\" stroke=\"red\" stroke-dasharray=\"6 4\"/>\n";
  for (std::size_t i = 0; i < r.per_orbit.size(); ++i)
    os << "<circle cx=\"" << X(static_cast<double>(i)) << "\" cy=\"" << Y(r.per_orbit[i].magnetic_length)
       << "\" r=\"3\" fill=\"steelblue\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace magsys
