#pragma once

// Experiment configuration: JSON (de)serialisation with validation, the
// canonical form used for hashing, and construction of the surface and field.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "magsys/errors.hpp"
#include "magsys/field.hpp"
#include "magsys/surface.hpp"

namespace magsys {

inline constexpr const char* kToolVersion = "0.1.0";

struct SurfaceSpec {
  std::string kind = "round_sphere";  ///< round_sphere | flat_torus | conformal_torus | hyperbolic_chart
  double radius = 1.0;
  double side_x = 1.0;
  double side_y = 1.0;
  std::string log_factor = "0";  ///< conformal torus: expression for u
  double curvature = -1.0;
};

struct FieldSpec {
  std::string expression = "1";
  std::string csv;  ///< torus grid file; overrides the expression when set
  double scale = 1.0;
};

struct SurveySpec {
  int n1 = 6;
  int n2 = 6;
  int headings = 4;
  double disc_radius = 0.5;
  double dedupe_tol = 1e-5;
  double bracket_low = 0.2;
  double bracket_high = 5.0;
  double period_scale = 0.0;
  int samples = 512;
};

struct ToleranceSpec {
  double newton_tol = 1e-10;
  double closure_tol = 1e-8;
  double rtol = 1e-12;
  double atol = 1e-13;
  double zoll_tol = 1e-4;
  double report_tol = 1e-6;
  double moser_defect_tol = 1e-6;
};

struct ExperimentConfig {
  SurfaceSpec surface;
  FieldSpec field;
  SurveySpec survey;
  ToleranceSpec tolerances;
  int resolution = 256;
  double C = 0.0;             ///< calibration constant for strongness
  unsigned seed = 1;
  int probes = 1000;          ///< forms identity probes
  int gronwall_samples = 100;
  int threads = 0;            ///< 0 = hardware concurrency; does not affect results
  std::string output_dir = "out";
  std::filesystem::path base_dir;  ///< directory of the config file, for relative CSV paths
};

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be a JSON object");
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ParseError("unknown key " + where + "." + it.key());
  }
}

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ParseError(std::string(name) + " must be positive");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  const auto& k = c.surface.kind;
  if (k != "round_sphere" && k != "flat_torus" && k != "conformal_torus" && k != "hyperbolic_chart")
    throw ParseError("surface.kind must be one of round_sphere, flat_torus, conformal_torus, hyperbolic_chart");
  detail::require_positive(c.surface.radius, "surface.radius");
  detail::require_positive(c.surface.side_x, "surface.side_x");
  detail::require_positive(c.surface.side_y, "surface.side_y");
  if (!(c.surface.curvature < 0.0)) throw ParseError("surface.curvature must be negative");
  if (c.resolution < 8 || (c.resolution & (c.resolution - 1)) != 0)
    throw ParseError("resolution must be a power of two >= 8");
  if (c.survey.n1 < 1 || c.survey.n2 < 1 || c.survey.headings < 1) throw ParseError("seed grid sizes must be >= 1");
  if (c.survey.samples < 16) throw ParseError("survey.samples must be >= 16");
  detail::require_positive(c.survey.disc_radius, "survey.disc_radius");
  if (c.survey.disc_radius >= 1.0) throw ParseError("survey.disc_radius must be below 1");
  detail::require_positive(c.survey.dedupe_tol, "survey.dedupe_tol");
  detail::require_positive(c.survey.bracket_low, "survey.bracket_low");
  if (!(c.survey.bracket_high > c.survey.bracket_low)) throw ParseError("survey.bracket_high must exceed bracket_low");
  if (c.survey.period_scale < 0.0) throw ParseError("survey.period_scale must be >= 0");
  const auto& t = c.tolerances;
  for (auto [v, n] : {std::pair{t.newton_tol, "tolerances.newton_tol"}, {t.closure_tol, "tolerances.closure_tol"},
                      {t.rtol, "tolerances.rtol"}, {t.atol, "tolerances.atol"}, {t.zoll_tol, "tolerances.zoll_tol"},
                      {t.report_tol, "tolerances.report_tol"}, {t.moser_defect_tol, "tolerances.moser_defect_tol"}})
    detail::require_positive(v, n);
  if (c.C < 0.0) throw ParseError("C must be >= 0");
  if (c.probes < 1 || c.gronwall_samples < 1) throw ParseError("probes and gronwall_samples must be >= 1");
  if (c.threads < 0) throw ParseError("threads must be >= 0");
  if (!c.field.csv.empty() && k != "flat_torus" && k != "conformal_torus")
    throw ParseError("field.csv is supported on tori only");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["surface"] = {{"kind", c.surface.kind},
                  {"radius", c.surface.radius},
                  {"side_x", c.surface.side_x},
                  {"side_y", c.surface.side_y},
                  {"log_factor", c.surface.log_factor},
                  {"curvature", c.surface.curvature}};
  j["field"] = {{"expression", c.field.expression}, {"csv", c.field.csv}, {"scale", c.field.scale}};
  j["survey"] = {{"n1", c.survey.n1},
                 {"n2", c.survey.n2},
                 {"headings", c.survey.headings},
                 {"disc_radius", c.survey.disc_radius},
                 {"dedupe_tol", c.survey.dedupe_tol},
                 {"bracket_low", c.survey.bracket_low},
                 {"bracket_high", c.survey.bracket_high},
                 {"period_scale", c.survey.period_scale},
                 {"samples", c.survey.samples}};
  const auto& t = c.tolerances;
  j["tolerances"] = {{"newton_tol", t.newton_tol},   {"closure_tol", t.closure_tol}, {"rtol", t.rtol},
                     {"atol", t.atol},               {"zoll_tol", t.zoll_tol},       {"report_tol", t.report_tol},
                     {"moser_defect_tol", t.moser_defect_tol}};
  j["resolution"] = c.resolution;
  j["C"] = c.C;
  j["seed"] = c.seed;
  j["probes"] = c.probes;
  j["gronwall_samples"] = c.gronwall_samples;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  detail::require_object(j, "config");
  detail::reject_unknown(j,
                         {"surface", "field", "survey", "tolerances", "resolution", "C", "seed", "probes",
                          "gronwall_samples", "threads", "output_dir", "description"},
                         "config");
  if (j.contains("surface")) {
    const auto& s = j.at("surface");
    detail::require_object(s, "surface");
    detail::reject_unknown(s, {"kind", "radius", "side_x", "side_y", "log_factor", "curvature"}, "surface");
    detail::read_opt(s, "kind", c.surface.kind, "surface");
    detail::read_opt(s, "radius", c.surface.radius, "surface");
    detail::read_opt(s, "side_x", c.surface.side_x, "surface");
    detail::read_opt(s, "side_y", c.surface.side_y, "surface");
    detail::read_opt(s, "log_factor", c.surface.log_factor, "surface");
    detail::read_opt(s, "curvature", c.surface.curvature, "surface");
  }
  if (j.contains("field")) {
    const auto& f = j.at("field");
    detail::require_object(f, "field");
    detail::reject_unknown(f, {"expression", "csv", "scale"}, "field");
    detail::read_opt(f, "expression", c.field.expression, "field");
    detail::read_opt(f, "csv", c.field.csv, "field");
    detail::read_opt(f, "scale", c.field.scale, "field");
  }
  if (j.contains("survey")) {
    const auto& s = j.at("survey");
    detail::require_object(s, "survey");
    detail::reject_unknown(s,
                           {"n1", "n2", "headings", "disc_radius", "dedupe_tol", "bracket_low", "bracket_high",
                            "period_scale", "samples"},
                           "survey");
    detail::read_opt(s, "n1", c.survey.n1, "survey");
    detail::read_opt(s, "n2", c.survey.n2, "survey");
    detail::read_opt(s, "headings", c.survey.headings, "survey");
    detail::read_opt(s, "disc_radius", c.survey.disc_radius, "survey");
    detail::read_opt(s, "dedupe_tol", c.survey.dedupe_tol, "survey");
    detail::read_opt(s, "bracket_low", c.survey.bracket_low, "survey");
    detail::read_opt(s, "bracket_high", c.survey.bracket_high, "survey");
    detail::read_opt(s, "period_scale", c.survey.period_scale, "survey");
    detail::read_opt(s, "samples", c.survey.samples, "survey");
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::require_object(t, "tolerances");
    detail::reject_unknown(t,
                           {"newton_tol", "closure_tol", "rtol", "atol", "zoll_tol", "report_tol", "moser_defect_tol"},
                           "tolerances");
    auto& o = c.tolerances;
    detail::read_opt(t, "newton_tol", o.newton_tol, "tolerances");
    detail::read_opt(t, "closure_tol", o.closure_tol, "tolerances");
    detail::read_opt(t, "rtol", o.rtol, "tolerances");
    detail::read_opt(t, "atol", o.atol, "tolerances");
    detail::read_opt(t, "zoll_tol", o.zoll_tol, "tolerances");
    detail::read_opt(t, "report_tol", o.report_tol, "tolerances");
    detail::read_opt(t, "moser_defect_tol", o.moser_defect_tol, "tolerances");
  }
  detail::read_opt(j, "resolution", c.resolution, "config");
  detail::read_opt(j, "C", c.C, "config");
  detail::read_opt(j, "seed", c.seed, "config");
  detail::read_opt(j, "probes", c.probes, "config");
  detail::read_opt(j, "gronwall_samples", c.gronwall_samples, "config");
  detail::read_opt(j, "threads", c.threads, "config");
  detail::read_opt(j, "output_dir", c.output_dir, "config");
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j, base_dir);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

/// FNV-1a 64-bit hash of the canonical JSON; threads and output_dir are left
/// out since they do not change results.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("threads");
  j.erase("output_dir");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline Surface make_surface(const ExperimentConfig& c) {
  const auto& s = c.surface;
  if (s.kind == "round_sphere") return Surface::round_sphere(s.radius);
  if (s.kind == "flat_torus") return Surface::flat_torus(s.side_x, s.side_y);
  if (s.kind == "conformal_torus")
    return Surface::conformal_torus(ScalarField::expression(s.log_factor), s.side_x, s.side_y, c.resolution);
  return Surface::hyperbolic_chart(s.curvature);
}

inline ScalarField make_field(const ExperimentConfig& c) {
  ScalarField f;
  if (!c.field.csv.empty()) {
    const std::filesystem::path p = std::filesystem::path(c.field.csv).is_absolute() ? std::filesystem::path(c.field.csv)
                                                                                      : c.base_dir / c.field.csv;
    std::ifstream in(p);
    if (!in) throw ParseError("cannot open field grid " + p.string());
    f = ScalarField::from_grid(read_grid_csv(in, c.surface.side_x, c.surface.side_y));
  } else {
    f = ScalarField::expression(c.field.expression);
  }
  return c.field.scale == 1.0 ? f : f.scaled(c.field.scale);
}

}  // namespace magsys
