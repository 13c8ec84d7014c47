#pragma once

// Subcommands of the experiment driver.  Each writes JSON reports (plus CSV or
// SVG where relevant) into the output directory and returns an exit code:
// 0 success, 1 invalid input or violated precondition, 2 empty orbit set.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "magsys/config.hpp"
#include "magsys/forms.hpp"
#include "magsys/normalize.hpp"
#include "magsys/orbit.hpp"
#include "magsys/report.hpp"
#include "magsys/sysdia.hpp"

namespace magsys {

enum ExitCode { kExitOk = 0, kExitError = 1, kExitEmpty = 2 };

struct CommandOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<double> C;
  std::optional<int> threads;
  bool verify = false;  ///< survey: also compute the verdict
  bool svg = false;     ///< verify: write a plot
};

struct CommandContext {
  ExperimentConfig config;
  CommandOptions options;
  std::filesystem::path out;
  std::ostream& log;
  Surface surface;
  ScalarField field;
};

namespace detail {

inline SurveyOptions survey_options(const ExperimentConfig& c) {
  SurveyOptions o;
  o.orbit.integrator.rtol = c.tolerances.rtol;
  o.orbit.integrator.atol = c.tolerances.atol;
  o.orbit.newton_tol = c.tolerances.newton_tol;
  o.orbit.closure_tol = c.tolerances.closure_tol;
  o.orbit.samples = c.survey.samples;
  o.dedupe_tol = c.survey.dedupe_tol;
  o.threads = c.threads;
  o.bracket_low = c.survey.bracket_low;
  o.bracket_high = c.survey.bracket_high;
  o.period_scale = c.survey.period_scale;
  return o;
}

inline SurveyResult run_survey(const CommandContext& ctx) {
  const auto& s = ctx.config.survey;
  const auto seeds = seed_grid(ctx.surface, {s.n1, s.n2, s.headings, s.disc_radius});
  return survey(ctx.surface, ctx.field, seeds, survey_options(ctx.config));
}

inline VerdictOptions verdict_options(const ExperimentConfig& c) {
  VerdictOptions v;
  v.zoll_tol = c.tolerances.zoll_tol;
  v.report_tol = c.tolerances.report_tol;
  v.resolution = c.resolution;
  return v;
}

/// The verdict needs a real average length; refuse early on tori with f_avg <= 0.
inline void require_verifiable(const CommandContext& ctx) {
  if (!ctx.surface.is_compact())
    throw UnsupportedOperation("systolic verdicts need a compact surface; the hyperbolic chart is local only");
  if (ctx.surface.is_torus()) {
    const double fa = field_average(ctx.surface, ctx.field, ctx.config.resolution);
    if (!(fa > 0.0))
      throw PreconditionError("refusing to verify: average length is real only when f_avg > 0 on the torus (f_avg = " +
                              std::to_string(fa) + ")");
  }
}

inline SysDiaReport run_verdict(const CommandContext& ctx, const SurveyResult& sr) {
  SysDiaReport rep = verdict(ctx.surface, ctx.field, sr.orbits, verdict_options(ctx.config));
  rep.seeds = sr.seeds;
  return rep;
}

}  // namespace detail

inline int cmd_survey(CommandContext& ctx) {
  if (ctx.options.verify) detail::require_verifiable(ctx);
  const SurveyResult sr = detail::run_survey(ctx);
  json j = report_header("survey", ctx.config);
  j["survey"] = survey_json(sr);
  json list = json::array();
  for (std::size_t i = 0; i < sr.orbits.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "orbit_%03zu", i);
    json oj = orbit_json(sr.orbits[i]);
    oj["file"] = std::string(name) + ".csv";
    json single = report_header("survey", ctx.config);
    single["orbit"] = oj;
    write_json(ctx.out / "orbits" / (std::string(name) + ".json"), single);
    std::filesystem::create_directories(ctx.out / "orbits");
    std::ofstream csv(ctx.out / "orbits" / (std::string(name) + ".csv"));
    write_orbit_csv(csv, ctx.surface, ctx.field, sr.orbits[i]);
    list.push_back(oj);
  }
  j["orbits"] = list;
  if (ctx.options.verify && !sr.orbits.empty()) j["sysdia"] = sysdia_json(detail::run_verdict(ctx, sr));
  write_json(ctx.out / "survey.json", j);
  ctx.log << sr.orbits.size() << " orbits from " << sr.seeds << " seeds (" << sr.converged << " converged)\n";
  if (sr.orbits.empty()) {
    ctx.log << "empty orbit set\n";
    return kExitEmpty;
  }
  return kExitOk;
}

inline int cmd_verify(CommandContext& ctx) {
  detail::require_verifiable(ctx);
  const SurveyResult sr = detail::run_survey(ctx);
  const SysDiaReport rep = detail::run_verdict(ctx, sr);
  json j = report_header("verify", ctx.config);
  j["survey"] = survey_json(sr);
  j["sysdia"] = sysdia_json(rep);
  write_json(ctx.out / "verify.json", j);
  if (ctx.options.svg) {
    std::ofstream svg(ctx.out / "verify.svg");
    svg << verdict_svg(rep);
  }
  print_verdict_table(ctx.log, rep);
  return rep.verdict == Verdict::EmptyOrbitSet ? kExitEmpty : kExitOk;
}

inline int cmd_zoll(CommandContext& ctx) {
  detail::require_verifiable(ctx);
  const SurveyResult sr = detail::run_survey(ctx);
  const SysDiaReport rep = detail::run_verdict(ctx, sr);
  json j = report_header("zoll", ctx.config);
  j["survey"] = survey_json(sr);
  const bool empty = rep.per_orbit.empty();
  j["zoll"] = {{"status", rep.zoll_flag ? "Zoll-consistent" : "not Zoll-consistent"},
               {"zoll_consistent", rep.zoll_flag},
               {"spread", empty ? json(nullptr) : json(rep.ell_max - rep.ell_min)},
               {"ell_bar", detail::opt_json(rep.ell_bar)},
               {"ell_min", empty ? json(nullptr) : json(rep.ell_min)},
               {"ell_max", empty ? json(nullptr) : json(rep.ell_max)},
               {"zoll_tol", rep.zoll_tol},
               {"orbits", rep.per_orbit.size()},
               {"seeds", rep.seeds},
               {"note", "finitely many orbits can be Zoll-consistent; they cannot prove the flow is Zoll"}};
  write_json(ctx.out / "zoll.json", j);
  ctx.log << (rep.zoll_flag ? "Zoll-consistent" : "not Zoll-consistent") << " (" << rep.per_orbit.size()
          << " orbits)\n";
  return empty ? kExitEmpty : kExitOk;
}

inline int cmd_normalize(CommandContext& ctx) {
  MoserOptions mo;
  mo.resolution = ctx.config.resolution;
  mo.threads = ctx.config.threads;
  const MoserResult m = moser_normalize(ctx.surface, ctx.field, mo);
  json j = report_header("normalize", ctx.config);
  j["moser"] = moser_json(m, ctx.config.tolerances.moser_defect_tol);
  write_json(ctx.out / "normalize.json", j);
  if (ctx.surface.is_torus()) {
    std::ofstream csv(ctx.out / "displacement.csv");
    write_displacement_csv(csv, m);
  }
  ctx.log << "pullback defect " << m.pullback_defect << (m.identity ? " (identity)" : "") << '\n';
  return kExitOk;
}

inline int cmd_strongness(CommandContext& ctx) {
  const double C = ctx.options.C.value_or(ctx.config.C);
  if (C < 0.0) throw PreconditionError("C must be >= 0");
  const StrongnessReport r = strongness(ctx.surface, ctx.field, C, ctx.config.resolution);
  json j = report_header("strongness", ctx.config);
  j["strongness"] = strongness_json(r);
  GronwallOptions go;
  go.samples = ctx.config.gronwall_samples;
  go.seed = ctx.config.seed;
  j["gronwall"] = gronwall_json(gronwall_witness(ctx.surface, ctx.field, go));
  write_json(ctx.out / "strongness.json", j);
  ctx.log << "threshold(C=" << C << ") = " << r.threshold() << ", f_avg = " << r.f_avg
          << (r.is_strong() ? ", strong" : ", not strong") << ", s* = " << r.minimal_rescaling() << '\n';
  return kExitOk;
}

inline int cmd_forms(CommandContext& ctx) {
  const auto& c = ctx.config;
  json checks = json::array();
  double worst = 0.0;
  auto add = [&](const json& check) {
    worst = std::max(worst, check.at("residual").get<double>());
    checks.push_back(check);
  };
  add(identity_json(check_eta_normalisation(ctx.surface, c.probes, c.seed)));
  add(identity_json(check_deta_curvature(ctx.surface, c.probes, c.seed + 1)));
  add(identity_json(check_contact_identity(ctx.surface, c.probes, c.seed + 2)));
  std::vector<std::string> skipped;
  const bool sphere_const = ctx.surface.is_sphere() && ctx.field.is_constant();
  const bool torus_pos = ctx.surface.is_torus() && field_average(ctx.surface, ctx.field, c.resolution) > 0.0;
  if (sphere_const || torus_pos) {
    add(identity_json(check_alpha_f_primitive(ctx.surface, ctx.field, std::min(c.probes, 200), c.seed + 3)));
    if (sphere_const) {
      add(identity_json(sphere_volume_probe(ctx.surface, ctx.field, std::min(c.probes, 200), c.seed + 4)));
      add(identity_json("Vol(Omega_infty) = P(fibre action)", volume_infty(ctx.surface),
                        zoll_polynomial(ctx.surface, fibre_action_infty(ctx.surface))));
    } else {
      add(identity_json("Vol((1/f_avg) alpha_f) = 0", torus_normalised_volume(ctx.surface, ctx.field), 0.0));
    }
    const SurveyResult sr = detail::run_survey(ctx);
    const double fa = field_average(ctx.surface, ctx.field, c.resolution);
    for (std::size_t i = 0; i < sr.orbits.size(); ++i) {
      const ActionCheck a = orbit_action(ctx.surface, ctx.field, sr.orbits[i]);
      json aj = identity_json("action identity (orbit " + std::to_string(i) + ")", a.action, a.closed_form);
      aj["line_integral"] = a.line_integral;
      aj["magnetic_length"] = a.magnetic_length;
      add(aj);
      if (sphere_const)
        add(identity_json("Zoll equality P(A) = Vol (orbit " + std::to_string(i) + ")",
                          zoll_polynomial(ctx.surface, a.action), volume_closed_form(ctx.surface, fa)));
    }
    if (sr.orbits.empty()) skipped.push_back("action identities: empty orbit set");
  } else {
    skipped.push_back("alpha_f identities need constant f on the sphere or f_avg > 0 on a torus");
  }
  json j = report_header("forms", ctx.config);
  j["checks"] = checks;
  j["max_residual"] = worst;
  j["skipped"] = skipped;
  write_json(ctx.out / "forms.json", j);
  ctx.log << checks.size() << " identity checks, max residual " << worst << '\n';
  return kExitOk;
}

inline const std::map<std::string, std::function<int(CommandContext&)>>& command_table() {
  static const std::map<std::string, std::function<int(CommandContext&)>> table{
      {"survey", cmd_survey}, {"verify", cmd_verify},         {"zoll", cmd_zoll},
      {"normalize", cmd_normalize}, {"strongness", cmd_strongness}, {"forms", cmd_forms}};
  return table;
}

/// Runs a subcommand, mapping library errors to exit code 1 with a diagnostic.
inline int run_command(const std::string& name, ExperimentConfig config, const CommandOptions& options,
                       std::ostream& log, std::ostream& err) {
  const auto it = command_table().find(name);
  if (it == command_table().end()) {
    err << "error: unknown command '" << name << "'\n";
    return kExitError;
  }
  try {
    if (options.threads) config.threads = *options.threads;
    validate(config);
    std::filesystem::path out = options.out_dir ? *options.out_dir : std::filesystem::path(config.output_dir);
    if (out.is_relative() && !options.out_dir) out = config.base_dir / out;
    std::filesystem::create_directories(out);
    CommandContext ctx{config, options, out, log, make_surface(config), make_field(config)};
    return it->second(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

inline int run_command_file(const std::string& name, const std::filesystem::path& config_path,
                            const CommandOptions& options, std::ostream& log, std::ostream& err) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return run_command(name, c, options, log, err);
}

}  // namespace magsys
