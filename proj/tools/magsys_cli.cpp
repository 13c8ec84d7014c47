#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "magsys/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Magnetic systems on surfaces: orbit surveys, systolic verdicts, normalisation and form identities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", magsys::kToolVersion);

  struct Sub {
    std::string config;
    std::string out;
    int threads = -1;
    double C = -1.0;
    bool verify = false;
    bool svg = false;
  };
  static const std::pair<const char*, const char*> kCommands[] = {
      {"survey", "find prime closed orbits in the fibre class and write CSV + JSON per orbit"},
      {"verify", "survey, then compare l_min, l_bar and l_max"},
      {"zoll", "report whether surveyed magnetic lengths are Zoll-consistent"},
      {"normalize", "Moser map pulling f/f_avg mu back to mu"},
      {"strongness", "strongness threshold, minimal rescaling and Gronwall witness"},
      {"forms", "identity checks for the one-forms on the unit tangent bundle"}};
  std::map<std::string, Sub> subs;
  for (const auto& [name, help] : kCommands) {
    Sub& s = subs[name];
    CLI::App* sc = app.add_subcommand(name, help);
    sc->add_option("config", s.config, "experiment config (JSON)")->required();
    sc->add_option("-o,--out", s.out, "output directory (overrides output_dir)");
    sc->add_option("-j,--threads", s.threads, "worker threads (0 = all cores); results do not depend on it")
        ->check(CLI::NonNegativeNumber);
    if (std::string(name) == "survey") sc->add_flag("--verify", s.verify, "also compute the systolic verdict");
    if (std::string(name) == "verify") sc->add_flag("--svg", s.svg, "write verify.svg");
    if (std::string(name) == "strongness")
      sc->add_option("-C,--calibration", s.C, "calibration constant C (overrides the config)")
          ->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : magsys::kExitError;
  }

  for (auto& [name, s] : subs) {
    if (!app.got_subcommand(name)) continue;
    magsys::CommandOptions opts;
    if (!s.out.empty()) opts.out_dir = s.out;
    if (s.threads >= 0) opts.threads = s.threads;
    if (s.C >= 0.0) opts.C = s.C;
    opts.verify = s.verify;
    opts.svg = s.svg;
    return magsys::run_command_file(name, s.config, opts, std::cout, std::cerr);
  }
  return magsys::kExitError;
}
