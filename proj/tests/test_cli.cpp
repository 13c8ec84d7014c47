#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "magsys/commands.hpp"

using namespace magsys;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("magsys_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Outcome {
  int code;
  std::string log;
  std::string err;
};

Outcome run(const std::string& cmd, const ExperimentConfig& c, CommandOptions o) {
  std::ostringstream log, err;
  const int code = run_command(cmd, c, o, log, err);
  return {code, log.str(), err.str()};
}

ExperimentConfig sphere_config() {
  ExperimentConfig c;
  c.survey.n1 = 2;
  c.survey.n2 = 2;
  c.survey.headings = 2;
  return c;
}

}  // namespace

TEST(Config, RoundTripAndHash) {
  ExperimentConfig c;
  c.surface.kind = "conformal_torus";
  c.surface.log_factor = "0.1*sin(2*pi*x)";
  c.field.expression = "2 + cos(2*pi*y)";
  c.survey.n1 = 9;
  c.tolerances.zoll_tol = 3e-5;
  c.C = 0.25;
  const json j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
  ExperimentConfig t = c;
  t.threads = 3;
  t.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(t), config_hash(c));
  t.C = 0.5;
  EXPECT_NE(config_hash(t), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, Validation) {
  EXPECT_THROW(parse_config("{\"resolution\": 100}"), ParseError);
  EXPECT_THROW(parse_config("{\"tolerances\": {\"zoll_tol\": 0}}"), ParseError);
  EXPECT_THROW(parse_config("{\"surface\": {\"kind\": \"klein_bottle\"}}"), ParseError);
  EXPECT_THROW(parse_config("{\"surfce\": {}}"), ParseError);
  EXPECT_THROW(parse_config("{\"survey\": {\"n1\": \"six\"}}"), ParseError);
  EXPECT_THROW(parse_config("[1, 2]"), ParseError);
  EXPECT_THROW(parse_config("{"), ParseError);
  EXPECT_THROW(parse_config("{\"field\": {\"csv\": \"g.csv\"}}"), ParseError);  // sphere
  EXPECT_NO_THROW(parse_config("{\"description\": \"defaults\"}"));
}

TEST(Config, CsvFieldOnTorus) {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  GridSamples g{16, 16, 1.0, 1.0, {}};
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) g.values.push_back(2.0 + std::sin(2 * std::numbers::pi * g.x(i)));
  {
    std::ofstream out(dir / "grid.csv");
    write_grid_csv(out, g);
  }
  {
    std::ofstream out(dir / "cfg.json");
    out << R"({"surface": {"kind": "flat_torus"}, "field": {"csv": "grid.csv"}})";
  }
  const ExperimentConfig c = load_config(dir / "cfg.json");
  const ScalarField f = make_field(c);
  EXPECT_NEAR(f.evaluate<double>(0.3, 0.1, 0.0), 2.0 + std::sin(2 * std::numbers::pi * 0.3), 1e-12);
}

TEST(Cli, SurveySphereWritesOrbitFiles) {
  const fs::path out = scratch("survey");
  CommandOptions o;
  o.out_dir = out;
  const Outcome r = run("survey", sphere_config(), o);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = read_json(out / "survey.json");
  EXPECT_EQ(j.at("tool"), "magsys");
  EXPECT_EQ(j.at("version"), kToolVersion);
  EXPECT_EQ(j.at("config_hash"), config_hash(sphere_config()));
  ASSERT_GE(j.at("orbits").size(), 1u);
  for (const auto& o : j.at("orbits")) EXPECT_NEAR(o.at("period").get<double>(), std::numbers::pi * std::sqrt(2.0), 1e-6);
  EXPECT_TRUE(fs::exists(out / "orbits" / "orbit_000.csv"));
  const json single = read_json(out / "orbits" / "orbit_000.json");
  for (const char* k : {"period", "turning_number", "prime", "in_h_infty", "residual"})
    EXPECT_TRUE(single.at("orbit").contains(k)) << k;
  EXPECT_EQ(slurp(out / "orbits" / "orbit_000.csv").substr(0, 6), "t,x,y,");
}

TEST(Cli, ExitCodes) {
  // Malformed config file.
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.json");
    out << "{\"surface\": ";
  }
  std::ostringstream log, err;
  EXPECT_EQ(run_command_file("survey", dir / "bad.json", {}, log, err), kExitError);
  EXPECT_NE(err.str().find("not valid JSON"), std::string::npos);

  CommandOptions o;
  o.out_dir = dir;
  ExperimentConfig neg;
  neg.surface.kind = "flat_torus";
  neg.field.expression = "-1 + 0.2*sin(2*pi*x)";
  Outcome r = run("verify", neg, o);
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("f_avg > 0"), std::string::npos);
  o.verify = true;
  EXPECT_EQ(run("survey", neg, o).code, kExitError);
  o.verify = false;

  ExperimentConfig hyp;
  hyp.surface.kind = "hyperbolic_chart";
  hyp.field.expression = "2";
  EXPECT_EQ(run("verify", hyp, o).code, kExitError);

  // Geodesics of the flat torus never close up contractibly: empty orbit set.
  ExperimentConfig flat;
  flat.surface.kind = "flat_torus";
  flat.field.expression = "0";
  flat.survey = {1, 1, 2, 0.5, 1e-5, 0.2, 5.0, 0.0, 512};
  EXPECT_EQ(run("survey", flat, o).code, kExitEmpty);
  EXPECT_EQ(run("nonsense", flat, o).code, kExitError);
}

TEST(Cli, VerifyZollStrongness) {
  CommandOptions o;
  o.out_dir = scratch("verify");
  ExperimentConfig t;
  t.surface.kind = "flat_torus";
  t.field.expression = "2 + 0.1*sin(2*pi*x)";
  t.survey.n1 = 6;
  t.survey.n2 = 1;
  t.survey.headings = 2;
  o.svg = true;
  Outcome r = run("verify", t, o);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  json j = read_json(*o.out_dir / "verify.json");
  EXPECT_EQ(j.at("sysdia").at("verdict"), "holds");
  EXPECT_FALSE(j.at("sysdia").at("zoll_flag").get<bool>());
  EXPECT_NEAR(j.at("sysdia").at("ell_bar").get<double>(), std::numbers::pi / 2, 1e-12);
  EXPECT_NE(slurp(*o.out_dir / "verify.svg").find("<svg"), std::string::npos);
  EXPECT_NE(r.log.find("verdict: holds"), std::string::npos);

  o.out_dir = scratch("zoll");
  r = run("zoll", sphere_config(), o);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_json(*o.out_dir / "zoll.json").at("zoll").at("status"), "Zoll-consistent");

  o.out_dir = scratch("strong");
  ExperimentConfig one;
  one.surface.kind = "flat_torus";
  one.gronwall_samples = 20;
  o.C = 0.0;
  r = run("strongness", one, o);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  j = read_json(*o.out_dir / "strongness.json");
  EXPECT_DOUBLE_EQ(j.at("strongness").at("s_star").get<double>(), 2.0);
  EXPECT_EQ(j.at("gronwall").at("first_order_violations"), 0);
}

TEST(Cli, NormalizeAndFormsAreDeterministic) {
  ExperimentConfig t;
  t.surface.kind = "flat_torus";
  t.field.expression = "2*(1 + 0.2*cos(2*pi*x))";
  t.resolution = 32;
  t.probes = 50;
  t.survey.n1 = 2;
  t.survey.n2 = 1;
  t.survey.headings = 2;
  CommandOptions a, b;
  a.out_dir = scratch("det_a");
  b.out_dir = scratch("det_b");
  b.threads = 1;
  for (const char* cmd : {"normalize", "forms"}) {
    ASSERT_EQ(run(cmd, t, a).code, kExitOk);
    ASSERT_EQ(run(cmd, t, b).code, kExitOk);
    const std::string file = std::string(cmd) + ".json";
    EXPECT_EQ(slurp(*a.out_dir / file), slurp(*b.out_dir / file)) << cmd;
  }
  EXPECT_EQ(slurp(*a.out_dir / "displacement.csv"), slurp(*b.out_dir / "displacement.csv"));
  const json n = read_json(*a.out_dir / "normalize.json");
  EXPECT_TRUE(n.at("moser").at("within_tol").get<bool>());
  const json f = read_json(*a.out_dir / "forms.json");
  EXPECT_LT(f.at("max_residual").get<double>(), 1e-5);
  EXPECT_GE(f.at("checks").size(), 5u);
}
