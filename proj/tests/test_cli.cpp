#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "latentdyad/cli.hpp"
#include "latentdyad/draw_io.hpp"
#include "latentdyad/error.hpp"

using namespace latentdyad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("latentdyad_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int run(const std::string& command, const CliOverrides& o) {
  std::ostringstream log, err;
  const int code = run_command(command, o, log, err);
  return code;
}

const char* kTwoClusters = R"({
  "seed": 5,
  "generator": {
    "clusters": [{"center": [0, 0], "size": 10}, {"center": [3, 0], "size": 10}],
    "p_within": 0.9, "p_between": 0.01,
    "xi": {"beta1mu": 0.0, "beta2mu": 0.0, "beta3mu": 1.0, "v": 0.5},
    "weeks": 26
  }
})";

}  // namespace

TEST_CASE("config parsing and overrides") {
  const auto dir = scratch("config");
  write(dir / "c.json", R"({"variant": "hmcr", "seed": 3, "sampler": {"sweeps": 50, "burn_in": 10}})");
  CliOverrides o;
  o.config = (dir / "c.json").string();
  auto c = resolve_config(o);
  CHECK(c.sampler.variant == ModelVariant::Hmcr);
  CHECK(c.sampler.seed == 3);
  CHECK(c.sampler.sweeps == 50);
  o.variant = "baseline";
  o.seed = 9;
  o.fixed_alpha = 2.5;
  o.q_percents = {0.5};
  o.boundary_week = 13;
  c = resolve_config(o);
  CHECK(c.sampler.variant == ModelVariant::Baseline);
  CHECK(c.sampler.seed == 9);
  CHECK(c.hyper.fixed_alpha == 2.5);
  CHECK(c.predict.q_percents == std::vector<double>{0.5});
  CHECK(c.boundary_week == 13);

  // The echoed config resolves to the same settings.
  const auto again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());

  write(dir / "bad.json", R"({"sweeps": 10})");
  o = {};
  o.config = (dir / "bad.json").string();
  CHECK_THROWS_AS(resolve_config(o), ConfigError);
  write(dir / "bad2.json", R"({"sampler": {"dim": 1}})");
  o.config = (dir / "bad2.json").string();
  CHECK_THROWS_AS(resolve_config(o), ConfigError);
  write(dir / "bad3.json", "{not json");
  o.config = (dir / "bad3.json").string();
  CHECK_THROWS_AS(resolve_config(o), ConfigError);
  o = {};
  o.variant = "fancy";
  CHECK_THROWS_AS(resolve_config(o), ConfigError);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  CliOverrides o;
  o.out = (dir / "out").string();
  o.input = (dir / "missing.csv").string();
  CHECK(run("fit", o) == kExitConfig);
  write(dir / "bad.csv", "caller_id,callee_id,week\na,b,notaweek\n");
  o.input = (dir / "bad.csv").string();
  CHECK(run("fit", o) == kExitData);
  write(dir / "ok.csv", "caller_id,callee_id,week\na,b,0\nb,c,3\n");
  o.input = (dir / "ok.csv").string();
  o.boundary_week = 2;
  CHECK(run("ppc", o) == kExitConfig);  // no draw file
  CHECK(run("unknown", o) == kExitConfig);
}

TEST_CASE("simulate: two clusters, determinism, truth file") {
  const auto dir = scratch("simulate");
  write(dir / "c.json", kTwoClusters);
  CliOverrides o;
  o.config = (dir / "c.json").string();
  o.out = (dir / "a").string();
  REQUIRE(run("simulate", o) == 0);
  o.out = (dir / "b").string();
  REQUIRE(run("simulate", o) == 0);
  CHECK(slurp(dir / "a" / "records.csv") == slurp(dir / "b" / "records.csv"));
  CHECK(fs::exists(dir / "a" / "truth.json"));
  CHECK(fs::exists(dir / "a" / "truth_dyads.csv"));
  CHECK(fs::exists(dir / "a" / "config.json"));

  // Within-cluster pairs 2 * 45 = 90, each nonempty w.p. ~0.9 * (1 - (a/(a+T))^r).
  Rng rng(5);
  const auto spec = RunConfig::from_json(nlohmann::json::parse(kTwoClusters)).generator;
  std::size_t within = 0, across = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto sim = simulate_records(spec, rng);
    for (const auto& [key, y] : sim.table.nonempty()) ((key.i < 10) == (key.j < 10) ? within : across) += 1;
  }
  const double r = 1.0 / 0.5, a = 1.0 / 0.5;
  const double open_nonempty = 1.0 - std::pow(a / (a + 26.0), r);
  CHECK(within / 50.0 == doctest::Approx(90 * 0.9 * open_nonempty).epsilon(0.05));
  CHECK(across / 50.0 < 100 * 0.05);
}

TEST_CASE("simulate: p = 0 gives an empty body") {
  const auto dir = scratch("simulate_empty");
  write(dir / "c.json", R"({"generator": {"clusters": [{"center": [0, 0], "size": 5}, {"center": [1, 0], "size": 5}],
                            "p_within": 0, "p_between": 0}})");
  CliOverrides o;
  o.config = (dir / "c.json").string();
  o.out = dir.string();
  REQUIRE(run("simulate", o) == 0);
  CHECK(slurp(dir / "records.csv") == "caller_id,callee_id,week\n");
}

TEST_CASE("fit, stats, ppc, predict, export, scaling on a small network") {
  const auto dir = scratch("pipeline");
  write(dir / "c.json", kTwoClusters);
  CliOverrides o;
  o.config = (dir / "c.json").string();
  o.out = (dir / "sim").string();
  REQUIRE(run("simulate", o) == 0);

  write(dir / "fit.json", R"({"sampler": {"sweeps": 200, "burn_in": 100, "thin": 2},
                              "ppc": {"replicates": 20}, "scaling": {"alphas": [1.0], "sizes": [10]}})");
  o = {};
  o.config = (dir / "fit.json").string();
  o.input = (dir / "sim" / "records.csv").string();
  o.out = (dir / "fit").string();
  o.boundary_week = 13;
  o.seed = 3;
  REQUIRE(run("fit", o) == 0);
  const auto draws_a = slurp(dir / "fit" / "draws.jsonl");
  CHECK(read_draw_file((dir / "fit" / "draws.jsonl").string()).size() == 50);
  CHECK(fs::exists(dir / "fit" / "summary.json"));
  REQUIRE(run("fit", o) == 0);
  CHECK(slurp(dir / "fit" / "draws.jsonl") == draws_a);

  REQUIRE(run("stats", o) == 0);
  CHECK(fs::exists(dir / "fit" / "stats.json"));
  REQUIRE(run("ppc", o) == 0);
  CHECK(fs::exists(dir / "fit" / "ppc.csv"));
  REQUIRE(run("predict", o) == 0);
  const auto lift = nlohmann::json::parse(slurp(dir / "fit" / "lift.json"));
  CHECK(lift["rows"].size() == 5 * 3);
  CHECK(fs::exists(dir / "fit" / "scores.csv"));

  REQUIRE(run("export", o) == 0);
  const auto coords = slurp(dir / "fit" / "coordinates.csv");
  CHECK(coords.rfind("individual,x1,x2,site\n", 0) == 0);
  REQUIRE(run("scaling", o) == 0);
  CHECK(fs::exists(dir / "fit" / "scaling.csv"));
}

TEST_CASE("export: shared coordinates, jitter bounds, SVG dimension check") {
  const auto dir = scratch("export");
  PosteriorDraw d;
  d.sweep = 7;
  d.loglik = -10.0;
  d.sites = {LatentCoordinate{0.0, 0.0}, LatentCoordinate{1.0, 2.0}};
  d.occupancy = {3, 2};
  d.assignment = {0, 0, 0, 1, 1};
  auto low = d;
  low.sweep = 8;
  low.loglik = -20.0;
  write_draw_file((dir / "draws.jsonl").string(), {d, low});

  auto read_rows = [&](const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::array<double, 2>> rows;
    while (std::getline(in, line)) {
      std::istringstream s(line);
      std::string id, x, y, site;
      std::getline(s, id, ',');
      std::getline(s, x, ',');
      std::getline(s, y, ',');
      rows.push_back({std::stod(x), std::stod(y)});
    }
    return rows;
  };

  write(dir / "plain.json", R"({"export": {"svg": true}})");
  CliOverrides o;
  o.config = (dir / "plain.json").string();
  o.out = (dir / "plain").string();
  RunConfig rc = resolve_config(o);
  rc.draws = (dir / "draws.jsonl").string();
  std::ostringstream log;
  REQUIRE(cmd_export(rc, log) == 0);
  CHECK(log.str().find("sweep 7") != std::string::npos);
  auto rows = read_rows(dir / "plain" / "coordinates.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == rows[1]);
  CHECK(rows[1] == rows[2]);
  CHECK(fs::exists(dir / "plain" / "coordinates.svg"));

  rc.export_options.jitter = true;
  rc.out = (dir / "jitter").string();
  REQUIRE(cmd_export(rc, log) == 0);
  rows = read_rows(dir / "jitter" / "coordinates.csv");
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& site = d.sites[d.assignment[i]];
    CHECK(std::fabs(rows[i][0] - site[0]) <= 0.03);
    CHECK(std::fabs(rows[i][1] - site[1]) <= 0.03);
  }
  CHECK(rows[0] != rows[1]);

  auto d3 = d;
  d3.sites = {LatentCoordinate{0.0, 0.0, 0.0}, LatentCoordinate{1.0, 2.0, 3.0}};
  write_draw_file((dir / "draws3.jsonl").string(), {d3});
  rc.draws = (dir / "draws3.jsonl").string();
  CHECK_THROWS_AS(cmd_export(rc, log), ConfigError);
  rc.export_options.svg = false;
  CHECK_NOTHROW(cmd_export(rc, log));
}
