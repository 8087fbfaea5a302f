#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dirw/cli.hpp"
#include "dirw/config.hpp"
#include "dirw/runner.hpp"

using namespace dirw;
namespace fs = std::filesystem;

TEST_CASE("config files parse into a run configuration") {
  const std::string text = R"(
# desk run
[problem]
kind = isolated-blob
phantom_seed = 9

[run]
approach = mesh-mo
population = 40
generations = 12
repetitions = 2
base_seed = 555
sample_count = 800

[model]
grid_points = 6 6
mesh_points = 30

[output]
dir = cfg_out
)";
  const RunConfig cfg = RunConfig::from_config(parse_config_text(text));
  CHECK(cfg.approach == "mesh-mo");
  CHECK(cfg.population == 40);
  CHECK(cfg.generations == 12);
  CHECK(cfg.repetitions == 2);
  CHECK(cfg.base_seed == 555);
  CHECK(cfg.sample_count == 800);
  CHECK(cfg.grid_points[0] == 6);
  CHECK(cfg.mesh_points == 30);
  CHECK(cfg.out_dir == "cfg_out");
  CHECK(cfg.phantom_seed == 9);
}

TEST_CASE("paper defaults apply when the population is unset") {
  RunConfig cfg;
  cfg.phantom_kind = "isolated-blob";
  cfg.approach = "bspline-mo";
  CHECK(cfg.effective_population() == 200);
  cfg.approach = "mesh-mo";
  CHECK(cfg.effective_population() == 700);
  cfg.approach = "bspline-baseline";
  CHECK(cfg.effective_population() == 100);
  CHECK(cfg.generations == 200);
  CHECK(cfg.archive_capacity == 1000);
  CHECK(cfg.clusters == 10);
  CHECK(cfg.grid_points == std::array<int, 3>{7, 7, 7});
  CHECK(cfg.mesh_points == 170);
  CHECK(cfg.inner.sample_count == 5000);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(
      RunConfig::from_config(parse_config_text("[run]\nbogus = 1\n")),
      ConfigError);
  CHECK_THROWS_AS(
      RunConfig::from_config(parse_config_text("[nope]\nx = 1\n")),
      ConfigError);
}

TEST_CASE("bad approach names are a config error") {
  RunConfig cfg;
  cfg.phantom_kind = "isolated-blob";
  cfg.approach = "simulated-annealing";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("cli exit codes distinguish config and i/o errors") {
  CHECK(run_cli({"register"}) == 2);                             // no config
  CHECK(run_cli({"register", "--preset", "desk-blob"}) == 2);    // no approach
  CHECK(run_cli({"phantom", "--spec", "does_not_exist.cfg"}) == 3);
  CHECK(run_cli({"analyze", "--problem", "nope", "also_nope"}) == 3);
}

TEST_CASE("phantom, register, analyze round trip on a tiny run") {
  const std::string base = "cli_e2e";
  fs::remove_all(base);

  CHECK(run_cli({"phantom", "--out", base + "/ph", "--seed", "3"}) == 0);
  CHECK(fs::exists(base + "/ph/isolated-blob_source.img"));
  CHECK(fs::exists(base + "/ph/isolated-blob_target.img"));

  CHECK(run_cli({"register", "--preset", "desk-blob", "--approach",
                 "bspline-mo", "--population", "10", "--generations", "1",
                 "--repetitions", "2", "--sample-count", "300",
                 "--deterministic", "--out", base + "/run"}) == 0);
  CHECK(fs::exists(base + "/run/rep_000/manifest.json"));
  CHECK(fs::exists(base + "/run/rep_001/manifest.json"));
  CHECK(fs::exists(base + "/run/problem_meta.json"));

  CHECK(run_cli({"analyze", "--problem", base + "/run", "--out",
                 base + "/report", "--samples", "300", base + "/run"}) == 0);
  CHECK(fs::exists(base + "/report/fronts.csv"));
  CHECK(fs::exists(base + "/report/hypervolume.csv"));
  CHECK(fs::exists(base + "/report/fronts.svg"));
  CHECK(fs::exists(base + "/report/highlights.json"));

  CHECK(run_cli({"reevaluate", "--problem", base + "/run", "--archive",
                 base + "/run/rep_000", "--samples", "300", "--out",
                 base + "/reeval.csv"}) == 0);
  CHECK(fs::exists(base + "/reeval.csv"));

  // hv on a hand-written front reproduces the worked example
  {
    std::ofstream os(base + "/front.csv");
    os << "1,3\n2,2\n3,1\n";
  }
  CHECK(run_cli({"hv", "--front", base + "/front.csv", "--ref", "4", "4"}) == 0);

  fs::remove_all(base);
}

TEST_CASE("repeated deterministic runs produce identical manifests") {
  const std::string base = "cli_det";
  fs::remove_all(base);
  const std::vector<std::string> args{
      "register", "--preset", "desk-blob", "--approach", "mesh-mo",
      "--population", "12", "--generations", "2", "--repetitions", "1",
      "--sample-count", "300", "--deterministic"};
  auto run_with_out = [&](const std::string& out) {
    std::vector<std::string> a = args;
    a.push_back("--out");
    a.push_back(out);
    REQUIRE(run_cli(a) == 0);
    std::ifstream is(out + "/rep_000/manifest.json");
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const std::string m1 = run_with_out(base + "/a");
  const std::string m2 = run_with_out(base + "/b");
  CHECK(m1 == m2);
  CHECK(m1.find("elites") != std::string::npos);
  fs::remove_all(base);
}
