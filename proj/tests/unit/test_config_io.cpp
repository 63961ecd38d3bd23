#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "kepreg/cli.hpp"
#include "kepreg/io.hpp"
#include "support.hpp"

using namespace kepreg;
using doctest::Approx;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const RunConfig d = parse("");
  CHECK(d.dim == Dim::Planar);
  CHECK(d.T == Approx(2 * std::numbers::pi));
  CHECK(d.k_list == std::vector<int>{1});

  const RunConfig c = parse(
      "[run]\ndim = 3\nT = 3.5\nseed = 42\njobs = 2\n"
      "[perturbation]\nname = forced_kepler\ncos1 = 0.3,0,0\n"
      "[manifold]\nk = 1, 2,3\nl = 2\n"
      "[epsilon]\nschedule = 1e-4,1e-3\n"
      "[seed]\npreset = random\nprograde = true\n");
  CHECK(c.dim == Dim::Spatial);
  CHECK(c.T == 3.5);
  CHECK(c.random_seed == 42);
  CHECK(c.jobs == 2);
  CHECK(c.k_list == std::vector<int>{1, 2, 3});
  CHECK(c.l == 2);
  CHECK(c.eps_targets() == std::vector<double>{1e-4, 1e-3});
  CHECK(c.seed.prograde);
  CHECK(c.make_U()->name() == "forced_kepler");
  CHECK(c.forcing().harmonics() == 1);
}

TEST_CASE("config rejects unknown keys, sections and bad values") {
  CHECK_THROWS_AS(parse("[run]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[nonsense]\na = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\ndim = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nT = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nT = 1.0x\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nT = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[manifold]\nk = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[manifold]\nk = 1,2\nl = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[epsilon]\nschedule = 1e-3,1e-4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[perturbation]\nname = forced_kepler\nfoo = 1,0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[perturbation]\nname = nope\n"), ConfigError);
  CHECK_THROWS_AS(parse("[seed]\npreset = spiral\n"), ConfigError);
  CHECK_THROWS_AS(parse("[averaging]\neps = 1e-4,1e-3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\ndim = 2\ndim = 3\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
  CHECK_THROWS_AS(parse_real_list("x", "1,,2"), ConfigError);
  CHECK(parse_int_list("k", " 4 ,5") == std::vector<int>{4, 5});
}

TEST_CASE("config echo round-trips") {
  const RunConfig c = parse("[run]\nT = 0.1\n[epsilon]\neps = 0.3\n[reconstruct]\nmu = 0.1,0.03\n");
  std::string ini;
  std::string section;
  for (const auto& [key, value] : c.echo()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (value.empty()) continue;
    if (s != section) {
      ini += "[" + s + "]\n";
      section = s;
    }
    ini += key.substr(dot + 1) + " = " + value + "\n";
  }
  const RunConfig back = parse(ini);
  CHECK(back.echo() == c.echo());
  CHECK(back.T == 0.1);
  CHECK(back.mu_list == std::vector<double>{0.1, 0.03});
}

TEST_CASE("orbit JSON round trip") {
  const ManifoldSpec spec{2, 2 * std::numbers::pi, Dim::Spatial};
  SeedParams sp;
  sp.alpha = 0.3;
  const auto o = unperturbed_orbit(spec, seed_state(spec, sp));
  const Json j = to_json(o);
  const auto back = orbit_from_json(Json::parse(j.dump()));
  CHECK(back.spec.k == 2);
  CHECK(back.spec.dim == Dim::Spatial);
  CHECK(back.S == o.S);
  CHECK((back.x0 - o.x0).norm() == 0.0);
  CHECK(j["floquet_multipliers"].size() == 10);
  Json bad = j;
  bad["dim"] = 5;
  CHECK_THROWS_AS(orbit_from_json(bad), ConfigError);
  bad = j;
  bad.erase("X0");
  CHECK_THROWS_AS(orbit_from_json(bad), ConfigError);
}

TEST_CASE("seed CSV round trip and validation") {
  std::mt19937_64 rng(109);
  for (Dim dim : {Dim::Planar, Dim::Spatial}) {
    std::vector<SeedRecord> seeds;
    for (int k = 1; k <= 3; ++k) {
      seeds.push_back({k, seed_state({k, 2 * std::numbers::pi, dim}, random_seed_params(rng, dim))});
    }
    std::stringstream ss;
    write_seed_csv(ss, dim, seeds, {"h = 1"});
    const auto back = read_seed_csv(ss, dim, 2 * std::numbers::pi);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK((back[i].x0 - seeds[i].x0).norm() == 0.0);

    seeds[1].x0[0] += 0.01;
    std::stringstream bad;
    write_seed_csv(bad, dim, seeds);
    CHECK_THROWS_AS(read_seed_csv(bad, dim, 2 * std::numbers::pi), InvariantError);
  }
}

TEST_CASE("cli commands write headers, are deterministic and map errors to exit codes") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "kepreg_cli_test";
  fs::remove_all(base);
  RunConfig c = parse("[run]\ndim = 3\nseed = 5\n[manifold]\nk = 1,2\n[seed]\npreset = random\ncount = 3\n");
  std::ostringstream log;
  c.output = (base / "a").string();
  CHECK(run_command("seed", c, log) == kExitSuccess);
  c.output = (base / "b").string();
  CHECK(run_command("seed", c, log) == kExitSuccess);
  const std::string a = slurp(base / "a" / "seeds.csv"), b = slurp(base / "b" / "seeds.csv");
  CHECK(a.rfind("# command = seed\n", 0) == 0);
  CHECK(a.find("# run.seed = 5") != std::string::npos);
  // Identical apart from the echoed output directory.
  const auto strip = [](const std::string& s) { return s.substr(s.find("# run.jobs")); };
  CHECK(strip(a) == strip(b));
  CHECK(slurp(base / "a" / "constants.csv").find("# command = seed") == 0);

  CHECK(run_command("not-a-command", c, log) == kExitConfig);
  RunConfig bad = c;
  bad.T = -1;
  CHECK(run_command("seed", bad, log) == kExitConfig);
  CHECK(run_cli("seed", "/nonexistent.ini", "", 0, log) == kExitConfig);

  // Averaging needs a forced_kepler forcing.
  CHECK(run_command("average", c, log) == kExitConfig);
  // remove-collisions is planar only.
  CHECK(run_command("remove-collisions", c, log) == kExitConfig);
  fs::remove_all(base);
}

TEST_CASE("cli theorem-demo at eps = 0 degenerates to points") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kepreg_cli_demo0";
  fs::remove_all(dir);
  RunConfig c = parse("[manifold]\nk = 1,2\n");
  c.output = dir.string();
  std::ostringstream log;
  CHECK(run_command("theorem-demo", c, log) == kExitSuccess);
  const Json j = Json::parse(slurp(dir / "summary.json"));
  REQUIRE(j["orbits"].size() == 2);
  for (const auto& o : j["orbits"]) {
    const double tau = constants({o["k"].get<int>(), c.T, Dim::Planar}).tau;
    CHECK(o["energy_band"][0].get<double>() == Approx(-tau).epsilon(1e-12));
    CHECK(o["energy_band"][1].get<double>() == Approx(-tau).epsilon(1e-12));
    CHECK(o["eta"] == 1);
  }
  CHECK(j["all_disjoint"] == true);
  CHECK(load_orbit_archive((dir / "orbits.json").string()).size() == 2);
  fs::remove_all(dir);
}
