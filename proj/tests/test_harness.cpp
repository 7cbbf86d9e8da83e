#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "tlab/config.hpp"
#include "tlab/errors.hpp"
#include "tlab/harness.hpp"

using namespace tl;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& tag) {
  static int n = 0;
  auto p = fs::temp_directory_path() /
           ("tlab_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run_cli(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(TLAB_CLI) + " " + args + " > " + log.string() + " 2>&1";
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

ojson load_json(const fs::path& p) { return ojson::parse(slurp(p)); }

// small, quick configuration rooted in a scratch directory
std::string base_yaml(const fs::path& root, const std::string& extra = "") {
  return "params: {dimension: 3, exponent: 3}\n"
         "grid: {M: 1024}\n"
         "cache: {dir: \"" + (root / "cache").string() + "\"}\n"
         "output: {dir: \"" + (root / "out").string() + "\"}\n" + extra;
}

struct EnvGuard {
  EnvGuard() { ::unsetenv("THRESHOLD_LAB_CACHE"); }
  ~EnvGuard() { ::unsetenv("THRESHOLD_LAB_CACHE"); }
};
}  // namespace

TEST_CASE("config round trip is bit-identical") {
  auto c = parse_config(
      "params: {dimension: 2, exponent: 5}\n"
      "grid: {M: 2048, rmax_factor: 33.3}\n"
      "profiles: {A: -0.1, order: 2}\n"
      "evolution: {seed: profile, T: 0.30000000000000004, direction: backward, "
      "scheme: strang, grad_ceiling: .inf}\n"
      "classifier: {virial_radii: [1.5, 3]}\n"
      "sweep: {A: [-1, 1], cells: [{dimension: 3, exponent: 3, M: 512}]}\n");
  auto y = to_yaml(c);
  auto c2 = parse_config(y);
  CHECK(to_yaml(c2) == y);
  CHECK(config_hash(c2) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  CHECK(c2.evolution.T == 0.30000000000000004);
  CHECK(std::isinf(c2.evolution.grad_ceiling));
  CHECK(c2.expand_sweep().size() == 3);
  CHECK(c2.sweep_cells[0].M == 512);
  c2.A = 0.2;
  CHECK(config_hash(c2) != config_hash(c));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("params: {dimension: 3, exponant: 3}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("bogus: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("grid: {M: lots}\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("evolution: {direction: sideways}\n"), ConfigError);
  auto c = parse_config("params: {dimension: 3, exponent: 1.2}\n");
  CHECK_THROWS_AS(validate(c), CriticalityError);
  auto g = parse_config("grid: {M: 4}\n");
  CHECK_THROWS_AS(validate(g), GridError);
  CHECK_NOTHROW(validate(ExperimentConfig{}));
}

TEST_CASE("cache directory from the environment") {
  EnvGuard guard;
  ExperimentConfig c;
  c.cache_dir = "from_config";
  CHECK(resolve_cache_dir(c) == "from_config");
  ::setenv("THRESHOLD_LAB_CACHE", "/tmp/from_env", 1);
  CHECK(resolve_cache_dir(c) == "/tmp/from_env");
}

TEST_CASE("json dumper") {
  ojson j;
  j["x"] = 0.1;
  j["nan"] = NAN;
  j["v"] = {1.0, 2.5};
  auto s = dump_json(j);
  CHECK(s.find("0.10000000000000001") != std::string::npos);
  CHECK(s.find("\"nan\": null") != std::string::npos);
  CHECK(s.find("[1, 2.5]") != std::string::npos);
  CHECK(ojson::parse(s)["x"].get<double>() == 0.1);
}

TEST_CASE("ground via the CLI, cache hit on rerun, determinism") {
  EnvGuard guard;
  auto root = scratch("ground");
  spit(root / "c.yaml", base_yaml(root));
  CHECK(run_cli("ground --config " + (root / "c.yaml").string(), root / "log1") == 0);
  auto dir = root / "out" / "ground";
  for (auto f : {"manifest.json", "ground.json", "Q.csv", "config.yaml", "timing.txt"})
    CHECK(fs::exists(dir / f));
  auto m1 = load_json(dir / "manifest.json");
  CHECK(m1["cache"]["ground_state"] == "miss");
  CHECK(m1["verdicts"]["pohozaev"] == "pass");
  CHECK(load_json(dir / "ground.json")["pohozaev"]["pass"] == true);
  std::string q1 = slurp(dir / "Q.csv"), g1 = slurp(dir / "ground.json");

  CHECK(run_cli("ground --config " + (root / "c.yaml").string(), root / "log2") == 0);
  auto m2 = load_json(dir / "manifest.json");
  CHECK(m2["cache"]["ground_state"] == "hit");
  std::string m2s = slurp(dir / "manifest.json");
  CHECK(run_cli("ground --config " + (root / "c.yaml").string(), root / "log3") == 0);
  CHECK(slurp(dir / "manifest.json") == m2s);
  CHECK(slurp(dir / "Q.csv") == q1);
  CHECK(slurp(dir / "ground.json") == g1);

  auto alt = root / "alt";
  CHECK(run_cli("ground --no-cache --out " + alt.string() + " --config " + (root / "c.yaml").string(),
                root / "log4") == 0);
  CHECK(load_json(alt / "ground" / "manifest.json")["cache"]["ground_state"] == "disabled");
  CHECK(slurp(alt / "ground" / "Q.csv") == q1);
  fs::remove_all(root);
}

TEST_CASE("invalid exponent exits with 2 and a CriticalityError report") {
  EnvGuard guard;
  auto root = scratch("crit");
  spit(root / "c.yaml", base_yaml(root).replace(0, 35, "params: {dimension: 3, exponent: 1.2}"));
  CHECK(run_cli("ground --config " + (root / "c.yaml").string(), root / "log") == 2);
  auto err = root / "out" / "ground" / "error.json";
  REQUIRE(fs::exists(err));
  CHECK(load_json(err)["error"] == "CriticalityError");
  CHECK_FALSE(fs::exists(root / "out" / "ground" / "manifest.json"));
  CHECK(slurp(root / "log").find("CriticalityError") != std::string::npos);

  CHECK(run_cli("ground --config " + (root / "missing.yaml").string(), root / "log2") == 2);
  CHECK(slurp(root / "log2").find("ConfigError") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("Q+ backward through the CLI ends in blowup") {
  EnvGuard guard;
  auto root = scratch("qplus");
  auto cfg = load_config(std::string(TLAB_SOURCE_DIR) + "/configs/qplus_backward.yaml");
  cfg.cache_dir = (root / "cache").string();
  spit(root / "c.yaml", to_yaml(cfg));
  CHECK(run_cli("evolve --out " + (root / "out").string() + " --config " + (root / "c.yaml").string(),
                root / "log") == 0);
  auto m = load_json(root / "out" / "evolve" / "manifest.json");
  CHECK(m["verdicts"]["stop_reason"] == "blowup");
  CHECK(m["verdicts"]["verdict"] == "blowup");
  CHECK(fs::exists(root / "out" / "evolve" / "trajectory.csv"));
  fs::remove_all(root);
}

TEST_CASE("sweep plumbing") {
  EnvGuard guard;
  auto root = scratch("sweep");
  RunOptions opt;
  opt.out_dir = (root / "out").string();

  auto empty = parse_config(base_yaml(root));
  CHECK(cmd_sweep(empty, opt) == 2);
  auto err = load_json(root / "out" / "sweep" / "error.json");
  CHECK(err["error"] == "ConfigError");
  CHECK(err["message"] == "no cells");

  // a broken cell does not take the others down
  auto iso = parse_config(base_yaml(root,
                                    "evolution: {T: 0.05}\n"
                                    "sweep: {cells: [{dimension: 3, exponent: 3}, "
                                    "{dimension: 3, exponent: 3, M: 4}, {dimension: 3, exponent: 1.1}]}\n"));
  CHECK(cmd_sweep(iso, opt) == 0);
  auto rep = load_json(root / "out" / "sweep" / "sweep.json");
  CHECK(rep["succeeded"] == 1);
  CHECK(rep["cells"][0]["status"] == "ok");
  CHECK(rep["cells"][1]["error"] == "GridError");
  CHECK(rep["cells"][2]["error"] == "CriticalityError");

  // profile seeds: the gradient gap of U^A carries the sign of A
  auto sa = parse_config(base_yaml(root,
                                   "evolution: {seed: profile, T: 0.05}\n"
                                   "sweep: {A: [-1, -0.5, 0.5, 1], workers: 2}\n"));
  CHECK(cmd_sweep(sa, opt) == 0);
  auto ra = load_json(root / "out" / "sweep" / "sweep.json");
  REQUIRE(ra["cells"].size() == 4);
  for (const auto& c : ra["cells"]) {
    REQUIRE(c["status"] == "ok");
    double A = c["A"].get<double>();
    double gap = c["result"]["profile_grad_gap"].get<double>();
    CAPTURE(A);
    CHECK(A * gap > 0);
  }
  std::string csv = slurp(root / "out" / "sweep" / "sweep.csv");
  CHECK(cmd_sweep(sa, opt) == 0);
  CHECK(slurp(root / "out" / "sweep" / "sweep.csv") == csv);
  fs::remove_all(root);
}

TEST_CASE("unknown command") {
  std::ostringstream log;
  RunOptions opt;
  opt.log = &log;
  CHECK(run_command("frobnicate", ExperimentConfig{}, opt) == 2);
  CHECK(log.str().find("ConfigError") != std::string::npos);
}

TEST_CASE("shipped configs parse and validate") {
  int n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(TLAB_SOURCE_DIR) / "configs")) {
    CAPTURE(e.path().string());
    auto c = load_config(e.path().string());
    CHECK_NOTHROW(validate(c));
    ++n;
  }
  CHECK(n >= 2);
}
