#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tlab/config.hpp"
#include "tlab/errors.hpp"
#include "tlab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Threshold dynamics of focusing NLS: ground states, spectra, profiles, evolution"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", tl::kVersion);

  std::string config_path;
  bool no_cache = false;
  std::string out_dir;
  std::optional<double> A;
  std::optional<int> order;

  for (const char* name : {"ground", "spectrum", "profiles", "evolve", "classify", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment YAML")->required();
    sub->add_flag("--no-cache", no_cache, "re-solve instead of reading cached ground state / eigenpair");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    if (std::string(name) == "profiles") {
      sub->add_option("--A", A, "profile amplitude (overrides profiles.A)");
      sub->add_option("--order", order, "expansion order k (overrides profiles.order)");
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  tl::RunOptions opt;
  opt.no_cache = no_cache;
  opt.log = &std::cerr;
  if (!out_dir.empty()) opt.out_dir = out_dir;

  tl::ExperimentConfig cfg;
  try {
    cfg = tl::load_config(config_path);
    if (A) cfg.A = *A;
    if (order) cfg.order = *order;
  } catch (const tl::Error& e) {
    nlohmann::ordered_json j{{"error", e.name()}, {"message", e.what()}};
    std::cerr << tl::dump_json(j, -1) << std::endl;
    return 2;
  }
  int code = tl::run_command(cmd, cfg, opt);
  std::cout << tl::command_dir(cmd, cfg, opt) << " exit " << code << std::endl;
  return code;
}
