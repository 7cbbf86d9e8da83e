#pragma once
// Command drivers behind the threshold-lab CLI.
//
// Each command writes into <out>/<command>/: CSV traces, a JSON report and
// manifest.json (written last, atomically). timing.txt holds the wall clock so
// that everything else is reproducible byte for byte. Exit codes: 0 success,
// 1 a certification check failed or a run ended in numerical_failure (artifacts
// still written), 2 error; on error the directory receives error.json
// {"error", "message"} instead.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "tlab/config.hpp"
#include "tlab/diagnostics.hpp"
#include "tlab/linop.hpp"
#include "tlab/profiles.hpp"

namespace tl {

inline constexpr const char* kVersion = "0.1.0";

using ojson = nlohmann::ordered_json;

struct RunOptions {
  bool no_cache = false;
  std::optional<std::string> out_dir;  // overrides output.dir
  std::ostream* log = nullptr;         // progress lines; null is silent
};

// JSON text with every float printed at 17 significant digits.
std::string dump_json(const ojson& j, int indent = 2);

// Ground state and spectral data shared by the commands.
struct Context {
  ExperimentConfig cfg;
  ModelParams params;
  GridPtr grid;
  std::shared_ptr<const GroundState> gs;
  std::string cache_status;  // hit | miss | disabled
  std::optional<LinearizedOperator> op;
  std::optional<EigenPair> pair;
  std::string eigen_cache_status;
};

Context make_context(const ExperimentConfig& cfg, bool no_cache);
void ensure_spectrum(Context& ctx, bool no_cache);

// EigenPair cache next to the ground state (same key, "eig_" prefix).
void save_eigenpair(const EigenPair& pair, const GroundState& gs, const std::string& dir);
std::optional<EigenPair> load_eigenpair(const GroundState& gs, const std::string& dir);

// Initial datum for the configured seed. For Qplus, Qminus and profile the
// expansion and t0 are returned through the optional outputs.
RadialField build_seed(Context& ctx, double* t0 = nullptr, ProfileExpansion* ex = nullptr);

int cmd_ground(const ExperimentConfig& cfg, const RunOptions& opt = {});
int cmd_spectrum(const ExperimentConfig& cfg, const RunOptions& opt = {});
int cmd_profiles(const ExperimentConfig& cfg, const RunOptions& opt = {});
int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt = {});
int cmd_classify(const ExperimentConfig& cfg, const RunOptions& opt = {});
int cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt = {});

// Dispatch by name; unknown command -> ConfigError reported as exit 2.
int run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opt = {});

// Output directory of a command for the given config and options.
std::string command_dir(const std::string& name, const ExperimentConfig& cfg,
                        const RunOptions& opt);

}  // namespace tl
