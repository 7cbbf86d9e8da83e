#pragma once
// Experiment configuration: YAML in, canonical YAML out.
//
//   params:     {dimension, exponent}
//   grid:       {M, rmax | rmax_factor}
//   solver:     {pohozaev_tol, kernel_tol, eigen_tol, coercivity_samples, coercivity_seed}
//   profiles:   {A, order, seed_tol, trace_span, trace_samples}
//   evolution:  {seed, amplitude, perturbation, T, dt0, direction, scheme, sponge_width,
//                sponge_strength, grad_ceiling, record_stride, dispersal_fraction,
//                dispersal_window, mass_drift_limit, dump_snapshots}
//   classifier: {rate_fraction, delta0, virial_radii}
//   output:     {dir}
//   cache:      {dir, enabled}
//   sweep:      {dimension: [...], exponent: [...], A: [...], perturbation: [...],
//                cells: [{dimension, exponent, A, perturbation, M, rmax}], workers}

#include <optional>
#include <string>
#include <vector>

#include "tlab/diagnostics.hpp"
#include "tlab/evolve.hpp"

namespace tl {

struct SweepCell {
  int dimension = 3;
  double exponent = 3;
  double A = 1;
  double perturbation = 0;
  std::optional<int> M;
  std::optional<double> rmax;
};

struct ExperimentConfig {
  int dimension = 3;
  double exponent = 3;

  int M = 4096;
  double rmax = 0;  // 0: rmax_factor / sqrt(omega)
  double rmax_factor = 40;

  double pohozaev_tol = 1e-6;
  double kernel_tol = 1e-6;
  double eigen_tol = 1e-7;
  int coercivity_samples = 200;
  std::uint64_t coercivity_seed = 20240601;

  double A = 1;
  int order = 3;
  double seed_tol = 1e-3;
  double trace_span = 5;  // in units of 1/e0
  int trace_samples = 21;

  // Q | Qplus | Qminus | profile (U^A at t0) | scaled (amplitude Q)
  std::string seed = "Q";
  double amplitude = 1;
  double perturbation = 0;  // u0 -> (1 + perturbation) u0
  EvolutionConfig evolution;
  bool dump_snapshots = false;

  ClassifierConfig classifier;
  std::vector<double> virial_radii{2, 5, 10, 15};  // multiples of 1/sqrt(omega)

  std::string out_dir = "out";
  std::string cache_dir = ".threshold_lab_cache";
  bool cache_enabled = true;

  std::vector<int> sweep_dimension;
  std::vector<double> sweep_exponent, sweep_A, sweep_perturbation;
  std::vector<SweepCell> sweep_cells;
  int sweep_workers = 0;  // 0: hardware concurrency

  // Cells from the Cartesian product followed by the explicit list.
  std::vector<SweepCell> expand_sweep() const;
};

// ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);

// Canonical form, every knob explicit, floats with 17 significant digits.
std::string to_yaml(const ExperimentConfig& cfg);

// FNV-1a of the canonical YAML, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Checks every knob that can be checked without computing anything.
void validate(const ExperimentConfig& cfg);

// THRESHOLD_LAB_CACHE when set, else the configured directory.
std::string resolve_cache_dir(const ExperimentConfig& cfg);

}  // namespace tl
