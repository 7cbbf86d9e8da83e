#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tlab/grid.hpp"
#include "tlab/model.hpp"

namespace tl {

struct GroundState {
  ModelParams params;
  GridPtr grid;
  std::vector<double> Q;
  double Q0 = 0;          // Q(0), extrapolated from the first nodes
  double mass2 = 0;       // ||Q||_2^2
  double grad2 = 0;       // ||grad Q||_2^2
  double lp1 = 0;         // ||Q||_{p+1}^{p+1}
  double EQ = 0;
  double CGN = 0;
  double me_Q = 0;
  double grad_Q = 0;
  double residual = 0;    // ||Lap Q - w Q + Q^p||_2 / ||Q||_{H^1}
  int newton_iterations = 0;

  RadialField field() const { return RadialField::from_real(grid, Q); }
  double H1() const;
};

struct PohozaevReport {
  std::array<double, 3> residual{};  // relative residuals (i), (ii), (iii)
  std::array<double, 3> lhs{};
  std::array<double, 3> rhs{};
  bool pass(double tol = 1e-6) const;
};

// Default grid for given parameters: M = 4096, Rmax = 40/sqrt(omega).
GridPtr default_grid(const ModelParams& prm, int M = 4096, double rmax_factor = 40.0);

struct ShootingResult {
  double lo = 0, hi = 0;  // final bisection bracket on Q(0)
  int iterations = 0;
};

ShootingResult shoot_ground_state(const ModelParams& prm, double rmax, double dr);

GroundState solve_ground_state(const ModelParams& prm, GridPtr grid);

// Fill norms, energies and constants from the profile samples.
void finalize_ground_state(GroundState& gs);

PohozaevReport verify_pohozaev(const GroundState& gs);

double compute_cgn(const GroundState& gs);

// Gagliardo-Nirenberg quotient ||u||_{p+1}^{p+1} / (||grad u||^a ||u||^b).
double gn_quotient(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm);

double gn_deficit(const RadialField& u, const GroundState& gs);

// Binary cache with a JSON sidecar, keyed by (N, p, M, Rmax).
std::string ground_state_cache_key(const ModelParams& prm, const RadialGrid& g);
void save_ground_state(const GroundState& gs, const std::string& dir);
std::optional<GroundState> load_ground_state(const ModelParams& prm, GridPtr grid,
                                             const std::string& dir);

// Cached solve; reports whether the cache was hit.
GroundState ground_state_cached(const ModelParams& prm, GridPtr grid,
                                const std::string& cache_dir, bool use_cache,
                                bool* cache_hit = nullptr);

}  // namespace tl
