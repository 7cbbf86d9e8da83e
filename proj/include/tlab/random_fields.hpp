#pragma once
// Seeded random radial fields for property tests and sampled inequalities.

#include <cstdint>
#include <random>

#include "tlab/linop.hpp"

namespace tl {

// Sum of one to three Gaussian shells a exp(-((r - c)/w)^2) with centres in
// [0, 4L], widths in [0.3L, 2.5L], L = 1/sqrt(omega). Complex amplitudes when
// complex_valued is set.
RadialField random_bump(GridPtr g, double omega, std::mt19937_64& rng, bool complex_valued);

struct CoercivityReport {
  int samples = 0;
  double min_ratio = 0;  // min Phi(h)/||h||_{H^1}^2, the fitted constant
  double max_ratio = 0;
  double phi_Q = 0, phi_iQ = 0, phi_Yplus = 0;
};

// Random complex fields projected onto G-perp and G'-perp.
CoercivityReport sample_coercivity(const LinearizedOperator& op, const EigenPair& pair, int n,
                                   std::uint64_t seed);

}  // namespace tl
