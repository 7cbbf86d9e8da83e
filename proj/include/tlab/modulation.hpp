#pragma once
// Decomposition near the orbit of the standing wave:
//   e^{-i theta - i w t} u = (1 + alpha) Q + h,
// with Im int Q h = 0 from the phase and int grad Q . grad h1 = 0 from alpha.

#include <vector>

#include "tlab/groundstate.hpp"

namespace tl {

// | ||grad Q||^2 - ||grad u||^2 |
double delta(const RadialField& u, const GroundState& gs);

// Default window 0.05 ||grad Q||^2.
double default_delta0(const GroundState& gs);

struct ModulationFrame {
  double t = 0;
  double theta = 0;  // in (-pi, pi]
  double alpha = 0;
  RadialField h;
  double h_H1 = 0;
  double delta = 0;
  bool in_window = false;
};

// OutsideWindow if delta >= delta0; PhaseAmbiguity if |int u Q| < 1e-12.
ModulationFrame decompose(const RadialField& u, double t, const GroundState& gs,
                          double delta0 = -1);

// e^{i theta + i w t} ((1 + alpha) Q + h)
RadialField reconstruct(const ModulationFrame& f, const GroundState& gs);

struct ModulationRates {
  std::vector<double> times;  // midpoints
  std::vector<double> alpha_ratio, theta_ratio;  // |alpha'|/delta, |theta'|/delta
  double sup_alpha = 0, sup_theta = 0;
  double alpha_max_over_median = 0, theta_max_over_median = 0;
};

// Finite differences across consecutive in-window frames (theta unwrapped).
ModulationRates modulation_rates(const std::vector<ModulationFrame>& frames);

// Smallest C with |alpha|/delta and ||h||_{H^1}/delta in [1/C, C] over the
// in-window frames.
struct WindowEquivalence {
  double C = 0;
  double alpha_min = 0, alpha_max = 0;
  double h_min = 0, h_max = 0;
  int frames = 0;
};
WindowEquivalence window_equivalence(const std::vector<ModulationFrame>& frames);

}  // namespace tl
