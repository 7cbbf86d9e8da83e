#pragma once
// Problem parameters, conserved quantities and scale-invariant comparisons for
// i u_t + Lap u + |u|^{p-1} u = 0 in the intercritical range 0 < s_c < 1.

#include <string>
#include <utility>
#include <vector>

#include "tlab/grid.hpp"

namespace tl {

struct ModelParams {
  int N = 3;
  double p = 3;
  double sc = 0.5;     // N/2 - 2/(p-1)
  double omega = 0.5;  // 1 - s_c

  // (1 - s_c)/s_c, the mass exponent in the scale-invariant products.
  double mass_exponent() const { return (1.0 - sc) / sc; }
};

ModelParams derive_params(int N, double p);

struct ConservedTriple {
  double mass = 0;
  double energy = 0;
  std::vector<double> momentum;  // length N, always zero for radial fields
};

ConservedTriple conserved(const RadialField& u, const ModelParams& params);

double energy(const RadialGrid& g, const std::vector<cplx>& u, double p);

enum class Side { below, at, above };
std::string to_string(Side s);

struct ThresholdReport {
  double me_product = 0;    // M^{(1-s_c)/s_c} E
  double grad_product = 0;  // ||grad u|| ||u||^{(1-s_c)/s_c}
  double me_Q = 0;
  double grad_Q = 0;
  Side me_side = Side::at;
  Side grad_side = Side::at;
  double tolerance = 1e-6;
};

inline constexpr double kThresholdTolerance = 1e-6;

Side compare_with_tolerance(double value, double reference, double rel_tol);

struct GroundState;

double me_product(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm);
double grad_product(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm);

ThresholdReport threshold_report(const RadialField& u, const GroundState& gs);

// u(x) -> lambda^{2/(p-1)} u(lambda x), resampled by interpolation with
// even reflection at the origin and zero beyond Rmax.
RadialField scale_field(const RadialField& u, double lambda, double p);

// Returns (u~, lambda) with M(u~) = M(Q).
std::pair<RadialField, double> rescale_to_Q_mass(const RadialField& u0, const GroundState& gs);

std::pair<double, double> galilean_reduced(double M, double E, double Pnorm);

}  // namespace tl
