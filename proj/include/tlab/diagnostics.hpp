#pragma once
// Localized virial quantities, the cutoff phi, the radial tail functional and
// the trajectory classifier.

#include <string>
#include <vector>

#include "tlab/evolve.hpp"
#include "tlab/model.hpp"

namespace tl {

// phi(x) = x^2 on [0,1], a quintic bridge on [1,2], constant 5/2 beyond.
// The bridge has phi''' = 0 at x = 1 and phi'' <= 2 throughout.
double cutoff_phi(double x);
double cutoff_dphi(double x);
double cutoff_d2phi(double x);

struct Cutoff {
  double R = 0;
  // phi(r/R), phi'(r/R), phi''(r/R) at the nodes
  std::vector<double> phi, dphi, d2phi;
  // Delta of R^2 phi(|x|/R) at the nodes: phi'' + (N-1) phi'/(r/R)
  std::vector<double> lap;
};

// CutoffOutOfDomain unless 0 < 2R < Rmax.
Cutoff make_cutoff(double R, const RadialGrid& g);

struct VirialQuantities {
  double yR = 0;
  double yR_prime = 0;
  double yR_second = 0;  // (2N(p-1)-8)(|grad Q|^2 - |grad u|^2) + A_R
  double AR = 0;
};

VirialQuantities virial_quantities(const RadialField& u, const Cutoff& c, const GroundState& gs);

struct VirialTrace {
  double R = 0;
  std::vector<double> times, yR, yR_prime, yR_second, AR;
  // |second difference of yR - yR_second| at interior samples (first and last are 0)
  std::vector<double> consistency_residual;
  double max_residual = 0;
  double budget = 0;
  bool within_budget = false;
};

// budget = time-difference error + h^2 max|yR''| + 2 |A_R(Q)| (annulus mass
// ratio); A_R(Q) is zero in the continuum. See the implementation.
VirialTrace virial_trace(const TrajectoryRecord& rec, const Cutoff& c, const GroundState& gs);

// sup over nodes R' in [R, Rmax/2] of R'^{-2 s_c} int_{R' <= r < 2R'} |u|^2.
double tail_rho(const RadialField& u, double R, const ModelParams& params);

// |Im int (grad phi . grad f) conj f|^2 / (delta(f)^2 int |grad phi|^2 |f|^2)
double localized_momentum_ratio(const RadialField& f, const Cutoff& c, const GroundState& gs);

// Smallest searched R such that yR'' <= -(N(p-1)-4) delta at every recorded
// time; R = 0 when none qualifies.
struct VirialSignSearch {
  double R = 0;
  std::vector<double> radii;
  std::vector<double> worst_margin;  // max over t of yR'' + (N(p-1)-4) delta
};
VirialSignSearch virial_sign_search(const TrajectoryRecord& rec, const GroundState& gs,
                                    const std::vector<double>& radii);

enum class Verdict { blowup, converges_to_Q, disperses, undetermined };
std::string to_string(Verdict v);

struct ClassifierConfig {
  double rate_fraction = 0.5;  // of e0
  double delta0 = -1;          // < 0: 0.05 |grad Q|^2
};

struct Classification {
  Verdict verdict = Verdict::undetermined;
  std::string reason;
  StopReason stop_reason = StopReason::horizon;
  ThresholdReport threshold;
  double delta_integral = 0;       // int delta dt over the record
  double delta_tail_integral = 0;  // over the second half of the record
  int virial_negative = 0, virial_positive = 0;
  bool fit_attempted = false;
  double fit_rate = 0, fit_ratio = 0;
  bool fit_degenerate = false;
};

Classification classify(const TrajectoryRecord& rec, const GroundState& gs, double e0,
                        const ClassifierConfig& cfg = {});

}  // namespace tl
