#pragma once
// Time integration of i u_t + Lap u + |u|^{p-1} u = 0 on the radial grid.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tlab/banded.hpp"
#include "tlab/groundstate.hpp"
#include "tlab/linop.hpp"

namespace tl {

enum class Direction { forward, backward };
enum class Scheme { conservative, strang };
enum class StopReason { horizon, blowup, dispersal_proxy, numerical_failure };

std::string to_string(Direction d);
std::string to_string(Scheme s);
std::string to_string(StopReason s);
Direction direction_from_string(const std::string& s);
Scheme scheme_from_string(const std::string& s);

struct EvolutionConfig {
  double dt0 = 2e-3;
  double T = 1.0;
  Direction direction = Direction::forward;
  Scheme scheme = Scheme::conservative;
  double sponge_width = -1;     // < 0: Rmax/5; 0 disables
  double sponge_strength = 2.0;  // peak damping rate
  double grad_ceiling = -1;     // multiple of ||grad Q||; < 0: 8^{1-s_c}
  int record_stride = 10;
  bool keep_snapshots = true;
  // Dispersal proxy: int |u|^{p+1} below this fraction of its initial value
  // while ||grad u|| < ||grad Q||, held for dispersal_window time units.
  double dispersal_fraction = 0.01;
  double dispersal_window = 2.0;
  double mass_drift_limit = 1e-4;

  void validate(const RadialGrid& g) const;
};

struct TrajectoryRecord {
  Direction direction = Direction::forward;
  std::vector<double> times;  // physical time, negative for backward runs
  std::vector<double> M_trace, E_trace, gradnorm_trace, delta_trace, dt_trace;
  std::vector<double> grad_gap_trace;  // ||grad u|| ||u||^{(1-s_c)/s_c} minus the Q value
  std::vector<double> absorbed_trace;  // mass removed by the sponge so far
  std::vector<RadialField> snapshots;  // at each recorded time when kept
  StopReason stop_reason = StopReason::horizon;
  std::string failure;
  long steps = 0;
  double grad_ceiling = 0;  // absolute ||grad u|| threshold used
};

// One time step with a cached factorization of W +- i dt/2 S.
class Stepper {
 public:
  Stepper(GridPtr g, double p, Scheme scheme);

  // Advances u in place by dt. LinearSolveFailure if the implicit iteration stalls.
  void step(std::vector<cplx>& u, double dt);

  Scheme scheme() const { return scheme_; }

 private:
  const BandLU<cplx>& factor(double dt);
  void linear(std::vector<cplx>& u, double dt);
  void strang(std::vector<cplx>& u, double dt);
  void conservative(std::vector<cplx>& u, double dt);

  GridPtr g_;
  double p_;
  Scheme scheme_;
  std::map<double, BandLU<cplx>> lu_;
};

// Strang splitting step: nonlinear phase half steps around a Crank-Nicolson
// linear step.
RadialField step(const RadialField& u, double dt, const ModelParams& params);
RadialField step_conservative(const RadialField& u, double dt, const ModelParams& params);

TrajectoryRecord evolve(const RadialField& u0, const EvolutionConfig& cfg, const GroundState& gs);

// min over theta of ||e^{-i theta} u - Q||_{H^1}
double orbit_distance(const RadialField& u, const GroundState& gs);

struct ConvergenceFit {
  double rate = 0;
  double ratio_to_e0 = 0;
  bool degenerate = false;  // already on the orbit
  int samples = 0;
  std::vector<double> times, distance;
};

ConvergenceFit convergence_to_Q(const TrajectoryRecord& rec, const GroundState& gs, double e0);

// sigma(r) for the polynomial sponge.
std::vector<double> sponge_profile(const RadialGrid& g, double width, double strength);

}  // namespace tl
