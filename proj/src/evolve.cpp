#include "tlab/evolve.hpp"

#include <algorithm>
#include <cmath>

#include "tlab/errors.hpp"
#include "tlab/modulation.hpp"
#include "tlab/profiles.hpp"

namespace tl {

std::string to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }
std::string to_string(Scheme s) { return s == Scheme::conservative ? "conservative" : "strang"; }

std::string to_string(StopReason s) {
  switch (s) {
    case StopReason::horizon: return "horizon";
    case StopReason::blowup: return "blowup";
    case StopReason::dispersal_proxy: return "dispersal_proxy";
    case StopReason::numerical_failure: return "numerical_failure";
  }
  return "?";
}

Direction direction_from_string(const std::string& s) {
  if (s == "forward") return Direction::forward;
  if (s == "backward") return Direction::backward;
  throw ConfigError("direction must be forward or backward, got '" + s + "'");
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "conservative") return Scheme::conservative;
  if (s == "strang") return Scheme::strang;
  throw ConfigError("scheme must be conservative or strang, got '" + s + "'");
}

void EvolutionConfig::validate(const RadialGrid& g) const {
  if (!(dt0 > 0)) throw ConfigError("dt0 must be positive");
  if (!(T >= 0)) throw ConfigError("T must be non-negative");
  if (sponge_width >= g.rmax() / 4) throw ConfigError("sponge_width must be below Rmax/4");
  if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
  if (!(dispersal_fraction > 0 && dispersal_fraction < 1))
    throw ConfigError("dispersal_fraction must lie in (0, 1)");
  if (!(mass_drift_limit > 0)) throw ConfigError("mass_drift_limit must be positive");
}

std::vector<double> sponge_profile(const RadialGrid& g, double width, double strength) {
  std::vector<double> s(g.M(), 0.0);
  if (width <= 0) return s;
  double r0 = g.rmax() - width;
  for (int j = 0; j < g.M(); ++j)
    if (g.r(j) > r0) {
      double x = (g.r(j) - r0) / width;
      s[j] = strength * x * x * x;
    }
  return s;
}

// ----------------------------------------------------------------------------

namespace {
// s^e with shortcuts for the integer and half-integer exponents of odd p.
inline double spow(double s, double e) {
  if (e == 1) return s;
  if (e == 2) return s * s;
  if (e == 3) return s * s * s;
  if (e == 4) return (s * s) * (s * s);
  if (e == 1.5) return s * std::sqrt(s);
  return std::pow(s, e);
}
}  // namespace

Stepper::Stepper(GridPtr g, double p, Scheme scheme) : g_(std::move(g)), p_(p), scheme_(scheme) {}

const BandLU<cplx>& Stepper::factor(double dt) {
  auto it = lu_.find(dt);
  if (it != lu_.end()) return it->second;
  if (lu_.size() > 8) lu_.clear();
  const auto& S = g_->stiffness();
  const int M = g_->M(), b = RadialGrid::kHalfBand;
  BandMatrix<cplx> A(M, b, b);
  for (int i = 0; i < M; ++i)
    for (int j = std::max(0, i - b); j <= std::min(M - 1, i + b); ++j) {
      cplx v = cplx(0, 0.5 * dt) * S.get(i, j);
      if (i == j) v += g_->w(i);
      A(i, j) = v;
    }
  BandLU<cplx> lu(std::move(A));
  if (lu.exactly_singular()) throw LinearSolveFailure("Crank-Nicolson matrix is singular");
  return lu_.emplace(dt, std::move(lu)).first->second;
}

// (W + i dt/2 S) u1 = (W - i dt/2 S) u0
void Stepper::linear(std::vector<cplx>& u, double dt) {
  const auto& lu = factor(dt);
  auto Su = g_->stiffness() * u;
  for (int j = 0; j < g_->M(); ++j) u[j] = g_->w(j) * u[j] - cplx(0, 0.5 * dt) * Su[j];
  lu.solve_in_place(u.data());
}

void Stepper::strang(std::vector<cplx>& u, double dt) {
  const double e = 0.5 * (p_ - 1);
  auto half = [&] {
    for (auto& z : u) z *= std::polar(1.0, 0.5 * dt * spow(std::norm(z), e));
  };
  half();
  linear(u, dt);
  half();
}

// Implicit midpoint with the difference-quotient nonlinearity
//   G = (F(|u1|^2) - F(|u0|^2)) / (|u1|^2 - |u0|^2),  F(s) = 2/(p+1) s^{(p+1)/2},
// which keeps the discrete mass and energy constant.
void Stepper::conservative(std::vector<cplx>& u, double dt) {
  const int M = g_->M();
  const double e = 0.5 * (p_ - 1), e1 = 0.5 * (p_ + 1), c = 2.0 / (p_ + 1);
  const auto& lu = factor(dt);
  auto Su = g_->stiffness() * u;
  std::vector<cplx> base(M), a2(M);
  for (int j = 0; j < M; ++j) base[j] = g_->w(j) * u[j] - cplx(0, 0.5 * dt) * Su[j];
  std::vector<double> s0(M), F0(M);
  double umax = 0;
  for (int j = 0; j < M; ++j) {
    s0[j] = std::norm(u[j]);
    F0[j] = c * spow(s0[j], e1);
    umax = std::max(umax, std::sqrt(s0[j]));
  }
  std::vector<cplx> v = u;
  strang(v, dt);  // predictor
  std::vector<cplx> rhs(M);
  double prev = 1e300;
  int stall = 0;
  for (int it = 0; it < 60; ++it) {
    for (int j = 0; j < M; ++j) {
      double s1 = std::norm(v[j]);
      double d = s1 - s0[j], G;
      if (std::fabs(d) > 1e-7 * (s1 + s0[j]))
        G = (c * spow(s1, e1) - F0[j]) / d;
      else
        G = spow(0.5 * (s1 + s0[j]), e);
      rhs[j] = base[j] + cplx(0, 0.5 * dt) * g_->w(j) * G * (u[j] + v[j]);
    }
    lu.solve_in_place(rhs.data());
    double diff = 0;
    for (int j = 0; j < M; ++j) diff = std::max(diff, std::abs(rhs[j] - v[j]));
    v.swap(rhs);
    if (!std::isfinite(diff)) break;
    double scale = std::max(1.0, umax);
    if (diff <= 1e-14 * scale) {
      u.swap(v);
      return;
    }
    if (diff >= 0.5 * prev) ++stall;
    if (stall >= 3 && diff <= 1e-11 * scale) {
      u.swap(v);
      return;
    }
    if (stall >= 6) break;
    prev = diff;
  }
  throw LinearSolveFailure("implicit midpoint iteration did not converge");
}

void Stepper::step(std::vector<cplx>& u, double dt) {
  if (scheme_ == Scheme::strang)
    strang(u, dt);
  else
    conservative(u, dt);
}

RadialField step(const RadialField& u, double dt, const ModelParams& params) {
  u.check_finite();
  Stepper s(u.grid, params.p, Scheme::strang);
  auto v = u.v;
  s.step(v, dt);
  return RadialField(u.grid, std::move(v));
}

RadialField step_conservative(const RadialField& u, double dt, const ModelParams& params) {
  u.check_finite();
  Stepper s(u.grid, params.p, Scheme::conservative);
  auto v = u.v;
  s.step(v, dt);
  return RadialField(u.grid, std::move(v));
}

// ----------------------------------------------------------------------------

TrajectoryRecord evolve(const RadialField& u0, const EvolutionConfig& cfg, const GroundState& gs) {
  u0.check_finite();
  if (!u0.grid->same_as(*gs.grid)) throw GridError("initial datum and ground state differ in grid");
  const auto& g = *u0.grid;
  cfg.validate(g);
  const auto& prm = gs.params;
  const double sgn = cfg.direction == Direction::forward ? 1.0 : -1.0;
  const double gQ = std::sqrt(gs.grad2);
  const double ceil_factor = cfg.grad_ceiling > 0 ? cfg.grad_ceiling : std::pow(8.0, 1 - prm.sc);
  const double width = cfg.sponge_width < 0 ? g.rmax() / 5 : cfg.sponge_width;
  const auto sigma = sponge_profile(g, width, cfg.sponge_strength);
  const double gpQ = gQ * std::pow(std::sqrt(gs.mass2), prm.mass_exponent());

  TrajectoryRecord rec;
  rec.direction = cfg.direction;
  rec.grad_ceiling = ceil_factor * gQ;

  // Backward runs integrate v(t) = conj(u(-t)) forward.
  std::vector<cplx> v = u0.v;
  if (sgn < 0)
    for (auto& z : v) z = std::conj(z);

  Stepper stepper(u0.grid, prm.p, cfg.scheme);
  const double M0 = mass(g, v);
  const double lp0 = lp_sum(g, v, prm.p + 1);
  double t = 0, absorbed = 0, last_dt = 0, disperse_since = -1;

  auto record = [&](double gr2) {
    rec.times.push_back(sgn * t);
    double m = mass(g, v);
    rec.M_trace.push_back(m);
    rec.E_trace.push_back(energy(g, v, prm.p));
    double gn = std::sqrt(std::max(0.0, gr2));
    rec.gradnorm_trace.push_back(gn);
    rec.delta_trace.push_back(std::fabs(gs.grad2 - gr2));
    rec.dt_trace.push_back(last_dt);
    rec.grad_gap_trace.push_back(gn * std::pow(std::sqrt(m), prm.mass_exponent()) - gpQ);
    rec.absorbed_trace.push_back(absorbed);
    if (cfg.keep_snapshots) {
      RadialField f(u0.grid, v);
      if (sgn < 0)
        for (auto& z : f.v) z = std::conj(z);
      rec.snapshots.push_back(std::move(f));
    }
  };
  auto fail = [&](const std::string& why) {
    rec.stop_reason = StopReason::numerical_failure;
    rec.failure = why;
  };

  double gr2 = grad_sq(g, v);
  record(gr2);
  long step_no = 0;
  while (true) {
    if (t >= cfg.T * (1 - 1e-14)) {
      rec.stop_reason = StopReason::horizon;
      break;
    }
    // dt0 / (1 + |grad u|^2/|grad Q|^2) rounded to a quarter-octave ladder; the
    // rounding points sit between ladder values so dt does not flicker near Q.
    int m = static_cast<int>(std::ceil(4.0 * std::log2(1.0 + gr2 / gs.grad2) - 0.5));
    double dt = cfg.dt0 * std::exp2(-0.25 * std::max(m, 0));
    // land on T exactly instead of leaving a round-off sliver for one more step
    if (cfg.T - t <= dt * (1 + 1e-6)) dt = cfg.T - t;
    std::vector<cplx> trial;
    bool ok = false;
    for (int halve = 0; halve < 8 && !ok; ++halve, dt *= 0.5) {
      trial = v;
      try {
        stepper.step(trial, dt);
        ok = true;
      } catch (const LinearSolveFailure&) {
      }
      if (ok) break;
    }
    if (!ok) {
      fail("time step failed after repeated halving at t = " + std::to_string(sgn * t));
      record(gr2);
      break;
    }
    if (width > 0) {
      double before = mass(g, trial);
      for (int j = 0; j < g.M(); ++j)
        if (sigma[j] > 0) trial[j] *= std::exp(-sigma[j] * dt);
      absorbed += before - mass(g, trial);
    }
    v.swap(trial);
    t += dt;
    last_dt = dt;
    ++step_no;
    gr2 = grad_sq(g, v);
    if (!std::isfinite(gr2)) {
      fail("non-finite field at t = " + std::to_string(sgn * t));
      record(gr2);
      break;
    }
    double gn = std::sqrt(std::max(0.0, gr2));
    bool at_ceiling = gn >= rec.grad_ceiling;

    bool small = false;
    {
      double lp = lp_sum(g, v, prm.p + 1);
      small = lp < cfg.dispersal_fraction * lp0 && gn < gQ;
    }
    if (small) {
      if (disperse_since < 0) disperse_since = t;
    } else {
      disperse_since = -1;
    }
    bool dispersed = disperse_since >= 0 && t - disperse_since >= cfg.dispersal_window;
    bool done = at_ceiling || dispersed || t >= cfg.T * (1 - 1e-14);

    if (step_no % cfg.record_stride == 0 || done) {
      double drift = std::fabs(mass(g, v) + absorbed - M0) / M0;
      record(gr2);
      if (drift > cfg.mass_drift_limit) {
        fail("mass drift " + std::to_string(drift) + " exceeds the limit");
        break;
      }
    }
    if (at_ceiling) {
      rec.stop_reason = StopReason::blowup;
      break;
    }
    if (dispersed) {
      rec.stop_reason = StopReason::dispersal_proxy;
      break;
    }
  }
  rec.steps = step_no;
  return rec;
}

double orbit_distance(const RadialField& u, const GroundState& gs) {
  const auto& g = *gs.grid;
  auto SQ = g.stiffness() * gs.Q;
  cplx ip = 0;
  for (int j = 0; j < g.M(); ++j) ip += u.v[j] * (g.w(j) * gs.Q[j] + SQ[j]);
  cplx ph = std::abs(ip) > 0 ? std::conj(ip) / std::abs(ip) : cplx(1, 0);
  std::vector<cplx> d(g.M());
  for (int j = 0; j < g.M(); ++j) d[j] = ph * u.v[j] - gs.Q[j];
  return std::sqrt(mass(g, d) + std::max(0.0, grad_sq(g, d)));
}

ConvergenceFit convergence_to_Q(const TrajectoryRecord& rec, const GroundState& gs, double e0) {
  if (rec.snapshots.size() != rec.times.size() || rec.snapshots.size() < 3)
    throw InsufficientSamples("convergence fit needs recorded snapshots");
  double d0 = default_delta0(gs);
  if (!(rec.delta_trace.back() < d0))
    throw NotInOrbitNeighborhood("final delta " + std::to_string(rec.delta_trace.back()) +
                                 " is outside the modulation window");
  ConvergenceFit fit;
  const double H = gs.H1();
  double dmax = 0;
  for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
    double d = orbit_distance(rec.snapshots[i], gs);
    fit.times.push_back(std::fabs(rec.times[i]));
    fit.distance.push_back(d);
    dmax = std::max(dmax, d);
  }
  if (dmax <= 1e-8 * H) {
    fit.degenerate = true;
    fit.samples = static_cast<int>(fit.times.size());
    return fit;
  }
  // Fit the decay up to the closest approach; past it the unstable mode,
  // seeded by round-off, grows back at rate e0. Points within a factor 30 of
  // the minimum are treated as floor.
  std::size_t imin = 0;
  for (std::size_t i = 1; i < fit.distance.size(); ++i)
    if (fit.distance[i] < fit.distance[imin]) imin = i;
  const double dmin = fit.distance[imin];
  const bool floored = imin + 1 < fit.distance.size();
  std::vector<double> x, y;
  for (std::size_t i = 0; i <= imin; ++i)
    if (fit.distance[i] > 1e-9 * H && (!floored || fit.distance[i] > 30 * dmin)) {
      x.push_back(fit.times[i]);
      y.push_back(std::log(fit.distance[i]));
    }
  if (x.size() < 3) throw InsufficientSamples("too few samples above the distance floor");
  fit.rate = -fit_slope(x, y);
  fit.ratio_to_e0 = fit.rate / e0;
  fit.samples = static_cast<int>(x.size());
  return fit;
}

}  // namespace tl
