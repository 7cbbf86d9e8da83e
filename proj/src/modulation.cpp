#include "tlab/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tlab/errors.hpp"

namespace tl {

namespace {

double wrap(double a) {
  const double tp = 2 * std::numbers::pi;
  a = std::fmod(a, tp);
  if (a <= -std::numbers::pi) a += tp;
  if (a > std::numbers::pi) a -= tp;
  return a;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double delta(const RadialField& u, const GroundState& gs) {
  u.check_finite();
  return std::fabs(gs.grad2 - grad_sq(*u.grid, u.v));
}

double default_delta0(const GroundState& gs) { return 0.05 * gs.grad2; }

ModulationFrame decompose(const RadialField& u, double t, const GroundState& gs, double delta0) {
  u.check_finite();
  if (!u.grid->same_as(*gs.grid)) throw GridError("field and ground state live on different grids");
  const auto& g = *gs.grid;
  const double om = gs.params.omega;
  ModulationFrame f;
  f.t = t;
  f.delta = delta(u, gs);
  double d0 = delta0 > 0 ? delta0 : default_delta0(gs);
  if (!(f.delta < d0))
    throw OutsideWindow("delta = " + std::to_string(f.delta) + " is not below " +
                        std::to_string(d0));
  cplx c = 0;
  for (int j = 0; j < g.M(); ++j) c += g.w(j) * u.v[j] * gs.Q[j];
  if (std::abs(c) < 1e-12) throw PhaseAmbiguity("int u Q vanishes; the phase is undefined");

  // Im(e^{-i theta - i w t} c) = 0 with the real part positive.
  double th = std::arg(c) - om * t;
  for (int it = 0; it < 3; ++it) {
    cplx z = std::polar(1.0, -th - om * t) * c;
    if (z.real() <= 0) break;
    double step = z.imag() / z.real();
    th += step;
    if (std::fabs(step) < 1e-17) break;
  }
  f.theta = wrap(th);

  cplx ph = std::polar(1.0, -f.theta - om * t);
  std::vector<double> v1(g.M());
  for (int j = 0; j < g.M(); ++j) v1[j] = (ph * u.v[j]).real();
  f.alpha = grad_dot(g, v1, gs.Q) / gs.grad2 - 1.0;
  f.h = RadialField(u.grid);
  for (int j = 0; j < g.M(); ++j) f.h.v[j] = ph * u.v[j] - (1 + f.alpha) * gs.Q[j];
  f.h_H1 = std::sqrt(mass(g, f.h.v) + std::max(0.0, grad_sq(g, f.h.v)));
  f.in_window = true;
  return f;
}

RadialField reconstruct(const ModulationFrame& f, const GroundState& gs) {
  RadialField u(gs.grid);
  cplx ph = std::polar(1.0, f.theta + gs.params.omega * f.t);
  for (int j = 0; j < u.size(); ++j) u.v[j] = ph * ((1 + f.alpha) * gs.Q[j] + f.h.v[j]);
  return u;
}

ModulationRates modulation_rates(const std::vector<ModulationFrame>& frames) {
  std::vector<const ModulationFrame*> in;
  for (const auto& f : frames)
    if (f.in_window) in.push_back(&f);
  if (in.size() < 3) throw InsufficientSamples("modulation rates need three in-window frames");
  ModulationRates r;
  double unwrap = 0;
  for (std::size_t i = 1; i < in.size(); ++i) {
    const auto& a = *in[i - 1];
    const auto& b = *in[i];
    double dt = b.t - a.t;
    if (dt == 0) continue;
    double dth = wrap(b.theta - a.theta);
    unwrap += dth;
    double dl = 0.5 * (a.delta + b.delta);
    if (!(dl > 0)) continue;
    r.times.push_back(0.5 * (a.t + b.t));
    r.alpha_ratio.push_back(std::fabs((b.alpha - a.alpha) / dt) / dl);
    r.theta_ratio.push_back(std::fabs(dth / dt) / dl);
  }
  if (r.times.size() < 2) throw InsufficientSamples("modulation rates need distinct frame times");
  r.sup_alpha = *std::max_element(r.alpha_ratio.begin(), r.alpha_ratio.end());
  r.sup_theta = *std::max_element(r.theta_ratio.begin(), r.theta_ratio.end());
  double ma = median(r.alpha_ratio), mt = median(r.theta_ratio);
  r.alpha_max_over_median = ma > 0 ? r.sup_alpha / ma : INFINITY;
  r.theta_max_over_median = mt > 0 ? r.sup_theta / mt : INFINITY;
  return r;
}

WindowEquivalence window_equivalence(const std::vector<ModulationFrame>& frames) {
  WindowEquivalence w;
  w.alpha_min = w.h_min = INFINITY;
  for (const auto& f : frames) {
    if (!f.in_window || !(f.delta > 0)) continue;
    double a = std::fabs(f.alpha) / f.delta, h = f.h_H1 / f.delta;
    w.alpha_min = std::min(w.alpha_min, a);
    w.alpha_max = std::max(w.alpha_max, a);
    w.h_min = std::min(w.h_min, h);
    w.h_max = std::max(w.h_max, h);
    ++w.frames;
  }
  if (w.frames == 0) throw InsufficientSamples("no in-window frames");
  w.C = std::max({w.alpha_max, w.h_max, 1.0 / w.alpha_min, 1.0 / w.h_min});
  return w;
}

}  // namespace tl
