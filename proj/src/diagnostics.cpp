#include "tlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "tlab/errors.hpp"
#include "tlab/modulation.hpp"

namespace tl {

double cutoff_phi(double x) {
  if (x <= 1) return x * x;
  if (x >= 2) return 2.5;
  double s = x - 1, s2 = s * s;
  return 1 + 2 * s + s2 - 3.5 * s2 * s2 + 2 * s2 * s2 * s;
}

double cutoff_dphi(double x) {
  if (x <= 1) return 2 * x;
  if (x >= 2) return 0;
  double s = x - 1;
  return 2 + 2 * s - 14 * s * s * s + 10 * s * s * s * s;
}

double cutoff_d2phi(double x) {
  if (x <= 1) return 2;
  if (x >= 2) return 0;
  double s = x - 1;
  return 2 - 42 * s * s + 40 * s * s * s;
}

Cutoff make_cutoff(double R, const RadialGrid& g) {
  if (!(R > 0) || !(2 * R < g.rmax()))
    throw CutoffOutOfDomain("cutoff scale R = " + std::to_string(R) + " needs 0 < 2R < Rmax");
  Cutoff c;
  c.R = R;
  const int M = g.M();
  c.phi.resize(M);
  c.dphi.resize(M);
  c.d2phi.resize(M);
  c.lap.resize(M);
  for (int j = 0; j < M; ++j) {
    double x = g.r(j) / R;
    c.phi[j] = cutoff_phi(x);
    c.dphi[j] = cutoff_dphi(x);
    c.d2phi[j] = cutoff_d2phi(x);
    c.lap[j] = c.d2phi[j] + (g.N() - 1) * c.dphi[j] / x;
  }
  return c;
}

VirialQuantities virial_quantities(const RadialField& u, const Cutoff& c, const GroundState& gs) {
  u.check_finite();
  const auto& g = *u.grid;
  if (!g.same_as(*gs.grid)) throw GridError("field and ground state live on different grids");
  if (static_cast<int>(c.phi.size()) != g.M() || !(2 * c.R < g.rmax()))
    throw CutoffOutOfDomain("cutoff does not match the grid");
  const double p = gs.params.p, R = c.R;
  const int N = g.N(), M = g.M();
  VirialQuantities q;

  std::vector<double> rho(M);
  for (int j = 0; j < M; ++j) rho[j] = std::norm(u.v[j]);
  for (int j = 0; j < M; ++j) q.yR += g.w(j) * R * R * c.phi[j] * rho[j];

  auto ur = g.face_gradient(u.v);
  auto uf = g.face_values(u.v);
  const auto& fw = g.face_weights();
  double ip = 0, kin = 0;
  for (int m = 0; m < g.face_count(); ++m) {
    double x = g.face_r(m) / R;
    ip += fw[m] * cutoff_dphi(x) * (std::conj(uf[m]) * ur[m]).imag();
    kin += fw[m] * (cutoff_d2phi(x) - 2) * std::norm(ur[m]);
  }
  q.yR_prime = 2 * R * ip;

  // int Delta^2 phi_R |u|^2 = int Delta phi_R Delta |u|^2 = -lap^T S |u|^2
  auto Srho = g.stiffness() * rho;
  double bil = 0;
  for (int j = 0; j < M; ++j) bil -= c.lap[j] * Srho[j];
  double pot = 0;
  for (int j = 0; j < M; ++j)
    if (c.lap[j] != 2.0 * N) pot += g.w(j) * (c.lap[j] - 2.0 * N) * std::pow(rho[j], 0.5 * (p + 1));
  q.AR = 4 * kin - bil - 2 * (p - 1) / (p + 1) * pot;
  q.yR_second = (2 * N * (p - 1) - 8) * (gs.grad2 - grad_sq(g, u.v)) + q.AR;
  return q;
}

VirialTrace virial_trace(const TrajectoryRecord& rec, const Cutoff& c, const GroundState& gs) {
  const std::size_t n = rec.snapshots.size();
  if (n != rec.times.size() || n < 3)
    throw InsufficientSamples("virial trace needs at least three recorded snapshots");
  VirialTrace tr;
  tr.R = c.R;
  for (std::size_t i = 0; i < n; ++i) {
    auto q = virial_quantities(rec.snapshots[i], c, gs);
    tr.times.push_back(rec.times[i]);
    tr.yR.push_back(q.yR);
    tr.yR_prime.push_back(q.yR_prime);
    tr.yR_second.push_back(q.yR_second);
    tr.AR.push_back(q.AR);
  }
  tr.consistency_residual.assign(n, 0.0);
  double ymax = 0, hmax = 0, skew = 0, d3 = 0, d4 = 0;
  for (std::size_t i = 0; i < n; ++i) ymax = std::max(ymax, std::fabs(tr.yR_second[i]));
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double h1 = tr.times[i] - tr.times[i - 1], h2 = tr.times[i + 1] - tr.times[i];
    if (h1 == 0 || h2 == 0) continue;
    hmax = std::max({hmax, std::fabs(h1), std::fabs(h2)});
    skew = std::max(skew, std::fabs(std::fabs(h2) - std::fabs(h1)));
    double fd = 2 * ((tr.yR[i + 1] - tr.yR[i]) / h2 - (tr.yR[i] - tr.yR[i - 1]) / h1) / (h1 + h2);
    tr.consistency_residual[i] = std::fabs(fd - tr.yR_second[i]);
    tr.max_residual = std::max(tr.max_residual, tr.consistency_residual[i]);
    // third and fourth derivatives from differences of the formula values
    d3 = std::max(d3, std::fabs((tr.yR_second[i + 1] - tr.yR_second[i]) / h2));
    double dd = 2 * ((tr.yR_second[i + 1] - tr.yR_second[i]) / h2 -
                     (tr.yR_second[i] - tr.yR_second[i - 1]) / h1) / (h1 + h2);
    d4 = std::max(d4, std::fabs(dd));
  }
  // Second differences on a non-uniform record carry (h2 - h1)/3 y''' plus
  // (h^2/12) y''''; factor 2 for the derivative estimates. Spatial part:
  // h^2 max|y''| plus the consistency error of the formula itself. The bridge
  // is only C^2, so quadrature across its joins is O(h^2) with a constant set
  // by the density there. A_R(Q) vanishes exactly in the continuum, so its
  // discrete value measures that error; it is scaled by the mass in the
  // annulus R <= r <= 2R relative to Q.
  const auto& g = *gs.grid;
  auto annulus = [&](const RadialField& u) {
    double m = 0;
    for (int j = 0; j < g.M(); ++j)
      if (g.r(j) >= 0.5 * c.R && g.r(j) <= 2.5 * c.R) m += g.w(j) * std::norm(u.v[j]);
    return m;
  };
  const double aq = std::fabs(virial_quantities(gs.field(), c, gs).AR), mq = annulus(gs.field());
  double ratio = 0;
  for (const auto& u : rec.snapshots) ratio = std::max(ratio, annulus(u) / mq);
  const double h = g.h();
  tr.budget = 2 * (skew / 3 * d3 + hmax * hmax / 12 * d4) + h * h * ymax + 2 * aq * ratio +
              1e-9 * (1 + ymax);
  tr.within_budget = tr.max_residual <= tr.budget;
  return tr;
}

double tail_rho(const RadialField& u, double R, const ModelParams& params) {
  u.check_finite();
  const auto& g = *u.grid;
  if (!(R > 0) || !(R < g.rmax() / 2))
    throw CutoffOutOfDomain("tail functional needs 0 < R < Rmax/2");
  const int M = g.M();
  std::vector<double> pre(M + 1, 0.0);
  for (int j = 0; j < M; ++j) pre[j + 1] = pre[j] + g.w(j) * std::norm(u.v[j]);
  double best = 0;
  int hi = 0;
  for (int j = 0; j < M; ++j) {
    double Rp = g.r(j);
    if (Rp < R) continue;
    if (Rp > g.rmax() / 2) break;
    while (hi < M && g.r(hi) < 2 * Rp) ++hi;
    double shell = pre[hi] - pre[j];
    best = std::max(best, std::pow(Rp, -2 * params.sc) * shell);
  }
  return best;
}

double localized_momentum_ratio(const RadialField& f, const Cutoff& c, const GroundState& gs) {
  const auto& g = *f.grid;
  auto ur = g.face_gradient(f.v);
  auto uf = g.face_values(f.v);
  const auto& fw = g.face_weights();
  double im = 0, den = 0;
  for (int m = 0; m < g.face_count(); ++m) {
    double gp = c.R * cutoff_dphi(g.face_r(m) / c.R);
    im += fw[m] * gp * (std::conj(uf[m]) * ur[m]).imag();
    den += fw[m] * gp * gp * std::norm(uf[m]);
  }
  double d = delta(f, gs);
  if (!(d > 0) || !(den > 0)) throw DegenerateInput("ratio undefined for delta = 0 or zero field");
  return im * im / (d * d * den);
}

VirialSignSearch virial_sign_search(const TrajectoryRecord& rec, const GroundState& gs,
                                    const std::vector<double>& radii) {
  if (rec.snapshots.empty()) throw InsufficientSamples("virial search needs snapshots");
  const double k = gs.params.N * (gs.params.p - 1) - 4;
  VirialSignSearch s;
  for (double R : radii) {
    if (!(2 * R < gs.grid->rmax())) continue;
    auto c = make_cutoff(R, *gs.grid);
    double worst = -INFINITY;
    for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
      auto q = virial_quantities(rec.snapshots[i], c, gs);
      worst = std::max(worst, q.yR_second + k * rec.delta_trace[i]);
    }
    s.radii.push_back(R);
    s.worst_margin.push_back(worst);
    if (s.R == 0 && worst <= 0) s.R = R;
  }
  return s;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::blowup: return "blowup";
    case Verdict::converges_to_Q: return "converges_to_Q";
    case Verdict::disperses: return "disperses";
    case Verdict::undetermined: return "undetermined";
  }
  return "?";
}

Classification classify(const TrajectoryRecord& rec, const GroundState& gs, double e0,
                        const ClassifierConfig& cfg) {
  Classification c;
  c.stop_reason = rec.stop_reason;
  const std::size_t n = rec.times.size();
  if (!rec.snapshots.empty()) {
    c.threshold = threshold_report(rec.snapshots.front(), gs);
  } else if (n > 0) {
    // from the traces; the record starts at u0
    auto& r = c.threshold;
    const double e = gs.params.mass_exponent();
    r.me_product = std::pow(rec.M_trace[0], e) * rec.E_trace[0];
    r.grad_product = rec.gradnorm_trace[0] * std::pow(rec.M_trace[0], 0.5 * e);
    r.me_Q = gs.me_Q;
    r.grad_Q = gs.grad_Q;
    r.tolerance = kThresholdTolerance;
    r.me_side = compare_with_tolerance(r.me_product, r.me_Q, r.tolerance);
    r.grad_side = compare_with_tolerance(r.grad_product, r.grad_Q, r.tolerance);
  }
  for (std::size_t i = 1; i < n; ++i) {
    double a = 0.5 * (rec.delta_trace[i] + rec.delta_trace[i - 1]) *
               std::fabs(rec.times[i] - rec.times[i - 1]);
    c.delta_integral += a;
    if (i > n / 2) c.delta_tail_integral += a;
  }
  const double kv = 2 * gs.params.N * (gs.params.p - 1) - 8;
  for (std::size_t i = 0; i < n; ++i) {
    double gr2 = rec.gradnorm_trace[i] * rec.gradnorm_trace[i];
    double y2 = kv * (gs.grad2 - gr2);
    if (y2 < 0) ++c.virial_negative;
    if (y2 > 0) ++c.virial_positive;
  }

  switch (rec.stop_reason) {
    case StopReason::blowup:
      c.verdict = Verdict::blowup;
      c.reason = "gradient ceiling reached";
      return c;
    case StopReason::dispersal_proxy:
      c.verdict = Verdict::disperses;
      c.reason = "dispersal proxy sustained (finite-horizon stand-in for scattering)";
      return c;
    case StopReason::numerical_failure:
      c.verdict = Verdict::undetermined;
      c.reason = "numerical failure: " + rec.failure;
      return c;
    case StopReason::horizon:
      break;
  }
  double d0 = cfg.delta0 > 0 ? cfg.delta0 : default_delta0(gs);
  if (n == 0 || !(rec.delta_trace.back() < d0)) {
    c.verdict = Verdict::undetermined;
    c.reason = "horizon reached outside the modulation window";
    return c;
  }
  try {
    c.fit_attempted = true;
    auto fit = convergence_to_Q(rec, gs, e0);
    c.fit_degenerate = fit.degenerate;
    c.fit_rate = fit.rate;
    c.fit_ratio = fit.ratio_to_e0;
    if (fit.degenerate) {
      c.verdict = Verdict::converges_to_Q;
      c.reason = "on the orbit of Q throughout";
    } else if (fit.rate >= cfg.rate_fraction * e0) {
      c.verdict = Verdict::converges_to_Q;
      c.reason = "exponential approach to the orbit of Q";
    } else {
      c.verdict = Verdict::undetermined;
      c.reason = "convergence rate below the classifier fraction of e0";
    }
  } catch (const Error& e) {
    c.verdict = Verdict::undetermined;
    c.reason = std::string("convergence fit failed: ") + e.what();
  }
  return c;
}

}  // namespace tl
