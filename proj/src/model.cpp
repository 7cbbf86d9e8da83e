#include "tlab/model.hpp"

#include <cmath>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/groundstate.hpp"

namespace tl {

ModelParams derive_params(int N, double p) {
  if (N < 1) throw CriticalityError(NAN, "dimension must be >= 1");
  if (!(p > 1) || !std::isfinite(p)) throw CriticalityError(NAN, "exponent must exceed 1");
  ModelParams prm;
  prm.N = N;
  prm.p = p;
  prm.sc = N / 2.0 - 2.0 / (p - 1.0);
  prm.omega = 1.0 - prm.sc;
  if (!(prm.sc > 0) || !(prm.sc < 1)) {
    std::ostringstream os;
    os.precision(17);
    os << "s_c = " << prm.sc << " outside (0,1) for N = " << N << ", p = " << p;
    throw CriticalityError(prm.sc, os.str());
  }
  return prm;
}

double energy(const RadialGrid& g, const std::vector<cplx>& u, double p) {
  return 0.5 * grad_sq(g, u) - lp_sum(g, u, p + 1) / (p + 1);
}

ConservedTriple conserved(const RadialField& u, const ModelParams& params) {
  u.check_finite();
  if (u.grid->N() != params.N) throw GridError("grid dimension differs from model dimension");
  ConservedTriple c;
  c.mass = mass(*u.grid, u.v);
  c.energy = energy(*u.grid, u.v, params.p);
  c.momentum.assign(params.N, 0.0);
  return c;
}

std::string to_string(Side s) {
  switch (s) {
    case Side::below: return "below";
    case Side::at: return "at";
    case Side::above: return "above";
  }
  return "?";
}

Side compare_with_tolerance(double value, double reference, double rel_tol) {
  double d = value - reference;
  if (std::fabs(d) <= rel_tol * std::fabs(reference)) return Side::at;
  return d < 0 ? Side::below : Side::above;
}

double me_product(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm) {
  return std::pow(mass(g, u), prm.mass_exponent()) * energy(g, u, prm.p);
}

double grad_product(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm) {
  return std::sqrt(std::max(0.0, grad_sq(g, u))) *
         std::pow(std::sqrt(mass(g, u)), prm.mass_exponent());
}

ThresholdReport threshold_report(const RadialField& u, const GroundState& gs) {
  u.check_finite();
  if (!u.grid->same_as(*gs.grid)) throw GridError("field and ground state live on different grids");
  ThresholdReport r;
  r.me_product = me_product(*u.grid, u.v, gs.params);
  r.grad_product = grad_product(*u.grid, u.v, gs.params);
  r.me_Q = gs.me_Q;
  r.grad_Q = gs.grad_Q;
  r.tolerance = kThresholdTolerance;
  r.me_side = compare_with_tolerance(r.me_product, r.me_Q, r.tolerance);
  r.grad_side = compare_with_tolerance(r.grad_product, r.grad_Q, r.tolerance);
  return r;
}

namespace {

// Eight-point Lagrange interpolation (degree 7) with even reflection at the
// origin and zeros beyond Rmax.
cplx interp_lagrange(const RadialGrid& g, const std::vector<cplx>& u, double x) {
  constexpr int K = 8;
  const double h = g.h();
  const int M = g.M();
  double s = x / h - 0.5;  // fractional node index
  int j0 = static_cast<int>(std::floor(s)) - (K / 2 - 1);
  if (j0 > M) return cplx(0, 0);
  auto sample = [&](int j) -> cplx {
    if (j < 0) j = -j - 1;
    return j < M ? u[j] : cplx(0, 0);
  };
  cplx acc = 0;
  for (int a = 0; a < K; ++a) {
    if (s == j0 + a) return sample(j0 + a);
    double la = 1.0;
    for (int b = 0; b < K; ++b)
      if (b != a) la *= (s - (j0 + b)) / double(a - b);
    acc += la * sample(j0 + a);
  }
  return acc;
}

}  // namespace

RadialField scale_field(const RadialField& u, double lambda, double p) {
  u.check_finite();
  const auto& g = *u.grid;
  RadialField out(u.grid);
  double amp = std::pow(lambda, 2.0 / (p - 1.0));
  for (int j = 0; j < g.M(); ++j) out.v[j] = amp * interp_lagrange(g, u.v, lambda * g.r(j));
  return out;
}

std::pair<RadialField, double> rescale_to_Q_mass(const RadialField& u0, const GroundState& gs) {
  u0.check_finite();
  double m0 = mass(*u0.grid, u0.v);
  if (!(m0 > 0)) throw DegenerateInput("rescale_to_Q_mass needs a field with positive mass");
  // M(lambda^{2/(p-1)} u(lambda x)) = lambda^{-2 s_c} M(u).
  // Resampling and the cut at Rmax perturb this, so polish log(lambda) by
  // secant steps on the recomputed mass.
  const auto& g = *u0.grid;
  auto defect = [&](double ll) {
    return std::log(mass(g, scale_field(u0, std::exp(ll), gs.params.p).v) / gs.mass2);
  };
  double l0 = -std::log(gs.mass2 / m0) / (2.0 * gs.params.sc);
  double f0 = defect(l0);
  double l1 = l0 - f0 / (-2.0 * gs.params.sc), f1 = defect(l1);
  for (int it = 0; it < 30 && std::fabs(f1) > 1e-14 && f1 != f0; ++it) {
    double l2 = l1 - f1 * (l1 - l0) / (f1 - f0);
    l0 = l1;
    f0 = f1;
    l1 = l2;
    f1 = defect(l1);
  }
  if (!(std::fabs(f1) < 1e-10))
    throw NoConvergence("could not match the mass of Q by rescaling (field cut at Rmax?)");
  double lambda = std::exp(l1);
  return {scale_field(u0, lambda, gs.params.p), lambda};
}

std::pair<double, double> galilean_reduced(double M, double E, double Pnorm) {
  if (!(M > 0)) throw DegenerateInput("Galilean reduction needs positive mass");
  return {M, E - 0.5 * Pnorm * Pnorm / M};
}

}  // namespace tl
