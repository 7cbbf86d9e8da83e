#include "tlab/random_fields.hpp"

#include <algorithm>
#include <cmath>

#include "tlab/errors.hpp"

namespace tl {

RadialField random_bump(GridPtr g, double omega, std::mt19937_64& rng, bool complex_valued) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double L = 1.0 / std::sqrt(omega);
  RadialField f(g);
  int k = 1 + static_cast<int>(U(rng) * 3);
  if (k > 3) k = 3;
  for (int i = 0; i < k; ++i) {
    double c = 4 * L * U(rng);
    double w = L * (0.3 + 2.2 * U(rng));
    cplx a(2 * U(rng) - 1, complex_valued ? 2 * U(rng) - 1 : 0.0);
    for (int j = 0; j < f.size(); ++j) {
      double x = (g->r(j) - c) / w;
      f.v[j] += a * std::exp(-x * x);
    }
  }
  return f;
}

CoercivityReport sample_coercivity(const LinearizedOperator& op, const EigenPair& pair, int n,
                                   std::uint64_t seed) {
  if (n < 1) throw DegenerateInput("coercivity sampling needs at least one field");
  const auto& gs = *op.gs;
  std::mt19937_64 rng(seed);
  CoercivityReport r;
  r.min_ratio = INFINITY;
  r.max_ratio = -INFINITY;
  for (int i = 0; i < n; ++i) {
    auto h = project_both(random_bump(gs.grid, gs.params.omega, rng, true), op, pair);
    double nh = h1_norm(h);
    if (!(nh > 0)) continue;
    double q = phi(h, op) / (nh * nh);
    r.min_ratio = std::min(r.min_ratio, q);
    r.max_ratio = std::max(r.max_ratio, q);
    ++r.samples;
  }
  auto Q = gs.field();
  RadialField iQ(gs.grid);
  for (int j = 0; j < iQ.size(); ++j) iQ.v[j] = cplx(0, gs.Q[j]);
  r.phi_Q = phi(Q, op);
  r.phi_iQ = phi(iQ, op);
  r.phi_Yplus = phi(pair.Yplus(gs.grid), op);
  return r;
}

}  // namespace tl
