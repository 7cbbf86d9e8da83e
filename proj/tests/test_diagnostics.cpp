#include <cmath>

#include "common.hpp"
#include "doctest.h"
#include "tlab/diagnostics.hpp"
#include "tlab/errors.hpp"
#include "tlab/modulation.hpp"
#include "tlab/profiles.hpp"

using namespace tl;

namespace {
RadialField qplus(const tlt::Setup& s) {
  auto ex = build_profiles(1.0, 3, *s.pair, *s.op);
  return special_seed(1, ex, select_t0(ex, 1e-3));
}
}  // namespace

TEST_CASE("cutoff values and plateau") {
  CHECK(cutoff_phi(0.5) == doctest::Approx(0.25));
  CHECK(cutoff_dphi(0.5) == doctest::Approx(1.0));
  for (double x = 2; x <= 10; x += 0.125) CHECK(cutoff_dphi(x) == 0);
  for (double x = 0; x <= 10; x += 1e-3) CHECK(cutoff_phi(x) >= 0);
  // C2 joins
  for (double x : {1.0, 2.0}) {
    CAPTURE(x);
    const double e = 1e-12;
    CHECK(std::fabs(cutoff_phi(x + e) - cutoff_phi(x - e)) <= 1e-10);
    CHECK(std::fabs(cutoff_dphi(x + e) - cutoff_dphi(x - e)) <= 1e-10);
    CHECK(std::fabs(cutoff_d2phi(x + e) - cutoff_d2phi(x - e)) <= 1e-10);
  }
}

TEST_CASE("cutoff curvature bounds on a dense grid") {
  auto g = make_grid(3, 4096, 40);
  auto c = make_cutoff(5, *g);
  double mx = -INFINITY, mn = INFINITY;
  for (double v : c.d2phi) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
  }
  CHECK(mx <= 2 + 1e-9);
  CHECK(mn >= -1e-9);
  for (int j = 0; j < g->M(); ++j)
    if (g->r(j) >= 10) CHECK(c.dphi[j] == 0);
  CHECK_THROWS_AS(make_cutoff(20, *g), CutoffOutOfDomain);
  CHECK_THROWS_AS(make_cutoff(0, *g), CutoffOutOfDomain);
}

TEST_CASE("virial quantities of the standing wave") {
  auto s = tlt::setup(3, 3, 4096, false);
  const auto& gs = *s.gs;
  const double sw = std::sqrt(gs.params.omega);
  double prev = INFINITY;
  for (double f : {10.0, 12.0, 15.0}) {
    CAPTURE(f);
    auto c = make_cutoff(f / sw, *gs.grid);
    RadialField u(gs.grid);
    cplx ph = std::polar(1.0, 0.8);
    for (int j = 0; j < u.size(); ++j) u.v[j] = ph * gs.Q[j];
    auto q = virial_quantities(u, c, gs);
    CHECK(std::fabs(q.AR) <= 1e-6);
    CHECK(std::fabs(q.AR) <= prev);
    prev = std::fabs(q.AR);
    CHECK(std::fabs(q.yR_prime) <= 1e-12 * q.yR);
  }
}

TEST_CASE("real data have zero virial derivative") {
  auto s = tlt::setup(3, 3);
  const auto& gs = *s.gs;
  auto u = qplus(s);
  auto re = RadialField::from_real(gs.grid, u.real());
  auto c = make_cutoff(5, *gs.grid);
  CHECK(virial_quantities(re, c, gs).yR_prime == 0);
}

TEST_CASE("virial trace consistency and sign search") {
  auto s = tlt::setup(3, 3);
  const auto& gs = *s.gs;
  EvolutionConfig cfg;
  cfg.T = 6;
  cfg.direction = Direction::backward;
  auto rec = evolve(qplus(s), cfg, gs);
  REQUIRE(rec.stop_reason == StopReason::blowup);
  const double sw = std::sqrt(gs.params.omega);
  for (double f : {2.0, 5.0, 10.0}) {
    CAPTURE(f);
    auto tr = virial_trace(rec, make_cutoff(f / sw, *gs.grid), gs);
    CHECK(tr.consistency_residual.front() == 0);
    CHECK(tr.consistency_residual.back() == 0);
    CHECK(tr.within_budget);
    MESSAGE("R = " << tr.R << " residual " << tr.max_residual << " budget " << tr.budget);
  }
  auto ss = virial_sign_search(rec, gs, {2 / sw, 5 / sw, 10 / sw, 15 / sw});
  CHECK(ss.radii.size() == 4);
  CHECK(ss.R > 0);
  for (std::size_t i = 0; i < ss.radii.size(); ++i)
    if (ss.radii[i] == ss.R) CHECK(ss.worst_margin[i] <= 0);

  auto cl = classify(rec, gs, s.pair->e0);
  CHECK(cl.verdict == Verdict::blowup);
  auto cl2 = classify(rec, gs, s.pair->e0);
  CHECK(cl2.verdict == cl.verdict);
  CHECK(cl2.reason == cl.reason);
  CHECK(cl2.delta_integral == cl.delta_integral);
}

TEST_CASE("tail functional") {
  auto s = tlt::setup(3, 3, 4096, false);
  const auto& gs = *s.gs;
  const auto& g = *gs.grid;
  const double sw = std::sqrt(gs.params.omega);
  RadialField b(gs.grid);
  for (int j = 0; j < g.M(); ++j)
    if (g.r(j) < 3) b.v[j] = 1 - g.r(j) / 3;
  CHECK(tail_rho(b, 4, gs.params) == 0);
  double r5 = tail_rho(gs.field(), 5 / sw, gs.params);
  CHECK(r5 > 0);
  CHECK(r5 < 1e-2 * gs.mass2);
  double prev = INFINITY;
  for (double f : {1.0, 2.0, 5.0, 8.0, 12.0}) {
    double v = tail_rho(gs.field(), f / sw, gs.params);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(tail_rho(gs.field(), g.rmax() / 2 + 1, gs.params), CutoffOutOfDomain);
}

TEST_CASE("localized momentum ratio stays bounded on in-window fields") {
  auto s = tlt::setup(3, 3);
  const auto& gs = *s.gs;
  auto c = make_cutoff(5, *gs.grid);
  double mx = 0;
  for (double eps : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}) {
    RadialField f(gs.grid);
    for (int j = 0; j < f.size(); ++j)
      f.v[j] = cplx(gs.Q[j] + eps * s.pair->Y1[j], eps * s.pair->Y2[j]);
    double r = localized_momentum_ratio(f, c, gs);
    CHECK(std::isfinite(r));
    mx = std::max(mx, r);
  }
  MESSAGE("momentum ratio constant " << mx);
  CHECK(mx < 1e6);
}

TEST_CASE("classifier on the standing wave and small data") {
  auto s = tlt::setup(3, 3);
  const auto& gs = *s.gs;
  EvolutionConfig cfg;
  cfg.T = 2;
  auto rq = evolve(gs.field(), cfg, gs);
  auto cq = classify(rq, gs, s.pair->e0);
  CHECK(cq.verdict == Verdict::converges_to_Q);
  CHECK(cq.fit_degenerate);

  auto u = gs.field();
  for (auto& z : u.v) z *= 0.5;
  EvolutionConfig c2;
  c2.T = 100;
  c2.keep_snapshots = false;
  auto rs = evolve(u, c2, gs);
  auto cs = classify(rs, gs, s.pair->e0);
  CHECK(cs.verdict == Verdict::disperses);
  CHECK(rs.stop_reason == StopReason::dispersal_proxy);
  CHECK(cs.threshold.me_side == Side::below);
}
