#include <cmath>
#include <filesystem>
#include <random>

#include "common.hpp"
#include "doctest.h"
#include "tlab/errors.hpp"
#include "tlab/profiles.hpp"
#include "tlab/random_fields.hpp"

using namespace tl;

namespace {
const std::pair<int, double> kMatrix[] = {{1, 7.0}, {2, 5.0}, {3, 3.0}, {3, 4.0}, {4, 2.5}};

std::vector<double> sech_soliton(const RadialGrid& g, double p, double omega) {
  std::vector<double> q(g.M());
  double Q0 = std::pow(omega * (p + 1) / 2, 1 / (p - 1));
  for (int j = 0; j < g.M(); ++j)
    q[j] = Q0 * std::pow(1 / std::cosh((p - 1) * std::sqrt(omega) * g.r(j) / 2), 2 / (p - 1));
  return q;
}
}  // namespace

TEST_CASE("1D p = 7 profile matches the sech soliton") {
  auto s = tlt::setup(1, 7, 4096, false);
  const auto& gs = *s.gs;
  auto ex = sech_soliton(*gs.grid, 7, gs.params.omega);
  double err = 0;
  for (int j = 0; j < gs.grid->M(); ++j) err = std::max(err, std::fabs(gs.Q[j] - ex[j]));
  CHECK(err <= 1e-7);
  CHECK(gs.Q0 == doctest::Approx(std::pow(gs.params.omega * 4, 1.0 / 6)).epsilon(1e-7));
}

TEST_CASE("inadmissible parameters propagate CriticalityError") {
  CHECK_THROWS_AS(solve_ground_state(derive_params(3, 5.0 / 3), make_grid(3, 128, 10)),
                  CriticalityError);
}

TEST_CASE("ground state properties over the test matrix") {
  for (auto [N, p] : kMatrix) {
    CAPTURE(N);
    CAPTURE(p);
    auto s = tlt::setup(N, p, 4096, false);
    const auto& gs = *s.gs;
    const auto& g = *gs.grid;
    const int M = g.M();
    bool positive = true, decreasing = true;
    for (int j = 0; j < M; ++j) {
      positive = positive && gs.Q[j] > 0;
      if (j) decreasing = decreasing && gs.Q[j] < gs.Q[j - 1];
    }
    CHECK(positive);
    CHECK(decreasing);
    CHECK(gs.Q[M - 1] < 1e-12 * gs.Q0);
    CHECK(gs.residual <= 1e-8);
    auto pz = verify_pohozaev(gs);
    for (double r : pz.residual) CHECK(std::fabs(r) <= 1e-6);
    CHECK(pz.pass());
    // tail: log(Q r^{(N-1)/2}) has slope -sqrt(omega)
    double L = 1 / std::sqrt(gs.params.omega);
    std::vector<double> x, y;
    for (int j = 0; j < M; ++j)
      if (g.r(j) >= 10 * L && g.r(j) <= 20 * L) {
        x.push_back(g.r(j));
        y.push_back(std::log(gs.Q[j] * std::pow(g.r(j), (N - 1) / 2.0)));
      }
    double slope = fit_slope(x, y);
    CHECK(std::fabs(-slope * L - 1) <= 0.02);
  }
}

TEST_CASE("grid doubling barely moves the mass") {
  auto a = tlt::setup(3, 3, 4096, false);
  auto b = tlt::setup(3, 3, 8192, false);
  CHECK(std::fabs(b.gs->mass2 / a.gs->mass2 - 1) <= 1e-6);
}

TEST_CASE("Pohozaev identities on closed-form and perturbed profiles") {
  auto prm = derive_params(1, 7);
  auto g = default_grid(prm, 8192);
  GroundState gs;
  gs.params = prm;
  gs.grid = g;
  gs.Q = sech_soliton(*g, 7, prm.omega);
  finalize_ground_state(gs);
  auto pz = verify_pohozaev(gs);
  for (double r : pz.residual) CHECK(std::fabs(r) <= 1e-8);

  auto s = tlt::setup(3, 3, 4096, false);
  GroundState bad = *s.gs;
  for (auto& q : bad.Q) q *= 1.01;
  finalize_ground_state(bad);
  auto pb = verify_pohozaev(bad);
  CHECK(std::fabs(pb.residual[0]) <= 1e-6);
  CHECK(std::fabs(pb.residual[1]) > 1e-3);
  CHECK(std::fabs(pb.residual[2]) > 1e-3);
  CHECK_FALSE(pb.pass());
}

TEST_CASE("sharp Gagliardo-Nirenberg constant") {
  for (auto [N, p] : kMatrix) {
    CAPTURE(N);
    auto s = tlt::setup(N, p, 4096, false);
    const auto& gs = *s.gs;
    CHECK(compute_cgn(gs) == gs.CGN);
    CHECK(gn_quotient(*gs.grid, gs.field().v, gs.params) == doctest::Approx(gs.CGN).epsilon(1e-14));
    CHECK(std::fabs(gn_deficit(gs.field(), gs)) <= 1e-6);
    std::mt19937_64 rng(1000 + N);
    double worst = INFINITY;
    for (int i = 0; i < 100; ++i) {
      auto u = random_bump(gs.grid, gs.params.omega, rng, i % 2 == 1);
      worst = std::min(worst, gn_deficit(u, gs));
      CHECK(gn_quotient(*gs.grid, u.v, gs.params) <= gs.CGN * (1 + 1e-8));
    }
    CHECK(worst >= -1e-8);
    RadialField l(gs.grid);
    for (int j = 0; j < gs.grid->M(); ++j) l.v[j] = 1.3 * gs.Q[j];
    // I is scale invariant, so I(1.3 Q) = I(Q) = 0 up to round-off
    CHECK(gn_deficit(l, gs) >= -1e-10);
    CHECK(gn_deficit(tlt::gaussian(gs.grid, gs.params.omega), gs) >= 0);
  }
}

TEST_CASE("ground-state cache round trip") {
  auto s = tlt::setup(3, 3, 4096, false);
  auto dir = (std::filesystem::temp_directory_path() / "tlab_test_gscache").string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  save_ground_state(*s.gs, dir);
  auto back = load_ground_state(s.gs->params, s.gs->grid, dir);
  REQUIRE(back.has_value());
  CHECK(back->Q == s.gs->Q);
  CHECK(back->grad2 == s.gs->grad2);
  CHECK(back->EQ == s.gs->EQ);
  CHECK_FALSE(load_ground_state(s.gs->params, make_grid(3, 2048, s.gs->grid->rmax()), dir));
  bool hit = false;
  auto again = ground_state_cached(s.gs->params, s.gs->grid, dir, true, &hit);
  CHECK(hit);
  CHECK(again.Q == s.gs->Q);
  std::filesystem::remove_all(dir);
}
