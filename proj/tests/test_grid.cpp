#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "common.hpp"
#include "doctest.h"
#include "tlab/errors.hpp"
#include "tlab/fieldio.hpp"
#include "tlab/grid.hpp"

using namespace tl;
using std::numbers::pi;

TEST_CASE("grid construction") {
  CHECK_THROWS_AS(make_grid(3, 4, 10.0), GridError);
  CHECK_THROWS_AS(make_grid(3, 64, 0.0), GridError);
  CHECK_THROWS_AS(make_grid(3, 64, -1.0), GridError);
  CHECK_THROWS_AS(make_grid(0, 64, 10.0), GridError);
  auto g = make_grid(3, 100, 10.0);
  CHECK(g->r(99) == doctest::Approx(10.0));
  CHECK(g->r(0) == doctest::Approx(g->h() / 2));
  CHECK(g->surface() == doctest::Approx(4 * pi));
  CHECK(make_grid(1, 16, 1.0)->surface() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("Gaussian integrals") {
  for (int N = 1; N <= 4; ++N) {
    auto g = make_grid(N, 2048, 12.0);
    std::vector<double> f(g->M());
    for (int j = 0; j < g->M(); ++j) f[j] = std::exp(-g->r(j) * g->r(j));
    CHECK(integrate(*g, f) == doctest::Approx(std::pow(pi, N / 2.0)).epsilon(1e-10));
    CHECK(integrate(*g, std::vector<double>(g->M(), 0.0)) == 0.0);
  }
}

TEST_CASE("Laplacian on closed forms") {
  auto g = make_grid(3, 1024, 8.0);
  const int M = g->M();
  std::vector<double> c(M, 2.5), r2(M), ga(M);
  for (int j = 0; j < M; ++j) {
    r2[j] = g->r(j) * g->r(j);
    ga[j] = std::exp(-r2[j]);
  }
  auto lc = g->laplacian(c), lr = g->laplacian(r2), lg = g->laplacian(ga);
  double ec = 0, er = 0, eg = 0;
  for (int j = 0; j < M / 2; ++j) {  // interior, away from the Dirichlet end
    ec = std::max(ec, std::fabs(lc[j]));
    er = std::max(er, std::fabs(lr[j] - 6));
    eg = std::max(eg, std::fabs(lg[j] - (4 * r2[j] - 6) * ga[j]));
  }
  CHECK(ec < 1e-9);
  CHECK(er < 1e-8);
  CHECK(eg < 1e-8);
}

TEST_CASE("second-order reference operators converge at order 2") {
  auto err = [](int M) {
    auto g = make_grid(3, M, 8.0);
    std::vector<cplx> u(M);
    std::vector<double> f(M);
    for (int j = 0; j < M; ++j) {
      double r = g->r(j);
      u[j] = std::exp(-r * r);
      f[j] = std::exp(-r * r) * (1 + r * r);  // smooth bump
    }
    auto l = g->laplacian2(u);
    double e = 0;
    for (int j = 0; j < M / 2; ++j) {
      double r = g->r(j);
      e = std::max(e, std::abs(l[j] - (4 * r * r - 6) * std::exp(-r * r)));
    }
    // int e^{-r^2}(1 + r^2) d^3x = pi^{3/2} (1 + 3/2)
    double q = std::fabs(integrate(*g, f, QuadratureOrder::second) - 2.5 * std::pow(pi, 1.5));
    return std::pair{e, q};
  };
  auto [l1, q1] = err(256);
  auto [l2, q2] = err(512);
  CHECK(l1 / l2 > 3.5);
  CHECK(l1 / l2 < 4.5);
  CHECK(q1 / q2 > 3.5);
  CHECK(q1 / q2 < 4.5);
}

TEST_CASE("summation by parts holds exactly") {
  auto g = make_grid(3, 512, 10.0);
  const int M = g->M();
  std::vector<double> u(M), v(M);
  for (int j = 0; j < M; ++j) {
    double r = g->r(j);
    u[j] = std::exp(-r * r / 3) * (1 + std::sin(r));
    v[j] = std::exp(-r * r / 5);
  }
  auto lu = g->laplacian(u);
  double a = 0;
  for (int j = 0; j < M; ++j) a += g->w(j) * lu[j] * v[j];
  double b = grad_dot(*g, u, v);
  CHECK(std::fabs(a + b) <= 1e-12 * std::fabs(b));
  CHECK(std::fabs(grad_dot(*g, u, v) - grad_dot(*g, v, u)) <= 1e-11 * std::fabs(b));
}

TEST_CASE("norms") {
  auto g = make_grid(3, 2048, 12.0);
  auto u = tlt::gaussian(g, 1.0);
  auto n = norms(u, 3);
  // int e^{-4 r^2} = (pi/4)^{3/2}; int |grad e^{-r^2}|^2 = (3 pi / 2) sqrt(pi/2)
  CHECK(std::pow(n.Lp1, 4) == doctest::Approx(std::pow(pi / 4, 1.5)).epsilon(1e-8));
  CHECK(n.L2 * n.L2 == doctest::Approx(std::pow(pi / 2, 1.5)).epsilon(1e-8));
  CHECK(n.H1dot * n.H1dot == doctest::Approx(1.5 * pi * std::sqrt(pi / 2)).epsilon(1e-8));
  auto z = norms(RadialField(g), 3);
  CHECK(z.L2 == 0);
  CHECK(z.H1 == 0);
}

TEST_CASE("fractional Sobolev norm") {
  auto g = make_grid(3, 4096, 30.0);
  auto u = tlt::gaussian(g, 1.0);
  // |u|_{H^{1/2}}^2 = (pi/2) int rho^3 e^{-rho^2/2} = pi
  CHECK(fractional_hs_norm(u, 0.5) == doctest::Approx(std::sqrt(pi)).epsilon(1e-6));
  double grad = std::sqrt(grad_sq(*g, u.v));
  CHECK(std::fabs(fractional_hs_norm(u, 0.999) / grad - 1) < 0.01);
  CHECK(fractional_hs_norm(RadialField(g), 0.5) == 0);
  CHECK_THROWS_AS(fractional_hs_norm(RadialField(make_grid(2, 64, 5.0)), 0.5), HankelUnsupported);
}

TEST_CASE("transforms round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> x(37);
  for (auto& v : x) v = nd(rng);
  auto a = idct2(dct2(x)), b = idst2(dst2(x));
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(a[i] == doctest::Approx(x[i]).epsilon(1e-13));
    CHECK(b[i] == doctest::Approx(x[i]).epsilon(1e-13));
  }
}

TEST_CASE("field serialization round trips") {
  auto g = make_grid(2, 200, 7.0);
  RadialField u(g);
  for (int j = 0; j < g->M(); ++j) u.v[j] = cplx(std::sin(j * 0.1) / 3, std::exp(-0.01 * j) * 1e-7);
  auto dir = std::filesystem::temp_directory_path() / "tlab_test_fieldio";
  std::filesystem::create_directories(dir);
  write_field_csv(u, (dir / "u.csv").string());
  auto a = read_field_csv(g, (dir / "u.csv").string());
  write_field_binary(u, (dir / "u.bin").string());
  auto b = read_field_binary((dir / "u.bin").string());
  CHECK(a.v == u.v);
  CHECK(b.v == u.v);
  CHECK(b.grid->same_as(*g));
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite samples are rejected") {
  auto g = make_grid(3, 64, 5.0);
  RadialField u(g);
  u.v[3] = cplx(NAN, 0);
  CHECK_THROWS_AS(u.check_finite(), GridError);
}
