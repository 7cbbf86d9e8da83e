#include "tlab/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "tlab/errors.hpp"

namespace tl {

namespace {

double sphere_surface(int N) {
  return 2.0 * std::pow(std::numbers::pi, N / 2.0) / std::tgamma(N / 2.0);
}

// Entries (node, coefficient) of one face row of G, after reflection.
// sign = +1 reflects evenly, -1 oddly.
std::map<int, double> face_row(int m, int M, double h, double sign) {
  std::map<int, double> row;
  for (int o = 0; o < 6; ++o) {
    int j = m - 3 + o;
    double s = 1.0;
    if (j < 0) {
      j = -j - 1;
      s = sign;
    }
    if (j >= M) continue;
    row[j] += s * detail::kStag[o] / h;
  }
  return row;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> r2r(const std::vector<double>& x, fftw_r2r_kind kind) {
  int n = static_cast<int>(x.size());
  std::vector<double> in(x), out(n);
  if (n == 0) return out;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_r2r_1d(n, in.data(), out.data(), kind, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace

RadialGrid::RadialGrid(int N, int M, double rmax) : N_(N), M_(M), rmax_(rmax) {
  if (N < 1) throw GridError("dimension must be >= 1");
  if (M < 8) throw GridError("grid needs at least 8 nodes");
  if (!(rmax > 0) || !std::isfinite(rmax)) throw GridError("Rmax must be positive");
  h_ = rmax / (M - 0.5);
  surface_ = sphere_surface(N);
  r_.resize(M);
  for (int j = 0; j < M; ++j) r_[j] = (j + 0.5) * h_;

  fw_.resize(face_count());
  for (int m = 0; m < face_count(); ++m)
    fw_[m] = surface_ * h_ * std::pow(m * h_, N - 1);
  fw_[0] = (N == 1) ? 0.5 * surface_ * h_ : 0.0;

  S_ = BandMatrix<double>(M, kHalfBand, kHalfBand);
  if (N == 3) {
    // Work with f = r u (odd); int r^2 |u_r|^2 = int |f_r|^2 for regular u.
    BandMatrix<double> S1(M, kHalfBand, kHalfBand);
    for (int m = 0; m < face_count(); ++m) {
      double R = (m == 0) ? 0.5 * h_ : h_;
      auto row = face_row(m, M, h_, -1.0);
      for (auto& [j, cj] : row)
        for (auto& [k, ck] : row) S1(j, k) += R * cj * ck;
    }
    for (int j = 0; j < M; ++j)
      for (int k = std::max(0, j - kHalfBand); k <= std::min(M - 1, j + kHalfBand); ++k)
        S_(j, k) = surface_ * r_[j] * r_[k] * S1(j, k);
  } else {
    for (int m = 0; m < face_count(); ++m) {
      double R = fw_[m];
      if (R == 0) continue;
      auto row = face_row(m, M, h_, 1.0);
      for (auto& [j, cj] : row)
        for (auto& [k, ck] : row) S_(j, k) += R * cj * ck;
    }
  }

  w_.resize(M);
  for (int j = 0; j < M; ++j) w_[j] = surface_ * h_ * std::pow(r_[j], N - 1);
  if (N != 1 && N != 3) {
    // Near the origin pick weights making the Laplacian exact on r^2.
    std::vector<double> q(M);
    for (int j = 0; j < M; ++j) q[j] = r_[j] * r_[j];
    auto Sq = S_ * q;
    for (int j = 0; j < 2; ++j) {
      double wj = -Sq[j] / (2.0 * N);
      if (wj > 0) w_[j] = wj;
    }
  }

  w2_.resize(M);
  for (int j = 0; j < M; ++j)
    w2_[j] = surface_ * (std::pow((j + 1) * h_, N) - std::pow(j * h_, N)) / N;
}

GridPtr make_grid(int N, int M, double rmax) {
  return std::make_shared<const RadialGrid>(N, M, rmax);
}

RadialField::RadialField(GridPtr g, std::vector<cplx> vals)
    : grid(std::move(g)), v(std::move(vals)) {
  if (static_cast<int>(v.size()) != grid->M()) throw GridError("field length does not match grid");
}

RadialField RadialField::from_real(GridPtr g, const std::vector<double>& re) {
  if (static_cast<int>(re.size()) != g->M()) throw GridError("field length does not match grid");
  std::vector<cplx> v(re.size());
  for (std::size_t j = 0; j < re.size(); ++j) v[j] = cplx(re[j], 0.0);
  return RadialField(std::move(g), std::move(v));
}

std::vector<double> RadialField::real() const {
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j].real();
  return out;
}

std::vector<double> RadialField::imag() const {
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j].imag();
  return out;
}

void RadialField::check_finite() const {
  if (!grid) throw GridError("field has no grid");
  if (static_cast<int>(v.size()) != grid->M()) throw GridError("field length does not match grid");
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw GridError("field contains non-finite samples");
}

double integrate(const RadialGrid& g, const std::vector<double>& f) {
  if (static_cast<int>(f.size()) != g.M()) throw GridError("integrand length mismatch");
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * f[j];
  return s;
}

cplx integrate(const RadialGrid& g, const std::vector<cplx>& f) {
  if (static_cast<int>(f.size()) != g.M()) throw GridError("integrand length mismatch");
  cplx s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * f[j];
  return s;
}

double integrate(const RadialGrid& g, const std::vector<double>& f, QuadratureOrder order) {
  if (order == QuadratureOrder::high) return integrate(g, f);
  if (static_cast<int>(f.size()) != g.M()) throw GridError("integrand length mismatch");
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w2()[j] * f[j];
  return s;
}

RadialField laplacian(const RadialField& u) {
  u.check_finite();
  return RadialField(u.grid, u.grid->laplacian(u.v));
}

RadialField laplacian2(const RadialField& u) {
  u.check_finite();
  return RadialField(u.grid, u.grid->laplacian2(u.v));
}

double grad_sq(const RadialGrid& g, const std::vector<cplx>& u) {
  auto Su = g.stiffness() * u;
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += (std::conj(u[j]) * Su[j]).real();
  return s;
}

double grad_sq(const RadialGrid& g, const std::vector<double>& u) {
  auto Su = g.stiffness() * u;
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += u[j] * Su[j];
  return s;
}

double grad_dot(const RadialGrid& g, const std::vector<double>& u,
                const std::vector<double>& v) {
  auto Sv = g.stiffness() * v;
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += u[j] * Sv[j];
  return s;
}

double mass(const RadialGrid& g, const std::vector<cplx>& u) {
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * std::norm(u[j]);
  return s;
}

double lp_sum(const RadialGrid& g, const std::vector<cplx>& u, double q) {
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * std::pow(std::abs(u[j]), q);
  return s;
}

Norms norms(const RadialField& u, double p) {
  u.check_finite();
  const auto& g = *u.grid;
  Norms n;
  n.L2 = std::sqrt(mass(g, u.v));
  n.Lp1 = std::pow(lp_sum(g, u.v, p + 1), 1.0 / (p + 1));
  n.H1dot = std::sqrt(std::max(0.0, grad_sq(g, u.v)));
  n.H1 = std::sqrt(n.L2 * n.L2 + n.H1dot * n.H1dot);
  return n;
}

std::vector<double> dct2(const std::vector<double>& x) { return r2r(x, FFTW_REDFT10); }
std::vector<double> dst2(const std::vector<double>& x) { return r2r(x, FFTW_RODFT10); }

std::vector<double> idct2(const std::vector<double>& X) {
  auto y = r2r(X, FFTW_REDFT01);
  double s = 1.0 / (2.0 * X.size());
  for (auto& v : y) v *= s;
  return y;
}

std::vector<double> idst2(const std::vector<double>& X) {
  auto y = r2r(X, FFTW_RODFT01);
  double s = 1.0 / (2.0 * X.size());
  for (auto& v : y) v *= s;
  return y;
}

double fractional_hs_norm(const RadialField& u, double s) {
  u.check_finite();
  const auto& g = *u.grid;
  if (g.N() != 1 && g.N() != 3)
    throw HankelUnsupported("fractional norms are available for N = 1 and N = 3 only");
  const int M = g.M();
  const double L = M * g.h();
  double total = 0;
  for (int part = 0; part < 2; ++part) {
    std::vector<double> x(M);
    for (int j = 0; j < M; ++j) {
      double val = part == 0 ? u.v[j].real() : u.v[j].imag();
      x[j] = g.N() == 3 ? g.r(j) * val : val;
    }
    if (g.N() == 1) {
      // u = a0/2 + sum a_k cos(pi k r / L), a_k = X_k / M.
      auto X = dct2(x);
      for (int k = 1; k < M; ++k) {
        double xi = std::numbers::pi * k / L;
        double a = X[k] / M;
        total += L * std::pow(xi, 2 * s) * a * a;
      }
    } else {
      // r u = sum b_k sin(pi (k+1) r / L), b_k = X_k / M (last one halved).
      auto X = dst2(x);
      for (int k = 0; k < M; ++k) {
        double xi = std::numbers::pi * (k + 1) / L;
        double b = X[k] / M * (k == M - 1 ? 0.5 : 1.0);
        total += g.surface() * 0.5 * L * std::pow(xi, 2 * s) * b * b;
      }
    }
  }
  return std::sqrt(total);
}

}  // namespace tl
