#pragma once
// Uniform cell-centred radial grid with a summation-by-parts Laplacian.
//
// Nodes sit at r_j = (j + 1/2) h, j = 0..M-1, so Rmax = r_{M-1}.  The discrete
// Dirichlet form is ||grad u||^2 = u^T S u with S = G^T R G, where G is a
// sixth-order staggered gradient onto the faces r = m h and R holds the face
// measure.  The Laplacian is -W^{-1} S with W the node quadrature weights, so
// it is symmetric in the weighted inner product and integration by parts holds
// exactly.  Values beyond the last node are zero (Dirichlet).

#include <complex>
#include <memory>
#include <vector>

#include "tlab/banded.hpp"
#include "tlab/numeric.hpp"

namespace tl {

class RadialGrid {
 public:
  static constexpr int kHalfBand = 5;

  RadialGrid(int N, int M, double rmax);

  int N() const { return N_; }
  int M() const { return M_; }
  double h() const { return h_; }
  double rmax() const { return rmax_; }
  double r(int j) const { return r_[j]; }
  const std::vector<double>& r() const { return r_; }

  // Quadrature weights including |S^{N-1}| r^{N-1}.
  const std::vector<double>& w() const { return w_; }
  double w(int j) const { return w_[j]; }

  // Second-order cell-volume weights (reference quadrature).
  const std::vector<double>& w2() const { return w2_; }

  // Symmetric stiffness matrix S, half bandwidth kHalfBand.
  const BandMatrix<double>& stiffness() const { return S_; }

  // |S^{N-1}|; equals 2 for N = 1 (both half-lines).
  double surface() const { return surface_; }

  // Number of face samples returned by face_gradient (faces r = m h).
  int face_count() const { return M_ + 3; }
  double face_r(int m) const { return m * h_; }
  // Face quadrature weights |S^{N-1}| h (m h)^{N-1}.
  const std::vector<double>& face_weights() const { return fw_; }

  // u_r at the faces, sixth-order staggered differences, even reflection at
  // the origin, zero values beyond Rmax.
  template <class V>
  std::vector<V> face_gradient(const std::vector<V>& u) const;

  // u at the faces by sixth-order interpolation.
  template <class V>
  std::vector<V> face_values(const std::vector<V>& u) const;

  // Laplacian -W^{-1} S u (high order).
  template <class V>
  std::vector<V> laplacian(const std::vector<V>& u) const;

  // Conservative second-order three-point Laplacian with ghost reflection.
  template <class V>
  std::vector<V> laplacian2(const std::vector<V>& u) const;

  bool same_as(const RadialGrid& o) const {
    return N_ == o.N_ && M_ == o.M_ && rmax_ == o.rmax_;
  }

 private:
  int N_, M_;
  double rmax_, h_, surface_;
  std::vector<double> r_, w_, w2_, fw_;
  BandMatrix<double> S_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

GridPtr make_grid(int N, int M, double rmax);

// Complex samples of a radial function on a grid.
struct RadialField {
  GridPtr grid;
  std::vector<cplx> v;

  RadialField() = default;
  RadialField(GridPtr g) : grid(std::move(g)), v(grid->M(), cplx(0, 0)) {}
  RadialField(GridPtr g, std::vector<cplx> vals);
  static RadialField from_real(GridPtr g, const std::vector<double>& re);

  int size() const { return static_cast<int>(v.size()); }
  std::vector<double> real() const;
  std::vector<double> imag() const;
  void check_finite() const;
};

// Weighted quadrature sum_j w_j f_j.
double integrate(const RadialGrid& g, const std::vector<double>& f);
cplx integrate(const RadialGrid& g, const std::vector<cplx>& f);

enum class QuadratureOrder { high, second };
double integrate(const RadialGrid& g, const std::vector<double>& f,
                 QuadratureOrder order);

RadialField laplacian(const RadialField& u);
RadialField laplacian2(const RadialField& u);

struct Norms {
  double L2 = 0, Lp1 = 0, H1dot = 0, H1 = 0;
};
Norms norms(const RadialField& u, double p);

// ||grad u||^2 = Re u^H S u.
double grad_sq(const RadialGrid& g, const std::vector<cplx>& u);
double grad_sq(const RadialGrid& g, const std::vector<double>& u);
// Re int grad u . grad conj(v)
double grad_dot(const RadialGrid& g, const std::vector<double>& u,
                const std::vector<double>& v);
double mass(const RadialGrid& g, const std::vector<cplx>& u);
double lp_sum(const RadialGrid& g, const std::vector<cplx>& u, double q);

// Homogeneous H^s seminorm via cosine (N=1) or sine (N=3) transforms.
double fractional_hs_norm(const RadialField& u, double s);

// Cell-centred DCT-II / DST-II coefficient arrays (FFTW conventions).
std::vector<double> dct2(const std::vector<double>& x);
std::vector<double> dst2(const std::vector<double>& x);
std::vector<double> idct2(const std::vector<double>& X);
std::vector<double> idst2(const std::vector<double>& X);

// ----------------------------------------------------------------------------

namespace detail {
// Staggered sixth-order weights for faces: u_{m+o} with o = -3..2.
inline constexpr double kStag[6] = {-3.0 / 640.0, 25.0 / 384.0, -75.0 / 64.0,
                                    75.0 / 64.0, -25.0 / 384.0, 3.0 / 640.0};
// Midpoint interpolation weights, same offsets.
inline constexpr double kMid[6] = {3.0 / 256.0, -25.0 / 256.0, 150.0 / 256.0,
                                   150.0 / 256.0, -25.0 / 256.0, 3.0 / 256.0};
}  // namespace detail

template <class V>
std::vector<V> RadialGrid::face_gradient(const std::vector<V>& u) const {
  std::vector<V> g(face_count(), V(0));
  for (int m = 0; m < face_count(); ++m) {
    V s = V(0);
    for (int o = 0; o < 6; ++o) {
      int j = m - 3 + o;
      if (j < 0) j = -j - 1;
      if (j >= M_) continue;
      s += detail::kStag[o] * u[j];
    }
    g[m] = s / h_;
  }
  return g;
}

template <class V>
std::vector<V> RadialGrid::face_values(const std::vector<V>& u) const {
  std::vector<V> g(face_count(), V(0));
  for (int m = 0; m < face_count(); ++m) {
    V s = V(0);
    for (int o = 0; o < 6; ++o) {
      int j = m - 3 + o;
      if (j < 0) j = -j - 1;
      if (j >= M_) continue;
      s += detail::kMid[o] * u[j];
    }
    g[m] = s;
  }
  return g;
}

template <class V>
std::vector<V> RadialGrid::laplacian(const std::vector<V>& u) const {
  std::vector<V> y = S_ * u;
  for (int j = 0; j < M_; ++j) y[j] = -y[j] / w_[j];
  return y;
}

template <class V>
std::vector<V> RadialGrid::laplacian2(const std::vector<V>& u) const {
  // Flux (m h)^{N-1} (u_m - u_{m-1})/h at faces m = 1..M; face 0 vanishes by
  // reflection, u_M = 0 outside.
  std::vector<V> y(M_, V(0));
  auto fl = [&](int m) {
    double a = 1.0;
    for (int k = 1; k < N_; ++k) a *= m * h_;
    V up = m < M_ ? u[m] : V(0);
    return a * (up - u[m - 1]) / h_;
  };
  for (int j = 0; j < M_; ++j) {
    V right = fl(j + 1);
    V left = j == 0 ? V(0) : fl(j);
    double vol = w2_[j] / surface_;
    y[j] = (right - left) / vol;
  }
  return y;
}

}  // namespace tl
