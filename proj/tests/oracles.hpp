#pragma once
// Reference computations that share no code with the library.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace tlt {

// Ground state of Q'' + (N-1)/r Q' - w Q + Q^p = 0 by shooting on Q(0) with RK4.
// Samples at r = k*dr/2 up to rmax; beyond the last trustworthy point the
// profile continues with the free decay e^{-sqrt(w) r} r^{-(N-1)/2}.
struct ShotProfile {
  double dr = 0, Q0 = 0;
  std::vector<double> q;  // at r = k dr / 2
  double at_half(int k) const { return k < int(q.size()) ? q[k] : 0.0; }
};

inline ShotProfile shoot_profile(int N, double p, double omega, double dr, double rmax) {
  const double hs = dr / 2;
  const int K = int(std::ceil(rmax / hs)) + 2;
  auto rhs = [&](double r, double y, double yp) {
    return std::array<double, 2>{yp, -(N - 1) / r * yp + omega * y - std::pow(std::fabs(y), p - 1) * y};
  };
  // returns +1 if the orbit overshoots (crosses zero), -1 if it turns up
  auto run = [&](double a, std::vector<double>* out, double* rstop) {
    double lap0 = omega * a - std::pow(a, p);
    double r = hs, y = a + lap0 / (2 * N) * r * r, yp = lap0 / N * r;
    if (out) {
      out->assign(K, 0.0);
      (*out)[0] = a;
      (*out)[1] = y;
    }
    for (int k = 1; k + 1 < K; ++k) {
      auto k1 = rhs(r, y, yp);
      auto k2 = rhs(r + hs / 2, y + hs / 2 * k1[0], yp + hs / 2 * k1[1]);
      auto k3 = rhs(r + hs / 2, y + hs / 2 * k2[0], yp + hs / 2 * k2[1]);
      auto k4 = rhs(r + hs, y + hs * k3[0], yp + hs * k3[1]);
      y += hs / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
      yp += hs / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
      r += hs;
      if (y < 0) {
        if (rstop) *rstop = r;
        return 1;
      }
      if (yp > 0) {
        if (rstop) *rstop = r;
        return -1;
      }
      if (out) (*out)[k + 1] = y;
    }
    if (rstop) *rstop = r;
    return 0;
  };
  double lo = std::pow(omega, 1 / (p - 1)), hi = 20 * lo;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (run(mid, nullptr, nullptr) > 0 ? hi : lo) = mid;
  }
  ShotProfile sp;
  sp.dr = dr;
  sp.Q0 = 0.5 * (lo + hi);
  double rstop = 0;
  run(sp.Q0, &sp.q, &rstop);
  // keep the part well before the orbit departs, then continue with the free tail
  int keep = int(0.7 * rstop / hs);
  double rk = keep * hs, qk = sp.q[keep];
  for (int k = keep + 1; k < K; ++k) {
    double r = k * hs;
    sp.q[k] = qk * std::exp(-std::sqrt(omega) * (r - rk)) * std::pow(rk / r, (N - 1) / 2.0);
  }
  return sp;
}

// e0 for N = 3 by shooting the coupled system
//   L+ Y1 = e0 Y2,  L- Y2 = -e0 Y1
// outward from the origin and inward from the exterior decay e^{-mu r}/r,
// mu^2 = w + i e0, with a 4x4 matching determinant at r = rm.
inline double shoot_e0_N3(double p, double omega, double lo, double hi) {
  const int N = 3;
  const double dr = 1e-3, rm = 2.0, rout = 16.0;
  auto Q = shoot_profile(N, p, omega, dr, rout + 1);
  using State = std::array<double, 4>;  // Y1, Y1', Y2, Y2'
  auto deriv = [&](double r, int khalf, const State& s, double e0) {
    double q = Q.at_half(khalf), qp = std::pow(q, p - 1);
    return State{s[1], -(N - 1) / r * s[1] + (omega - p * qp) * s[0] - e0 * s[2], s[3],
                 -(N - 1) / r * s[3] + (omega - qp) * s[2] + e0 * s[0]};
  };
  auto rk4 = [&](State s, int k0, int k1, double e0) {  // from r = k0 dr to k1 dr
    int dir = k1 > k0 ? 1 : -1;
    double h = dir * dr;
    for (int k = k0; k != k1; k += dir) {
      double r = k * dr;
      auto a = deriv(r, 2 * k, s, e0);
      State t;
      for (int i = 0; i < 4; ++i) t[i] = s[i] + h / 2 * a[i];
      auto b = deriv(r + h / 2, 2 * k + dir, t, e0);
      for (int i = 0; i < 4; ++i) t[i] = s[i] + h / 2 * b[i];
      auto c = deriv(r + h / 2, 2 * k + dir, t, e0);
      for (int i = 0; i < 4; ++i) t[i] = s[i] + h * c[i];
      auto d = deriv(r + h, 2 * k + 2 * dir, t, e0);
      for (int i = 0; i < 4; ++i) s[i] += h / 6 * (a[i] + 2 * b[i] + 2 * c[i] + d[i]);
    }
    return s;
  };
  const int km = int(std::lround(rm / dr)), kout = int(std::lround(rout / dr));
  auto det = [&](double e0) {
    std::array<State, 4> cols;
    double q0 = Q.Q0, qp = std::pow(q0, p - 1);
    for (int c = 0; c < 2; ++c) {
      double y1 = c == 0, y2 = c == 1;
      double l1 = (omega - p * qp) * y1 - e0 * y2, l2 = (omega - qp) * y2 + e0 * y1;
      State s{y1 + l1 / (2 * N) * dr * dr, l1 / N * dr, y2 + l2 / (2 * N) * dr * dr, l2 / N * dr};
      cols[c] = rk4(s, 1, km, e0);
    }
    std::complex<double> mu = std::sqrt(std::complex<double>(omega, e0));
    for (int c = 0; c < 2; ++c) {
      std::complex<double> a = c == 0 ? 1.0 : std::complex<double>(0, 1);
      std::complex<double> z = a * std::exp(-mu * rout) / rout;
      std::complex<double> zp = -z * (mu + 1.0 / rout);
      State s{z.real(), zp.real(), z.imag(), zp.imag()};
      auto e = rk4(s, kout, km, e0);
      for (auto& x : e) x = -x;
      cols[2 + c] = e;
    }
    // normalize columns, then Gaussian elimination with partial pivoting
    double A[4][4];
    for (int c = 0; c < 4; ++c) {
      double n = 0;
      for (int i = 0; i < 4; ++i) n += cols[c][i] * cols[c][i];
      n = std::sqrt(n);
      for (int i = 0; i < 4; ++i) A[i][c] = cols[c][i] / n;
    }
    double d = 1;
    for (int c = 0; c < 4; ++c) {
      int piv = c;
      for (int i = c + 1; i < 4; ++i)
        if (std::fabs(A[i][c]) > std::fabs(A[piv][c])) piv = i;
      if (piv != c) {
        for (int k = 0; k < 4; ++k) std::swap(A[c][k], A[piv][k]);
        d = -d;
      }
      d *= A[c][c];
      for (int i = c + 1; i < 4; ++i) {
        double f = A[i][c] / A[c][c];
        for (int k = c; k < 4; ++k) A[i][k] -= f * A[c][k];
      }
    }
    return d;
  };
  // scan for the sign change, then bisect
  const int n = 40;
  double a = lo, fa = det(a);
  for (int i = 1; i <= n; ++i) {
    double b = lo + (hi - lo) * i / n, fb = det(b);
    if ((fa < 0) != (fb < 0)) {
      for (int it = 0; it < 60; ++it) {
        double m = 0.5 * (a + b), fm = det(m);
        if ((fm < 0) == (fa < 0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      return 0.5 * (a + b);
    }
    a = b;
    fa = fb;
  }
  return NAN;
}

// Free Schrodinger evolution of exp(-r^2 / (4a)) in R^N:
//   u(r, t) = (a / (a + i t))^{N/2} exp(-r^2 / (4 (a + i t))).
inline std::complex<double> free_gaussian(double r, double t, double a, int N) {
  std::complex<double> z(a, t);
  return std::pow(a / z, N / 2.0) * std::exp(-r * r / (4.0 * z));
}

}  // namespace tlt
