#pragma once
// General banded matrices and an LU factorization with partial pivoting.
// Works for double, quad and std::complex<double> entries.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "tlab/errors.hpp"
#include "tlab/numeric.hpp"

namespace tl {

template <class T>
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(int n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1),
        ab_(static_cast<std::size_t>(ld_) * n, T(0)) {}

  int size() const { return n_; }
  int kl() const { return kl_; }
  int ku() const { return ku_; }

  bool in_band(int i, int j) const { return i - j <= kl_ && j - i <= ku_; }

  T& operator()(int i, int j) { return ab_[idx(i, j)]; }
  const T& operator()(int i, int j) const { return ab_[idx(i, j)]; }

  T get(int i, int j) const { return in_band(i, j) ? ab_[idx(i, j)] : T(0); }

  // y = A x
  template <class V>
  void multiply(const V* x, V* y) const {
    for (int i = 0; i < n_; ++i) {
      int j0 = std::max(0, i - kl_), j1 = std::min(n_ - 1, i + ku_);
      V s = V(0);
      for (int j = j0; j <= j1; ++j) s += V((*this)(i, j)) * x[j];
      y[i] = s;
    }
  }

  template <class V>
  std::vector<V> operator*(const std::vector<V>& x) const {
    std::vector<V> y(n_);
    multiply(x.data(), y.data());
    return y;
  }

  // Converts entries to another scalar type (e.g. double -> quad).
  template <class U>
  BandMatrix<U> cast() const {
    BandMatrix<U> out(n_, kl_, ku_);
    for (int i = 0; i < n_; ++i)
      for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j)
        out(i, j) = static_cast<U>((*this)(i, j));
    return out;
  }

  double max_abs() const {
    double m = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j)
        m = std::max(m, to_double_abs((*this)(i, j)));
    return m;
  }

 private:
  template <class>
  friend class BandLU;

  static double to_double_abs(const T& v) { return to_double(nabs(v)); }
  static double to_double(double x) { return x; }
  static double to_double(quad x) { return static_cast<double>(x); }

  // Storage keeps kl extra rows above the band for pivoting fill-in.
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(kl_ + ku_ + i - j) +
           static_cast<std::size_t>(j) * ld_;
  }

  int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 1;
  std::vector<T> ab_;
};

template <class T>
class BandLU {
 public:
  BandLU() = default;

  explicit BandLU(BandMatrix<T> a) : a_(std::move(a)), piv_(a_.n_) {
    const int n = a_.n_, kl = a_.kl_, kv = a_.kl_ + a_.ku_;
    double amax = a_.max_abs();
    int ju = 0;
    double umin = -1;
    for (int j = 0; j < n; ++j) {
      int km = std::min(kl, n - 1 - j);
      int jp = 0;
      double best = -1;
      for (int t = 0; t <= km; ++t) {
        double v = to_d(nabs(at(j + t, j)));
        if (v > best) {
          best = v;
          jp = t;
        }
      }
      piv_[j] = j + jp;
      if (umin < 0 || best < umin) umin = best;
      if (best == 0) {
        exact_zero_ = true;
        continue;
      }
      ju = std::max(ju, std::min(j + a_.ku_ + jp, n - 1));
      if (jp != 0)
        for (int c = j; c <= ju; ++c) std::swap(at(j, c), at(j + jp, c));
      T inv = T(1) / at(j, j);
      for (int t = 1; t <= km; ++t) at(j + t, j) *= inv;
      for (int c = j + 1; c <= ju; ++c) {
        T ajc = at(j, c);
        if (ajc == T(0)) continue;
        for (int t = 1; t <= km; ++t) at(j + t, c) -= at(j + t, j) * ajc;
      }
    }
    (void)kv;
    pivot_ratio_ = amax > 0 ? umin / amax : 0.0;
  }

  // Smallest |U_jj| relative to the largest entry of the original matrix.
  double pivot_ratio() const { return pivot_ratio_; }
  bool exactly_singular() const { return exact_zero_; }
  int size() const { return a_.n_; }

  template <class V>
  void solve_in_place(V* b) const {
    if (exact_zero_) throw LinearSolveFailure("banded LU: zero pivot");
    const int n = a_.n_, kl = a_.kl_, kv = a_.kl_ + a_.ku_;
    for (int j = 0; j < n; ++j) {
      int km = std::min(kl, n - 1 - j);
      if (piv_[j] != j) std::swap(b[j], b[piv_[j]]);
      V bj = b[j];
      for (int t = 1; t <= km; ++t) b[j + t] -= V(cat(j + t, j)) * bj;
    }
    for (int j = n - 1; j >= 0; --j) {
      b[j] /= V(cat(j, j));
      V bj = b[j];
      for (int i = std::max(0, j - kv); i < j; ++i) b[i] -= V(cat(i, j)) * bj;
    }
  }

  template <class V>
  std::vector<V> solve(std::vector<V> b) const {
    solve_in_place(b.data());
    return b;
  }

 private:
  static double to_d(double x) { return x; }
  static double to_d(quad x) { return static_cast<double>(x); }
  T& at(int i, int j) { return a_.ab_[a_.idx(i, j)]; }
  const T& cat(int i, int j) const { return a_.ab_[a_.idx(i, j)]; }

  BandMatrix<T> a_;
  std::vector<int> piv_;
  double pivot_ratio_ = 0;
  bool exact_zero_ = false;
};

}  // namespace tl
