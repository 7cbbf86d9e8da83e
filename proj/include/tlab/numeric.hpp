#pragma once
// Scalar helpers shared by the double and extended-precision code paths.

#include <cmath>
#include <complex>
#include <quadmath.h>
#include <vector>

namespace tl {

using quad = __float128;
using cplx = std::complex<double>;

inline double nabs(double x) { return std::fabs(x); }
inline quad nabs(quad x) { return fabsq(x); }
inline double nabs(const cplx& z) { return std::abs(z); }

inline double nsqrt(double x) { return std::sqrt(x); }
inline quad nsqrt(quad x) { return sqrtq(x); }

inline double npow(double x, double y) { return std::pow(x, y); }
inline quad npow(quad x, quad y) { return powq(x, y); }

inline double nexp(double x) { return std::exp(x); }
inline quad nexp(quad x) { return expq(x); }

inline double nlog(double x) { return std::log(x); }
inline quad nlog(quad x) { return logq(x); }

inline double to_double(double x) { return x; }
inline double to_double(quad x) { return static_cast<double>(x); }

template <class T>
inline T from_double(double x) { return static_cast<T>(x); }

// |z|^{p-1} z for a complex number stored as (a, b); writes the two components.
template <class T>
inline void power_nonlinearity(T a, T b, T pm1, T& ra, T& rb) {
  T m2 = a * a + b * b;
  if (m2 == T(0)) {
    ra = T(0);
    rb = T(0);
    return;
  }
  T f = npow(m2, pm1 / T(2));
  ra = f * a;
  rb = f * b;
}

template <class T>
std::vector<T> promote(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

template <class T>
std::vector<double> demote(const std::vector<T>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = to_double(v[i]);
  return out;
}

}  // namespace tl
