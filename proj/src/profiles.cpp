#include "tlab/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tlab/errors.hpp"

namespace tl {

namespace {

constexpr int kChebNodes = 24;

struct QField {
  QVec re, im;
};

// R(h) = Q^p + p Q^{p-1} h1 + i Q^{p-1} h2 - |Q+h|^{p-1}(Q+h), pointwise.
template <class T>
void R_point(T Q, T h1, T h2, T p, T& r1, T& r2) {
  if (h1 == T(0) && h2 == T(0)) {
    r1 = r2 = 0;
    return;
  }
  T a = npow(Q, p - T(1));
  T s1, s2;
  power_nonlinearity(Q + h1, h2, p - T(1), s1, s2);
  r1 = a * Q + p * a * h1 - s1;
  r2 = a * h2 - s2;
}

// S(h) = |Q+h|^{p-1}(Q+h) - Q^p, pointwise.
template <class T>
void S_point(T Q, T h1, T h2, T p, T& s1, T& s2) {
  if (h1 == T(0) && h2 == T(0)) {
    s1 = s2 = 0;
    return;
  }
  power_nonlinearity(Q + h1, h2, p - T(1), s1, s2);
  s1 -= npow(Q, p);
}

// V(q) = sum_j q^j Z_j.
QField eval_V(const std::vector<QVec>& Zre, const std::vector<QVec>& Zim, quad q, int M) {
  QField v{QVec(M, 0), QVec(M, 0)};
  quad qj = 1;
  for (std::size_t j = 0; j < Zre.size(); ++j) {
    qj *= q;
    for (int i = 0; i < M; ++i) {
      v.re[i] += qj * Zre[j][i];
      v.im[i] += qj * Zim[j][i];
    }
  }
  return v;
}

QField eval_R(const QField& v, const QVec& Q, quad p) {
  const int M = static_cast<int>(Q.size());
  QField r{QVec(M), QVec(M)};
  for (int i = 0; i < M; ++i) R_point(Q[i], v.re[i], v.im[i], p, r.re[i], r.im[i]);
  return r;
}

quad sup_norm(const QField& f) {
  quad m = 0;
  for (std::size_t i = 0; i < f.re.size(); ++i)
    m = std::max(m, nsqrt(f.re[i] * f.re[i] + f.im[i] * f.im[i]));
  return m;
}

double choose_q_max(const std::vector<QVec>& Zre, const std::vector<QVec>& Zim, const QVec& Q) {
  if (Zre.empty()) return 0.1;
  double zmax = 0, ratio = 0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    double z = to_double(nsqrt(Zre[0][i] * Zre[0][i] + Zim[0][i] * Zim[0][i]));
    zmax = std::max(zmax, z);
    ratio = std::max(ratio, z / to_double(Q[i]));
  }
  return 0.1 * std::min({1.0, zmax > 0 ? 1.0 / zmax : 1.0, ratio > 0 ? 1.0 / ratio : 1.0});
}

// Taylor coefficients 0..order of q -> R(V(q)).
std::vector<QField> taylor_R(const std::vector<QVec>& Zre, const std::vector<QVec>& Zim,
                             const QVec& Q, quad p, double q_max, int order) {
  const int M = static_cast<int>(Q.size());
  const int n = kChebNodes;
  const quad pi = M_PIq;
  std::vector<QField> vals(n);
  for (int i = 0; i < n; ++i) {
    quad th = pi * (quad(i) + quad(0.5)) / quad(n);
    quad q = quad(q_max) * (quad(1) + cosq(th)) / quad(2);
    vals[i] = eval_R(eval_V(Zre, Zim, q, M), Q, p);
  }
  // Chebyshev coefficients c_m in x = 2q/q_max - 1.
  std::vector<QField> c(n, QField{QVec(M, 0), QVec(M, 0)});
  for (int m = 0; m < n; ++m) {
    for (int i = 0; i < n; ++i) {
      quad th = pi * (quad(i) + quad(0.5)) / quad(n);
      quad f = quad(2) / quad(n) * cosq(quad(m) * th);
      if (m == 0) f /= 2;
      for (int x = 0; x < M; ++x) {
        c[m].re[x] += f * vals[i].re[x];
        c[m].im[x] += f * vals[i].im[x];
      }
    }
  }
  // Held-out node: the interpolant must reproduce R(V(q)).
  {
    quad qh = quad(q_max) * quad(0.3141592653589793);
    quad xh = quad(2) * qh / quad(q_max) - quad(1);
    QField direct = eval_R(eval_V(Zre, Zim, qh, M), Q, p);
    QField interp{QVec(M, 0), QVec(M, 0)};
    quad t0 = 1, t1 = xh;
    for (int m = 0; m < n; ++m) {
      quad tm = m == 0 ? t0 : (m == 1 ? t1 : quad(0));
      if (m >= 2) {
        tm = quad(2) * xh * t1 - t0;
        t0 = t1;
        t1 = tm;
      }
      for (int x = 0; x < M; ++x) {
        interp.re[x] += c[m].re[x] * tm;
        interp.im[x] += c[m].im[x] * tm;
      }
    }
    quad scale = 0;
    for (const auto& v : vals) scale = std::max(scale, sup_norm(v));
    for (int x = 0; x < M; ++x) {
      interp.re[x] -= direct.re[x];
      interp.im[x] -= direct.im[x];
    }
    quad err = sup_norm(interp);
    if (scale > 0 && !(to_double(err / scale) <= 1e-8))
      throw ExpansionIllConditioned("Chebyshev interpolation of R misses a held-out node by " +
                                    std::to_string(to_double(err / scale)));
  }
  // d^j/dx^j T_m at x = -1 is (-1)^{m+j} prod_{k<j} (m^2 - k^2)/(2k+1).
  std::vector<QField> out(order + 1, QField{QVec(M, 0), QVec(M, 0)});
  quad fact = 1, scal = 1;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) {
      fact *= quad(j);
      scal *= quad(2) / quad(q_max);
    }
    for (int m = 0; m < n; ++m) {
      quad d = ((m + j) % 2) ? quad(-1) : quad(1);
      for (int k = 0; k < j; ++k) d *= (quad(m) * quad(m) - quad(k) * quad(k)) / quad(2 * k + 1);
      if (d == 0) continue;
      quad f = d * scal / fact;
      for (int x = 0; x < M; ++x) {
        out[j].re[x] += f * c[m].re[x];
        out[j].im[x] += f * c[m].im[x];
      }
    }
  }
  return out;
}

RadialField to_field(GridPtr g, const QVec& re, const QVec& im) {
  RadialField f(std::move(g));
  for (int j = 0; j < f.size(); ++j) f.v[j] = cplx(to_double(re[j]), to_double(im[j]));
  return f;
}

void check_ex(const ProfileExpansion& ex) {
  if (!ex.gs || !ex.qctx) throw DegenerateInput("profile expansion is not initialized");
}

}  // namespace

RadialField nonlinearity_S(const RadialField& h, const GroundState& gs) {
  h.check_finite();
  if (!h.grid->same_as(*gs.grid)) throw GridError("field is not on the ground-state grid");
  RadialField out(h.grid);
  for (int j = 0; j < h.size(); ++j) {
    double s1, s2;
    S_point(gs.Q[j], h.v[j].real(), h.v[j].imag(), gs.params.p, s1, s2);
    out.v[j] = cplx(s1, s2);
  }
  return out;
}

RadialField nonlinearity_R(const RadialField& h, const GroundState& gs) {
  h.check_finite();
  if (!h.grid->same_as(*gs.grid)) throw GridError("field is not on the ground-state grid");
  RadialField out(h.grid);
  for (int j = 0; j < h.size(); ++j) {
    double r1, r2;
    R_point(gs.Q[j], h.v[j].real(), h.v[j].imag(), gs.params.p, r1, r2);
    out.v[j] = cplx(r1, r2);
  }
  return out;
}

std::shared_ptr<const ProfileExpansion::Quad> quad_context(const LinearizedOperator& op,
                                                           const EigenPair& pair) {
  const auto& gs = *op.gs;
  auto ctx = std::make_shared<ProfileExpansion::Quad>();
  ctx->op = BlockOperator<quad>(*gs.grid, gs.Q, gs.params.p, gs.params.omega);
  quad e0 = pair.e0;
  auto it = inverse_iteration<quad>(ctx->op, promote<quad>(pair.Y1), -e0 * e0 * quad(1 + 1e-8),
                                    1e-28, 50);
  // Match the double pair's scale and sign.
  quad num = ctx->op.dot(promote<quad>(pair.Y1), it.Y1) + ctx->op.dot(promote<quad>(pair.Y2), it.Y2);
  quad den = ctx->op.dot(it.Y1, it.Y1) + ctx->op.dot(it.Y2, it.Y2);
  quad c = num / den;
  for (auto& v : it.Y1) v *= c;
  for (auto& v : it.Y2) v *= c;
  ctx->e0 = it.e0;
  ctx->Y1 = std::move(it.Y1);
  ctx->Y2 = std::move(it.Y2);
  ctx->eigen_residual = it.residual;
  return ctx;
}

std::vector<RadialField> expand_R_in_q(const ProfileExpansion& ex, int order) {
  check_ex(ex);
  if (order < 0 || order > ex.k + 1)
    throw DegenerateInput("expansion order must lie in [0, k+1]");
  const auto& Q = ex.qctx->op.Q();
  auto t = taylor_R(ex.Zre, ex.Zim, Q, ex.qctx->op.p(), ex.q_max, order);
  std::vector<RadialField> out;
  for (const auto& f : t) out.push_back(to_field(ex.gs->grid, f.re, f.im));
  return out;
}

ProfileExpansion build_profiles(double A, int k, const EigenPair& pair,
                                const LinearizedOperator& op) {
  return build_profiles(A, k, op, quad_context(op, pair));
}

ProfileExpansion build_profiles(double A, int k, const LinearizedOperator& op,
                                std::shared_ptr<const ProfileExpansion::Quad> qctx) {
  if (k < 1) throw DegenerateInput("profile order must be >= 1");
  ProfileExpansion ex;
  ex.A = A;
  ex.k = k;
  ex.gs = op.gs;
  ex.qctx = qctx;
  ex.e0 = to_double(qctx->e0);
  const auto& qop = qctx->op;
  const int M = qop.M();
  const quad Aq = A;

  QVec z1r(M), z1i(M);
  for (int j = 0; j < M; ++j) {
    z1r[j] = Aq * qctx->Y1[j];
    z1i[j] = Aq * qctx->Y2[j];
  }
  ex.Zre.push_back(std::move(z1r));
  ex.Zim.push_back(std::move(z1i));
  ex.q_max = choose_q_max(ex.Zre, ex.Zim, qop.Q());

  for (int j = 2; j <= k; ++j) {
    auto coef = taylor_R(ex.Zre, ex.Zim, qop.Q(), qop.p(), ex.q_max, j);
    // (LL - j e0) Z_j = -U_j = -i C_j
    QVec u1(M), u2(M);
    for (int x = 0; x < M; ++x) {
      u1[x] = coef[j].im[x];
      u2[x] = -coef[j].re[x];
    }
    Resolvent<quad> R(qop, quad(j) * qctx->e0, 1e-30);
    QVec v1, v2;
    R.solve(u1, u2, v1, v2);
    ex.Zre.push_back(std::move(v1));
    ex.Zim.push_back(std::move(v2));
  }
  for (int j = 0; j < k; ++j) ex.Z.push_back(to_field(ex.gs->grid, ex.Zre[j], ex.Zim[j]));
  return ex;
}

RadialField evaluate_Vk(const ProfileExpansion& ex, double t) {
  check_ex(ex);
  RadialField v(ex.gs->grid);
  for (int j = 0; j < ex.k; ++j) {
    double f = std::exp(-(j + 1) * ex.e0 * t);
    for (int i = 0; i < v.size(); ++i) v.v[i] += f * ex.Z[j].v[i];
  }
  return v;
}

RadialField approximate_solution(const ProfileExpansion& ex, double t) {
  auto v = evaluate_Vk(ex, t);
  const double om = ex.gs->params.omega;
  cplx ph = std::polar(1.0, om * t);
  for (int i = 0; i < v.size(); ++i) v.v[i] = ph * (ex.gs->Q[i] + v.v[i]);
  return v;
}

double residual_norm(const ProfileExpansion& ex, double t) {
  check_ex(ex);
  const auto& op = ex.qctx->op;
  const int M = op.M();
  const quad e0 = ex.qctx->e0, om = op.omega(), p = op.p();
  const quad q = expq(-e0 * quad(t));
  // V and dV/dt = sum -j e0 q^j Z_j.
  QVec v1(M, 0), v2(M, 0), d1(M, 0), d2(M, 0);
  quad qj = 1;
  for (int j = 0; j < ex.k; ++j) {
    qj *= q;
    quad dj = -quad(j + 1) * e0 * qj;
    for (int i = 0; i < M; ++i) {
      v1[i] += qj * ex.Zre[j][i];
      v2[i] += qj * ex.Zim[j][i];
      d1[i] += dj * ex.Zre[j][i];
      d2[i] += dj * ex.Zim[j][i];
    }
  }
  auto l1 = op.laplacian(v1), l2 = op.laplacian(v2);
  QVec e1(M), e2(M);
  for (int i = 0; i < M; ++i) {
    quad s1, s2;
    S_point(op.Q()[i], v1[i], v2[i], p, s1, s2);
    // i dV/dt + Lap V - w V + S(V)
    e1[i] = -d2[i] + l1[i] - om * v1[i] + s1;
    e2[i] = d1[i] + l2[i] - om * v2[i] + s2;
  }
  quad n2 = op.dot(e1, e1) + op.dot(e2, e2);
  auto s1 = op.stiffness() * e1, s2 = op.stiffness() * e2;
  for (int i = 0; i < M; ++i) n2 += e1[i] * s1[i] + e2[i] * s2[i];
  return to_double(nsqrt(n2));
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InsufficientSamples("slope fit needs at least two samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw InsufficientSamples("slope fit needs distinct abscissae");
  return sxy / sxx;
}

ResidualTrace residual_trace(const ProfileExpansion& ex, double t0, double t1, int samples) {
  if (samples < 2) throw InsufficientSamples("residual trace needs at least two times");
  ResidualTrace tr;
  std::vector<double> logs;
  for (int i = 0; i < samples; ++i) {
    double t = t0 + (t1 - t0) * i / (samples - 1);
    double e = residual_norm(ex, t);
    tr.times.push_back(t);
    tr.eps_norm.push_back(e);
    logs.push_back(std::log(e));
  }
  tr.fitted_rate = -fit_slope(tr.times, logs);
  return tr;
}

double select_t0(const ProfileExpansion& ex, double tol) {
  check_ex(ex);
  if (!(tol > 0)) throw SeedTooLarge("seed tolerance must be positive");
  auto nv = [&](double t) { return h1_norm(evaluate_Vk(ex, t)); };
  const double floor = 1e-13 * ex.gs->H1();
  if (tol < floor) throw SeedTooLarge("seed tolerance is below the grid's round-off floor");
  double z1 = h1_norm(ex.Z[0]);
  if (z1 == 0) return 0;
  double guess = std::log(z1 / tol) / ex.e0;
  double hi = std::max(guess, 0.0) + 1.0 / ex.e0;
  for (int i = 0; i < 200 && nv(hi) > tol; ++i) hi += 1.0 / ex.e0;
  if (nv(hi) > tol) throw SeedTooLarge("||V_k(t)|| stays above the tolerance");
  double lo = hi - 1.0 / ex.e0;
  for (int i = 0; i < 200 && nv(lo) <= tol; ++i) lo -= 1.0 / ex.e0;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    if (nv(mid) <= tol)
      hi = mid;
    else
      lo = mid;
    if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) break;
  }
  return hi;
}

RadialField special_seed(int sign, const ProfileExpansion& ex, double t0) {
  check_ex(ex);
  if ((sign != 1 && sign != -1) || ex.A != static_cast<double>(sign))
    throw DegenerateInput("special_seed needs an expansion built with A = sign = +-1");
  auto v = evaluate_Vk(ex, t0);
  if (h1_norm(v) > 1e-3) throw SeedTooLarge("||V_k(t0)|| exceeds 1e-3; start later");
  RadialField u(ex.gs->grid);
  for (int i = 0; i < u.size(); ++i) u.v[i] = ex.gs->Q[i] + v.v[i];
  return u;
}

double tail_decay_rate(const RadialGrid& g, const std::vector<cplx>& f) {
  const int M = g.M();
  double fmax = 0;
  for (const auto& z : f) fmax = std::max(fmax, std::abs(z));
  if (fmax == 0) throw DegenerateInput("tail rate of a zero field");
  int a = -1, b = -1;
  for (int j = 0; j < M; ++j) {
    double v = std::abs(f[j]) / fmax;
    if (a < 0 && v <= 1e-4) a = j;
    if (a >= 0 && v <= 1e-12) {
      b = j;
      break;
    }
  }
  int cap = static_cast<int>(0.8 * M);
  if (a < 0) throw DegenerateInput("field does not decay on the grid");
  if (b < 0 || b > cap) b = cap;
  if (b - a < 8) throw DegenerateInput("decay window too short");
  std::vector<double> x, y;
  for (int j = a; j < b; ++j) {
    double v = std::abs(f[j]);
    if (v <= 0) continue;
    x.push_back(g.r(j));
    y.push_back(std::log(v) + 0.5 * (g.N() - 1) * std::log(g.r(j)));
  }
  return -fit_slope(x, y);
}

}  // namespace tl
