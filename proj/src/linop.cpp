#include "tlab/linop.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tlab/errors.hpp"

namespace tl {

template <class T>
BlockOperator<T>::BlockOperator(const RadialGrid& g, const std::vector<double>& Q, double p,
                                double omega)
    : M_(g.M()), omega_(T(omega)), p_(T(p)) {
  if (static_cast<int>(Q.size()) != M_) throw GridError("profile length does not match grid");
  w_ = promote<T>(g.w());
  Q_ = promote<T>(Q);
  S_ = g.stiffness().cast<T>();
  const int b = RadialGrid::kHalfBand;
  Ap_ = BandMatrix<T>(M_, b, b);
  Am_ = BandMatrix<T>(M_, b, b);
  for (int j = 0; j < M_; ++j) {
    for (int k = std::max(0, j - b); k <= std::min(M_ - 1, j + b); ++k) {
      Ap_(j, k) = S_(j, k);
      Am_(j, k) = S_(j, k);
    }
    T a = npow(Q_[j], p_ - T(1));
    Ap_(j, j) += w_[j] * (omega_ - p_ * a);
    Am_(j, j) += w_[j] * (omega_ - a);
  }
}

template <class T>
std::vector<T> BlockOperator<T>::laplacian(const std::vector<T>& x) const {
  auto y = S_ * x;
  for (int j = 0; j < M_; ++j) y[j] = -y[j] / w_[j];
  return y;
}

template <class T>
void BlockOperator<T>::apply_shifted(const std::vector<T>& v1, const std::vector<T>& v2,
                                     T lambda, std::vector<T>& o1, std::vector<T>& o2) const {
  auto a = Lminus(v2);
  auto b = Lplus(v1);
  o1.resize(M_);
  o2.resize(M_);
  for (int j = 0; j < M_; ++j) {
    o1[j] = -a[j] - lambda * v1[j];
    o2[j] = b[j] - lambda * v2[j];
  }
}

template <class T>
BandMatrix<T> BlockOperator<T>::block_matrix(T lambda) const {
  const int b = RadialGrid::kHalfBand, kb = 2 * b + 1;
  BandMatrix<T> A(2 * M_, kb, kb);
  for (int j = 0; j < M_; ++j) {
    for (int k = std::max(0, j - b); k <= std::min(M_ - 1, j + b); ++k) {
      A(2 * j, 2 * k + 1) = -Am_(j, k);
      A(2 * j + 1, 2 * k) = Ap_(j, k);
    }
    A(2 * j, 2 * j) = -lambda * w_[j];
    A(2 * j + 1, 2 * j + 1) = -lambda * w_[j];
  }
  return A;
}

template <class T>
T BlockOperator<T>::dot(const std::vector<T>& a, const std::vector<T>& b) const {
  T s = 0;
  for (int j = 0; j < M_; ++j) s += w_[j] * a[j] * b[j];
  return s;
}

template <class T>
EigenIterate<T> inverse_iteration(const BlockOperator<T>& op, std::vector<T> x, T shift,
                                  double tol, int max_it) {
  const int M = op.M(), b = RadialGrid::kHalfBand;
  const auto& w = op.w();
  // P = W L- L+ = (W L-) W^{-1} (W L+), half bandwidth 2b.
  BandMatrix<T> P(M, 2 * b, 2 * b);
  const auto& Am = op.WLminus();
  const auto& Ap = op.WLplus();
  for (int i = 0; i < M; ++i)
    for (int j = std::max(0, i - b); j <= std::min(M - 1, i + b); ++j)
      for (int k = std::max(0, j - b); k <= std::min(M - 1, j + b); ++k)
        P(i, k) += Am(i, j) * Ap(j, k) / w[j];

  auto factor = [&](T s) {
    BandMatrix<T> A = P;
    for (int i = 0; i < M; ++i) A(i, i) -= s * w[i];
    return BandLU<T>(std::move(A));
  };
  auto normalize = [&](std::vector<T>& v) {
    T n = nsqrt(op.dot(v, v));
    for (auto& c : v) c /= n;
  };

  normalize(x);
  BandLU<T> lu = factor(shift);
  T sigma = shift;
  EigenIterate<T> res;
  T lam = 0, lam_prev = 0;
  for (int it = 1; it <= max_it; ++it) {
    std::vector<T> rhs(M);
    for (int i = 0; i < M; ++i) rhs[i] = w[i] * x[i];
    x = lu.solve(rhs);
    normalize(x);
    auto y = op.Lminus(op.Lplus(x));
    lam = op.dot(x, y);
    std::vector<T> r(M);
    for (int i = 0; i < M; ++i) r[i] = y[i] - lam * x[i];
    double rr = to_double(nsqrt(op.dot(r, r)) / nabs(lam));
    res.iterations = it;
    res.residual = rr;
    if (rr < std::max(tol, 1e-6)) break;
    // Pull the shift towards the estimate: first to 2*lam while the estimate
    // settles, then onto it once the residual is small.
    if (rr < 1e-3 && nabs(lam - sigma) > T(1e-6) * nabs(lam)) {
      sigma = lam * (T(1) + T(1e-10));
      lu = factor(sigma);
    } else {
      // Symmetric Rayleigh quotient of L-^{1/2} L+ L-^{1/2} at y = L+ x; it
      // never undershoots -e0^2, so once it settles 1.5 times it is a safe
      // shift below the eigenvalue.
      auto yv = op.Lplus(x);
      auto xp = op.Lminus(yv);
      T ls = op.dot(op.Lplus(xp), xp) / op.dot(yv, xp);
      if (it >= 3 && to_double(ls) < 0 && nabs(ls - lam_prev) < T(2e-3) * nabs(ls) &&
          to_double(T(1.5) * ls - sigma) > 0) {
        sigma = T(1.5) * ls;
        lu = factor(sigma);
      }
      lam_prev = ls;
    }
  }
  if (!(to_double(lam) < 0))
    throw NoUnstableEigenvalue("L-L+ has no negative eigenvalue near the shift");

  // The product L-L+ loses digits to its 1/h^4 scale; polish on the block
  // operator itself with a two-sided Rayleigh quotient (left vector (Y2, Y1)).
  T e0 = nsqrt(-lam);
  std::vector<T> y1 = x, y2 = op.Lplus(x);
  for (auto& c : y2) c /= e0;
  auto block_residual = [&](T e, const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<T> o1, o2;
    op.apply_shifted(a, b, e, o1, o2);
    return to_double(nsqrt((op.dot(o1, o1) + op.dot(o2, o2)) / (op.dot(a, a) + op.dot(b, b))) / e);
  };
  double best = block_residual(e0, y1, y2);
  res.e0 = e0;
  res.Y1 = y1;
  res.Y2 = y2;
  for (int k = 0; k < 8 && best > tol; ++k) {
    BandLU<T> blu(op.block_matrix(e0 * (T(1) + T(1e-12))));
    if (blu.exactly_singular()) break;
    std::vector<T> b(2 * M);
    for (int j = 0; j < M; ++j) {
      b[2 * j] = w[j] * y1[j];
      b[2 * j + 1] = w[j] * y2[j];
    }
    blu.solve_in_place(b.data());
    for (int j = 0; j < M; ++j) {
      y1[j] = b[2 * j];
      y2[j] = b[2 * j + 1];
    }
    T n = nsqrt(op.dot(y1, y1) + op.dot(y2, y2));
    for (int j = 0; j < M; ++j) {
      y1[j] /= n;
      y2[j] /= n;
    }
    std::vector<T> o1, o2;
    op.apply_shifted(y1, y2, T(0), o1, o2);
    e0 = (op.dot(y2, o1) + op.dot(y1, o2)) / (T(2) * op.dot(y1, y2));
    double r = block_residual(e0, y1, y2);
    res.iterations++;
    if (r < best) {
      best = r;
      res.e0 = e0;
      res.Y1 = y1;
      res.Y2 = y2;
    } else {
      break;
    }
  }
  res.residual = best;
  return res;
}

template <class T>
Resolvent<T>::Resolvent(const BlockOperator<T>& op, T lambda, double pivot_tol)
    : op_(&op), lambda_(lambda), lu_(op.block_matrix(lambda)) {
  if (lu_.exactly_singular() || lu_.pivot_ratio() < pivot_tol)
    throw SingularResolvent("resolvent factorization has a vanishing pivot");
  // Growth test: inverse-iteration sweeps from a fixed, localized
  // pseudo-random vector.  Near a (possibly defective) eigenvalue the growth
  // per sweep is the inverse distance to it.
  const int M = op.M();
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<T> f1(M), f2(M), v1, v2;
  for (int j = 0; j < M; ++j) {
    T env = T(std::exp(-0.5 * j / double(M) * 64));
    f1[j] = env * T(1 + 0.5 * U(gen));
    f2[j] = env * T(1 + 0.5 * U(gen));
  }
  double growth = 0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    solve(f1, f2, v1, v2);
    T nf = nsqrt(op.dot(f1, f1) + op.dot(f2, f2));
    T nv = nsqrt(op.dot(v1, v1) + op.dot(v2, v2));
    growth = to_double(nv / nf);
    for (int j = 0; j < M; ++j) {
      f1[j] = v1[j] / nv;
      f2[j] = v2[j] / nv;
    }
  }
  double scale = std::max(1.0, std::fabs(to_double(lambda)));
  if (!(growth * scale < kSingularGrowth))
    throw SingularResolvent("resolvent norm estimate " + std::to_string(growth) +
                            " indicates lambda is an eigenvalue");
}

template <class T>
void Resolvent<T>::solve(const std::vector<T>& f1, const std::vector<T>& f2, std::vector<T>& v1,
                         std::vector<T>& v2) const {
  const int M = op_->M();
  const auto& w = op_->w();
  std::vector<T> b(2 * M);
  for (int j = 0; j < M; ++j) {
    b[2 * j] = w[j] * f1[j];
    b[2 * j + 1] = w[j] * f2[j];
  }
  lu_.solve_in_place(b.data());
  v1.resize(M);
  v2.resize(M);
  for (int j = 0; j < M; ++j) {
    v1[j] = b[2 * j];
    v2[j] = b[2 * j + 1];
  }
}

template class BlockOperator<double>;
template class BlockOperator<quad>;
template class Resolvent<double>;
template class Resolvent<quad>;
template EigenIterate<double> inverse_iteration(const BlockOperator<double>&, std::vector<double>,
                                                double, double, int);
template EigenIterate<quad> inverse_iteration(const BlockOperator<quad>&, std::vector<quad>, quad,
                                              double, int);

// ----------------------------------------------------------------------------

namespace {

double wnorm(const RadialGrid& g, const std::vector<double>& a) {
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * a[j] * a[j];
  return std::sqrt(s);
}

double wdot(const RadialGrid& g, const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (int j = 0; j < g.M(); ++j) s += g.w(j) * a[j] * b[j];
  return s;
}

double h1_real(const RadialGrid& g, const std::vector<double>& a) {
  return std::sqrt(wdot(g, a, a) + std::max(0.0, grad_sq(g, a)));
}

void check_same_grid(const RadialField& h, const LinearizedOperator& op) {
  h.check_finite();
  if (!h.grid->same_as(*op.gs->grid)) throw GridError("field is not on the ground-state grid");
}

}  // namespace

double h1_norm(const RadialField& h) {
  const auto& g = *h.grid;
  return std::sqrt(mass(g, h.v) + std::max(0.0, grad_sq(g, h.v)));
}

LinearizedOperator assemble(std::shared_ptr<const GroundState> gs) {
  if (!gs || !gs->grid) throw GridError("assemble needs a ground state");
  LinearizedOperator op;
  op.op = BlockOperator<double>(*gs->grid, gs->Q, gs->params.p, gs->params.omega);
  op.gs = std::move(gs);
  return op;
}

RadialField LinearizedOperator::apply(const RadialField& h) const {
  std::vector<double> o1, o2;
  op.apply_shifted(h.real(), h.imag(), 0.0, o1, o2);
  RadialField out(h.grid);
  for (int j = 0; j < out.size(); ++j) out.v[j] = cplx(o1[j], o2[j]);
  return out;
}

std::vector<double> radial_derivative(const RadialGrid& g, const std::vector<double>& u) {
  static constexpr double c[3] = {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
  const int M = g.M();
  auto at = [&](int j) {
    if (j < 0) j = -j - 1;
    return j < M ? u[j] : 0.0;
  };
  std::vector<double> d(M);
  for (int j = 0; j < M; ++j) {
    double s = 0;
    for (int k = 1; k <= 3; ++k) s += c[k - 1] * (at(j + k) - at(j - k));
    d[j] = s / g.h();
  }
  return d;
}

KernelReport kernel_identities(const LinearizedOperator& op) {
  const auto& gs = *op.gs;
  const auto& g = *gs.grid;
  const double p = gs.params.p, om = gs.params.omega;
  const int M = g.M();
  KernelReport k;

  auto lmQ = op.Lminus(gs.Q);
  k.Lminus_Q = wnorm(g, lmQ) / gs.H1();

  auto lpQ = op.Lplus(gs.Q);
  std::vector<double> ref(M), res(M);
  for (int j = 0; j < M; ++j) {
    ref[j] = (p - 1) * std::pow(gs.Q[j], p);
    res[j] = lpQ[j] + ref[j];
  }
  k.Lplus_Q = wnorm(g, res) / wnorm(g, ref);

  auto dQ = radial_derivative(g, gs.Q);
  std::vector<double> Qt(M);
  for (int j = 0; j < M; ++j) Qt[j] = 2.0 / (p - 1) * gs.Q[j] + g.r(j) * dQ[j];
  auto lpQt = op.Lplus(Qt);
  for (int j = 0; j < M; ++j) {
    ref[j] = 2 * om * gs.Q[j];
    res[j] = lpQt[j] + ref[j];
  }
  k.Lplus_Qtilde = wnorm(g, res) / wnorm(g, ref);

  // Weighted symmetry on two fixed smooth probes.
  std::vector<double> a(M), b(M);
  for (int j = 0; j < M; ++j) {
    double r = g.r(j);
    a[j] = std::exp(-r * r / 4);
    b[j] = (1 + r) * std::exp(-r / 2);
  }
  auto sym = [&](const std::vector<double>& La, const std::vector<double>& Lb) {
    return std::fabs(wdot(g, La, b) - wdot(g, a, Lb)) / (wnorm(g, La) * wnorm(g, b) + 1e-300);
  };
  k.symmetry_plus = sym(op.Lplus(a), op.Lplus(b));
  k.symmetry_minus = sym(op.Lminus(a), op.Lminus(b));
  return k;
}

RadialField EigenPair::Yplus(GridPtr g) const {
  RadialField out(std::move(g));
  for (int j = 0; j < out.size(); ++j) out.v[j] = cplx(Y1[j], Y2[j]);
  return out;
}

RadialField EigenPair::Yminus(GridPtr g) const {
  double s = (normalization == Normalization::dualB && kappa < 0) ? -1.0 : 1.0;
  RadialField out(std::move(g));
  for (int j = 0; j < out.size(); ++j) out.v[j] = s * cplx(Y1[j], -Y2[j]);
  return out;
}

EigenPair solve_eigenpair(const LinearizedOperator& lop) {
  const auto& gs = *lop.gs;
  const auto& g = *gs.grid;
  const int M = g.M();
  const double p = gs.params.p, om = gs.params.omega;
  double vmax = 0;
  for (double q : gs.Q) vmax = std::max(vmax, p * std::pow(q, p - 1));
  double mu = vmax + om;
  auto it = inverse_iteration<double>(lop.op, gs.Q, -mu * mu, 1e-13);
  if (!(it.e0 > 0)) throw NoUnstableEigenvalue("eigenvalue estimate is not positive");

  EigenPair e;
  e.e0 = it.e0;
  e.Y1 = it.Y1;
  e.Y2 = it.Y2;
  e.iterations = it.iterations;

  // Sign: int grad Q . grad Y1 + w Q Y1 > 0.
  double sgn = grad_dot(g, gs.Q, e.Y1) + om * wdot(g, gs.Q, e.Y1);
  double n = std::sqrt(wdot(g, e.Y1, e.Y1) + wdot(g, e.Y2, e.Y2));
  double f = (sgn < 0 ? -1.0 : 1.0) / n;
  for (int j = 0; j < M; ++j) {
    e.Y1[j] *= f;
    e.Y2[j] *= f;
  }
  e.normalization = Normalization::unitL2;

  auto a = lop.Lplus(e.Y1);
  auto b = lop.Lminus(e.Y2);
  std::vector<double> r1(M), r2(M);
  for (int j = 0; j < M; ++j) {
    r1[j] = a[j] - e.e0 * e.Y2[j];
    r2[j] = b[j] + e.e0 * e.Y1[j];
  }
  e.residual_plus = wnorm(g, r1) / (e.e0 * wnorm(g, e.Y2));
  e.residual_minus = wnorm(g, r2) / (e.e0 * wnorm(g, e.Y1));

  // kappa = B(Y+, Y-) = 1/2 (<L+Y1, Y1> - <L-Y2, Y2>).
  e.kappa = 0.5 * (wdot(g, a, e.Y1) - wdot(g, b, e.Y2));

  auto lap = g.laplacian(gs.Q);
  std::vector<double> t(M);
  for (int j = 0; j < M; ++j) t[j] = lap[j] - om * gs.Q[j];
  e.nondegeneracy = wdot(g, t, e.Y1) / (gs.H1() * h1_real(g, e.Y1));

  // Next eigenvalue: inverse iteration at -e0^2/2 with Y1 deflated using the
  // left eigenvector Y2 of L-L+.
  {
    const auto& op = lop.op;
    double sigma = -0.5 * e.e0 * e.e0;
    BandMatrix<double> P(M, 10, 10);
    const auto& Am = op.WLminus();
    const auto& Ap = op.WLplus();
    const int hb = RadialGrid::kHalfBand;
    for (int i = 0; i < M; ++i)
      for (int j = std::max(0, i - hb); j <= std::min(M - 1, i + hb); ++j)
        for (int k = std::max(0, j - hb); k <= std::min(M - 1, j + hb); ++k)
          P(i, k) += Am(i, j) * Ap(j, k) / g.w(j);
    for (int i = 0; i < M; ++i) P(i, i) -= sigma * g.w(i);
    BandLU<double> lu(std::move(P));
    std::vector<double> x(M);
    for (int j = 0; j < M; ++j) x[j] = std::exp(-g.r(j)) * std::cos(g.r(j));
    double c12 = wdot(g, e.Y2, e.Y1);
    auto deflate = [&](std::vector<double>& v) {
      double c = wdot(g, e.Y2, v) / c12;
      for (int j = 0; j < M; ++j) v[j] -= c * e.Y1[j];
    };
    double lam = 0;
    for (int k = 0; k < 60; ++k) {
      deflate(x);
      double nx = wnorm(g, x);
      for (auto& c : x) c /= nx;
      std::vector<double> rhs(M);
      for (int j = 0; j < M; ++j) rhs[j] = g.w(j) * x[j];
      auto y = lu.solve(rhs);
      deflate(y);
      double ny = wnorm(g, y);
      for (auto& c : y) c /= ny;
      auto z = lop.Lminus(lop.Lplus(y));
      lam = wdot(g, y, z);
      x = y;
    }
    e.gap = lam + e.e0 * e.e0;
  }
  return e;
}

EigenPair to_dual_normalization(const EigenPair& pair) {
  if (pair.normalization == Normalization::dualB) return pair;
  if (pair.kappa == 0) throw DegenerateInput("B(Y+, Y-) vanishes");
  EigenPair d = pair;
  double s = 1.0 / std::sqrt(std::fabs(pair.kappa));
  for (auto& v : d.Y1) v *= s;
  for (auto& v : d.Y2) v *= s;
  d.normalization = Normalization::dualB;
  return d;
}

double bform(const RadialField& g, const RadialField& h, const LinearizedOperator& op) {
  check_same_grid(g, op);
  check_same_grid(h, op);
  const auto& gr = *op.gs->grid;
  auto a = op.op.WLplus() * g.real();
  auto b = op.op.WLminus() * g.imag();
  auto h1 = h.real(), h2 = h.imag();
  double s = 0;
  for (int j = 0; j < gr.M(); ++j) s += a[j] * h1[j] + b[j] * h2[j];
  return 0.5 * s;
}

double phi(const RadialField& h, const LinearizedOperator& op) { return bform(h, h, op); }

namespace {

// Removes from x its weighted-L2 projection onto span(basis).
void remove_span(const RadialGrid& g, std::vector<double>& x,
                 const std::vector<const std::vector<double>*>& basis) {
  const int n = static_cast<int>(basis.size());
  std::vector<double> G(n * n), c(n);
  for (int a = 0; a < n; ++a) {
    c[a] = wdot(g, *basis[a], x);
    for (int b = 0; b < n; ++b) G[a * n + b] = wdot(g, *basis[a], *basis[b]);
  }
  // Small dense solve, Gaussian elimination with partial pivoting.
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(G[i * n + k]) > std::fabs(G[piv * n + k])) piv = i;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(G[k * n + j], G[piv * n + j]);
      std::swap(c[k], c[piv]);
    }
    for (int i = k + 1; i < n; ++i) {
      double f = G[i * n + k] / G[k * n + k];
      for (int j = k; j < n; ++j) G[i * n + j] -= f * G[k * n + j];
      c[i] -= f * c[k];
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    for (int j = k + 1; j < n; ++j) c[k] -= G[k * n + j] * c[j];
    c[k] /= G[k * n + k];
  }
  for (int a = 0; a < n; ++a)
    for (int j = 0; j < g.M(); ++j) x[j] -= c[a] * (*basis[a])[j];
}

RadialField project_impl(const RadialField& h, const LinearizedOperator& op,
                         const EigenPair* pair, bool gperp) {
  check_same_grid(h, op);
  const auto& gs = *op.gs;
  const auto& g = *gs.grid;
  auto h1 = h.real(), h2 = h.imag();
  auto lapQ = g.laplacian(gs.Q);
  std::vector<const std::vector<double>*> b1, b2{&gs.Q};
  if (gperp) b1.push_back(&lapQ);
  if (pair) {
    b1.push_back(&pair->Y2);
    b2.push_back(&pair->Y1);
  }
  if (!b1.empty()) remove_span(g, h1, b1);
  remove_span(g, h2, b2);
  RadialField out(h.grid);
  for (int j = 0; j < out.size(); ++j) out.v[j] = cplx(h1[j], h2[j]);
  return out;
}

}  // namespace

RadialField project_Gperp(const RadialField& h, const LinearizedOperator& op) {
  return project_impl(h, op, nullptr, true);
}

RadialField project_GperpPrime(const RadialField& h, const LinearizedOperator& op,
                               const EigenPair& pair) {
  return project_impl(h, op, &pair, false);
}

RadialField project_both(const RadialField& h, const LinearizedOperator& op,
                         const EigenPair& pair) {
  return project_impl(h, op, &pair, true);
}

RadialField resolvent_solve(const LinearizedOperator& op, double lambda, const RadialField& rhs) {
  check_same_grid(rhs, op);
  Resolvent<double> R(op.op, lambda, 1e-14);
  std::vector<double> v1, v2;
  R.solve(rhs.real(), rhs.imag(), v1, v2);
  RadialField out(rhs.grid);
  for (int j = 0; j < out.size(); ++j) out.v[j] = cplx(v1[j], v2[j]);
  out.check_finite();
  return out;
}

}  // namespace tl
