#pragma once
// Linearized operators around Q in the radial sector.
//
//   L+ = -Lap + w - p Q^{p-1},   L- = -Lap + w - Q^{p-1},
//   LL (h1, h2) = (-L- h2, L+ h1).
//
// Matrices are stored premultiplied by the quadrature weights, W L+ and W L-,
// which makes them symmetric.  The templates run in double or quad.

#include <memory>
#include <vector>

#include "tlab/banded.hpp"
#include "tlab/groundstate.hpp"

namespace tl {

template <class T>
class BlockOperator {
 public:
  BlockOperator() = default;
  BlockOperator(const RadialGrid& g, const std::vector<double>& Q, double p, double omega);

  int M() const { return M_; }
  const std::vector<T>& w() const { return w_; }
  const std::vector<T>& Q() const { return Q_; }
  T omega() const { return omega_; }
  T p() const { return p_; }
  const BandMatrix<T>& WLplus() const { return Ap_; }
  const BandMatrix<T>& WLminus() const { return Am_; }
  const BandMatrix<T>& stiffness() const { return S_; }

  std::vector<T> Lplus(const std::vector<T>& x) const { return unweight(Ap_ * x); }
  std::vector<T> Lminus(const std::vector<T>& x) const { return unweight(Am_ * x); }
  std::vector<T> laplacian(const std::vector<T>& x) const;

  // (LL - lambda) (v1, v2) -> (o1, o2)
  void apply_shifted(const std::vector<T>& v1, const std::vector<T>& v2, T lambda,
                     std::vector<T>& o1, std::vector<T>& o2) const;

  // W (LL - lambda) on interleaved unknowns (v1_0, v2_0, v1_1, ...).
  BandMatrix<T> block_matrix(T lambda) const;

  // Weighted L2 inner product.
  T dot(const std::vector<T>& a, const std::vector<T>& b) const;

 private:
  std::vector<T> unweight(std::vector<T> y) const {
    for (int j = 0; j < M_; ++j) y[j] /= w_[j];
    return y;
  }

  int M_ = 0;
  T omega_ = 0, p_ = 0;
  std::vector<T> w_, Q_;
  BandMatrix<T> S_, Ap_, Am_;
};

// Negative eigenvalue -e0^2 of L- L+ by shifted inverse iteration.
template <class T>
struct EigenIterate {
  T e0 = 0;
  std::vector<T> Y1, Y2;
  int iterations = 0;
  double residual = 0;
};

template <class T>
EigenIterate<T> inverse_iteration(const BlockOperator<T>& op, std::vector<T> start, T shift,
                                  double tol, int max_it = 200);

// Resolvent norm estimate above which lambda counts as spectrum.
inline constexpr double kSingularGrowth = 1e4;

// Factorized (LL - lambda) for repeated solves.
template <class T>
class Resolvent {
 public:
  Resolvent(const BlockOperator<T>& op, T lambda, double pivot_tol);
  void solve(const std::vector<T>& f1, const std::vector<T>& f2, std::vector<T>& v1,
             std::vector<T>& v2) const;
  double pivot_ratio() const { return lu_.pivot_ratio(); }
  T lambda() const { return lambda_; }

 private:
  const BlockOperator<T>* op_;
  T lambda_;
  BandLU<T> lu_;
};

// ----------------------------------------------------------------------------

struct LinearizedOperator {
  std::shared_ptr<const GroundState> gs;
  BlockOperator<double> op;

  std::vector<double> Lplus(const std::vector<double>& x) const { return op.Lplus(x); }
  std::vector<double> Lminus(const std::vector<double>& x) const { return op.Lminus(x); }
  RadialField apply(const RadialField& h) const;  // LL h
};

LinearizedOperator assemble(std::shared_ptr<const GroundState> gs);

// Relative residuals of L-Q = 0, L+Q = -(p-1)Q^p, L+Qt = -2(1-s_c)Q.
struct KernelReport {
  double Lminus_Q = 0;
  double Lplus_Q = 0;
  double Lplus_Qtilde = 0;
  double symmetry_plus = 0, symmetry_minus = 0;
};
KernelReport kernel_identities(const LinearizedOperator& op);

// r dQ/dr at the nodes, sixth-order centred differences.
std::vector<double> radial_derivative(const RadialGrid& g, const std::vector<double>& u);

enum class Normalization { unitL2, dualB };

struct EigenPair {
  double e0 = 0;
  std::vector<double> Y1, Y2;
  Normalization normalization = Normalization::unitL2;
  double kappa = 0;            // B(Y+, Y-) under unitL2
  double residual_plus = 0;    // ||L+Y1 - e0 Y2|| / (e0 ||Y2||)
  double residual_minus = 0;   // ||L-Y2 + e0 Y1|| / (e0 ||Y1||)
  double gap = 0;              // next eigenvalue of L-L+ minus (-e0^2)
  double nondegeneracy = 0;    // int (Lap Q - w Q) Y1 / (||Q||_H1 ||Y1||_H1)
  int iterations = 0;

  RadialField Yplus(GridPtr g) const;
  RadialField Yminus(GridPtr g) const;
};

EigenPair solve_eigenpair(const LinearizedOperator& op);

// Rescale to B(Y+, Y-) = 1; Y- = sign(kappa) conj(Y+).
EigenPair to_dual_normalization(const EigenPair& pair);

// Phi(h) = 1/2 int (L+h1)h1 + (L-h2)h2 and its polarization.
double phi(const RadialField& h, const LinearizedOperator& op);
double bform(const RadialField& g, const RadialField& h, const LinearizedOperator& op);

RadialField project_Gperp(const RadialField& h, const LinearizedOperator& op);
RadialField project_GperpPrime(const RadialField& h, const LinearizedOperator& op,
                               const EigenPair& pair);
// Both sets of constraints at once.
RadialField project_both(const RadialField& h, const LinearizedOperator& op,
                         const EigenPair& pair);

// Solves (LL - lambda) v = rhs.  SingularResolvent when the pivots or the
// solution growth indicate lambda is (close to) an eigenvalue.
RadialField resolvent_solve(const LinearizedOperator& op, double lambda, const RadialField& rhs);

double h1_norm(const RadialField& h);

}  // namespace tl
