#pragma once
// Approximate special solutions
//
//   V_k(t) = sum_{j=1..k} q^j Z_j,  q = exp(-e0 t),   U_k = e^{i w t} (Q + V_k),
//
// with Z_1 = A Y+ and Z_j = -(LL - j e0)^{-1} U_j, where U_j = i [q^j] R(V_{j-1}).
// The recursion, the q-expansion of R and the residual eps_k all run in
// quad precision: eps_k is O(q^{k+1}) and sits far below double round-off of
// Q^p at the times where its decay rate is measured.

#include <memory>
#include <vector>

#include "tlab/linop.hpp"

namespace tl {

using QVec = std::vector<quad>;

struct ProfileExpansion {
  double A = 0;
  int k = 0;
  double e0 = 0;
  double q_max = 0;
  std::shared_ptr<const GroundState> gs;
  std::vector<RadialField> Z;  // Z_1..Z_k in double

  // Extended-precision state shared by copies.
  struct Quad {
    BlockOperator<quad> op;
    quad e0 = 0;
    QVec Y1, Y2;
    double eigen_residual = 0;
  };
  std::shared_ptr<const Quad> qctx;
  std::vector<QVec> Zre, Zim;  // quad copies of Z_j
};

// Pointwise S(h) = |Q+h|^{p-1}(Q+h) - Q^p and R(h) = Vh - S(h).
RadialField nonlinearity_S(const RadialField& h, const GroundState& gs);
RadialField nonlinearity_R(const RadialField& h, const GroundState& gs);

// Refines the eigenpair in quad precision, keeping the scale and sign of pair.
std::shared_ptr<const ProfileExpansion::Quad> quad_context(const LinearizedOperator& op,
                                                           const EigenPair& pair);

// Taylor coefficients (q^0 .. q^order) of q -> R(V_k(q)) at q = 0 from
// Chebyshev interpolation on [0, q_max].
std::vector<RadialField> expand_R_in_q(const ProfileExpansion& ex, int order);

ProfileExpansion build_profiles(double A, int k, const EigenPair& pair,
                                const LinearizedOperator& op);
// Same, reusing an existing quad context.
ProfileExpansion build_profiles(double A, int k, const LinearizedOperator& op,
                                std::shared_ptr<const ProfileExpansion::Quad> qctx);

RadialField evaluate_Vk(const ProfileExpansion& ex, double t);
RadialField approximate_solution(const ProfileExpansion& ex, double t);

// ||eps_k(t)||_{H^1} evaluated in quad precision.
double residual_norm(const ProfileExpansion& ex, double t);

struct ResidualTrace {
  std::vector<double> times;
  std::vector<double> eps_norm;
  double fitted_rate = 0;  // -slope of log eps_norm
};

ResidualTrace residual_trace(const ProfileExpansion& ex, double t0, double t1, int samples = 21);

// Smallest t with ||V_k(t)||_{H^1} <= tol.
double select_t0(const ProfileExpansion& ex, double tol = 1e-3);

// Q + V_k(t0) = e^{-i w t0} U_k(t0), the datum of Q^{+} or Q^{-} at time 0.
RadialField special_seed(int sign, const ProfileExpansion& ex, double t0);

// Exponential decay rate of |f| over the outer part of the grid where
// |f| stays above the round-off floor.
double tail_decay_rate(const RadialGrid& g, const std::vector<cplx>& f);

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tl
