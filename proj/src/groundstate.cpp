#include "tlab/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "json.hpp"

#include "tlab/errors.hpp"
#include "tlab/fieldio.hpp"

namespace tl {

double GroundState::H1() const { return std::sqrt(mass2 + grad2); }

bool PohozaevReport::pass(double tol) const {
  for (double r : residual)
    if (!(std::fabs(r) <= tol)) return false;
  return true;
}

GridPtr default_grid(const ModelParams& prm, int M, double rmax_factor) {
  return make_grid(prm.N, M, rmax_factor / std::sqrt(prm.omega));
}

namespace {

enum class ShotOutcome { crossed, turned, none };

struct Shooter {
  const ModelParams& prm;
  double rmax;

  void rhs(double r, double q, double dq, double& fq, double& fdq) const {
    double nl = std::pow(std::fabs(q), prm.p - 1) * q;
    fq = dq;
    if (r == 0)
      fdq = (prm.omega * q - nl) / prm.N;
    else
      fdq = -(prm.N - 1) / r * dq + prm.omega * q - nl;
  }

  // Integrates from r = 0 with step dr; optionally stores every sample.
  ShotOutcome run(double q0, double dr, std::vector<double>* samples) const {
    double r = 0, q = q0, dq = 0;
    if (samples) samples->assign(1, q0);
    long nsteps = static_cast<long>(std::ceil(rmax / dr));
    for (long n = 0; n < nsteps; ++n) {
      double k1q, k1d, k2q, k2d, k3q, k3d, k4q, k4d;
      rhs(r, q, dq, k1q, k1d);
      rhs(r + 0.5 * dr, q + 0.5 * dr * k1q, dq + 0.5 * dr * k1d, k2q, k2d);
      rhs(r + 0.5 * dr, q + 0.5 * dr * k2q, dq + 0.5 * dr * k2d, k3q, k3d);
      rhs(r + dr, q + dr * k3q, dq + dr * k3d, k4q, k4d);
      q += dr / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
      dq += dr / 6 * (k1d + 2 * k2d + 2 * k3d + k4d);
      r = (n + 1) * dr;
      if (samples) samples->push_back(q);
      if (!std::isfinite(q) || q < 0) return ShotOutcome::crossed;
      if (dq > 0) return ShotOutcome::turned;
    }
    return ShotOutcome::none;
  }
};

// Even number of RK4 substeps per grid cell, small enough for the core.
int substeps(const ModelParams& prm, double h, double q0) {
  double core = 0.05 / std::sqrt(std::max(prm.omega, std::pow(q0, prm.p - 1)));
  int n = std::max(4, static_cast<int>(std::ceil(h / core)));
  if (n % 2) ++n;
  return n;
}

double extrapolate_origin(const RadialGrid& g, const std::vector<double>& Q) {
  // Even polynomial through the first four nodes, evaluated at r = 0.
  double A[4][5];
  for (int i = 0; i < 4; ++i) {
    double r2 = g.r(i) * g.r(i), pw = 1;
    for (int k = 0; k < 4; ++k) {
      A[i][k] = pw;
      pw *= r2;
    }
    A[i][4] = Q[i];
  }
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int i = c + 1; i < 4; ++i)
      if (std::fabs(A[i][c]) > std::fabs(A[piv][c])) piv = i;
    for (int k = 0; k < 5; ++k) std::swap(A[c][k], A[piv][k]);
    for (int i = 0; i < 4; ++i) {
      if (i == c) continue;
      double f = A[i][c] / A[c][c];
      for (int k = c; k < 5; ++k) A[i][k] -= f * A[c][k];
    }
  }
  return A[0][4] / A[0][0];
}

}  // namespace

ShootingResult shoot_ground_state(const ModelParams& prm, double rmax, double dr) {
  Shooter sh{prm, rmax};
  const double e = 1.0 / (prm.p - 1);
  double lo = std::pow(prm.omega, e) * (1 + 1e-9);
  double hi = 10 * std::pow(prm.omega, e) * std::pow(prm.p + 1, e);
  auto classify = [&](double q0) { return sh.run(q0, std::min(dr, 0.05 / std::sqrt(std::pow(q0, prm.p - 1))), nullptr); };
  if (classify(lo) != ShotOutcome::turned || classify(hi) != ShotOutcome::crossed)
    throw NoConvergence("shooting bracket does not contain the ground state");
  ShootingResult res;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    auto o = classify(mid);
    res.iterations = it + 1;
    if (o == ShotOutcome::crossed)
      hi = mid;
    else if (o == ShotOutcome::turned)
      lo = mid;
    else {
      lo = hi = mid;
      break;
    }
  }
  res.lo = lo;
  res.hi = hi;
  return res;
}

void finalize_ground_state(GroundState& gs) {
  const auto& g = *gs.grid;
  const auto& prm = gs.params;
  const auto& Q = gs.Q;
  gs.mass2 = 0;
  gs.lp1 = 0;
  for (int j = 0; j < g.M(); ++j) {
    gs.mass2 += g.w(j) * Q[j] * Q[j];
    gs.lp1 += g.w(j) * std::pow(std::fabs(Q[j]), prm.p + 1);
  }
  gs.grad2 = grad_sq(g, Q);
  gs.EQ = 0.5 * gs.grad2 - gs.lp1 / (prm.p + 1);
  gs.CGN = compute_cgn(gs);
  gs.me_Q = std::pow(gs.mass2, prm.mass_exponent()) * gs.EQ;
  gs.grad_Q = std::sqrt(gs.grad2) * std::pow(std::sqrt(gs.mass2), prm.mass_exponent());
  gs.Q0 = extrapolate_origin(g, Q);
  auto lap = g.laplacian(Q);
  double res2 = 0;
  for (int j = 0; j < g.M(); ++j) {
    double f = lap[j] - prm.omega * Q[j] + std::pow(std::fabs(Q[j]), prm.p - 1) * Q[j];
    res2 += g.w(j) * f * f;
  }
  gs.residual = std::sqrt(res2) / gs.H1();
}

GroundState solve_ground_state(const ModelParams& prm, GridPtr grid) {
  if (grid->N() != prm.N) throw GridError("grid dimension differs from model dimension");
  const auto& g = *grid;
  const int M = g.M();
  const double h = g.h();

  int nsub = substeps(prm, h, std::pow(prm.omega, 1.0 / (prm.p - 1)) * std::pow((prm.p + 1) / 2.0, 1.0 / (prm.p - 1)));
  auto br = shoot_ground_state(prm, g.rmax(), h / nsub);
  nsub = substeps(prm, h, br.hi);
  Shooter sh{prm, g.rmax()};
  std::vector<double> slo, shi;
  sh.run(br.lo, h / nsub, &slo);
  sh.run(br.hi, h / nsub, &shi);

  // Nodes r_j = (j + 1/2) h sit on substep index nsub*j + nsub/2.
  std::vector<double> Q(M, 0.0);
  int good = -1;
  for (int j = 0; j < M; ++j) {
    std::size_t k = static_cast<std::size_t>(nsub) * j + nsub / 2;
    if (k >= slo.size() || k >= shi.size()) break;
    double a = slo[k], b = shi[k];
    if (!(a > 0) || !(b > 0) || std::fabs(a - b) > 1e-3 * std::fabs(a)) break;
    Q[j] = 0.5 * (a + b);
    good = j;
  }
  if (good < 8) throw NoConvergence("shooting profile too short to seed the Newton polish");
  int cut = std::max(8, static_cast<int>(0.8 * good));
  const double kappa = std::sqrt(prm.omega);
  for (int j = cut + 1; j < M; ++j)
    Q[j] = Q[cut] * std::pow(g.r(cut) / g.r(j), 0.5 * (prm.N - 1)) *
           std::exp(-kappa * (g.r(j) - g.r(cut)));

  // Newton on W(Lap Q - w Q + |Q|^{p-1} Q) = 0 with the banded Jacobian -W L_+.
  const auto& S = g.stiffness();
  int it = 0;
  double last = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (it = 1; it <= 60; ++it) {
    auto SQ = S * Q;
    std::vector<double> F(M);
    BandMatrix<double> J(M, RadialGrid::kHalfBand, RadialGrid::kHalfBand);
    for (int j = 0; j < M; ++j) {
      double a = std::pow(std::fabs(Q[j]), prm.p - 1);
      F[j] = -SQ[j] - g.w(j) * prm.omega * Q[j] + g.w(j) * a * Q[j];
      for (int k = std::max(0, j - RadialGrid::kHalfBand); k <= std::min(M - 1, j + RadialGrid::kHalfBand); ++k)
        J(j, k) = -S(j, k);
      J(j, j) += g.w(j) * (prm.p * a - prm.omega);
    }
    for (auto& f : F) f = -f;
    BandLU<double> lu(std::move(J));
    auto d = lu.solve(F);
    double dmax = 0;
    for (int j = 0; j < M; ++j) {
      Q[j] += d[j];
      dmax = std::max(dmax, std::fabs(d[j]));
    }
    if (!std::isfinite(dmax)) throw NoConvergence("Newton polish diverged");
    if (dmax <= 1e-15 * Q[0]) break;
    if (dmax >= 0.5 * last) {
      if (++stall >= 3) break;
    } else {
      stall = 0;
    }
    last = dmax;
  }

  // Replace the round-off dominated tail by its analytic decay.
  const double floor = 1e-14 * Q[0];
  int jt = -1;
  for (int j = 1; j < M; ++j)
    if (Q[j] < floor || Q[j] >= Q[j - 1]) {
      jt = j;
      break;
    }
  if (jt > 0) {
    int a = jt - 1;
    for (int j = jt; j < M; ++j)
      Q[j] = Q[a] * std::pow(g.r(a) / g.r(j), 0.5 * (prm.N - 1)) * std::exp(-kappa * (g.r(j) - g.r(a)));
  }

  GroundState gs;
  gs.params = prm;
  gs.grid = grid;
  gs.Q = std::move(Q);
  gs.newton_iterations = it;
  finalize_ground_state(gs);
  for (int j = 0; j < M; ++j)
    if (!(gs.Q[j] > 0) || (j > 0 && !(gs.Q[j] < gs.Q[j - 1])))
      throw NoConvergence("ground state lost positivity or monotonicity");
  if (!(gs.residual <= 1e-8))
    throw ResidualTooLarge("ground-state residual " + fmt17(gs.residual) + " exceeds 1e-8");
  return gs;
}

PohozaevReport verify_pohozaev(const GroundState& gs) {
  const auto& prm = gs.params;
  const double N = prm.N, p = prm.p;
  PohozaevReport r;
  r.lhs = {gs.mass2, gs.lp1, gs.EQ};
  r.rhs = {2.0 / N * gs.grad2, 2.0 * (p + 1) / (N * (p - 1)) * gs.grad2,
           (N * (p - 1) - 4) / (2 * N * (p - 1)) * gs.grad2};
  for (int i = 0; i < 3; ++i) r.residual[i] = (r.lhs[i] - r.rhs[i]) / r.rhs[i];
  return r;
}

namespace {
double gn_quotient_raw(double lp1, double grad2, double mass2, const ModelParams& prm) {
  const double N = prm.N, p = prm.p;
  double a = N * (p - 1) / 2, b = 2 - (N - 2) * (p - 1) / 2;
  return lp1 / (std::pow(std::sqrt(grad2), a) * std::pow(std::sqrt(mass2), b));
}
}  // namespace

double compute_cgn(const GroundState& gs) {
  return gn_quotient_raw(gs.lp1, gs.grad2, gs.mass2, gs.params);
}

double gn_quotient(const RadialGrid& g, const std::vector<cplx>& u, const ModelParams& prm) {
  return gn_quotient_raw(lp_sum(g, u, prm.p + 1), grad_sq(g, u), mass(g, u), prm);
}

double gn_deficit(const RadialField& u, const GroundState& gs) {
  u.check_finite();
  const auto& g = *u.grid;
  const auto& prm = gs.params;
  double m2 = mass(g, u.v), gr = grad_sq(g, u.v), lp = lp_sum(g, u.v, prm.p + 1);
  if (!(m2 > 0)) throw DegenerateInput("gn_deficit needs a nonzero field");
  const double N = prm.N, p = prm.p;
  double a = N * (p - 1) / 2, b = 2 - (N - 2) * (p - 1) / 2;
  double ratio = std::pow(gr / gs.grad2, a / 2) * std::pow(m2 / gs.mass2, b / 2);
  return ratio - lp / gs.lp1;
}

std::string ground_state_cache_key(const ModelParams& prm, const RadialGrid& g) {
  return "gs_N" + std::to_string(prm.N) + "_p" + double_bits_hex(prm.p) + "_M" +
         std::to_string(g.M()) + "_R" + double_bits_hex(g.rmax());
}

namespace {
constexpr std::uint32_t kGroundStateVersion = 1;

template <class T>
void put(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(const std::string& s, std::size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw CacheError("truncated ground-state cache");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}
}  // namespace

void save_ground_state(const GroundState& gs, const std::string& dir) {
  std::string key = ground_state_cache_key(gs.params, *gs.grid);
  std::string s = "TLGS";
  put(s, kGroundStateVersion);
  put(s, static_cast<std::int32_t>(gs.params.N));
  put(s, gs.params.p);
  put(s, static_cast<std::int32_t>(gs.grid->M()));
  put(s, gs.grid->rmax());
  put(s, static_cast<std::int32_t>(gs.newton_iterations));
  for (double q : gs.Q) put(s, q);
  write_file_atomic(dir + "/" + key + ".bin", s);

  auto pz = verify_pohozaev(gs);
  nlohmann::ordered_json j;
  j["format_version"] = kGroundStateVersion;
  j["dimension"] = gs.params.N;
  j["exponent"] = gs.params.p;
  j["s_c"] = gs.params.sc;
  j["omega"] = gs.params.omega;
  j["M"] = gs.grid->M();
  j["Rmax"] = gs.grid->rmax();
  j["Q0"] = gs.Q0;
  j["mass2"] = gs.mass2;
  j["grad2"] = gs.grad2;
  j["lp1"] = gs.lp1;
  j["EQ"] = gs.EQ;
  j["CGN"] = gs.CGN;
  j["residual"] = gs.residual;
  j["pohozaev"] = {pz.residual[0], pz.residual[1], pz.residual[2]};
  write_file_atomic(dir + "/" + key + ".json", j.dump(2) + "\n");
}

std::optional<GroundState> load_ground_state(const ModelParams& prm, GridPtr grid,
                                             const std::string& dir) {
  std::string path = dir + "/" + ground_state_cache_key(prm, *grid) + ".bin";
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::string s = read_file(path);
  if (s.size() < 4 || s.compare(0, 4, "TLGS") != 0) return std::nullopt;
  std::size_t pos = 4;
  if (get<std::uint32_t>(s, pos) != kGroundStateVersion) return std::nullopt;
  int N = get<std::int32_t>(s, pos);
  double p = get<double>(s, pos);
  int M = get<std::int32_t>(s, pos);
  double rmax = get<double>(s, pos);
  if (N != prm.N || p != prm.p || M != grid->M() || rmax != grid->rmax()) return std::nullopt;
  GroundState gs;
  gs.params = prm;
  gs.grid = grid;
  gs.newton_iterations = get<std::int32_t>(s, pos);
  gs.Q.resize(M);
  for (int j = 0; j < M; ++j) gs.Q[j] = get<double>(s, pos);
  finalize_ground_state(gs);
  return gs;
}

GroundState ground_state_cached(const ModelParams& prm, GridPtr grid,
                                const std::string& cache_dir, bool use_cache,
                                bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  if (use_cache && !cache_dir.empty()) {
    if (auto gs = load_ground_state(prm, grid, cache_dir)) {
      if (cache_hit) *cache_hit = true;
      return *gs;
    }
  }
  GroundState gs = solve_ground_state(prm, grid);
  if (!cache_dir.empty()) save_ground_state(gs, cache_dir);
  return gs;
}

}  // namespace tl
