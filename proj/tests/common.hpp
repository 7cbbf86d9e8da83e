#pragma once
// Shared fixtures: ground states and spectra are solved once per process.

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <tuple>

#include "tlab/groundstate.hpp"
#include "tlab/linop.hpp"

namespace tlt {

struct Setup {
  std::shared_ptr<const tl::GroundState> gs;
  std::shared_ptr<const tl::LinearizedOperator> op;
  std::shared_ptr<const tl::EigenPair> pair;
};

inline Setup setup(int N, double p, int M = 4096, bool spectrum = true) {
  static std::mutex m;
  static std::map<std::tuple<int, double, int>, Setup> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& s = cache[{N, p, M}];
  if (!s.gs) {
    auto prm = tl::derive_params(N, p);
    s.gs = std::make_shared<const tl::GroundState>(tl::solve_ground_state(prm, tl::default_grid(prm, M)));
  }
  if (spectrum && !s.op) {
    s.op = std::make_shared<const tl::LinearizedOperator>(tl::assemble(s.gs));
    s.pair = std::make_shared<const tl::EigenPair>(tl::solve_eigenpair(*s.op));
  }
  return s;
}

inline tl::RadialField gaussian(tl::GridPtr g, double a, double amp = 1.0) {
  tl::RadialField u(g);
  for (int j = 0; j < g->M(); ++j) u.v[j] = amp * std::exp(-a * g->r(j) * g->r(j));
  return u;
}

inline double max_abs_diff(const tl::RadialField& a, const tl::RadialField& b) {
  double d = 0;
  for (std::size_t j = 0; j < a.v.size(); ++j) d = std::max(d, std::abs(a.v[j] - b.v[j]));
  return d;
}

}  // namespace tlt
