#include "tlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "tlab/errors.hpp"
#include "tlab/evolve.hpp"
#include "tlab/fieldio.hpp"
#include "tlab/groundstate.hpp"
#include "tlab/modulation.hpp"
#include "tlab/random_fields.hpp"

namespace fs = std::filesystem;

namespace tl {

// ---------------------------------------------------------------------------
// JSON output

namespace {

void dump_string(std::string& out, const std::string& s) {
  out += ojson(s).dump();
}

void dump_rec(const ojson& j, std::string& out, int indent, int depth) {
  auto nl = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(std::size_t(indent * d), ' ');
  };
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        nl(depth + 1);
        dump_string(out, it.key());
        out += indent < 0 ? ":" : ": ";
        dump_rec(it.value(), out, indent, depth + 1);
      }
      nl(depth);
      out += '}';
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric arrays stay on one line
      bool flat = std::all_of(j.begin(), j.end(), [](const ojson& e) { return e.is_primitive(); });
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += flat && indent >= 0 ? ", " : ",";
        if (!flat) nl(depth + 1);
        dump_rec(j[i], out, indent, depth + 1);
      }
      if (!flat) nl(depth);
      out += ']';
      return;
    }
    case ojson::value_t::number_float: {
      double x = j.get<double>();
      out += std::isfinite(x) ? fmt17(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const ojson& j, int indent) {
  std::string out;
  dump_rec(j, out, indent, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Context and caches

Context make_context(const ExperimentConfig& cfg, bool no_cache) {
  validate(cfg);
  Context ctx;
  ctx.cfg = cfg;
  ctx.params = derive_params(cfg.dimension, cfg.exponent);
  double rmax = cfg.rmax > 0 ? cfg.rmax : cfg.rmax_factor / std::sqrt(ctx.params.omega);
  ctx.grid = make_grid(cfg.dimension, cfg.M, rmax);
  std::string dir = cfg.cache_enabled ? resolve_cache_dir(cfg) : "";
  if (!dir.empty()) fs::create_directories(dir);
  bool hit = false;
  ctx.gs = std::make_shared<const GroundState>(
      ground_state_cached(ctx.params, ctx.grid, dir, !no_cache, &hit));
  ctx.cache_status = dir.empty() || no_cache ? "disabled" : hit ? "hit" : "miss";
  return ctx;
}

namespace {
constexpr std::uint32_t kEigenVersion = 1;

template <class T>
void put(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T take(const std::string& s, std::size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw CacheError("truncated eigenpair cache");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}
std::string eigen_key(const GroundState& gs) {
  return "eig_" + ground_state_cache_key(gs.params, *gs.grid);
}
}  // namespace

void save_eigenpair(const EigenPair& e, const GroundState& gs, const std::string& dir) {
  std::string s = "TLEP";
  put(s, kEigenVersion);
  put(s, std::int32_t(gs.grid->M()));
  put(s, std::int32_t(e.normalization == Normalization::dualB));
  put(s, std::int32_t(e.iterations));
  for (double x : {e.e0, e.kappa, e.residual_plus, e.residual_minus, e.gap, e.nondegeneracy})
    put(s, x);
  for (double x : e.Y1) put(s, x);
  for (double x : e.Y2) put(s, x);
  write_file_atomic(dir + "/" + eigen_key(gs) + ".bin", s);
  ojson j;
  j["format_version"] = kEigenVersion;
  j["e0"] = e.e0;
  j["kappa"] = e.kappa;
  j["residual_plus"] = e.residual_plus;
  j["residual_minus"] = e.residual_minus;
  j["gap"] = e.gap;
  j["nondegeneracy"] = e.nondegeneracy;
  j["iterations"] = e.iterations;
  write_file_atomic(dir + "/" + eigen_key(gs) + ".json", dump_json(j) + "\n");
}

std::optional<EigenPair> load_eigenpair(const GroundState& gs, const std::string& dir) {
  std::string path = dir + "/" + eigen_key(gs) + ".bin";
  if (!fs::exists(path)) return std::nullopt;
  std::string s = read_file(path);
  if (s.size() < 4 || s.compare(0, 4, "TLEP") != 0) return std::nullopt;
  std::size_t pos = 4;
  if (take<std::uint32_t>(s, pos) != kEigenVersion) return std::nullopt;
  const int M = take<std::int32_t>(s, pos);
  if (M != gs.grid->M()) return std::nullopt;
  EigenPair e;
  e.normalization = take<std::int32_t>(s, pos) ? Normalization::dualB : Normalization::unitL2;
  e.iterations = take<std::int32_t>(s, pos);
  e.e0 = take<double>(s, pos);
  e.kappa = take<double>(s, pos);
  e.residual_plus = take<double>(s, pos);
  e.residual_minus = take<double>(s, pos);
  e.gap = take<double>(s, pos);
  e.nondegeneracy = take<double>(s, pos);
  e.Y1.resize(M);
  e.Y2.resize(M);
  for (auto& x : e.Y1) x = take<double>(s, pos);
  for (auto& x : e.Y2) x = take<double>(s, pos);
  if (pos != s.size()) throw CacheError("eigenpair cache has trailing bytes");
  return e;
}

void ensure_spectrum(Context& ctx, bool no_cache) {
  if (ctx.pair) return;
  ctx.op = assemble(ctx.gs);
  std::string dir = ctx.cfg.cache_enabled ? resolve_cache_dir(ctx.cfg) : "";
  if (!dir.empty() && !no_cache) {
    if (auto e = load_eigenpair(*ctx.gs, dir)) {
      ctx.pair = *e;
      ctx.eigen_cache_status = "hit";
      return;
    }
  }
  ctx.pair = solve_eigenpair(*ctx.op);
  if (!dir.empty()) save_eigenpair(*ctx.pair, *ctx.gs, dir);
  ctx.eigen_cache_status = dir.empty() || no_cache ? "disabled" : "miss";
}

RadialField build_seed(Context& ctx, double* t0_out, ProfileExpansion* ex_out) {
  const auto& c = ctx.cfg;
  RadialField u(ctx.grid);
  if (c.seed == "Q" || c.seed == "scaled") {
    double a = c.seed == "scaled" ? c.amplitude : 1.0;
    for (int j = 0; j < ctx.grid->M(); ++j) u.v[j] = a * ctx.gs->Q[j];
  } else {
    ensure_spectrum(ctx, false);
    double A = c.seed == "Qplus" ? 1.0 : c.seed == "Qminus" ? -1.0 : c.A;
    auto ex = build_profiles(A, c.order, *ctx.pair, *ctx.op);
    double t0 = select_t0(ex, c.seed_tol);
    if (c.seed == "profile") {
      auto V = evaluate_Vk(ex, t0);
      for (int j = 0; j < ctx.grid->M(); ++j) u.v[j] = ctx.gs->Q[j] + V.v[j];
    } else {
      u = special_seed(A > 0 ? 1 : -1, ex, t0);
    }
    if (t0_out) *t0_out = t0;
    if (ex_out) *ex_out = std::move(ex);
  }
  if (c.perturbation != 0)
    for (auto& x : u.v) x *= 1 + c.perturbation;
  return u;
}

// ---------------------------------------------------------------------------
// Command plumbing

std::string command_dir(const std::string& name, const ExperimentConfig& cfg,
                        const RunOptions& opt) {
  return (fs::path(opt.out_dir ? *opt.out_dir : cfg.out_dir) / name).string();
}

namespace {

struct Run {
  std::string name, dir;
  const ExperimentConfig& cfg;
  const RunOptions& opt;
  ojson manifest;
  std::vector<std::string> artifacts;

  Run(std::string n, const ExperimentConfig& c, const RunOptions& o)
      : name(std::move(n)), dir(command_dir(name, c, o)), cfg(c), opt(o) {
    manifest["tool"] = "threshold-lab";
    manifest["version"] = kVersion;
    manifest["command"] = name;
    manifest["config_hash"] = config_hash(cfg);
    manifest["no_cache"] = opt.no_cache;
  }

  void log(const std::string& s) const {
    if (opt.log) *opt.log << "[" << name << "] " << s << std::endl;
  }

  void write(const std::string& file, const std::string& content) {
    write_file_atomic(dir + "/" + file, content);
    artifacts.push_back(file);
  }
  void write_json(const std::string& file, const ojson& j) { write(file, dump_json(j) + "\n"); }

  void finish(bool pass) {
    manifest["status"] = pass ? "ok" : "check_failed";
    manifest["artifacts"] = artifacts;
    write_file_atomic(dir + "/manifest.json", dump_json(manifest) + "\n");
  }
};

// Removes outputs of an earlier run so a failed run cannot leave stale files.
void reset_dir(const std::string& dir) {
  if (fs::exists(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) fs::remove(e.path());
  fs::create_directories(dir);
}

template <class F>
int guarded(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opt, F body) {
  auto start = std::chrono::steady_clock::now();
  std::string dir;
  int code = 2;
  ojson err;
  try {
    dir = command_dir(name, cfg, opt);
    reset_dir(dir);
    Run run(name, cfg, opt);
    write_file_atomic(dir + "/config.yaml", to_yaml(cfg));
    run.artifacts.push_back("config.yaml");
    code = body(run) ? 0 : 1;
  } catch (const Error& e) {
    err["error"] = e.name();
    err["message"] = e.what();
  } catch (const std::exception& e) {
    err["error"] = "InternalError";
    err["message"] = e.what();
  }
  if (!err.is_null()) {
    std::string text = dump_json(err, -1);
    if (opt.log) *opt.log << text << std::endl;
    try {
      if (!dir.empty()) {
        fs::create_directories(dir);
        write_file_atomic(dir + "/error.json", dump_json(err) + "\n");
      }
    } catch (...) {
    }
    return 2;
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    std::ostringstream os;
    os.precision(6);
    os << "wall_seconds " << wall << "\n";
    write_file_atomic(dir + "/timing.txt", os.str());
  } catch (...) {
  }
  return code;
}

ojson params_json(const Context& ctx) {
  ojson j;
  j["dimension"] = ctx.params.N;
  j["exponent"] = ctx.params.p;
  j["s_c"] = ctx.params.sc;
  j["omega"] = ctx.params.omega;
  j["M"] = ctx.grid->M();
  j["Rmax"] = ctx.grid->rmax();
  return j;
}

ojson threshold_json(const ThresholdReport& t) {
  ojson j;
  j["me_product"] = t.me_product;
  j["me_Q"] = t.me_Q;
  j["me_side"] = to_string(t.me_side);
  j["grad_product"] = t.grad_product;
  j["grad_Q"] = t.grad_Q;
  j["grad_side"] = to_string(t.grad_side);
  return j;
}

void add_cache(Run& run, const Context& ctx) {
  run.manifest["cache"]["ground_state"] = ctx.cache_status;
  if (ctx.pair) run.manifest["cache"]["eigenpair"] = ctx.eigen_cache_status;
}

std::string csv_row(std::initializer_list<double> xs) {
  std::string s;
  bool first = true;
  for (double x : xs) {
    if (!first) s += ',';
    first = false;
    s += fmt17(x);
  }
  return s + "\n";
}

// Evolution plus classification shared by evolve, classify and sweep.
struct Trajectory {
  RadialField seed;
  double t0 = 0;
  bool has_profile = false;
  ProfileExpansion ex;
  TrajectoryRecord rec;
  Classification cls;
};

Trajectory run_trajectory(Context& ctx, const std::function<void(const std::string&)>& log) {
  Trajectory tr;
  ensure_spectrum(ctx, false);
  tr.seed = build_seed(ctx, &tr.t0, &tr.ex);
  tr.has_profile = tr.ex.gs != nullptr;
  auto ecfg = ctx.cfg.evolution;
  ecfg.keep_snapshots = true;
  log("evolving seed " + ctx.cfg.seed + " " + to_string(ecfg.direction) + " to T = " + fmt17(ecfg.T));
  tr.rec = evolve(tr.seed, ecfg, *ctx.gs);
  tr.cls = classify(tr.rec, *ctx.gs, ctx.pair->e0, ctx.cfg.classifier);
  log("stop " + to_string(tr.rec.stop_reason) + " after " + std::to_string(tr.rec.steps) +
      " steps, verdict " + to_string(tr.cls.verdict));
  return tr;
}

int sign_flips(const std::vector<double>& gap) {
  int flips = 0;
  for (std::size_t i = 1; i < gap.size(); ++i)
    if ((gap[i] > 0) != (gap[0] > 0) || gap[i] == 0) ++flips;
  return flips;
}

ojson trajectory_json(const Context& ctx, const Trajectory& tr) {
  const auto& rec = tr.rec;
  ojson j;
  j["seed"] = ctx.cfg.seed;
  if (tr.has_profile) {
    j["profile_A"] = tr.ex.A;
    j["profile_order"] = tr.ex.k;
    j["t0"] = tr.t0;
  }
  j["seed_threshold"] = threshold_json(threshold_report(tr.seed, *ctx.gs));
  auto cq = conserved(tr.seed, ctx.params);
  j["seed_mass_rel_Q"] = cq.mass / ctx.gs->mass2 - 1;
  j["seed_energy_rel_Q"] = (cq.energy - ctx.gs->EQ) / std::fabs(ctx.gs->EQ);
  j["seed_grad_norm"] = std::sqrt(grad_sq(*ctx.grid, tr.seed.v));
  j["grad_norm_Q"] = std::sqrt(ctx.gs->grad2);
  j["direction"] = to_string(rec.direction);
  j["scheme"] = to_string(ctx.cfg.evolution.scheme);
  j["stop_reason"] = to_string(rec.stop_reason);
  if (rec.stop_reason == StopReason::dispersal_proxy)
    j["stop_note"] = "dispersal proxy: finite-horizon stand-in for scattering";
  if (!rec.failure.empty()) j["failure"] = rec.failure;
  j["steps"] = rec.steps;
  j["final_time"] = rec.times.empty() ? 0.0 : rec.times.back();
  j["grad_ceiling"] = rec.grad_ceiling;
  if (!rec.M_trace.empty()) {
    double M0 = rec.M_trace.front(), E0 = rec.E_trace.front();
    j["mass_drift_rel"] = (rec.M_trace.back() + rec.absorbed_trace.back() - M0) / M0;
    j["energy_drift_rel"] = (rec.E_trace.back() - E0) / std::max(std::fabs(E0), 1e-300);
    j["absorbed_mass"] = rec.absorbed_trace.back();
  }
  j["grad_gap_sign_flips"] = sign_flips(rec.grad_gap_trace);
  j["e0"] = ctx.pair->e0;
  const auto& c = tr.cls;
  j["verdict"] = to_string(c.verdict);
  j["reason"] = c.reason;
  j["delta_integral"] = c.delta_integral;
  j["delta_tail_integral"] = c.delta_tail_integral;
  j["virial_negative_samples"] = c.virial_negative;
  j["virial_positive_samples"] = c.virial_positive;
  if (c.fit_attempted) {
    j["fit"]["degenerate"] = c.fit_degenerate;
    j["fit"]["rate"] = c.fit_rate;
    j["fit"]["ratio_to_e0"] = c.fit_ratio;
  }
  return j;
}

std::string trajectory_csv(const TrajectoryRecord& rec) {
  std::string s = "t,mass,energy,grad_norm,delta,dt,grad_gap,absorbed\n";
  for (std::size_t i = 0; i < rec.times.size(); ++i)
    s += csv_row({rec.times[i], rec.M_trace[i], rec.E_trace[i], rec.gradnorm_trace[i],
                  rec.delta_trace[i], rec.dt_trace[i], rec.grad_gap_trace[i],
                  rec.absorbed_trace[i]});
  return s;
}

void write_trajectory(Run& run, const Context& ctx, const Trajectory& tr) {
  run.write("trajectory.csv", trajectory_csv(tr.rec));
  if (ctx.cfg.dump_snapshots) {
    std::string idx = "index,t,file\n";
    for (std::size_t i = 0; i < tr.rec.snapshots.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_%05zu.csv", i);
      write_field_csv(tr.rec.snapshots[i], run.dir + "/" + name);
      run.artifacts.push_back(name);
      idx += std::to_string(i) + "," + fmt17(tr.rec.times[i]) + "," + name + "\n";
    }
    run.write("snapshots.csv", idx);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

int cmd_ground(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("ground", cfg, opt, [&](Run& run) {
    auto ctx = make_context(cfg, opt.no_cache);
    run.log("ground state " + ctx.cache_status);
    const auto& gs = *ctx.gs;
    auto pz = verify_pohozaev(gs);
    double cgn = compute_cgn(gs);
    bool pass = pz.pass(cfg.pohozaev_tol);

    std::string csv = "r,Q\n";
    for (int j = 0; j < ctx.grid->M(); ++j) csv += csv_row({ctx.grid->r(j), gs.Q[j]});
    run.write("Q.csv", csv);

    ojson rep;
    rep["params"] = params_json(ctx);
    rep["Q0"] = gs.Q0;
    rep["mass2"] = gs.mass2;
    rep["grad2"] = gs.grad2;
    rep["lp1"] = gs.lp1;
    rep["EQ"] = gs.EQ;
    rep["CGN"] = gs.CGN;
    rep["CGN_recomputed"] = cgn;
    rep["me_Q"] = gs.me_Q;
    rep["grad_Q"] = gs.grad_Q;
    rep["profile_residual"] = gs.residual;
    rep["pohozaev"]["residual"] = {pz.residual[0], pz.residual[1], pz.residual[2]};
    rep["pohozaev"]["lhs"] = {pz.lhs[0], pz.lhs[1], pz.lhs[2]};
    rep["pohozaev"]["rhs"] = {pz.rhs[0], pz.rhs[1], pz.rhs[2]};
    rep["pohozaev"]["tolerance"] = cfg.pohozaev_tol;
    rep["pohozaev"]["pass"] = pass;
    run.write_json("ground.json", rep);

    add_cache(run, ctx);
    run.manifest["residual_summary"]["pohozaev_max"] =
        std::max({pz.residual[0], pz.residual[1], pz.residual[2]});
    run.manifest["residual_summary"]["profile_residual"] = gs.residual;
    run.manifest["verdicts"]["pohozaev"] = pass ? "pass" : "fail";
    run.finish(pass);
    return pass;
  });
}

int cmd_spectrum(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("spectrum", cfg, opt, [&](Run& run) {
    auto ctx = make_context(cfg, opt.no_cache);
    ensure_spectrum(ctx, opt.no_cache);
    run.log("eigenpair " + ctx.eigen_cache_status + ", e0 = " + fmt17(ctx.pair->e0));
    const auto& op = *ctx.op;
    const auto& e = *ctx.pair;
    auto kr = kernel_identities(op);
    auto dual = to_dual_normalization(e);
    auto co = sample_coercivity(op, e, cfg.coercivity_samples, cfg.coercivity_seed);

    std::string csv = "r,Y1,Y2\n";
    for (int j = 0; j < ctx.grid->M(); ++j) csv += csv_row({ctx.grid->r(j), e.Y1[j], e.Y2[j]});
    run.write("eigenfunction.csv", csv);

    bool kernel_ok = kr.Lminus_Q <= cfg.kernel_tol && kr.Lplus_Q <= cfg.kernel_tol &&
                     kr.Lplus_Qtilde <= cfg.kernel_tol;
    bool eigen_ok = e.e0 > 0 && e.residual_plus <= cfg.eigen_tol && e.residual_minus <= cfg.eigen_tol;
    bool coer_ok = co.min_ratio > 0 && co.phi_Q < 0 && std::fabs(co.phi_iQ) <= 1e-8 &&
                   std::fabs(co.phi_Yplus) <= 1e-8;

    ojson rep;
    rep["params"] = params_json(ctx);
    rep["kernel"]["Lminus_Q"] = kr.Lminus_Q;
    rep["kernel"]["Lplus_Q"] = kr.Lplus_Q;
    rep["kernel"]["Lplus_Qtilde"] = kr.Lplus_Qtilde;
    rep["kernel"]["symmetry_plus"] = kr.symmetry_plus;
    rep["kernel"]["symmetry_minus"] = kr.symmetry_minus;
    rep["kernel"]["tolerance"] = cfg.kernel_tol;
    rep["kernel"]["pass"] = kernel_ok;
    rep["eigen"]["e0"] = e.e0;
    rep["eigen"]["residual_plus"] = e.residual_plus;
    rep["eigen"]["residual_minus"] = e.residual_minus;
    rep["eigen"]["kappa"] = e.kappa;
    rep["eigen"]["dual_scale_kappa"] = dual.kappa;
    rep["eigen"]["gap"] = e.gap;
    rep["eigen"]["nondegeneracy"] = e.nondegeneracy;
    rep["eigen"]["iterations"] = e.iterations;
    rep["eigen"]["tolerance"] = cfg.eigen_tol;
    rep["eigen"]["pass"] = eigen_ok;
    rep["coercivity"]["samples"] = co.samples;
    rep["coercivity"]["seed"] = cfg.coercivity_seed;
    rep["coercivity"]["min_ratio"] = co.min_ratio;
    rep["coercivity"]["max_ratio"] = co.max_ratio;
    rep["coercivity"]["phi_Q"] = co.phi_Q;
    rep["coercivity"]["phi_iQ"] = co.phi_iQ;
    rep["coercivity"]["phi_Yplus"] = co.phi_Yplus;
    rep["coercivity"]["pass"] = coer_ok;
    run.write_json("spectrum.json", rep);

    add_cache(run, ctx);
    run.manifest["residual_summary"]["kernel_max"] =
        std::max({kr.Lminus_Q, kr.Lplus_Q, kr.Lplus_Qtilde});
    run.manifest["residual_summary"]["eigen_max"] = std::max(e.residual_plus, e.residual_minus);
    run.manifest["verdicts"]["kernel"] = kernel_ok ? "pass" : "fail";
    run.manifest["verdicts"]["eigen"] = eigen_ok ? "pass" : "fail";
    run.manifest["verdicts"]["coercivity"] = coer_ok ? "pass" : "fail";
    run.manifest["e0"] = e.e0;
    bool pass = kernel_ok && eigen_ok && coer_ok;
    run.finish(pass);
    return pass;
  });
}

int cmd_profiles(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("profiles", cfg, opt, [&](Run& run) {
    auto ctx = make_context(cfg, opt.no_cache);
    ensure_spectrum(ctx, opt.no_cache);
    const double e0 = ctx.pair->e0;
    auto qctx = quad_context(*ctx.op, *ctx.pair);
    std::string csv = "k,t,eps_H1\n";
    ojson rep;
    rep["params"] = params_json(ctx);
    rep["A"] = cfg.A;
    rep["e0"] = e0;
    rep["quad_eigen_residual"] = qctx->eigen_residual;
    bool pass = true;
    double worst = INFINITY;
    ProfileExpansion top;
    for (int k = 1; k <= cfg.order; ++k) {
      auto ex = build_profiles(cfg.A, k, *ctx.op, qctx);
      double t0 = select_t0(ex, cfg.seed_tol);
      auto tr = residual_trace(ex, t0, t0 + cfg.trace_span / e0, cfg.trace_samples);
      double ratio = tr.fitted_rate / ((k + 1) * e0);
      run.log("k = " + std::to_string(k) + " rate/((k+1)e0) = " + fmt17(ratio));
      for (std::size_t i = 0; i < tr.times.size(); ++i)
        csv += std::to_string(k) + "," + fmt17(tr.times[i]) + "," + fmt17(tr.eps_norm[i]) + "\n";
      ojson o;
      o["k"] = k;
      o["t0"] = t0;
      o["q_max"] = ex.q_max;
      o["fitted_rate"] = tr.fitted_rate;
      o["ratio_to_k_plus_1_e0"] = ratio;
      o["pass"] = ratio >= 0.9;
      rep["orders"].push_back(o);
      pass = pass && ratio >= 0.9;
      worst = std::min(worst, ratio);
      if (k == cfg.order) top = std::move(ex);
    }
    run.write("residual_trace.csv", csv);

    std::string zcsv = "r";
    for (int j = 1; j <= top.k; ++j)
      zcsv += ",Z" + std::to_string(j) + "_re,Z" + std::to_string(j) + "_im";
    zcsv += "\n";
    for (int i = 0; i < ctx.grid->M(); ++i) {
      zcsv += fmt17(ctx.grid->r(i));
      for (const auto& Z : top.Z) zcsv += "," + fmt17(Z.v[i].real()) + "," + fmt17(Z.v[i].imag());
      zcsv += "\n";
    }
    run.write("profiles_Z.csv", zcsv);
    for (int j = 0; j < top.k; ++j)
      rep["tail_decay_rate"].push_back(tail_decay_rate(*ctx.grid, top.Z[j].v));
    rep["tail_reference_sqrt_omega"] = std::sqrt(ctx.params.omega);
    run.write_json("profiles.json", rep);

    add_cache(run, ctx);
    run.manifest["residual_summary"]["min_rate_ratio"] = worst;
    run.manifest["verdicts"]["residual_hierarchy"] = pass ? "pass" : "fail";
    run.finish(pass);
    return pass;
  });
}

int cmd_evolve(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("evolve", cfg, opt, [&](Run& run) {
    auto ctx = make_context(cfg, opt.no_cache);
    ensure_spectrum(ctx, opt.no_cache);
    auto tr = run_trajectory(ctx, [&](const std::string& s) { run.log(s); });
    write_trajectory(run, ctx, tr);
    auto rep = trajectory_json(ctx, tr);
    rep["params"] = params_json(ctx);
    run.write_json("evolve.json", rep);
    add_cache(run, ctx);
    run.manifest["residual_summary"]["mass_drift_rel"] = rep.value("mass_drift_rel", 0.0);
    run.manifest["residual_summary"]["energy_drift_rel"] = rep.value("energy_drift_rel", 0.0);
    run.manifest["verdicts"]["verdict"] = to_string(tr.cls.verdict);
    run.manifest["verdicts"]["stop_reason"] = to_string(tr.rec.stop_reason);
    bool pass = tr.rec.stop_reason != StopReason::numerical_failure;
    run.finish(pass);
    return pass;
  });
}

int cmd_classify(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("classify", cfg, opt, [&](Run& run) {
    auto ctx = make_context(cfg, opt.no_cache);
    ensure_spectrum(ctx, opt.no_cache);
    auto tr = run_trajectory(ctx, [&](const std::string& s) { run.log(s); });
    write_trajectory(run, ctx, tr);
    auto rep = trajectory_json(ctx, tr);
    rep["params"] = params_json(ctx);
    const auto& gs = *ctx.gs;
    const double L = 1 / std::sqrt(ctx.params.omega);

    // virial consistency per radius
    std::vector<double> radii;
    for (double m : cfg.virial_radii) radii.push_back(m * L);
    std::string vcsv = "R,t,yR,yR_prime,yR_second,AR,consistency_residual\n";
    bool virial_ok = true;
    if (tr.rec.snapshots.size() >= 3) {
      for (double R : radii) {
        ojson o;
        o["R"] = R;
        try {
          auto c = make_cutoff(R, *ctx.grid);
          auto vt = virial_trace(tr.rec, c, gs);
          for (std::size_t i = 0; i < vt.times.size(); ++i)
            vcsv += csv_row({R, vt.times[i], vt.yR[i], vt.yR_prime[i], vt.yR_second[i], vt.AR[i],
                             vt.consistency_residual[i]});
          o["max_residual"] = vt.max_residual;
          o["budget"] = vt.budget;
          o["within_budget"] = vt.within_budget;
          virial_ok = virial_ok && vt.within_budget;
        } catch (const CutoffOutOfDomain& e) {
          o["skipped"] = e.what();
        }
        rep["virial"]["consistency"].push_back(o);
      }
      auto ss = virial_sign_search(tr.rec, gs, radii);
      rep["virial"]["sign_search"]["radii"] = ss.radii;
      rep["virial"]["sign_search"]["worst_margin"] = ss.worst_margin;
      rep["virial"]["sign_search"]["R"] = ss.R;
      rep["virial"]["sign_search"]["found"] = ss.R > 0;
    } else {
      rep["virial"]["skipped"] = "fewer than three recorded snapshots";
    }
    run.write("virial.csv", vcsv);

    // modulation inside the window
    std::vector<ModulationFrame> frames;
    std::string mcsv = "t,theta,alpha,h_H1,delta\n";
    for (std::size_t i = 0; i < tr.rec.snapshots.size(); ++i) {
      try {
        auto f = decompose(tr.rec.snapshots[i], tr.rec.times[i], gs, cfg.classifier.delta0);
        mcsv += csv_row({f.t, f.theta, f.alpha, f.h_H1, f.delta});
        f.h = RadialField();
        frames.push_back(std::move(f));
      } catch (const OutsideWindow&) {
      } catch (const PhaseAmbiguity&) {
      }
    }
    run.write("modulation.csv", mcsv);
    rep["modulation"]["frames"] = frames.size();
    std::vector<ModulationFrame> positive;
    for (const auto& f : frames)
      if (f.delta > 0) positive.push_back(f);
    if (positive.size() >= 3) {
      auto we = window_equivalence(positive);
      rep["modulation"]["equivalence"]["C"] = we.C;
      rep["modulation"]["equivalence"]["alpha_over_delta"] = {we.alpha_min, we.alpha_max};
      rep["modulation"]["equivalence"]["h_over_delta"] = {we.h_min, we.h_max};
      auto mr = modulation_rates(positive);
      rep["modulation"]["rates"]["sup_alpha_prime_over_delta"] = mr.sup_alpha;
      rep["modulation"]["rates"]["sup_theta_prime_over_delta"] = mr.sup_theta;
      rep["modulation"]["rates"]["alpha_max_over_median"] = mr.alpha_max_over_median;
      rep["modulation"]["rates"]["theta_max_over_median"] = mr.theta_max_over_median;
    }
    run.write_json("classify.json", rep);

    add_cache(run, ctx);
    run.manifest["residual_summary"]["mass_drift_rel"] = rep.value("mass_drift_rel", 0.0);
    run.manifest["residual_summary"]["energy_drift_rel"] = rep.value("energy_drift_rel", 0.0);
    run.manifest["verdicts"]["verdict"] = to_string(tr.cls.verdict);
    run.manifest["verdicts"]["stop_reason"] = to_string(tr.rec.stop_reason);
    run.manifest["verdicts"]["virial_consistency"] = virial_ok ? "pass" : "fail";
    run.manifest["verdicts"]["grad_gap_sign_flips"] = sign_flips(tr.rec.grad_gap_trace);
    bool pass = tr.rec.stop_reason != StopReason::numerical_failure;
    run.finish(pass);
    return pass;
  });
}

namespace {

struct CellResult {
  SweepCell cell;
  bool ok = false;
  std::string error, message;
  ojson report;
  std::string verdict, stop_reason;
  double final_time = 0, fit_ratio = 0, late_grad_gap = 0, profile_grad_gap = NAN;
  int flips = 0;
};

CellResult run_cell(const ExperimentConfig& base, const SweepCell& cell, bool no_cache) {
  CellResult r;
  r.cell = cell;
  try {
    ExperimentConfig c = base;
    c.dimension = cell.dimension;
    c.exponent = cell.exponent;
    c.A = cell.A;
    c.perturbation = cell.perturbation;
    if (cell.M) c.M = *cell.M;
    if (cell.rmax) c.rmax = *cell.rmax;
    auto ctx = make_context(c, no_cache);
    ensure_spectrum(ctx, no_cache);
    auto tr = run_trajectory(ctx, [](const std::string&) {});
    r.report = trajectory_json(ctx, tr);
    r.verdict = to_string(tr.cls.verdict);
    r.stop_reason = to_string(tr.rec.stop_reason);
    r.final_time = tr.rec.times.back();
    r.fit_ratio = tr.cls.fit_ratio;
    r.late_grad_gap = tr.rec.gradnorm_trace.back() * tr.rec.gradnorm_trace.back() - ctx.gs->grad2;
    r.flips = sign_flips(tr.rec.grad_gap_trace);
    if (tr.has_profile) {
      // ||grad U^A||^2 - ||grad Q||^2 at the end of the configured trace span
      double t = tr.t0 + c.trace_span / ctx.pair->e0;
      auto U = approximate_solution(tr.ex, t);
      r.profile_grad_gap = grad_sq(*ctx.grid, U.v) - ctx.gs->grad2;
      r.report["profile_grad_gap_time"] = t;
      r.report["profile_grad_gap"] = r.profile_grad_gap;
    }
    r.ok = true;
  } catch (const Error& e) {
    r.error = e.name();
    r.message = e.what();
  } catch (const std::exception& e) {
    r.error = "InternalError";
    r.message = e.what();
  }
  return r;
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
  return guarded("sweep", cfg, opt, [&](Run& run) {
    auto cells = cfg.expand_sweep();
    if (cells.empty()) throw ConfigError("no cells");
    if (cfg.sweep_workers < 0) throw ConfigError("sweep.workers must be >= 0");
    int workers = cfg.sweep_workers > 0 ? cfg.sweep_workers
                                        : int(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min<int>(workers, int(cells.size()));
    run.log(std::to_string(cells.size()) + " cells on " + std::to_string(workers) + " workers");

    // Each worker claims cell indices and writes only its own result slot.
    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < cells.size();)
        results[i] = run_cell(cfg, cells[i], opt.no_cache);
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::string csv =
        "cell,dimension,exponent,A,perturbation,status,error,verdict,stop_reason,final_time,"
        "fit_ratio,late_grad_gap,profile_grad_gap,grad_gap_sign_flips\n";
    ojson rep;
    int ok = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      ok += r.ok;
      csv += std::to_string(i) + "," + std::to_string(r.cell.dimension) + "," +
             fmt17(r.cell.exponent) + "," + fmt17(r.cell.A) + "," + fmt17(r.cell.perturbation) +
             "," + (r.ok ? "ok" : "error") + "," + r.error + "," + r.verdict + "," +
             r.stop_reason + "," + fmt17(r.final_time) + "," + fmt17(r.fit_ratio) + "," +
             fmt17(r.late_grad_gap) + "," + fmt17(r.profile_grad_gap) + "," +
             std::to_string(r.flips) + "\n";
      ojson o;
      o["cell"] = i;
      o["dimension"] = r.cell.dimension;
      o["exponent"] = r.cell.exponent;
      o["A"] = r.cell.A;
      o["perturbation"] = r.cell.perturbation;
      if (r.cell.M) o["M"] = *r.cell.M;
      if (r.cell.rmax) o["rmax"] = *r.cell.rmax;
      o["status"] = r.ok ? "ok" : "error";
      if (r.ok) {
        o["result"] = r.report;
      } else {
        o["error"] = r.error;
        o["message"] = r.message;
      }
      rep["cells"].push_back(o);
      run.manifest["verdicts"]["cells"].push_back(r.ok ? r.verdict : "error:" + r.error);
      run.log("cell " + std::to_string(i) + ": " + (r.ok ? r.verdict : r.error + " " + r.message));
    }
    rep["succeeded"] = ok;
    rep["failed"] = int(results.size()) - ok;
    run.write("sweep.csv", csv);
    run.write_json("sweep.json", rep);
    run.manifest["residual_summary"]["cells"] = results.size();
    run.manifest["residual_summary"]["succeeded"] = ok;
    run.finish(ok > 0);
    return ok > 0;
  });
}

int run_command(const std::string& name, const ExperimentConfig& cfg, const RunOptions& opt) {
  if (name == "ground") return cmd_ground(cfg, opt);
  if (name == "spectrum") return cmd_spectrum(cfg, opt);
  if (name == "profiles") return cmd_profiles(cfg, opt);
  if (name == "evolve") return cmd_evolve(cfg, opt);
  if (name == "classify") return cmd_classify(cfg, opt);
  if (name == "sweep") return cmd_sweep(cfg, opt);
  if (opt.log)
    *opt.log << dump_json({{"error", "ConfigError"}, {"message", "unknown command '" + name + "'"}}, -1)
             << std::endl;
  return 2;
}

}  // namespace tl
