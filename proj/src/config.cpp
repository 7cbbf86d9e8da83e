#include "tlab/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/fieldio.hpp"
#include "tlab/groundstate.hpp"
#include "tlab/model.hpp"

namespace tl {

namespace {

void check_keys(const YAML::Node& n, const std::string& where, std::set<std::string> allowed) {
  if (!n.IsMap()) throw ConfigError(where + " must be a table");
  for (const auto& kv : n) {
    auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::string scalar(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) throw ConfigError(name + " must be a scalar");
  return n.Scalar();
}

double get_double(const YAML::Node& n, const std::string& name) {
  auto s = scalar(n, name);
  if (s == ".inf" || s == "inf") return INFINITY;
  if (s == "-.inf" || s == "-inf") return -INFINITY;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(name + ": not a number: '" + s + "'");
  return v;
}

long long get_int(const YAML::Node& n, const std::string& name) {
  auto s = scalar(n, name);
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(name + ": not an integer: '" + s + "'");
  return v;
}

bool get_bool(const YAML::Node& n, const std::string& name) {
  auto s = scalar(n, name);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(name + ": expected true or false, got '" + s + "'");
}

template <class T, class F>
std::vector<T> get_list(const YAML::Node& n, const std::string& name, F one) {
  std::vector<T> out;
  if (n.IsScalar()) {
    out.push_back(one(n, name));
    return out;
  }
  if (!n.IsSequence()) throw ConfigError(name + " must be a list");
  for (std::size_t i = 0; i < n.size(); ++i)
    out.push_back(one(n[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

template <class F>
void opt(const YAML::Node& t, const char* key, const std::string& where, F set) {
  if (auto n = t[key]) set(n, where + "." + key);
}

std::string f17(double x) {
  if (std::isinf(x)) return x > 0 ? ".inf" : "-.inf";
  return fmt17(x);
}

template <class T, class F>
std::string list(const std::vector<T>& v, F fmt) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::string quoted(const std::string& s) {
  std::string o = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') o += '\\';
    o += c;
  }
  return o + "\"";
}

SweepCell parse_cell(const YAML::Node& n, const std::string& where) {
  check_keys(n, where, {"dimension", "exponent", "A", "perturbation", "M", "rmax"});
  SweepCell c;
  opt(n, "dimension", where, [&](auto& v, auto nm) { c.dimension = int(get_int(v, nm)); });
  opt(n, "exponent", where, [&](auto& v, auto nm) { c.exponent = get_double(v, nm); });
  opt(n, "A", where, [&](auto& v, auto nm) { c.A = get_double(v, nm); });
  opt(n, "perturbation", where, [&](auto& v, auto nm) { c.perturbation = get_double(v, nm); });
  opt(n, "M", where, [&](auto& v, auto nm) { c.M = int(get_int(v, nm)); });
  opt(n, "rmax", where, [&](auto& v, auto nm) { c.rmax = get_double(v, nm); });
  return c;
}

}  // namespace

std::vector<SweepCell> ExperimentConfig::expand_sweep() const {
  std::vector<SweepCell> cells;
  bool any = !sweep_dimension.empty() || !sweep_exponent.empty() || !sweep_A.empty() ||
             !sweep_perturbation.empty();
  if (any) {
    auto dims = sweep_dimension.empty() ? std::vector<int>{dimension} : sweep_dimension;
    auto exps = sweep_exponent.empty() ? std::vector<double>{exponent} : sweep_exponent;
    auto As = sweep_A.empty() ? std::vector<double>{A} : sweep_A;
    auto eps = sweep_perturbation.empty() ? std::vector<double>{perturbation} : sweep_perturbation;
    for (int d : dims)
      for (double p : exps)
        for (double a : As)
          for (double e : eps) {
            SweepCell c;
            c.dimension = d;
            c.exponent = p;
            c.A = a;
            c.perturbation = e;
            cells.push_back(c);
          }
  }
  cells.insert(cells.end(), sweep_cells.begin(), sweep_cells.end());
  return cells;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
  ExperimentConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "config",
             {"params", "grid", "solver", "profiles", "evolution", "classifier", "output", "cache",
              "sweep"});
  try {
    if (auto t = root["params"]) {
      check_keys(t, "params", {"dimension", "exponent"});
      opt(t, "dimension", "params", [&](auto& v, auto n) { c.dimension = int(get_int(v, n)); });
      opt(t, "exponent", "params", [&](auto& v, auto n) { c.exponent = get_double(v, n); });
    }
    if (auto t = root["grid"]) {
      check_keys(t, "grid", {"M", "rmax", "rmax_factor"});
      opt(t, "M", "grid", [&](auto& v, auto n) { c.M = int(get_int(v, n)); });
      opt(t, "rmax", "grid", [&](auto& v, auto n) { c.rmax = get_double(v, n); });
      opt(t, "rmax_factor", "grid", [&](auto& v, auto n) { c.rmax_factor = get_double(v, n); });
    }
    if (auto t = root["solver"]) {
      check_keys(t, "solver",
                 {"pohozaev_tol", "kernel_tol", "eigen_tol", "coercivity_samples",
                  "coercivity_seed"});
      opt(t, "pohozaev_tol", "solver", [&](auto& v, auto n) { c.pohozaev_tol = get_double(v, n); });
      opt(t, "kernel_tol", "solver", [&](auto& v, auto n) { c.kernel_tol = get_double(v, n); });
      opt(t, "eigen_tol", "solver", [&](auto& v, auto n) { c.eigen_tol = get_double(v, n); });
      opt(t, "coercivity_samples", "solver",
          [&](auto& v, auto n) { c.coercivity_samples = int(get_int(v, n)); });
      opt(t, "coercivity_seed", "solver", [&](auto& v, auto n) {
        long long s = get_int(v, n);
        if (s < 0) throw ConfigError(n + " must be non-negative");
        c.coercivity_seed = std::uint64_t(s);
      });
    }
    if (auto t = root["profiles"]) {
      check_keys(t, "profiles", {"A", "order", "seed_tol", "trace_span", "trace_samples"});
      opt(t, "A", "profiles", [&](auto& v, auto n) { c.A = get_double(v, n); });
      opt(t, "order", "profiles", [&](auto& v, auto n) { c.order = int(get_int(v, n)); });
      opt(t, "seed_tol", "profiles", [&](auto& v, auto n) { c.seed_tol = get_double(v, n); });
      opt(t, "trace_span", "profiles", [&](auto& v, auto n) { c.trace_span = get_double(v, n); });
      opt(t, "trace_samples", "profiles",
          [&](auto& v, auto n) { c.trace_samples = int(get_int(v, n)); });
    }
    if (auto t = root["evolution"]) {
      check_keys(t, "evolution",
                 {"seed", "amplitude", "perturbation", "T", "dt0", "direction", "scheme",
                  "sponge_width", "sponge_strength", "grad_ceiling", "record_stride",
                  "dispersal_fraction", "dispersal_window", "mass_drift_limit",
                  "dump_snapshots"});
      auto& e = c.evolution;
      const std::string w = "evolution";
      opt(t, "seed", w, [&](auto& v, auto n) { c.seed = scalar(v, n); });
      opt(t, "amplitude", w, [&](auto& v, auto n) { c.amplitude = get_double(v, n); });
      opt(t, "perturbation", w, [&](auto& v, auto n) { c.perturbation = get_double(v, n); });
      opt(t, "T", w, [&](auto& v, auto n) { e.T = get_double(v, n); });
      opt(t, "dt0", w, [&](auto& v, auto n) { e.dt0 = get_double(v, n); });
      opt(t, "direction", w, [&](auto& v, auto n) {
        try {
          e.direction = direction_from_string(scalar(v, n));
        } catch (const Error& err) {
          throw ConfigError(n + ": " + err.what());
        }
      });
      opt(t, "scheme", w, [&](auto& v, auto n) {
        try {
          e.scheme = scheme_from_string(scalar(v, n));
        } catch (const Error& err) {
          throw ConfigError(n + ": " + err.what());
        }
      });
      opt(t, "sponge_width", w, [&](auto& v, auto n) { e.sponge_width = get_double(v, n); });
      opt(t, "sponge_strength", w, [&](auto& v, auto n) { e.sponge_strength = get_double(v, n); });
      opt(t, "grad_ceiling", w, [&](auto& v, auto n) { e.grad_ceiling = get_double(v, n); });
      opt(t, "record_stride", w, [&](auto& v, auto n) { e.record_stride = int(get_int(v, n)); });
      opt(t, "dispersal_fraction", w,
          [&](auto& v, auto n) { e.dispersal_fraction = get_double(v, n); });
      opt(t, "dispersal_window", w, [&](auto& v, auto n) { e.dispersal_window = get_double(v, n); });
      opt(t, "mass_drift_limit", w, [&](auto& v, auto n) { e.mass_drift_limit = get_double(v, n); });
      opt(t, "dump_snapshots", w, [&](auto& v, auto n) { c.dump_snapshots = get_bool(v, n); });
    }
    if (auto t = root["classifier"]) {
      check_keys(t, "classifier", {"rate_fraction", "delta0", "virial_radii"});
      opt(t, "rate_fraction", "classifier",
          [&](auto& v, auto n) { c.classifier.rate_fraction = get_double(v, n); });
      opt(t, "delta0", "classifier", [&](auto& v, auto n) { c.classifier.delta0 = get_double(v, n); });
      opt(t, "virial_radii", "classifier",
          [&](auto& v, auto n) { c.virial_radii = get_list<double>(v, n, get_double); });
    }
    if (auto t = root["output"]) {
      check_keys(t, "output", {"dir"});
      opt(t, "dir", "output", [&](auto& v, auto n) { c.out_dir = scalar(v, n); });
    }
    if (auto t = root["cache"]) {
      check_keys(t, "cache", {"dir", "enabled"});
      opt(t, "dir", "cache", [&](auto& v, auto n) { c.cache_dir = scalar(v, n); });
      opt(t, "enabled", "cache", [&](auto& v, auto n) { c.cache_enabled = get_bool(v, n); });
    }
    if (auto t = root["sweep"]) {
      check_keys(t, "sweep", {"dimension", "exponent", "A", "perturbation", "cells", "workers"});
      auto gi = [](const YAML::Node& v, const std::string& n) { return int(get_int(v, n)); };
      opt(t, "dimension", "sweep", [&](auto& v, auto n) { c.sweep_dimension = get_list<int>(v, n, gi); });
      opt(t, "exponent", "sweep",
          [&](auto& v, auto n) { c.sweep_exponent = get_list<double>(v, n, get_double); });
      opt(t, "A", "sweep", [&](auto& v, auto n) { c.sweep_A = get_list<double>(v, n, get_double); });
      opt(t, "perturbation", "sweep",
          [&](auto& v, auto n) { c.sweep_perturbation = get_list<double>(v, n, get_double); });
      opt(t, "workers", "sweep", [&](auto& v, auto n) { c.sweep_workers = int(get_int(v, n)); });
      if (auto cells = t["cells"]) {
        if (!cells.IsSequence()) throw ConfigError("sweep.cells must be a list of tables");
        for (std::size_t i = 0; i < cells.size(); ++i)
          c.sweep_cells.push_back(parse_cell(cells[i], "sweep.cells[" + std::to_string(i) + "]"));
      }
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.what());
  }
  return parse_config(text);
}

std::string to_yaml(const ExperimentConfig& c) {
  const auto& e = c.evolution;
  std::ostringstream o;
  o << "params:\n"
    << "  dimension: " << c.dimension << "\n"
    << "  exponent: " << f17(c.exponent) << "\n"
    << "grid:\n"
    << "  M: " << c.M << "\n"
    << "  rmax: " << f17(c.rmax) << "\n"
    << "  rmax_factor: " << f17(c.rmax_factor) << "\n"
    << "solver:\n"
    << "  pohozaev_tol: " << f17(c.pohozaev_tol) << "\n"
    << "  kernel_tol: " << f17(c.kernel_tol) << "\n"
    << "  eigen_tol: " << f17(c.eigen_tol) << "\n"
    << "  coercivity_samples: " << c.coercivity_samples << "\n"
    << "  coercivity_seed: " << c.coercivity_seed << "\n"
    << "profiles:\n"
    << "  A: " << f17(c.A) << "\n"
    << "  order: " << c.order << "\n"
    << "  seed_tol: " << f17(c.seed_tol) << "\n"
    << "  trace_span: " << f17(c.trace_span) << "\n"
    << "  trace_samples: " << c.trace_samples << "\n"
    << "evolution:\n"
    << "  seed: " << quoted(c.seed) << "\n"
    << "  amplitude: " << f17(c.amplitude) << "\n"
    << "  perturbation: " << f17(c.perturbation) << "\n"
    << "  T: " << f17(e.T) << "\n"
    << "  dt0: " << f17(e.dt0) << "\n"
    << "  direction: " << to_string(e.direction) << "\n"
    << "  scheme: " << to_string(e.scheme) << "\n"
    << "  sponge_width: " << f17(e.sponge_width) << "\n"
    << "  sponge_strength: " << f17(e.sponge_strength) << "\n"
    << "  grad_ceiling: " << f17(e.grad_ceiling) << "\n"
    << "  record_stride: " << e.record_stride << "\n"
    << "  dispersal_fraction: " << f17(e.dispersal_fraction) << "\n"
    << "  dispersal_window: " << f17(e.dispersal_window) << "\n"
    << "  mass_drift_limit: " << f17(e.mass_drift_limit) << "\n"
    << "  dump_snapshots: " << (c.dump_snapshots ? "true" : "false") << "\n"
    << "classifier:\n"
    << "  rate_fraction: " << f17(c.classifier.rate_fraction) << "\n"
    << "  delta0: " << f17(c.classifier.delta0) << "\n"
    << "  virial_radii: " << list(c.virial_radii, f17) << "\n"
    << "output:\n"
    << "  dir: " << quoted(c.out_dir) << "\n"
    << "cache:\n"
    << "  dir: " << quoted(c.cache_dir) << "\n"
    << "  enabled: " << (c.cache_enabled ? "true" : "false") << "\n"
    << "sweep:\n"
    << "  dimension: " << list(c.sweep_dimension, [](int d) { return std::to_string(d); }) << "\n"
    << "  exponent: " << list(c.sweep_exponent, f17) << "\n"
    << "  A: " << list(c.sweep_A, f17) << "\n"
    << "  perturbation: " << list(c.sweep_perturbation, f17) << "\n"
    << "  workers: " << c.sweep_workers << "\n";
  if (c.sweep_cells.empty()) {
    o << "  cells: []\n";
  } else {
    o << "  cells:\n";
    for (const auto& cell : c.sweep_cells) {
      o << "    - {dimension: " << cell.dimension << ", exponent: " << f17(cell.exponent)
        << ", A: " << f17(cell.A) << ", perturbation: " << f17(cell.perturbation);
      if (cell.M) o << ", M: " << *cell.M;
      if (cell.rmax) o << ", rmax: " << f17(*cell.rmax);
      o << "}\n";
    }
  }
  return o.str();
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_yaml(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

void validate(const ExperimentConfig& c) {
  auto prm = derive_params(c.dimension, c.exponent);
  if (!(c.rmax >= 0) || !std::isfinite(c.rmax)) throw GridError("rmax must be >= 0 (0: use rmax_factor)");
  if (c.rmax == 0 && !(c.rmax_factor > 0)) throw GridError("rmax_factor must be positive");
  double rmax = c.rmax > 0 ? c.rmax : c.rmax_factor / std::sqrt(prm.omega);
  auto g = make_grid(c.dimension, c.M, rmax);

  auto pos = [](double v, const char* n) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(n) + " must be positive");
  };
  pos(c.pohozaev_tol, "solver.pohozaev_tol");
  pos(c.kernel_tol, "solver.kernel_tol");
  pos(c.eigen_tol, "solver.eigen_tol");
  if (c.coercivity_samples < 1) throw ConfigError("solver.coercivity_samples must be >= 1");
  if (!std::isfinite(c.A) || c.A == 0) throw ConfigError("profiles.A must be finite and nonzero");
  if (c.order < 1 || c.order > 8) throw ConfigError("profiles.order must lie in 1..8");
  pos(c.seed_tol, "profiles.seed_tol");
  pos(c.trace_span, "profiles.trace_span");
  if (c.trace_samples < 3) throw ConfigError("profiles.trace_samples must be >= 3");
  static const std::set<std::string> seeds{"Q", "Qplus", "Qminus", "profile", "scaled"};
  if (!seeds.count(c.seed))
    throw ConfigError("evolution.seed must be one of Q, Qplus, Qminus, profile, scaled");
  if (!std::isfinite(c.amplitude) || !(c.amplitude > 0))
    throw ConfigError("evolution.amplitude must be positive");
  if (!std::isfinite(c.perturbation) || !(c.perturbation > -1))
    throw ConfigError("evolution.perturbation must exceed -1");
  c.evolution.validate(*g);
  if (!(c.classifier.rate_fraction > 0 && c.classifier.rate_fraction <= 1))
    throw ConfigError("classifier.rate_fraction must lie in (0, 1]");
  for (double r : c.virial_radii) pos(r, "classifier.virial_radii entries");
  if (c.out_dir.empty()) throw ConfigError("output.dir must not be empty");
  if (c.cache_enabled && c.cache_dir.empty()) throw ConfigError("cache.dir must not be empty");
  if (c.sweep_workers < 0) throw ConfigError("sweep.workers must be >= 0");
}

std::string resolve_cache_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("THRESHOLD_LAB_CACHE"); env && *env) return env;
  return c.cache_dir;
}

}  // namespace tl
