#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"
#include "geolearn/hamiltonian.hpp"

namespace geolearn::harness {

using Json = nlohmann::json;

enum class LabelMode { exact, shadow };
enum class SweepKind { none, T, p, n };

struct FeatureSpec {
  std::string kind = "rff";  ///< "rff" or "indicator"
  double delta1 = 1.0;
  // rff
  std::vector<int> num_frequencies{5, 10, 20, 40};
  std::vector<double> gamma{0.4, 0.5, 0.6, 0.65, 0.7, 0.75};
  std::optional<std::uint64_t> rff_seed;
  // indicator
  std::vector<double> delta2{0.5};
  int max_weight = 2;

  /// Number of feature-map grid points.
  std::size_t grid_size() const {
    return kind == "rff" ? num_frequencies.size() * gamma.size() : delta2.size();
  }
};

struct SolverSpec {
  std::string kind = "penalized";  ///< "penalized" or "constrained"
  std::vector<double> alpha{1.0 / 256, 1.0 / 128, 1.0 / 64, 1.0 / 32};
  std::vector<double> radius{1.0, 10.0};
  double eps3 = 1e-3;
  double tol = 1e-6;
  int max_iter = 20000;
  bool intercept = false;
  bool randomized = false;

  std::size_t grid_size() const { return kind == "penalized" ? alpha.size() : radius.size(); }
};

struct SweepSpec {
  SweepKind kind = SweepKind::none;
  std::vector<double> values;
  std::vector<std::vector<int>> lattices;

  std::size_t points() const {
    switch (kind) {
      case SweepKind::none: return 1;
      case SweepKind::n: return lattices.size();
      default: return values.size();
    }
  }
};

struct ExperimentConfig {
  std::vector<int> lattice{2, 3};
  std::string model = "heisenberg";
  bool normalized = false;
  int M = 60;
  std::optional<int> N;
  std::optional<double> train_fraction;
  int T = 500;
  LabelMode label_mode = LabelMode::shadow;
  FeatureSpec features;
  SolverSpec solver;
  int cv_folds = 4;
  std::uint64_t seed = 0;
  SweepSpec sweep;
  int workers = 1;
  bool normalize_std = false;

  /// Training-set size for a given fraction p (N = round(p M)).
  int train_size_for(double p) const { return static_cast<int>(std::lround(p * M)); }

  int train_size() const {
    if (N) return *N;
    if (train_fraction) return train_size_for(*train_fraction);
    return M / 2;
  }

  /// Largest shadow size any sweep point needs.
  int max_shadow_size() const {
    int t = T;
    if (sweep.kind == SweepKind::T)
      for (double v : sweep.values) t = std::max(t, static_cast<int>(v));
    return t;
  }

  void validate() const;
};

inline const char* to_string(LabelMode m) { return m == LabelMode::exact ? "exact" : "shadow"; }

inline const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::none: return "none";
    case SweepKind::T: return "T";
    case SweepKind::p: return "p";
    case SweepKind::n: return "n";
  }
  return "none";
}

namespace detail {

inline void check_keys(const Json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(fmt::format("unknown key '{}' in {}", k, where));
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

inline void check_lattice(const std::vector<int>& sides, const std::string& where) {
  if (sides.empty() || sides.size() > 2) throw ConfigError(where + " must have 1 or 2 sides");
  for (int s : sides)
    if (s < 1) throw ConfigError(where + " sides must be positive");
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  detail::check_lattice(lattice, "lattice");
  if (model != "heisenberg") throw ConfigError("unknown model family '" + model + "'");
  if (M < 2) throw ConfigError("M must be at least 2");
  if (N && train_fraction) throw ConfigError("give either N or train_fraction, not both");
  if (train_fraction && !(*train_fraction > 0.0 && *train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  auto check_n = [&](int n) {
    if (n > M) throw ConfigError(fmt::format("training size {} exceeds M = {}", n, M));
    if (n < cv_folds) throw ConfigError(fmt::format("training size {} is below the fold count", n));
    if (n >= M) throw ConfigError("no instances left for the test split");
  };
  if (sweep.kind == SweepKind::p) {
    if (N || train_fraction) throw ConfigError("a p sweep sets N itself; drop N/train_fraction");
    for (double p : sweep.values) {
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("sweep fractions must lie in (0, 1)");
      check_n(train_size_for(p));
    }
  } else {
    check_n(train_size());
  }
  if (label_mode == LabelMode::shadow && T < 1) throw ConfigError("T must be positive");
  if (sweep.kind == SweepKind::T)
    for (double t : sweep.values)
      if (!(t >= 1.0) || t != std::floor(t)) throw ConfigError("sweep T values must be positive integers");
  if (sweep.kind != SweepKind::none && sweep.points() == 0) throw ConfigError("sweep grid is empty");
  if (sweep.kind == SweepKind::n)
    for (const auto& l : sweep.lattices) detail::check_lattice(l, "sweep lattice");

  const auto& f = features;
  if (f.kind != "rff" && f.kind != "indicator") throw ConfigError("feature_map.kind must be rff or indicator");
  if (f.delta1 < 0.0) throw ConfigError("delta1 must be non-negative");
  if (f.kind == "rff") {
    if (f.num_frequencies.empty() || f.gamma.empty()) throw ConfigError("RFF grids must be non-empty");
    for (int r : f.num_frequencies)
      if (r < 1) throw ConfigError("RFF frequency counts must be positive");
    for (double g : f.gamma)
      if (!(g > 0.0)) throw ConfigError("RFF gamma values must be positive");
  } else {
    if (f.delta2.empty()) throw ConfigError("delta2 grid must be non-empty");
    for (double d : f.delta2) {
      if (!(d > 0.0 && d <= 1.0)) throw ConfigError("delta2 must lie in (0, 1]");
      const double inv = 1.0 / d;
      if (std::abs(inv - std::round(inv)) > 1e-9 * inv) throw ConfigError("1/delta2 must be an integer");
    }
    if (f.max_weight < 1) throw ConfigError("max_weight must be positive");
  }
  const auto& s = solver;
  if (s.kind == "penalized") {
    if (s.alpha.empty()) throw ConfigError("alpha grid must be non-empty");
    for (double a : s.alpha)
      if (!(a > 0.0)) throw ConfigError("alpha values must be positive");
  } else if (s.kind == "constrained") {
    if (s.radius.empty()) throw ConfigError("B grid must be non-empty");
    for (double b : s.radius)
      if (!(b >= 0.0)) throw ConfigError("B values must be non-negative");
    if (!(s.eps3 > 0.0)) throw ConfigError("eps3 must be positive");
  } else {
    throw ConfigError("solver.kind must be penalized or constrained");
  }
  if (!(s.tol > 0.0) || s.max_iter < 1) throw ConfigError("solver tol/max_iter must be positive");
}

inline ExperimentConfig parse_config(const Json& j) {
  using detail::read;
  detail::check_keys(j, "config",
                     {"format", "version", "lattice", "model", "normalized", "M", "N", "train_fraction", "T",
                      "label_mode", "feature_map", "solver", "cv_folds", "seed", "sweep", "workers",
                      "normalize_std"});
  if (j.contains("version") && j.at("version") != 1) throw ConfigError("unsupported config version");
  ExperimentConfig c;
  read(j, "lattice", c.lattice);
  read(j, "model", c.model);
  read(j, "normalized", c.normalized);
  read(j, "M", c.M);
  if (j.contains("N")) {
    int n = 0;
    read(j, "N", n);
    c.N = n;
  }
  if (j.contains("train_fraction")) {
    double p = 0;
    read(j, "train_fraction", p);
    c.train_fraction = p;
  }
  read(j, "T", c.T);
  if (j.contains("label_mode")) {
    std::string m;
    read(j, "label_mode", m);
    if (m == "exact") c.label_mode = LabelMode::exact;
    else if (m == "shadow") c.label_mode = LabelMode::shadow;
    else throw ConfigError("label_mode must be exact or shadow");
  }
  if (j.contains("feature_map")) {
    const Json& f = j.at("feature_map");
    detail::check_keys(f, "feature_map",
                       {"kind", "delta1", "R", "gamma", "seed", "delta2", "max_weight"});
    read(f, "kind", c.features.kind);
    read(f, "delta1", c.features.delta1);
    read(f, "R", c.features.num_frequencies);
    read(f, "gamma", c.features.gamma);
    if (f.contains("seed")) {
      std::uint64_t s = 0;
      read(f, "seed", s);
      c.features.rff_seed = s;
    }
    read(f, "delta2", c.features.delta2);
    read(f, "max_weight", c.features.max_weight);
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    detail::check_keys(s, "solver",
                       {"kind", "alpha", "B", "eps3", "tol", "max_iter", "intercept", "randomized"});
    read(s, "kind", c.solver.kind);
    read(s, "alpha", c.solver.alpha);
    read(s, "B", c.solver.radius);
    read(s, "eps3", c.solver.eps3);
    read(s, "tol", c.solver.tol);
    read(s, "max_iter", c.solver.max_iter);
    read(s, "intercept", c.solver.intercept);
    read(s, "randomized", c.solver.randomized);
  }
  read(j, "cv_folds", c.cv_folds);
  read(j, "seed", c.seed);
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    detail::check_keys(s, "sweep", {"kind", "values", "lattices"});
    std::string k = "none";
    read(s, "kind", k);
    if (k == "none") c.sweep.kind = SweepKind::none;
    else if (k == "T") c.sweep.kind = SweepKind::T;
    else if (k == "p") c.sweep.kind = SweepKind::p;
    else if (k == "n") c.sweep.kind = SweepKind::n;
    else throw ConfigError("sweep.kind must be none, T, p or n");
    read(s, "values", c.sweep.values);
    read(s, "lattices", c.sweep.lattices);
  }
  read(j, "workers", c.workers);
  read(j, "normalize_std", c.normalize_std);
  c.validate();
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["format"] = "geolearn-config";
  j["version"] = 1;
  j["lattice"] = c.lattice;
  j["model"] = c.model;
  j["normalized"] = c.normalized;
  j["M"] = c.M;
  if (c.N) j["N"] = *c.N;
  if (c.train_fraction) j["train_fraction"] = *c.train_fraction;
  j["T"] = c.T;
  j["label_mode"] = to_string(c.label_mode);
  Json f;
  f["kind"] = c.features.kind;
  f["delta1"] = c.features.delta1;
  if (c.features.kind == "rff") {
    f["R"] = c.features.num_frequencies;
    f["gamma"] = c.features.gamma;
    if (c.features.rff_seed) f["seed"] = *c.features.rff_seed;
  } else {
    f["delta2"] = c.features.delta2;
    f["max_weight"] = c.features.max_weight;
  }
  j["feature_map"] = f;
  Json s;
  s["kind"] = c.solver.kind;
  if (c.solver.kind == "penalized") {
    s["alpha"] = c.solver.alpha;
    s["tol"] = c.solver.tol;
    s["max_iter"] = c.solver.max_iter;
    s["intercept"] = c.solver.intercept;
    s["randomized"] = c.solver.randomized;
  } else {
    s["B"] = c.solver.radius;
    s["eps3"] = c.solver.eps3;
    s["max_iter"] = c.solver.max_iter;
  }
  j["solver"] = s;
  j["cv_folds"] = c.cv_folds;
  j["seed"] = c.seed;
  Json w;
  w["kind"] = to_string(c.sweep.kind);
  if (c.sweep.kind == SweepKind::n) w["lattices"] = c.sweep.lattices;
  else if (c.sweep.kind != SweepKind::none) w["values"] = c.sweep.values;
  j["sweep"] = w;
  j["workers"] = c.workers;
  j["normalize_std"] = c.normalize_std;
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config {} is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_config(j);
}

/// Model family for one lattice.
inline ParamHamiltonian build_family(const ExperimentConfig& c, const std::vector<int>& sides) {
  if (c.model == "heisenberg") return build_heisenberg(Lattice(sides), c.normalized);
  throw ConfigError("unknown model family '" + c.model + "'");
}

}  // namespace geolearn::harness
