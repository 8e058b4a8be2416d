#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolearn/features.hpp"
#include "geolearn/harness/config.hpp"
#include "geolearn/harness/io.hpp"
#include "geolearn/lasso.hpp"

namespace geolearn::harness {

/// One point of the feature-map grid.
struct FeaturePoint {
  std::string kind;
  double delta1 = 0.0;
  int num_frequencies = 0;
  double gamma = 0.0;
  double delta2 = 0.0;
  int max_weight = 0;
};

inline std::vector<FeaturePoint> feature_grid(const FeatureSpec& f) {
  std::vector<FeaturePoint> out;
  if (f.kind == "rff") {
    for (int r : f.num_frequencies)
      for (double g : f.gamma) out.push_back({"rff", f.delta1, r, g, 0.0, 0});
  } else {
    for (double d2 : f.delta2) out.push_back({"indicator", f.delta1, 0, 0.0, d2, f.max_weight});
  }
  return out;
}

/// Feature vectors of every instance for one feature point. RFF tables are
/// dense, indicator tables keep one sparse row per instance.
struct FeatureTable {
  FeaturePoint point;
  Json spec;
  std::string fingerprint;
  std::uint64_t dim = 0;
  Eigen::MatrixXd dense;
  std::vector<SparseFeature> sparse;
  std::shared_ptr<const RffMap> rff;
  std::shared_ptr<const IndicatorFeatureMap> indicator;

  bool is_sparse() const { return static_cast<bool>(indicator); }

  /// Parameter coordinates that feature k depends on.
  const std::vector<int>& coords_of(std::uint64_t k) const {
    if (rff) return rff->regions().at(rff->region_of(k));
    return indicator->entry_of(k).ip.coords;
  }
};

inline Json feature_spec_json(const ParamHamiltonian& h, const FeaturePoint& p, std::uint64_t rff_seed) {
  Json j;
  j["family"] = h.family;
  j["lattice"] = h.lattice.sides();
  j["kind"] = p.kind;
  j["delta1"] = p.delta1;
  if (p.kind == "rff") {
    j["R"] = p.num_frequencies;
    j["gamma"] = p.gamma;
    j["seed"] = rff_seed;
    j["input"] = "J-1";
  } else {
    j["delta2"] = p.delta2;
    j["max_weight"] = p.max_weight;
  }
  return j;
}

/// xs are unit-cube coordinates x = J - 1.
inline FeatureTable build_features(const ParamHamiltonian& h, const FeaturePoint& p, std::uint64_t rff_seed,
                                   const std::vector<std::vector<double>>& xs) {
  FeatureTable t;
  t.point = p;
  t.spec = feature_spec_json(h, p, rff_seed);
  t.fingerprint = fingerprint_of(t.spec);
  if (p.kind == "rff") {
    RffOptions o;
    o.delta1 = p.delta1;
    o.num_frequencies = p.num_frequencies;
    o.gamma = p.gamma;
    o.seed = rff_seed;
    auto map = std::make_shared<const RffMap>(h, o);
    t.dim = map->dim();
    t.dense.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(t.dim));
    for (std::size_t l = 0; l < xs.size(); ++l) t.dense.row(l) = (*map)(xs[l]).transpose();
    t.rff = std::move(map);
  } else if (p.kind == "indicator") {
    IndicatorOptions o;
    o.delta1 = p.delta1;
    o.delta2 = p.delta2;
    o.max_weight = p.max_weight;
    auto map = std::make_shared<const IndicatorFeatureMap>(h, o);
    t.dim = map->m_phi();
    for (const auto& x : xs) t.sparse.push_back((*map)(x));
    t.indicator = std::move(map);
  } else {
    throw ConfigError("unknown feature map kind '" + p.kind + "'");
  }
  return t;
}

inline double solver_value(const SolverSpec& s, std::size_t k) {
  return s.kind == "penalized" ? s.alpha.at(k) : s.radius.at(k);
}

/// Fits one model on the given rows of a feature table.
inline RegressionModel fit_rows(const FeatureTable& t, const std::vector<int>& rows, const Eigen::VectorXd& y,
                                const SolverSpec& s, double hyper, std::uint64_t solver_seed) {
  if (static_cast<Eigen::Index>(rows.size()) != y.size()) throw ArgumentError("rows and labels differ in length");
  auto run = [&](const auto& data) {
    if (s.kind == "penalized") {
      LassoOptions o;
      o.tol = s.tol;
      o.max_iter = s.max_iter;
      o.fit_intercept = s.intercept;
      o.randomized = s.randomized;
      o.seed = solver_seed;
      return fit_penalized(data, hyper, o);
    }
    FrankWolfeOptions o;
    o.max_iter = s.max_iter;
    o.seed = solver_seed;
    return fit_constrained(data, hyper, s.eps3, o);
  };
  RegressionModel m;
  if (t.is_sparse()) {
    std::vector<SparseFeature> sub;
    for (int r : rows) sub.push_back(t.sparse.at(r));
    auto d = make_indicator_dataset(sub, y);
    d.feature_dim = t.dim;
    d.fingerprint = t.fingerprint;
    m = run(d);
  } else {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), t.dense.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) X.row(i) = t.dense.row(rows[i]);
    auto d = make_dense_dataset(std::move(X), y);
    d.fingerprint = t.fingerprint;
    m = run(d);
  }
  m.feature_dim = t.dim;
  m.fingerprint = t.fingerprint;
  return m;
}

inline double predict_row(const RegressionModel& m, const FeatureTable& t, int row) {
  if (m.fingerprint != t.fingerprint) throw ArgumentError("model was trained on a different feature map");
  if (t.is_sparse()) return predict(m, t.sparse.at(row));
  return predict(m, Eigen::VectorXd(t.dense.row(row).transpose()));
}

// ---------------------------------------------------------------------------
// RMSE
// ---------------------------------------------------------------------------

inline double rmse_batch(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() == 0) throw ArgumentError("RMSE needs equal, non-empty vectors");
  return std::sqrt((pred - truth).squaredNorm() / double(pred.size()));
}

class RmseAccumulator {
 public:
  void add(double pred, double truth) {
    const double d = pred - truth;
    sum_ += d * d;
    ++count_;
  }
  std::size_t count() const { return count_; }
  double value() const {
    if (count_ == 0) throw ArgumentError("RMSE of no predictions");
    return std::sqrt(sum_ / double(count_));
  }

 private:
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Contiguous blocks of a seeded shuffle of 0..n-1.
inline std::vector<std::vector<int>> make_folds(int n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least two folds");
  if (n < folds) throw ConfigError(fmt::format("{} training instances cannot fill {} folds", n, folds));
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> out(folds);
  for (int f = 0; f < folds; ++f) {
    const int lo = f * n / folds, hi = (f + 1) * n / folds;
    out[f].assign(perm.begin() + lo, perm.begin() + hi);
    if (out[f].empty()) throw ConfigError("empty cross-validation fold");
  }
  return out;
}

struct CvCell {
  std::size_t feature_point = 0;
  std::size_t solver_point = 0;
  std::vector<double> fold_rmse;
  double mean = 0.0;
};

struct CvResult {
  std::vector<CvCell> cells;
  std::size_t best = 0;

  const CvCell& best_cell() const { return cells.at(best); }
};

/// Grid search over feature points (outer) x solver points (inner). The
/// score is the mean of per-fold RMSE; ties keep the earlier grid point.
/// `train_rows` index the tables; y is aligned with train_rows.
inline CvResult cross_validate(const std::vector<FeatureTable>& tables, const SolverSpec& solver,
                               const std::vector<int>& train_rows, const Eigen::VectorXd& y, int folds,
                               std::uint64_t fold_seed, std::uint64_t solver_seed) {
  if (tables.empty() || solver.grid_size() == 0) throw ConfigError("empty hyperparameter grid");
  const auto fold_sets = make_folds(static_cast<int>(train_rows.size()), folds, fold_seed);
  CvResult res;
  for (std::size_t fp = 0; fp < tables.size(); ++fp)
    for (std::size_t sp = 0; sp < solver.grid_size(); ++sp) {
      CvCell cell{fp, sp, {}, 0.0};
      for (int f = 0; f < folds; ++f) {
        std::vector<char> held(train_rows.size(), 0);
        for (int k : fold_sets[f]) held[k] = 1;
        std::vector<int> fit_rows_idx;
        std::vector<double> fit_y;
        for (std::size_t k = 0; k < train_rows.size(); ++k)
          if (!held[k]) {
            fit_rows_idx.push_back(train_rows[k]);
            fit_y.push_back(y[k]);
          }
        const auto m = fit_rows(tables[fp], fit_rows_idx, Eigen::Map<Eigen::VectorXd>(fit_y.data(), fit_y.size()),
                                solver, solver_value(solver, sp), solver_seed);
        RmseAccumulator acc;
        for (int k : fold_sets[f]) acc.add(predict_row(m, tables[fp], train_rows[k]), y[k]);
        cell.fold_rmse.push_back(acc.value());
      }
      for (double r : cell.fold_rmse) cell.mean += r;
      cell.mean /= double(folds);
      res.cells.push_back(std::move(cell));
    }
  for (std::size_t c = 1; c < res.cells.size(); ++c)
    if (res.cells[c].mean < res.cells[res.best].mean) res.best = c;
  return res;
}

}  // namespace geolearn::harness
