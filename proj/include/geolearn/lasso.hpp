#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geolearn/errors.hpp"
#include "geolearn/features.hpp"

namespace geolearn {

using SparseDesign = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using DenseDesign = Eigen::MatrixXd;

enum class LabelChannel { exact, shadow };

/// Design matrix plus labels. Column k of X is global feature column_ids[k]
/// (identity mapping when column_ids is empty), so sparse indicator designs
/// only keep the columns that some row activates.
template <class Design>
struct Dataset {
  Design X;
  Eigen::VectorXd y;
  std::vector<std::uint64_t> column_ids;
  std::uint64_t feature_dim = 0;
  std::string fingerprint;
  LabelChannel channel = LabelChannel::exact;
  double eps2 = 0.0;

  Eigen::Index rows() const { return X.rows(); }

  std::uint64_t global_column(Eigen::Index k) const {
    return column_ids.empty() ? static_cast<std::uint64_t>(k) : column_ids[k];
  }

  void validate() const {
    if (X.rows() != y.size()) throw ArgumentError("design rows and label count differ");
    if (!column_ids.empty() && static_cast<Eigen::Index>(column_ids.size()) != X.cols())
      throw ArgumentError("column id map does not match the design");
    if (column_ids.empty() && feature_dim != static_cast<std::uint64_t>(X.cols()))
      throw ArgumentError("design width does not match the feature dimension");
  }
};

/// Builds a compact sparse design from indicator feature rows.
inline Dataset<SparseDesign> make_indicator_dataset(const std::vector<SparseFeature>& rows,
                                                    const Eigen::VectorXd& y) {
  if (static_cast<Eigen::Index>(rows.size()) != y.size())
    throw ArgumentError("feature rows and labels differ in length");
  Dataset<SparseDesign> d;
  d.y = y;
  d.feature_dim = rows.empty() ? 0 : rows.front().dim;
  std::map<std::uint64_t, int> col;
  for (const auto& r : rows) {
    if (r.dim != d.feature_dim) throw ArgumentError("feature rows have different dimensions");
    for (auto k : r.ones) col.emplace(k, 0);
  }
  int next = 0;
  for (auto& [k, v] : col) {
    v = next++;
    d.column_ids.push_back(k);
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (auto k : rows[i].ones) trips.emplace_back(static_cast<int>(i), col[k], 1.0);
  d.X.resize(static_cast<Eigen::Index>(rows.size()), next);
  d.X.setFromTriplets(trips.begin(), trips.end());
  return d;
}

inline Dataset<DenseDesign> make_dense_dataset(DenseDesign X, Eigen::VectorXd y) {
  Dataset<DenseDesign> d;
  d.feature_dim = static_cast<std::uint64_t>(X.cols());
  d.X = std::move(X);
  d.y = std::move(y);
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

enum class RegressionMode { penalized, constrained };

struct SolverTrace {
  int iterations = 0;
  double objective = 0.0;
  /// KKT residual (penalized) or Frank-Wolfe duality gap (constrained).
  double optimality = 0.0;
  bool converged = false;
};

struct RegressionModel {
  RegressionMode mode = RegressionMode::penalized;
  double alpha = 0.0;
  double radius = 0.0;
  bool fit_intercept = false;
  double intercept = 0.0;
  std::uint64_t feature_dim = 0;
  /// Nonzero weights keyed by global feature index, sorted.
  std::vector<std::pair<std::uint64_t, double>> weights;
  std::string fingerprint;
  SolverTrace trace;
  bool warning = false;

  double l1_norm() const {
    double s = 0.0;
    for (const auto& [k, w] : weights) s += std::abs(w);
    return s;
  }

  double weight(std::uint64_t k) const {
    auto it = std::lower_bound(weights.begin(), weights.end(), k,
                               [](const auto& e, std::uint64_t key) { return e.first < key; });
    return (it != weights.end() && it->first == k) ? it->second : 0.0;
  }
};

struct LassoOptions {
  double tol = 1e-8;
  int max_iter = 100000;
  std::uint64_t seed = 0;
  /// Visit coordinates in a seeded random order each sweep.
  bool randomized = false;
  bool fit_intercept = false;
};

namespace detail {

template <class Design>
Eigen::VectorXd column_means(const Design& X) {
  Eigen::VectorXd mu(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) mu[j] = X.col(j).sum() / double(X.rows());
  return mu;
}

template <class Design>
double col_dot(const Design& X, Eigen::Index j, const Eigen::VectorXd& r) {
  if constexpr (std::is_base_of_v<Eigen::SparseMatrixBase<Design>, Design>) {
    double s = 0.0;
    for (typename Design::InnerIterator it(X, j); it; ++it) s += it.value() * r[it.row()];
    return s;
  } else {
    return X.col(j).dot(r);
  }
}

template <class Design>
void col_axpy(const Design& X, Eigen::Index j, double a, Eigen::VectorXd& r) {
  if constexpr (std::is_base_of_v<Eigen::SparseMatrixBase<Design>, Design>) {
    for (typename Design::InnerIterator it(X, j); it; ++it) r[it.row()] += a * it.value();
  } else {
    r.noalias() += a * X.col(j);
  }
}

inline double soft_threshold(double z, double t) {
  return z > t ? z - t : (z < -t ? z + t : 0.0);
}

template <class Design>
RegressionModel pack_model(const Dataset<Design>& d, const Eigen::VectorXd& w, double intercept) {
  RegressionModel m;
  m.feature_dim = d.feature_dim;
  m.fingerprint = d.fingerprint;
  m.intercept = intercept;
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (w[k] != 0.0) m.weights.emplace_back(d.global_column(k), w[k]);
  std::sort(m.weights.begin(), m.weights.end());
  return m;
}

}  // namespace detail

/// Objective (1/2N)||y - Xw - b||^2 + alpha ||w||_1 for the compact weights.
template <class Design>
double penalized_objective(const Dataset<Design>& d, const Eigen::VectorXd& w, double alpha,
                           double intercept = 0.0) {
  Eigen::VectorXd r = d.y - d.X * w;
  r.array() -= intercept;
  return r.squaredNorm() / (2.0 * double(d.rows())) + alpha * w.lpNorm<1>();
}

/// Objective (1/N)||Xw - y||^2.
template <class Design>
double constrained_objective(const Dataset<Design>& d, const Eigen::VectorXd& w) {
  return (d.X * w - d.y).squaredNorm() / double(d.rows());
}

/// Cyclic coordinate descent with exact soft-threshold updates on
/// (1/2N)||y - Xw||^2 + alpha ||w||_1. Stops when the largest coordinate
/// change in a sweep is <= tol and the KKT residual is <= tol.
template <class Design>
RegressionModel fit_penalized(const Dataset<Design>& d, double alpha, const LassoOptions& opt = {}) {
  d.validate();
  if (!(alpha > 0.0)) throw ArgumentError("alpha must be positive");
  if (d.rows() == 0) throw ArgumentError("empty dataset");
  const Eigen::Index n = d.rows(), p = d.X.cols();
  const double N = double(n);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  double ybar = 0.0;
  if (opt.fit_intercept) {
    mu = detail::column_means(d.X);
    ybar = d.y.mean();
  }
  // Residual of the (implicitly) centred problem: r = (y - ybar) - (X - 1 mu^T) w.
  Eigen::VectorXd r = d.y.array() - ybar;
  Eigen::VectorXd curv(p);
  for (Eigen::Index j = 0; j < p; ++j) curv[j] = (d.X.col(j).squaredNorm() - N * mu[j] * mu[j]) / N;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);

  auto grad = [&](Eigen::Index j) {
    // centred column . r / N; r sums to zero when centring, so the mean term drops.
    return detail::col_dot(d.X, j, r) / N - (opt.fit_intercept ? mu[j] * r.sum() / N : 0.0);
  };
  auto objective = [&]() { return r.squaredNorm() / (2.0 * N) + alpha * w.lpNorm<1>(); };
  auto kkt = [&]() {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double g = grad(j);
      const double v = w[j] == 0.0 ? std::max(0.0, std::abs(g) - alpha)
                                   : std::abs(g - alpha * (w[j] > 0 ? 1.0 : -1.0));
      worst = std::max(worst, v);
    }
    return worst;
  };

  std::vector<Eigen::Index> order(p);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(opt.seed);

  RegressionModel model;
  double prev = objective();
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    if (opt.randomized) std::shuffle(order.begin(), order.end(), rng);
    double max_change = 0.0;
    for (Eigen::Index j : order) {
      if (curv[j] <= 1e-15) continue;
      const double old = w[j];
      const double z = curv[j] * old + grad(j);
      const double nw = detail::soft_threshold(z, alpha) / curv[j];
      const double delta = nw - old;
      if (delta != 0.0) {
        w[j] = nw;
        detail::col_axpy(d.X, j, -delta, r);
        if (opt.fit_intercept) r.array() += delta * mu[j];
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    const double obj = objective();
    if (obj > prev + 1e-12 * std::max(1.0, std::abs(prev)))
      throw NumericError(fmt::format("coordinate descent objective increased: {} -> {}", prev, obj));
    prev = obj;
    if (!std::isfinite(obj)) throw NumericError("non-finite objective in coordinate descent");
    if (max_change <= opt.tol && kkt() <= opt.tol) {
      converged = true;
      ++it;
      break;
    }
  }
  const double intercept = opt.fit_intercept ? ybar - mu.dot(w) : 0.0;
  model = detail::pack_model(d, w, intercept);
  model.mode = RegressionMode::penalized;
  model.alpha = alpha;
  model.fit_intercept = opt.fit_intercept;
  model.trace = {it, penalized_objective(d, w, alpha, intercept), kkt(), converged};
  model.warning = !converged;
  return model;
}

struct FrankWolfeOptions {
  int max_iter = 1000000;
  std::uint64_t seed = 0;
};

/// Away-step Frank-Wolfe on min_{||w||_1 <= B} (1/N)||Xw - y||^2. Iterates are
/// convex combinations of the vertices +-B e_j; the loop stops once the
/// Frank-Wolfe duality gap (a certificate on f(w) - f*) is <= eps3 / 2.
template <class Design>
RegressionModel fit_constrained(const Dataset<Design>& d, double radius, double eps3,
                                const FrankWolfeOptions& opt = {}) {
  d.validate();
  if (!(radius >= 0.0)) throw ArgumentError("radius B must be non-negative");
  if (!(eps3 > 0.0)) throw ArgumentError("eps3 must be positive");
  if (d.rows() == 0) throw ArgumentError("empty dataset");
  const Eigen::Index p = d.X.cols();
  const double N = double(d.rows());

  RegressionModel model;
  model.mode = RegressionMode::constrained;
  model.radius = radius;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  if (radius == 0.0 || p == 0) {
    model = detail::pack_model(d, w, 0.0);
    model.mode = RegressionMode::constrained;
    model.radius = radius;
    model.trace = {0, constrained_objective(d, w), 0.0, true};
    return model;
  }

  // Active-set weights: lambda[2j] for +B e_j, lambda[2j+1] for -B e_j.
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(2 * p);
  Eigen::VectorXd Xw = Eigen::VectorXd::Zero(d.rows());
  Eigen::VectorXd g(p);
  auto gradient = [&]() {
    Eigen::VectorXd res = Xw - d.y;
    for (Eigen::Index j = 0; j < p; ++j) g[j] = 2.0 * detail::col_dot(d.X, j, res) / N;
    if (!g.allFinite()) throw NumericError("non-finite gradient in Frank-Wolfe");
  };
  auto vertex_value = [&](Eigen::Index v) { return (v % 2 == 0 ? radius : -radius) * g[v / 2]; };
  auto vertex_column = [&](Eigen::Index v, Eigen::VectorXd& out) {
    out.setZero();
    detail::col_axpy(d.X, v / 2, v % 2 == 0 ? radius : -radius, out);
  };

  // Start from w = 0 written as the midpoint of +-B e_j*.
  gradient();
  Eigen::Index jstart = 0;
  g.cwiseAbs().maxCoeff(&jstart);
  lambda[2 * jstart] = 0.5;
  lambda[2 * jstart + 1] = 0.5;

  Eigen::VectorXd vcol(d.rows()), dir(d.rows());
  double gap = INFINITY;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    gradient();
    Eigen::Index jfw = 0;
    const double gmax = g.cwiseAbs().maxCoeff(&jfw);
    const Eigen::Index vfw = 2 * jfw + (g[jfw] > 0 ? 1 : 0);
    const double gw = g.dot(w);
    gap = gw + radius * gmax;
    if (gap <= eps3 / 2) {
      converged = true;
      break;
    }
    // Away vertex: active vertex with the largest g . v.
    Eigen::Index va = -1;
    double best = -INFINITY;
    for (Eigen::Index v = 0; v < 2 * p; ++v)
      if (lambda[v] > 0.0 && vertex_value(v) > best) {
        best = vertex_value(v);
        va = v;
      }
    const double away_gap = best - gw;
    bool fw_step = gap >= away_gap;
    double step_max = 1.0;
    if (fw_step) {
      vertex_column(vfw, vcol);
      dir = vcol - Xw;
    } else {
      const double la = lambda[va];
      step_max = la / (1.0 - la);
      vertex_column(va, vcol);
      dir = Xw - vcol;
    }
    const double slope = fw_step ? -gap : -away_gap;  // g . direction
    const double curv = 2.0 * dir.squaredNorm() / N;
    double step = curv > 0.0 ? std::min(step_max, -slope / curv) : step_max;
    step = std::max(step, 0.0);
    if (step == 0.0) break;

    if (fw_step) {
      lambda *= (1.0 - step);
      lambda[vfw] += step;
    } else {
      lambda *= (1.0 + step);
      lambda[va] -= step;
      if (step >= step_max || lambda[va] < 1e-15) lambda[va] = 0.0;
    }
    for (Eigen::Index j = 0; j < p; ++j) w[j] = radius * (lambda[2 * j] - lambda[2 * j + 1]);
    Xw.noalias() += step * dir;
  }
  // Renormalise the convex weights and rebuild Xw from scratch.
  lambda /= lambda.sum();
  for (Eigen::Index j = 0; j < p; ++j) w[j] = radius * (lambda[2 * j] - lambda[2 * j + 1]);
  const double l1 = w.lpNorm<1>();
  if (l1 > radius) w *= radius / l1;
  Xw = d.X * w;
  gradient();
  {
    Eigen::Index j;
    gap = g.dot(w) + radius * g.cwiseAbs().maxCoeff(&j);
  }

  model = detail::pack_model(d, w, 0.0);
  model.mode = RegressionMode::constrained;
  model.radius = radius;
  model.trace = {it, constrained_objective(d, w), gap, converged || gap <= eps3 / 2};
  model.warning = !model.trace.converged;
  return model;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

inline double predict(const RegressionModel& m, const SparseFeature& f) {
  if (f.dim != m.feature_dim) throw ArgumentError("feature dimension does not match the model");
  double acc = m.intercept;
  std::size_t a = 0, b = 0;
  while (a < m.weights.size() && b < f.ones.size()) {
    if (m.weights[a].first < f.ones[b]) ++a;
    else if (m.weights[a].first > f.ones[b]) ++b;
    else {
      acc += m.weights[a].second;
      ++a;
      ++b;
    }
  }
  return acc;
}

inline double predict(const RegressionModel& m, const Eigen::VectorXd& f) {
  if (static_cast<std::uint64_t>(f.size()) != m.feature_dim)
    throw ArgumentError("feature dimension does not match the model");
  double acc = m.intercept;
  for (const auto& [k, w] : m.weights) acc += w * f[static_cast<Eigen::Index>(k)];
  return acc;
}

/// Predictions for every row of a dataset.
template <class Design>
Eigen::VectorXd predict_rows(const RegressionModel& m, const Dataset<Design>& d) {
  if (m.feature_dim != d.feature_dim) throw ArgumentError("dataset and model dimensions differ");
  std::unordered_map<std::uint64_t, double> lookup(m.weights.begin(), m.weights.end());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d.X.cols());
  for (Eigen::Index k = 0; k < d.X.cols(); ++k) {
    auto it = lookup.find(d.global_column(k));
    if (it != lookup.end()) w[k] = it->second;
  }
  Eigen::VectorXd out = d.X * w;
  out.array() += m.intercept;
  return out;
}

/// (1/N) sum (h(x_l) - y_l)^2.
template <class Design>
double training_error(const RegressionModel& m, const Dataset<Design>& d) {
  if (d.rows() == 0) throw ArgumentError("training error of an empty dataset");
  return (predict_rows(m, d) - d.y).squaredNorm() / double(d.rows());
}

}  // namespace geolearn
