#include <gtest/gtest.h>

#include <random>
#include <set>

#include "geolearn/lasso.hpp"
#include "oracles.hpp"

using namespace geolearn;

namespace {

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

/// Random regression problem: Gaussian or 0/1 design, planted sparse weights, noise.
Problem random_problem(std::mt19937_64& rng, int max_n = 30, int max_p = 12) {
  std::uniform_int_distribution<int> nd(3, max_n), pd(1, max_p), kind(0, 1);
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.3);
  const int n = nd(rng), p = pd(rng);
  Problem pr{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  const bool binary = kind(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) pr.X(i, j) = binary ? double(coin(rng)) : g(rng);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < p; ++j)
    if (coin(rng)) w[j] = 2.0 * g(rng);
  pr.y = pr.X * w;
  for (int i = 0; i < n; ++i) pr.y[i] += 0.1 * g(rng);
  return pr;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

}  // namespace

TEST(Dataset, ValidationAndCompaction) {
  std::vector<SparseFeature> rows{{10, {1, 4}}, {10, {4, 7}}};
  Eigen::VectorXd y(2);
  y << 1, 2;
  auto d = make_indicator_dataset(rows, y);
  EXPECT_EQ(d.feature_dim, 10u);
  EXPECT_EQ(d.column_ids, (std::vector<std::uint64_t>{1, 4, 7}));
  EXPECT_EQ(d.X.cols(), 3);
  EXPECT_EQ(d.X.coeff(1, 1), 1.0);
  EXPECT_NO_THROW(d.validate());
  EXPECT_THROW(make_indicator_dataset(rows, Eigen::VectorXd(3)), ArgumentError);
  std::vector<SparseFeature> mixed{{10, {1}}, {11, {2}}};
  EXPECT_THROW(make_indicator_dataset(mixed, y), ArgumentError);
  EXPECT_THROW(make_dense_dataset(Eigen::MatrixXd(3, 2), Eigen::VectorXd(2)), ArgumentError);
}

TEST(Penalized, SoftThresholdClosedForm) {
  Eigen::MatrixXd X(2, 1);
  X << 1, 1;
  Eigen::VectorXd y(2);
  y << 1, 1;
  const auto m = fit_penalized(make_dense_dataset(X, y), 0.5);
  ASSERT_EQ(m.weights.size(), 1u);
  EXPECT_NEAR(m.weights[0].second, 0.5, 1e-8);
  EXPECT_TRUE(m.trace.converged);
  EXPECT_FALSE(m.warning);
  // Objective scan around the optimum.
  const auto d = make_dense_dataset(X, y);
  for (double w = 0.0; w <= 1.0; w += 0.01) {
    Eigen::VectorXd v(1);
    v << w;
    EXPECT_GE(penalized_objective(d, v, 0.5) + 1e-12, m.trace.objective);
  }
}

TEST(Penalized, LargeAlphaKillsEverything) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto pr = random_problem(rng);
    const double amax = (pr.X.transpose() * pr.y).cwiseAbs().maxCoeff() / pr.X.rows();
    const auto m = fit_penalized(make_dense_dataset(pr.X, pr.y), amax * 1.0001 + 1e-12);
    EXPECT_TRUE(m.weights.empty());
  }
}

TEST(Penalized, LeastSquaresLimit) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    const int p = 2 + t % 8;
    Eigen::MatrixXd X(p, p);
    for (auto& v : X.reshaped()) v = g(rng);
    X += 5.0 * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd y(p);
    for (auto& v : y) v = g(rng);
    const Eigen::VectorXd ls = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    LassoOptions o;
    o.tol = 1e-13;
    o.max_iter = 1000000;
    const auto m = fit_penalized(make_dense_dataset(X, y), 1e-12, o);
    EXPECT_LE((oracle::dense_weights(m, p) - ls).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Penalized, MatchesReferenceAndKkt) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    auto pr = random_problem(rng);
    const double alpha = log_uniform(rng, 1e-3, 1.0);
    LassoOptions o;
    o.randomized = t % 2;
    o.seed = t;
    const auto d = make_dense_dataset(pr.X, pr.y);
    const auto m = fit_penalized(d, alpha, o);
    ASSERT_TRUE(m.trace.converged);
    const auto w = oracle::dense_weights(m, pr.X.cols());
    const auto ref = oracle::penalized_reference(pr.X, pr.y, alpha);
    EXPECT_NEAR(oracle::penalized_value(pr.X, pr.y, w, alpha), oracle::penalized_value(pr.X, pr.y, ref, alpha),
                1e-6);
    // Subgradient conditions.
    const Eigen::VectorXd corr = pr.X.transpose() * (pr.y - pr.X * w) / double(pr.X.rows());
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w[j] == 0.0)
        EXPECT_LE(std::abs(corr[j]), alpha + 10 * o.tol);
      else
        EXPECT_NEAR(corr[j], alpha * (w[j] > 0 ? 1.0 : -1.0), 10 * o.tol);
    }
  }
}

TEST(Penalized, SparseAndDenseDesignsAgree) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> col(0, 19);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    std::vector<SparseFeature> rows;
    Eigen::VectorXd y(15);
    for (int i = 0; i < 15; ++i) {
      std::set<std::uint64_t> ones;
      for (int k = 0; k < 3; ++k) ones.insert(col(rng));
      rows.push_back({20, {ones.begin(), ones.end()}});
      y[i] = g(rng);
    }
    auto sparse = make_indicator_dataset(rows, y);
    auto dense = make_dense_dataset(Eigen::MatrixXd(sparse.X), y);
    const auto a = fit_penalized(sparse, 0.01), b = fit_penalized(dense, 0.01);
    // Repeated 0/1 columns make the minimiser non-unique; compare objectives and fits.
    EXPECT_NEAR(a.trace.objective, b.trace.objective, 1e-9);
    for (const auto& [k, v] : a.weights) EXPECT_TRUE(std::binary_search(sparse.column_ids.begin(), sparse.column_ids.end(), k));
    for (int i = 0; i < 15; ++i)
      EXPECT_NEAR(predict(a, rows[i]), predict(b, Eigen::VectorXd(dense.X.row(i).transpose())), 1e-4);
  }
}

TEST(Penalized, InterceptMatchesCentredReference) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    auto pr = random_problem(rng);
    pr.y.array() += 3.0;
    const double alpha = log_uniform(rng, 1e-3, 0.3);
    LassoOptions o;
    o.fit_intercept = true;
    const auto m = fit_penalized(make_dense_dataset(pr.X, pr.y), alpha, o);
    const Eigen::RowVectorXd mu = pr.X.colwise().mean();
    const Eigen::MatrixXd Xc = pr.X.rowwise() - mu;
    const Eigen::VectorXd yc = pr.y.array() - pr.y.mean();
    const auto ref = oracle::penalized_reference(Xc, yc, alpha);
    const auto w = oracle::dense_weights(m, pr.X.cols());
    EXPECT_NEAR(oracle::penalized_value(Xc, yc, w, alpha), oracle::penalized_value(Xc, yc, ref, alpha), 1e-6);
    EXPECT_NEAR(m.intercept, pr.y.mean() - mu.dot(w), 1e-12);
  }
}

TEST(Penalized, WarningWhenIterationsRunOut) {
  std::mt19937_64 rng(6);
  auto pr = random_problem(rng, 30, 12);
  LassoOptions o;
  o.max_iter = 1;
  o.tol = 1e-14;
  const auto m = fit_penalized(make_dense_dataset(pr.X, pr.y), 1e-4, o);
  EXPECT_TRUE(m.warning);
  EXPECT_FALSE(m.trace.converged);
  EXPECT_GT(m.trace.optimality, 0.0);
}

TEST(Penalized, Guards) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(fit_penalized(make_dense_dataset(X, y), 0.0), ArgumentError);
  EXPECT_THROW(fit_penalized(make_dense_dataset(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), 0.1), ArgumentError);
  y[0] = std::nan("");
  EXPECT_THROW(fit_penalized(make_dense_dataset(X, y), 0.1), NumericError);
}

TEST(Constrained, ZeroRadius) {
  std::mt19937_64 rng(7);
  auto pr = random_problem(rng);
  const auto m = fit_constrained(make_dense_dataset(pr.X, pr.y), 0.0, 1e-3);
  EXPECT_TRUE(m.weights.empty());
  EXPECT_NEAR(m.trace.objective, pr.y.squaredNorm() / pr.y.size(), 1e-15);
}

TEST(Constrained, ActiveConstraintOneFeature) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(2, 0.5);
  const auto m = fit_constrained(make_dense_dataset(X, y), 0.3, 1e-9);
  ASSERT_EQ(m.weights.size(), 1u);
  EXPECT_NEAR(m.weights[0].second, 0.3, 1e-8);
}

TEST(Constrained, LargeRadiusIsLeastSquares) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd X(20, 4);
    for (auto& v : X.reshaped()) v = g(rng);
    Eigen::VectorXd y(20);
    for (auto& v : y) v = g(rng);
    const Eigen::VectorXd ls = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    const double eps3 = 1e-6;
    const auto m = fit_constrained(make_dense_dataset(X, y), 100.0, eps3);
    EXPECT_LE(m.trace.objective - oracle::constrained_value(X, y, ls), eps3);
  }
}

TEST(Constrained, CertifiedGapAgainstReference) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    auto pr = random_problem(rng);
    const double B = log_uniform(rng, 0.05, 5.0);
    const double eps3 = log_uniform(rng, 1e-6, 1e-2);
    const auto m = fit_constrained(make_dense_dataset(pr.X, pr.y), B, eps3);
    EXPECT_TRUE(m.trace.converged);
    EXPECT_LE(m.trace.optimality, eps3 / 2);
    EXPECT_LE(m.l1_norm(), B + 1e-12);
    const auto ref = oracle::constrained_reference(pr.X, pr.y, B);
    const double f_ref = oracle::constrained_value(pr.X, pr.y, ref);
    EXPECT_GE(f_ref, m.trace.objective - eps3 / 2 - 1e-10);
    EXPECT_LE(m.trace.objective - f_ref, eps3 / 2 + 1e-10);
  }
}

TEST(Constrained, NonFiniteGradient) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(2);
  y[1] = INFINITY;
  EXPECT_THROW(fit_constrained(make_dense_dataset(X, y), 1.0, 1e-3), NumericError);
  EXPECT_THROW(fit_constrained(make_dense_dataset(X, Eigen::VectorXd::Ones(2)), 1.0, 0.0), ArgumentError);
  EXPECT_THROW(fit_constrained(make_dense_dataset(X, Eigen::VectorXd::Ones(2)), -1.0, 1e-3), ArgumentError);
}

TEST(Predict, Examples) {
  RegressionModel zero;
  zero.feature_dim = 5;
  EXPECT_EQ(predict(zero, SparseFeature{5, {0, 3}}), 0.0);
  RegressionModel one = zero;
  one.weights = {{3, 2.5}};
  EXPECT_EQ(predict(one, SparseFeature{5, {3}}), 2.5);
  EXPECT_EQ(one.weight(3), 2.5);
  EXPECT_EQ(one.weight(2), 0.0);
  EXPECT_THROW(predict(one, SparseFeature{6, {3}}), ArgumentError);
  EXPECT_THROW(predict(one, Eigen::VectorXd(4)), ArgumentError);
}

TEST(Predict, SparseMatchesDenseDot) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::uint64_t> col(0, 49);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    RegressionModel m;
    m.feature_dim = 50;
    std::set<std::uint64_t> wk, fk;
    for (int k = 0; k < 10; ++k) wk.insert(col(rng));
    for (int k = 0; k < 8; ++k) fk.insert(col(rng));
    Eigen::VectorXd wd = Eigen::VectorXd::Zero(50), fd = wd;
    for (auto k : wk) {
      const double v = g(rng);
      m.weights.emplace_back(k, v);
      wd[k] = v;
    }
    for (auto k : fk) fd[k] = 1.0;
    SparseFeature f{50, {fk.begin(), fk.end()}};
    EXPECT_NEAR(predict(m, f), wd.dot(fd), 1e-12);
    EXPECT_NEAR(predict(m, fd), wd.dot(fd), 1e-12);
  }
}

TEST(TrainingError, Examples) {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 0, 1, 1, 1;
  Eigen::VectorXd w(2);
  w << 0.5, -1.0;
  Eigen::VectorXd y = X * w;
  auto d = make_dense_dataset(X, y);
  RegressionModel m;
  m.feature_dim = 2;
  m.weights = {{0, 0.5}, {1, -1.0}};
  EXPECT_EQ(training_error(m, d), 0.0);
  RegressionModel zero;
  zero.feature_dim = 2;
  EXPECT_DOUBLE_EQ(training_error(zero, d), y.squaredNorm() / 3);
  auto empty = make_dense_dataset(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
  EXPECT_THROW(training_error(zero, empty), ArgumentError);
}

TEST(TrainingError, MatchesTwoPassRecomputation) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 30; ++t) {
    auto pr = random_problem(rng);
    const auto d = make_dense_dataset(pr.X, pr.y);
    const auto m = fit_penalized(d, 0.01);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pr.X.rows(); ++i) {
      double h = 0.0;
      for (const auto& [k, v] : m.weights) h += v * pr.X(i, static_cast<Eigen::Index>(k));
      acc += (h - pr.y[i]) * (h - pr.y[i]);
    }
    EXPECT_NEAR(training_error(m, d), acc / pr.X.rows(), 1e-12);
  }
}
