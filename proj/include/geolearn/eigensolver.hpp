#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geolearn/errors.hpp"
#include "geolearn/pauli.hpp"

namespace geolearn {

struct EigenPair {
  double value = 0.0;
  VectorXc vector;
  double residual = 0.0;
  int iterations = 0;
};

struct LanczosOptions {
  int max_krylov = 160;
  int max_restarts = 40;
  /// Residual target relative to the operator scale.
  double rel_tol = 1e-10;
  std::uint64_t seed = 0x5eed;
};

/// Lowest eigenpair of a Hermitian operator restricted to the orthogonal
/// complement of `locked` (orthonormal). Lanczos with full
/// reorthogonalisation and explicit restarts from the current Ritz vector.
inline EigenPair lanczos_lowest(const SparseMatrixXc& op, const std::vector<VectorXc>& locked,
                                double scale, const LanczosOptions& opt = {}) {
  const Eigen::Index dim = op.rows();
  const Eigen::Index free_dim = dim - static_cast<Eigen::Index>(locked.size());
  if (free_dim <= 0) throw NumericError("no space left outside the locked vectors");
  const double tol = opt.rel_tol * std::max(scale, 1e-300);

  auto project = [&](VectorXc& v) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : locked) v -= u * u.dot(v);
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  VectorXc start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start[i] = Complex(gauss(rng), gauss(rng));
  project(start);
  start.normalize();

  EigenPair best;
  int total_iter = 0;
  const int kmax = static_cast<int>(std::min<Eigen::Index>(opt.max_krylov, free_dim));
  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    std::vector<VectorXc> basis;
    std::vector<double> alpha, beta;
    basis.push_back(start);
    Eigen::VectorXd ritz_coeffs;
    bool invariant = false;
    for (int k = 0; k < kmax; ++k) {
      VectorXc w = op * basis[k];
      project(w);
      ++total_iter;
      const double a = basis[k].dot(w).real();
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& v : basis) w -= v * v.dot(w);
      const double b = w.norm();

      Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), alpha.size());
      Eigen::VectorXd sub(std::max<std::size_t>(alpha.size(), 1) - 1);
      for (std::size_t i = 0; i + 1 < alpha.size(); ++i) sub[i] = beta[i];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      ritz_coeffs = tri.eigenvectors().col(0);
      const double est = b * std::abs(ritz_coeffs[ritz_coeffs.size() - 1]);

      if (b <= 1e-14 * std::max(1.0, scale)) {
        invariant = true;
        break;
      }
      if (est <= 0.1 * tol && k >= 2) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }
    VectorXc ritz = VectorXc::Zero(dim);
    for (Eigen::Index i = 0; i < ritz_coeffs.size(); ++i) ritz += ritz_coeffs[i] * basis[i];
    project(ritz);
    ritz.normalize();
    VectorXc r = op * ritz;
    project(r);
    const double rq = ritz.dot(r).real();
    const double res = (r - rq * ritz).norm();
    best = {rq, ritz, res, total_iter};
    if (res <= tol || (invariant && res <= 1e3 * tol)) return best;
    start = ritz;
  }
  throw NumericError(fmt::format("Lanczos did not converge: residual {:.3e} after {} iterations",
                                 best.residual, best.iterations));
}

/// Upper bound on the spectral norm from the sparse entries (max absolute row sum).
inline double row_sum_bound(const SparseMatrixXc& op) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(op.rows());
  for (int k = 0; k < op.outerSize(); ++k)
    for (SparseMatrixXc::InnerIterator it(op, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Largest |eigenvalue| of a Hermitian operator.
inline double spectral_norm(const SparseMatrixXc& op, int dense_cap_dim = 1024) {
  if (op.nonZeros() == 0) return 0.0;
  if (op.rows() <= dense_cap_dim) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(MatrixXc(op), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  const double scale = row_sum_bound(op);
  const double lo = lanczos_lowest(op, {}, scale).value;
  SparseMatrixXc neg = -op;
  const double hi = -lanczos_lowest(neg, {}, scale).value;
  return std::max(std::abs(lo), std::abs(hi));
}

}  // namespace geolearn
