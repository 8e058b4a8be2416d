#pragma once

// Independent reference computations shared by the test binaries. Nothing
// here reuses the bitmask kernels of the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "geolearn/geometry.hpp"
#include "geolearn/pauli.hpp"

namespace oracle {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

inline Eigen::Matrix2cd single(geolearn::Pauli p) {
  Eigen::Matrix2cd m;
  const Complex i(0.0, 1.0);
  switch (p) {
    case geolearn::Pauli::I: m << 1, 0, 0, 1; break;
    case geolearn::Pauli::X: m << 0, 1, 1, 0; break;
    case geolearn::Pauli::Y: m << 0, -i, i, 0; break;
    case geolearn::Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

/// Qubit q is bit q of the basis index, so qubit n-1 is the leftmost factor.
inline MatrixXcd pauli_matrix(const geolearn::PauliString& p, int n) {
  MatrixXcd m = MatrixXcd::Identity(1, 1);
  for (int q = n - 1; q >= 0; --q) m = kron(m, single(p.at(q)));
  return m;
}

inline MatrixXcd sum_matrix(const geolearn::PauliSum& o, int n) {
  MatrixXcd m = MatrixXcd::Zero(1 << n, 1 << n);
  for (const auto& [p, c] : o) m += c * pauli_matrix(p, n);
  return m;
}

inline VectorXcd random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorXcd v(1 << n);
  for (auto& a : v) a = Complex(g(rng), g(rng));
  return v.normalized();
}

/// Random Pauli string supported on exactly `sites` (no identity letters).
inline geolearn::PauliString random_string(const std::vector<int>& sites, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> letter(1, 3);
  std::vector<geolearn::PauliString::Op> ops;
  for (int s : sites) ops.emplace_back(s, static_cast<geolearn::Pauli>(letter(rng)));
  return geolearn::PauliString(std::move(ops));
}

inline double expect(const MatrixXcd& m, const VectorXcd& psi) { return (psi.adjoint() * m * psi)(0, 0).real(); }

// ---------------------------------------------------------------------------
// LASSO references (dense, accelerated projected gradient)
// ---------------------------------------------------------------------------

inline double lipschitz(const Eigen::MatrixXd& X) {
  const double N = double(X.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X / N, Eigen::EigenvaluesOnly);
  return std::max(es.eigenvalues().maxCoeff(), 1e-12);
}

/// min (1/2N)||y - Xw||^2 + alpha ||w||_1 written as a smooth problem in
/// (u, v) >= 0 with w = u - v; FISTA with projection onto the orthant.
inline Eigen::VectorXd penalized_reference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                                           int iters = 200000) {
  const Eigen::Index p = X.cols();
  const double N = double(X.rows());
  const double step = 1.0 / (2.0 * lipschitz(X));
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p), v = u, uy = u, vy = v;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd g = -X.transpose() * (y - X * (uy - vy)) / N;
    const Eigen::VectorXd un = (uy - step * (g.array() + alpha).matrix()).cwiseMax(0.0);
    const Eigen::VectorXd vn = (vy - step * (-g.array() + alpha).matrix()).cwiseMax(0.0);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    uy = un + ((t - 1.0) / tn) * (un - u);
    vy = vn + ((t - 1.0) / tn) * (vn - v);
    if ((un - u).lpNorm<Eigen::Infinity>() + (vn - v).lpNorm<Eigen::Infinity>() < 1e-15) {
      u = un;
      v = vn;
      break;
    }
    u = un;
    v = vn;
    t = tn;
  }
  return u - v;
}

/// Euclidean projection onto {||w||_1 <= B} by sorting magnitudes.
inline Eigen::VectorXd project_l1(const Eigen::VectorXd& z, double B) {
  if (z.lpNorm<1>() <= B) return z;
  std::vector<double> m(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) m[i] = std::abs(z[i]);
  std::sort(m.begin(), m.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    cum += m[k];
    const double cand = (cum - B) / double(k + 1);
    if (m[k] > cand) theta = cand;
  }
  Eigen::VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    w[i] = (z[i] > 0 ? 1.0 : -1.0) * std::max(std::abs(z[i]) - theta, 0.0);
  return w;
}

/// min_{||w||_1 <= B} (1/N)||Xw - y||^2 by accelerated projected gradient.
inline Eigen::VectorXd constrained_reference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double B,
                                             int iters = 200000) {
  const Eigen::Index p = X.cols();
  const double N = double(X.rows());
  const double step = 1.0 / (2.0 * lipschitz(X));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p), z = w;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    const Eigen::VectorXd g = 2.0 * X.transpose() * (X * z - y) / N;
    const Eigen::VectorXd wn = project_l1(z - step * g, B);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = wn + ((t - 1.0) / tn) * (wn - w);
    if ((wn - w).lpNorm<Eigen::Infinity>() < 1e-15) {
      w = wn;
      break;
    }
    w = wn;
    t = tn;
  }
  return w;
}

inline double penalized_value(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              double alpha) {
  return (y - X * w).squaredNorm() / (2.0 * double(X.rows())) + alpha * w.lpNorm<1>();
}

inline double constrained_value(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return (X * w - y).squaredNorm() / double(X.rows());
}

/// Dense weight vector of a model over the first `p` global columns.
template <class Model>
Eigen::VectorXd dense_weights(const Model& m, Eigen::Index p) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  for (const auto& [k, v] : m.weights) w[static_cast<Eigen::Index>(k)] = v;
  return w;
}

}  // namespace oracle
