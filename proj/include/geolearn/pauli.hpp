#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"

namespace geolearn {

using Complex = std::complex<double>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;
using SparseMatrixXc = Eigen::SparseMatrix<Complex>;

/// Real linear combination of Pauli strings. Zero coefficients are never stored.
class PauliSum {
 public:
  using Map = std::map<PauliString, double>;

  PauliSum() = default;
  PauliSum(std::initializer_list<std::pair<const PauliString, double>> terms) {
    for (const auto& [p, c] : terms) add(p, c);
  }

  void add(const PauliString& p, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(p, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  void add(const PauliSum& other, double scale = 1.0) {
    for (const auto& [p, c] : other.terms_) add(p, scale * c);
  }

  double coefficient(const PauliString& p) const {
    auto it = terms_.find(p);
    return it == terms_.end() ? 0.0 : it->second;
  }

  PauliSum scaled(double a) const {
    PauliSum out;
    if (a == 0.0) return out;
    for (const auto& [p, c] : terms_) out.terms_.emplace(p, a * c);
    return out;
  }

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  auto begin() const { return terms_.begin(); }
  auto end() const { return terms_.end(); }
  const Map& terms() const { return terms_; }

  Site max_site() const {
    Site m = -1;
    for (const auto& [p, c] : terms_) m = std::max(m, p.max_site());
    return m;
  }

 private:
  Map terms_;
};

// ---------------------------------------------------------------------------
// Bitmask kernels. Qubit q is bit q of the computational-basis index; bit 0
// means the Z = +1 eigenstate.
// ---------------------------------------------------------------------------

/// P|b> = i^{num_y} (-1)^{popcount(b & z)} |b ^ x>.
struct PauliMasks {
  std::uint64_t x = 0;
  std::uint64_t z = 0;
  int num_y = 0;

  Complex phase(std::uint64_t b) const {
    static const Complex ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    int k = num_y + 2 * (std::popcount(b & z) & 1);
    return ipow[k & 3];
  }
};

inline PauliMasks pauli_masks(const PauliString& p, int num_qubits) {
  if (num_qubits > 62) throw CapacityError("bitmask kernels support at most 62 qubits");
  p.check_within(num_qubits);
  PauliMasks m;
  for (const auto& [s, l] : p.ops()) {
    const std::uint64_t bit = std::uint64_t{1} << s;
    if (l == Pauli::X || l == Pauli::Y) m.x |= bit;
    if (l == Pauli::Z || l == Pauli::Y) m.z |= bit;
    if (l == Pauli::Y) ++m.num_y;
  }
  return m;
}

/// Same as pauli_masks but with sites relabelled through `local_index`.
inline PauliMasks pauli_masks_local(const PauliString& p, std::span<const Site> support) {
  PauliMasks m;
  for (const auto& [s, l] : p.ops()) {
    auto it = std::find(support.begin(), support.end(), s);
    if (it == support.end()) throw ArgumentError("Pauli string acts outside the given support");
    const std::uint64_t bit = std::uint64_t{1} << (it - support.begin());
    if (l == Pauli::X || l == Pauli::Y) m.x |= bit;
    if (l == Pauli::Z || l == Pauli::Y) m.z |= bit;
    if (l == Pauli::Y) ++m.num_y;
  }
  return m;
}

inline std::size_t checked_dim(int num_qubits, int cap) {
  if (num_qubits < 0) throw ArgumentError("negative qubit count");
  if (num_qubits > cap)
    throw CapacityError(fmt::format("{} qubits exceeds the cap of {}", num_qubits, cap));
  return std::size_t{1} << num_qubits;
}

/// out += coeff * P * in
inline void apply_pauli_add(const PauliMasks& m, Complex coeff, const VectorXc& in, VectorXc& out) {
  const std::uint64_t dim = static_cast<std::uint64_t>(in.size());
  for (std::uint64_t b = 0; b < dim; ++b) out[b ^ m.x] += coeff * m.phase(b) * in[b];
}

/// <psi| P |psi> (real part; P is Hermitian).
inline double pauli_expectation(const PauliMasks& m, const VectorXc& psi) {
  const std::uint64_t dim = static_cast<std::uint64_t>(psi.size());
  Complex acc = 0.0;
  for (std::uint64_t b = 0; b < dim; ++b) acc += std::conj(psi[b ^ m.x]) * m.phase(b) * psi[b];
  return acc.real();
}

inline double expectation(const PauliSum& op, const VectorXc& psi, int num_qubits) {
  double acc = 0.0;
  for (const auto& [p, c] : op) acc += c * pauli_expectation(pauli_masks(p, num_qubits), psi);
  return acc;
}

/// Dense 2^n x 2^n matrix of a Pauli sum.
inline MatrixXc dense_matrix(const PauliSum& op, int num_qubits, int cap = 12) {
  const std::size_t dim = checked_dim(num_qubits, cap);
  MatrixXc m = MatrixXc::Zero(dim, dim);
  for (const auto& [p, c] : op) {
    const PauliMasks k = pauli_masks(p, num_qubits);
    for (std::uint64_t b = 0; b < dim; ++b) m(b ^ k.x, b) += c * k.phase(b);
  }
  return m;
}

/// Dense matrix of a Pauli string on the qubits of `support` (local ordering).
inline MatrixXc local_pauli_matrix(const PauliString& p, std::span<const Site> support) {
  const std::size_t dim = std::size_t{1} << support.size();
  const PauliMasks k = pauli_masks_local(p, support);
  MatrixXc m = MatrixXc::Zero(dim, dim);
  for (std::uint64_t b = 0; b < dim; ++b) m(b ^ k.x, b) = k.phase(b);
  return m;
}

/// Sparse matrix of a Pauli sum; duplicate entries are summed.
inline SparseMatrixXc sparse_matrix(const PauliSum& op, int num_qubits, int cap = 20) {
  const std::size_t dim = checked_dim(num_qubits, cap);
  std::vector<Eigen::Triplet<Complex>> trips;
  trips.reserve(op.size() * dim);
  for (const auto& [p, c] : op) {
    const PauliMasks k = pauli_masks(p, num_qubits);
    for (std::uint64_t b = 0; b < dim; ++b)
      trips.emplace_back(static_cast<int>(b ^ k.x), static_cast<int>(b), c * k.phase(b));
  }
  SparseMatrixXc m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(Complex(0.0, 0.0));
  return m;
}

/// Product of two Pauli strings with disjoint supports.
inline PauliString disjoint_product(const PauliString& a, const PauliString& b) {
  std::vector<PauliString::Op> ops = a.ops();
  ops.insert(ops.end(), b.ops().begin(), b.ops().end());
  return PauliString(std::move(ops));
}

}  // namespace geolearn
