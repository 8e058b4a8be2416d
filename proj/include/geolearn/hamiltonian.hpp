#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geolearn/eigensolver.hpp"
#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"
#include "geolearn/pauli.hpp"

namespace geolearn {

/// One local interaction h_j. It is linear in its parameters:
/// h_j(x_j) = sum_k x[params[k]] * generators[k].
struct Term {
  std::vector<Site> support;
  std::vector<int> params;
  std::vector<PauliSum> generators;
};

/// H(x) = sum_j h_j(x_j) where every parameter coordinate is read by exactly one term.
struct ParamHamiltonian {
  std::string family;
  Lattice lattice;
  std::vector<Term> terms;
  int num_params = 0;
  /// Range that every term support satisfies (extent predicate).
  GeoRange range;
  /// true when generators are scaled so that ||h_j|| <= 1 for |x| <= 1.
  bool normalized = false;

  int num_qubits() const { return lattice.num_sites(); }

  /// Index of the term that reads coordinate c.
  int owner(int c) const {
    for (std::size_t j = 0; j < terms.size(); ++j)
      for (int p : terms[j].params)
        if (p == c) return static_cast<int>(j);
    throw ArgumentError(fmt::format("coordinate {} is not read by any term", c));
  }

  void check_params(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != num_params)
      throw ArgumentError(fmt::format("parameter vector has length {}, expected {}", x.size(),
                                      num_params));
  }

  /// Verifies the structural invariants; throws on violation.
  void validate() const {
    std::vector<int> reads(num_params, 0);
    for (const auto& t : terms) {
      if (t.support.empty() || t.support.size() > 4)
        throw ArgumentError("term support must have 1..4 sites");
      if (t.params.size() != t.generators.size())
        throw ArgumentError("term has mismatched params/generators");
      if (!range.admits(lattice, t.support))
        throw ArgumentError("term support exceeds the family range");
      for (int p : t.params) {
        if (p < 0 || p >= num_params) throw ArgumentError("term parameter out of range");
        ++reads[p];
      }
    }
    for (int c = 0; c < num_params; ++c)
      if (reads[c] != 1)
        throw ArgumentError(fmt::format("coordinate {} read by {} terms", c, reads[c]));
  }
};

/// Nearest-neighbour Heisenberg model, one coupling per bond.
/// Raw couplings multiply XX+YY+ZZ; with `normalized` the generator is divided by 3.
inline ParamHamiltonian build_heisenberg(const Lattice& lat, bool normalized = false) {
  if (lat.dims() < 1 || lat.dims() > 2)
    throw UnsupportedError("Heisenberg family supports 1D and 2D lattices only");
  ParamHamiltonian h;
  h.family = normalized ? "heisenberg-normalized" : "heisenberg";
  h.lattice = lat;
  h.range = GeoRange::uniform(lat, 2);
  h.normalized = normalized;
  const double scale = normalized ? 1.0 / 3.0 : 1.0;
  int c = 0;
  for (const auto& [i, j] : lat.edges()) {
    Term t;
    t.support = {i, j};
    t.params = {c++};
    PauliSum g;
    for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) g.add(PauliString({{i, p}, {j, p}}), scale);
    t.generators.push_back(std::move(g));
    h.terms.push_back(std::move(t));
  }
  h.num_params = c;
  return h;
}

/// Couplings drawn i.i.d. uniform on [0, 2].
inline std::vector<double> sample_instance(const ParamHamiltonian& h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  std::vector<double> x(h.num_params);
  for (double& v : x) v = dist(rng);
  return x;
}

/// Coupling J in [0,2] to the unit-cube coordinate x = J - 1 in [-1,1].
inline std::vector<double> couplings_to_unit(std::span<const double> j) {
  std::vector<double> x(j.begin(), j.end());
  for (double& v : x) v -= 1.0;
  return x;
}

inline std::vector<double> unit_to_couplings(std::span<const double> x) {
  std::vector<double> j(x.begin(), x.end());
  for (double& v : j) v += 1.0;
  return j;
}

/// H(x) as a Pauli sum.
inline PauliSum hamiltonian_pauli_sum(const ParamHamiltonian& h, std::span<const double> x) {
  h.check_params(x);
  PauliSum out;
  for (const auto& t : h.terms)
    for (std::size_t k = 0; k < t.params.size(); ++k) out.add(t.generators[k], x[t.params[k]]);
  return out;
}

inline constexpr int kMaxSparseQubits = 20;

/// Sparse 2^n x 2^n matrix of H(x).
inline SparseMatrixXc assemble(const ParamHamiltonian& h, std::span<const double> x) {
  if (h.num_qubits() > kMaxSparseQubits)
    throw CapacityError(fmt::format("{} qubits exceeds the sparse cap of {}", h.num_qubits(),
                                    kMaxSparseQubits));
  return sparse_matrix(hamiltonian_pauli_sum(h, x), h.num_qubits(), kMaxSparseQubits);
}

// ---------------------------------------------------------------------------
// Ground states
// ---------------------------------------------------------------------------

struct GroundStateOptions {
  /// Dense eigensolve up to this many qubits, Lanczos above.
  int dense_max_qubits = 8;
  /// Levels within rel_tol * max(1, |E0|) of E0 are treated as degenerate.
  double degeneracy_rel_tol = 1e-10;
  int max_degenerate = 64;
  LanczosOptions lanczos;
};

/// Ground state or uniform mixture over the ground eigenspace.
struct GroundStateResult {
  int num_qubits = 0;
  double energy = 0.0;
  /// E_1 - E_0 with E_1 the second-lowest eigenvalue counted with multiplicity.
  double gap = 0.0;
  bool degenerate = false;
  /// Orthonormal basis of the ground space (empty when maximally_mixed).
  std::vector<VectorXc> span;
  /// Ground space is the whole Hilbert space (H = 0).
  bool maximally_mixed = false;
  double residual = 0.0;
};

inline GroundStateResult ground_state(const ParamHamiltonian& h, std::span<const double> x,
                                      const GroundStateOptions& opt = {}) {
  const int n = h.num_qubits();
  SparseMatrixXc op = assemble(h, x);
  GroundStateResult gs;
  gs.num_qubits = n;
  const Eigen::Index dim = op.rows();
  if (op.nonZeros() == 0) {
    gs.maximally_mixed = true;
    gs.degenerate = dim > 1;
    return gs;
  }
  const double scale = row_sum_bound(op);

  if (n <= opt.dense_max_qubits) {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es{MatrixXc(op)};
    const auto& ev = es.eigenvalues();
    gs.energy = ev[0];
    const double tol = opt.degeneracy_rel_tol * std::max(1.0, std::abs(gs.energy));
    Eigen::Index count = 1;
    while (count < dim && ev[count] - ev[0] <= tol) ++count;
    gs.gap = dim > 1 ? ev[1] - ev[0] : 0.0;
    gs.degenerate = count > 1;
    if (count == dim) {
      gs.maximally_mixed = true;
      return gs;
    }
    for (Eigen::Index k = 0; k < count; ++k) {
      VectorXc v = es.eigenvectors().col(k);
      gs.residual = std::max(gs.residual, (op * v - ev[k] * v).norm());
      gs.span.push_back(std::move(v));
    }
    return gs;
  }

  LanczosOptions lopt = opt.lanczos;
  EigenPair e0 = lanczos_lowest(op, {}, scale, lopt);
  gs.energy = e0.value;
  gs.residual = e0.residual;
  gs.span.push_back(std::move(e0.vector));
  const double tol = opt.degeneracy_rel_tol * std::max(1.0, std::abs(gs.energy));
  bool first = true;
  while (static_cast<Eigen::Index>(gs.span.size()) < dim) {
    lopt.seed += 0x9e3779b97f4a7c15ULL;
    EigenPair next = lanczos_lowest(op, gs.span, scale, lopt);
    if (first) {
      gs.gap = std::max(0.0, next.value - gs.energy);
      first = false;
    }
    if (next.value - gs.energy > tol) break;
    gs.residual = std::max(gs.residual, next.residual);
    gs.span.push_back(std::move(next.vector));
    if (static_cast<int>(gs.span.size()) > opt.max_degenerate)
      throw NumericError("ground space degeneracy exceeds max_degenerate");
  }
  gs.degenerate = gs.span.size() > 1;
  return gs;
}

/// Tr(O rho) for the (mixed) ground state.
inline double expectation(const GroundStateResult& gs, const PauliSum& op) {
  if (op.max_site() >= gs.num_qubits)
    throw ArgumentError("observable acts outside the ground-state register");
  if (gs.maximally_mixed) return op.coefficient(PauliString{});
  double acc = 0.0;
  for (const auto& v : gs.span) acc += expectation(op, v, gs.num_qubits);
  return acc / static_cast<double>(gs.span.size());
}

/// C_ij = (X_i X_j + Y_i Y_j + Z_i Z_j) / 3.
inline PauliSum correlation_observable(Site i, Site j) {
  if (i == j) throw ArgumentError("correlation observable needs two distinct sites");
  PauliSum c;
  for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) c.add(PauliString({{i, p}, {j, p}}), 1.0 / 3.0);
  return c;
}

inline double spectral_gap(const ParamHamiltonian& h, std::span<const double> x,
                           const GroundStateOptions& opt = {}) {
  if (h.num_qubits() > 16) throw CapacityError("spectral gap probe is capped at 16 qubits");
  return ground_state(h, x, opt).gap;
}

}  // namespace geolearn
