#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "geolearn/eigensolver.hpp"
#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"
#include "geolearn/pauli.hpp"

namespace geolearn {

// ---------------------------------------------------------------------------
// Pauli decomposition
// ---------------------------------------------------------------------------

/// A Hermitian operator on a few sites; matrix uses local qubit q = support[q].
struct LocalTerm {
  std::vector<Site> support;
  MatrixXc matrix;
};

inline constexpr int kMaxDecomposeSites = 4;

/// alpha_P = Tr(P h) / 2^k for every string on each term's support, summed.
inline PauliSum pauli_decompose(const std::vector<LocalTerm>& terms) {
  PauliSum out;
  for (const auto& t : terms) {
    const int k = static_cast<int>(t.support.size());
    if (k < 1 || k > kMaxDecomposeSites)
      throw ArgumentError(fmt::format("term support must have 1..{} sites", kMaxDecomposeSites));
    {
      std::vector<Site> s = t.support;
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end() || s.front() < 0)
        throw ArgumentError("term support has repeated or negative sites");
    }
    const Eigen::Index dim = Eigen::Index{1} << k;
    if (t.matrix.rows() != dim || t.matrix.cols() != dim)
      throw ArgumentError("term matrix does not match its support");
    if ((t.matrix - t.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw ArgumentError("term matrix is not Hermitian");
    const double cutoff = 1e-14 * std::max(1.0, t.matrix.norm());

    std::int64_t combos = std::int64_t{1} << (2 * k);
    for (std::int64_t code = 0; code < combos; ++code) {
      std::vector<PauliString::Op> ops;
      for (int q = 0; q < k; ++q) {
        auto letter = static_cast<Pauli>((code >> (2 * q)) & 3);
        if (letter != Pauli::I) ops.emplace_back(t.support[q], letter);
      }
      PauliString p(std::move(ops));
      const MatrixXc pm = local_pauli_matrix(p, t.support);
      const double a = (pm * t.matrix).trace().real() / double(dim);
      if (std::abs(a) > cutoff) out.add(p, a);
    }
  }
  return out;
}

inline double pauli_one_norm(const PauliSum& o) {
  double s = 0.0;
  for (const auto& [p, c] : o) s += std::abs(c);
  return s;
}

inline double pauli_two_norm_sq(const PauliSum& o) {
  double s = 0.0;
  for (const auto& [p, c] : o) s += c * c;
  return s;
}

// ---------------------------------------------------------------------------
// Block partition
// ---------------------------------------------------------------------------

/// Per axis, block i (1-based) with shift j covers the 0-based sites
/// [(2i-2)R + j, (2i-1)R + j - 1], i = 1..floor((L - j + R) / (2R)).
/// This is the 1-based interval [(2i-2)R + j + 1, (2i-1)R + j] shifted by one.
inline std::vector<std::pair<int, int>> axis_blocks(int side, int r, int shift) {
  if (shift < 0 || shift >= 2 * r) throw ArgumentError("shift must lie in 0..2R-1");
  std::vector<std::pair<int, int>> out;
  const int count = (side - shift + r) / (2 * r);
  for (int i = 1; i <= count; ++i) out.emplace_back((2 * i - 2) * r + shift, (2 * i - 1) * r + shift - 1);
  return out;
}

struct Block {
  /// 1-based block index per axis.
  std::vector<int> index;
  std::vector<Site> sites;
};

struct BlockPartition {
  std::vector<int> shift;
  std::vector<Block> blocks;
  std::vector<Site> buffer;
};

inline BlockPartition build_partition(const Lattice& lat, const GeoRange& range,
                                      const std::vector<int>& shift) {
  range.check_against(lat);
  if (static_cast<int>(shift.size()) != lat.dims()) throw ArgumentError("shift rank mismatch");
  const int d = lat.dims();
  std::vector<std::vector<std::pair<int, int>>> per_axis(d);
  for (int k = 0; k < d; ++k) per_axis[k] = axis_blocks(lat.side(k), range.per_axis[k], shift[k]);

  BlockPartition part;
  part.shift = shift;
  std::vector<char> covered(lat.num_sites(), 0);
  bool any = std::all_of(per_axis.begin(), per_axis.end(), [](const auto& v) { return !v.empty(); });
  if (any) {
    std::vector<int> idx(d, 0);
    while (true) {
      Block b;
      for (int k = 0; k < d; ++k) b.index.push_back(idx[k] + 1);
      for (Site s = 0; s < lat.num_sites(); ++s) {
        bool in = true;
        for (int k = 0; k < d && in; ++k) {
          const int c = lat.coord(s, k);
          in = c >= per_axis[k][idx[k]].first && c <= per_axis[k][idx[k]].second;
        }
        if (in) {
          b.sites.push_back(s);
          covered[s] = 1;
        }
      }
      part.blocks.push_back(std::move(b));
      int k = d - 1;
      while (k >= 0 && ++idx[k] == static_cast<int>(per_axis[k].size())) idx[k--] = 0;
      if (k < 0) break;
    }
  }
  for (Site s = 0; s < lat.num_sites(); ++s)
    if (!covered[s]) part.buffer.push_back(s);
  return part;
}

/// All shifts j in lexicographic order (2^d R of them).
inline std::vector<std::vector<int>> all_shifts(const GeoRange& range) {
  std::vector<std::vector<int>> out;
  std::vector<int> j(range.dims(), 0);
  while (true) {
    out.push_back(j);
    int k = range.dims() - 1;
    while (k >= 0 && ++j[k] == 2 * range.per_axis[k]) j[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assignment of strings to blocks
// ---------------------------------------------------------------------------

struct BlockAssignment {
  Lattice lattice;
  GeoRange range;
  std::vector<BlockPartition> partitions;  ///< one per shift, in all_shifts order
  /// sets[s][b]: strings assigned to block b of shift s (S set).
  std::vector<std::vector<std::vector<PauliString>>> sets;
  /// sum of |alpha| over U_j, per shift.
  std::vector<double> shift_weight;
  int best = 0;

  const BlockPartition& best_partition() const { return partitions[best]; }

  /// All strings of U_j for shift index s.
  std::vector<PauliString> union_of(int s) const {
    std::vector<PauliString> out;
    for (const auto& v : sets[s]) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
};

/// Throws unless every string fits in R_k consecutive sites along each axis.
inline void check_block_local(const PauliSum& o, const Lattice& lat, const GeoRange& range) {
  range.check_against(lat);
  for (const auto& [p, c] : o) {
    if (p.is_identity()) throw ArgumentError("identity component is not supported by the verifier");
    p.check_within(lat.num_sites());
    const auto sup = p.support();
    for (int k = 0; k < lat.dims(); ++k)
      if (support_extent(lat, sup, k) > range.per_axis[k] - 1)
        throw ArgumentError(fmt::format("string {} does not fit in {} consecutive sites on axis {}",
                                        p.str(), range.per_axis[k], k));
  }
}

inline BlockAssignment assign_strings(const PauliSum& o, const Lattice& lat, const GeoRange& range) {
  check_block_local(o, lat, range);
  BlockAssignment a;
  a.lattice = lat;
  a.range = range;
  for (const auto& j : all_shifts(range)) a.partitions.push_back(build_partition(lat, range, j));
  const int ns = static_cast<int>(a.partitions.size());
  a.sets.resize(ns);
  for (int s = 0; s < ns; ++s) a.sets[s].resize(a.partitions[s].blocks.size());
  a.shift_weight.assign(ns, 0.0);

  std::vector<int> block_of(lat.num_sites());
  for (const auto& [p, c] : o) {
    const auto sup = p.support();
    // Lexicographically first (i, j) whose block contains the support.
    std::optional<std::pair<std::vector<int>, std::vector<int>>> best_key;
    int best_s = -1, best_b = -1;
    for (int s = 0; s < ns; ++s) {
      const auto& part = a.partitions[s];
      for (std::size_t b = 0; b < part.blocks.size(); ++b) {
        const auto& sites = part.blocks[b].sites;
        bool inside = std::all_of(sup.begin(), sup.end(), [&](Site q) {
          return std::binary_search(sites.begin(), sites.end(), q);
        });
        if (!inside) continue;
        std::pair<std::vector<int>, std::vector<int>> key{part.blocks[b].index, part.shift};
        if (!best_key || key < *best_key) {
          best_key = std::move(key);
          best_s = s;
          best_b = static_cast<int>(b);
        }
        break;  // blocks of one shift are disjoint
      }
    }
    if (best_s < 0)
      throw NumericError(fmt::format("string {} is not contained in any block", p.str()));
    a.sets[best_s][best_b].push_back(p);
    a.shift_weight[best_s] += std::abs(c);
  }
  a.best = static_cast<int>(std::max_element(a.shift_weight.begin(), a.shift_weight.end()) -
                            a.shift_weight.begin());
  return a;
}

// ---------------------------------------------------------------------------
// Test state
// ---------------------------------------------------------------------------

struct BlockFactor {
  std::vector<Site> sites;
  /// Strings Q of the block's S set with the sign of alpha_Q.
  std::vector<std::pair<PauliString, int>> signed_strings;
};

/// rho = prod_blocks 2^-|B| (I + (1/|S|) sum_Q sign(alpha_Q) Q) (x) I/2 on the buffer,
/// kept in factored form.
struct TestState {
  int num_qubits = 0;
  std::vector<BlockFactor> factors;

  /// Tr(P rho) from the factored form.
  double trace_pauli(const PauliString& p) const {
    if (p.is_identity()) return 1.0;
    std::vector<char> seen(num_qubits, 0);
    double value = 1.0;
    for (const auto& f : factors) {
      std::vector<PauliString::Op> part;
      for (const auto& op : p.ops())
        if (std::binary_search(f.sites.begin(), f.sites.end(), op.first)) {
          part.push_back(op);
          seen[op.first] = 1;
        }
      if (part.empty()) continue;
      PauliString q(std::move(part));
      double local = 0.0;
      for (const auto& [s, sign] : f.signed_strings)
        if (s == q) local = sign / double(f.signed_strings.size());
      value *= local;
      if (value == 0.0) return 0.0;
    }
    for (const auto& op : p.ops())
      if (!seen[op.first]) return 0.0;
    return value;
  }

  double trace_against(const PauliSum& o) const {
    double acc = 0.0;
    for (const auto& [p, c] : o) acc += c * trace_pauli(p);
    return acc;
  }

  /// Dense density matrix (oracle use only).
  MatrixXc dense(int cap = 10) const {
    const std::size_t dim = checked_dim(num_qubits, cap);
    SparseMatrixXc rho(dim, dim);
    rho.setIdentity();
    rho *= Complex(1.0 / double(dim), 0.0);
    for (const auto& f : factors) {
      if (f.signed_strings.empty()) continue;
      PauliSum local;
      local.add(PauliString{}, 1.0);
      for (const auto& [q, sign] : f.signed_strings)
        local.add(q, sign / double(f.signed_strings.size()));
      SparseMatrixXc m = sparse_matrix(local, num_qubits, cap);
      rho = (rho * m).pruned();
    }
    return MatrixXc(rho);
  }
};

inline TestState build_test_state(const BlockAssignment& a, const PauliSum& o) {
  TestState st;
  st.num_qubits = a.lattice.num_sites();
  const auto& part = a.best_partition();
  for (std::size_t b = 0; b < part.blocks.size(); ++b) {
    BlockFactor f;
    f.sites = part.blocks[b].sites;
    for (const auto& q : a.sets[a.best][b])
      f.signed_strings.emplace_back(q, o.coefficient(q) < 0 ? -1 : 1);
    st.factors.push_back(std::move(f));
  }
  return st;
}

/// Tr(O rho) = sum over P in U_{j*} of |alpha_P| / |S_(i_P, j*)|.
inline double trace_against(const BlockAssignment& a, const PauliSum& o) {
  double acc = 0.0;
  for (const auto& set : a.sets[a.best]) {
    if (set.empty()) continue;
    double s = 0.0;
    for (const auto& q : set) s += std::abs(o.coefficient(q));
    acc += s / double(set.size());
  }
  return acc;
}

/// 2^d R 4^R.
inline double norm_bound_constant(const GeoRange& range) {
  const double r = double(range.product());
  return std::pow(2.0, range.dims()) * r * std::pow(4.0, r);
}

// ---------------------------------------------------------------------------
// Verification report
// ---------------------------------------------------------------------------

struct NormReport {
  double sum_abs_alpha = 0.0;
  double sum_sq_alpha = 0.0;
  double trace_analytic = 0.0;
  double trace_factored = 0.0;
  std::optional<double> trace_dense;
  /// Tr(O^2) / 2^n from the dense matrix.
  std::optional<double> trace_sq_dense;
  std::optional<double> rho_trace;
  std::optional<double> rho_min_eigenvalue;
  double spectral_norm = 0.0;
  double bound_constant = 0.0;
  double best_shift_weight = 0.0;
  std::vector<int> best_shift;
  bool pass_intermediate = false;  ///< sum|alpha| <= C Tr(O rho)
  bool pass_spectral = false;      ///< sum|alpha| <= C ||O||
  bool pass = false;
};

struct VerifyOptions {
  int dense_max_qubits = 10;
  int max_qubits = 16;
};

inline NormReport verify_inequality(const PauliSum& o, const Lattice& lat, const GeoRange& range,
                                    const VerifyOptions& opt = {}) {
  const int n = lat.num_sites();
  if (n > opt.max_qubits)
    throw CapacityError(fmt::format("{} qubits exceeds the verifier cap of {}", n, opt.max_qubits));
  BlockAssignment a = assign_strings(o, lat, range);
  TestState st = build_test_state(a, o);

  NormReport r;
  r.sum_abs_alpha = pauli_one_norm(o);
  r.sum_sq_alpha = pauli_two_norm_sq(o);
  r.trace_analytic = trace_against(a, o);
  r.trace_factored = st.trace_against(o);
  r.bound_constant = norm_bound_constant(range);
  r.best_shift_weight = a.shift_weight[a.best];
  r.best_shift = a.best_partition().shift;

  SparseMatrixXc om = sparse_matrix(o, n, opt.max_qubits);
  r.spectral_norm = spectral_norm(om);
  if (n <= opt.dense_max_qubits) {
    const MatrixXc rho = st.dense(opt.dense_max_qubits);
    const MatrixXc od(om);
    r.trace_dense = (od * rho).trace().real();
    r.trace_sq_dense = (od * od).trace().real() / double(od.rows());
    r.rho_trace = rho.trace().real();
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(rho, Eigen::EigenvaluesOnly);
    r.rho_min_eigenvalue = es.eigenvalues()[0];
  }
  const double slack = 1e-12 * std::max(1.0, r.sum_abs_alpha);
  r.pass_intermediate = r.sum_abs_alpha <= r.bound_constant * r.trace_analytic + slack;
  r.pass_spectral = r.sum_abs_alpha <= r.bound_constant * r.spectral_norm + slack;
  r.pass = r.pass_intermediate && r.pass_spectral;
  return r;
}

/// Random sum of strings that each fit inside R_k consecutive sites per axis,
/// with standard normal coefficients. Used by the verify-norm command and tests.
inline PauliSum random_local_observable(const Lattice& lat, const GeoRange& range, int num_terms,
                                        std::uint64_t seed) {
  range.check_against(lat);
  std::vector<PauliString> pool;
  for (auto& p : enumerate_geo_paulis(lat, range)) {
    const auto sup = p.support();
    bool fits = true;
    for (int k = 0; k < lat.dims() && fits; ++k)
      fits = support_extent(lat, sup, k) <= range.per_axis[k] - 1;
    if (fits) pool.push_back(std::move(p));
  }
  if (pool.empty()) throw ArgumentError("no strings fit the range on this lattice");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::normal_distribution<double> coeff;
  PauliSum o;
  for (int t = 0; t < num_terms; ++t) o.add(pool[pick(rng)], coeff(rng));
  return o;
}

}  // namespace geolearn
