#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geolearn/errors.hpp"
#include "geolearn/hamiltonian.hpp"
#include "geolearn/pauli.hpp"

namespace geolearn {

/// T randomized single-qubit Pauli measurements. Each (snapshot, qubit) cell
/// holds a 3-bit code: bits 0-1 the basis (0 = X, 1 = Y, 2 = Z), bit 2 set
/// when the outcome was -1.
struct ShadowSet {
  int num_qubits = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> codes;

  std::size_t size() const {
    return num_qubits ? codes.size() / static_cast<std::size_t>(num_qubits) : 0;
  }
  Pauli basis(std::size_t t, int q) const {
    return static_cast<Pauli>(1 + (codes[t * num_qubits + q] & 3));
  }
  int outcome(std::size_t t, int q) const { return (codes[t * num_qubits + q] & 4) ? -1 : 1; }

  /// First `count` snapshots.
  ShadowSet prefix(std::size_t count) const {
    if (count > size()) throw ArgumentError("shadow prefix longer than the shadow");
    ShadowSet out{num_qubits, seed, {}};
    out.codes.assign(codes.begin(), codes.begin() + count * num_qubits);
    return out;
  }

  friend bool operator==(const ShadowSet&, const ShadowSet&) = default;
};

inline std::uint8_t shadow_code(Pauli basis, int outcome) {
  return static_cast<std::uint8_t>((static_cast<int>(basis) - 1) | (outcome < 0 ? 4 : 0));
}

namespace detail {

/// Rotates qubit q so that the +1 eigenvector of `basis` maps to |0>.
/// X: H.  Y: H S^dagger.
inline void rotate_to_z(VectorXc& psi, int q, Pauli basis) {
  if (basis == Pauli::Z) return;
  const double r = 1.0 / std::sqrt(2.0);
  const std::uint64_t bit = std::uint64_t{1} << q;
  const Complex phase1 = basis == Pauli::Y ? Complex(0.0, -1.0) : Complex(1.0, 0.0);
  const std::uint64_t dim = static_cast<std::uint64_t>(psi.size());
  for (std::uint64_t b = 0; b < dim; ++b) {
    if (b & bit) continue;
    const Complex a0 = psi[b];
    const Complex a1 = phase1 * psi[b | bit];
    psi[b] = r * (a0 + a1);
    psi[b | bit] = r * (a0 - a1);
  }
}

}  // namespace detail

/// Samples T snapshots with exact Born probabilities. The RNG is consumed in a
/// fixed pattern per snapshot (state pick, n basis draws, one outcome draw), so
/// sample_shadow(gs, T', seed) is a prefix of sample_shadow(gs, T, seed) for T' < T.
inline ShadowSet sample_shadow(const GroundStateResult& gs, std::size_t count, std::uint64_t seed) {
  const int n = gs.num_qubits;
  checked_dim(n, kMaxSparseQubits);
  if (count < 1) throw ArgumentError("shadow size must be at least 1");
  ShadowSet sh{n, seed, {}};
  sh.codes.resize(count * static_cast<std::size_t>(n));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> basis_dist(0, 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> cdf(dim);
  VectorXc psi;

  for (std::size_t t = 0; t < count; ++t) {
    const double pick = unif(rng);
    std::array<Pauli, 64> bases{};
    for (int q = 0; q < n; ++q) bases[q] = static_cast<Pauli>(1 + basis_dist(rng));
    const double u = unif(rng);

    std::uint64_t outcome_bits = 0;
    if (gs.maximally_mixed) {
      // Uniform outcomes: reuse u as a source of n fair bits.
      outcome_bits = static_cast<std::uint64_t>(u * static_cast<double>(dim));
      outcome_bits = std::min<std::uint64_t>(outcome_bits, dim - 1);
    } else {
      const std::size_t which =
          std::min(gs.span.size() - 1, static_cast<std::size_t>(pick * gs.span.size()));
      psi = gs.span[which];
      for (int q = 0; q < n; ++q) detail::rotate_to_z(psi, q, bases[q]);
      double acc = 0.0;
      for (std::size_t b = 0; b < dim; ++b) {
        acc += std::norm(psi[b]);
        cdf[b] = acc;
      }
      const double target = u * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
      outcome_bits = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), dim - 1));
    }
    for (int q = 0; q < n; ++q)
      sh.codes[t * n + q] = shadow_code(bases[q], ((outcome_bits >> q) & 1) ? -1 : 1);
  }
  return sh;
}

inline constexpr int kMaxShadowWeight = 4;

/// Per-snapshot estimates of Tr(P rho): product of 3 * outcome over the
/// support when every basis matches, else 0.
inline std::vector<double> snapshot_estimates(const ShadowSet& sh, const PauliString& p) {
  if (p.is_identity()) throw ArgumentError("shadow estimator needs a non-identity Pauli");
  if (p.weight() > kMaxShadowWeight)
    throw ArgumentError(fmt::format("Pauli weight {} exceeds the shadow estimator cap of {}",
                                    p.weight(), kMaxShadowWeight));
  p.check_within(sh.num_qubits);
  std::vector<double> out(sh.size());
  for (std::size_t t = 0; t < sh.size(); ++t) {
    double v = 1.0;
    for (const auto& [q, l] : p.ops()) {
      if (sh.basis(t, q) != l) {
        v = 0.0;
        break;
      }
      v *= 3.0 * sh.outcome(t, q);
    }
    out[t] = v;
  }
  return out;
}

inline double estimate_pauli(const ShadowSet& sh, const PauliString& p) {
  const auto est = snapshot_estimates(sh, p);
  if (est.empty()) throw ArgumentError("empty shadow");
  double acc = 0.0;
  for (double v : est) acc += v;
  return acc / static_cast<double>(est.size());
}

/// Median over `batches` contiguous batch means.
inline double estimate_pauli_median_of_means(const ShadowSet& sh, const PauliString& p,
                                             std::size_t batches) {
  const auto est = snapshot_estimates(sh, p);
  if (batches < 1 || batches > est.size())
    throw ArgumentError("median-of-means needs 1 <= batches <= T");
  std::vector<double> means(batches);
  const std::size_t per = est.size() / batches;
  for (std::size_t k = 0; k < batches; ++k) {
    const std::size_t lo = k * per, hi = (k + 1 == batches) ? est.size() : lo + per;
    double acc = 0.0;
    for (std::size_t t = lo; t < hi; ++t) acc += est[t];
    means[k] = acc / static_cast<double>(hi - lo);
  }
  std::sort(means.begin(), means.end());
  return batches % 2 ? means[batches / 2] : 0.5 * (means[batches / 2 - 1] + means[batches / 2]);
}

inline double estimate_observable(const ShadowSet& sh, const PauliSum& op) {
  double acc = 0.0;
  for (const auto& [p, c] : op) acc += c * estimate_pauli(sh, p);
  return acc;
}

// ---------------------------------------------------------------------------
// Files
//
// Binary layout (little-endian):
//   magic "GLSHADOW" | u32 version = 1 | u32 n | u64 T | u64 seed
//   T records of ceil(3n / 8) bytes; qubit q occupies bits [3q, 3q+3) of the
//   record, least-significant bit first.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw ArgumentError("truncated shadow file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_shadow_binary(const ShadowSet& sh, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os.write("GLSHADOW", 8);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(sh.num_qubits));
  detail::put_le<std::uint64_t>(os, sh.size());
  detail::put_le<std::uint64_t>(os, sh.seed);
  const std::size_t rec = (3 * static_cast<std::size_t>(sh.num_qubits) + 7) / 8;
  std::vector<unsigned char> buf(rec);
  for (std::size_t t = 0; t < sh.size(); ++t) {
    std::fill(buf.begin(), buf.end(), 0);
    for (int q = 0; q < sh.num_qubits; ++q) {
      const unsigned code = sh.codes[t * sh.num_qubits + q];
      for (int b = 0; b < 3; ++b)
        if (code & (1u << b)) {
          const std::size_t bit = 3 * static_cast<std::size_t>(q) + b;
          buf[bit / 8] |= static_cast<unsigned char>(1u << (bit % 8));
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(rec));
  }
}

inline ShadowSet read_shadow_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "GLSHADOW", 8) != 0) throw ArgumentError("not a shadow file");
  if (detail::get_le<std::uint32_t>(is) != 1) throw ArgumentError("unsupported shadow file version");
  ShadowSet sh;
  sh.num_qubits = static_cast<int>(detail::get_le<std::uint32_t>(is));
  const auto count = detail::get_le<std::uint64_t>(is);
  sh.seed = detail::get_le<std::uint64_t>(is);
  const std::size_t rec = (3 * static_cast<std::size_t>(sh.num_qubits) + 7) / 8;
  std::vector<unsigned char> buf(rec);
  sh.codes.resize(count * sh.num_qubits);
  for (std::size_t t = 0; t < count; ++t) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rec));
    if (!is) throw ArgumentError("truncated shadow file");
    for (int q = 0; q < sh.num_qubits; ++q) {
      unsigned code = 0;
      for (int b = 0; b < 3; ++b) {
        const std::size_t bit = 3 * static_cast<std::size_t>(q) + b;
        if (buf[bit / 8] & (1u << (bit % 8))) code |= 1u << b;
      }
      if ((code & 3) == 3) throw ArgumentError("invalid basis code in shadow file");
      sh.codes[t * sh.num_qubits + q] = static_cast<std::uint8_t>(code);
    }
  }
  return sh;
}

/// CSV: snapshot_id,qubit,basis,outcome (one row per qubit).
inline void write_shadow_csv(const ShadowSet& sh, std::ostream& os) {
  os << "# geolearn shadow v1 n=" << sh.num_qubits << " T=" << sh.size() << " seed=" << sh.seed
     << "\n";
  os << "snapshot_id,qubit,basis,outcome\n";
  for (std::size_t t = 0; t < sh.size(); ++t)
    for (int q = 0; q < sh.num_qubits; ++q)
      os << t << ',' << q << ',' << pauli_char(sh.basis(t, q)) << ',' << sh.outcome(t, q) << '\n';
}

inline ShadowSet read_shadow_csv(std::istream& is) {
  std::string line;
  std::getline(is, line);
  ShadowSet sh;
  long long count = -1;
  {
    std::istringstream hs(line);
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("n=", 0) == 0) sh.num_qubits = std::stoi(tok.substr(2));
      else if (tok.rfind("T=", 0) == 0) count = std::stoll(tok.substr(2));
      else if (tok.rfind("seed=", 0) == 0) sh.seed = std::stoull(tok.substr(5));
    }
  }
  if (sh.num_qubits <= 0 || count < 0) throw ArgumentError("bad shadow CSV header");
  std::getline(is, line);
  sh.codes.assign(static_cast<std::size_t>(count) * sh.num_qubits, 0xff);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(ls, s, ',')) throw ArgumentError("bad shadow CSV row: " + line);
    const auto t = std::stoull(f[0]);
    const int q = std::stoi(f[1]);
    if (t >= static_cast<std::uint64_t>(count) || q < 0 || q >= sh.num_qubits || f[2].size() != 1)
      throw ArgumentError("shadow CSV row out of range: " + line);
    const Pauli b = pauli_from_char(f[2][0]);
    if (b == Pauli::I) throw ArgumentError("identity basis in shadow CSV");
    sh.codes[t * sh.num_qubits + q] = shadow_code(b, std::stoi(f[3]));
  }
  for (auto c : sh.codes)
    if (c == 0xff) throw ArgumentError("shadow CSV is missing cells");
  return sh;
}

}  // namespace geolearn
