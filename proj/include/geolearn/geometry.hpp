#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "geolearn/errors.hpp"

namespace geolearn {

using Site = int;

// ---------------------------------------------------------------------------
// Lattice
// ---------------------------------------------------------------------------

/// Open-boundary hypercubic lattice. Sites are numbered row-major: the last
/// axis varies fastest, so on a 2x3 lattice site (r, c) has index 3r + c.
class Lattice {
 public:
  Lattice() = default;

  explicit Lattice(std::vector<int> sides) : sides_(std::move(sides)) {
    if (sides_.empty()) throw ArgumentError("lattice needs at least one axis");
    strides_.assign(sides_.size(), 1);
    num_sites_ = 1;
    for (std::size_t k = sides_.size(); k-- > 0;) {
      if (sides_[k] <= 0) throw ArgumentError("lattice side lengths must be positive");
      strides_[k] = num_sites_;
      if (num_sites_ > std::numeric_limits<int>::max() / sides_[k])
        throw CapacityError("lattice too large");
      num_sites_ *= sides_[k];
    }
  }

  int dims() const { return static_cast<int>(sides_.size()); }
  const std::vector<int>& sides() const { return sides_; }
  int side(int axis) const { return sides_.at(axis); }
  int num_sites() const { return num_sites_; }
  int stride(int axis) const { return strides_.at(axis); }

  bool contains(Site s) const { return s >= 0 && s < num_sites_; }

  void check_site(Site s) const {
    if (!contains(s))
      throw ArgumentError(fmt::format("site {} outside lattice of {} sites", s, num_sites_));
  }

  /// Coordinate of `s` along one axis.
  int coord(Site s, int axis) const { return (s / strides_[axis]) % sides_[axis]; }

  std::vector<int> coords(Site s) const {
    check_site(s);
    std::vector<int> c(sides_.size());
    for (int k = 0; k < dims(); ++k) c[k] = coord(s, k);
    return c;
  }

  Site index(std::span<const int> c) const {
    if (static_cast<int>(c.size()) != dims()) throw ArgumentError("coordinate rank mismatch");
    Site s = 0;
    for (int k = 0; k < dims(); ++k) {
      if (c[k] < 0 || c[k] >= sides_[k]) throw ArgumentError("coordinate out of range");
      s += c[k] * strides_[k];
    }
    return s;
  }

  /// Nearest-neighbour bonds (i < j), ordered by i and then by axis.
  std::vector<std::pair<Site, Site>> edges() const {
    std::vector<std::pair<Site, Site>> out;
    for (Site s = 0; s < num_sites_; ++s)
      for (int k = 0; k < dims(); ++k)
        if (coord(s, k) + 1 < sides_[k]) out.emplace_back(s, s + strides_[k]);
    return out;
  }

  /// Largest l1 distance between two sites.
  int diameter() const {
    int d = 0;
    for (int s : sides_) d += s - 1;
    return d;
  }

  friend bool operator==(const Lattice& a, const Lattice& b) { return a.sides_ == b.sides_; }

 private:
  std::vector<int> sides_;
  std::vector<int> strides_;
  int num_sites_ = 0;
};

/// Manhattan distance between two sites.
inline int qubit_distance(const Lattice& lat, Site i, Site j) {
  lat.check_site(i);
  lat.check_site(j);
  int d = 0;
  for (int k = 0; k < lat.dims(); ++k) d += std::abs(lat.coord(i, k) - lat.coord(j, k));
  return d;
}

/// Minimum pairwise qubit distance between two supports.
inline int obs_distance(const Lattice& lat, std::span<const Site> a, std::span<const Site> b) {
  if (a.empty() || b.empty())
    throw ArgumentError("observable distance needs non-empty supports");
  int best = std::numeric_limits<int>::max();
  for (Site i : a)
    for (Site j : b) best = std::min(best, qubit_distance(lat, i, j));
  return best;
}

/// max - min of the support coordinates along `axis`.
inline int support_extent(const Lattice& lat, std::span<const Site> support, int axis) {
  if (support.empty()) return 0;
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (Site s : support) {
    int c = lat.coord(s, axis);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return hi - lo;
}

// ---------------------------------------------------------------------------
// GeoRange
// ---------------------------------------------------------------------------

struct GeoRange {
  std::vector<int> per_axis;

  GeoRange() = default;
  explicit GeoRange(std::vector<int> r) : per_axis(std::move(r)) {
    for (int v : per_axis)
      if (v < 1) throw ArgumentError("range entries must be >= 1");
  }

  /// Same range along every axis of `lat`.
  static GeoRange uniform(const Lattice& lat, int r) {
    return GeoRange(std::vector<int>(lat.dims(), r));
  }

  int dims() const { return static_cast<int>(per_axis.size()); }

  /// R = product of per-axis ranges.
  long long product() const {
    long long r = 1;
    for (int v : per_axis) r *= v;
    return r;
  }

  void check_against(const Lattice& lat) const {
    if (dims() != lat.dims()) throw ArgumentError("range rank does not match lattice");
  }

  /// Extent predicate: max - min of the support along axis k is at most R_k.
  bool admits(const Lattice& lat, std::span<const Site> support) const {
    for (int k = 0; k < dims(); ++k)
      if (support_extent(lat, support, k) > per_axis[k]) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// PauliString
// ---------------------------------------------------------------------------

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char pauli_char(Pauli p) { return "IXYZ"[static_cast<int>(p)]; }

inline Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': case 'i': return Pauli::I;
    case 'X': case 'x': return Pauli::X;
    case 'Y': case 'y': return Pauli::Y;
    case 'Z': case 'z': return Pauli::Z;
  }
  throw ArgumentError(fmt::format("not a Pauli letter: '{}'", c));
}

/// Sparse Pauli word: sorted (site, letter) pairs, identity elsewhere.
class PauliString {
 public:
  using Op = std::pair<Site, Pauli>;

  PauliString() = default;

  PauliString(std::initializer_list<Op> ops) : PauliString(std::vector<Op>(ops)) {}

  explicit PauliString(std::vector<Op> ops) : ops_(std::move(ops)) {
    std::erase_if(ops_, [](const Op& o) { return o.second == Pauli::I; });
    std::sort(ops_.begin(), ops_.end());
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      if (ops_[k].first < 0) throw ArgumentError("negative site in Pauli string");
      if (k > 0 && ops_[k].first == ops_[k - 1].first)
        throw ArgumentError(fmt::format("site {} repeated in Pauli string", ops_[k].first));
    }
  }

  /// Parses "X0 Y3 Z4" (whitespace separated letter+site tokens) or "I".
  static PauliString parse(std::string_view text) {
    std::vector<Op> ops;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
      if (pos >= text.size()) break;
      Pauli p = pauli_from_char(text[pos++]);
      std::size_t start = pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
      if (start == pos) {
        if (p == Pauli::I) continue;
        throw ArgumentError(fmt::format("missing site index in '{}'", text));
      }
      ops.emplace_back(std::stoi(std::string(text.substr(start, pos - start))), p);
    }
    return PauliString(std::move(ops));
  }

  static PauliString single(Site s, Pauli p) { return PauliString({{s, p}}); }

  bool is_identity() const { return ops_.empty(); }
  int weight() const { return static_cast<int>(ops_.size()); }
  const std::vector<Op>& ops() const { return ops_; }

  std::vector<Site> support() const {
    std::vector<Site> s;
    s.reserve(ops_.size());
    for (const auto& o : ops_) s.push_back(o.first);
    return s;
  }

  Pauli at(Site s) const {
    auto it = std::lower_bound(ops_.begin(), ops_.end(), Op{s, Pauli::I});
    return (it != ops_.end() && it->first == s) ? it->second : Pauli::I;
  }

  Site max_site() const { return ops_.empty() ? -1 : ops_.back().first; }

  void check_within(int num_sites) const {
    if (max_site() >= num_sites)
      throw ArgumentError(fmt::format("Pauli string {} exceeds {} qubits", str(), num_sites));
  }

  std::string str() const {
    if (ops_.empty()) return "I";
    std::string out;
    for (const auto& [s, p] : ops_) {
      if (!out.empty()) out += ' ';
      out += pauli_char(p);
      out += std::to_string(s);
    }
    return out;
  }

  /// Canonical order: support sequence first, then the letters.
  friend bool operator<(const PauliString& a, const PauliString& b) {
    const std::size_t n = std::min(a.ops_.size(), b.ops_.size());
    for (std::size_t k = 0; k < n; ++k)
      if (a.ops_[k].first != b.ops_[k].first) return a.ops_[k].first < b.ops_[k].first;
    if (a.ops_.size() != b.ops_.size()) return a.ops_.size() < b.ops_.size();
    for (std::size_t k = 0; k < n; ++k)
      if (a.ops_[k].second != b.ops_[k].second) return a.ops_[k].second < b.ops_[k].second;
    return false;
  }
  friend bool operator==(const PauliString& a, const PauliString& b) { return a.ops_ == b.ops_; }
  friend bool operator!=(const PauliString& a, const PauliString& b) { return !(a == b); }

 private:
  std::vector<Op> ops_;
};

// ---------------------------------------------------------------------------
// S^(geo) enumeration
// ---------------------------------------------------------------------------

namespace detail {

inline void extend_supports(const Lattice& lat, const GeoRange& range,
                            const std::vector<Site>& candidates, std::size_t next,
                            std::vector<Site>& current, int max_weight,
                            const std::function<void(const std::vector<Site>&)>& emit) {
  emit(current);
  if (static_cast<int>(current.size()) >= max_weight) return;
  for (std::size_t k = next; k < candidates.size(); ++k) {
    current.push_back(candidates[k]);
    if (range.admits(lat, current))
      extend_supports(lat, range, candidates, k + 1, current, max_weight, emit);
    current.pop_back();
  }
}

}  // namespace detail

/// All non-identity Pauli strings whose support satisfies the extent
/// predicate of `range`, in canonical order. `max_weight` optionally caps the
/// support size.
inline std::vector<PauliString> enumerate_geo_paulis(const Lattice& lat, const GeoRange& range,
                                                     std::optional<int> max_weight = {}) {
  range.check_against(lat);
  const int cap = max_weight.value_or(std::numeric_limits<int>::max());

  std::vector<PauliString> out;
  auto emit = [&](const std::vector<Site>& support) {
    const int w = static_cast<int>(support.size());
    long long combos = 1;
    for (int i = 0; i < w; ++i) combos *= 3;
    for (long long code = 0; code < combos; ++code) {
      std::vector<PauliString::Op> ops(w);
      long long c = code;
      for (int i = w - 1; i >= 0; --i) {
        ops[i] = {support[i], static_cast<Pauli>(1 + c % 3)};
        c /= 3;
      }
      out.emplace_back(std::move(ops));
    }
  };

  for (Site s0 = 0; s0 < lat.num_sites(); ++s0) {
    std::vector<Site> candidates;
    for (Site t = s0 + 1; t < lat.num_sites(); ++t) {
      bool near = true;
      for (int k = 0; k < lat.dims() && near; ++k)
        near = std::abs(lat.coord(t, k) - lat.coord(s0, k)) <= range.per_axis[k];
      if (near) candidates.push_back(t);
    }
    std::vector<Site> current{s0};
    detail::extend_supports(lat, range, candidates, 0, current, cap, emit);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace geolearn
