#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geolearn/errors.hpp"
#include "geolearn/geometry.hpp"
#include "geolearn/hamiltonian.hpp"

namespace geolearn {

// ---------------------------------------------------------------------------
// Coordinate sets and restriction
// ---------------------------------------------------------------------------

/// Parameter coordinates whose owning term lies within delta1 of a Pauli string.
struct CoordinateSet {
  PauliString pauli;
  std::vector<int> coords;
};

inline CoordinateSet compute_IP(const ParamHamiltonian& h, const PauliString& p, double delta1) {
  if (p.is_identity()) throw ArgumentError("I_P is undefined for the identity");
  p.check_within(h.num_qubits());
  const auto psupp = p.support();
  CoordinateSet out{p, {}};
  for (const auto& t : h.terms)
    if (obs_distance(h.lattice, t.support, psupp) <= delta1)
      out.coords.insert(out.coords.end(), t.params.begin(), t.params.end());
  std::sort(out.coords.begin(), out.coords.end());
  return out;
}

/// chi_P: copy of x on the coordinates in `coords`, zero elsewhere.
inline std::vector<double> restrict_chi(std::span<const double> x, std::span<const int> coords) {
  std::vector<double> out(x.size(), 0.0);
  for (int c : coords) {
    if (c < 0 || static_cast<std::size_t>(c) >= x.size())
      throw ArgumentError("restriction coordinate out of range");
    out[c] = x[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discretisation grid X_P
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kMaxGridCells = std::uint64_t{1} << 48;

/// Returns K = 1/delta2 after checking that it is a positive integer.
inline int grid_half_levels(double delta2) {
  if (!(delta2 > 0.0) || delta2 > 1.0) throw ArgumentError("delta2 must lie in (0, 1]");
  const double inv = 1.0 / delta2;
  const double k = std::round(inv);
  if (std::abs(inv - k) > 1e-9 * k) throw ArgumentError("1/delta2 must be an integer");
  return static_cast<int>(k);
}

/// Half-open cell membership: -delta2/2 < g - v <= delta2/2.
inline bool in_cell(double grid_value, double v, double delta2) {
  const double diff = grid_value - v;
  return -delta2 / 2 < diff && diff <= delta2 / 2;
}

/// Implicit X_P: vectors zero outside `coords` with entries in
/// {0, +-delta2, ..., +-1} on `coords`. Cells are indexed in mixed radix
/// (2K+1) with the first coordinate least significant; digit d stands for
/// the value (d - K) * delta2.
struct GridSpec {
  std::vector<int> coords;
  double delta2 = 1.0;
  int half_levels = 1;
  std::uint64_t size = 1;

  int radix() const { return 2 * half_levels + 1; }

  double level_value(int digit) const { return (digit - half_levels) * delta2; }

  /// Grid values on `coords` for cell `index`.
  std::vector<double> decode(std::uint64_t index) const {
    if (index >= size) throw ArgumentError("grid index out of range");
    std::vector<double> v(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      v[i] = level_value(static_cast<int>(index % radix()));
      index /= radix();
    }
    return v;
  }

  /// Full-length grid point x' (zero outside coords).
  std::vector<double> point(std::uint64_t index, int num_params) const {
    std::vector<double> x(num_params, 0.0);
    const auto v = decode(index);
    for (std::size_t i = 0; i < coords.size(); ++i) x[coords[i]] = v[i];
    return x;
  }

  std::uint64_t encode(std::span<const int> digits) const {
    std::uint64_t idx = 0;
    for (std::size_t i = digits.size(); i-- > 0;) idx = idx * radix() + digits[i];
    return idx;
  }

  /// x in T_{x', P} for the cell x' = decode(index).
  bool contains(std::uint64_t index, std::span<const double> x) const {
    const auto v = decode(index);
    for (std::size_t i = 0; i < coords.size(); ++i)
      if (!in_cell(v[i], x[coords[i]], delta2)) return false;
    return true;
  }
};

inline GridSpec build_XP(const CoordinateSet& ip, double delta2) {
  GridSpec g;
  g.coords = ip.coords;
  g.delta2 = delta2;
  g.half_levels = grid_half_levels(delta2);
  const std::uint64_t r = static_cast<std::uint64_t>(g.radix());
  g.size = 1;
  for (std::size_t i = 0; i < g.coords.size(); ++i) {
    if (g.size > kMaxGridCells / r)
      throw CapacityError(fmt::format(
          "|X_P| = {}^{} exceeds 2^48 cells; use a larger delta2 or a smaller delta1", r,
          g.coords.size()));
    g.size *= r;
  }
  return g;
}

/// The unique cell of X_P whose thickened set contains x.
inline std::uint64_t cell_of(std::span<const double> x, const GridSpec& g) {
  std::vector<int> digits(g.coords.size());
  for (std::size_t i = 0; i < g.coords.size(); ++i) {
    const int c = g.coords[i];
    if (c < 0 || static_cast<std::size_t>(c) >= x.size())
      throw ArgumentError("grid coordinate outside the parameter vector");
    const double v = x[c];
    if (!(v >= -1.0 && v <= 1.0)) throw ArgumentError("cell_of expects x in [-1, 1]^m");
    int k = static_cast<int>(std::floor(v / g.delta2 + 0.5));
    k = std::clamp(k, -g.half_levels, g.half_levels);
    // Settle floating-point ties with the membership predicate itself.
    if (!in_cell(k * g.delta2, v, g.delta2)) {
      if (k > -g.half_levels && in_cell((k - 1) * g.delta2, v, g.delta2)) --k;
      else if (k < g.half_levels && in_cell((k + 1) * g.delta2, v, g.delta2)) ++k;
    }
    digits[i] = k + g.half_levels;
  }
  return g.encode(digits);
}

// ---------------------------------------------------------------------------
// Indicator feature map phi
// ---------------------------------------------------------------------------

/// Sparse 0/1 vector given by the positions of its ones (sorted).
struct SparseFeature {
  std::uint64_t dim = 0;
  std::vector<std::uint64_t> ones;
};

struct IndicatorEntry {
  CoordinateSet ip;
  GridSpec grid;
  std::uint64_t offset = 0;
};

struct IndicatorOptions {
  double delta1 = 0.0;
  double delta2 = 0.5;
  GeoRange range;
  std::optional<int> max_weight;
  /// When set, delta2 is chosen per Pauli from (eps1, C') with the theory helper.
  std::optional<std::pair<double, double>> per_pauli_delta2;
};

inline double theory_delta2(double eps1, double c_prime, std::size_t ip_size);

class IndicatorFeatureMap {
 public:
  IndicatorFeatureMap() = default;

  /// Map over all of S^(geo) for `opt.range` (the family range when unset).
  IndicatorFeatureMap(const ParamHamiltonian& h, const IndicatorOptions& opt)
      : IndicatorFeatureMap(h, opt,
                            enumerate_geo_paulis(h.lattice,
                                                 opt.range.per_axis.empty() ? h.range : opt.range,
                                                 opt.max_weight)) {}

  /// Map over an explicit list of Pauli strings.
  IndicatorFeatureMap(const ParamHamiltonian& h, const IndicatorOptions& opt,
                      const std::vector<PauliString>& paulis)
      : options_(opt), num_params_(h.num_params) {
    grid_half_levels(opt.delta2);
    std::uint64_t offset = 0;
    for (const auto& p : paulis) {
      IndicatorEntry e;
      e.ip = compute_IP(h, p, opt.delta1);
      const double d2 = opt.per_pauli_delta2
                            ? theory_delta2(opt.per_pauli_delta2->first,
                                            opt.per_pauli_delta2->second, e.ip.coords.size())
                            : opt.delta2;
      e.grid = build_XP(e.ip, d2);
      e.offset = offset;
      if (offset > (std::uint64_t{1} << 62) - e.grid.size)
        throw CapacityError("total feature dimension m_phi overflows");
      offset += e.grid.size;
      entries_.push_back(std::move(e));
    }
    m_phi_ = offset;
  }

  std::uint64_t m_phi() const { return m_phi_; }
  int num_params() const { return num_params_; }
  const std::vector<IndicatorEntry>& entries() const { return entries_; }
  const IndicatorOptions& options() const { return options_; }

  /// Entry owning global feature index `k`.
  const IndicatorEntry& entry_of(std::uint64_t k) const {
    if (k >= m_phi_) throw ArgumentError("feature index out of range");
    auto it = std::upper_bound(entries_.begin(), entries_.end(), k,
                               [](std::uint64_t v, const IndicatorEntry& e) { return v < e.offset; });
    return *std::prev(it);
  }

  SparseFeature operator()(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != num_params_)
      throw ArgumentError("parameter vector length does not match the feature map");
    SparseFeature f{m_phi_, {}};
    f.ones.reserve(entries_.size());
    for (const auto& e : entries_) f.ones.push_back(e.offset + cell_of(x, e.grid));
    return f;
  }

 private:
  IndicatorOptions options_;
  int num_params_ = 0;
  std::vector<IndicatorEntry> entries_;
  std::uint64_t m_phi_ = 0;
};

inline SparseFeature phi_indicator(const IndicatorFeatureMap& fm, std::span<const double> x) {
  return fm(x);
}

// ---------------------------------------------------------------------------
// Theory-facing hyperparameter helpers
// ---------------------------------------------------------------------------

/// delta1 = C_max * log^2(2C / eps1).
inline double theory_delta1(double eps1, double c_max, double c) {
  if (!(eps1 > 0.0)) throw ArgumentError("eps1 must be positive");
  const double l = std::log(2.0 * c / eps1);
  return c_max * l * l;
}

/// delta2 = 1 / ceil(2 sqrt(C' |I_P|) / eps1).
inline double theory_delta2(double eps1, double c_prime, std::size_t ip_size) {
  if (!(eps1 > 0.0)) throw ArgumentError("eps1 must be positive");
  const double k = std::ceil(2.0 * std::sqrt(c_prime * static_cast<double>(ip_size)) / eps1);
  return 1.0 / std::max(1.0, k);
}

/// ||w'||_1 <= max_P |X_P| * sum_Q |alpha_Q|.
inline double w_prime_norm_bound(const IndicatorFeatureMap& fm, double pauli_one_norm) {
  std::uint64_t biggest = 0;
  for (const auto& e : fm.entries()) biggest = std::max(biggest, e.grid.size);
  return static_cast<double>(biggest) * pauli_one_norm;
}

// ---------------------------------------------------------------------------
// Random Fourier features
// ---------------------------------------------------------------------------

/// For each term j: the coordinates of terms within delta1 of h_j.
inline std::vector<std::vector<int>> local_regions(const ParamHamiltonian& h, double delta1) {
  std::vector<std::vector<int>> regions;
  for (const auto& center : h.terms) {
    std::vector<int> coords;
    for (const auto& t : h.terms)
      if (obs_distance(h.lattice, t.support, center.support) <= delta1)
        coords.insert(coords.end(), t.params.begin(), t.params.end());
    std::sort(coords.begin(), coords.end());
    regions.push_back(std::move(coords));
  }
  return regions;
}

/// splitmix64 finaliser; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RffOptions {
  double delta1 = 1.0;
  int num_frequencies = 10;
  double gamma = 0.5;
  std::uint64_t seed = 0;
};

/// Region-wise random Fourier features. Region r draws its frequencies from
/// an mt19937_64 seeded with mix_seed(seed, r), row by row, so the first R
/// frequencies are shared by every map with the same seed and R' >= R.
class RffMap {
 public:
  RffMap() = default;

  RffMap(const ParamHamiltonian& h, const RffOptions& opt)
      : RffMap(local_regions(h, opt.delta1), h.num_params, opt) {}

  RffMap(std::vector<std::vector<int>> regions, int num_params, const RffOptions& opt)
      : options_(opt), num_params_(num_params), regions_(std::move(regions)) {
    if (opt.num_frequencies < 1) throw ArgumentError("RFF needs at least one frequency");
    if (!(opt.gamma > 0.0)) throw ArgumentError("RFF bandwidth must be positive");
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      for (int c : regions_[r])
        if (c < 0 || c >= num_params_) throw ArgumentError("RFF region coordinate out of range");
      std::mt19937_64 rng(mix_seed(opt.seed, r));
      std::normal_distribution<double> gauss;
      Eigen::MatrixXd w(opt.num_frequencies, regions_[r].size());
      for (int i = 0; i < w.rows(); ++i)
        for (int c = 0; c < w.cols(); ++c) w(i, c) = gauss(rng);
      omegas_.push_back(std::move(w));
    }
  }

  std::size_t dim() const { return 2 * options_.num_frequencies * regions_.size(); }
  int num_params() const { return num_params_; }
  const std::vector<std::vector<int>>& regions() const { return regions_; }
  const Eigen::MatrixXd& omega(std::size_t r) const { return omegas_.at(r); }
  const RffOptions& options() const { return options_; }

  /// Region that produced feature k.
  std::size_t region_of(std::size_t k) const { return k / (2 * options_.num_frequencies); }

  Eigen::VectorXd operator()(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != num_params_)
      throw ArgumentError("parameter vector length does not match the RFF map");
    Eigen::VectorXd out(dim());
    std::size_t k = 0;
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      const auto& reg = regions_[r];
      Eigen::VectorXd z(reg.size());
      for (std::size_t c = 0; c < reg.size(); ++c) z[c] = x[reg[c]];
      const double scale = reg.empty() ? 0.0 : options_.gamma / std::sqrt(double(reg.size()));
      for (int i = 0; i < options_.num_frequencies; ++i) {
        const double arg = scale * omegas_[r].row(i).dot(z);
        out[k++] = std::cos(arg);
        out[k++] = std::sin(arg);
      }
    }
    return out;
  }

 private:
  RffOptions options_;
  int num_params_ = 0;
  std::vector<std::vector<int>> regions_;
  std::vector<Eigen::MatrixXd> omegas_;
};

inline Eigen::VectorXd phi_rff(const RffMap& rff, std::span<const double> x) { return rff(x); }

}  // namespace geolearn
