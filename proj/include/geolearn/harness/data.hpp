#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolearn/hamiltonian.hpp"
#include "geolearn/harness/config.hpp"
#include "geolearn/harness/io.hpp"
#include "geolearn/harness/parallel.hpp"
#include "geolearn/harness/seeds.hpp"
#include "geolearn/shadows.hpp"

namespace geolearn::harness {

/// M sampled Hamiltonians with exact edge-correlation labels and, optionally,
/// one classical shadow per instance.
struct InstanceSet {
  ParamHamiltonian family;
  std::vector<std::pair<Site, Site>> edges;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> couplings;
  /// exact(l, e) = Tr(C_e rho(x_l)).
  Eigen::MatrixXd exact;
  std::vector<ShadowSet> shadows;

  int size() const { return static_cast<int>(couplings.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  std::vector<double> unit(int l) const { return couplings_to_unit(couplings[l]); }
};

inline std::vector<PauliSum> edge_observables(const std::vector<std::pair<Site, Site>>& edges) {
  std::vector<PauliSum> out;
  for (const auto& [i, j] : edges) out.push_back(correlation_observable(i, j));
  return out;
}

/// Instance l uses seed derive_seed(master, instances, l); its shadow uses
/// derive_seed(master, shadows, l). shadow_size = 0 skips shadows.
inline InstanceSet generate_instances(const ParamHamiltonian& h, int M, std::uint64_t master,
                                      int shadow_size, int workers = 1,
                                      const GroundStateOptions& gopt = {}) {
  if (M < 1) throw ArgumentError("need at least one instance");
  InstanceSet s;
  s.family = h;
  s.edges = h.lattice.edges();
  s.seeds.resize(M);
  s.couplings.resize(M);
  s.exact.resize(M, s.num_edges());
  if (shadow_size > 0) s.shadows.resize(M);
  const auto obs = edge_observables(s.edges);
  parallel_for(M, workers, [&](std::size_t l) {
    s.seeds[l] = derive_seed(master, Stream::instances, l);
    s.couplings[l] = sample_instance(h, s.seeds[l]);
    GroundStateOptions o = gopt;
    o.lanczos.seed = mix_seed(s.seeds[l], 0x1a2c);
    const auto gs = ground_state(h, s.couplings[l], o);
    for (int e = 0; e < s.num_edges(); ++e) s.exact(l, e) = expectation(gs, obs[e]);
    if (shadow_size > 0)
      s.shadows[l] = sample_shadow(gs, shadow_size, derive_seed(master, Stream::shadows, l));
  });
  return s;
}

/// Shadow estimates of every edge correlation from the first T snapshots.
inline Eigen::MatrixXd shadow_labels(const InstanceSet& s, std::size_t T) {
  if (s.shadows.empty()) throw ArgumentError("instance set has no shadows");
  const auto obs = edge_observables(s.edges);
  Eigen::MatrixXd y(s.size(), s.num_edges());
  for (int l = 0; l < s.size(); ++l) {
    const ShadowSet pre = s.shadows[l].prefix(T);
    for (int e = 0; e < s.num_edges(); ++e) y(l, e) = estimate_observable(pre, obs[e]);
  }
  return y;
}

/// Seeded permutation of instance indices; training sets are its prefixes.
inline std::vector<int> split_order(int M, std::uint64_t master) {
  std::vector<int> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(derive_seed(master, Stream::split));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

inline Split make_split(const std::vector<int>& order, int N) {
  if (N < 1 || N >= static_cast<int>(order.size()))
    throw ConfigError("training size must leave a non-empty test split");
  Split s;
  s.train.assign(order.begin(), order.begin() + N);
  s.test.assign(order.begin() + N, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  std::vector<int> both;
  std::set_intersection(s.train.begin(), s.train.end(), s.test.begin(), s.test.end(),
                        std::back_inserter(both));
  if (!both.empty()) throw NumericError("train and test splits overlap");
  return s;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string lattice_name(const std::vector<int>& sides) {
  std::string s;
  for (std::size_t i = 0; i < sides.size(); ++i) s += (i ? "x" : "") + std::to_string(sides[i]);
  return s;
}

inline std::filesystem::path shadow_path(const std::filesystem::path& dir, int l) {
  return dir / "shadows" / fmt::format("instance_{:05d}.bin", l);
}

/// instances.csv, labels.csv, split.csv and shadows/instance_XXXXX.bin.
inline void write_instances(const std::filesystem::path& dir, const InstanceSet& s, const Split& split) {
  std::vector<std::string> cols{"instance", "seed"};
  for (int c = 0; c < s.family.num_params; ++c) cols.push_back(fmt::format("J_{}", c));
  CsvWriter inst("instances", cols);
  for (int l = 0; l < s.size(); ++l) {
    std::vector<std::string> row{std::to_string(l), std::to_string(s.seeds[l])};
    for (double v : s.couplings[l]) row.push_back(num(v));
    inst.row(row);
  }
  write_file(dir / "instances.csv", inst.str());

  CsvWriter labels("labels", {"instance", "edge", "i", "j", "exact"});
  for (int l = 0; l < s.size(); ++l)
    for (int e = 0; e < s.num_edges(); ++e)
      labels.row({std::to_string(l), std::to_string(e), std::to_string(s.edges[e].first),
                  std::to_string(s.edges[e].second), num(s.exact(l, e))});
  write_file(dir / "labels.csv", labels.str());

  CsvWriter sp("split", {"instance", "role"});
  std::vector<std::string> role(s.size());
  for (int l : split.train) role[l] = "train";
  for (int l : split.test) role[l] = "test";
  for (int l = 0; l < s.size(); ++l) sp.row({std::to_string(l), role[l]});
  write_file(dir / "split.csv", sp.str());

  for (int l = 0; l < static_cast<int>(s.shadows.size()); ++l) {
    std::filesystem::create_directories(dir / "shadows");
    write_shadow_binary(s.shadows[l], shadow_path(dir, l));
  }
}

/// Reads back what write_instances produced for the family `h`.
inline std::pair<InstanceSet, Split> read_instances(const std::filesystem::path& dir,
                                                    const ParamHamiltonian& h) {
  InstanceSet s;
  s.family = h;
  s.edges = h.lattice.edges();
  const CsvTable inst = read_csv(dir / "instances.csv", "instances");
  if (static_cast<int>(inst.columns.size()) != 2 + h.num_params)
    throw ConfigError("instances.csv does not match the configured lattice");
  for (const auto& r : inst.rows) {
    s.seeds.push_back(std::stoull(r[1]));
    std::vector<double> j;
    for (int c = 0; c < h.num_params; ++c) j.push_back(std::stod(r[2 + c]));
    s.couplings.push_back(std::move(j));
  }
  s.exact = Eigen::MatrixXd::Constant(s.size(), s.num_edges(), std::nan(""));
  const CsvTable lab = read_csv(dir / "labels.csv", "labels");
  for (const auto& r : lab.rows) {
    const int l = std::stoi(r[0]), e = std::stoi(r[1]);
    if (l < 0 || l >= s.size() || e < 0 || e >= s.num_edges()) throw ArgumentError("labels.csv index out of range");
    s.exact(l, e) = std::stod(r[4]);
  }
  if (!s.exact.allFinite()) throw ArgumentError("labels.csv is missing entries");
  Split split;
  const CsvTable sp = read_csv(dir / "split.csv", "split");
  for (const auto& r : sp.rows) (r[1] == "train" ? split.train : split.test).push_back(std::stoi(r[0]));
  if (std::filesystem::exists(dir / "shadows"))
    for (int l = 0; l < s.size(); ++l) s.shadows.push_back(read_shadow_binary(shadow_path(dir, l)));
  return {std::move(s), std::move(split)};
}

}  // namespace geolearn::harness
