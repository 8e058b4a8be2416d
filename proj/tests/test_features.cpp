#include <gtest/gtest.h>

#include <random>
#include <set>

#include "geolearn/features.hpp"

using namespace geolearn;

namespace {

std::vector<double> random_unit(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(m);
  for (double& v : x) v = u(rng);
  return x;
}

CoordinateSet coords_of(std::vector<int> c) { return CoordinateSet{PauliString::parse("Z0"), std::move(c)}; }

}  // namespace

TEST(ComputeIP, DistanceZeroOnChain) {
  auto h = build_heisenberg(Lattice({5}));
  const auto ip = compute_IP(h, PauliString::parse("X1 X2"), 0.0);
  EXPECT_EQ(ip.coords, (std::vector<int>{0, 1, 2}));
  const auto single = compute_IP(h, PauliString::parse("Z0"), 0.0);
  EXPECT_EQ(single.coords, (std::vector<int>{0}));
}

TEST(ComputeIP, MatchesExhaustiveScan) {
  auto h = build_heisenberg(Lattice({2, 3}));
  const auto edges = h.lattice.edges();
  for (const auto& p : enumerate_geo_paulis(h.lattice, h.range, 2))
    for (double d1 : {0.0, 1.0, 1.5, 2.0}) {
      std::vector<int> expected;
      for (int c = 0; c < h.num_params; ++c) {
        int best = 100;
        for (Site s : p.support())
          for (Site e : {edges[c].first, edges[c].second}) best = std::min(best, qubit_distance(h.lattice, s, e));
        if (best <= d1) expected.push_back(c);
      }
      EXPECT_EQ(compute_IP(h, p, d1).coords, expected) << p.str() << " delta1=" << d1;
    }
}

TEST(ComputeIP, MonotoneAndSaturates) {
  auto h = build_heisenberg(Lattice({2, 3}));
  for (const auto& p : enumerate_geo_paulis(h.lattice, h.range, 2)) {
    std::size_t prev = 0;
    for (int d1 = 0; d1 <= h.lattice.diameter(); ++d1) {
      const auto n = compute_IP(h, p, d1).coords.size();
      EXPECT_GE(n, prev);
      prev = n;
    }
    EXPECT_EQ(prev, std::size_t(h.num_params));
  }
  EXPECT_THROW(compute_IP(h, PauliString{}, 1.0), ArgumentError);
}

TEST(RestrictChi, Projection) {
  std::vector<double> x{0.1, -0.2, 0.3, 0.4};
  std::vector<int> all{0, 1, 2, 3}, none, some{1, 3};
  EXPECT_EQ(restrict_chi(x, all), x);
  EXPECT_EQ(restrict_chi(x, none), std::vector<double>(4, 0.0));
  const auto once = restrict_chi(x, some);
  EXPECT_EQ(once, (std::vector<double>{0.0, -0.2, 0.0, 0.4}));
  EXPECT_EQ(restrict_chi(once, some), once);
  std::vector<int> bad{4};
  EXPECT_THROW(restrict_chi(x, bad), ArgumentError);
}

TEST(BuildXP, SizesAndValues) {
  const auto g = build_XP(coords_of({0}), 0.5);
  EXPECT_EQ(g.size, 5u);
  std::set<double> values;
  for (std::uint64_t k = 0; k < g.size; ++k) values.insert(g.decode(k)[0]);
  EXPECT_EQ(values, (std::set<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));
  EXPECT_EQ(build_XP(coords_of({0, 3}), 0.5).size, 25u);
  EXPECT_EQ(build_XP(coords_of({}), 0.25).size, 1u);
  EXPECT_THROW(build_XP(coords_of({0}), 0.3), ArgumentError);
  EXPECT_THROW(build_XP(coords_of({0}), 0.0), ArgumentError);
  EXPECT_THROW(build_XP(coords_of({0}), 1.5), ArgumentError);
}

TEST(BuildXP, SizeMatchesEnumeration) {
  for (double d2 : {1.0, 0.5, 0.25})
    for (int k = 0; k <= 3; ++k) {
      std::vector<int> c(k);
      for (int i = 0; i < k; ++i) c[i] = 2 * i;
      const auto g = build_XP(coords_of(c), d2);
      std::set<std::vector<double>> points;
      for (std::uint64_t idx = 0; idx < g.size; ++idx) {
        const auto p = g.point(idx, 6);
        for (int i = 0; i < 6; ++i)
          if (std::find(c.begin(), c.end(), i) == c.end()) {
            EXPECT_EQ(p[i], 0.0);
          }
        points.insert(p);
      }
      // Independent count of {0, +-d2, ..., +-1}^k.
      std::uint64_t expected = 1;
      for (int i = 0; i < k; ++i) expected *= std::uint64_t(std::lround(2.0 / d2)) + 1;
      EXPECT_EQ(points.size(), expected);
      EXPECT_EQ(g.size, expected);
    }
}

TEST(BuildXP, CapacityGuard) {
  std::vector<int> c(20);
  for (int i = 0; i < 20; ++i) c[i] = i;
  EXPECT_THROW(build_XP(coords_of(c), 0.25), CapacityError);
}

TEST(CellOf, Examples) {
  const auto g = build_XP(coords_of({0}), 0.5);
  std::vector<double> x{0.6};
  EXPECT_EQ(g.decode(cell_of(x, g))[0], 0.5);
  x[0] = 0.75;
  EXPECT_EQ(g.decode(cell_of(x, g))[0], 1.0);
  x[0] = 0.0;
  EXPECT_EQ(g.decode(cell_of(x, g))[0], 0.0);
  x[0] = -1.0;
  EXPECT_EQ(g.decode(cell_of(x, g))[0], -1.0);
  x[0] = -0.75;
  EXPECT_EQ(g.decode(cell_of(x, g))[0], -0.5);
  x[0] = 1.2;
  EXPECT_THROW(cell_of(x, g), ArgumentError);
}

// Exactly one cell passes the membership test, found by scanning all cells.
TEST(CellOf, PartitionByExhaustiveScan) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> grid_pick(-4, 4);
  for (double d2 : {1.0, 0.5, 0.25})
    for (int k = 1; k <= 3; ++k) {
      std::vector<int> c(k);
      for (int i = 0; i < k; ++i) c[i] = i;
      const auto g = build_XP(coords_of(c), d2);
      for (int t = 0; t < 2000; ++t) {
        auto x = random_unit(4, rng);
        // Every fifth sample sits exactly on a cell boundary or grid value.
        if (t % 5 == 0)
          for (int i = 0; i < k; ++i) x[i] = std::clamp(grid_pick(rng) * d2 / 2, -1.0, 1.0);
        int hits = 0;
        std::uint64_t found = 0;
        for (std::uint64_t idx = 0; idx < g.size; ++idx)
          if (g.contains(idx, x)) {
            ++hits;
            found = idx;
          }
        ASSERT_EQ(hits, 1);
        EXPECT_EQ(cell_of(x, g), found);
      }
    }
}

class IndicatorMapTest : public ::testing::Test {
 protected:
  ParamHamiltonian h = build_heisenberg(Lattice({4}));
  IndicatorOptions opt = [] {
    IndicatorOptions o;
    o.delta1 = 0.0;
    o.delta2 = 0.5;
    o.max_weight = 2;
    return o;
  }();
  IndicatorFeatureMap fm{h, opt};
};

TEST_F(IndicatorMapTest, DimensionAccounting) {
  const auto paulis = enumerate_geo_paulis(h.lattice, h.range, 2);
  ASSERT_EQ(fm.entries().size(), paulis.size());
  std::uint64_t total = 0;
  for (const auto& p : paulis) {
    std::uint64_t s = 1;
    for (std::size_t i = 0; i < compute_IP(h, p, 0.0).coords.size(); ++i) s *= 5;
    total += s;
  }
  EXPECT_EQ(fm.m_phi(), total);
  for (std::size_t e = 0; e < fm.entries().size(); ++e) {
    const auto& entry = fm.entries()[e];
    EXPECT_EQ(&fm.entry_of(entry.offset), &entry);
    EXPECT_EQ(&fm.entry_of(entry.offset + entry.grid.size - 1), &entry);
  }
  EXPECT_THROW(fm.entry_of(fm.m_phi()), ArgumentError);
}

TEST_F(IndicatorMapTest, OneHotPerPauli) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto f = phi_indicator(fm, random_unit(h.num_params, rng));
    EXPECT_EQ(f.dim, fm.m_phi());
    ASSERT_EQ(f.ones.size(), fm.entries().size());
    for (std::size_t e = 0; e < f.ones.size(); ++e) {
      const auto& entry = fm.entries()[e];
      EXPECT_GE(f.ones[e], entry.offset);
      EXPECT_LT(f.ones[e], entry.offset + entry.grid.size);
    }
    EXPECT_TRUE(std::is_sorted(f.ones.begin(), f.ones.end()));
  }
  std::vector<double> wrong(2, 0.0);
  EXPECT_THROW(fm(wrong), ArgumentError);
}

TEST_F(IndicatorMapTest, BlocksReadOnlyTheirCoordinates) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_unit(h.num_params, rng);
    const auto base = fm(x);
    for (int c = 0; c < h.num_params; ++c) {
      auto y = x;
      y[c] = u(rng);
      const auto moved = fm(y);
      for (std::size_t e = 0; e < fm.entries().size(); ++e) {
        const auto& ip = fm.entries()[e].ip.coords;
        if (std::find(ip.begin(), ip.end(), c) == ip.end()) {
          EXPECT_EQ(moved.ones[e], base.ones[e]);
        }
      }
    }
  }
}

TEST(IndicatorMap, PerPauliDelta2) {
  auto h = build_heisenberg(Lattice({3}));
  IndicatorOptions o;
  o.delta1 = 0.0;
  o.max_weight = 1;
  o.per_pauli_delta2 = std::make_pair(1.0, 0.25);
  IndicatorFeatureMap fm(h, o);
  for (const auto& e : fm.entries())
    EXPECT_DOUBLE_EQ(e.grid.delta2, theory_delta2(1.0, 0.25, e.ip.coords.size()));
}

TEST(TheoryHelpers, Formulas) {
  EXPECT_NEAR(theory_delta1(0.1, 2.0, 1.0), 2.0 * std::pow(std::log(20.0), 2), 1e-12);
  EXPECT_DOUBLE_EQ(theory_delta2(0.5, 1.0, 4), 1.0 / 8.0);
  EXPECT_DOUBLE_EQ(theory_delta2(100.0, 1.0, 1), 1.0);
  EXPECT_THROW(theory_delta2(0.0, 1.0, 1), ArgumentError);
}

TEST(Rff, ZeroInputAndRange) {
  auto h = build_heisenberg(Lattice({2, 3}));
  RffOptions o;
  o.delta1 = 1.0;
  o.num_frequencies = 7;
  o.gamma = 0.6;
  o.seed = 5;
  RffMap map(h, o);
  EXPECT_EQ(map.dim(), 2u * 7 * 7);
  const auto z = map(std::vector<double>(h.num_params, 0.0));
  for (std::size_t k = 0; k < map.dim(); k += 2) {
    EXPECT_EQ(z[k], 1.0);
    EXPECT_EQ(z[k + 1], 0.0);
  }
  std::mt19937_64 rng(1);
  const auto x = random_unit(h.num_params, rng);
  const auto f = phi_rff(map, x);
  EXPECT_LE(f.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(f, RffMap(h, o)(x));
}

TEST(Rff, FeatureFormula) {
  auto h = build_heisenberg(Lattice({4}));
  RffOptions o;
  o.delta1 = 0.0;
  o.num_frequencies = 3;
  o.gamma = 0.7;
  o.seed = 11;
  RffMap map(h, o);
  EXPECT_EQ(map.regions(), local_regions(h, 0.0));
  EXPECT_EQ(map.regions()[1], (std::vector<int>{0, 1, 2}));
  std::vector<double> x{0.3, -0.4, 0.9};
  const auto f = map(x);
  for (std::size_t r = 0; r < map.regions().size(); ++r) {
    const auto& reg = map.regions()[r];
    for (int i = 0; i < 3; ++i) {
      double arg = 0;
      for (std::size_t c = 0; c < reg.size(); ++c) arg += map.omega(r)(i, c) * x[reg[c]];
      arg *= 0.7 / std::sqrt(double(reg.size()));
      EXPECT_NEAR(f[r * 6 + 2 * i], std::cos(arg), 1e-15);
      EXPECT_NEAR(f[r * 6 + 2 * i + 1], std::sin(arg), 1e-15);
      EXPECT_EQ(map.region_of(r * 6 + 2 * i + 1), r);
    }
  }
}

TEST(Rff, FrequencyPrefixShared) {
  auto h = build_heisenberg(Lattice({2, 3}));
  RffOptions small, large;
  small.num_frequencies = 5;
  large.num_frequencies = 20;
  small.seed = large.seed = 3;
  RffMap a(h, small), b(h, large);
  for (std::size_t r = 0; r < a.regions().size(); ++r)
    EXPECT_EQ(a.omega(r), b.omega(r).topRows(5));
}

TEST(Rff, GaussianKernelLimit) {
  // One region over all three coordinates of a 4-site chain.
  std::vector<std::vector<int>> regions{{0, 1, 2}};
  RffOptions o;
  o.num_frequencies = 10000;
  o.gamma = 0.65;
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    o.seed = 1000 + t;
    RffMap map(regions, 3, o);
    const auto x = random_unit(3, rng), y = random_unit(3, rng);
    const double k = map(x).dot(map(y)) / o.num_frequencies;
    double d2 = 0;
    for (int c = 0; c < 3; ++c) d2 += (x[c] - y[c]) * (x[c] - y[c]);
    EXPECT_NEAR(k, std::exp(-o.gamma * o.gamma * d2 / (2.0 * 3.0)), 0.02);
  }
}

TEST(Rff, Validation) {
  std::vector<std::vector<int>> regions{{0, 5}};
  RffOptions o;
  EXPECT_THROW(RffMap(regions, 3, o), ArgumentError);
  o.num_frequencies = 0;
  EXPECT_THROW(RffMap(std::vector<std::vector<int>>{{0}}, 3, o), ArgumentError);
}
