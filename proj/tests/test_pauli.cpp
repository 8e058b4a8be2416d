#include <gtest/gtest.h>

#include <random>

#include "geolearn/pauli.hpp"
#include "oracles.hpp"

using namespace geolearn;

TEST(PauliSum, DropsZerosAndMerges) {
  PauliSum s;
  s.add(PauliString::parse("X0"), 0.5);
  s.add(PauliString::parse("X0"), -0.5);
  EXPECT_TRUE(s.empty());
  s.add(PauliString::parse("Z1"), 0.0);
  EXPECT_TRUE(s.empty());
  s.add(PauliString::parse("Z1"), 2.0);
  s.add(PauliString::parse("Z1"), 1.0);
  EXPECT_DOUBLE_EQ(s.coefficient(PauliString::parse("Z1")), 3.0);
  EXPECT_TRUE(s.scaled(0.0).empty());
  EXPECT_DOUBLE_EQ(s.scaled(-2.0).coefficient(PauliString::parse("Z1")), -6.0);
  EXPECT_EQ(s.max_site(), 1);
}

TEST(PauliKernel, DenseMatchesKroneckerOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> letter(0, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 4;
    PauliSum o;
    for (int t = 0; t < 6; ++t) {
      std::vector<PauliString::Op> ops;
      for (int q = 0; q < n; ++q) ops.emplace_back(q, static_cast<Pauli>(letter(rng)));
      o.add(PauliString(ops), g(rng));
    }
    const auto ref = oracle::sum_matrix(o, n);
    EXPECT_LE((dense_matrix(o, n) - ref).norm(), 1e-12);
    EXPECT_LE((MatrixXc(sparse_matrix(o, n)) - ref).norm(), 1e-12);
    const auto psi = oracle::random_state(n, rng);
    EXPECT_NEAR(expectation(o, psi, n), oracle::expect(ref, psi), 1e-12);
  }
}

TEST(PauliKernel, ApplyMatchesMatrixVector) {
  std::mt19937_64 rng(5);
  const int n = 4;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_string({0, 2, 3}, rng);
    const auto psi = oracle::random_state(n, rng);
    VectorXc out = VectorXc::Zero(psi.size());
    apply_pauli_add(pauli_masks(p, n), Complex(0.3, -0.2), psi, out);
    const VectorXc ref = Complex(0.3, -0.2) * (oracle::pauli_matrix(p, n) * psi);
    EXPECT_LE((out - ref).norm(), 1e-12);
  }
}

TEST(PauliKernel, LocalMatrixUsesSupportOrder) {
  std::vector<Site> support{2, 5};
  const auto m = local_pauli_matrix(PauliString::parse("X2 Z5"), support);
  EXPECT_LE((m - oracle::pauli_matrix(PauliString::parse("X0 Z1"), 2)).norm(), 1e-15);
  EXPECT_THROW(local_pauli_matrix(PauliString::parse("X3"), support), ArgumentError);
}

TEST(PauliKernel, CapacityGuards) {
  PauliSum o{{PauliString::parse("X0"), 1.0}};
  EXPECT_THROW(dense_matrix(o, 13), CapacityError);
  EXPECT_THROW(sparse_matrix(o, 21), CapacityError);
  EXPECT_THROW(pauli_masks(PauliString::parse("X4"), 3), ArgumentError);
}

TEST(PauliKernel, DisjointProduct) {
  auto p = disjoint_product(PauliString::parse("X0"), PauliString::parse("Y2 Z3"));
  EXPECT_EQ(p.str(), "X0 Y2 Z3");
  EXPECT_THROW(disjoint_product(PauliString::parse("X0"), PauliString::parse("Z0")), ArgumentError);
}
