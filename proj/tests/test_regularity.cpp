// Copyright 2026 The ialm Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace ialm {
namespace {

using testing::diag;
using testing::vec;

TEST(NuEstimate, GeneigExample) {
  const ProblemDef prob = testing::geneig(Matrix::Identity(2, 2), diag({1, 2}));
  const NuEstimate nu = nu_estimate(prob, vec({2, 0}), 1.0);
  EXPECT_FALSE(nu.degenerate);
  EXPECT_DOUBLE_EQ(nu.feasibility_at_eval, 3.0);
  EXPECT_DOUBLE_EQ(nu.nu_hat, 4.0);
  EXPECT_GE(nu.nu_hat, geneig_nu_lower_bound(Matrix::Identity(2, 2), vec({2, 0})));
}

TEST(NuEstimate, FeasiblePointIsDegenerate) {
  const ProblemDef prob = testing::geneig(Matrix::Identity(2, 2), diag({1, 2}));
  const NuEstimate nu = nu_estimate(prob, vec({0, 1}), 1.0);
  EXPECT_TRUE(nu.degenerate);
  EXPECT_EQ(nu.nu_hat, 0.0);
  EXPECT_TRUE(nu_estimate(prob, vec({1e-13 + 1.0, 0}), 1.0).degenerate);
}

TEST(NuEstimate, Contracts) {
  const ProblemDef prob = testing::geneig(Matrix::Identity(2, 2), diag({1, 2}));
  EXPECT_THROW(nu_estimate(prob, vec({1, 0}), 0.0), ContractError);
  EXPECT_THROW(nu_estimate(prob, vec({1, 0, 0}), 1.0), ContractError);
  ProblemDef general = prob;
  GeneralProxTerm term;
  term.prox = [](const Vector& v, double) { return v; };
  term.subdiff_distance = [](const Vector&, const Vector& u) { return u.norm(); };
  general.prox = term;
  EXPECT_THROW(nu_estimate(general, vec({2, 0}), 1.0), CapabilityError);
  std::get<GeneralProxTerm>(general.prox).scaled_subdiff_distance =
      [](const Vector&, const Vector& u, double) { return u.norm(); };
  EXPECT_DOUBLE_EQ(nu_estimate(general, vec({2, 0}), 1.0).nu_hat, 4.0);
}

ClusteringInstance small_clustering() {
  ClusteringInstance inst;
  inst.D.resize(3, 3);
  inst.D << 0, 1, 4, 1, 0, 2, 4, 2, 0;
  inst.s = 2;
  inst.r = 2;
  return inst;
}

// Points on faces of the orthant, inside the ball and on the sphere.
std::vector<Vector> clustering_points(std::mt19937_64& rng, double radius) {
  std::vector<Vector> pts;
  std::bernoulli_distribution zero(0.35);
  for (int t = 0; t < 200; ++t) {
    Vector x = testing::gaussian(6, rng).cwiseAbs();
    for (Index i = 0; i < 6; ++i) {
      if (zero(rng)) x[i] = 0.0;
    }
    if (x.norm() == 0.0) x[t % 6] = 1.0;
    x *= (t % 3 == 0 ? radius : 0.8 * radius) / x.norm();
    pts.push_back(x);
  }
  return pts;
}

TEST(NuEstimate, ClusteringMatchesBruteForceOracle) {
  const ProblemDef prob = make_clustering(small_clustering());
  const double radius = std::sqrt(2.0);
  std::mt19937_64 rng(21);
  int compared = 0;
  for (const Vector& x : clustering_points(rng, radius)) {
    const Matrix V = as_factor(x, 3, 2);
    const Vector ax = prob.A_eval(x);
    if (ax.norm() <= kDegenerateFeasibility) continue;
    const Vector u = -testing::clustering_jacobian(V).transpose() * ax;
    const double oracle =
        testing::cone_distance_bruteforce(u, testing::orthant_ball_normal_generators(x, radius)) /
        ax.norm();
    EXPECT_NEAR(nu_estimate(prob, x, 1.0).nu_hat, oracle, 1e-10);
    ++compared;
  }
  EXPECT_GT(compared, 150);
}

TEST(NuEstimate, BasisPursuitMatchesExplicitJacobian) {
  const BasisPursuitInstance inst = gen_bp(6, 3, 1, 0.0, 22).instance;
  const ProblemDef prob = make_basis_pursuit(inst);
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    const Vector x = testing::gaussian(12, rng);
    const Vector ax = prob.A_eval(x);
    const double oracle =
        (testing::bp_jacobian(inst.B, x).transpose() * ax).norm() / ax.norm();
    EXPECT_NEAR(nu_estimate(prob, x, 1.0).nu_hat, oracle, 1e-10);
    EXPECT_GE(nu_estimate(prob, x, 1.0).nu_hat, bp_nu_lower_bound(inst.B, x) - 1e-8);
  }
}

TEST(NuEstimate, InvariantUnderPenaltyScaling) {
  std::mt19937_64 rng(23);
  const ProblemDef clus = make_clustering(small_clustering());
  const ProblemDef bp = make_basis_pursuit(gen_bp(6, 3, 1, 0.0, 23).instance);
  const ProblemDef ge = make_geneig(gen_geneig(5, {}, 23));
  for (const Vector& x : clustering_points(rng, std::sqrt(2.0))) {
    const double base = nu_estimate(clus, x, 1.0).nu_hat;
    EXPECT_EQ(nu_estimate(clus, x, 10.0).nu_hat, base);
    EXPECT_EQ(nu_estimate(clus, x, 1000.0).nu_hat, base);
  }
  for (int t = 0; t < 50; ++t) {
    const Vector xb = testing::gaussian(12, rng);
    const Vector xg = testing::gaussian(5, rng);
    for (double beta : {10.0, 1000.0}) {
      EXPECT_EQ(nu_estimate(bp, xb, beta).nu_hat, nu_estimate(bp, xb, 1.0).nu_hat);
      EXPECT_EQ(nu_estimate(ge, xg, beta).nu_hat, nu_estimate(ge, xg, 1.0).nu_hat);
    }
  }
}

TEST(ClusteringBound, Examples) {
  Matrix V = Matrix::Zero(3, 2);
  V(0, 0) = 1.0;
  V(1, 1) = 1.0;
  EXPECT_EQ(clustering_nu_lower_bound(V), 0.0);
  EXPECT_EQ(clustering_nu_lower_bound(Matrix::Identity(3, 3)), 1.0);
  EXPECT_THROW(clustering_nu_lower_bound(-Matrix::Identity(2, 2)), ContractError);
}

TEST(ClusteringBound, HoldsOnOrthonormalNonnegativeFactors) {
  // Disjoint column supports give orthonormal nonnegative columns.
  ClusteringInstance inst;
  std::mt19937_64 rng(24);
  const Matrix P = testing::random_symmetric(6, rng).cwiseAbs();
  inst.D = P + P.transpose();
  inst.D.diagonal().setZero();
  inst.s = 3;
  inst.r = 2;
  const ProblemDef prob = make_clustering(inst);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution column(0.5);
  for (int t = 0; t < 200; ++t) {
    Matrix V = Matrix::Zero(6, 2);
    V(0, 0) = u(rng);
    V(1, 1) = u(rng);
    for (Index i = 2; i < 6; ++i) V(i, column(rng) ? 1 : 0) = u(rng);
    V.col(0).normalize();
    V.col(1).normalize();
    const Vector x = flatten_factor(V);
    const ClusteringPreconditions pre = clustering_preconditions(V, std::sqrt(3.0));
    ASSERT_TRUE(pre.holds);
    const NuEstimate nu = nu_estimate(prob, x, 5.0);
    if (nu.degenerate) continue;
    EXPECT_GE(nu.nu_hat, clustering_nu_lower_bound(V) - 1e-8);
  }
}

TEST(ClusteringPreconditions, DetectsBoundaryAndNonOrthogonality) {
  Matrix V = Matrix::Zero(4, 2);
  V(0, 0) = V(1, 1) = 1.0;
  EXPECT_TRUE(clustering_preconditions(V, 2.0).holds);
  EXPECT_FALSE(clustering_preconditions(V, std::sqrt(2.0)).interior);
  V(0, 1) = 0.5;
  const ClusteringPreconditions p = clustering_preconditions(V, 3.0);
  EXPECT_TRUE(p.interior);
  EXPECT_GT(p.orthonormality_deviation, 0.1);
  EXPECT_FALSE(p.holds);
}

TEST(BpCondition, Examples) {
  std::mt19937_64 rng(25);
  const Matrix B = testing::gaussian(12, rng).reshaped(3, 4);
  EXPECT_FALSE(bp_nu_condition(Vector::Zero(4), B, 0.5).holds);
  const BpConditionReport id = bp_nu_condition(vec({1, -2, 0.6}), Matrix::Identity(3, 3), 1.0);
  EXPECT_DOUBLE_EQ(id.min_singular, 1.0);
  EXPECT_DOUBLE_EQ(id.threshold, 0.5);
  EXPECT_DOUBLE_EQ(id.z_nth, 0.6);
  EXPECT_TRUE(id.holds);
  EXPECT_FALSE(bp_nu_condition(vec({1, -2, 0.4}), Matrix::Identity(3, 3), 1.0).holds);
  EXPECT_THROW(bp_nu_condition(vec({1, 2}), Matrix::Identity(3, 3), 1.0), ContractError);
  EXPECT_THROW(bp_nu_condition(vec({1, 2, 3}), Matrix::Identity(3, 3), 0.0), ContractError);
}

TEST(BpCondition, SubsetMinimumMatchesEnumeration) {
  std::mt19937_64 rng(26);
  const Matrix B = testing::gaussian(18, rng).reshaped(3, 6);
  double oracle = std::numeric_limits<double>::infinity();
  int subsets = 0;
  for (int mask = 0; mask < 64; ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != 3) continue;
    Matrix sub(3, 3);
    Index c = 0;
    for (Index j = 0; j < 6; ++j) {
      if (mask & (1 << j)) sub.col(c++) = B.col(j);
    }
    Eigen::BDCSVD<Matrix> svd(sub);
    oracle = std::min(oracle, svd.singularValues()[2]);
    ++subsets;
  }
  const SubsetSingularValue got = bp_min_subset_singular(B);
  EXPECT_EQ(subsets, 20);
  EXPECT_EQ(got.subsets, 20);
  EXPECT_FALSE(got.approximate);
  EXPECT_NEAR(got.value, oracle, 1e-12);
}

TEST(BpCondition, LargeDimensionIsSampled) {
  std::mt19937_64 rng(27);
  const Matrix B = testing::gaussian(60, rng).reshaped(2, 30);
  const SubsetSingularValue s = bp_min_subset_singular(B, 20, 50);
  EXPECT_TRUE(s.approximate);
  EXPECT_EQ(s.subsets, 50);
  EXPECT_GT(s.value, 0.0);
}

TEST(GeneigBound, Examples) {
  EXPECT_DOUBLE_EQ(geneig_nu_lower_bound(Matrix::Identity(2, 2), vec({2, 0})), 2.0);
  EXPECT_EQ(geneig_nu_lower_bound(Matrix::Identity(2, 2), vec({0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(geneig_nu_lower_bound(diag({0.5, 3}), vec({1, 0})), 0.5);
  EXPECT_THROW(geneig_nu_lower_bound(diag({1, -1}), vec({1, 0})), DomainError);
}

TEST(GeneigBound, HoldsAtRandomPoints) {
  std::mt19937_64 rng(28);
  for (int t = 0; t < 100; ++t) {
    const Matrix B = testing::random_spd(6, rng);
    const Matrix C = testing::random_symmetric(6, rng);
    const Vector x = testing::gaussian(6, rng);
    const NuEstimate nu = nu_estimate(testing::geneig(B, C), x, 1.0);
    ASSERT_FALSE(nu.degenerate);
    EXPECT_GE(nu.nu_hat, geneig_nu_lower_bound(B, x) - 1e-8);
  }
}

}  // namespace
}  // namespace ialm
