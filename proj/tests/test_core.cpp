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
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace ialm {
namespace {

using testing::diag;
using testing::vec;

ProblemDef small_geneig() { return testing::geneig(Matrix::Identity(2, 2), diag({1, 2})); }

TEST(AlValue, VanishesWithoutObjectiveOrConstraints) {
  const ProblemDef prob = make_quadratic(Vector::Zero(3), 2);
  EXPECT_EQ(al_value(prob, vec({1, -2, 3}), vec({4, 5}), 10.0), 0.0);
}

TEST(AlValue, FeasiblePointReducesToObjective) {
  EXPECT_DOUBLE_EQ(al_value(small_geneig(), vec({1, 0}), vec({0.5}), 4.0), 1.0);
}

TEST(AlValue, HandEvaluatedInfeasiblePoint) {
  // f = 4, A = 3: 4 + 0.5*3 + (4/2)*9.
  EXPECT_DOUBLE_EQ(al_value(small_geneig(), vec({2, 0}), vec({0.5}), 4.0), 23.5);
}

TEST(AlValue, DimensionMismatchIsContractError) {
  EXPECT_THROW(al_value(small_geneig(), vec({1, 0, 0}), vec({0}), 1.0), ContractError);
  EXPECT_THROW(al_value(small_geneig(), vec({1, 0}), vec({0, 0}), 1.0), ContractError);
  EXPECT_THROW(al_value(small_geneig(), vec({1, 0}), vec({0}), 0.0), ContractError);
}

TEST(AlValue, NonFiniteResultIsNumericalError) {
  const double big = 1e200;
  EXPECT_THROW(al_value(small_geneig(), vec({big, 0}), vec({0}), 1.0), NumericalError);
}

TEST(AlValue, AffineInDual) {
  std::mt19937_64 rng(11);
  const GenEigInstance inst = gen_geneig(6, {}, 3);
  const ProblemDef prob = make_geneig(inst);
  for (int t = 0; t < 20; ++t) {
    const Vector x = testing::gaussian(6, rng);
    const Vector y1 = testing::gaussian(1, rng);
    const Vector y2 = testing::gaussian(1, rng);
    const double lhs = al_value(prob, x, y1 + y2, 3.0) - al_value(prob, x, y1, 3.0);
    const double rhs = prob.A_eval(x).dot(y2);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(al_value(prob, x, y1, 3.0))));
  }
}

TEST(AlValue, PenaltyDifference) {
  std::mt19937_64 rng(12);
  const BpSample bp = gen_bp(8, 4, 2, 0.0, 5);
  const ProblemDef prob = make_basis_pursuit(bp.instance);
  for (int t = 0; t < 20; ++t) {
    const Vector x = testing::gaussian(16, rng);
    const Vector y = testing::gaussian(4, rng);
    const double beta = 0.5 + t;
    const double diff = al_value(prob, x, y, beta) - al_value_from_residual(prob, x, y, 0.0, prob.A_eval(x));
    const double expected = 0.5 * beta * prob.A_eval(x).squaredNorm();
    EXPECT_NEAR(diff, expected, 1e-12 * (1.0 + std::abs(al_value(prob, x, y, beta))));
  }
}

TEST(AlGrad, FeasibleZeroDualGivesObjectiveGradient) {
  const ProblemDef prob = small_geneig();
  const Vector x = vec({0, 1});
  EXPECT_TRUE(al_grad(prob, x, vec({0}), 7.0).isApprox(prob.f_grad(x)));
}

TEST(AlGrad, HandEvaluated) {
  // grad f = (4, 0); DA^T (beta A) = 2x * 3 = (12, 0).
  const Vector g = al_grad(small_geneig(), vec({2, 0}), vec({0}), 1.0);
  EXPECT_DOUBLE_EQ(g[0], 16.0);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
}

// Directional central differences of al_value at 100 random (x, y, beta)
// per shipped problem.
void expect_al_grad_matches_differences(const ProblemDef& prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> beta_dist(0.1, 10.0);
  for (int t = 0; t < 100; ++t) {
    Vector x = testing::gaussian(prob.dim_primal, rng);
    x *= 0.9 / x.norm();
    const Vector y = testing::gaussian(prob.dim_constraint, rng);
    const double beta = beta_dist(rng);
    Vector w = testing::gaussian(prob.dim_primal, rng);
    w.normalize();
    const double h = 1e-6 * (1.0 + x.norm());
    const Vector g = al_grad(prob, x, y, beta);
    const double fd =
        (al_value(prob, x + h * w, y, beta) - al_value(prob, x - h * w, y, beta)) / (2 * h);
    EXPECT_LE(std::abs(fd - g.dot(w)) / std::max(1.0, g.norm()), 1e-5) << prob.name;
  }
}

TEST(AlGrad, MatchesFiniteDifferencesOnShippedProblems) {
  expect_al_grad_matches_differences(make_geneig(gen_geneig(12, {}, 1)), 1);
  expect_al_grad_matches_differences(make_basis_pursuit(gen_bp(10, 5, 2, 1e-3, 2).instance), 2);
  expect_al_grad_matches_differences(
      make_clustering(gen_synthetic_clusters(2, 4, 2, 3.0, 3).instance), 3);
}

TEST(Lipschitz, AllCurvatureAbsentGivesZero) {
  EXPECT_EQ(lipschitz_bound(0, 0, 0, 4, 7, 3.0, 2.0, 9.0), 0.0);
}

TEST(Lipschitz, HandEvaluated) {
  EXPECT_DOUBLE_EQ(lipschitz_bound(1, 0, 2, 1, 3, 7, 1, 5), 61.0);
}

TEST(Lipschitz, MonotoneInBeta) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const double lf = u(rng), la = u(rng), lap = u(rng), yn = u(rng), rho = u(rng);
    const double b1 = u(rng), b2 = b1 + u(rng);
    EXPECT_GE(lipschitz_bound(lf, la, lap, 3, 5, yn, rho, b2),
              lipschitz_bound(lf, la, lap, 3, 5, yn, rho, b1));
  }
}

TEST(Lipschitz, NegativeInputRejected) {
  EXPECT_THROW(lipschitz_bound(-1, 0, 0, 1, 1, 0, 0, 1), ContractError);
}

TEST(Lipschitz, UnavailableWithoutConstants) {
  const ProblemDef prob = make_clustering(gen_synthetic_clusters(2, 3, 2, 3.0, 1).instance);
  EXPECT_FALSE(lipschitz_bound_at(prob, Vector::Zero(6), 1.0, 1.0).has_value());
}

TEST(ProximalTerm, ZeroTermIsIdentity) {
  const ProximalTerm term = ZeroTerm{};
  const Vector v = vec({1, -2, 3});
  EXPECT_TRUE(apply_prox(term, v, 0.3).isApprox(v));
  EXPECT_DOUBLE_EQ(subdifferential_distance(term, v, vec({3, 4, 0})), 5.0);
}

TEST(ProximalTerm, ClusteringProjectionIdempotentAndNonExpansive) {
  const ProblemDef prob = make_clustering(gen_synthetic_clusters(3, 2, 2, 5.0, 9, 2).instance);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const Vector v = 2.0 * testing::gaussian(prob.dim_primal, rng);
    const Vector w = 2.0 * testing::gaussian(prob.dim_primal, rng);
    const Vector pv = apply_prox(prob.prox, v, 1.0);
    const Vector pw = apply_prox(prob.prox, w, 1.0);
    EXPECT_LE((apply_prox(prob.prox, pv, 1.0) - pv).norm(), 1e-15 * (1.0 + pv.norm()));
    EXPECT_LE((pv - pw).norm(), (v - w).norm() + 1e-12);
  }
}

TEST(ProximalTerm, IndicatorRejectsPointsOutsideTheSet) {
  const ProblemDef prob = make_clustering(gen_synthetic_clusters(1, 2, 1, 0.0, 1, 1).instance);
  EXPECT_THROW(subdifferential_distance(prob.prox, vec({-1e-6, 0.5}), vec({1, 1})),
               InfeasiblePointError);
}

}  // namespace
}  // namespace ialm
