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

using testing::vec;

ProblemDef sphere_quadratic(Index n) { return make_quadratic(Vector::Constant(n, 2.0)); }

TEST(Apgm, ConvexQuadraticFromUnitVector) {
  const ProblemDef prob = sphere_quadratic(3);
  const SubsolverResult r = apgm(prob, Vector::Zero(0), 1.0, vec({1, 0, 0}), 1e-8);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.certified_residual, 1e-8);
  EXPECT_LE(r.x_out.norm(), 1e-8);
  EXPECT_NEAR(r.certified_residual,
              first_order_residual(prob, r.x_out, Vector::Zero(0), 1.0).grad_residual, 0.0);
}

TEST(Apgm, AlreadyStationaryCostsOneGradient) {
  const ProblemDef prob = sphere_quadratic(4);
  const SubsolverResult r = apgm(prob, Vector::Zero(0), 1.0, Vector::Zero(4), 1e-6);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.inner_iters, 0);
  EXPECT_EQ(r.oracle_calls.grad_evals, 1);
  EXPECT_EQ(r.x_out, Vector::Zero(4));
}

TEST(Apgm, ResultIsRecheckedIndependently) {
  const BpSample sample = gen_bp(20, 10, 3, 0.0, 11);
  const ProblemDef prob = make_basis_pursuit(sample.instance);
  std::mt19937_64 rng(11);
  const Vector y = testing::gaussian(10, rng);
  const Vector x0 = testing::gaussian(40, rng);
  const double beta = 10.0, eps = 1e-6;
  const SubsolverResult r = apgm(prob, y, beta, x0, eps);
  ASSERT_TRUE(r.converged);
  const double recheck = first_order_residual(prob, r.x_out, y, beta).grad_residual;
  EXPECT_LE(recheck, 1.05 * eps);
  EXPECT_LE(al_value(prob, r.x_out, y, beta), al_value(prob, x0, y, beta));
}

TEST(Apgm, ClusteringIteratesStayInSet) {
  const SyntheticClusters sc = gen_synthetic_clusters(3, 6, 2, 10.0, 5);
  const ProblemDef prob = make_clustering(sc.instance);
  const Vector x0 = random_initial_point(prob, 0.3, 5);
  const Vector y = Vector::Ones(prob.dim_constraint);
  const SubsolverResult r = apgm(prob, y, 5.0, x0, 1e-6);
  EXPECT_TRUE(r.converged);
  EXPECT_GE(r.x_out.minCoeff(), 0.0);
  EXPECT_LE(r.x_out.norm(), std::sqrt(3.0) * (1.0 + 1e-12));
  EXPECT_LE(first_order_residual(prob, r.x_out, y, 5.0).grad_residual, 1.05e-6);
}

TEST(Apgm, ProjectionCountCoversIterations) {
  const SyntheticClusters sc = gen_synthetic_clusters(2, 5, 2, 8.0, 6);
  const ProblemDef prob = make_clustering(sc.instance);
  const SubsolverResult r =
      apgm(prob, Vector::Zero(prob.dim_constraint), 3.0, random_initial_point(prob, 0.3, 6), 1e-6);
  EXPECT_GE(r.oracle_calls.prox_evals, r.inner_iters);
  EXPECT_GE(r.inner_iters, 1);
}

TEST(Apgm, AcceleratedNeedsFewerIterationsOnIllConditionedQuadratic) {
  Vector h(40);
  for (Index i = 0; i < 40; ++i) h[i] = std::pow(1e3, static_cast<double>(i) / 39.0);
  const ProblemDef prob = make_quadratic(h);
  const Vector x0 = Vector::Ones(40);
  const SubsolverResult fast = apgm(prob, Vector::Zero(0), 1.0, x0, 1e-6);
  const SubsolverResult slow = projected_gradient(prob, Vector::Zero(0), 1.0, x0, 1e-6);
  ASSERT_TRUE(fast.converged);
  ASSERT_TRUE(slow.converged);
  EXPECT_LT(fast.inner_iters, slow.inner_iters);
}

TEST(Apgm, GradientCountGrowsSlowlyAsToleranceHalves) {
  const GenEigInstance inst = gen_geneig(20, {SpectrumKind::PolyDecay, 1.0}, 4);
  const ProblemDef prob = make_geneig(inst);
  const Vector x0 = random_initial_point(prob, 1.0, 4);
  const Vector y = vec({0.3});
  std::int64_t previous = 0;
  for (double eps = 1e-3; eps >= 1e-6; eps *= 0.5) {
    const SubsolverResult r = apgm(prob, y, 4.0, x0, eps);
    ASSERT_TRUE(r.converged);
    if (previous > 0) {
      EXPECT_LE(r.oracle_calls.grad_evals, 2 * previous + 10);
    }
    previous = r.oracle_calls.grad_evals;
  }
}

TEST(Apgm, IterationCapReportsUnconverged) {
  const ProblemDef prob = make_geneig(gen_geneig(20, {}, 3));
  ApgmOptions o;
  o.max_iters = 1;
  const SubsolverResult r =
      apgm(prob, vec({0.0}), 1.0, random_initial_point(prob, 1.0, 3), 1e-12, o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.inner_iters, 1);
  EXPECT_GT(r.certified_residual, 1e-12);
}

TEST(Apgm, InputContracts) {
  const ProblemDef prob = sphere_quadratic(2);
  EXPECT_THROW(apgm(prob, Vector::Zero(0), 1.0, vec({1, 1}), 0.0), ContractError);
  EXPECT_THROW(apgm(prob, Vector::Zero(0), -1.0, vec({1, 1}), 1e-3), ContractError);
  EXPECT_THROW(apgm(prob, Vector::Zero(1), 1.0, vec({1, 1}), 1e-3), ContractError);
  const ProblemDef clus = make_clustering(gen_synthetic_clusters(2, 2, 1, 5.0, 1).instance);
  Vector outside = Vector::Zero(clus.dim_primal);
  outside[0] = -1.0;
  EXPECT_THROW(apgm(clus, Vector::Zero(clus.dim_constraint), 1.0, outside, 1e-3),
               InfeasiblePointError);
}

TEST(Apgm, UnboundedBelowIsDetected) {
  ProblemDef prob = make_quadratic(vec({1.0}));
  prob.f_eval = [](const Vector& x) { return -std::exp(std::exp(x[0])); };
  prob.f_grad = [](const Vector& x) { return Vector::Constant(1, -std::exp(x[0] + std::exp(x[0]))); };
  prob.constants = {};
  prob.hvp = nullptr;
  ApgmOptions o;
  o.initial_step = 1e3;
  EXPECT_THROW(apgm(prob, Vector::Zero(0), 1.0, vec({3.0}), 1e-8, o), NumericalError);
}

TEST(TrustRegion, ConvexQuadratic) {
  Vector h(5);
  h << 1, 2, 3, 4, 50;
  const ProblemDef prob = make_quadratic(h);
  const SubsolverResult r = trust_region(prob, Vector::Zero(0), 1.0, Vector::Ones(5), 1e-8);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.x_out.norm(), 1e-8);
  ASSERT_TRUE(r.min_eig.has_value());
  EXPECT_NEAR(*r.min_eig, 1.0, 1e-8);
}

TEST(TrustRegion, EscapesStrictSaddle) {
  // f = -x0^2 + x0^4 + x1^2 has a strict saddle at 0 and minima at
  // x0 = +-1/sqrt(2).
  ProblemDef prob;
  prob.name = "double_well";
  prob.dim_primal = 2;
  prob.dim_constraint = 0;
  prob.f_eval = [](const Vector& x) {
    return -x[0] * x[0] + std::pow(x[0], 4) + x[1] * x[1];
  };
  prob.f_grad = [](const Vector& x) {
    return vec({-2 * x[0] + 4 * std::pow(x[0], 3), 2 * x[1]});
  };
  prob.A_eval = [](const Vector&) { return Vector(0); };
  prob.DA_t_apply = [](const Vector& x, const Vector&) { return Vector(Vector::Zero(x.size())); };
  prob.hvp = [](const Vector& x, const Vector&, double, const Vector& w) {
    return vec({(-2 + 12 * x[0] * x[0]) * w[0], 2 * w[1]});
  };
  const SubsolverResult r = trust_region(prob, Vector::Zero(0), 1.0, Vector::Zero(2), 1e-6);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(std::abs(r.x_out[0]), std::sqrt(0.5), 1e-5);
  EXPECT_NEAR(r.x_out[1], 0.0, 1e-6);
  ASSERT_TRUE(r.min_eig.has_value());
  EXPECT_GE(*r.min_eig, -1e-6);
  EXPECT_GT(r.oracle_calls.hvp_evals, 0);
}

TEST(TrustRegion, GeneigSaddleReachesSmallestEigenvalue) {
  const GenEigInstance inst = gen_geneig(10, {}, 2);
  const ProblemDef prob = make_geneig(inst);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(inst.C, inst.B);
  const double beta = 50.0;
  const SubsolverResult r = trust_region(prob, vec({-es.eigenvalues()[0]}), beta,
                                         es.eigenvectors().col(4), 1e-7);
  ASSERT_TRUE(r.converged);
  EXPECT_GE(*r.min_eig, -1e-7);
  // Stationary points of L at the exact multiplier are eigenvectors; the
  // second-order one is the bottom pair.
  const Vector& x = r.x_out;
  EXPECT_NEAR(x.dot(inst.C * x) / x.dot(inst.B * x), es.eigenvalues()[0], 1e-6);
}

TEST(TrustRegion, RequiresHessianAndNoProximalTerm) {
  ProblemDef prob = sphere_quadratic(2);
  prob.hvp = nullptr;
  EXPECT_THROW(trust_region(prob, Vector::Zero(0), 1.0, vec({1, 1}), 1e-6), CapabilityError);
  const ProblemDef clus = make_clustering(gen_synthetic_clusters(2, 2, 1, 5.0, 1).instance);
  EXPECT_THROW(trust_region(clus, Vector::Zero(clus.dim_constraint), 1.0,
                            Vector::Zero(clus.dim_primal), 1e-6),
               CapabilityError);
}

TEST(RunSubsolver, DispatchMatchesDirectCall) {
  const ProblemDef prob = make_geneig(gen_geneig(8, {}, 9));
  const Vector x0 = random_initial_point(prob, 1.0, 9);
  const SubsolverResult direct = projected_gradient(prob, vec({0.1}), 2.0, x0, 1e-6);
  const SubsolverResult via =
      run_subsolver(ProjectedGradientOptions{}, prob, vec({0.1}), 2.0, x0, 1e-6);
  EXPECT_EQ(direct.x_out, via.x_out);
  EXPECT_EQ(direct.inner_iters, via.inner_iters);
}

}  // namespace
}  // namespace ialm
