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

// Regularity constant nu:  nu ||A(x)|| <= dist(-DA(x)^T A(x), dg(x) / beta).
//
// nu_estimate evaluates the quotient at a point. The remaining functions
// are closed-form lower bounds for the shipped problem families.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ialm/common.hpp"
#include "ialm/core.hpp"

namespace ialm {

inline constexpr double kDegenerateFeasibility = 1e-12;

struct NuEstimate {
  double nu_hat = 0.0;
  double feasibility_at_eval = 0.0;
  bool degenerate = false;
};

inline NuEstimate nu_estimate(const ProblemDef& prob, const Vector& x,
                              double beta) {
  require(beta > 0.0, "nu_estimate: beta must be positive");
  require(x.size() == prob.dim_primal, "nu_estimate: dimension mismatch");
  NuEstimate out;
  const Vector ax = prob.A_eval(x);
  out.feasibility_at_eval = ax.norm();
  if (out.feasibility_at_eval <= kDegenerateFeasibility) {
    out.degenerate = true;
    return out;
  }
  const Vector u = -prob.DA_t_apply(x, ax);
  checked(u, "nu_estimate direction");
  double dist = 0.0;
  if (std::holds_alternative<ZeroTerm>(prob.prox)) {
    dist = u.norm();
  } else if (std::holds_alternative<IndicatorTerm>(prob.prox)) {
    // Normal cones are invariant under positive scaling.
    dist = subdifferential_distance(prob.prox, x, u);
  } else {
    const auto& gp = std::get<GeneralProxTerm>(prob.prox);
    if (!gp.scaled_subdiff_distance) {
      throw CapabilityError(
          "nu_estimate needs a scaled subdifferential distance callback");
    }
    dist = gp.scaled_subdiff_distance(x, u, beta);
  }
  out.nu_hat = dist / out.feasibility_at_eval;
  return out;
}

// min_i ||row_i(V)|| for an entrywise nonnegative factor V.
inline double clustering_nu_lower_bound(const Matrix& V) {
  require(V.rows() >= 1, "clustering_nu_lower_bound: empty factor");
  require((V.array() >= 0.0).all(),
          "clustering_nu_lower_bound: V must be nonnegative");
  return V.rowwise().norm().minCoeff();
}

// Preconditions under which the clustering bound applies: the iterate lies
// strictly inside the ball and V has nearly orthonormal columns.
struct ClusteringPreconditions {
  bool interior = false;
  double orthonormality_deviation = 0.0;  // ||V^T V - I||_2
  bool holds = false;
};

inline ClusteringPreconditions clustering_preconditions(
    const Matrix& V, double radius, double orth_threshold = 0.1) {
  ClusteringPreconditions out;
  out.interior = V.norm() < radius;
  const Matrix gram =
      V.transpose() * V - Matrix::Identity(V.cols(), V.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  out.orthonormality_deviation = es.eigenvalues().cwiseAbs().maxCoeff();
  out.holds = out.interior && out.orthonormality_deviation <= orth_threshold;
  return out;
}

inline double smallest_singular_value(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  return s.size() == 0 ? 0.0 : s[s.size() - 1];
}

struct SubsetSingularValue {
  double value = 0.0;
  bool approximate = false;
  std::int64_t subsets = 0;
};

// min over column subsets T with |T| = n of the n-th singular value of B_T.
// Exhaustive when d <= exact_limit; otherwise the minimum over `samples`
// random subsets, flagged approximate.
inline SubsetSingularValue bp_min_subset_singular(const Matrix& B,
                                                  int exact_limit = 20,
                                                  int samples = 2000,
                                                  std::uint64_t seed = 7) {
  const Index n = B.rows();
  const Index d = B.cols();
  require(n >= 1 && n <= d, "bp_min_subset_singular: need 1 <= n <= d");
  SubsetSingularValue out;
  out.value = std::numeric_limits<double>::infinity();
  Matrix sub(n, n);
  auto visit = [&](const std::vector<Index>& cols) {
    for (Index j = 0; j < n; ++j) sub.col(j) = B.col(cols[static_cast<size_t>(j)]);
    out.value = std::min(out.value, smallest_singular_value(sub));
    ++out.subsets;
  };
  if (d <= exact_limit) {
    std::vector<Index> cols(static_cast<size_t>(n));
    std::iota(cols.begin(), cols.end(), Index{0});
    while (true) {
      visit(cols);
      // Next combination in lexicographic order.
      Index i = n - 1;
      while (i >= 0 && cols[static_cast<size_t>(i)] == d - n + i) --i;
      if (i < 0) break;
      ++cols[static_cast<size_t>(i)];
      for (Index j = i + 1; j < n; ++j) {
        cols[static_cast<size_t>(j)] = cols[static_cast<size_t>(j - 1)] + 1;
      }
    }
  } else {
    out.approximate = true;
    std::mt19937_64 rng(seed);
    std::vector<Index> all(static_cast<size_t>(d));
    std::iota(all.begin(), all.end(), Index{0});
    for (int s = 0; s < samples; ++s) {
      std::shuffle(all.begin(), all.end(), rng);
      std::vector<Index> cols(all.begin(), all.begin() + n);
      std::sort(cols.begin(), cols.end());
      visit(cols);
    }
  }
  return out;
}

struct BpConditionReport {
  bool holds = false;
  double z_nth = 0.0;         // n-th largest magnitude of z
  double min_singular = 0.0;  // min_T eta_n(B_T)
  double threshold = 0.0;     // nu / (2 sqrt(min_singular))
  bool approximate = false;
};

// |z_(n)| >= nu / (2 sqrt(min_{|T|=n} eta_n(B_T))).
inline BpConditionReport bp_nu_condition(const Vector& z, const Matrix& B,
                                         double nu,
                                         const SubsetSingularValue* cached = nullptr) {
  require(nu > 0.0, "bp_nu_condition: nu must be positive");
  require(z.size() == B.cols(), "bp_nu_condition: dimension mismatch");
  const Index n = B.rows();
  BpConditionReport out;
  const SubsetSingularValue subset =
      cached != nullptr ? *cached : bp_min_subset_singular(B);
  out.min_singular = subset.value;
  out.approximate = subset.approximate;
  std::vector<double> mags(static_cast<size_t>(z.size()));
  for (Index i = 0; i < z.size(); ++i) mags[static_cast<size_t>(i)] = std::abs(z[i]);
  std::nth_element(mags.begin(), mags.begin() + (n - 1), mags.end(),
                   std::greater<>());
  out.z_nth = mags[static_cast<size_t>(n - 1)];
  if (out.min_singular <= 0.0) {
    out.threshold = std::numeric_limits<double>::infinity();
    out.holds = false;
    return out;
  }
  out.threshold = nu / (2.0 * std::sqrt(out.min_singular));
  out.holds = out.z_nth > 0.0 && out.z_nth >= out.threshold;
  return out;
}

// Lower bound on nu for the squared-variable basis pursuit reformulation at
// x = [u1; u2]: since DA(x)^T A(x) = 2 diag(x) [B^T r; -B^T r] with
// r = A(x), its norm equals 2 ||diag(sqrt(a)) B^T r|| where a = u1^2 + u2^2,
// which is at least 2 eta_n(B diag(sqrt(a))) ||r||.
inline double bp_nu_lower_bound(const Matrix& B, const Vector& x) {
  const Index d = B.cols();
  require(x.size() == 2 * d, "bp_nu_lower_bound: dimension mismatch");
  const Vector amp = (x.head(d).array().square() + x.tail(d).array().square())
                         .sqrt()
                         .matrix();
  const Matrix scaled = B * amp.asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(scaled);
  const auto& s = svd.singularValues();
  const Index n = B.rows();
  return 2.0 * (s.size() >= n ? s[n - 1] : 0.0);
}

// eta_min(B) ||x|| for B symmetric positive definite.
inline double geneig_nu_lower_bound(const Matrix& B, const Vector& x) {
  require(B.rows() == B.cols() && B.rows() == x.size(),
          "geneig_nu_lower_bound: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(B, Eigen::EigenvaluesOnly);
  const double eta_min = es.eigenvalues().minCoeff();
  if (!(eta_min > 0.0)) {
    throw DomainError("geneig_nu_lower_bound: B is not positive definite");
  }
  return eta_min * x.norm();
}

}  // namespace ialm
