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

// First- and second-order stationarity certificates.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

#include "ialm/common.hpp"
#include "ialm/core.hpp"

namespace ialm {

struct StationarityReport {
  double grad_residual = 0.0;  // dist(-grad_x L_beta(x, y), dg(x))
  double feasibility = 0.0;    // ||A(x)||
  std::optional<double> min_eig_estimate;
  double beta = 0.0;
};

inline StationarityReport first_order_residual(const ProblemDef& prob,
                                               const Vector& x,
                                               const Vector& y, double beta) {
  require(beta > 0.0, "first_order_residual: beta must be positive");
  detail::check_dims(prob, x, y, beta);
  const Vector ax = prob.A_eval(x);
  const Vector grad = prob.f_grad(x) + prob.DA_t_apply(x, y + beta * ax);
  checked(grad, "augmented Lagrangian gradient");
  StationarityReport report;
  report.grad_residual = subdifferential_distance(prob.prox, x, -grad);
  report.feasibility = ax.norm();
  report.beta = beta;
  return report;
}

using LinearAction = std::function<Vector(const Vector&)>;

struct MinEigOptions {
  double tol = 1e-6;
  int max_iters = 100000;
  // When true, tol is an absolute accuracy; otherwise it is scaled by
  // (1 + ||H||_est).
  bool absolute_tol = false;
  // Iterations spent estimating ||H|| before the shifted phase.
  int norm_iters = 200;
  // Optional starting vector for the shifted phase.
  const Vector* warm_start = nullptr;
};

struct MinEigResult {
  double lambda_min = 0.0;
  // Rayleigh residual ||Hw - lambda w|| at the returned unit vector w.
  double achieved_tol = 0.0;
  double norm_estimate = 0.0;
  bool converged = false;
  int iterations = 0;
  std::int64_t matvecs = 0;
  Vector vector;
};

namespace detail {

inline Vector deterministic_start(Index dim) {
  std::mt19937_64 rng(0x5eed1a1dULL);
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = normal(rng);
  return v / v.norm();
}

}  // namespace detail

// Smallest eigenvalue of a symmetric operator by shifted power iteration.
//
// Phase one estimates c >= ||H|| by power iteration on H. Phase two runs
// power iteration on (cI - H), whose dominant eigenvalue is c - lambda_min,
// and stops once the Rayleigh residual ||Hw - mu w|| meets the tolerance.
// If a Rayleigh quotient ever exceeds c the shift was too small; c is
// enlarged and phase two restarts.
inline MinEigResult min_eig_estimate(const LinearAction& hvp_action, Index dim,
                                     const MinEigOptions& opts = {}) {
  require(dim >= 1, "min_eig_estimate: dim must be >= 1");
  require(opts.tol > 0.0, "min_eig_estimate: tol must be positive");
  require(opts.max_iters >= 1, "min_eig_estimate: max_iters must be >= 1");

  MinEigResult result;
  Vector v = detail::deterministic_start(dim);

  // Phase one: ||H|| estimate.
  double norm_est = 0.0;
  {
    Vector w = v;
    for (int it = 0; it < opts.norm_iters; ++it) {
      Vector hw = hvp_action(w);
      ++result.matvecs;
      const double nrm = hw.norm();
      checked(nrm, "min_eig_estimate operator norm");
      const double previous = norm_est;
      norm_est = std::max(norm_est, nrm);
      if (nrm == 0.0) break;
      w = hw / nrm;
      if (it > 2 && std::abs(nrm - previous) <= 1e-3 * nrm) break;
    }
  }
  result.norm_estimate = norm_est;
  double shift = 1.05 * norm_est + 1e-12;
  const double abs_tol =
      opts.absolute_tol ? opts.tol : opts.tol * (1.0 + norm_est);

  if (opts.warm_start != nullptr && opts.warm_start->size() == dim &&
      opts.warm_start->norm() > 0.0) {
    v = *opts.warm_start / opts.warm_start->norm();
  }

  double best_mu = std::numeric_limits<double>::infinity();
  double best_res = std::numeric_limits<double>::infinity();
  Vector best_v = v;
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vector hv = hvp_action(v);
    ++result.matvecs;
    result.iterations = it + 1;
    const double mu = v.dot(hv);
    checked(mu, "min_eig_estimate Rayleigh quotient");
    const double res = (hv - mu * v).norm();
    if (mu < best_mu || (mu == best_mu && res < best_res)) {
      best_mu = mu;
      best_res = res;
      best_v = v;
    }
    if (res <= abs_tol) {
      result.lambda_min = mu;
      result.achieved_tol = res;
      result.converged = true;
      result.vector = v;
      return result;
    }
    if (mu > shift) shift = 1.5 * mu;
    Vector next = shift * v - hv;
    const double nrm = next.norm();
    if (nrm == 0.0) {
      // v is an eigenvector with eigenvalue equal to the shift.
      result.lambda_min = mu;
      result.achieved_tol = res;
      result.converged = res <= abs_tol;
      result.vector = v;
      return result;
    }
    v = next / nrm;
  }
  result.lambda_min = best_mu;
  result.achieved_tol = best_res;
  result.converged = false;
  result.vector = best_v;
  return result;
}

// Hessian action of L_beta(., y) at x, bound to the given point.
inline LinearAction hessian_action(const ProblemDef& prob, const Vector& x,
                                   const Vector& y, double beta) {
  if (!prob.has_hvp()) {
    throw CapabilityError("problem '" + prob.name +
                          "' does not provide a Hessian-vector product");
  }
  return [&prob, x, y, beta](const Vector& w) { return prob.hvp(x, y, beta, w); };
}

struct CertifyResult {
  bool passed = false;
  StationarityReport report;
  std::optional<MinEigResult> eig;
};

// Outer stopping test: grad_residual + feasibility <= tau_f and, in
// second-order mode, lambda_min(Hessian) >= -tau_s.
inline CertifyResult certify(const ProblemDef& prob, const Vector& x,
                             const Vector& y, double beta,
                             StationarityMode mode, double tau_f, double tau_s,
                             std::optional<MinEigOptions> eig_opts = {}) {
  require(tau_f > 0.0, "certify: tau_f must be positive");
  if (mode == StationarityMode::SecondOrder) {
    require(tau_s > 0.0, "certify: tau_s must be positive");
    if (!is_zero_term(prob.prox)) {
      throw CapabilityError(
          "second-order certification requires a problem without g");
    }
    if (!prob.has_hvp()) {
      throw CapabilityError("second-order certification requires hvp");
    }
  }
  CertifyResult out;
  out.report = first_order_residual(prob, x, y, beta);
  out.passed = out.report.grad_residual + out.report.feasibility <= tau_f;
  if (mode == StationarityMode::SecondOrder) {
    MinEigOptions opts;
    if (eig_opts) {
      opts = *eig_opts;
    } else {
      opts.absolute_tol = true;
      opts.tol = 0.1 * tau_s;
    }
    out.eig = min_eig_estimate(hessian_action(prob, x, y, beta),
                               prob.dim_primal, opts);
    out.report.min_eig_estimate = out.eig->lambda_min;
    out.passed = out.passed && out.eig->lambda_min >= -tau_s;
  }
  return out;
}

}  // namespace ialm
