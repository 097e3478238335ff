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

// Inexact augmented Lagrangian outer loop.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ialm/common.hpp"
#include "ialm/core.hpp"
#include "ialm/regularity.hpp"
#include "ialm/stationarity.hpp"
#include "ialm/subsolvers.hpp"

namespace ialm {

struct IalmConfig {
  double beta1 = 1.0;   // initial penalty
  double b = 2.0;       // beta_k = beta1 * b^(k-1)
  double sigma1 = 1.0;  // initial dual step
  double tau_f = 1e-4;
  double tau_s = 1e-3;
  int max_outer = 60;
  StationarityMode mode = StationarityMode::FirstOrder;
  SubsolverKind subsolver = ApgmOptions{};
  int inner_max_iters = 200000;

  void validate() const {
    require(beta1 > 0.0 && std::isfinite(beta1), "beta1 must be positive");
    require(b > 1.0 && std::isfinite(b), "b must be > 1");
    require(sigma1 > 0.0 && std::isfinite(sigma1), "sigma1 must be positive");
    require(tau_f > 0.0, "tau_f must be positive");
    require(tau_s > 0.0, "tau_s must be positive");
    require(max_outer >= 1, "max_outer must be >= 1");
    require(inner_max_iters >= 1, "inner_max_iters must be >= 1");
  }
};

struct TraceRecord {
  int k = 0;
  double beta = 0.0;    // beta_k used by the inner solve
  double eps = 0.0;     // eps_{k+1} = 1 / beta_k
  double sigma = 0.0;   // sigma_{k+1}
  double feasibility = 0.0;    // ||A(x_{k+1})||
  double grad_residual = 0.0;  // at (x_{k+1}, y_k, beta_k)
  NuEstimate nu;               // at (x_{k+1}, beta_k)
  double y_norm = 0.0;         // ||y_{k+1}||
  std::optional<double> min_eig;
  bool inner_converged = false;
  int inner_iters = 0;
  OracleCounts inner_calls;
  double wall_ms = 0.0;
};

enum class StopReason { Certified, MaxOuter, InnerFailure };

inline const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Certified:
      return "certified";
    case StopReason::MaxOuter:
      return "max_outer";
    case StopReason::InnerFailure:
      return "inner_failure";
  }
  return "unknown";
}

struct SolveReport {
  Vector x_final;
  Vector y_final;
  bool certified = false;
  StopReason stop_reason = StopReason::MaxOuter;
  std::vector<TraceRecord> trace;
  OracleCounts totals;
  double A1_norm = 0.0;  // ||A(x_1)||
  double y0_norm = 0.0;
  IalmConfig config;
};

// sigma_{k+1} = sigma1 * min(||A(x_1)|| log^2 2 /
//                            (||A(x_{k+1})|| (k+1) log^2(k+2)), 1)
// with natural logarithms; a zero denominator resolves the min to 1.
inline double dual_step_size(double sigma1, double A1_norm, double Ak1_norm,
                             int k) {
  require(sigma1 > 0.0, "dual_step_size: sigma1 must be positive");
  require(A1_norm >= 0.0 && Ak1_norm >= 0.0,
          "dual_step_size: norms must be nonnegative");
  require(k >= 1, "dual_step_size: k must be >= 1");
  if (Ak1_norm == 0.0) return sigma1;
  const double ln2 = std::log(2.0);
  const double lk = std::log(static_cast<double>(k) + 2.0);
  const double ratio = A1_norm * ln2 * ln2 /
                       (Ak1_norm * (static_cast<double>(k) + 1.0) * lk * lk);
  return sigma1 * std::min(ratio, 1.0);
}

// Upper bound on sum_{k>=1} 1 / (k log^2(k+1)): the first 10^6 terms summed
// exactly plus the integral tail 1 / log(10^6).
inline double dual_series_constant() {
  static const double c = [] {
    constexpr long kTerms = 1000000;
    long double sum = 0.0L;
    // Summed smallest-first to limit rounding.
    for (long k = kTerms; k >= 1; --k) {
      const long double l = std::log(static_cast<long double>(k) + 1.0L);
      sum += 1.0L / (static_cast<long double>(k) * l * l);
    }
    sum += 1.0L / std::log(static_cast<long double>(kTerms));
    // Round up so the double never undercuts the long double value.
    return std::nextafter(static_cast<double>(sum),
                          std::numeric_limits<double>::infinity());
  }();
  return c;
}

// ||y_0|| + sigma1 * c * ||A(x_1)|| * log^2 2, an upper bound on every
// ||y_k||.
inline double y_max_bound(double y0_norm, double sigma1, double A1_norm) {
  require(y0_norm >= 0.0 && sigma1 >= 0.0 && A1_norm >= 0.0,
          "y_max_bound: inputs must be nonnegative");
  if (A1_norm == 0.0) return y0_norm;
  const double ln2 = std::log(2.0);
  return y0_norm + sigma1 * dual_series_constant() * A1_norm * ln2 * ln2;
}

inline double y_max_bound(const SolveReport& report) {
  return y_max_bound(report.y0_norm, report.config.sigma1, report.A1_norm);
}

namespace detail {

// Second-order mode always runs the trust-region solver.
inline SubsolverKind effective_subsolver(const IalmConfig& cfg) {
  SubsolverKind kind = cfg.subsolver;
  if (cfg.mode == StationarityMode::SecondOrder &&
      !std::holds_alternative<TrustRegionOptions>(kind)) {
    kind = TrustRegionOptions{};
  }
  std::visit([&](auto& o) { o.max_iters = cfg.inner_max_iters; }, kind);
  return kind;
}

}  // namespace detail

// Called after each outer iteration with the new record and (x_{k+1}, y_{k+1}).
using IterationObserver = std::function<void(
    const TraceRecord& record, const Vector& x, const Vector& y)>;

// Runs the outer loop from (x1, y0). Iteration k solves the subproblem at
// (beta_k, y_k) to eps_{k+1} = 1/beta_k from the warm start x_k, updates the
// dual with step sigma_{k+1}, and stops once the stationarity test holds at
// (x_{k+1}, y_k, beta_k).
inline SolveReport ialm_solve(const ProblemDef& prob, const IalmConfig& cfg,
                              const Vector& x1, const Vector& y0,
                              const IterationObserver& observer = {}) {
  cfg.validate();
  require(x1.size() == prob.dim_primal, "ialm_solve: x1 dimension mismatch");
  require(y0.size() == prob.dim_constraint, "ialm_solve: y0 dimension mismatch");
  require(x1.allFinite() && y0.allFinite(), "ialm_solve: non-finite start");
  if (const auto* ind = std::get_if<IndicatorTerm>(&prob.prox)) {
    if (!ind->contains(x1, kMembershipTol)) {
      throw InfeasiblePointError("ialm_solve: x1 is outside the constraint set");
    }
  }
  if (cfg.mode == StationarityMode::SecondOrder &&
      (!is_zero_term(prob.prox) || !prob.has_hvp())) {
    throw CapabilityError(
        "second-order mode requires g == 0 and a Hessian-vector product");
  }

  const SubsolverKind kind = detail::effective_subsolver(cfg);
  const bool uses_radius = std::holds_alternative<TrustRegionOptions>(kind);

  SolveReport report;
  report.config = cfg;
  report.A1_norm = prob.A_eval(x1).norm();
  report.y0_norm = y0.norm();
  if (report.A1_norm == 0.0 && prob.dim_constraint > 0) {
    std::clog << "ialm: warning: x1 is feasible, so every dual step is zero; "
                 "the penalty alone drives feasibility\n";
  }

  Vector x = x1;
  Vector y = y0;
  double beta = cfg.beta1;
  double warm_step = 0.0;
  int consecutive_failures = 0;

  for (int k = 1; k <= cfg.max_outer; ++k) {
    const auto start = std::chrono::steady_clock::now();
    TraceRecord rec;
    rec.k = k;
    rec.beta = beta;
    rec.eps = 1.0 / beta;

    SubsolverResult inner = run_subsolver(kind, prob, y, beta, x, rec.eps,
                                          warm_step);
    warm_step = inner.final_step;
    if (uses_radius) warm_step = 0.0;
    x = inner.x_out;
    rec.inner_converged = inner.converged;
    rec.inner_iters = inner.inner_iters;
    rec.inner_calls = inner.oracle_calls;
    report.totals += inner.oracle_calls;

    const Vector ax = prob.A_eval(x);
    rec.feasibility = ax.norm();
    rec.sigma = dual_step_size(cfg.sigma1, report.A1_norm, rec.feasibility, k);
    const Vector y_prev = y;
    y = y + rec.sigma * ax;
    rec.y_norm = y.norm();

    const CertifyResult cert =
        certify(prob, x, y_prev, beta, cfg.mode, cfg.tau_f, cfg.tau_s);
    if (cert.eig) report.totals.hvp_evals += cert.eig->matvecs;
    rec.grad_residual = cert.report.grad_residual;
    rec.min_eig = cert.report.min_eig_estimate;
    rec.nu = nu_estimate(prob, x, beta);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    report.trace.push_back(rec);
    if (observer) observer(rec, x, y);

    if (cert.passed) {
      report.certified = true;
      report.stop_reason = StopReason::Certified;
      break;
    }
    consecutive_failures = inner.converged ? 0 : consecutive_failures + 1;
    if (consecutive_failures >= 2) {
      report.stop_reason = StopReason::InnerFailure;
      break;
    }
    beta *= cfg.b;
  }
  report.x_final = x;
  report.y_final = y;
  return report;
}

}  // namespace ialm
