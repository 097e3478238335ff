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

// Inner solvers for the augmented Lagrangian subproblem
//
//   min_x L_beta(x, y) + g(x)
//
// to first-order (or, for the trust-region solver, second-order) accuracy
// eps. Every solver counts its oracle calls.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <variant>

#include "ialm/common.hpp"
#include "ialm/core.hpp"
#include "ialm/stationarity.hpp"

namespace ialm {

struct ApgmOptions {
  int max_iters = 50000;
  double shrink = 0.5;
  // First trial step. Ignored when the problem exposes enough smoothness
  // constants for lipschitz_bound.
  double initial_step = 1.0;
  // Each iteration starts its line search at growth * (last accepted step).
  double step_growth = 1.25;
  double min_step = 1e-18;
  bool restart = true;
};

struct ProjectedGradientOptions {
  int max_iters = 50000;
  double shrink = 0.5;
  double initial_step = 1.0;
  double step_growth = 1.25;
  double min_step = 1e-18;
};

struct TrustRegionOptions {
  int max_iters = 2000;
  double initial_radius = 1.0;
  double max_radius = 1e3;
  // Relative forcing term for truncated CG: stop when
  // ||r|| <= min(cg_tol, sqrt(||g||)) ||g||.
  double cg_tol = 0.1;
  int cg_max_iters = 0;  // 0 means 2 * dim
  // The negative-curvature check runs to absolute accuracy
  // eig_tol_factor * eps.
  double eig_tol_factor = 0.1;
  int eig_max_iters = 500000;
};

using SubsolverKind =
    std::variant<ApgmOptions, ProjectedGradientOptions, TrustRegionOptions>;

struct SubsolverResult {
  Vector x_out;
  double certified_residual = std::numeric_limits<double>::infinity();
  OracleCounts oracle_calls;
  bool converged = false;
  int inner_iters = 0;
  // Last accepted step (proximal solvers) or radius (trust region).
  double final_step = 0.0;
  std::optional<double> min_eig;
};

namespace detail {

inline void check_subsolver_inputs(const ProblemDef& prob, const Vector& y,
                                   double beta, const Vector& x0, double eps) {
  require(eps > 0.0, "subsolver: eps must be positive");
  require(beta > 0.0, "subsolver: beta must be positive");
  require(x0.size() == prob.dim_primal, "subsolver: x0 dimension mismatch");
  require(y.size() == prob.dim_constraint, "subsolver: y dimension mismatch");
  require(x0.allFinite() && y.allFinite(), "subsolver: non-finite input");
  if (const auto* ind = std::get_if<IndicatorTerm>(&prob.prox)) {
    if (!ind->contains(x0, kMembershipTol)) {
      throw InfeasiblePointError("subsolver: x0 is outside the constraint set");
    }
  }
}

// L_beta without throwing, so that line searches can reject overflowing
// trial points.
inline double al_value_unchecked(const ProblemDef& prob, const Vector& x,
                                 const Vector& y, double beta) {
  const Vector ax = prob.A_eval(x);
  return prob.f_eval(x) + ax.dot(y) + 0.5 * beta * ax.squaredNorm();
}

struct ProxGradientSettings {
  int max_iters;
  double shrink;
  double initial_step;
  double step_growth;
  double min_step;
  bool momentum;
};

// Shared body of apgm and projected_gradient.
//
// Each iteration takes a backtracked proximal step from the extrapolated
// point w (w = x without momentum). The gradient-mapping bound
// (1 + eta * lambda_est) ||w - x+|| / eta triggers an exact check of
// dist(-grad L(x+), dg(x+)); a failed check raises lambda_est with the
// observed secant curvature. Momentum restarts whenever L_beta would
// increase, so the accepted sequence is monotone.
inline SubsolverResult prox_gradient(const ProblemDef& prob, const Vector& y,
                                     double beta, const Vector& x0, double eps,
                                     const ProxGradientSettings& s) {
  check_subsolver_inputs(prob, y, beta, x0, eps);
  require(s.max_iters >= 1, "subsolver: max_iters must be >= 1");
  require(s.shrink > 0.0 && s.shrink < 1.0, "subsolver: shrink must be in (0,1)");
  require(s.initial_step > 0.0, "subsolver: initial_step must be positive");
  require(s.step_growth >= 1.0, "subsolver: step_growth must be >= 1");

  SubsolverResult out;
  OracleCounts& calls = out.oracle_calls;

  auto evaluate = [&](const Vector& point) {
    ++calls.f_evals;
    ++calls.grad_evals;
    return al_evaluate(prob, point, y, beta);
  };

  Vector x = x0;
  AlEvaluation ex = evaluate(x);
  double value_x = ex.value;
  bool grad_at_x = true;

  out.x_out = x;
  out.certified_residual = subdifferential_distance(prob.prox, x, -ex.grad);
  if (out.certified_residual <= eps) {
    out.converged = true;
    out.final_step = s.initial_step;
    return out;
  }

  double eta = s.initial_step;
  if (auto bound = lipschitz_bound_at(prob, y, beta, ex.residual.norm());
      bound && *bound > 0.0) {
    eta = 1.0 / *bound;
  }

  Vector x_prev = x;
  double t = 1.0;
  double curvature = 0.0;

  for (int it = 1; it <= s.max_iters; ++it) {
    out.inner_iters = it;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double coef = s.momentum ? (t - 1.0) / t_next : 0.0;
    const bool extrapolate = coef > 0.0;

    Vector w;
    double value_w;
    Vector grad_w;
    if (extrapolate) {
      w = x + coef * (x - x_prev);
      AlEvaluation ew = evaluate(w);
      value_w = ew.value;
      grad_w = std::move(ew.grad);
    } else {
      if (!grad_at_x) {
        ex = evaluate(x);
        grad_at_x = true;
      }
      w = x;
      value_w = value_x;
      grad_w = ex.grad;
    }

    // Below this size the quadratic term of the decrease test is lost in the
    // rounding of L_beta, so the test switches to the secant curvature
    // ||grad(x+) - grad(w)|| / ||x+ - w|| <= 1/step.
    const double resolvable = 1e-10 * (1.0 + std::abs(value_w));
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() *
                         (1.0 + std::abs(value_w));
    double step = eta * s.step_growth;
    Vector x_plus;
    double value_plus;
    Vector diff;
    std::optional<AlEvaluation> at_plus;
    while (true) {
      x_plus = apply_prox(prob.prox, w - step * grad_w, step);
      ++calls.prox_evals;
      diff = x_plus - w;
      const double quad = diff.squaredNorm() / (2.0 * step);
      bool accept;
      at_plus.reset();
      if (quad >= resolvable) {
        ++calls.f_evals;
        value_plus = al_value_unchecked(prob, x_plus, y, beta);
        accept = std::isfinite(value_plus) &&
                 value_plus <= value_w + grad_w.dot(diff) + quad + slack;
      } else {
        at_plus = evaluate(x_plus);
        value_plus = at_plus->value;
        accept = std::isfinite(value_plus) && at_plus->grad.allFinite() &&
                 step * (at_plus->grad - grad_w).norm() <= diff.norm();
      }
      if (value_plus == -std::numeric_limits<double>::infinity()) {
        throw DivergenceError("augmented Lagrangian is unbounded below");
      }
      if (accept) break;
      step *= s.shrink;
      if (step < s.min_step) {
        // Line search stalled; report the current iterate unconverged.
        out.x_out = x;
        out.final_step = eta;
        return out;
      }
    }
    eta = step;

    if (extrapolate && value_plus > value_x + slack) {
      t = 1.0;
      x_prev = x;
      continue;
    }

    const double lambda_est = std::max(1.0 / step, curvature);
    const double bound = (1.0 + step * lambda_est) * diff.norm() / step;

    x_prev = std::move(x);
    x = std::move(x_plus);
    value_x = value_plus;
    grad_at_x = false;
    t = s.momentum ? t_next : 1.0;

    if (bound <= eps || !s.momentum || at_plus) {
      // The exact residual is checked whenever the gradient at x is already
      // available or will be needed next iteration.
      if (at_plus) {
        ex = std::move(*at_plus);
      } else {
        ex = evaluate(x);
      }
      grad_at_x = true;
      value_x = ex.value;
      const double residual = subdifferential_distance(prob.prox, x, -ex.grad);
      out.x_out = x;
      out.certified_residual = residual;
      if (residual <= eps) {
        out.converged = true;
        out.final_step = eta;
        return out;
      }
      const double dn = diff.norm();
      if (dn > 0.0) curvature = std::max(curvature, (ex.grad - grad_w).norm() / dn);
    }
  }
  out.x_out = x;
  out.final_step = eta;
  if (!grad_at_x) {
    ex = evaluate(x);
  }
  out.certified_residual = subdifferential_distance(prob.prox, x, -ex.grad);
  out.converged = out.certified_residual <= eps;
  return out;
}

}  // namespace detail

// Accelerated proximal gradient with backtracking and function-value restart.
inline SubsolverResult apgm(const ProblemDef& prob, const Vector& y,
                            double beta, const Vector& x0, double eps,
                            const ApgmOptions& opts = {}) {
  return detail::prox_gradient(
      prob, y, beta, x0, eps,
      {opts.max_iters, opts.shrink, opts.initial_step, opts.step_growth,
       opts.min_step, opts.restart});
}

// Plain proximal (projected) gradient with backtracking.
inline SubsolverResult projected_gradient(const ProblemDef& prob,
                                          const Vector& y, double beta,
                                          const Vector& x0, double eps,
                                          const ProjectedGradientOptions& opts = {}) {
  return detail::prox_gradient(
      prob, y, beta, x0, eps,
      {opts.max_iters, opts.shrink, opts.initial_step, opts.step_growth,
       opts.min_step, false});
}

namespace detail {

// Largest tau >= 0 with ||z + tau d|| = radius.
inline double boundary_step(const Vector& z, const Vector& d, double radius) {
  const double a = d.squaredNorm();
  const double b = 2.0 * z.dot(d);
  const double c = z.squaredNorm() - radius * radius;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

// Steihaug truncated CG on the model <g, p> + 0.5 <p, H p>, ||p|| <= radius.
inline Vector steihaug_cg(const LinearAction& hess, const Vector& g,
                          double radius, double forcing, int max_iters,
                          std::int64_t& hvp_count) {
  Vector z = Vector::Zero(g.size());
  Vector r = g;
  Vector d = -r;
  const double stop = forcing * g.norm();
  double rr = r.squaredNorm();
  for (int j = 0; j < max_iters; ++j) {
    const Vector hd = hess(d);
    ++hvp_count;
    const double dhd = d.dot(hd);
    if (dhd <= 0.0) {
      return z + boundary_step(z, d, radius) * d;
    }
    const double alpha = rr / dhd;
    Vector z_next = z + alpha * d;
    if (z_next.norm() >= radius) {
      return z + boundary_step(z, d, radius) * d;
    }
    r += alpha * hd;
    const double rr_next = r.squaredNorm();
    z = std::move(z_next);
    if (std::sqrt(rr_next) <= stop) break;
    d = -r + (rr_next / rr) * d;
    rr = rr_next;
  }
  return z;
}

}  // namespace detail

// Trust-region method with Steihaug-CG steps. Stops when ||grad L|| <= eps
// and lambda_min(Hessian) >= -eps; when only the curvature test fails, steps
// a full radius along the negative-curvature direction.
inline SubsolverResult trust_region(const ProblemDef& prob, const Vector& y,
                                    double beta, const Vector& x0, double eps,
                                    const TrustRegionOptions& opts = {}) {
  if (!is_zero_term(prob.prox)) {
    throw CapabilityError("trust_region requires a problem without g");
  }
  if (!prob.has_hvp()) {
    throw CapabilityError("trust_region requires a Hessian-vector product");
  }
  detail::check_subsolver_inputs(prob, y, beta, x0, eps);
  require(opts.initial_radius > 0.0 && opts.max_radius >= opts.initial_radius,
          "trust_region: invalid radius options");
  require(opts.cg_tol > 0.0 && opts.eig_tol_factor > 0.0,
          "trust_region: tolerances must be positive");

  SubsolverResult out;
  OracleCounts& calls = out.oracle_calls;
  const int cg_max = opts.cg_max_iters > 0
                         ? opts.cg_max_iters
                         : static_cast<int>(2 * prob.dim_primal);

  auto evaluate = [&](const Vector& point) {
    ++calls.f_evals;
    ++calls.grad_evals;
    return al_evaluate(prob, point, y, beta);
  };

  Vector x = x0;
  AlEvaluation ex = evaluate(x);
  double radius = opts.initial_radius;
  Vector eig_warm;

  for (int it = 1; it <= opts.max_iters; ++it) {
    out.inner_iters = it;
    const double gnorm = ex.grad.norm();
    const LinearAction hess = hessian_action(prob, x, y, beta);
    Vector p;
    if (gnorm <= eps) {
      MinEigOptions eo;
      eo.tol = opts.eig_tol_factor * eps;
      eo.absolute_tol = true;
      eo.max_iters = opts.eig_max_iters;
      eo.warm_start = eig_warm.size() == x.size() ? &eig_warm : nullptr;
      const MinEigResult eig = min_eig_estimate(hess, prob.dim_primal, eo);
      calls.hvp_evals += eig.matvecs;
      eig_warm = eig.vector;
      out.min_eig = eig.lambda_min;
      if (eig.lambda_min >= -eps) {
        out.x_out = x;
        out.certified_residual = gnorm;
        out.converged = true;
        out.final_step = radius;
        return out;
      }
      p = radius * eig.vector;
      if (ex.grad.dot(p) > 0.0) p = -p;
    } else {
      const double forcing = std::min(opts.cg_tol, std::sqrt(gnorm));
      p = detail::steihaug_cg(hess, ex.grad, radius, forcing, cg_max,
                              calls.hvp_evals);
    }

    const Vector hp = hess(p);
    ++calls.hvp_evals;
    const double predicted = -(ex.grad.dot(p) + 0.5 * p.dot(hp));
    const Vector x_trial = x + p;
    ++calls.f_evals;
    const double value_trial = detail::al_value_unchecked(prob, x_trial, y, beta);
    if (value_trial == -std::numeric_limits<double>::infinity()) {
      throw DivergenceError("augmented Lagrangian is unbounded below");
    }
    double ratio = -1.0;
    if (predicted > 0.0 && std::isfinite(value_trial)) {
      const double actual = ex.value - value_trial;
      // Both reductions at rounding level: the model is as good as it gets.
      const double noise = 1e-14 * (1.0 + std::abs(ex.value));
      ratio = (predicted <= noise && std::abs(actual) <= noise)
                  ? 1.0
                  : actual / predicted;
    }

    if (ratio > 0.1) {
      x = x_trial;
      ex = evaluate(x);
    }
    if (ratio < 0.1) {
      radius *= 0.25;
    } else if (ratio > 0.75 && p.norm() >= 0.99 * radius) {
      radius = std::min(2.0 * radius, opts.max_radius);
    }
    if (radius < 1e-14 * (1.0 + x.norm())) break;
  }
  out.x_out = x;
  out.certified_residual = ex.grad.norm();
  out.converged = false;
  out.final_step = radius;
  return out;
}

// Dispatch on the configured solver. Proximal solvers take their first
// trial step from warm_step when it is positive.
inline SubsolverResult run_subsolver(const SubsolverKind& kind,
                                     const ProblemDef& prob, const Vector& y,
                                     double beta, const Vector& x0, double eps,
                                     double warm_step = 0.0) {
  return std::visit(
      [&](const auto& opts) -> SubsolverResult {
        using T = std::decay_t<decltype(opts)>;
        T o = opts;
        if constexpr (std::is_same_v<T, TrustRegionOptions>) {
          if (warm_step > 0.0) {
            o.initial_radius = std::min(std::max(warm_step, 1e-8), o.max_radius);
          }
          return trust_region(prob, y, beta, x0, eps, o);
        } else {
          if (warm_step > 0.0) o.initial_step = warm_step;
          if constexpr (std::is_same_v<T, ApgmOptions>) {
            return apgm(prob, y, beta, x0, eps, o);
          } else {
            return projected_gradient(prob, y, beta, x0, eps, o);
          }
        }
      },
      kind);
}

}  // namespace ialm
