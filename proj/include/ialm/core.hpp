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

// Problem definition and augmented Lagrangian evaluation.
//
// A problem has the form
//
//   min_x f(x) + g(x)   s.t.   A(x) = 0,
//
// with f and A smooth and g convex with a cheap proximal map. The augmented
// Lagrangian L_beta(x, y) = f(x) + <A(x), y> + (beta/2) ||A(x)||^2 never
// contains g; subsolvers treat g structurally through ProximalTerm.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "ialm/common.hpp"

namespace ialm {

// g == 0.
struct ZeroTerm {};

// g is the indicator of a closed convex set C.
struct IndicatorTerm {
  // Euclidean projection onto C.
  std::function<Vector(const Vector& x)> project;
  // ||P_{T_C(x)}(u)||, which equals dist(u, N_C(x)) = dist(u, dg(x)).
  std::function<double(const Vector& x, const Vector& u)> tangent_residual;
  // Membership with an absolute tolerance.
  std::function<bool(const Vector& x, double tol)> contains;
};

// A general proper closed convex g.
struct GeneralProxTerm {
  // prox_{eta g}(v).
  std::function<Vector(const Vector& v, double eta)> prox;
  // dist(u, dg(x)).
  std::function<double(const Vector& x, const Vector& u)> subdiff_distance;
  // dist(u, dg(x) / beta). Optional; only needed for regularity estimates.
  std::function<double(const Vector& x, const Vector& u, double beta)>
      scaled_subdiff_distance;
};

using ProximalTerm = std::variant<ZeroTerm, IndicatorTerm, GeneralProxTerm>;

// Membership tolerance used wherever a point must lie in C.
inline constexpr double kMembershipTol = 1e-9;

// prox_{eta g}(v): identity, projection, or the general prox map.
inline Vector apply_prox(const ProximalTerm& term, const Vector& v,
                         double eta) {
  return std::visit(
      [&](const auto& t) -> Vector {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ZeroTerm>) {
          return v;
        } else if constexpr (std::is_same_v<T, IndicatorTerm>) {
          return t.project(v);
        } else {
          return t.prox(v, eta);
        }
      },
      term);
}

// dist(u, dg(x)). Throws InfeasiblePointError for an indicator term when x
// is not in C, because the tangent cone is undefined there.
inline double subdifferential_distance(const ProximalTerm& term,
                                       const Vector& x, const Vector& u) {
  return std::visit(
      [&](const auto& t) -> double {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ZeroTerm>) {
          return u.norm();
        } else if constexpr (std::is_same_v<T, IndicatorTerm>) {
          if (!t.contains(x, kMembershipTol)) {
            throw InfeasiblePointError(
                "point is outside the constraint set; tangent cone undefined");
          }
          return t.tangent_residual(x, u);
        } else {
          return t.subdiff_distance(x, u);
        }
      },
      term);
}

inline bool is_zero_term(const ProximalTerm& term) {
  return std::holds_alternative<ZeroTerm>(term);
}

// Smoothness constants: lambda_f, lambda_A are global Lipschitz constants of
// grad f and DA; the primed ones are restricted suprema of ||grad f|| and
// ||DA|| over the ball that contains the iterates.
struct SmoothnessConstants {
  std::optional<double> lambda_f;
  std::optional<double> lambda_A;
  std::optional<double> lambda_f_prime;
  std::optional<double> lambda_A_prime;
};

using HessianVectorProduct = std::function<Vector(
    const Vector& x, const Vector& y, double beta, const Vector& w)>;

struct ProblemDef {
  std::string name;
  Index dim_primal = 0;
  Index dim_constraint = 0;

  std::function<double(const Vector& x)> f_eval;
  std::function<Vector(const Vector& x)> f_grad;
  std::function<Vector(const Vector& x)> A_eval;
  // Action of DA(x)^T on a vector of length dim_constraint.
  std::function<Vector(const Vector& x, const Vector& v)> DA_t_apply;

  ProximalTerm prox = ZeroTerm{};

  // Action of the Hessian in x of L_beta(x, y) on w. Empty when absent.
  HessianVectorProduct hvp;

  SmoothnessConstants constants;

  bool has_hvp() const { return static_cast<bool>(hvp); }
};

namespace detail {

inline void check_dims(const ProblemDef& prob, const Vector& x,
                       const Vector& y, double beta) {
  require(x.size() == prob.dim_primal, "primal dimension mismatch");
  require(y.size() == prob.dim_constraint, "dual dimension mismatch");
  require(beta > 0.0 && std::isfinite(beta), "beta must be finite and positive");
}

}  // namespace detail

// Value, gradient and constraint residual of L_beta at one point.
struct AlEvaluation {
  double value = 0.0;
  Vector grad;
  Vector residual;  // A(x)
};

inline double al_value_from_residual(const ProblemDef& prob, const Vector& x,
                                     const Vector& y, double beta,
                                     const Vector& ax) {
  const double value = prob.f_eval(x) + ax.dot(y) + 0.5 * beta * ax.squaredNorm();
  return checked(value, "augmented Lagrangian value");
}

// f(x) + <A(x), y> + (beta/2) ||A(x)||^2.
inline double al_value(const ProblemDef& prob, const Vector& x,
                       const Vector& y, double beta) {
  detail::check_dims(prob, x, y, beta);
  const Vector ax = prob.A_eval(x);
  return al_value_from_residual(prob, x, y, beta, ax);
}

// grad f(x) + DA(x)^T (y + beta A(x)); one call each to f_grad, A_eval and
// DA_t_apply.
inline Vector al_grad(const ProblemDef& prob, const Vector& x,
                      const Vector& y, double beta) {
  detail::check_dims(prob, x, y, beta);
  const Vector ax = prob.A_eval(x);
  Vector grad = prob.f_grad(x) + prob.DA_t_apply(x, y + beta * ax);
  return checked(grad, "augmented Lagrangian gradient");
}

inline AlEvaluation al_evaluate(const ProblemDef& prob, const Vector& x,
                                const Vector& y, double beta) {
  detail::check_dims(prob, x, y, beta);
  AlEvaluation out;
  out.residual = prob.A_eval(x);
  out.value = al_value_from_residual(prob, x, y, beta, out.residual);
  out.grad = prob.f_grad(x) + prob.DA_t_apply(x, y + beta * out.residual);
  checked(out.grad, "augmented Lagrangian gradient");
  return out;
}

// Upper bound on the Lipschitz constant of grad_x L_beta(., y) over
// {||x|| <= rho, ||A(x)|| <= rho'}:
//
//   lambda_f + sqrt(m) lambda_A ||y|| + (sqrt(m) lambda_A rho' + d lambda_A'^2) beta
inline double lipschitz_bound(double lambda_f, double lambda_A,
                              double lambda_A_prime, Index m, Index d,
                              double y_norm, double rho_prime, double beta) {
  require(lambda_f >= 0 && lambda_A >= 0 && lambda_A_prime >= 0 &&
              y_norm >= 0 && rho_prime >= 0 && beta >= 0 && m >= 0 && d >= 0,
          "lipschitz_bound: inputs must be nonnegative");
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  return lambda_f + sqrt_m * lambda_A * y_norm +
         (sqrt_m * lambda_A * rho_prime +
          static_cast<double>(d) * lambda_A_prime * lambda_A_prime) *
             beta;
}

// lipschitz_bound for the current dual, when the problem exposes the
// constants it needs.
inline std::optional<double> lipschitz_bound_at(const ProblemDef& prob,
                                                const Vector& y, double beta,
                                                double rho_prime) {
  const auto& c = prob.constants;
  if (!c.lambda_f || !c.lambda_A || !c.lambda_A_prime) return std::nullopt;
  return lipschitz_bound(*c.lambda_f, *c.lambda_A, *c.lambda_A_prime,
                         prob.dim_constraint, prob.dim_primal, y.norm(),
                         rho_prime, beta);
}

}  // namespace ialm
