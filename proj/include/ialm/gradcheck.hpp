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

// Randomized finite-difference checks of the ProblemDef callbacks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ialm/common.hpp"
#include "ialm/core.hpp"

namespace ialm {

struct DerivativeCheck {
  std::string name;
  bool skipped = false;
  int trials = 0;
  double worst_error = 0.0;  // relative to max(1, norm of the analytic side)
  bool passed = true;
};

struct GradcheckReport {
  std::vector<DerivativeCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const DerivativeCheck& c) { return c.passed; });
  }
};

struct GradcheckOptions {
  int trials = 100;
  double tol = 1e-5;
  double symmetry_tol = 1e-8;
  std::uint64_t seed = 1;
  double point_radius = 1.0;  // x drawn uniformly in the ball of this radius
  double beta_min = 0.1;
  double beta_max = 10.0;
};

namespace detail {

inline Vector random_unit(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  const double nrm = v.norm();
  return nrm > 0.0 ? Vector(v / nrm) : Vector(Vector::Unit(n, 0));
}

inline Vector random_in_ball(Index n, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double rad = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(n));
  return rad * random_unit(n, rng);
}

inline double fd_step(const Vector& x) { return 1e-6 * (1.0 + x.norm()); }

inline void record(DerivativeCheck& check, double analytic, double numeric,
                   double scale, double tol) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, scale);
  check.worst_error = std::max(check.worst_error, err);
  if (!(err <= tol)) check.passed = false;
  ++check.trials;
}

}  // namespace detail

// Directional central differences at random x (in a ball), y ~ N(0, I) and
// beta uniform in [beta_min, beta_max]:
//   f_grad      <grad f, w>            vs d/dt f(x + t w)
//   al_grad     <grad L, w>            vs d/dt L(x + t w)
//   DA_t_apply  <DA^T v, w>            vs d/dt <A(x + t w), v>
//   hvp         <H w, u>               vs d/dt <grad L(x + t w), u>
//   hvp_sym     |<H w, u> - <H u, w>|
// with w, u, v random unit vectors. Jacobian checks are skipped when m = 0
// and the hvp checks when the problem has none.
inline GradcheckReport run_derivative_checks(const ProblemDef& prob,
                                             const GradcheckOptions& opts = {}) {
  require(opts.trials >= 1, "gradcheck: trials must be >= 1");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> beta_dist(opts.beta_min, opts.beta_max);
  const Index d = prob.dim_primal;
  const Index m = prob.dim_constraint;

  DerivativeCheck fg{"f_grad"}, ag{"al_grad"}, da{"DA_t_apply"}, hv{"hvp"},
      hs{"hvp_symmetry"};
  da.skipped = m == 0;
  hv.skipped = hs.skipped = !prob.has_hvp();

  for (int t = 0; t < opts.trials; ++t) {
    const Vector x = detail::random_in_ball(d, opts.point_radius, rng);
    Vector y(m);
    for (Index i = 0; i < m; ++i) y[i] = normal(rng);
    const double beta = beta_dist(rng);
    const Vector w = detail::random_unit(d, rng);
    const double h = detail::fd_step(x);
    const Vector xp = x + h * w;
    const Vector xm = x - h * w;

    const Vector gf = prob.f_grad(x);
    detail::record(fg, gf.dot(w), (prob.f_eval(xp) - prob.f_eval(xm)) / (2 * h),
                   gf.norm(), opts.tol);

    const Vector gl = al_grad(prob, x, y, beta);
    detail::record(ag, gl.dot(w),
                   (al_value(prob, xp, y, beta) - al_value(prob, xm, y, beta)) /
                       (2 * h),
                   gl.norm(), opts.tol);

    if (!da.skipped) {
      const Vector v = detail::random_unit(m, rng);
      const Vector jt = prob.DA_t_apply(x, v);
      detail::record(da, jt.dot(w),
                     (prob.A_eval(xp) - prob.A_eval(xm)).dot(v) / (2 * h),
                     jt.norm(), opts.tol);
    }

    if (!hv.skipped) {
      const Vector u = detail::random_unit(d, rng);
      const Vector hw = prob.hvp(x, y, beta, w);
      const Vector hu = prob.hvp(x, y, beta, u);
      detail::record(hv, hw.dot(u),
                     (al_grad(prob, xp, y, beta) - al_grad(prob, xm, y, beta))
                             .dot(u) /
                         (2 * h),
                     hw.norm(), opts.tol);
      detail::record(hs, hw.dot(u), hu.dot(w),
                     std::max(hw.norm(), hu.norm()), opts.symmetry_tol);
    }
  }

  GradcheckReport report;
  report.checks = {fg, ag, da, hv, hs};
  return report;
}

}  // namespace ialm
