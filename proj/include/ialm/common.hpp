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

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ialm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error hierarchy. Every failure raised by the library derives from Error so
// that callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated (dimension mismatch, bad
// option value, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A computed quantity overflowed or became NaN.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The augmented Lagrangian diverged inside an inner solver.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A point lies outside the convex set carried by an indicator proximal term.
class InfeasiblePointError : public Error {
 public:
  using Error::Error;
};

// A requested feature needs a callback the problem does not provide.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Mathematical domain violation (e.g. a matrix that must be SPD is not).
class DomainError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline double checked(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw NumericalError(std::string("non-finite value in ") + what);
  }
  return value;
}

inline const Vector& checked(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw NumericalError(std::string("non-finite entry in ") + what);
  }
  return v;
}

// Oracle tallies shared by inner solvers and the outer loop.
struct OracleCounts {
  std::int64_t grad_evals = 0;
  std::int64_t f_evals = 0;
  std::int64_t prox_evals = 0;
  std::int64_t hvp_evals = 0;

  OracleCounts& operator+=(const OracleCounts& other) {
    grad_evals += other.grad_evals;
    f_evals += other.f_evals;
    prox_evals += other.prox_evals;
    hvp_evals += other.hvp_evals;
    return *this;
  }
};

enum class StationarityMode { FirstOrder, SecondOrder };

}  // namespace ialm
