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

// The shipped benchmark problems and their synthetic instance generators:
//
//   * clustering: Burer-Monteiro factorization of the k-means SDP,
//     min tr(D V V^T) s.t. V V^T 1 = 1, V >= 0, ||V||_F^2 <= s;
//   * basis pursuit through the squared-variable reformulation
//     z = u1^2 - u2^2, min ||x||^2 s.t. [B, -B] x^2 = b;
//   * generalized eigenvalues, min x^T C x s.t. x^T B x = 1;
//
// plus a separable quadratic with identically-zero constraints used as an
// unconstrained reference.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ialm/common.hpp"
#include "ialm/core.hpp"

namespace ialm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Clustering

struct ClusteringInstance {
  Matrix D;   // n x n squared distances
  int s = 1;  // number of clusters
  int r = 1;  // factorization rank

  Index n() const { return D.rows(); }
  Index dim() const { return D.rows() * r; }

  void validate() const {
    require(D.rows() >= 1 && D.rows() == D.cols(),
            "clustering: D must be square and nonempty");
    require(s >= 1 && r >= 1, "clustering: s and r must be positive");
    require(D.allFinite(), "clustering: D must be finite");
    require((D.array() >= 0.0).all(), "clustering: D must be nonnegative");
    require(D.diagonal().cwiseAbs().maxCoeff() == 0.0,
            "clustering: D must have a zero diagonal");
    const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
    require((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
            "clustering: D must be symmetric");
  }
};

// Row-major view of x as the n x r factor V (row i is x_i).
inline Eigen::Map<const RowMatrix> as_factor(const Vector& x, Index n,
                                             Index r) {
  return Eigen::Map<const RowMatrix>(x.data(), n, r);
}

inline Vector flatten_factor(const Matrix& V) {
  RowMatrix rm = V;
  return Eigen::Map<const Vector>(rm.data(), rm.size());
}

// Euclidean projection onto {x >= 0} intersected with {||x|| <= radius}.
inline Vector project_orthant_ball(const Vector& x, double radius) {
  Vector u = x.cwiseMax(0.0);
  const double nrm = u.norm();
  // A rescaled vector can overshoot the radius by an ulp; leaving such
  // points alone keeps the projection idempotent.
  if (nrm > radius * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) {
    u *= radius / nrm;
  }
  return u;
}

// ||P_{T_C(x)}(u)|| for C = {x >= 0} intersected with the ball of the given
// radius. Coordinates at zero keep only their nonnegative part; within 1e-9
// of the sphere the outward radial component of the free coordinates is
// removed as well. The two constraints act on disjoint coordinates, so the
// projection separates.
inline double orthant_ball_tangent_residual(const Vector& x, const Vector& u,
                                            double radius) {
  Vector p = u;
  double free_sq = 0.0;
  double ip = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0) {
      p[i] = std::max(u[i], 0.0);
    } else {
      free_sq += x[i] * x[i];
      ip += x[i] * u[i];
    }
  }
  if (std::sqrt(free_sq) >= radius - 1e-9 && ip > 0.0 && free_sq > 0.0) {
    const double coef = ip / free_sq;
    for (Index i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) p[i] -= coef * x[i];
    }
  }
  return p.norm();
}

inline ProblemDef make_clustering(const ClusteringInstance& inst) {
  inst.validate();
  auto data = std::make_shared<const ClusteringInstance>(inst);
  const Index n = inst.n();
  const Index r = inst.r;
  const double radius = std::sqrt(static_cast<double>(inst.s));

  ProblemDef prob;
  prob.name = "clustering";
  prob.dim_primal = n * r;
  prob.dim_constraint = n;

  prob.f_eval = [data, n, r](const Vector& x) {
    const auto V = as_factor(x, n, r);
    const Matrix DV = data->D * V;
    return V.cwiseProduct(DV).sum();
  };
  prob.f_grad = [data, n, r](const Vector& x) {
    const auto V = as_factor(x, n, r);
    RowMatrix G = 2.0 * (data->D * V);
    return Vector(Eigen::Map<const Vector>(G.data(), G.size()));
  };
  prob.A_eval = [n, r](const Vector& x) {
    const auto V = as_factor(x, n, r);
    const Vector s = V.colwise().sum().transpose();
    return Vector(V * s - Vector::Ones(n));
  };
  // Row j of the result is v_j s^T + (V^T v)^T with s = V^T 1.
  prob.DA_t_apply = [n, r](const Vector& x, const Vector& v) {
    const auto V = as_factor(x, n, r);
    const Eigen::RowVectorXd s = V.colwise().sum();
    const Eigen::RowVectorXd vtV = v.transpose() * V;
    RowMatrix out = v * s;
    out.rowwise() += vtV;
    return Vector(Eigen::Map<const Vector>(out.data(), out.size()));
  };

  IndicatorTerm term;
  term.project = [radius](const Vector& x) {
    return project_orthant_ball(x, radius);
  };
  term.tangent_residual = [radius](const Vector& x, const Vector& u) {
    return orthant_ball_tangent_residual(x, u, radius);
  };
  term.contains = [radius](const Vector& x, double tol) {
    return x.minCoeff() >= -tol && x.norm() <= radius + tol;
  };
  prob.prox = std::move(term);
  return prob;
}

// Reads an n x n distance matrix from comma-separated text.
inline Matrix read_distance_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open distance matrix '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
          throw std::invalid_argument(cell);
        }
      } catch (const std::exception&) {
        throw ContractError("distance matrix '" + path +
                            "': malformed entry '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  require(n >= 1, "distance matrix '" + path + "' is empty");
  Matrix D(n, n);
  for (Index i = 0; i < n; ++i) {
    require(static_cast<Index>(rows[static_cast<size_t>(i)].size()) == n,
            "distance matrix '" + path + "' is not square");
    for (Index j = 0; j < n; ++j) D(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  require((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-9,
          "distance matrix '" + path + "' is not symmetric");
  return D;
}

struct SyntheticClusters {
  ClusteringInstance instance;
  std::vector<int> labels;
  Matrix points;  // one point per row
};

// k Gaussian blobs (unit standard deviation) with centers at pairwise
// distance >= separation; D holds squared Euclidean distances and s = k.
// rank <= 0 selects r = k + 2.
inline SyntheticClusters gen_synthetic_clusters(int k, int points_per_cluster,
                                                int dim, double separation,
                                                std::uint64_t seed,
                                                int rank = 0) {
  require(k >= 1 && points_per_cluster >= 1 && dim >= 1,
          "gen_synthetic_clusters: sizes must be positive");
  require(separation >= 0.0, "gen_synthetic_clusters: separation must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double box = separation * std::max(1, k);
  std::uniform_real_distribution<double> uniform(0.0, std::max(box, 1e-12));

  Matrix centers(k, dim);
  for (int c = 0; c < k; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      for (int j = 0; j < dim; ++j) centers(c, j) = uniform(rng);
      placed = true;
      for (int o = 0; o < c; ++o) {
        if ((centers.row(c) - centers.row(o)).norm() < separation) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      centers.row(c).setZero();
      centers(c, 0) = separation * c;
    }
  }

  const int n = k * points_per_cluster;
  SyntheticClusters out;
  out.points.resize(n, dim);
  out.labels.resize(static_cast<size_t>(n));
  for (int c = 0; c < k; ++c) {
    for (int p = 0; p < points_per_cluster; ++p) {
      const int i = c * points_per_cluster + p;
      out.labels[static_cast<size_t>(i)] = c;
      for (int j = 0; j < dim; ++j) out.points(i, j) = centers(c, j) + normal(rng);
    }
  }
  Matrix D(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (out.points.row(i) - out.points.row(j)).squaredNorm();
      D(i, j) = d2;
      D(j, i) = d2;
    }
  }
  out.instance.D = std::move(D);
  out.instance.s = k;
  out.instance.r = rank > 0 ? rank : k + 2;
  return out;
}

// Fraction of point pairs whose predicted relation (same cluster or not)
// matches the labels. Pairs are predicted together when the normalized
// co-membership M_ij / sqrt(M_ii M_jj) of M = V V^T exceeds the threshold;
// the normalization removes the 1/|cluster| scale of the planted solution.
inline double co_cluster_agreement(const Matrix& V,
                                   const std::vector<int>& labels,
                                   double threshold = 0.5) {
  const Index n = V.rows();
  require(static_cast<Index>(labels.size()) == n,
          "co_cluster_agreement: label count mismatch");
  require(n >= 2, "co_cluster_agreement: need at least two points");
  const Matrix M = V * V.transpose();
  std::int64_t agree = 0;
  std::int64_t total = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double denom = std::sqrt(M(i, i) * M(j, j));
      const bool together = denom > 0.0 && M(i, j) / denom > threshold;
      const bool same = labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)];
      agree += together == same ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Basis pursuit

struct BasisPursuitInstance {
  Matrix B;  // n x d
  Vector b;  // length n

  Index n() const { return B.rows(); }
  Index d() const { return B.cols(); }

  void validate() const {
    require(B.rows() >= 1 && B.cols() >= 1, "basis pursuit: empty B");
    require(B.rows() <= B.cols(), "basis pursuit: need n <= d");
    require(b.size() == B.rows(), "basis pursuit: b has the wrong length");
    require(B.allFinite() && b.allFinite(), "basis pursuit: non-finite data");
  }
};

// z = u1^2 - u2^2 for x = [u1; u2].
inline Vector decode_bp(const Vector& x) {
  const Index d = x.size() / 2;
  return (x.head(d).array().square() - x.tail(d).array().square()).matrix();
}

inline ProblemDef make_basis_pursuit(const BasisPursuitInstance& inst) {
  inst.validate();
  auto data = std::make_shared<const BasisPursuitInstance>(inst);
  const Index d = inst.d();

  ProblemDef prob;
  prob.name = "basis_pursuit";
  prob.dim_primal = 2 * d;
  prob.dim_constraint = inst.n();

  prob.f_eval = [](const Vector& x) { return x.squaredNorm(); };
  prob.f_grad = [](const Vector& x) { return Vector(2.0 * x); };
  prob.A_eval = [data](const Vector& x) {
    return Vector(data->B * decode_bp(x) - data->b);
  };
  // 2 x o (Bbar^T v) with Bbar = [B, -B].
  prob.DA_t_apply = [data, d](const Vector& x, const Vector& v) {
    const Vector btv = data->B.transpose() * v;
    Vector out(2 * d);
    out.head(d) = 2.0 * x.head(d).cwiseProduct(btv);
    out.tail(d) = -2.0 * x.tail(d).cwiseProduct(btv);
    return out;
  };
  // 2w + 2 (Bbar^T (y + beta A)) o w + beta DA^T DA w.
  prob.hvp = [data, d](const Vector& x, const Vector& y, double beta,
                       const Vector& w) {
    const Vector ax = data->B * decode_bp(x) - data->b;
    const Vector bt = data->B.transpose() * (y + beta * ax);
    // DA w = 2 Bbar (x o w) = 2 B (u1 o w1 - u2 o w2).
    const Vector xw = x.head(d).cwiseProduct(w.head(d)) -
                      x.tail(d).cwiseProduct(w.tail(d));
    const Vector da_w = 2.0 * (data->B * xw);
    const Vector btda = data->B.transpose() * da_w;
    Vector out(2 * d);
    out.head(d) = 2.0 * w.head(d) + 2.0 * bt.cwiseProduct(w.head(d)) +
                  beta * 2.0 * x.head(d).cwiseProduct(btda);
    out.tail(d) = 2.0 * w.tail(d) - 2.0 * bt.cwiseProduct(w.tail(d)) -
                  beta * 2.0 * x.tail(d).cwiseProduct(btda);
    return out;
  };
  prob.constants.lambda_f = 2.0;
  return prob;
}

// Minimum-norm least-squares z0 = B^T (B B^T)^{-1} b encoded as
// u1 = sqrt(z0+ + offset), u2 = sqrt(z0- + offset). A positive offset keeps
// every coordinate of both halves away from zero, where the gradient
// vanishes identically.
inline Vector bp_least_squares_init(const BasisPursuitInstance& inst,
                                    double offset = 0.0) {
  inst.validate();
  require(offset >= 0.0, "bp_least_squares_init: offset must be >= 0");
  const Matrix gram = inst.B * inst.B.transpose();
  const Vector z0 = inst.B.transpose() * gram.ldlt().solve(inst.b);
  const Index d = inst.d();
  Vector x(2 * d);
  x.head(d) = (z0.cwiseMax(0.0).array().sqrt() + offset).matrix();
  x.tail(d) = ((-z0).cwiseMax(0.0).array().sqrt() + offset).matrix();
  return x;
}

struct BpSample {
  BasisPursuitInstance instance;
  Vector z_star;
};

// B with iid N(0,1) entries; z* k-sparse with N(0,1) amplitudes on a uniform
// random support; b = B z* + noise_sigma * N(0, I).
inline BpSample gen_bp(int d, int n, int k, double noise_sigma,
                       std::uint64_t seed) {
  require(k >= 0 && k <= n && n <= d && n >= 1,
          "gen_bp: need 0 <= k <= n <= d");
  require(noise_sigma >= 0.0, "gen_bp: noise_sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  BpSample out;
  out.instance.B.resize(n, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < n; ++i) out.instance.B(i, j) = normal(rng);
  }
  std::vector<int> idx(static_cast<size_t>(d));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  out.z_star = Vector::Zero(d);
  for (int j = 0; j < k; ++j) out.z_star[idx[static_cast<size_t>(j)]] = normal(rng);
  out.instance.b = out.instance.B * out.z_star;
  if (noise_sigma > 0.0) {
    for (Index i = 0; i < n; ++i) out.instance.b[i] += noise_sigma * normal(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generalized eigenvalue problem

struct GenEigInstance {
  Matrix B;  // SPD
  Matrix C;  // symmetric

  Index n() const { return B.rows(); }

  void validate() const {
    require(B.rows() >= 1 && B.rows() == B.cols() && C.rows() == B.rows() &&
                C.cols() == B.cols(),
            "geneig: B and C must be square of equal size");
    require(B.allFinite() && C.allFinite(), "geneig: non-finite data");
    const double sb = std::max(1.0, B.cwiseAbs().maxCoeff());
    const double sc = std::max(1.0, C.cwiseAbs().maxCoeff());
    require((B - B.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * sb,
            "geneig: B must be symmetric");
    require((C - C.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * sc,
            "geneig: C must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(B, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() > 0.0,
            "geneig: B must be positive definite");
  }
};

inline double spectral_norm_symmetric(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline ProblemDef make_geneig(const GenEigInstance& inst) {
  inst.validate();
  auto data = std::make_shared<const GenEigInstance>(inst);

  ProblemDef prob;
  prob.name = "geneig";
  prob.dim_primal = inst.n();
  prob.dim_constraint = 1;

  prob.f_eval = [data](const Vector& x) { return x.dot(data->C * x); };
  prob.f_grad = [data](const Vector& x) { return Vector(2.0 * (data->C * x)); };
  prob.A_eval = [data](const Vector& x) {
    Vector a(1);
    a[0] = x.dot(data->B * x) - 1.0;
    return a;
  };
  prob.DA_t_apply = [data](const Vector& x, const Vector& v) {
    return Vector(2.0 * v[0] * (data->B * x));
  };
  // 2Cw + 2(y + beta A) Bw + 4 beta (Bx) <Bx, w>.
  prob.hvp = [data](const Vector& x, const Vector& y, double beta,
                    const Vector& w) {
    const Vector bx = data->B * x;
    const double a = x.dot(bx) - 1.0;
    return Vector(2.0 * (data->C * w) + 2.0 * (y[0] + beta * a) * (data->B * w) +
                  4.0 * beta * bx.dot(w) * bx);
  };
  prob.constants.lambda_f = 2.0 * spectral_norm_symmetric(inst.C);
  prob.constants.lambda_A = 2.0 * spectral_norm_symmetric(inst.B);
  return prob;
}

enum class SpectrumKind { GaussianIID, PolyDecay, ExpDecay };

struct Spectrum {
  SpectrumKind kind = SpectrumKind::GaussianIID;
  double p = 1.0;  // decay exponent for PolyDecay / ExpDecay
};

inline Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix G(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) G(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  }
  return Q;
}

// C from the chosen recipe: symmetric part of an iid Gaussian matrix, or a
// rotated diag(i^-p) / diag(10^(-i p)), i = 1..n. B is a rotated diagonal
// with eigenvalues uniform in [0.1, 1] (condition number <= 10).
inline GenEigInstance gen_geneig(int n, const Spectrum& spectrum,
                                 std::uint64_t seed, bool rotate = true) {
  require(n >= 2, "gen_geneig: n must be >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  GenEigInstance out;
  if (spectrum.kind == SpectrumKind::GaussianIID) {
    Matrix G(n, n);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) G(i, j) = normal(rng);
    }
    out.C = 0.5 * (G + G.transpose());
  } else {
    Vector diag(n);
    for (int i = 1; i <= n; ++i) {
      diag[i - 1] = spectrum.kind == SpectrumKind::PolyDecay
                        ? std::pow(static_cast<double>(i), -spectrum.p)
                        : std::pow(10.0, -static_cast<double>(i) * spectrum.p);
    }
    if (rotate) {
      const Matrix Q = random_orthogonal(n, rng);
      out.C = Q * diag.asDiagonal() * Q.transpose();
      out.C = (0.5 * (out.C + out.C.transpose())).eval();
    } else {
      out.C = diag.asDiagonal();
    }
  }
  std::uniform_real_distribution<double> uniform(0.1, 1.0);
  Vector bdiag(n);
  for (Index i = 0; i < n; ++i) bdiag[i] = uniform(rng);
  const Matrix Q = random_orthogonal(n, rng);
  out.B = Q * bdiag.asDiagonal() * Q.transpose();
  out.B = (0.5 * (out.B + out.B.transpose())).eval();
  return out;
}

// ---------------------------------------------------------------------------
// Unconstrained reference: f(x) = 0.5 sum_i h_i x_i^2 with m identically
// zero constraints.

inline ProblemDef make_quadratic(const Vector& h, Index zero_constraints = 0) {
  require(h.size() >= 1 && (h.array() >= 0.0).all() && h.allFinite(),
          "quadratic: curvatures must be finite and nonnegative");
  require(zero_constraints >= 0, "quadratic: constraint count must be >= 0");
  const Index d = h.size();
  const Index m = zero_constraints;
  ProblemDef prob;
  prob.name = "quadratic";
  prob.dim_primal = d;
  prob.dim_constraint = m;
  prob.f_eval = [h](const Vector& x) {
    return 0.5 * x.dot(h.cwiseProduct(x));
  };
  prob.f_grad = [h](const Vector& x) { return Vector(h.cwiseProduct(x)); };
  prob.A_eval = [m](const Vector&) { return Vector(Vector::Zero(m)); };
  prob.DA_t_apply = [d](const Vector&, const Vector&) {
    return Vector(Vector::Zero(d));
  };
  prob.hvp = [h](const Vector&, const Vector&, double, const Vector& w) {
    return Vector(h.cwiseProduct(w));
  };
  prob.constants.lambda_f = h.maxCoeff();
  prob.constants.lambda_A = 0.0;
  prob.constants.lambda_f_prime = 0.0;
  prob.constants.lambda_A_prime = 0.0;
  return prob;
}

// Standard normal draw scaled to the given norm, then mapped into C by the
// problem's proximal map.
inline Vector random_initial_point(const ProblemDef& prob, double scale,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector x(prob.dim_primal);
  for (Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
  x *= scale / x.norm();
  return apply_prox(prob.prox, x, 1.0);
}

}  // namespace ialm
