// Copyright 2026 The pdstage Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pdstage/core.hpp"

namespace pdstage {

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  double init_sd = 1e-2;  // N(0, 1e-4) start
  double entropy_tolerance = 1e-5;
  int kl_every = 10;  // KL trace sampling stride after exaggeration
  std::uint64_t seed = 0;

  /// Throws ConfigError unless every setting is positive and
  /// perplexity < (n - 1) / 3.
  void validate(Index n) const {
    if (!(perplexity > 0.0) || iterations < 0 || !(learning_rate > 0.0) || !(exaggeration > 0.0) ||
        exaggeration_iterations < 0 || !(init_sd > 0.0) || !(entropy_tolerance > 0.0) || kl_every < 1)
      throw ConfigError("t-SNE: settings must be positive");
    if (!(3.0 * perplexity < static_cast<double>(n - 1)))
      throw ConfigError("t-SNE: perplexity " + std::to_string(perplexity) + " is infeasible for " + std::to_string(n) +
                        " points (needs perplexity < (N-1)/3)");
  }
};

template <typename Scalar>
struct Affinities {
  MatrixX<Scalar> p;         // symmetric joint affinities, sums to 1
  VectorX<Scalar> beta;      // 1 / (2 sigma^2) per point
  VectorX<Scalar> entropy;   // conditional entropy per point, nats
};

template <typename Derived>
MatrixX<typename Derived::Scalar> squared_distances(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> norms = x.rowwise().squaredNorm();
  MatrixX<Scalar> d = (-2.0 * (x * x.transpose())).eval();
  d.colwise() += norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(Scalar(0));
  d.diagonal().setZero();
  return d;
}

/// Per-point Gaussian conditionals with bandwidths found by bisection on
/// beta so that each row's entropy equals log(perplexity), then the
/// symmetrised joint P = (P_cond + P_cond^T) / 2N.
template <typename Derived>
Affinities<typename Derived::Scalar> joint_affinities(const Eigen::MatrixBase<Derived>& x, double perplexity,
                                                      double tolerance = 1e-5, int max_steps = 200) {
  using Scalar = typename Derived::Scalar;
  if (!x.allFinite()) throw DataError("t-SNE: input contains non-finite values");
  const Index n = x.rows();
  const MatrixX<Scalar> d = squared_distances(x);
  const Scalar target = std::log(static_cast<Scalar>(perplexity));
  MatrixX<Scalar> cond = MatrixX<Scalar>::Zero(n, n);
  Affinities<Scalar> out;
  out.beta.resize(n);
  out.entropy.resize(n);
  for (Index i = 0; i < n; ++i) {
    Scalar beta = 1;
    Scalar lo = 0;
    Scalar hi = std::numeric_limits<Scalar>::infinity();
    // Distances are shifted by the nearest neighbour so exp() never
    // underflows to an all-zero row; entropy is shift invariant.
    Scalar dmin = std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));
    Scalar h = 0;
    for (int step = 0; step < max_steps; ++step) {
      Scalar sum = 0;
      Scalar weighted = 0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const Scalar e = std::exp(-beta * (d(i, j) - dmin));
        cond(i, j) = e;
        sum += e;
        weighted += e * (d(i, j) - dmin);
      }
      h = std::log(sum) + beta * weighted / sum;
      cond.row(i) /= sum;
      const Scalar diff = h - target;
      if (std::abs(diff) < tolerance) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = (beta + lo) / 2;
      }
    }
    out.beta(i) = beta;
    out.entropy(i) = h;
  }
  out.p = (cond + cond.transpose()) / (2 * static_cast<Scalar>(n));
  return out;
}

/// Student-t joint affinities of an embedding; also returns the unnormalised
/// kernel 1 / (1 + |y_i - y_j|^2) used by the gradient.
template <typename Scalar>
MatrixX<Scalar> student_kernel(const MatrixX<Scalar>& y) {
  MatrixX<Scalar> k = (MatrixX<Scalar>::Ones(y.rows(), y.rows()) + squared_distances(y)).cwiseInverse();
  k.diagonal().setZero();
  return k;
}

template <typename Scalar>
MatrixX<Scalar> student_affinities(const MatrixX<Scalar>& y) {
  MatrixX<Scalar> k = student_kernel(y);
  return k / k.sum();
}

/// Sum of p log(p/q) over off-diagonal entries, with 0 log 0 = 0.
template <typename Scalar>
Scalar kl_divergence(const MatrixX<Scalar>& p, const MatrixX<Scalar>& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) throw DataError("kl_divergence: shape mismatch");
  Scalar kl = 0;
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i) {
      if (i == j || p(i, j) <= 0) continue;
      if (q(i, j) <= 0) throw NumericalError("kl_divergence: q is zero where p is positive");
      kl += p(i, j) * std::log(p(i, j) / q(i, j));
    }
  return kl;
}

template <typename Scalar>
Scalar tsne_objective(const MatrixX<Scalar>& p, const MatrixX<Scalar>& y) {
  return kl_divergence(p, student_affinities(y));
}

namespace detail {

// Fills \`kernel\` with 1 / (1 + |y_i - y_j|^2) (zero diagonal) and \`grad\`
// with the gradient of KL(exaggeration * P || Q); returns the kernel sum.
template <typename Scalar>
Scalar gradient_into(const MatrixX<Scalar>& p, const MatrixX<Scalar>& y, Scalar exaggeration, MatrixX<Scalar>& kernel,
                     MatrixX<Scalar>& grad) {
  const Index n = y.rows();
  Scalar z = 0;
  for (Index j = 0; j < n; ++j) {
    kernel(j, j) = 0;
    for (Index i = j + 1; i < n; ++i) {
      const Scalar dx = y(i, 0) - y(j, 0);
      const Scalar dy = y(i, 1) - y(j, 1);
      const Scalar k = 1 / (1 + dx * dx + dy * dy);
      kernel(i, j) = k;
      kernel(j, i) = k;
      z += 2 * k;
    }
  }
  grad.setZero(n, 2);
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i) {
      const Scalar k = kernel(i, j);
      const Scalar m = (exaggeration * p(i, j) - k / z) * k;
      const Scalar gx = m * (y(i, 0) - y(j, 0));
      const Scalar gy = m * (y(i, 1) - y(j, 1));
      grad(i, 0) += gx;
      grad(i, 1) += gy;
      grad(j, 0) -= gx;
      grad(j, 1) -= gy;
    }
  grad *= 4;
  return z;
}

template <typename Scalar>
Scalar kl_from_kernel(const MatrixX<Scalar>& p, const MatrixX<Scalar>& kernel, Scalar z) {
  Scalar kl = 0;
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i)
      if (i != j && p(i, j) > 0) kl += p(i, j) * std::log(p(i, j) * z / kernel(i, j));
  return kl;
}

}  // namespace detail

/// dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
template <typename Scalar>
MatrixX<Scalar> kl_gradient(const MatrixX<Scalar>& p, const MatrixX<Scalar>& y, Scalar exaggeration = 1) {
  MatrixX<Scalar> kernel(y.rows(), y.rows());
  MatrixX<Scalar> grad;
  detail::gradient_into(p, y, exaggeration, kernel, grad);
  return grad;
}

template <typename Scalar>
struct TsneResult {
  MatrixX<Scalar> embedding;  // N x 2
  VectorX<Scalar> entropy;    // bandwidth search result per point
  /// (iteration, KL) every kl_every iterations once exaggeration has ended.
  std::vector<std::pair<int, Scalar>> kl_trace;
};

template <typename Derived>
TsneResult<typename Derived::Scalar> tsne_embed(const Eigen::MatrixBase<Derived>& x, const TsneConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const Index n = x.rows();
  cfg.validate(n);
  const auto aff = joint_affinities(x, cfg.perplexity, cfg.entropy_tolerance);
  const MatrixX<Scalar>& p = aff.p;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, cfg.init_sd);
  MatrixX<Scalar> y(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < 2; ++c) y(i, c) = static_cast<Scalar>(normal(rng));

  MatrixX<Scalar> update = MatrixX<Scalar>::Zero(n, 2);
  MatrixX<Scalar> gains = MatrixX<Scalar>::Ones(n, 2);
  MatrixX<Scalar> kernel(n, n);
  MatrixX<Scalar> grad(n, 2);
  TsneResult<Scalar> out;
  out.entropy = aff.entropy;
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool early = it < cfg.exaggeration_iterations;
    const Scalar momentum = static_cast<Scalar>(early ? cfg.initial_momentum : cfg.final_momentum);
    detail::gradient_into(p, y, static_cast<Scalar>(early ? cfg.exaggeration : 1.0), kernel, grad);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < 2; ++c) {
        const bool same = (grad(i, c) > 0) == (update(i, c) > 0);
        gains(i, c) = std::max<Scalar>(same ? gains(i, c) * Scalar(0.8) : gains(i, c) + Scalar(0.2), Scalar(0.01));
      }
    update = momentum * update - static_cast<Scalar>(cfg.learning_rate) * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!early && (it - cfg.exaggeration_iterations) % cfg.kl_every == 0)
      out.kl_trace.emplace_back(it, tsne_objective(p, y));
  }
  if (!y.allFinite()) throw NumericalError("t-SNE: embedding diverged");
  out.embedding = std::move(y);
  return out;
}

}  // namespace pdstage
