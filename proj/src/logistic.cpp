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

#include "pdstage/logistic.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "pdstage/tree.hpp"

namespace pdstage {

Matrix LinearModel::decision_function(const Matrix& x) const {
  if (x.cols() != weights.cols())
    throw DataError("logistic: input has " + std::to_string(x.cols()) + " features, model expects " +
                    std::to_string(weights.cols()));
  Matrix s = x * weights.transpose();
  s.rowwise() += bias.transpose();
  return s;
}

Matrix LinearModel::predict_proba(const Matrix& x) const {
  return margin_to_proba(decision_function(x), num_class == 2 ? Objective::kBinaryLogistic : Objective::kSoftmax);
}

Vector pack_parameters(const LinearModel& m) {
  const Index k = m.weights.rows();
  const Index d = m.weights.cols();
  Vector theta(k * d + k);
  for (Index c = 0; c < k; ++c) theta.segment(c * d, d) = m.weights.row(c).transpose();
  theta.tail(k) = m.bias;
  return theta;
}

void unpack_parameters(const Vector& theta, LinearModel& m) {
  const Index k = m.weights.rows();
  const Index d = m.weights.cols();
  for (Index c = 0; c < k; ++c) m.weights.row(c) = theta.segment(c * d, d).transpose();
  m.bias = theta.tail(k);
}

double logistic_objective(const Vector& theta, const Matrix& x, const Labels& y, const Vector& w,
                          int num_class, double l2, Vector& grad) {
  const Index k = num_class == 2 ? 1 : num_class;
  const Index d = x.cols();
  const Index n = x.rows();
  Matrix wm(k, d);
  for (Index c = 0; c < k; ++c) wm.row(c) = theta.segment(c * d, d).transpose();
  const Vector b = theta.tail(k);

  Matrix s = x * wm.transpose();
  s.rowwise() += b.transpose();
  // resid(i, c) = w_i * (p_ic - [y_i == c]); d nll / d score.
  Matrix resid(n, k);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    if (k == 1) {
      const double z = s(i, 0);
      // log(1 + e^z) computed stably; nll = log(1 + e^z) - y z.
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      loss += w(i) * (softplus - (yi == 1 ? z : 0.0));
      const double p = 1.0 / (1.0 + std::exp(-z));
      resid(i, 0) = w(i) * (p - (yi == 1 ? 1.0 : 0.0));
    } else {
      const double mx = s.row(i).maxCoeff();
      const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
      loss += w(i) * (lse - s(i, yi));
      for (Index c = 0; c < k; ++c) resid(i, c) = w(i) * (std::exp(s(i, c) - lse) - (c == yi ? 1.0 : 0.0));
    }
  }
  const double total = w.sum();
  loss += 0.5 * l2 * wm.squaredNorm();
  Matrix gw = resid.transpose() * x + l2 * wm;
  grad.resize(theta.size());
  for (Index c = 0; c < k; ++c) grad.segment(c * d, d) = gw.row(c).transpose();
  grad.tail(k) = resid.colwise().sum().transpose();
  grad /= total;
  return loss / total;
}

LinearModel train_logistic(const Matrix& x, const Labels& y, int num_class, const Vector& w,
                           const LogisticConfig& cfg) {
  if (num_class < 2) throw ConfigError("logistic: at least two classes are required");
  if (cfg.l2 < 0.0) throw ConfigError("logistic: l2 must be >= 0");
  if (cfg.max_iter < 0) throw ConfigError("logistic: max_iter must be >= 0");
  if (static_cast<Index>(y.size()) != x.rows() || w.size() != x.rows())
    throw DataError("logistic: features, labels and weights differ in length");
  if (x.rows() == 0) throw DataError("logistic: empty training set");
  if (!x.allFinite()) throw NumericalError("logistic: non-finite feature value");

  LinearModel m;
  m.num_class = num_class;
  m.l2 = cfg.l2;
  const Index k = m.num_outputs();
  m.weights = Matrix::Zero(k, x.cols());
  m.bias = Vector::Zero(k);
  std::vector<double> cw(static_cast<std::size_t>(num_class), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_class) throw DataError("logistic: label outside [0, num_class)");
    cw[static_cast<std::size_t>(y[i])] += w(static_cast<Index>(i));
  }
  const double total = w.sum();
  auto safe_log = [](double v) { return std::log(std::max(v, 1e-300)); };
  if (k == 1) {
    m.bias(0) = safe_log(cw[1]) - safe_log(cw[0]);
  } else {
    for (Index c = 0; c < k; ++c) m.bias(c) = safe_log(cw[static_cast<std::size_t>(c)] / total);
  }
  if (cfg.max_iter == 0) return m;

  Vector theta = pack_parameters(m);
  Vector grad;
  double f = logistic_objective(theta, x, y, w, num_class, cfg.l2, grad);
  std::deque<Vector> s_hist, y_hist;
  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() < cfg.tol) break;
    // Two-loop recursion for the quasi-Newton direction.
    Vector q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / y_hist[static_cast<std::size_t>(i)].dot(s_hist[static_cast<std::size_t>(i)]);
      alpha[static_cast<std::size_t>(i)] = rho * s_hist[static_cast<std::size_t>(i)].dot(q);
      q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
      const double beta = rho * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector dir = -q;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      dir = -grad;
      slope = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
    }
    // Backtracking line search on the Armijo condition.
    double step = 1.0;
    Vector next, next_grad;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = theta + step * dir;
      fn = logistic_objective(next, x, y, w, num_class, cfg.l2, next_grad);
      if (std::isfinite(fn) && fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Vector sv = next - theta;
    Vector yv = next_grad - grad;
    if (sv.dot(yv) > 1e-12 * yv.squaredNorm()) {
      s_hist.push_back(std::move(sv));
      y_hist.push_back(std::move(yv));
      if (static_cast<int>(s_hist.size()) > cfg.history) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    theta = std::move(next);
    grad = std::move(next_grad);
    f = fn;
  }
  m.iterations = iter;
  m.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  unpack_parameters(theta, m);
  if (m.gradient_norm >= cfg.tol) {
    std::ostringstream msg;
    msg << "logistic: no convergence after " << iter << " iterations (gradient inf-norm " << m.gradient_norm
        << ", tolerance " << cfg.tol << ")";
    throw NumericalError(msg.str());
  }
  return m;
}

LinearModel train_logistic(const Matrix& x, const Labels& y, const ClassBalanceInfo& balance,
                           const LogisticConfig& cfg) {
  return train_logistic(x, y, static_cast<int>(balance.class_counts.size()), balanced_sample_weights(balance, y),
                        cfg);
}

nlohmann::json to_json(const LinearModel& m) {
  std::vector<std::vector<double>> rows;
  for (Index c = 0; c < m.weights.rows(); ++c)
    rows.emplace_back(m.weights.row(c).data(), m.weights.row(c).data() + m.weights.cols());
  return {{"num_class", m.num_class},
          {"l2", m.l2},
          {"weights", rows},
          {"bias", std::vector<double>(m.bias.data(), m.bias.data() + m.bias.size())}};
}

LinearModel linear_from_json(const nlohmann::json& j) {
  LinearModel m;
  m.num_class = j.at("num_class").get<int>();
  m.l2 = j.at("l2").get<double>();
  auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
  auto bias = j.at("bias").get<std::vector<double>>();
  const Index d = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
  m.weights.resize(static_cast<Index>(rows.size()), d);
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (Index f = 0; f < d; ++f) m.weights(static_cast<Index>(c), f) = rows[c][static_cast<std::size_t>(f)];
  m.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Index>(bias.size()));
  return m;
}

}  // namespace pdstage
