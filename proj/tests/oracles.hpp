// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used by the unit tests and the acceptance
// runner. They favor obviousness over speed and share no code with the
// library beyond the data types.

#ifndef LF2L_TESTS_ORACLES_HPP_
#define LF2L_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "lf2l/matrix.hpp"
#include "lf2l/nn.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::oracle {

// Forward pass written directly from the layer equations.
inline double naive_output(const nn::ModelParams& params, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  for (const auto& layer : params.layers) {
    std::vector<double> z(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double s = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) s += layer.weights[o * layer.in + i] * a[i];
      switch (layer.activation) {
        case nn::Activation::kRelu: z[o] = s > 0.0 ? s : 0.0; break;
        case nn::Activation::kSigmoid: z[o] = 1.0 / (1.0 + std::exp(-s)); break;
        case nn::Activation::kIdentity: z[o] = s; break;
      }
    }
    a = std::move(z);
  }
  return a[0];
}

inline double naive_loss(const nn::ModelParams& params, const Matrix& x, std::span<const int> y,
                         nn::ClassWeights w) {
  double sum = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double p = naive_output(params, x.row(r));
    const double wy = y[r] == 1 ? w.positive : w.negative;
    sum += -wy * (y[r] == 1 ? std::log(p) : std::log(1.0 - p));
  }
  return sum / static_cast<double>(x.rows());
}

// Central differences of naive_loss over every weight and bias.
inline nn::ModelParams finite_difference_gradient(const nn::ModelParams& params, const Matrix& x,
                                                  std::span<const int> y, nn::ClassWeights w,
                                                  double h) {
  nn::ModelParams probe = params;
  nn::ModelParams grad = nn::zeros_like(params);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto diff = [&](double& slot) {
      const double saved = slot;
      slot = saved + h;
      const double up = naive_loss(probe, x, y, w);
      slot = saved - h;
      const double down = naive_loss(probe, x, y, w);
      slot = saved;
      return (up - down) / (2.0 * h);
    };
    for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i) {
      grad.layers[l].weights[i] = diff(probe.layers[l].weights[i]);
    }
    for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i) {
      grad.layers[l].bias[i] = diff(probe.layers[l].bias[i]);
    }
  }
  return grad;
}

inline std::vector<double> flatten(const nn::ModelParams& p) {
  std::vector<double> out;
  for (const auto& l : p.layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

// Largest entrywise |a - b| / max(|a|, |b|), with entries below `floor` in
// both vectors compared absolutely against `floor`.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Pairwise AUROC: every (positive, negative) pair scores 1, 0.5 or 0.
inline double brute_auroc(std::span<const double> s, std::span<const int> y) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) sum += 1.0;
      else if (s[i] == s[j]) sum += 0.5;
    }
  }
  return sum / static_cast<double>(pairs);
}

// Average precision by sweeping every distinct score as a ">= t" threshold.
inline double brute_auprc(std::span<const double> s, std::span<const int> y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Two-sided Student-t tail P(|T| >= |t|) for an even number of degrees of
// freedom, from the closed-form finite series in cos(theta).
inline double student_t_two_sided_even_df(double t, int df) {
  const long double theta = std::atan(std::abs(static_cast<long double>(t)) / std::sqrt(static_cast<long double>(df)));
  const long double c2 = std::cos(theta) * std::cos(theta);
  long double term = 1.0L;
  long double series = 1.0L;
  for (int k = 1; k <= df / 2 - 1; ++k) {
    term *= c2 * static_cast<long double>(2 * k - 1) / static_cast<long double>(2 * k);
    series += term;
  }
  const long double inside = std::sin(theta) * series;
  return static_cast<double>(1.0L - inside);
}

// Random dense net: 1-3 layers, widths <= 16, single-unit sigmoid head and
// a random hidden activation per layer.
inline nn::ModelParams random_net(RandomEngine& rng, std::size_t max_layers, std::size_t max_width) {
  std::uniform_int_distribution<std::size_t> layers(1, max_layers);
  std::uniform_int_distribution<std::size_t> width(1, max_width);
  std::uniform_int_distribution<int> act(0, 2);
  const std::size_t n = layers(rng);
  std::vector<std::size_t> dims{width(rng)};
  std::vector<nn::Activation> acts;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    dims.push_back(width(rng));
    acts.push_back(static_cast<nn::Activation>(act(rng)));
  }
  dims.push_back(1);
  acts.push_back(nn::Activation::kSigmoid);
  nn::ModelParams p = nn::init_params(dims, acts, rng());
  std::normal_distribution<double> g(0.0, 0.1);
  for (auto& l : p.layers) {
    for (double& b : l.bias) b = g(rng);
  }
  return p;
}

inline Matrix random_matrix(RandomEngine& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = g(rng);
  return m;
}

inline std::vector<int> random_labels(RandomEngine& rng, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng() & 1U);
  return y;
}

}  // namespace lf2l::oracle

#endif  // LF2L_TESTS_ORACLES_HPP_
