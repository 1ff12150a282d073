/*
 * Copyright 2026 The pulseflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Finite-difference oracle for the model gradients. Independent of the
// backward pass: it only calls evaluate_loss.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pulseflow/core.hpp"
#include "pulseflow/loss.hpp"
#include "pulseflow/model.hpp"

namespace pulseflow::model::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.seq_len = 8;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.n_quant = 11;
  c.rel_clip = 2;
  c.lookahead = 8;
  c.dropout = 0.0;
  return c;
}

/// Random window of n samples: normalised inputs and a random feasible link set.
inline Example random_example(std::size_t n, std::mt19937_64& rng) {
  Example ex;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ex.normalized.resize(n);
  for (auto& x : ex.normalized) x = u(rng);
  ex.normalized[0] = 0.0;
  std::vector<Label> labels(n);
  for (auto& l : labels) l = std::uniform_int_distribution<int>(0, 2)(rng);
  ex.links = labels_to_links(labels);
  return ex;
}

/// Parameters with every tensor randomised, so that gains and biases are
/// exercised away from their initial values.
inline ModelParameters random_parameters(const ModelConfig& c, std::uint64_t seed) {
  auto p = ModelParameters::zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  p.for_each([&](const std::string& name, Mat& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
    if (name.find("gain") != std::string::npos) m.array() += 1.0;
  });
  return p;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
};

inline GradCheckReport gradient_check(const ModelConfig& cfg, const Lambdas& lambdas, std::uint64_t seed,
                                      std::size_t n = 6, double step = 1e-5) {
  std::mt19937_64 rng(seed);
  auto params = random_parameters(cfg, seed * 7919 + 1);
  const Example ex = random_example(n, rng);
  ModelParameters grads = ModelParameters::zeros(cfg);
  backward(ex, params, cfg, lambdas, grads);

  std::vector<Mat*> analytic;
  grads.for_each([&](const std::string&, Mat& m) { analytic.push_back(&m); });
  GradCheckReport report;
  std::size_t t = 0;
  params.for_each([&](const std::string& name, Mat& m) {
    const Mat& a = *analytic[t++];
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double saved = m.data()[k];
      m.data()[k] = saved + step;
      const double up = evaluate_loss(ex, params, cfg, lambdas).total;
      m.data()[k] = saved - step;
      const double down = evaluate_loss(ex, params, cfg, lambdas).total;
      m.data()[k] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = a.data()[k];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-5});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = name + "[" + std::to_string(k) + "] analytic " + std::to_string(an) + " fd " +
                       std::to_string(fd);
      }
    }
  });
  return report;
}

}  // namespace pulseflow::model::testing
