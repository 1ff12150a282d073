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

#include <cstdint>
#include <span>
#include <vector>

#include "pulseflow/core.hpp"
#include "pulseflow/model.hpp"

namespace pulseflow::model {

/// Penalty weights of the relaxed flow constraints.
struct Lambdas {
  double column = 10.0;   // one-to-many hinge
  double balance = 1.0;   // flow continuity
  double binary = 5.0;    // L1 - L2 row gap

  static Lambdas none() { return {0.0, 0.0, 0.0}; }
};

inline constexpr double kLogClamp = 1e-12;

struct LossBreakdown {
  double ce = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;
  double total = 0.0;
  Lambdas lambdas{};
  std::size_t clamped = 0;  // supervised entries whose probability hit the log clamp

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator*=(double s);
};

/// Penalised flow loss of a soft assignment p against the hard target y.
///   ce = -(1/N) sum_ij y_ij log p_ij         (terminal column included)
///   l2 = (1/N) sum_{j<N} max(0, sum_i p_ij - 1)
///   l3 = (sum_i p_it - sum_{j<N} (1 - sum_i p_ij))^2
///   l4 = (1/N) sum_i (|p_i|_1 - |p_i|_2)
LossBreakdown flow_loss(const AssignmentMatrix& p, const AssignmentMatrix& y, const Lambdas& lambdas);

/// Dense form used during training. `log_p`, when given, supplies exact
/// log-probabilities for the cross-entropy instead of clamped logs.
/// `penalty_grad` receives d(l2, l3, l4 terms)/dp, weighted by the lambdas.
LossBreakdown flow_loss(const Mat& p, std::span<const Index> y, const Lambdas& lambdas, const Mat* log_p = nullptr,
                        Mat* penalty_grad = nullptr);

/// One supervised window: normalised RToAs and the true successor of each sample.
struct Example {
  std::vector<double> normalized;
  std::vector<Index> links;
};

/// Loss of one example and its gradient, accumulated as grads += scale * dL/dtheta.
LossBreakdown backward(const Example& example, const ModelParameters& params, const ModelConfig& config,
                       const Lambdas& lambdas, ModelParameters& grads, double scale = 1.0,
                       Rng* dropout_rng = nullptr);

/// Loss only (no gradient), dropout off.
LossBreakdown evaluate_loss(const Example& example, const ModelParameters& params, const ModelConfig& config,
                            const Lambdas& lambdas);

/// Mean loss and mean gradient over a batch. Per-example gradients are summed
/// in batch order, so the result does not depend on `threads`. With
/// `dropout_seed` set, example k draws its dropout masks from (seed, k).
LossBreakdown batch_gradients(std::span<const Example> batch, const ModelParameters& params,
                              const ModelConfig& config, const Lambdas& lambdas, ModelParameters& grads,
                              unsigned threads = 1, std::optional<std::uint64_t> dropout_seed = std::nullopt);

}  // namespace pulseflow::model
