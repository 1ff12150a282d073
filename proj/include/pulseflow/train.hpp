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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pulseflow/core.hpp"
#include "pulseflow/loss.hpp"
#include "pulseflow/model.hpp"

namespace pulseflow::train {

using model::Example;
using model::Lambdas;
using model::LossBreakdown;
using model::ModelConfig;
using model::ModelParameters;

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t steps = 1000;
  Lambdas lambdas{};
  bool baseline = false;  // train with every penalty weight at zero
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::size_t eval_every = 0;        // 0: no held-out selection
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t warmup_steps = 0;  // linear ramp from 0 to lr
  bool linear_decay = false;     // after warmup, decay linearly to 0 at `steps`
  unsigned threads = 1;

  static TrainConfig desk();
  static TrainConfig paper();
  static TrainConfig preset(std::string_view name);

  /// Learning rate applied at optimiser step `step` (1-based).
  [[nodiscard]] double learning_rate(std::size_t step) const;
  [[nodiscard]] Lambdas effective_lambdas() const { return baseline ? Lambdas::none() : lambdas; }
  void validate() const;
};

struct AdamState {
  ModelParameters m;
  ModelParameters v;
  std::size_t step = 0;

  static AdamState zeros(const ModelConfig& config);
};

/// One bias-corrected Adam update. Throws (leaving everything untouched) when a
/// gradient is not finite.
void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Supervised example for a labelled window (RToA and normalisation are window-local).
Example make_example(const PulseSequence& window);

/// Cuts a labelled sequence into consecutive non-overlapping windows of at most
/// `window` samples. Links that leave a window point to its terminal.
std::vector<Example> make_windows(const PulseSequence& seq, std::size_t window);

struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  Lambdas lambdas{};
  bool baseline = false;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct StepLog {
  std::size_t step = 0;
  LossBreakdown loss;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepLog& s);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepLog> log;
  std::optional<double> best_validation;  // held-out link accuracy of the kept parameters
};

/// Thrown when a loss or gradient turns non-finite; carries the last good parameters.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Checkpoint last_good) : Error(what), last_good_(std::move(last_good)) {}
  [[nodiscard]] const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

/// Held-out score used for selection; higher is better.
using Validator = std::function<double(const ModelParameters&)>;

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;  // every checkpoint_every steps
  Validator validator;                                    // every eval_every steps
  std::function<void(std::size_t step, double score)> on_validation;
};

/// Mini-batch training on pre-built windows. Each epoch visits the windows in
/// a fresh seeded permutation. When a validator is supplied and eval_every is
/// set, the returned parameters are the best-scoring ones seen.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config, const std::vector<Example>& windows,
                  const TrainHooks& hooks = {});

/// Held-out validator: mean windowed link accuracy (LP decode) over the records.
Validator link_accuracy_validator(const ModelConfig& model_config, std::vector<PulseSequence> records,
                                  unsigned threads = 1);

/// Reads the dataset, trains, and writes `out` (checkpoint) plus `out`.csv
/// (metrics log). Periodic checkpoints go to `out`.step<N>. On divergence the
/// last good parameters are written to `out` before the error propagates.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::filesystem::path& dataset_path, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& validation_path = std::nullopt);

}  // namespace pulseflow::train
