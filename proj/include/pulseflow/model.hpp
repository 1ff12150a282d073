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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pulseflow/core.hpp"

namespace pulseflow::model {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// How the head's decision representatives are addressed: by the target's
/// absolute position in the window, or by its offset from the source sample.
enum class HeadIndexing { absolute, relative };

std::string_view to_string(HeadIndexing h);
HeadIndexing head_indexing_from_string(std::string_view s);

struct ModelConfig {
  std::size_t seq_len = 64;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t n_quant = 501;
  std::size_t rel_clip = 16;
  std::size_t lookahead = 64;
  bool rel_values = false;  // also add relative embeddings to attention values
  HeadIndexing head = HeadIndexing::relative;
  bool sinusoidal_tokens = false;  // initialise token embeddings from sinusoids of the token value
  double dropout = 0.1;

  static ModelConfig desk();
  static ModelConfig paper();
  static ModelConfig preset(std::string_view name);

  [[nodiscard]] std::size_t head_dim() const { return d_model / n_heads; }
  /// Columns of the head: seq_len targets plus the terminal.
  [[nodiscard]] std::size_t head_cols() const { return seq_len + 1; }
  void validate() const;
};

struct LayerParameters {
  Mat wq, wk, wv, wo;  // d x d
  Mat bq, bk, bv, bo;  // biases are 1 x n
  Mat rel_key;         // (2 * rel_clip + 1) x head_dim
  Mat rel_value;       // same shape, used when rel_values is set
  Mat ln1_gain, ln1_bias;
  Mat w1;              // d x d_ff
  Mat b1;
  Mat w2;              // d_ff x d
  Mat b2;
  Mat ln2_gain, ln2_bias;
};

/// All learned tensors. The same type doubles as the gradient container.
struct ModelParameters {
  Mat token_embeddings;  // n_quant x d
  std::vector<LayerParameters> layers;
  Mat head_weight;       // d x head_cols: decision representatives, one per column
  Mat head_bias;         // head_cols

  static ModelParameters zeros(const ModelConfig& config);
  static ModelParameters initialize(const ModelConfig& config, std::uint64_t seed);

  /// Visits every tensor with a stable name, in a fixed order.
  void for_each(const std::function<void(const std::string&, Mat&)>& f);
  void for_each(const std::function<void(const std::string&, const Mat&)>& f) const;
  [[nodiscard]] std::size_t parameter_count() const;
  void set_zero();
  ModelParameters& operator+=(const ModelParameters& o);
  ModelParameters& operator*=(double s);
};

/// Token index per normalised value: round(x * (n_quant - 1)).
std::vector<std::size_t> quantize(std::span<const double> normalized, std::size_t n_quant);

/// Embedding rows for the quantised tokens.
Mat quantize_embed(std::span<const double> normalized, const ModelParameters& params);

/// Intermediate values of one forward evaluation, kept for the backward pass.
struct ForwardCache {
  struct Layer {
    Mat x, q, k, v;
    std::vector<Mat> attn;        // per head N x N
    Mat concat, attn_out, drop1;  // drop1: dropout keep-scale mask (empty when off)
    Mat h_pre, h_hat, h;          // LN1 input, normalised, output
    Mat h_inv_std;
    Mat f1, g1, f2, drop2;
    Mat y_pre, y_hat, y;
    Mat y_inv_std;
  };
  std::vector<std::size_t> tokens;
  std::vector<Layer> layers;
  Mat logits;  // N x head_cols, dense over representative columns
  Mat p;       // N x (N + 1)
  Mat log_p;   // N x (N + 1), -inf where masked
};

/// Representative column addressed by link (i -> j); j == n is the terminal.
std::size_t head_column(const ModelConfig& c, std::size_t i, std::size_t j, std::size_t n);
/// Whether the forward mask admits link (i -> j) in a window of n samples.
bool link_allowed(const ModelConfig& c, std::size_t i, std::size_t j, std::size_t n);

/// Representations after the encoder stack (N x d_model).
Mat encoder_forward(const Mat& embeddings, const ModelParameters& params, const ModelConfig& config,
                    ForwardCache* cache = nullptr, Rng* dropout_rng = nullptr);

/// Masked row soft-max over q_i = T^T r_i + beta. Returns N x (N + 1).
Mat head_forward(const Mat& representations, const ModelParameters& params, const ModelConfig& config,
                 ForwardCache* cache = nullptr);

/// Full forward pass on normalised inputs. `dropout_rng` enables training-time dropout.
Mat forward(std::span<const double> normalized, const ModelParameters& params, const ModelConfig& config,
            ForwardCache* cache = nullptr, Rng* dropout_rng = nullptr);

/// Soft assignment matrix for a window of ToAs (RToA + normalisation applied here).
AssignmentMatrix predict(const PulseSequence& window, const ModelParameters& params, const ModelConfig& config);

}  // namespace pulseflow::model
