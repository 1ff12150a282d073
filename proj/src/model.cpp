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
#include "pulseflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pulseflow::model {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Mat normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  return m;
}

Mat ones(std::size_t n) { return Mat::Ones(1, static_cast<Eigen::Index>(n)); }
Mat zero_row(std::size_t n) { return Mat::Zero(1, static_cast<Eigen::Index>(n)); }

void layer_norm(const Mat& x, const Mat& gain, const Mat& bias, Mat& x_hat, Mat& inv_std, Mat& y) {
  const auto d = static_cast<double>(x.cols());
  x_hat.resize(x.rows(), x.cols());
  inv_std.resize(1, x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mu).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std(0, i) = inv;
    x_hat.row(i) = (x.row(i).array() - mu) * inv;
  }
  y = (x_hat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

/// Bucket of relative distance j - i, clipped to [-clip, clip].
std::size_t rel_bucket(std::ptrdiff_t dist, std::size_t clip) {
  const auto c = static_cast<std::ptrdiff_t>(clip);
  return static_cast<std::size_t>(std::clamp(dist, -c, c) + c);
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Mat m(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace

std::string_view to_string(HeadIndexing h) { return h == HeadIndexing::absolute ? "absolute" : "relative"; }

HeadIndexing head_indexing_from_string(std::string_view s) {
  if (s == "absolute") return HeadIndexing::absolute;
  if (s == "relative") return HeadIndexing::relative;
  throw Error("unknown head indexing '" + std::string(s) + "'");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.rel_clip = 32;
  c.rel_values = true;
  c.sinusoidal_tokens = true;
  c.dropout = 0.0;
  return c;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.seq_len = 256;
  c.d_model = 512;
  c.n_layers = 12;
  c.n_heads = 8;
  c.d_ff = 2048;
  c.n_quant = 5001;
  c.lookahead = 64;
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw Error("unknown model preset '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (n_heads == 0 || d_model % n_heads != 0) throw Error("d_model must be divisible by n_heads");
  if (n_quant < 2) throw Error("n_quant must be at least 2");
  if (seq_len < 2) throw Error("seq_len must be at least 2");
  if (n_layers == 0 || d_ff == 0) throw Error("n_layers and d_ff must be positive");
  if (lookahead == 0) throw Error("lookahead must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
}

ModelParameters ModelParameters::zeros(const ModelConfig& c) {
  c.validate();
  const auto d = c.d_model, dh = c.head_dim(), rel = 2 * c.rel_clip + 1;
  ModelParameters p;
  p.token_embeddings = Mat::Zero(c.n_quant, d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    LayerParameters L;
    L.wq = L.wk = L.wv = L.wo = Mat::Zero(d, d);
    L.bq = L.bk = L.bv = L.bo = zero_row(d);
    L.rel_key = Mat::Zero(rel, dh);
    L.rel_value = c.rel_values ? Mat::Zero(rel, dh) : Mat(0, 0);
    L.ln1_gain = L.ln2_gain = zero_row(d);
    L.ln1_bias = L.ln2_bias = zero_row(d);
    L.w1 = Mat::Zero(d, c.d_ff);
    L.b1 = zero_row(c.d_ff);
    L.w2 = Mat::Zero(c.d_ff, d);
    L.b2 = zero_row(d);
    p.layers.push_back(std::move(L));
  }
  p.head_weight = Mat::Zero(d, c.head_cols());
  p.head_bias = zero_row(c.head_cols());
  return p;
}

ModelParameters ModelParameters::initialize(const ModelConfig& c, std::uint64_t seed) {
  ModelParameters p = zeros(c);
  Rng rng(seed);
  const double s = 0.02;
  const auto d = c.d_model;
  p.token_embeddings = normal(c.n_quant, d, s, rng);
  if (c.sinusoidal_tokens) {
    // Pair m holds sin/cos of the value at a frequency rising geometrically
    // from 1 to n_quant radians per unit.
    const std::size_t pairs = d / 2;
    for (std::size_t m = 0; m < pairs; ++m) {
      const double w = pairs > 1 ? std::pow(static_cast<double>(c.n_quant), static_cast<double>(m) / (pairs - 1)) : 1.0;
      for (std::size_t k = 0; k < c.n_quant; ++k) {
        const double v = static_cast<double>(k) / static_cast<double>(c.n_quant - 1);
        p.token_embeddings(k, 2 * m) += std::sin(w * v);
        p.token_embeddings(k, 2 * m + 1) += std::cos(w * v);
      }
    }
  }
  for (auto& L : p.layers) {
    L.wq = normal(d, d, s, rng);
    L.wk = normal(d, d, s, rng);
    L.wv = normal(d, d, s, rng);
    L.wo = normal(d, d, s, rng);
    L.rel_key = normal(L.rel_key.rows(), L.rel_key.cols(), s, rng);
    if (c.rel_values) L.rel_value = normal(L.rel_value.rows(), L.rel_value.cols(), s, rng);
    L.ln1_gain = L.ln2_gain = ones(d);
    L.w1 = normal(d, c.d_ff, s, rng);
    L.w2 = normal(c.d_ff, d, s, rng);
  }
  p.head_weight = normal(d, c.head_cols(), s, rng);
  return p;
}

void ModelParameters::for_each(const std::function<void(const std::string&, Mat&)>& f) {
  f("token_embeddings", token_embeddings);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    f(pre + "wq", L.wq);
    f(pre + "bq", L.bq);
    f(pre + "wk", L.wk);
    f(pre + "bk", L.bk);
    f(pre + "wv", L.wv);
    f(pre + "bv", L.bv);
    f(pre + "wo", L.wo);
    f(pre + "bo", L.bo);
    f(pre + "rel_key", L.rel_key);
    if (L.rel_value.size() > 0) f(pre + "rel_value", L.rel_value);
    f(pre + "ln1_gain", L.ln1_gain);
    f(pre + "ln1_bias", L.ln1_bias);
    f(pre + "w1", L.w1);
    f(pre + "b1", L.b1);
    f(pre + "w2", L.w2);
    f(pre + "b2", L.b2);
    f(pre + "ln2_gain", L.ln2_gain);
    f(pre + "ln2_bias", L.ln2_bias);
  }
  f("head_weight", head_weight);
  f("head_bias", head_bias);
}

void ModelParameters::for_each(const std::function<void(const std::string&, const Mat&)>& f) const {
  const_cast<ModelParameters*>(this)->for_each([&](const std::string& n, Mat& m) { f(n, m); });
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

void ModelParameters::set_zero() {
  for_each([](const std::string&, Mat& m) { m.setZero(); });
}

ModelParameters& ModelParameters::operator+=(const ModelParameters& o) {
  std::vector<const Mat*> other;
  o.for_each([&](const std::string&, const Mat& m) { other.push_back(&m); });
  std::size_t k = 0;
  for_each([&](const std::string&, Mat& m) { m += *other[k++]; });
  return *this;
}

ModelParameters& ModelParameters::operator*=(double s) {
  for_each([&](const std::string&, Mat& m) { m *= s; });
  return *this;
}

std::vector<std::size_t> quantize(std::span<const double> normalized, std::size_t n_quant) {
  std::vector<std::size_t> tokens(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const double x = normalized[i];
    if (!(x >= 0.0 && x <= 1.0)) throw Error("quantize: input outside [0, 1]");
    tokens[i] = static_cast<std::size_t>(std::lround(x * static_cast<double>(n_quant - 1)));
  }
  return tokens;
}

Mat quantize_embed(std::span<const double> normalized, const ModelParameters& params) {
  const auto tokens = quantize(normalized, static_cast<std::size_t>(params.token_embeddings.rows()));
  Mat e(static_cast<Eigen::Index>(tokens.size()), params.token_embeddings.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) e.row(static_cast<Eigen::Index>(i)) = params.token_embeddings.row(static_cast<Eigen::Index>(tokens[i]));
  return e;
}

std::size_t head_column(const ModelConfig& c, std::size_t i, std::size_t j, std::size_t n) {
  if (j == n) return c.seq_len;
  return c.head == HeadIndexing::absolute ? j : j - i;
}

bool link_allowed(const ModelConfig& c, std::size_t i, std::size_t j, std::size_t n) {
  return j == n || (j > i && j < n && j - i <= c.lookahead);
}

Mat encoder_forward(const Mat& embeddings, const ModelParameters& params, const ModelConfig& config,
                    ForwardCache* cache, Rng* dropout_rng) {
  const auto n = embeddings.rows();
  if (static_cast<std::size_t>(n) > config.seq_len) throw Error("sequence longer than model capacity");
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = dropout_rng != nullptr && config.dropout > 0.0;
  Mat x = embeddings;
  if (cache) cache->layers.assign(params.layers.size(), {});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    ForwardCache::Layer local;
    ForwardCache::Layer& c = cache ? cache->layers[l] : local;
    c.x = x;
    c.q = (x * L.wq).rowwise() + L.bq.row(0);
    c.k = (x * L.wk).rowwise() + L.bk.row(0);
    c.v = (x * L.wv).rowwise() + L.bv.row(0);
    c.concat.resize(n, x.cols());
    c.attn.assign(config.n_heads, Mat());
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const auto qh = c.q.middleCols(off, dh);
      const auto kh = c.k.middleCols(off, dh);
      const auto vh = c.v.middleCols(off, dh);
      const Mat rel_scores = qh * L.rel_key.transpose();  // n x (2 clip + 1)
      Mat s = qh * kh.transpose();
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) s(i, j) += rel_scores(i, static_cast<Eigen::Index>(rel_bucket(j - i, config.rel_clip)));
      }
      s *= inv_sqrt;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double m = s.row(i).maxCoeff();
        s.row(i) = (s.row(i).array() - m).exp();
        s.row(i) /= s.row(i).sum();
      }
      Mat out = s * vh;
      if (config.rel_values) {
        Mat bucket = Mat::Zero(n, L.rel_value.rows());
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) bucket(i, static_cast<Eigen::Index>(rel_bucket(j - i, config.rel_clip))) += s(i, j);
        }
        out += bucket * L.rel_value;
      }
      c.concat.middleCols(off, dh) = out;
      c.attn[h] = std::move(s);
    }
    c.attn_out = (c.concat * L.wo).rowwise() + L.bo.row(0);
    if (drop) c.drop1 = dropout_mask(n, x.cols(), config.dropout, *dropout_rng);
    c.h_pre = drop ? Mat(x + c.attn_out.cwiseProduct(c.drop1)) : Mat(x + c.attn_out);
    layer_norm(c.h_pre, L.ln1_gain, L.ln1_bias, c.h_hat, c.h_inv_std, c.h);
    c.f1 = (c.h * L.w1).rowwise() + L.b1.row(0);
    c.g1 = c.f1.unaryExpr([](double v) { return gelu(v); });
    c.f2 = (c.g1 * L.w2).rowwise() + L.b2.row(0);
    if (drop) c.drop2 = dropout_mask(n, x.cols(), config.dropout, *dropout_rng);
    c.y_pre = drop ? Mat(c.h + c.f2.cwiseProduct(c.drop2)) : Mat(c.h + c.f2);
    layer_norm(c.y_pre, L.ln2_gain, L.ln2_bias, c.y_hat, c.y_inv_std, c.y);
    x = c.y;
  }
  return x;
}

Mat head_forward(const Mat& r, const ModelParameters& params, const ModelConfig& config, ForwardCache* cache) {
  const auto n = static_cast<std::size_t>(r.rows());
  Mat logits = (r * params.head_weight).rowwise() + params.head_bias.row(0);
  Mat p = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n + 1));
  Mat log_p = Mat::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n + 1), kNegInf);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double m = kNegInf;
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (link_allowed(config, i, j, n)) m = std::max(m, logits(ii, static_cast<Eigen::Index>(head_column(config, i, j, n))));
    }
    double z = 0.0;
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (!link_allowed(config, i, j, n)) continue;
      z += std::exp(logits(ii, static_cast<Eigen::Index>(head_column(config, i, j, n))) - m);
    }
    const double log_z = m + std::log(z);
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (!link_allowed(config, i, j, n)) continue;
      const double lp = logits(ii, static_cast<Eigen::Index>(head_column(config, i, j, n))) - log_z;
      log_p(ii, static_cast<Eigen::Index>(j)) = lp;
      p(ii, static_cast<Eigen::Index>(j)) = std::exp(lp);
    }
  }
  if (cache) {
    cache->logits = std::move(logits);
    cache->log_p = std::move(log_p);
    cache->p = p;
  }
  return p;
}

Mat forward(std::span<const double> normalized, const ModelParameters& params, const ModelConfig& config,
            ForwardCache* cache, Rng* dropout_rng) {
  if (normalized.empty()) throw Error("empty input");
  if (cache) cache->tokens = quantize(normalized, config.n_quant);
  const Mat r = encoder_forward(quantize_embed(normalized, params), params, config, cache, dropout_rng);
  return head_forward(r, params, config, cache);
}

AssignmentMatrix predict(const PulseSequence& window, const ModelParameters& params, const ModelConfig& config) {
  const auto x = normalize_sequence(compute_rtoa(window));
  const Mat p = forward(x, params, config);
  std::vector<double> v(p.data(), p.data() + p.size());
  return {window.size(), std::move(v), AssignmentKind::soft};
}

}  // namespace pulseflow::model
