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
#include "pulseflow/loss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pulseflow/parallel.hpp"

namespace pulseflow::model {

namespace {

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

/// Gradient of y = gain * x_hat + bias with respect to its input.
Mat layer_norm_backward(const Mat& dy, const Mat& x_hat, const Mat& inv_std, const Mat& gain, Mat& dgain,
                        Mat& dbias) {
  dgain.row(0) += (dy.cwiseProduct(x_hat)).colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  const Mat dxh = dy.array().rowwise() * gain.row(0).array();
  const auto d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double s1 = dxh.row(i).sum();
    const double s2 = dxh.row(i).dot(x_hat.row(i));
    dx.row(i) = (inv_std(0, i) / d) * (d * dxh.row(i).array() - s1 - x_hat.row(i).array() * s2);
  }
  return dx;
}

std::size_t rel_bucket(std::ptrdiff_t dist, std::size_t clip) {
  const auto c = static_cast<std::ptrdiff_t>(clip);
  return static_cast<std::size_t>(std::clamp(dist, -c, c) + c);
}

void check_finite(const LossBreakdown& lb) {
  const std::pair<const char*, double> terms[] = {{"ce", lb.ce}, {"l2", lb.l2}, {"l3", lb.l3}, {"l4", lb.l4}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) throw Error(std::string("non-finite loss term ") + name);
  }
}

}  // namespace

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  ce += o.ce;
  l2 += o.l2;
  l3 += o.l3;
  l4 += o.l4;
  total += o.total;
  clamped += o.clamped;
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
  ce *= s;
  l2 *= s;
  l3 *= s;
  l4 *= s;
  total *= s;
  return *this;
}

LossBreakdown flow_loss(const Mat& p, std::span<const Index> y, const Lambdas& lambdas, const Mat* log_p,
                        Mat* penalty_grad) {
  const auto n = p.rows();
  if (p.cols() != n + 1 || static_cast<Eigen::Index>(y.size()) != n) throw Error("flow_loss: shape mismatch");
  if (n == 0) throw Error("flow_loss: empty input");
  const double inv_n = 1.0 / static_cast<double>(n);
  LossBreakdown lb;
  lb.lambdas = lambdas;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
    double lp;
    if (log_p) {
      lp = (*log_p)(i, j);
    } else {
      const double v = p(i, j);
      if (v < kLogClamp) ++lb.clamped;
      lp = std::log(std::max(v, kLogClamp));
    }
    lb.ce -= lp * inv_n;
  }
  const Mat col_sum = p.colwise().sum();
  double starts = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    lb.l2 += std::max(0.0, col_sum(0, j) - 1.0) * inv_n;
    starts += 1.0 - col_sum(0, j);
  }
  const double balance = col_sum(0, n) - starts;
  lb.l3 = balance * balance;
  Eigen::VectorXd row_l2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    row_l2(i) = p.row(i).norm();
    lb.l4 += (p.row(i).cwiseAbs().sum() - row_l2(i)) * inv_n;
  }
  lb.total = lb.ce + lambdas.column * lb.l2 + lambdas.balance * lb.l3 + lambdas.binary * lb.l4;
  if (penalty_grad) {
    Mat& g = *penalty_grad;
    g.setConstant(n, n + 1, 2.0 * balance * lambdas.balance);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (col_sum(0, j) > 1.0) g.col(j).array() += lambdas.column * inv_n;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= n; ++j) {
        const double v = p(i, j);
        const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        const double l2_part = row_l2(i) > 0.0 ? v / row_l2(i) : 0.0;
        g(i, j) += lambdas.binary * inv_n * (sign - l2_part);
      }
    }
  }
  return lb;
}

LossBreakdown flow_loss(const AssignmentMatrix& p, const AssignmentMatrix& y, const Lambdas& lambdas) {
  if (p.size() != y.size()) throw Error("flow_loss: shape mismatch");
  const auto n = static_cast<Eigen::Index>(p.size());
  const Mat dense = Eigen::Map<const Mat>(p.values().data(), n, n + 1);
  return flow_loss(dense, y.links(), lambdas);
}

LossBreakdown backward(const Example& example, const ModelParameters& params, const ModelConfig& config,
                       const Lambdas& lambdas, ModelParameters& grads, double scale, Rng* dropout_rng) {
  ForwardCache c;
  forward(example.normalized, params, config, &c, dropout_rng);
  const auto n = static_cast<std::size_t>(c.p.rows());
  if (example.links.size() != n) throw Error("example links do not match its length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!link_allowed(config, i, example.links[i], n)) throw Error("target link outside the model's mask");
  }
  Mat pen;
  const LossBreakdown lb = flow_loss(c.p, example.links, lambdas, &c.log_p, &pen);
  check_finite(lb);

  const double inv_n = 1.0 / static_cast<double>(n);
  Mat d_logits = Mat::Zero(c.logits.rows(), c.logits.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double dot = c.p.row(ii).dot(pen.row(ii));
    for (std::size_t j = i + 1; j <= n; ++j) {
      if (!link_allowed(config, i, j, n)) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      const double pij = c.p(ii, jj);
      double g = pij * inv_n + pij * (pen(ii, jj) - dot);
      if (example.links[i] == j) g -= inv_n;
      d_logits(ii, static_cast<Eigen::Index>(head_column(config, i, j, n))) += g * scale;
    }
  }
  const Mat& r = c.layers.back().y;
  grads.head_weight += r.transpose() * d_logits;
  grads.head_bias.row(0) += d_logits.colwise().sum();
  Mat dx = d_logits * params.head_weight.transpose();

  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto ni = static_cast<Eigen::Index>(n);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& L = params.layers[l];
    auto& G = grads.layers[l];
    const auto& cl = c.layers[l];

    Mat d_ypre = layer_norm_backward(dx, cl.y_hat, cl.y_inv_std, L.ln2_gain, G.ln2_gain, G.ln2_bias);
    const Mat d_f2 = cl.drop2.size() ? Mat(d_ypre.cwiseProduct(cl.drop2)) : d_ypre;
    G.w2 += cl.g1.transpose() * d_f2;
    G.b2.row(0) += d_f2.colwise().sum();
    const Mat d_f1 = (d_f2 * L.w2.transpose()).cwiseProduct(cl.f1.unaryExpr([](double v) { return gelu_grad(v); }));
    G.w1 += cl.h.transpose() * d_f1;
    G.b1.row(0) += d_f1.colwise().sum();
    Mat d_h = d_ypre + d_f1 * L.w1.transpose();

    Mat d_hpre = layer_norm_backward(d_h, cl.h_hat, cl.h_inv_std, L.ln1_gain, G.ln1_gain, G.ln1_bias);
    const Mat d_attn = cl.drop1.size() ? Mat(d_hpre.cwiseProduct(cl.drop1)) : d_hpre;
    G.wo += cl.concat.transpose() * d_attn;
    G.bo.row(0) += d_attn.colwise().sum();
    const Mat d_concat = d_attn * L.wo.transpose();

    Mat d_q(ni, cl.q.cols()), d_k(ni, cl.k.cols()), d_v(ni, cl.v.cols());
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const auto qh = cl.q.middleCols(off, dh);
      const auto kh = cl.k.middleCols(off, dh);
      const auto vh = cl.v.middleCols(off, dh);
      const Mat& a = cl.attn[h];
      const auto d_out = d_concat.middleCols(off, dh);

      Mat d_a = d_out * vh.transpose();
      d_v.middleCols(off, dh) = a.transpose() * d_out;
      if (config.rel_values) {
        const Mat m = d_out * L.rel_value.transpose();
        Mat bucket = Mat::Zero(ni, L.rel_value.rows());
        for (Eigen::Index i = 0; i < ni; ++i) {
          for (Eigen::Index j = 0; j < ni; ++j) {
            const auto b = static_cast<Eigen::Index>(rel_bucket(j - i, config.rel_clip));
            d_a(i, j) += m(i, b);
            bucket(i, b) += a(i, j);
          }
        }
        G.rel_value += bucket.transpose() * d_out;
      }
      Mat d_s(ni, ni);
      for (Eigen::Index i = 0; i < ni; ++i) {
        const double dot = a.row(i).dot(d_a.row(i));
        d_s.row(i) = a.row(i).array() * (d_a.row(i).array() - dot) * inv_sqrt;
      }
      Mat s_bucket = Mat::Zero(ni, L.rel_key.rows());
      for (Eigen::Index i = 0; i < ni; ++i) {
        for (Eigen::Index j = 0; j < ni; ++j) s_bucket(i, static_cast<Eigen::Index>(rel_bucket(j - i, config.rel_clip))) += d_s(i, j);
      }
      d_q.middleCols(off, dh) = d_s * kh + s_bucket * L.rel_key;
      d_k.middleCols(off, dh) = d_s.transpose() * qh;
      G.rel_key += s_bucket.transpose() * qh;
    }
    G.wq += cl.x.transpose() * d_q;
    G.bq.row(0) += d_q.colwise().sum();
    G.wk += cl.x.transpose() * d_k;
    G.bk.row(0) += d_k.colwise().sum();
    G.wv += cl.x.transpose() * d_v;
    G.bv.row(0) += d_v.colwise().sum();
    dx = d_hpre + d_q * L.wq.transpose() + d_k * L.wk.transpose() + d_v * L.wv.transpose();
  }
  for (std::size_t i = 0; i < n; ++i) {
    grads.token_embeddings.row(static_cast<Eigen::Index>(c.tokens[i])) += dx.row(static_cast<Eigen::Index>(i));
  }
  return lb;
}

LossBreakdown evaluate_loss(const Example& example, const ModelParameters& params, const ModelConfig& config,
                            const Lambdas& lambdas) {
  ForwardCache c;
  forward(example.normalized, params, config, &c);
  return flow_loss(c.p, example.links, lambdas, &c.log_p);
}

LossBreakdown batch_gradients(std::span<const Example> batch, const ModelParameters& params,
                              const ModelConfig& config, const Lambdas& lambdas, ModelParameters& grads,
                              unsigned threads, std::optional<std::uint64_t> dropout_seed) {
  if (batch.empty()) throw Error("empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<ModelParameters> per(batch.size());
  std::vector<LossBreakdown> losses(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t k) {
    per[k] = ModelParameters::zeros(config);
    if (dropout_seed) {
      std::seed_seq seq{static_cast<std::uint32_t>(*dropout_seed), static_cast<std::uint32_t>(*dropout_seed >> 32),
                        static_cast<std::uint32_t>(k)};
      Rng rng(seq);
      losses[k] = backward(batch[k], params, config, lambdas, per[k], scale, &rng);
    } else {
      losses[k] = backward(batch[k], params, config, lambdas, per[k], scale);
    }
  });
  grads = std::move(per[0]);
  LossBreakdown mean = losses[0];
  for (std::size_t k = 1; k < batch.size(); ++k) {
    grads += per[k];
    mean += losses[k];
  }
  mean *= scale;
  mean.lambdas = lambdas;
  return mean;
}

}  // namespace pulseflow::model
