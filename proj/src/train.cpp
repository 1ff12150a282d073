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
#include "pulseflow/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pulseflow/dataset.hpp"
#include "pulseflow/eval.hpp"
#include "pulseflow/parallel.hpp"

namespace pulseflow::train {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "PULSEFLOW-CHECKPOINT\n";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

json config_to_json(const ModelConfig& c) {
  return {{"seq_len", c.seq_len},   {"d_model", c.d_model},       {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},   {"d_ff", c.d_ff},             {"n_quant", c.n_quant},
          {"rel_clip", c.rel_clip}, {"lookahead", c.lookahead},   {"rel_values", c.rel_values},
          {"sinusoidal_tokens", c.sinusoidal_tokens},
          {"head", std::string(model::to_string(c.head))},        {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.n_quant = j.at("n_quant").get<std::size_t>();
  c.rel_clip = j.at("rel_clip").get<std::size_t>();
  c.lookahead = j.at("lookahead").get<std::size_t>();
  c.rel_values = j.at("rel_values").get<bool>();
  c.sinusoidal_tokens = j.value("sinusoidal_tokens", false);
  c.head = model::head_indexing_from_string(j.at("head").get<std::string>());
  c.dropout = j.at("dropout").get<double>();
  c.validate();
  return c;
}

Checkpoint snapshot(const ModelConfig& mc, const TrainConfig& tc, const ModelParameters& params, std::size_t step) {
  return {mc, params, step, tc.seed, tc.lambdas, tc.baseline};
}

bool finite(const ModelParameters& p) {
  bool ok = true;
  p.for_each([&](const std::string&, const model::Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.lr = 1e-3;
  c.steps = 70000;
  c.warmup_steps = 1000;
  c.linear_decay = true;
  c.eval_every = 2500;
  return c;
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 128;
  return c;
}

TrainConfig TrainConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw Error("unknown train preset '" + std::string(name) + "'");
}

double TrainConfig::learning_rate(std::size_t step) const {
  if (warmup_steps > 0 && step <= warmup_steps) {
    return lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (linear_decay && steps > warmup_steps) {
    const double left = static_cast<double>(steps - std::min(step, steps));
    return lr * left / static_cast<double>(steps - warmup_steps);
  }
  return lr;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error("lr must be positive");
  if (batch_size == 0) throw Error("batch_size must be at least 1");
  if (lambdas.column < 0.0 || lambdas.balance < 0.0 || lambdas.binary < 0.0) throw Error("lambdas must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw Error("moment parameters must lie in [0, 1)");
  if (!(eps > 0.0)) throw Error("eps must be positive");
}

AdamState AdamState::zeros(const ModelConfig& config) {
  return {ModelParameters::zeros(config), ModelParameters::zeros(config), 0};
}

void adam_step(ModelParameters& params, const ModelParameters& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  if (!finite(grads)) throw Error("non-finite gradient");
  const std::size_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  std::vector<const model::Mat*> g;
  grads.for_each([&](const std::string&, const model::Mat& m) { g.push_back(&m); });
  std::vector<model::Mat*> m, v;
  state.m.for_each([&](const std::string&, model::Mat& x) { m.push_back(&x); });
  state.v.for_each([&](const std::string&, model::Mat& x) { v.push_back(&x); });
  std::size_t k = 0;
  params.for_each([&](const std::string& name, model::Mat& p) {
    if (k >= g.size() || g[k]->rows() != p.rows() || g[k]->cols() != p.cols()) {
      throw Error("gradient shape mismatch at " + name);
    }
    auto& mk = *m[k];
    auto& vk = *v[k];
    const auto& gk = *g[k];
    mk = beta1 * mk + (1.0 - beta1) * gk;
    vk = beta2 * vk + (1.0 - beta2) * gk.cwiseProduct(gk);
    p.array() -= lr * (mk.array() / c1) / ((vk.array() / c2).sqrt() + eps);
    ++k;
  });
  state.step = t;
}

Example make_example(const PulseSequence& window) {
  if (!window.has_labels()) throw Error("training windows need labels");
  return {normalize_sequence(compute_rtoa(window)), labels_to_links(window.labels())};
}

std::vector<Example> make_windows(const PulseSequence& seq, std::size_t window) {
  if (window == 0) throw Error("window must be positive");
  std::vector<Example> out;
  for (Index s = 0; s < seq.size(); s += window) {
    out.push_back(make_example(seq.slice(s, std::min(window, seq.size() - s))));
  }
  return out;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  json tensors = json::array();
  std::size_t total = 0;
  ck.params.for_each([&](const std::string& name, const model::Mat& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    total += static_cast<std::size_t>(m.size());
  });
  const json header = {{"version", kCheckpointVersion},
                       {"config", config_to_json(ck.config)},
                       {"step", ck.step},
                       {"seed", ck.seed},
                       {"lambdas", {ck.lambdas.column, ck.lambdas.balance, ck.lambdas.binary}},
                       {"baseline", ck.baseline},
                       {"tensors", tensors},
                       {"values", total}};
  const std::string text = header.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic - 1);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    ck.params.for_each([&](const std::string&, const model::Mat& m) {
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    });
    if (!out) throw Error("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  char magic[sizeof kMagic - 1];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("not a checkpoint: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw Error("corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("corrupt checkpoint header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("corrupt checkpoint header: ") + e.what());
  }
  const int version = header.at("version").get<int>();
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.step = header.at("step").get<std::size_t>();
  ck.seed = header.at("seed").get<std::uint64_t>();
  const auto& l = header.at("lambdas");
  ck.lambdas = {l.at(0).get<double>(), l.at(1).get<double>(), l.at(2).get<double>()};
  ck.baseline = header.at("baseline").get<bool>();
  ck.params = ModelParameters::zeros(ck.config);
  const auto& tensors = header.at("tensors");
  std::size_t k = 0;
  ck.params.for_each([&](const std::string& name, model::Mat& m) {
    if (k >= tensors.size()) throw Error("checkpoint is missing tensor " + name);
    const auto& t = tensors[k++];
    if (t.at("name").get<std::string>() != name || t.at("rows").get<Eigen::Index>() != m.rows() ||
        t.at("cols").get<Eigen::Index>() != m.cols()) {
      throw Error("checkpoint tensor mismatch at " + name);
    }
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw Error("truncated checkpoint");
  });
  if (k != tensors.size()) throw Error("checkpoint has unexpected tensors");
  return ck;
}

std::string metrics_csv_header() { return "step,ce,l2,l3,l4,total"; }

std::string metrics_csv_row(const StepLog& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g", s.step, s.loss.ce, s.loss.l2, s.loss.l3, s.loss.l4,
                s.loss.total);
  return buf;
}

TrainResult train(const ModelConfig& mc, const TrainConfig& tc, const std::vector<Example>& windows,
                  const TrainHooks& hooks) {
  mc.validate();
  tc.validate();
  if (windows.empty()) throw Error("no training windows");
  for (const auto& w : windows) {
    if (w.normalized.size() > mc.seq_len) throw Error("training window longer than seq_len");
  }
  const Lambdas lambdas = tc.effective_lambdas();
  TrainResult result;
  auto params = ModelParameters::initialize(mc, tc.seed);
  auto state = AdamState::zeros(mc);
  auto grads = ModelParameters::zeros(mc);
  std::seed_seq order_seed{tc.seed, std::uint64_t{1}};
  std::mt19937_64 rng(order_seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<Example> batch;
  std::optional<double> best;
  ModelParameters best_params;

  for (std::size_t step = 1; step <= tc.steps; ++step) {
    batch.clear();
    while (batch.size() < std::min(tc.batch_size, windows.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(windows[order[cursor++]]);
    }
    grads.set_zero();
    std::optional<std::uint64_t> dropout_seed;
    if (mc.dropout > 0.0) {
      std::seed_seq ss{tc.seed, std::uint64_t{2}, static_cast<std::uint64_t>(step)};
      std::uint64_t s[2];
      ss.generate(std::begin(s), std::end(s));
      dropout_seed = s[0] << 32 | s[1];
    }
    LossBreakdown loss;
    try {
      loss = model::batch_gradients(batch, params, mc, lambdas, grads, tc.threads, dropout_seed);
      if (!std::isfinite(loss.total)) throw Error("non-finite loss");
      adam_step(params, grads, state, tc.learning_rate(step), tc.beta1, tc.beta2, tc.eps);
    } catch (const DivergenceError&) {
      throw;
    } catch (const Error& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what(),
                            snapshot(mc, tc, params, step - 1));
    }
    result.log.push_back({step, loss});
    if (hooks.on_step) hooks.on_step(result.log.back());
    if (hooks.validator && tc.eval_every > 0 && (step % tc.eval_every == 0 || step == tc.steps)) {
      const double score = hooks.validator(params);
      if (hooks.on_validation) hooks.on_validation(step, score);
      if (!best || score > *best) {
        best = score;
        best_params = params;
      }
    }
    if (hooks.on_checkpoint && tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step < tc.steps) {
      hooks.on_checkpoint(snapshot(mc, tc, params, step));
    }
  }
  result.best_validation = best;
  result.checkpoint = snapshot(mc, tc, best ? best_params : params, tc.steps);
  return result;
}

Validator link_accuracy_validator(const ModelConfig& mc, std::vector<PulseSequence> records, unsigned threads) {
  return [mc, records = std::move(records), threads](const ModelParameters& params) {
    const eval::LearnedModel m{mc, params};
    std::vector<double> acc(records.size());
    parallel_for(records.size(), threads, [&](std::size_t k) {
      const auto pred = eval::infer_windowed(m, records[k], mc.seq_len, std::max<std::size_t>(1, mc.seq_len / 2),
                                             eval::Decode::lp);
      acc[k] = eval::acc_link(pred.links(), labels_to_links(records[k].labels()));
    });
    return records.empty() ? 0.0 : std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  };
}

TrainResult train(const ModelConfig& mc, const TrainConfig& tc, const std::filesystem::path& dataset_path,
                  const std::filesystem::path& out, const std::optional<std::filesystem::path>& validation_path) {
  const auto ds = sim::read_dataset(dataset_path);
  std::vector<Example> windows;
  for (const auto& r : ds.records) {
    auto w = make_windows(r.seq, mc.seq_len);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  TrainHooks hooks;
  std::ofstream log(out.string() + ".csv", std::ios::trunc);
  if (!log) throw Error("cannot write metrics log " + out.string() + ".csv");
  log << metrics_csv_header() << '\n';
  hooks.on_step = [&](const StepLog& s) { log << metrics_csv_row(s) << '\n'; };
  hooks.on_checkpoint = [&](const Checkpoint& ck) {
    save_checkpoint(ck, out.string() + ".step" + std::to_string(ck.step));
  };
  if (validation_path) {
    std::vector<PulseSequence> held;
    for (auto& r : sim::read_dataset(*validation_path).records) held.push_back(std::move(r.seq));
    hooks.validator = link_accuracy_validator(mc, std::move(held), tc.threads);
  }
  try {
    auto result = train(mc, tc, windows, hooks);
    save_checkpoint(result.checkpoint, out);
    return result;
  } catch (const DivergenceError& e) {
    log.flush();
    save_checkpoint(e.last_good(), out);
    throw;
  }
}

}  // namespace pulseflow::train
