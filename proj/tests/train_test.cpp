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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "pulseflow/dataset.hpp"
#include "pulseflow/train.hpp"

namespace pulseflow::train {
namespace {

using model::Mat;
using model::testing::random_example;
using model::testing::random_parameters;
using model::testing::tiny_config;

std::vector<Mat> tensors(const ModelParameters& p) {
  std::vector<Mat> out;
  p.for_each([&](const std::string&, const Mat& m) { out.push_back(m); });
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::path(::testing::TempDir()) / name;
}

std::vector<Example> fixture_windows(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(random_example(3 + k % 6, rng));
  return out;
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  const auto cfg = tiny_config();
  auto params = random_parameters(cfg, 1);
  const auto before = tensors(params);
  auto state = AdamState::zeros(cfg);
  adam_step(params, ModelParameters::zeros(cfg), state, 1e-3);
  EXPECT_EQ(tensors(params), before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ConstantGradientMovesByLearningRate) {
  // With a constant gradient the bias-corrected ratio is exactly 1, so every
  // step moves each entry by lr * g / (|g| + eps).
  const auto cfg = tiny_config();
  auto params = ModelParameters::zeros(cfg);
  auto grads = ModelParameters::zeros(cfg);
  grads.for_each([](const std::string&, Mat& m) { m.setConstant(0.5); });
  auto state = AdamState::zeros(cfg);
  for (int t = 1; t <= 5; ++t) {
    adam_step(params, grads, state, 0.01);
    params.for_each([&](const std::string&, const Mat& m) {
      EXPECT_NEAR(m(0, 0), -0.01 * t * 0.5 / (0.5 + 1e-8), 1e-15);
    });
  }
}

TEST(Adam, TwoHandComputedSteps) {
  const auto cfg = tiny_config();
  auto params = ModelParameters::zeros(cfg);
  auto grads = ModelParameters::zeros(cfg);
  auto state = AdamState::zeros(cfg);
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  grads.head_bias(0, 0) = 2.0;
  adam_step(params, grads, state, lr, b1, b2, eps);
  // step 1: m = 0.2, v = 0.004, mhat = 2, vhat = 4
  const double p1 = -lr * 2.0 / (2.0 + eps);
  EXPECT_NEAR(params.head_bias(0, 0), p1, 1e-15);
  grads.head_bias(0, 0) = -1.0;
  adam_step(params, grads, state, lr, b1, b2, eps);
  const double m = 0.9 * 0.2 + 0.1 * -1.0, v = 0.999 * 0.004 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(params.head_bias(0, 0), p1 - lr * mhat / (std::sqrt(vhat) + eps), 1e-14);
}

TEST(Adam, NonFiniteGradientIsRejectedUntouched) {
  const auto cfg = tiny_config();
  auto params = random_parameters(cfg, 2);
  const auto before = tensors(params);
  auto grads = ModelParameters::zeros(cfg);
  grads.head_bias(0, 1) = std::nan("");
  auto state = AdamState::zeros(cfg);
  EXPECT_THROW(adam_step(params, grads, state, 1e-3), Error);
  EXPECT_EQ(tensors(params), before);
  EXPECT_EQ(state.step, 0u);
}

TEST(Config, PresetsAndValidation) {
  EXPECT_EQ(TrainConfig::preset("desk").batch_size, 32u);
  EXPECT_EQ(TrainConfig::preset("paper").batch_size, 128u);
  EXPECT_DOUBLE_EQ(TrainConfig::preset("paper").lr, 1e-4);
  const auto l = TrainConfig::preset("paper").lambdas;
  EXPECT_EQ(l.column, 10.0);
  EXPECT_EQ(l.balance, 1.0);
  EXPECT_EQ(l.binary, 5.0);
  TrainConfig bad;
  bad.lr = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.lambdas.column = -1.0;
  EXPECT_THROW(bad.validate(), Error);
  TrainConfig base;
  base.baseline = true;
  EXPECT_EQ(base.effective_lambdas().column, 0.0);
  EXPECT_EQ(base.effective_lambdas().binary, 0.0);
}

TEST(Config, LearningRateSchedule) {
  TrainConfig c;
  c.lr = 2.0;
  c.steps = 110;
  EXPECT_EQ(c.learning_rate(1), 2.0);
  EXPECT_EQ(c.learning_rate(110), 2.0);
  c.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(c.learning_rate(5), 1.0);
  EXPECT_DOUBLE_EQ(c.learning_rate(10), 2.0);
  EXPECT_DOUBLE_EQ(c.learning_rate(60), 2.0);
  c.linear_decay = true;
  EXPECT_DOUBLE_EQ(c.learning_rate(10), 2.0);
  EXPECT_DOUBLE_EQ(c.learning_rate(60), 1.0);
  EXPECT_DOUBLE_EQ(c.learning_rate(110), 0.0);
  for (std::size_t s = 2; s <= 110; ++s) {
    if (s <= 10) EXPECT_GT(c.learning_rate(s), c.learning_rate(s - 1));
    else EXPECT_LT(c.learning_rate(s), c.learning_rate(s - 1));
  }
}

TEST(Windows, CoverEveryPulseAndRetargetCrossingLinks) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto r = sim::generate_record(sim::parse_case_mix("1,2,3,4,5"), seed, 0);
    const std::size_t w = 8 + seed % 57;
    const auto windows = make_windows(r.seq, w);
    std::size_t covered = 0;
    const auto truth = labels_to_links(r.seq.labels());
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto& ex = windows[k];
      const std::size_t n = ex.links.size();
      ASSERT_LE(n, w);
      ASSERT_EQ(ex.normalized.size(), n);
      ASSERT_EQ(ex.normalized[0], 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Index g = k * w + i, t = truth[g];
        const Index expect = t < k * w + n ? t - k * w : n;
        ASSERT_EQ(ex.links[i], expect);
      }
      covered += n;
    }
    EXPECT_EQ(covered, r.seq.size());
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  auto cfg = tiny_config();
  cfg.rel_values = true;
  cfg.head = model::HeadIndexing::absolute;
  cfg.sinusoidal_tokens = true;
  Checkpoint ck{cfg, random_parameters(cfg, 3), 17, 99, {1.5, 0.25, 2.0}, true};
  const auto path = temp_path("rt.ckpt");
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.lambdas.column, 1.5);
  EXPECT_EQ(back.lambdas.balance, 0.25);
  EXPECT_TRUE(back.baseline);
  EXPECT_EQ(back.config.head, model::HeadIndexing::absolute);
  EXPECT_TRUE(back.config.rel_values);
  EXPECT_TRUE(back.config.sinusoidal_tokens);
  EXPECT_EQ(tensors(back.params), tensors(ck.params));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 5; ++k) {
    const auto ex = random_example(8, rng);
    EXPECT_EQ(model::forward(ex.normalized, back.params, back.config),
              model::forward(ex.normalized, ck.params, ck.config));
  }
  save_checkpoint(back, temp_path("rt2.ckpt"));
  EXPECT_EQ(slurp(path), slurp(temp_path("rt2.ckpt")));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = temp_path("bad.ckpt");
  { std::ofstream(path) << "hello"; }
  EXPECT_THROW(load_checkpoint(path), Error);
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), Error);
  const auto cfg = tiny_config();
  save_checkpoint({cfg, random_parameters(cfg, 4)}, path);
  auto bytes = slurp(path);
  bytes.resize(bytes.size() - 8);
  { std::ofstream(path, std::ios::binary) << bytes; }
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Metrics, CsvSchema) {
  EXPECT_EQ(metrics_csv_header(), "step,ce,l2,l3,l4,total");
  StepLog s;
  s.step = 3;
  s.loss.ce = 1.5;
  s.loss.total = 2.5;
  EXPECT_EQ(metrics_csv_row(s), "3,1.5,0,0,0,2.5");
}

TEST(Train, LossDecreasesOnASmallFixture) {
  auto cfg = tiny_config();
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.batch_size = 8;
  tc.steps = 150;
  tc.seed = 5;
  tc.lambdas = Lambdas::none();
  const auto windows = fixture_windows(16, 5);
  const auto res = train(cfg, tc, windows);
  ASSERT_EQ(res.log.size(), 150u);
  double first = 0.0, last = 0.0;
  for (int k = 0; k < 10; ++k) {
    first += res.log[static_cast<std::size_t>(k)].loss.ce;
    last += res.log[res.log.size() - 1 - static_cast<std::size_t>(k)].loss.ce;
  }
  EXPECT_LT(last, 0.5 * first) << first << " " << last;
}

TEST(Train, BitIdenticalGivenSeedAndIndependentOfThreads) {
  auto cfg = tiny_config();
  cfg.dropout = 0.1;
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch_size = 4;
  tc.steps = 12;
  tc.seed = 8;
  const auto windows = fixture_windows(10, 8);
  const auto a = train(cfg, tc, windows);
  const auto b = train(cfg, tc, windows);
  tc.threads = 3;
  const auto c = train(cfg, tc, windows);
  EXPECT_EQ(tensors(a.checkpoint.params), tensors(b.checkpoint.params));
  EXPECT_EQ(tensors(a.checkpoint.params), tensors(c.checkpoint.params));
  tc.seed = 9;
  const auto d = train(cfg, tc, windows);
  EXPECT_NE(tensors(a.checkpoint.params), tensors(d.checkpoint.params));
}

TEST(Train, BaselineLogsZeroWeights) {
  const auto cfg = tiny_config();
  TrainConfig tc;
  tc.steps = 3;
  tc.batch_size = 2;
  tc.baseline = true;
  const auto res = train(cfg, tc, fixture_windows(4, 1));
  for (const auto& s : res.log) {
    EXPECT_EQ(s.loss.lambdas.column, 0.0);
    EXPECT_EQ(s.loss.total, s.loss.ce);
  }
  EXPECT_TRUE(res.checkpoint.baseline);
}

TEST(Train, KeepsTheBestValidatedParameters) {
  const auto cfg = tiny_config();
  TrainConfig tc;
  tc.steps = 6;
  tc.batch_size = 2;
  tc.eval_every = 2;
  int calls = 0;
  std::vector<ModelParameters> seen;
  TrainHooks hooks;
  // Scores 3, 1, 2: the parameters after step 2 must be returned.
  hooks.validator = [&](const ModelParameters& p) {
    seen.push_back(p);
    const double s[] = {3.0, 1.0, 2.0};
    return s[calls++];
  };
  const auto res = train(cfg, tc, fixture_windows(4, 2), hooks);
  EXPECT_EQ(calls, 3);
  ASSERT_TRUE(res.best_validation.has_value());
  EXPECT_EQ(*res.best_validation, 3.0);
  EXPECT_EQ(tensors(res.checkpoint.params), tensors(seen[0]));
}

TEST(Train, DivergenceKeepsTheLastGoodParameters) {
  const auto cfg = tiny_config();
  TrainConfig tc;
  tc.steps = 5;
  tc.batch_size = 1;
  auto windows = fixture_windows(1, 3);
  windows[0].normalized[1] = std::nan("");
  EXPECT_THROW(train(cfg, tc, windows), Error);
}

TEST(Train, FromDatasetWritesCheckpointAndLog) {
  const auto data = temp_path("train.jsonl"), out = temp_path("model.ckpt");
  sim::generate_dataset(sim::parse_case_mix("1"), 6, 4, data);
  auto cfg = tiny_config();
  TrainConfig tc;
  tc.steps = 4;
  tc.batch_size = 3;
  tc.checkpoint_every = 2;
  const auto res = train(cfg, tc, data, out);
  EXPECT_TRUE(std::filesystem::exists(out));
  EXPECT_TRUE(std::filesystem::exists(out.string() + ".step2"));
  std::ifstream log(out.string() + ".csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 5u);
  EXPECT_EQ(tensors(load_checkpoint(out).params), tensors(res.checkpoint.params));
  EXPECT_THROW(train(cfg, tc, temp_path("none.jsonl"), out), Error);
}

}  // namespace
}  // namespace pulseflow::train
