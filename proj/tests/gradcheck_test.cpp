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
#include <random>

#include <gtest/gtest.h>

#include "pulseflow/loss.hpp"
#include "pulseflow/model.hpp"
#include "gradcheck.hpp"

namespace pulseflow::model {
namespace {

TEST(GradientCheck, TinyModelMatchesCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto head : {HeadIndexing::relative, HeadIndexing::absolute}) {
      for (bool rel_values : {false, true}) {
        auto cfg = testing::tiny_config();
        cfg.head = head;
        cfg.rel_values = rel_values;
        const auto report = testing::gradient_check(cfg, Lambdas{}, seed);
        EXPECT_LT(report.max_rel_error, 1e-4) << "seed " << seed << " worst " << report.worst;
      }
    }
  }
}

}  // namespace
}  // namespace pulseflow::model
