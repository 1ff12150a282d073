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
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pulseflow/plot.hpp"

namespace pulseflow::plot {
namespace {

TEST(ParsePattern, Examples) {
  auto p = parse_pattern("constant:500");
  EXPECT_EQ(p.type, sim::PriType::constant);
  EXPECT_EQ(p.base_pris, std::vector<double>{500});

  p = parse_pattern("jitter:500:0.1");
  EXPECT_EQ(p.type, sim::PriType::jitter);
  EXPECT_DOUBLE_EQ(p.deviation_frac, 0.1);

  p = parse_pattern("switch_dwell:600/400/500:0:5/7/3");
  EXPECT_EQ(p.base_pris, (std::vector<double>{600, 400, 500}));
  EXPECT_EQ(p.dwells, (std::vector<int>{5, 7, 3}));
}

TEST(ParsePattern, Errors) {
  for (const char* bad : {"", "constant", "wobble:500", "constant:abc", "jitter:500:x", "constant:2000",
                          "switch_dwell:600/400:0:5", "constant:500:0:1:extra"}) {
    EXPECT_THROW(parse_pattern(bad), Error) << bad;
  }
}

TEST(Panels, AllFiveTypesAreValid) {
  const auto panels = pri_type_panels();
  ASSERT_EQ(panels.size(), 5u);
  for (const auto& p : panels) EXPECT_NO_THROW(p.pattern.validate()) << p.name;
}

TEST(PriCsv, Rows) {
  const std::vector<double> pris{500, 400.5};
  EXPECT_EQ(pri_csv(pris), "index,pri_us\n0,500\n1,400.5\n");
}

TEST(PriSvg, OneMarkerPerPulse) {
  std::mt19937_64 rng(4);
  const auto pattern = parse_pattern("random_stagger:400/500/600");
  const auto pris = sim::generate_pri_sequence(pattern, 30, rng);
  const auto svg = pri_svg(pris, "d");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t markers = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++markers;
  EXPECT_EQ(markers, pris.size());
}

TEST(HistogramCsv, NonEmptyBinsOnly) {
  const std::vector<double> t{0, 5, 10, 15};
  const auto h = classical::toa_diff_histogram(t, 1, classical::Binning::linear(1.0, 100.0));
  EXPECT_EQ(histogram_csv(h), "bin_low_us,count\n5,3\n");
}

}  // namespace
}  // namespace pulseflow::plot
