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
#include <set>

#include <gtest/gtest.h>

#include "pulseflow/core.hpp"

namespace pulseflow {
namespace {

using Chains = std::vector<std::vector<Index>>;

TEST(ComputeRtoa, FirstDifferences) {
  EXPECT_EQ(compute_rtoa(PulseSequence({0, 5, 12, 20})).rtoas, (std::vector<double>{0, 5, 7, 8}));
  EXPECT_EQ(compute_rtoa(PulseSequence({7})).rtoas, (std::vector<double>{0}));
  EXPECT_EQ(compute_rtoa(PulseSequence({3, 3, 10})).rtoas, (std::vector<double>{0, 0, 7}));
}

TEST(ComputeRtoa, EmptyInputIsAnError) {
  EXPECT_THROW(compute_rtoa(PulseSequence(std::vector<double>{})), Error);
}

TEST(PulseSequence, RejectsDecreasingToasAndMismatchedLabels) {
  EXPECT_THROW(PulseSequence({1, 0}), Error);
  EXPECT_THROW(PulseSequence({1, 2}, std::vector<Label>{0}), Error);
  EXPECT_THROW(PulseSequence({1, 2}, std::vector<Label>{0, -1}), Error);
}

TEST(LabelsToAssignment, Examples) {
  const Index t4 = 4, t3 = 3;
  EXPECT_EQ(labels_to_assignment(PulseSequence({0, 1, 2, 3}, std::vector<Label>{0, 1, 0, 1})).links(),
            (std::vector<Index>{2, 3, t4, t4}));
  EXPECT_EQ(labels_to_assignment(PulseSequence({0, 1, 2}, std::vector<Label>{0, 0, 0})).links(),
            (std::vector<Index>{1, 2, t3}));
  EXPECT_EQ(labels_to_assignment(PulseSequence({0, 1, 2}, std::vector<Label>{0, 1, 2})).links(),
            (std::vector<Index>{t3, t3, t3}));
}

TEST(LabelsToAssignment, MissingLabelsIsAnError) {
  EXPECT_THROW(labels_to_assignment(PulseSequence({0, 1})), Error);
}

TEST(AssignmentToClusters, Examples) {
  EXPECT_EQ(assignment_to_clusters(AssignmentMatrix::from_links(std::vector<Index>{2, 3, 4, 4})).chains(),
            (Chains{{0, 2}, {1, 3}}));
  EXPECT_EQ(assignment_to_clusters(AssignmentMatrix::from_links(std::vector<Index>{1, 2, 3})).chains(),
            (Chains{{0, 1, 2}}));
  EXPECT_EQ(assignment_to_clusters(AssignmentMatrix::from_links(std::vector<Index>{2, 2})).chains(),
            (Chains{{0}, {1}}));
}

TEST(AssignmentToClusters, OneToManyIsInfeasible) {
  EXPECT_THROW(links_to_clusters(std::vector<Index>{2, 2, 3}), Error);
  EXPECT_THROW(AssignmentMatrix::from_links(std::vector<Index>{2, 2, 3}), Error);
  EXPECT_THROW(links_to_clusters(std::vector<Index>{0, 2}), Error);
}

TEST(AssignmentMatrix, SoftInvariants) {
  // Row 0 splits mass between sample 1 and the terminal; row 1 is terminal-only.
  AssignmentMatrix p(2, {0, 0.25, 0.75, 0, 0, 1}, AssignmentKind::soft);
  EXPECT_EQ(p(0, 2), 0.75);
  EXPECT_THROW(AssignmentMatrix(2, {0, 0.5, 0.4, 0, 0, 1}, AssignmentKind::soft), Error);
  EXPECT_THROW(AssignmentMatrix(2, {0.5, 0, 0.5, 0, 0, 1}, AssignmentKind::soft), Error);
  EXPECT_THROW(AssignmentMatrix(2, {0, 0.5, 0.5, 0, 0, 1}, AssignmentKind::hard), Error);
}

TEST(NormalizeSequence, Examples) {
  EXPECT_EQ(normalize_sequence({{0, 5, 10}}), (std::vector<double>{0, 0.5, 1.0}));
  EXPECT_EQ(normalize_sequence({{0, 0, 0}}), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(normalize_sequence({{2}}), (std::vector<double>{1.0}));
}

TEST(CoreProperties, LabelRoundTripGroupsByLabel) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    const int k = std::uniform_int_distribution<int>(1, 8)(rng);
    std::vector<Label> labels(n);
    std::vector<double> toas(n);
    double t = 0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = std::uniform_int_distribution<int>(0, k - 1)(rng);
      t += std::uniform_int_distribution<int>(0, 3)(rng);
      toas[i] = t;
    }
    const PulseSequence seq(toas, labels);
    const auto y = labels_to_assignment(seq);
    // Hard invariants are validated by the AssignmentMatrix constructor.
    ASSERT_NO_THROW(AssignmentMatrix(y.size(), y.values(), AssignmentKind::hard));
    const auto clusters = assignment_to_clusters(y);
    std::size_t covered = 0;
    for (const auto& chain : clusters.chains()) {
      for (std::size_t m = 0; m < chain.size(); ++m) {
        EXPECT_EQ(labels[chain[m]], labels[chain.front()]);
        if (m > 0) EXPECT_LT(chain[m - 1], chain[m]);
      }
      covered += chain.size();
    }
    EXPECT_EQ(covered, n);
    std::set<Label> distinct(labels.begin(), labels.end());
    EXPECT_EQ(clusters.num_chains(), distinct.size());

    const auto r = compute_rtoa(seq);
    ASSERT_EQ(r.rtoas.size(), n);
    for (double v : r.rtoas) EXPECT_GE(v, 0.0);
  }
}

}  // namespace
}  // namespace pulseflow
