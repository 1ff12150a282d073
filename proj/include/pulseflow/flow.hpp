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

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pulseflow/core.hpp"

namespace pulseflow::flow {

/// Edges reach at most this many samples ahead unless configured otherwise.
inline constexpr std::size_t kDefaultLookahead = 64;

/// N x (N + 1) edge costs; column N is the terminal. Edge (i, j) is usable when
/// j == N, or i < j <= i + lookahead and the cost is finite.
class CostMatrix {
 public:
  CostMatrix(std::size_t n, std::vector<double> values, std::size_t lookahead = kDefaultLookahead);

  /// Costs 1 - p over the same forward mask.
  static CostMatrix from_soft(const AssignmentMatrix& p, std::size_t lookahead = kDefaultLookahead);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] std::size_t lookahead() const { return lookahead_; }
  [[nodiscard]] double operator()(Index i, Index j) const { return values_[i * (n_ + 1) + j]; }
  [[nodiscard]] bool allowed(Index i, Index j) const;

 private:
  std::size_t n_;
  std::vector<double> values_;
  std::size_t lookahead_;
};

struct FlowSolution {
  AssignmentMatrix assignment;
  double total_cost = 0.0;
  std::size_t num_flows = 0;
};

/// Sum of c(i, links[i]) in row order; throws if a link is not allowed.
double assignment_cost(const CostMatrix& c, std::span<const Index> links);

/// Exact minimum-cost chain partition. Among optimal assignments the one whose
/// successor vector is lexicographically smallest (terminal last) is returned.
FlowSolution solve_min_cost_flow(const CostMatrix& c);

/// Commits links in decreasing p order, skipping used rows and used non-terminal
/// columns. Rows left over go to the terminal.
/// `blocked`, when non-empty, marks non-terminal columns that must stay unclaimed.
AssignmentMatrix greedy_decode(const AssignmentMatrix& p, std::span<const char> blocked = {});

/// solve_min_cost_flow on costs 1 - p, with blocked columns removed.
AssignmentMatrix lp_decode(const AssignmentMatrix& p, std::size_t lookahead = kDefaultLookahead,
                           std::span<const char> blocked = {});

/// Visits every feasible successor vector over n samples with edges reaching at
/// most `lookahead` ahead. Test oracle; n is limited to 10.
void for_each_assignment(std::size_t n, std::size_t lookahead,
                         const std::function<void(std::span<const Index>)>& visit);

std::vector<std::vector<Index>> brute_force_assignments(std::size_t n, std::size_t lookahead);

}  // namespace pulseflow::flow
