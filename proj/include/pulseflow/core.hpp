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
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pulseflow {

/// Base error type for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Index = std::size_t;
using Label = int;

/// Time-ordered arrival times (microseconds) with optional emitter labels.
class PulseSequence {
 public:
  PulseSequence() = default;
  explicit PulseSequence(std::vector<double> toas,
                         std::optional<std::vector<Label>> labels = std::nullopt);

  [[nodiscard]] std::size_t size() const { return toas_.size(); }
  [[nodiscard]] bool empty() const { return toas_.empty(); }
  [[nodiscard]] const std::vector<double>& toas() const { return toas_; }
  [[nodiscard]] bool has_labels() const { return labels_.has_value(); }
  [[nodiscard]] const std::vector<Label>& labels() const;

  /// Contiguous sub-range [first, first + count), labels carried along.
  [[nodiscard]] PulseSequence slice(Index first, std::size_t count) const;

 private:
  std::vector<double> toas_;
  std::optional<std::vector<Label>> labels_;
};

struct RtoaSequence {
  std::vector<double> rtoas;
};

enum class AssignmentKind { soft, hard };

/// Successor-link matrix with N rows and N + 1 columns; column N is the
/// terminal vertex. Entry (i, j) for j <= i is structurally zero.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;
  /// Row-major values, validated against the invariants of `kind`.
  AssignmentMatrix(std::size_t n, std::vector<double> values, AssignmentKind kind);

  /// Hard matrix from a successor vector; successors[i] == n means terminal.
  static AssignmentMatrix from_links(std::span<const Index> successors);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] std::size_t cols() const { return n_ + 1; }
  [[nodiscard]] Index terminal() const { return n_; }
  [[nodiscard]] AssignmentKind kind() const { return kind_; }
  [[nodiscard]] double operator()(Index i, Index j) const { return values_[i * (n_ + 1) + j]; }
  [[nodiscard]] std::span<const double> row(Index i) const {
    return {values_.data() + i * (n_ + 1), n_ + 1};
  }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  /// Successor of each row (hard only); terminal encoded as size().
  [[nodiscard]] std::vector<Index> links() const;

  friend bool operator==(const AssignmentMatrix&, const AssignmentMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
  AssignmentKind kind_ = AssignmentKind::hard;
};

/// Partition of {0..N-1} into time-ordered chains.
class ClusterSet {
 public:
  ClusterSet() = default;
  /// Validates that `chains` partitions {0..n-1} with strictly increasing chains.
  ClusterSet(std::size_t n, std::vector<std::vector<Index>> chains);

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] const std::vector<std::vector<Index>>& chains() const { return chains_; }
  [[nodiscard]] std::size_t num_chains() const { return chains_.size(); }

  friend bool operator==(const ClusterSet&, const ClusterSet&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<Index>> chains_;
};

RtoaSequence compute_rtoa(const PulseSequence& seq);

AssignmentMatrix labels_to_assignment(const PulseSequence& seq);

/// Successor vector of the ground-truth chains (terminal = size()).
std::vector<Index> labels_to_links(std::span<const Label> labels);

ClusterSet assignment_to_clusters(const AssignmentMatrix& a);
ClusterSet links_to_clusters(std::span<const Index> successors);
std::vector<Index> clusters_to_links(const ClusterSet& clusters);

/// Chains grouped by label, each in time order; chains sorted by first index.
ClusterSet labels_to_clusters(std::span<const Label> labels);

/// x / max(x); all-zero input maps to all zeros.
std::vector<double> normalize_sequence(const RtoaSequence& r);

}  // namespace pulseflow
