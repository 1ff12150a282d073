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
#include "pulseflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pulseflow {

PulseSequence::PulseSequence(std::vector<double> toas, std::optional<std::vector<Label>> labels)
    : toas_(std::move(toas)), labels_(std::move(labels)) {
  for (std::size_t i = 1; i < toas_.size(); ++i) {
    if (!(toas_[i] >= toas_[i - 1])) throw Error("toas must be non-decreasing");
  }
  for (double t : toas_) {
    if (!std::isfinite(t)) throw Error("toas must be finite");
  }
  if (labels_ && labels_->size() != toas_.size()) {
    throw Error("labels and toas differ in length");
  }
  if (labels_) {
    for (Label l : *labels_) {
      if (l < 0) throw Error("labels must be non-negative");
    }
  }
}

const std::vector<Label>& PulseSequence::labels() const {
  if (!labels_) throw Error("sequence has no labels");
  return *labels_;
}

PulseSequence PulseSequence::slice(Index first, std::size_t count) const {
  if (first + count > toas_.size()) throw Error("slice out of range");
  std::vector<double> t(toas_.begin() + first, toas_.begin() + first + count);
  if (!labels_) return PulseSequence(std::move(t));
  std::vector<Label> l(labels_->begin() + first, labels_->begin() + first + count);
  return PulseSequence(std::move(t), std::move(l));
}

AssignmentMatrix::AssignmentMatrix(std::size_t n, std::vector<double> values, AssignmentKind kind)
    : n_(n), values_(std::move(values)), kind_(kind) {
  if (values_.size() != n_ * (n_ + 1)) throw Error("assignment matrix has wrong shape");
  std::vector<double> col_sum(n_ + 1, 0.0);
  for (Index i = 0; i < n_; ++i) {
    double row_sum = 0.0;
    for (Index j = 0; j <= n_; ++j) {
      const double v = (*this)(i, j);
      if (!(v >= 0.0 && v <= 1.0)) throw Error("assignment entries must lie in [0, 1]");
      if (j <= i && v != 0.0) throw Error("assignment links must go forward in time");
      if (kind_ == AssignmentKind::hard && v != 0.0 && v != 1.0) {
        throw Error("hard assignment entries must be binary");
      }
      row_sum += v;
      col_sum[j] += v;
    }
    if (kind_ == AssignmentKind::hard ? row_sum != 1.0 : std::abs(row_sum - 1.0) > 1e-6) {
      throw Error("assignment rows must sum to one");
    }
  }
  if (kind_ == AssignmentKind::hard) {
    for (Index j = 0; j < n_; ++j) {
      if (col_sum[j] > 1.0) throw Error("infeasible assignment: one-to-many link");
    }
  }
}

AssignmentMatrix AssignmentMatrix::from_links(std::span<const Index> successors) {
  const std::size_t n = successors.size();
  std::vector<double> v(n * (n + 1), 0.0);
  for (Index i = 0; i < n; ++i) {
    const Index j = successors[i];
    if (j > n || (j != n && j <= i)) throw Error("invalid successor link");
    v[i * (n + 1) + j] = 1.0;
  }
  return {n, std::move(v), AssignmentKind::hard};
}

std::vector<Index> AssignmentMatrix::links() const {
  if (kind_ != AssignmentKind::hard) throw Error("links() requires a hard assignment");
  std::vector<Index> out(n_, n_);
  for (Index i = 0; i < n_; ++i) {
    const auto r = row(i);
    out[i] = static_cast<Index>(std::find(r.begin(), r.end(), 1.0) - r.begin());
  }
  return out;
}

ClusterSet::ClusterSet(std::size_t n, std::vector<std::vector<Index>> chains)
    : n_(n), chains_(std::move(chains)) {
  std::vector<bool> seen(n_, false);
  std::size_t total = 0;
  for (const auto& c : chains_) {
    if (c.empty()) throw Error("empty chain");
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] >= n_ || seen[c[k]]) throw Error("chains do not partition the index set");
      if (k > 0 && c[k] <= c[k - 1]) throw Error("chain not increasing in time");
      seen[c[k]] = true;
    }
    total += c.size();
  }
  if (total != n_) throw Error("chains do not partition the index set");
  std::sort(chains_.begin(), chains_.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

RtoaSequence compute_rtoa(const PulseSequence& seq) {
  if (seq.empty()) throw Error("empty input");
  const auto& t = seq.toas();
  RtoaSequence r;
  r.rtoas.resize(t.size());
  r.rtoas[0] = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) r.rtoas[i] = t[i] - t[i - 1];
  return r;
}

std::vector<Index> labels_to_links(std::span<const Label> labels) {
  const std::size_t n = labels.size();
  std::vector<Index> succ(n, n);
  std::map<Label, Index> last;
  for (Index i = 0; i < n; ++i) {
    if (auto it = last.find(labels[i]); it != last.end()) succ[it->second] = i;
    last[labels[i]] = i;
  }
  return succ;
}

AssignmentMatrix labels_to_assignment(const PulseSequence& seq) {
  if (!seq.has_labels()) throw Error("labels required");
  return AssignmentMatrix::from_links(labels_to_links(seq.labels()));
}

ClusterSet links_to_clusters(std::span<const Index> successors) {
  const std::size_t n = successors.size();
  std::vector<int> indegree(n, 0);
  for (Index i = 0; i < n; ++i) {
    const Index j = successors[i];
    if (j > n) throw Error("infeasible assignment");
    if (j < n) {
      if (j <= i || ++indegree[j] > 1) throw Error("infeasible assignment");
    }
  }
  std::vector<std::vector<Index>> chains;
  for (Index s = 0; s < n; ++s) {
    if (indegree[s] != 0) continue;
    std::vector<Index> chain;
    for (Index k = s; k != n; k = successors[k]) chain.push_back(k);
    chains.push_back(std::move(chain));
  }
  return {n, std::move(chains)};
}

ClusterSet assignment_to_clusters(const AssignmentMatrix& a) {
  return links_to_clusters(a.links());
}

std::vector<Index> clusters_to_links(const ClusterSet& clusters) {
  const std::size_t n = clusters.size();
  std::vector<Index> succ(n, n);
  for (const auto& c : clusters.chains()) {
    for (std::size_t k = 0; k + 1 < c.size(); ++k) succ[c[k]] = c[k + 1];
  }
  return succ;
}

ClusterSet labels_to_clusters(std::span<const Label> labels) {
  return links_to_clusters(labels_to_links(labels));
}

std::vector<double> normalize_sequence(const RtoaSequence& r) {
  std::vector<double> out(r.rtoas.size(), 0.0);
  if (out.empty()) return out;
  const double m = *std::max_element(r.rtoas.begin(), r.rtoas.end());
  if (!(m > 0.0)) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.rtoas[i] / m;
  return out;
}

}  // namespace pulseflow
