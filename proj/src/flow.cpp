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
#include "pulseflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pulseflow::flow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Square assignment problem behind the chain partition. Rows 0..n-1 are the
/// samples, rows n..2n-1 are slack rows that may take any column at zero cost.
/// Columns 0..n-1 are the samples as successors, column n + i is the private
/// terminal copy of row i.
class ChainAssignment {
 public:
  explicit ChainAssignment(const CostMatrix& c) : c_(c), n_(c.size()), dim_(2 * n_) {}

  double cost(std::size_t row, std::size_t col) const {
    if (row >= n_) return 0.0;
    if (col >= n_) return col - n_ == row ? c_(row, n_) : kInf;
    return c_.allowed(row, col) ? c_(row, col) : kInf;
  }

  /// Hungarian method with potentials; fills row_to_col and the duals.
  void solve() {
    const std::size_t m = dim_;
    std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (std::size_t i = 1; i <= m; ++i) {
      p[0] = i;
      std::size_t j0 = 0;
      std::fill(minv.begin(), minv.end(), kInf);
      std::fill(used.begin(), used.end(), 0);
      do {
        used[j0] = 1;
        const std::size_t i0 = p[j0];
        double delta = kInf;
        std::size_t j1 = 0;
        for (std::size_t j = 1; j <= m; ++j) {
          if (used[j]) continue;
          const double a = cost(i0 - 1, j - 1);
          if (a != kInf) {
            const double cur = a - u[i0] - v[j];
            if (cur < minv[j]) {
              minv[j] = cur;
              way[j] = j0;
            }
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
        if (j1 == 0) throw Error("infeasible assignment problem");
        for (std::size_t j = 0; j <= m; ++j) {
          if (used[j]) {
            u[p[j]] += delta;
            v[j] -= delta;
          } else {
            minv[j] -= delta;
          }
        }
        j0 = j1;
      } while (p[j0] != 0);
      do {
        const std::size_t j1 = way[j0];
        p[j0] = p[j1];
        j0 = j1;
      } while (j0 != 0);
    }
    row_u_.assign(u.begin() + 1, u.end());
    col_v_.assign(v.begin() + 1, v.end());
    row_to_col_.assign(m, 0);
    col_to_row_.assign(m, 0);
    for (std::size_t j = 1; j <= m; ++j) {
      row_to_col_[p[j] - 1] = j - 1;
      col_to_row_[j - 1] = p[j] - 1;
    }
  }

  /// Re-selects, row by row, the smallest successor that still admits a
  /// perfect matching on the tight (zero reduced cost) edges. Any such
  /// matching is optimal by complementary slackness.
  std::vector<Index> lexicographic_links() {
    double scale = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j <= n_; ++j) {
        if (c_.allowed(i, j)) scale = std::max(scale, std::abs(c_(i, j)));
      }
    }
    tol_ = 1e-9 * scale;
    locked_row_.assign(dim_, 0);
    locked_col_.assign(dim_, 0);
    std::vector<Index> links(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t col : candidates(i)) {
        if (locked_col_[col]) continue;
        if (try_force(i, col)) break;
      }
      locked_row_[i] = 1;
      locked_col_[row_to_col_[i]] = 1;
      const std::size_t col = row_to_col_[i];
      links[i] = col >= n_ ? n_ : col;
    }
    return links;
  }

 private:
  bool tight(std::size_t row, std::size_t col) const {
    const double a = cost(row, col);
    return a != kInf && std::abs(a - row_u_[row] - col_v_[col]) <= tol_;
  }

  /// Tight columns of a sample row in successor order, terminal copy last.
  std::vector<std::size_t> candidates(std::size_t row) const {
    std::vector<std::size_t> out;
    const std::size_t last = std::min(n_ - 1, row + c_.lookahead());
    for (std::size_t col = row + 1; col <= last; ++col) {
      if (tight(row, col)) out.push_back(col);
    }
    if (tight(row, n_ + row)) out.push_back(n_ + row);
    return out;
  }

  bool try_force(std::size_t row, std::size_t col) {
    const std::size_t old_col = row_to_col_[row];
    if (old_col == col) return true;
    const auto saved_r2c = row_to_col_;
    const auto saved_c2r = col_to_row_;
    const std::size_t displaced = col_to_row_[col];
    row_to_col_[row] = col;
    col_to_row_[col] = row;
    col_to_row_[old_col] = kNone;
    row_to_col_[displaced] = kNone;
    locked_row_[row] = 1;
    visited_.assign(dim_, 0);
    const bool ok = augment(displaced);
    locked_row_[row] = 0;
    if (!ok) {
      row_to_col_ = saved_r2c;
      col_to_row_ = saved_c2r;
    }
    return ok;
  }

  bool augment(std::size_t row) {
    const bool sample = row < n_;
    const std::size_t first = sample ? row + 1 : 0;
    const std::size_t last = sample ? std::min(n_ - 1, row + c_.lookahead()) : dim_ - 1;
    auto visit = [&](std::size_t col) {
      if (visited_[col] || locked_col_[col] || !tight(row, col)) return false;
      visited_[col] = 1;
      const std::size_t owner = col_to_row_[col];
      if (owner == kNone || (!locked_row_[owner] && augment(owner))) {
        row_to_col_[row] = col;
        col_to_row_[col] = row;
        return true;
      }
      return false;
    };
    for (std::size_t col = first; col <= last && col < dim_; ++col) {
      if (visit(col)) return true;
    }
    return sample && visit(n_ + row);
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  const CostMatrix& c_;
  std::size_t n_;
  std::size_t dim_;
  double tol_ = 0.0;
  std::vector<double> row_u_, col_v_;
  std::vector<std::size_t> row_to_col_, col_to_row_;
  std::vector<char> locked_row_, locked_col_, visited_;
};

}  // namespace

CostMatrix::CostMatrix(std::size_t n, std::vector<double> values, std::size_t lookahead)
    : n_(n), values_(std::move(values)), lookahead_(lookahead) {
  if (values_.size() != n_ * (n_ + 1)) throw Error("cost matrix has wrong shape");
  if (lookahead_ == 0) throw Error("lookahead must be positive");
  for (double v : values_) {
    if (std::isnan(v)) throw Error("cost matrix contains NaN");
  }
}

CostMatrix CostMatrix::from_soft(const AssignmentMatrix& p, std::size_t lookahead) {
  std::vector<double> c(p.values().size());
  std::transform(p.values().begin(), p.values().end(), c.begin(), [](double x) { return 1.0 - x; });
  return {p.size(), std::move(c), lookahead};
}

bool CostMatrix::allowed(Index i, Index j) const {
  if (j == n_) return std::isfinite((*this)(i, j));
  return j > i && j - i <= lookahead_ && j < n_ && std::isfinite((*this)(i, j));
}

double assignment_cost(const CostMatrix& c, std::span<const Index> links) {
  if (links.size() != c.size()) throw Error("link vector does not match cost matrix");
  double total = 0.0;
  for (Index i = 0; i < links.size(); ++i) {
    if (!c.allowed(i, links[i])) throw Error("link uses a disallowed edge");
    total += c(i, links[i]);
  }
  return total;
}

FlowSolution solve_min_cost_flow(const CostMatrix& c) {
  const std::size_t n = c.size();
  for (Index i = 0; i < n; ++i) {
    if (!c.allowed(i, n)) throw Error("infeasible: row " + std::to_string(i) + " has no finite edge to the terminal");
  }
  FlowSolution sol;
  if (n == 0) {
    sol.assignment = AssignmentMatrix::from_links({});
    return sol;
  }
  ChainAssignment problem(c);
  problem.solve();
  const auto links = problem.lexicographic_links();
  sol.assignment = AssignmentMatrix::from_links(links);
  sol.total_cost = assignment_cost(c, links);
  sol.num_flows = static_cast<std::size_t>(std::count(links.begin(), links.end(), n));
  return sol;
}

AssignmentMatrix greedy_decode(const AssignmentMatrix& p, std::span<const char> blocked) {
  const std::size_t n = p.size();
  if (!blocked.empty() && blocked.size() != n) throw Error("blocked mask does not match matrix");
  struct Entry {
    double p;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j <= n; ++j) {
      if (p(i, j) > 0.0) entries.push_back({p(i, j), i, j});
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.p > b.p; });
  std::vector<Index> links(n, n);
  std::vector<char> row_done(n, 0), col_used(n, 0);
  if (!blocked.empty()) col_used.assign(blocked.begin(), blocked.end());
  for (const auto& e : entries) {
    if (row_done[e.i]) continue;
    if (e.j != n) {
      if (col_used[e.j]) continue;
      col_used[e.j] = 1;
    }
    row_done[e.i] = 1;
    links[e.i] = e.j;
  }
  return AssignmentMatrix::from_links(links);
}

AssignmentMatrix lp_decode(const AssignmentMatrix& p, std::size_t lookahead, std::span<const char> blocked) {
  if (blocked.empty()) return solve_min_cost_flow(CostMatrix::from_soft(p, lookahead)).assignment;
  const std::size_t n = p.size();
  if (blocked.size() != n) throw Error("blocked mask does not match matrix");
  std::vector<double> c(p.values().size());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= n; ++j) {
      c[i * (n + 1) + j] = j < n && blocked[j] ? kInf : 1.0 - p(i, j);
    }
  }
  return solve_min_cost_flow(CostMatrix(n, std::move(c), lookahead)).assignment;
}

void for_each_assignment(std::size_t n, std::size_t lookahead,
                         const std::function<void(std::span<const Index>)>& visit) {
  if (n > 10) throw Error("brute-force enumeration limited to n <= 10");
  std::vector<Index> links(n, n);
  std::vector<char> used(n, 0);
  std::function<void(Index)> rec = [&](Index i) {
    if (i == n) {
      visit(links);
      return;
    }
    for (Index j = i + 1; j < n && j - i <= lookahead; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      links[i] = j;
      rec(i + 1);
      used[j] = 0;
    }
    links[i] = n;
    rec(i + 1);
  };
  rec(0);
}

std::vector<std::vector<Index>> brute_force_assignments(std::size_t n, std::size_t lookahead) {
  std::vector<std::vector<Index>> out;
  for_each_assignment(n, lookahead, [&](std::span<const Index> l) { out.emplace_back(l.begin(), l.end()); });
  return out;
}

}  // namespace pulseflow::flow
