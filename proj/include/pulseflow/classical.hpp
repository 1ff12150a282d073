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
#include <string_view>
#include <vector>

#include "pulseflow/core.hpp"

namespace pulseflow::classical {

enum class Method { cdif, sdif, prit };

std::string_view to_string(Method m);

/// Bin layout over ToA differences in [0, tau_max]. Linear bins have constant
/// width; geometric bins grow by `ratio` from `origin` so that every bin spans
/// the same relative tolerance.
struct Binning {
  enum class Kind { linear, geometric };
  Kind kind = Kind::geometric;
  double width = 1.0;    // linear
  double ratio = 1.01;   // geometric
  double origin = 0.5;   // geometric: lower edge of bin 0, us
  double tau_max = 1100.0;

  static Binning linear(double width, double tau_max);
  static Binning geometric(double ratio, double tau_max, double origin = 0.5);

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] std::optional<std::size_t> bin_of(double tau) const;
  [[nodiscard]] double lower(std::size_t k) const;
  [[nodiscard]] double upper(std::size_t k) const;
  [[nodiscard]] double center(std::size_t k) const;
  /// Width of the bin holding tau (or of the last bin).
  [[nodiscard]] double width_at(double tau) const;
};

struct DiffHistogram {
  int level = 1;
  Binning binning;
  std::vector<double> counts;

  [[nodiscard]] double total() const;
};

struct PriEstimate {
  double pri = 0.0;
  double score = 0.0;
  Method source = Method::cdif;
};

/// Counts differences toas[i + level] - toas[i] per bin. Differences beyond
/// tau_max (or below a geometric origin) are dropped; level >= N gives an
/// empty histogram.
DiffHistogram toa_diff_histogram(std::span<const double> toas, int level, const Binning& binning);

struct SearchParams {
  double tolerance_frac = 0.15;
  int max_missed = 3;          // gaps up to max_missed * pri are bridged
  std::size_t min_length = 5;  // shorter chains are rejected
};

struct SearchResult {
  std::vector<Index> chain;
  std::vector<Index> remaining;
};

/// Extracts the pulse chain that follows `pri` from the `available` pulses
/// (sorted indices into toas). Every available pulse is tried as a chain
/// head in time order; the longest chain wins, then the smallest mean gap
/// residual, then the earliest head. Chains under min_length are rejected
/// and `remaining` equals `available`.
SearchResult sequence_search(std::span<const double> toas, std::span<const Index> available, double pri,
                             const SearchParams& params = {});

struct HistogramParams {
  Binning binning{};
  int max_level = 6;
  double cdif_scale = 0.15;   // CDIF threshold b * N / c
  double sdif_scale = 0.2;    // SDIF threshold a * E * exp(-tau / (k * tau_max))
  double sdif_decay = 0.2;
  bool subharmonic_check = true;
  SearchParams search{};
};

struct PritParams {
  Binning binning{};
  double coherence = 0.5;      // |D_k| must reach this fraction of the pair count
  double min_magnitude = 4.0;
  SearchParams search{};
};

/// PRI transform magnitude per bin together with the number of pairs it sums.
struct PriSpectrum {
  Binning binning;
  std::vector<double> magnitude;
  std::vector<double> pairs;
};

PriSpectrum pri_spectrum(std::span<const double> toas, const Binning& binning);

/// Candidate PRIs at one stage of each method (strongest or earliest first).
std::vector<PriEstimate> prit_candidates(const PriSpectrum& spectrum, const PritParams& params = {});

ClusterSet cdif(const PulseSequence& seq, const HistogramParams& params = {});
ClusterSet sdif(const PulseSequence& seq, const HistogramParams& params = {});
ClusterSet prit(const PulseSequence& seq, const PritParams& params = {});

ClusterSet deinterleave(Method m, const PulseSequence& seq);

}  // namespace pulseflow::classical
