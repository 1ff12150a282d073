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
#include "pulseflow/classical.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace pulseflow::classical {

namespace {

std::vector<double> pool_times(std::span<const double> toas, std::span<const Index> pool) {
  std::vector<double> t(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) t[k] = toas[pool[k]];
  return t;
}

/// Largest count among bin k and its two neighbours.
double neighbourhood_max(const std::vector<double>& counts, std::size_t k) {
  double m = counts[k];
  if (k > 0) m = std::max(m, counts[k - 1]);
  if (k + 1 < counts.size()) m = std::max(m, counts[k + 1]);
  return m;
}

/// Whether the bin at twice the candidate delay also clears the threshold.
/// Delays whose double falls outside the histogram pass unchecked.
bool double_confirmed(const std::vector<double>& counts, const Binning& b, std::size_t k, double threshold) {
  const double twice = 2.0 * b.center(k);
  if (twice > b.tau_max) return true;
  const auto d = b.bin_of(twice);
  return d && neighbourhood_max(counts, *d) > threshold;
}

std::vector<std::vector<Index>> finish(std::vector<std::vector<Index>> chains, std::span<const Index> pool) {
  for (Index i : pool) chains.push_back({i});
  return chains;
}

/// Tries the candidate PRIs in order; extracts the first chain found.
bool extract_first(std::span<const double> toas, std::vector<Index>& pool, std::span<const double> pris,
                   const SearchParams& search, std::vector<std::vector<Index>>& chains) {
  for (double pri : pris) {
    auto res = sequence_search(toas, pool, pri, search);
    if (!res.chain.empty()) {
      chains.push_back(std::move(res.chain));
      pool = std::move(res.remaining);
      return true;
    }
  }
  return false;
}

std::vector<Index> all_indices(std::size_t n) {
  std::vector<Index> v(n);
  for (Index i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::cdif: return "cdif";
    case Method::sdif: return "sdif";
    case Method::prit: return "prit";
  }
  return "?";
}

Binning Binning::linear(double width, double tau_max) {
  if (!(width > 0.0) || !(tau_max > 0.0)) throw Error("bin width and tau_max must be positive");
  Binning b;
  b.kind = Kind::linear;
  b.width = width;
  b.tau_max = tau_max;
  return b;
}

Binning Binning::geometric(double ratio, double tau_max, double origin) {
  if (!(ratio > 1.0) || !(tau_max > origin) || !(origin > 0.0)) throw Error("invalid geometric binning");
  Binning b;
  b.kind = Kind::geometric;
  b.ratio = ratio;
  b.tau_max = tau_max;
  b.origin = origin;
  return b;
}

std::size_t Binning::count() const {
  if (kind == Kind::linear) return static_cast<std::size_t>(std::floor(tau_max / width)) + 1;
  return static_cast<std::size_t>(std::floor(std::log(tau_max / origin) / std::log(ratio))) + 1;
}

std::optional<std::size_t> Binning::bin_of(double tau) const {
  if (!(tau >= 0.0) || tau > tau_max) return std::nullopt;
  if (kind == Kind::linear) return static_cast<std::size_t>(std::floor(tau / width));
  if (tau < origin) return std::nullopt;
  const auto k = static_cast<std::size_t>(std::floor(std::log(tau / origin) / std::log(ratio)));
  return std::min(k, count() - 1);
}

double Binning::lower(std::size_t k) const {
  return kind == Kind::linear ? static_cast<double>(k) * width : origin * std::pow(ratio, static_cast<double>(k));
}

double Binning::upper(std::size_t k) const { return lower(k + 1); }

double Binning::center(std::size_t k) const {
  return kind == Kind::linear ? (static_cast<double>(k) + 0.5) * width : std::sqrt(lower(k) * upper(k));
}

double Binning::width_at(double tau) const {
  const auto k = bin_of(tau).value_or(count() - 1);
  return upper(k) - lower(k);
}

double DiffHistogram::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

DiffHistogram toa_diff_histogram(std::span<const double> toas, int level, const Binning& binning) {
  if (level < 1) throw Error("difference level must be at least 1");
  DiffHistogram h{level, binning, std::vector<double>(binning.count(), 0.0)};
  const auto c = static_cast<std::size_t>(level);
  for (std::size_t i = 0; i + c < toas.size(); ++i) {
    if (const auto k = binning.bin_of(toas[i + c] - toas[i])) h.counts[*k] += 1.0;
  }
  return h;
}

constexpr double kResidualWeight = 10.0;

SearchResult sequence_search(std::span<const double> toas, std::span<const Index> available, double pri,
                             const SearchParams& params) {
  if (!(pri > 0.0)) throw Error("PRI must be positive");
  if (!(params.tolerance_frac > 0.0 && params.tolerance_frac < 1.0)) throw Error("tolerance must lie in (0, 1)");
  const std::vector<double> t = pool_times(toas, available);
  const std::size_t n = t.size();
  std::vector<char> interior(n, 0);
  std::vector<std::size_t> best;
  double best_score = 0.0;
  std::vector<std::size_t> chain;
  for (std::size_t head = 0; head < n; ++head) {
    if (interior[head]) continue;
    chain.assign(1, head);
    double residual = 0.0;
    for (std::size_t cur = head;;) {
      std::size_t pick = n;
      double pick_err = 0.0;
      for (int m = 1; m <= params.max_missed && pick == n; ++m) {
        const double expect = t[cur] + m * pri;
        const double lo = expect - m * pri * params.tolerance_frac;
        const double hi = expect + m * pri * params.tolerance_frac;
        auto it = std::lower_bound(t.begin() + static_cast<std::ptrdiff_t>(cur) + 1, t.end(), lo);
        for (; it != t.end() && *it <= hi; ++it) {
          const double err = std::abs(*it - expect) / pri;
          if (pick == n || err < pick_err) {
            pick = static_cast<std::size_t>(it - t.begin());
            pick_err = err;
          }
        }
      }
      if (pick == n) break;
      chain.push_back(pick);
      interior[pick] = 1;
      residual += pick_err;
      cur = pick;
    }
    // A link off by one tenth of the PRI costs as much as one pulse.
    const double score = static_cast<double>(chain.size()) - kResidualWeight * residual;
    if (best.empty() || score > best_score) {
      best = chain;
      best_score = score;
    }
  }
  SearchResult res;
  if (best.size() < params.min_length) {
    res.remaining.assign(available.begin(), available.end());
    return res;
  }
  std::vector<char> taken(n, 0);
  for (std::size_t k : best) {
    taken[k] = 1;
    res.chain.push_back(available[k]);
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!taken[k]) res.remaining.push_back(available[k]);
  }
  return res;
}

ClusterSet cdif(const PulseSequence& seq, const HistogramParams& params) {
  const auto& toas = seq.toas();
  std::vector<Index> pool = all_indices(toas.size());
  std::vector<std::vector<Index>> chains;
  const Binning& b = params.binning;
  while (pool.size() >= params.search.min_length) {
    const auto t = pool_times(toas, pool);
    const double n = static_cast<double>(pool.size());
    std::vector<double> cumulative(b.count(), 0.0);
    bool extracted = false;
    for (int c = 1; c <= params.max_level && static_cast<std::size_t>(c) < pool.size() && !extracted; ++c) {
      const auto h = toa_diff_histogram(t, c, b);
      for (std::size_t k = 0; k < cumulative.size(); ++k) cumulative[k] += h.counts[k];
      const double threshold = params.cdif_scale * n / c;
      std::vector<double> pris;
      for (std::size_t k = 0; k < cumulative.size(); ++k) {
        if (cumulative[k] > threshold && double_confirmed(cumulative, b, k, threshold)) pris.push_back(b.center(k));
      }
      extracted = extract_first(toas, pool, pris, params.search, chains);
    }
    if (!extracted) break;
  }
  return {toas.size(), finish(std::move(chains), pool)};
}

ClusterSet sdif(const PulseSequence& seq, const HistogramParams& params) {
  const auto& toas = seq.toas();
  std::vector<Index> pool = all_indices(toas.size());
  std::vector<std::vector<Index>> chains;
  const Binning& b = params.binning;
  while (pool.size() >= params.search.min_length) {
    const auto t = pool_times(toas, pool);
    bool extracted = false;
    for (int c = 1; c <= params.max_level && static_cast<std::size_t>(c) < pool.size() && !extracted; ++c) {
      const auto h = toa_diff_histogram(t, c, b);
      const double e = static_cast<double>(pool.size() - static_cast<std::size_t>(c));
      auto threshold = [&](std::size_t k) {
        return params.sdif_scale * e * std::exp(-b.center(k) / (params.sdif_decay * b.tau_max));
      };
      std::vector<std::size_t> peaks;
      for (std::size_t k = 0; k < h.counts.size(); ++k) {
        if (h.counts[k] > threshold(k)) peaks.push_back(k);
      }
      if (peaks.empty()) continue;
      if (c == 1 && peaks.size() == 1 && params.subharmonic_check) {
        // A lone first-level peak must recur at twice its delay one level up.
        const double twice = 2.0 * b.center(peaks[0]);
        if (twice <= b.tau_max && t.size() > 2) {
          const auto h2 = toa_diff_histogram(t, 2, b);
          const auto d = b.bin_of(twice);
          if (!d || neighbourhood_max(h2.counts, *d) <= threshold(*d)) continue;
        }
      }
      // Most significant peak first, measured against its own threshold.
      std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t x, std::size_t y) {
        return h.counts[x] / threshold(x) > h.counts[y] / threshold(y);
      });
      std::vector<double> pris;
      for (std::size_t k : peaks) pris.push_back(b.center(k));
      extracted = extract_first(toas, pool, pris, params.search, chains);
    }
    if (!extracted) break;
  }
  return {toas.size(), finish(std::move(chains), pool)};
}

PriSpectrum pri_spectrum(std::span<const double> toas, const Binning& binning) {
  PriSpectrum s{binning, std::vector<double>(binning.count(), 0.0), std::vector<double>(binning.count(), 0.0)};
  std::vector<std::complex<double>> sum(binning.count());
  for (std::size_t n = 1; n < toas.size(); ++n) {
    for (std::size_t m = n; m-- > 0;) {
      const double tau = toas[n] - toas[m];
      if (tau > binning.tau_max) break;
      const auto k = binning.bin_of(tau);
      if (!k || tau <= 0.0) continue;
      sum[*k] += std::polar(1.0, 2.0 * std::numbers::pi * toas[n] / tau);
      s.pairs[*k] += 1.0;
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) s.magnitude[k] = std::abs(sum[k]);
  return s;
}

std::vector<PriEstimate> prit_candidates(const PriSpectrum& spectrum, const PritParams& params) {
  const auto& mag = spectrum.magnitude;
  std::vector<PriEstimate> out;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    if (mag[k] < params.min_magnitude || mag[k] < params.coherence * spectrum.pairs[k]) continue;
    if (k > 0 && mag[k - 1] > mag[k]) continue;
    if (k + 1 < mag.size() && mag[k + 1] >= mag[k]) continue;
    out.push_back({spectrum.binning.center(k), mag[k], Method::prit});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

ClusterSet prit(const PulseSequence& seq, const PritParams& params) {
  const auto& toas = seq.toas();
  std::vector<Index> pool = all_indices(toas.size());
  std::vector<std::vector<Index>> chains;
  while (pool.size() >= params.search.min_length) {
    const auto spectrum = pri_spectrum(pool_times(toas, pool), params.binning);
    std::vector<double> pris;
    for (const auto& c : prit_candidates(spectrum, params)) pris.push_back(c.pri);
    if (!extract_first(toas, pool, pris, params.search, chains)) break;
  }
  return {toas.size(), finish(std::move(chains), pool)};
}

ClusterSet deinterleave(Method m, const PulseSequence& seq) {
  switch (m) {
    case Method::cdif: return cdif(seq);
    case Method::sdif: return sdif(seq);
    case Method::prit: return prit(seq);
  }
  throw Error("unknown method");
}

}  // namespace pulseflow::classical
