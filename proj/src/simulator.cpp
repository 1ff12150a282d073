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
#include "pulseflow/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <string>

namespace pulseflow::sim {

namespace {

constexpr std::array kAllTypes{PriType::constant, PriType::jitter, PriType::constant_stagger,
                               PriType::random_stagger, PriType::switch_dwell};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
bool coin(Rng& rng) { return uniform_int(rng, 0, 1) == 1; }

double deviate(double base, double frac, Rng& rng) {
  if (frac == 0.0) return base;
  return base * (1.0 + uniform_real(rng, -frac, frac));
}

PriPattern sample_pattern(PriType type, Rng& rng) {
  PriPattern p;
  p.type = type;
  int levels = 1;
  if (type != PriType::constant && type != PriType::jitter) {
    levels = uniform_int(rng, kMinLevels, kMaxLevels);
  }
  for (int k = 0; k < levels; ++k) p.base_pris.push_back(uniform_real(rng, kMinPri, kMaxPri));
  if (type == PriType::switch_dwell) {
    for (int k = 0; k < levels; ++k) p.dwells.push_back(uniform_int(rng, kMinDwell, kMaxDwell));
  }
  p.deviation_frac = uniform_real(rng, 0.0, max_deviation(type));
  return p;
}

struct CaseTraits {
  bool only_constant_jitter = false;
  bool missing = false;
  enum class Timing { close, far, either } starts = Timing::either;
  enum class Endings { aligned, free, either } endings = Endings::free;
};

CaseTraits traits_for(int case_id) {
  using T = CaseTraits::Timing;
  using E = CaseTraits::Endings;
  switch (case_id) {
    case 1: return {true, false, T::either, E::free};
    case 2: return {false, false, T::close, E::aligned};
    case 3: return {false, true, T::close, E::aligned};
    case 4: return {false, false, T::far, E::free};
    case 5: return {false, true, T::either, E::either};
    default: throw Error("invalid case id " + std::to_string(case_id));
  }
}

EmitterSpec sample_emitter(const CaseTraits& traits, Rng& rng) {
  EmitterSpec e;
  const PriType type = traits.only_constant_jitter
                           ? (coin(rng) ? PriType::jitter : PriType::constant)
                           : kAllTypes[static_cast<std::size_t>(uniform_int(rng, 0, 4))];
  e.pattern = sample_pattern(type, rng);
  e.pulse_count = uniform_int(rng, kMinPulses, kMaxPulses);
  if (traits.missing) {
    e.missing_prob = uniform_real(rng, 0.0, kMaxMissingProb);
    e.max_consecutive_missing = uniform_int(rng, 1, kMaxConsecutiveMissing);
  }
  return e;
}

double mean_pri(const PriPattern& p) {
  return std::accumulate(p.base_pris.begin(), p.base_pris.end(), 0.0) /
         static_cast<double>(p.base_pris.size());
}

void assign_starts(Scenario& s, bool far, Rng& rng) {
  double max_pri = 0.0;
  double span = 0.0;
  for (const auto& e : s.emitters) {
    const auto& b = e.pattern.base_pris;
    max_pri = std::max(max_pri, *std::max_element(b.begin(), b.end()));
    span = std::max(span, (e.pulse_count - 1) * mean_pri(e.pattern));
  }
  const double hi = far ? 0.25 * span : 2.0 * max_pri;
  for (auto& e : s.emitters) e.start_time = hi > 0.0 ? uniform_real(rng, 0.0, hi) : 0.0;
}

/// Cuts every train at the earliest last-pulse time; returns the train that ends first.
std::size_t truncate_at_earliest_end(std::vector<PulseSequence>& trains) {
  std::size_t first = 0;
  for (std::size_t k = 1; k < trains.size(); ++k) {
    if (trains[k].toas().back() < trains[first].toas().back()) first = k;
  }
  const double end = trains[first].toas().back();
  for (auto& t : trains) {
    const auto& v = t.toas();
    t = t.slice(0, static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), end) - v.begin()));
  }
  return first;
}

}  // namespace

double max_deviation(PriType type) {
  switch (type) {
    case PriType::constant: return 0.01;
    case PriType::jitter: return 0.15;
    default: return 0.40;
  }
}

std::string_view to_string(PriType type) {
  switch (type) {
    case PriType::constant: return "constant";
    case PriType::jitter: return "jitter";
    case PriType::constant_stagger: return "constant_stagger";
    case PriType::random_stagger: return "random_stagger";
    case PriType::switch_dwell: return "switch_dwell";
  }
  return "?";
}

PriType pri_type_from_string(std::string_view name) {
  for (PriType t : kAllTypes) {
    if (to_string(t) == name) return t;
  }
  throw Error("unknown PRI type '" + std::string(name) + "'");
}

void PriPattern::validate() const {
  if (base_pris.empty()) throw Error("pattern needs at least one PRI");
  for (double p : base_pris) {
    if (!(p >= kMinPri && p <= kMaxPri)) throw Error("base PRI outside [1, 1000] us");
  }
  if (!(deviation_frac >= 0.0 && deviation_frac <= max_deviation(type))) {
    throw Error("deviation exceeds the maximum for " + std::string(to_string(type)));
  }
  const auto levels = static_cast<int>(base_pris.size());
  switch (type) {
    case PriType::constant:
    case PriType::jitter:
      if (levels != 1) throw Error("constant and jitter patterns take a single PRI");
      break;
    case PriType::switch_dwell:
      if (dwells.size() != base_pris.size()) throw Error("one dwell count per PRI required");
      for (int d : dwells) {
        if (d < 1) throw Error("dwell counts must be positive");
      }
      [[fallthrough]];
    case PriType::constant_stagger:
    case PriType::random_stagger:
      if (levels < kMinLevels || levels > kMaxLevels) throw Error("stagger level outside [2, 9]");
      break;
  }
}

void EmitterSpec::validate() const {
  pattern.validate();
  if (pulse_count < kMinPulses || pulse_count > kMaxPulses) throw Error("pulse count outside [5, 100]");
  if (!(missing_prob >= 0.0 && missing_prob <= kMaxMissingProb)) throw Error("missing probability above 0.20");
  if (max_consecutive_missing < 1 || max_consecutive_missing > kMaxConsecutiveMissing) {
    throw Error("consecutive missing run outside [1, 10]");
  }
  if (!std::isfinite(start_time) || start_time < 0.0) throw Error("start time must be finite and non-negative");
}

void Scenario::validate() const {
  if (case_id < 1 || case_id > 5) throw Error("invalid case id");
  const auto n = static_cast<int>(emitters.size());
  if (n < kMinEmitters || n > kMaxEmitters) throw Error("scenario needs 1 to 10 emitters");
  for (const auto& e : emitters) e.validate();
}

std::vector<double> generate_pri_sequence(const PriPattern& pattern, int count, Rng& rng) {
  if (count < 1) throw Error("PRI count must be at least 1");
  pattern.validate();
  const auto& base = pattern.base_pris;
  const auto levels = base.size();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t level = 0;
  int dwell_left = pattern.type == PriType::switch_dwell ? pattern.dwells[0] : 0;
  for (int k = 0; k < count; ++k) {
    double b = base[0];
    switch (pattern.type) {
      case PriType::constant:
      case PriType::jitter:
        break;
      case PriType::constant_stagger:
        b = base[static_cast<std::size_t>(k) % levels];
        break;
      case PriType::random_stagger:
        b = base[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(levels) - 1))];
        break;
      case PriType::switch_dwell:
        if (dwell_left == 0) {
          level = (level + 1) % levels;
          dwell_left = pattern.dwells[level];
        }
        b = base[level];
        --dwell_left;
        break;
    }
    out.push_back(deviate(b, pattern.deviation_frac, rng));
  }
  return out;
}

std::vector<double> apply_missing(std::span<const double> toas, double missing_prob,
                                  int max_consecutive, Rng& rng) {
  std::vector<double> out;
  if (toas.empty()) return out;
  out.push_back(toas[0]);
  if (missing_prob <= 0.0 || max_consecutive < 1) {
    out.assign(toas.begin(), toas.end());
    return out;
  }
  std::bernoulli_distribution seed(std::min(missing_prob, 1.0));
  int run_left = 0;    // pulses still to delete in the current run
  int consecutive = 0; // pulses deleted back to back so far
  for (std::size_t i = 1; i < toas.size(); ++i) {
    if (run_left == 0 && consecutive < max_consecutive && seed(rng)) {
      run_left = uniform_int(rng, 1, max_consecutive);
    }
    if (run_left > 0 && consecutive < max_consecutive) {
      --run_left;
      ++consecutive;
      continue;
    }
    run_left = 0;
    consecutive = 0;
    out.push_back(toas[i]);
  }
  return out;
}

PulseSequence generate_pulse_train(const EmitterSpec& spec, Label label, Rng& rng) {
  spec.validate();
  std::vector<double> toas;
  toas.reserve(static_cast<std::size_t>(spec.pulse_count));
  toas.push_back(spec.start_time);
  if (spec.pulse_count > 1) {
    for (double pri : generate_pri_sequence(spec.pattern, spec.pulse_count - 1, rng)) {
      toas.push_back(toas.back() + pri);
    }
  }
  toas = apply_missing(toas, spec.missing_prob, spec.max_consecutive_missing, rng);
  std::vector<Label> labels(toas.size(), label);
  return PulseSequence(std::move(toas), std::move(labels));
}

PulseSequence interleave(std::span<const PulseSequence> trains) {
  std::set<Label> ids;
  for (const auto& t : trains) {
    if (t.empty()) continue;
    if (!t.has_labels()) throw Error("interleave requires labelled trains");
    const Label id = t.labels().front();
    for (Label l : t.labels()) {
      if (l != id) throw Error("each train must carry a single label");
    }
    if (!ids.insert(id).second) throw Error("duplicate emitter id");
  }
  struct Head {
    double toa;
    Label label;
    std::size_t pos;
    std::size_t train;
    bool operator>(const Head& o) const {
      if (toa != o.toa) return toa > o.toa;
      if (label != o.label) return label > o.label;
      return pos > o.pos;
    }
  };
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::size_t total = 0;
  for (std::size_t k = 0; k < trains.size(); ++k) {
    total += trains[k].size();
    if (!trains[k].empty()) heap.push({trains[k].toas()[0], trains[k].labels()[0], 0, k});
  }
  std::vector<double> toas;
  std::vector<Label> labels;
  toas.reserve(total);
  labels.reserve(total);
  while (!heap.empty()) {
    const Head h = heap.top();
    heap.pop();
    toas.push_back(h.toa);
    labels.push_back(h.label);
    const auto& t = trains[h.train];
    if (h.pos + 1 < t.size()) heap.push({t.toas()[h.pos + 1], h.label, h.pos + 1, h.train});
  }
  return PulseSequence(std::move(toas), std::move(labels));
}

namespace {

std::vector<PulseSequence> realize_trains(const Scenario& scenario) {
  Rng rng(scenario.seed);
  std::vector<PulseSequence> trains;
  trains.reserve(scenario.emitters.size());
  for (std::size_t k = 0; k < scenario.emitters.size(); ++k) {
    trains.push_back(generate_pulse_train(scenario.emitters[k], static_cast<Label>(k), rng));
  }
  return trains;
}

}  // namespace

PulseSequence realize(const Scenario& scenario) {
  scenario.validate();
  auto trains = realize_trains(scenario);
  if (scenario.align_endings) truncate_at_earliest_end(trains);
  return interleave(trains);
}

Scenario sample_scenario(int case_id, Rng& rng) {
  const CaseTraits traits = traits_for(case_id);
  Scenario s;
  s.case_id = case_id;
  const int n = uniform_int(rng, kMinEmitters, kMaxEmitters);
  for (int k = 0; k < n; ++k) s.emitters.push_back(sample_emitter(traits, rng));
  const bool far = traits.starts == CaseTraits::Timing::far ||
                   (traits.starts == CaseTraits::Timing::either && coin(rng));
  s.align_endings = traits.endings == CaseTraits::Endings::aligned ||
                    (traits.endings == CaseTraits::Endings::either && coin(rng));
  assign_starts(s, far, rng);
  s.seed = rng();
  if (!s.align_endings) return s;
  // Truncating at the earliest ending may starve an emitter. Redraw the
  // emitter that ends first until every one keeps at least kMinPulses pulses.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto trains = realize_trains(s);
    const std::size_t k = truncate_at_earliest_end(trains);
    const bool starved = std::any_of(trains.begin(), trains.end(), [](const PulseSequence& t) {
      return t.size() < static_cast<std::size_t>(kMinPulses);
    });
    if (!starved) return s;
    const double start = s.emitters[k].start_time;
    s.emitters[k] = sample_emitter(traits, rng);
    s.emitters[k].start_time = start;
    s.seed = rng();
  }
  throw Error("could not sample a scenario with aligned endings");
}

}  // namespace pulseflow::sim
