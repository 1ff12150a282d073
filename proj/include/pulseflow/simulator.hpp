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

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "pulseflow/core.hpp"

namespace pulseflow::sim {

using Rng = std::mt19937_64;

enum class PriType { constant, jitter, constant_stagger, random_stagger, switch_dwell };

/// Largest admissible per-pulse fractional PRI deviation for each type.
double max_deviation(PriType type);
std::string_view to_string(PriType type);
PriType pri_type_from_string(std::string_view name);

inline constexpr double kMinPri = 1.0;
inline constexpr double kMaxPri = 1000.0;
inline constexpr int kMinLevels = 2;
inline constexpr int kMaxLevels = 9;
inline constexpr int kMinDwell = 4;
inline constexpr int kMaxDwell = 10;
inline constexpr int kMinPulses = 5;
inline constexpr int kMaxPulses = 100;
inline constexpr int kMinEmitters = 1;
inline constexpr int kMaxEmitters = 10;
inline constexpr double kMaxMissingProb = 0.20;
inline constexpr int kMaxConsecutiveMissing = 10;

struct PriPattern {
  PriType type = PriType::constant;
  std::vector<double> base_pris;
  double deviation_frac = 0.0;
  std::vector<int> dwells;  // switch & dwell only, one per base PRI

  /// Throws Error when a range or shape constraint is violated.
  void validate() const;
};

struct EmitterSpec {
  PriPattern pattern;
  double start_time = 0.0;
  int pulse_count = kMinPulses;
  double missing_prob = 0.0;
  int max_consecutive_missing = 1;

  void validate() const;
};

struct Scenario {
  int case_id = 1;
  std::vector<EmitterSpec> emitters;
  bool align_endings = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// `count` successive PRI values (us) drawn from the pattern.
std::vector<double> generate_pri_sequence(const PriPattern& pattern, int count, Rng& rng);

/// Removes pulses in runs. Each surviving candidate seeds a run with probability
/// `missing_prob`; run lengths are uniform in [1, max_consecutive] and no more than
/// `max_consecutive` pulses are ever removed back to back. The first pulse is kept.
std::vector<double> apply_missing(std::span<const double> toas, double missing_prob,
                                  int max_consecutive, Rng& rng);

/// Single-emitter train, every pulse labelled `label`.
PulseSequence generate_pulse_train(const EmitterSpec& spec, Label label, Rng& rng);

/// Merge by (toa, label, intra-train index). Labels must be distinct across trains.
PulseSequence interleave(std::span<const PulseSequence> trains);

/// Draw scenario parameters for one of the five dataset cases.
Scenario sample_scenario(int case_id, Rng& rng);

/// Deterministic realisation of a scenario from its own seed.
PulseSequence realize(const Scenario& scenario);

}  // namespace pulseflow::sim
