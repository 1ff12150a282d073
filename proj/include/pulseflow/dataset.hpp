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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pulseflow/core.hpp"

namespace pulseflow::sim {

inline constexpr int kDatasetVersion = 1;

struct CaseWeight {
  int case_id = 1;
  double weight = 1.0;
};

/// Parses "1:1,2:1,3:2" into case weights; a bare id means weight 1.
std::vector<CaseWeight> parse_case_mix(const std::string& text);

struct DatasetHeader {
  int version = kDatasetVersion;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::vector<CaseWeight> case_mix;
};

struct Record {
  PulseSequence seq;
  int case_id = 1;
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Record> records;
};

/// Seed of the RNG stream owned by record `index` of a dataset seeded with `seed`.
std::uint64_t record_seed(std::uint64_t seed, std::size_t index);

/// One labelled record, drawn from the mix with its own RNG stream.
Record generate_record(const std::vector<CaseWeight>& case_mix, std::uint64_t seed, std::size_t index);

/// Writes a JSON-lines dataset: a header object, then one record per line.
/// Output is identical for any thread count.
DatasetHeader generate_dataset(const std::vector<CaseWeight>& case_mix, std::size_t count,
                               std::uint64_t seed, const std::filesystem::path& path,
                               unsigned threads = 1);

Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

std::string record_to_json_line(const Record& record);

}  // namespace pulseflow::sim
