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
#include "pulseflow/dataset.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pulseflow/parallel.hpp"
#include "pulseflow/simulator.hpp"

namespace pulseflow::sim {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "pulseflow-dataset";

json header_to_json(const DatasetHeader& h) {
  json mix = json::array();
  for (const auto& cw : h.case_mix) mix.push_back({cw.case_id, cw.weight});
  return {{"format", kFormat}, {"version", h.version}, {"count", h.count},
          {"seed", h.seed}, {"case_mix", mix}};
}

DatasetHeader header_from_json(const json& j) {
  if (j.value("format", "") != kFormat) throw Error("not a pulseflow dataset");
  DatasetHeader h;
  h.version = j.at("version").get<int>();
  if (h.version != kDatasetVersion) throw Error("unsupported dataset version");
  h.count = j.at("count").get<std::size_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& cw : j.at("case_mix")) h.case_mix.push_back({cw.at(0).get<int>(), cw.at(1).get<double>()});
  return h;
}

void check_mix(const std::vector<CaseWeight>& mix) {
  if (mix.empty()) throw Error("case mix is empty");
  for (const auto& cw : mix) {
    if (cw.case_id < 1 || cw.case_id > 5) throw Error("invalid case id in mix");
    if (!(cw.weight > 0.0)) throw Error("case weights must be positive");
  }
}

}  // namespace

std::vector<CaseWeight> parse_case_mix(const std::string& text) {
  std::vector<CaseWeight> mix;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    CaseWeight cw;
    try {
      const auto colon = item.find(':');
      cw.case_id = std::stoi(item.substr(0, colon));
      if (colon != std::string::npos) cw.weight = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("malformed case mix entry '" + item + "'");
    }
    mix.push_back(cw);
  }
  check_mix(mix);
  return mix;
}

std::uint64_t record_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Record generate_record(const std::vector<CaseWeight>& case_mix, std::uint64_t seed, std::size_t index) {
  check_mix(case_mix);
  Record r;
  r.seed = record_seed(seed, index);
  Rng rng(r.seed);
  std::vector<double> w;
  for (const auto& cw : case_mix) w.push_back(cw.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  r.case_id = case_mix[pick(rng)].case_id;
  r.seq = realize(sample_scenario(r.case_id, rng));
  return r;
}

std::string record_to_json_line(const Record& record) {
  const json j = {{"toas", record.seq.toas()}, {"labels", record.seq.labels()},
                  {"case", record.case_id}, {"seed", record.seed}};
  return j.dump();
}

DatasetHeader generate_dataset(const std::vector<CaseWeight>& case_mix, std::size_t count,
                               std::uint64_t seed, const std::filesystem::path& path, unsigned threads) {
  check_mix(case_mix);
  DatasetHeader header{kDatasetVersion, count, seed, case_mix};
  std::vector<std::string> lines(count);
  parallel_for(count, threads, [&](std::size_t i) {
    lines[i] = record_to_json_line(generate_record(case_mix, seed, i));
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset '" + path.string() + "'");
  out << header_to_json(header).dump() << '\n';
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw Error("failed writing dataset '" + path.string() + "'");
  return header;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset '" + path.string() + "'");
  DatasetHeader h = dataset.header;
  h.count = dataset.records.size();
  out << header_to_json(h).dump() << '\n';
  for (const auto& r : dataset.records) out << record_to_json_line(r) << '\n';
  if (!out) throw Error("failed writing dataset '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read dataset '" + path.string() + "'");
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset '" + path.string() + "' has no header");
  try {
    ds.header = header_from_json(json::parse(line));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Record r;
      r.seq = PulseSequence(j.at("toas").get<std::vector<double>>(), j.at("labels").get<std::vector<Label>>());
      r.case_id = j.at("case").get<int>();
      r.seed = j.at("seed").get<std::uint64_t>();
      ds.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error("malformed dataset '" + path.string() + "': " + e.what());
  }
  if (ds.records.size() != ds.header.count) throw Error("dataset record count does not match header");
  return ds;
}

}  // namespace pulseflow::sim
