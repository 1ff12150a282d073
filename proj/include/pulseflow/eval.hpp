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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulseflow/core.hpp"
#include "pulseflow/model.hpp"

namespace pulseflow::eval {

enum class Decode { greedy, lp };

std::string_view to_string(Decode d);
Decode decode_from_string(std::string_view s);

/// A loaded model: configuration plus parameters.
struct LearnedModel {
  model::ModelConfig config;
  model::ModelParameters params;
};

struct WindowedResult {
  AssignmentMatrix links;           // stitched hard assignment
  std::vector<Index> argmax_links;  // stitched per-row argmax of the soft matrices, unrepaired
};

/// Window start offsets: every `stride`, with the last window right-aligned.
std::vector<Index> window_starts(std::size_t n, std::size_t window, std::size_t stride);

/// Slides windows over the sequence, decodes each one and stitches the links.
/// A sample covered by several windows keeps the link from the latest window.
/// Rows that no later window covers are final, and the columns they claim are
/// closed to later windows so the stitched result stays feasible.
WindowedResult infer_windowed_detailed(const LearnedModel& model, const PulseSequence& seq, std::size_t window,
                                       std::size_t stride, Decode decode);

AssignmentMatrix infer_windowed(const LearnedModel& model, const PulseSequence& seq, std::size_t window,
                                std::size_t stride, Decode decode);

/// Fraction of rows whose successor (terminal included) matches the truth.
double acc_link(std::span<const Index> pred, std::span<const Index> truth);
double acc_link(const AssignmentMatrix& pred, const AssignmentMatrix& truth);

/// Clusters with more than this many pulses count as a radar.
inline constexpr std::size_t kRadarMinPulses = 4;

std::size_t radar_count(const ClusterSet& clusters);

/// 1 when both partitions contain the same number of radars, else 0.
double acc_nor(const ClusterSet& pred, const ClusterSet& truth);

/// Number of surplus claims on non-terminal columns: sum_j max(0, claims_j - 1).
double v_one_to_many(std::span<const Index> links);
double v_one_to_many(const AssignmentMatrix& a);

/// Row-wise argmax of a soft matrix (first maximum wins).
std::vector<Index> argmax_links(const AssignmentMatrix& p);

struct Metrics {
  double acc_link = 0.0;
  double acc_nor = 0.0;
  double v_1m = 0.0;
  std::size_t n_records = 0;
};

struct ReportRow {
  std::string dataset;
  std::string case_name;  // "1".."5" or "all"
  std::string method;
  std::string decode;     // "greedy", "lp", or "none"
  Metrics metrics;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  [[nodiscard]] std::optional<Metrics> find(std::string_view case_name, std::string_view method,
                                            std::string_view decode) const;
};

std::string report_csv_header();
std::string report_to_csv(const EvalReport& report);

struct EvalOptions {
  std::vector<std::string> methods{"cdif", "sdif", "prit", "smcf", "baseline"};
  std::vector<Decode> decodes{Decode::greedy, Decode::lp};
  std::map<std::string, std::filesystem::path> checkpoints;  // learned method -> checkpoint
  std::optional<std::size_t> window;  // defaults to the model's seq_len
  std::optional<std::size_t> stride;  // defaults to window / 2
  unsigned threads = 1;
  std::string dataset_name = "dataset";
};

/// Metrics of one method on one labelled sequence.
Metrics evaluate_sequence(const PulseSequence& seq, const std::string& method, std::optional<Decode> decode,
                          const LearnedModel* model, std::size_t window, std::size_t stride);

/// Per-record metrics aggregated per (case, method, decode), plus an "all" row per
/// (method, decode). Rows are ordered by method, decode, then case.
EvalReport evaluate(const std::filesystem::path& dataset_path, const EvalOptions& options);

}  // namespace pulseflow::eval
