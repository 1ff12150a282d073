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
#include "pulseflow/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "pulseflow/classical.hpp"
#include "pulseflow/dataset.hpp"
#include "pulseflow/flow.hpp"
#include "pulseflow/parallel.hpp"
#include "pulseflow/train.hpp"

namespace pulseflow::eval {

namespace {

bool is_learned(std::string_view method) { return method == "smcf" || method == "baseline"; }

std::optional<classical::Method> classical_method(std::string_view method) {
  if (method == "cdif") return classical::Method::cdif;
  if (method == "sdif") return classical::Method::sdif;
  if (method == "prit") return classical::Method::prit;
  return std::nullopt;
}

void check_method(const std::string& m) {
  if (m != "oracle" && !is_learned(m) && !classical_method(m)) throw Error("unknown method '" + m + "'");
}

}  // namespace

std::string_view to_string(Decode d) { return d == Decode::greedy ? "greedy" : "lp"; }

Decode decode_from_string(std::string_view s) {
  if (s == "greedy") return Decode::greedy;
  if (s == "lp") return Decode::lp;
  throw Error("unknown decode '" + std::string(s) + "'");
}

std::vector<Index> window_starts(std::size_t n, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0 || stride > window) throw Error("require 1 <= stride <= window");
  std::vector<Index> starts{0};
  if (n <= window) return starts;
  for (Index s = stride; s + window < n; s += stride) starts.push_back(s);
  if (starts.back() + window < n) starts.push_back(n - window);
  return starts;
}

std::vector<Index> argmax_links(const AssignmentMatrix& p) {
  std::vector<Index> out(p.size(), p.size());
  for (Index i = 0; i < p.size(); ++i) {
    const auto r = p.row(i);
    out[i] = static_cast<Index>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

WindowedResult infer_windowed_detailed(const LearnedModel& m, const PulseSequence& seq, std::size_t window,
                                       std::size_t stride, Decode decode) {
  if (seq.empty()) throw Error("empty input");
  if (window > m.config.seq_len) throw Error("window larger than model capacity");
  const std::size_t n = seq.size();
  const auto starts = window_starts(n, window, stride);
  std::vector<Index> links(n, n), raw(n, n);
  std::vector<char> claimed(n, 0);  // columns claimed by rows already final
  Index final_upto = 0;             // rows below this index are final
  for (std::size_t w = 0; w < starts.size(); ++w) {
    const Index s = starts[w];
    const std::size_t len = std::min(window, n - s);
    // Rows before this window's start can no longer change.
    for (; final_upto < s; ++final_upto) {
      if (links[final_upto] != n) claimed[links[final_upto]] = 1;
    }
    const auto p = model::predict(seq.slice(s, len), m.params, m.config);
    std::vector<char> blocked(claimed.begin() + static_cast<std::ptrdiff_t>(s),
                              claimed.begin() + static_cast<std::ptrdiff_t>(s + len));
    const bool any_blocked = std::find(blocked.begin(), blocked.end(), 1) != blocked.end();
    if (!any_blocked) blocked.clear();
    const auto hard = decode == Decode::lp ? flow::lp_decode(p, m.config.lookahead, blocked)
                                           : flow::greedy_decode(p, blocked);
    const auto local = hard.links();
    const auto local_raw = argmax_links(p);
    for (Index i = 0; i < len; ++i) {
      links[s + i] = local[i] == len ? n : s + local[i];
      raw[s + i] = local_raw[i] == len ? n : s + local_raw[i];
    }
  }
  return {AssignmentMatrix::from_links(links), std::move(raw)};
}

AssignmentMatrix infer_windowed(const LearnedModel& model, const PulseSequence& seq, std::size_t window,
                                std::size_t stride, Decode decode) {
  return infer_windowed_detailed(model, seq, window, stride, decode).links;
}

double acc_link(std::span<const Index> pred, std::span<const Index> truth) {
  if (pred.size() != truth.size()) throw Error("acc_link: shape mismatch");
  if (pred.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double acc_link(const AssignmentMatrix& pred, const AssignmentMatrix& truth) {
  return acc_link(pred.links(), truth.links());
}

std::size_t radar_count(const ClusterSet& clusters) {
  return static_cast<std::size_t>(std::count_if(clusters.chains().begin(), clusters.chains().end(),
                                                [](const auto& c) { return c.size() >= kRadarMinPulses; }));
}

double acc_nor(const ClusterSet& pred, const ClusterSet& truth) {
  return radar_count(pred) == radar_count(truth) ? 1.0 : 0.0;
}

double v_one_to_many(std::span<const Index> links) {
  const std::size_t n = links.size();
  std::vector<std::size_t> claims(n, 0);
  for (Index j : links) {
    if (j < n) ++claims[j];
  }
  double v = 0.0;
  for (std::size_t c : claims) v += c > 1 ? static_cast<double>(c - 1) : 0.0;
  return v;
}

double v_one_to_many(const AssignmentMatrix& a) {
  if (a.kind() == AssignmentKind::soft) return v_one_to_many(argmax_links(a));
  return v_one_to_many(a.links());
}

std::optional<Metrics> EvalReport::find(std::string_view case_name, std::string_view method,
                                        std::string_view decode) const {
  for (const auto& r : rows) {
    if (r.case_name == case_name && r.method == method && r.decode == decode) return r.metrics;
  }
  return std::nullopt;
}

std::string report_csv_header() { return "dataset,case,method,decode,acc_link,acc_nor,v_1m,n_records"; }

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << report_csv_header() << '\n';
  char buf[128];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%zu", r.metrics.acc_link, r.metrics.acc_nor, r.metrics.v_1m,
                  r.metrics.n_records);
    out << r.dataset << ',' << r.case_name << ',' << r.method << ',' << r.decode << ',' << buf << '\n';
  }
  return out.str();
}

Metrics evaluate_sequence(const PulseSequence& seq, const std::string& method, std::optional<Decode> decode,
                          const LearnedModel* model, std::size_t window, std::size_t stride) {
  check_method(method);
  const auto truth = labels_to_links(seq.labels());
  const auto truth_clusters = links_to_clusters(truth);
  std::vector<Index> pred;
  double v = 0.0;
  if (method == "oracle") {
    pred = truth;
  } else if (const auto cm = classical_method(method)) {
    pred = clusters_to_links(classical::deinterleave(*cm, seq));
  } else {
    if (!model) throw Error("missing checkpoint for learned method '" + method + "'");
    if (!decode) throw Error("learned methods need a decode");
    const auto res = infer_windowed_detailed(*model, seq, window, stride, *decode);
    pred = res.links.links();
    // One-to-many claims are read from the unrepaired preferences for greedy;
    // the LP decode is exact and cannot produce them.
    v = *decode == Decode::greedy ? v_one_to_many(res.argmax_links) : v_one_to_many(pred);
  }
  Metrics m;
  m.acc_link = acc_link(pred, truth);
  m.acc_nor = acc_nor(links_to_clusters(pred), truth_clusters);
  m.v_1m = v;
  m.n_records = 1;
  return m;
}

EvalReport evaluate(const std::filesystem::path& dataset_path, const EvalOptions& options) {
  for (const auto& m : options.methods) check_method(m);
  const auto ds = sim::read_dataset(dataset_path);
  std::map<std::string, LearnedModel> models;
  for (const auto& m : options.methods) {
    if (!is_learned(m)) continue;
    const auto it = options.checkpoints.find(m);
    if (it == options.checkpoints.end()) throw Error("missing checkpoint for learned method '" + m + "'");
    auto ck = train::load_checkpoint(it->second);
    models[m] = {ck.config, std::move(ck.params)};
  }
  struct Config {
    std::string method;
    std::optional<Decode> decode;
  };
  std::vector<Config> configs;
  for (const auto& m : options.methods) {
    if (is_learned(m)) {
      for (Decode d : options.decodes) configs.push_back({m, d});
    } else {
      configs.push_back({m, std::nullopt});
    }
  }
  std::set<int> cases;
  for (const auto& r : ds.records) cases.insert(r.case_id);

  EvalReport report;
  for (const auto& cfg : configs) {
    const LearnedModel* model = is_learned(cfg.method) ? &models.at(cfg.method) : nullptr;
    const std::size_t window = options.window.value_or(model ? model->config.seq_len : 64);
    const std::size_t stride = options.stride.value_or(std::max<std::size_t>(1, window / 2));
    std::vector<Metrics> per(ds.records.size());
    parallel_for(ds.records.size(), options.threads, [&](std::size_t k) {
      per[k] = evaluate_sequence(ds.records[k].seq, cfg.method, cfg.decode, model, window, stride);
    });
    auto aggregate = [&](std::optional<int> case_id) {
      Metrics sum;
      for (std::size_t k = 0; k < per.size(); ++k) {
        if (case_id && ds.records[k].case_id != *case_id) continue;
        sum.acc_link += per[k].acc_link;
        sum.acc_nor += per[k].acc_nor;
        sum.v_1m += per[k].v_1m;
        ++sum.n_records;
      }
      if (sum.n_records > 0) {
        const double inv = 1.0 / static_cast<double>(sum.n_records);
        sum.acc_link *= inv;
        sum.acc_nor *= inv;
        sum.v_1m *= inv;
      }
      return sum;
    };
    const std::string decode = cfg.decode ? std::string(to_string(*cfg.decode)) : "none";
    for (int c : cases) {
      report.rows.push_back({options.dataset_name, std::to_string(c), cfg.method, decode, aggregate(c)});
    }
    report.rows.push_back({options.dataset_name, "all", cfg.method, decode, aggregate(std::nullopt)});
  }
  return report;
}

}  // namespace pulseflow::eval
