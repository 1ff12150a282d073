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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
//
//   acceptance [--work-dir DIR] [--only NAME[,NAME...]] [--list]
//
// The training criteria generate their datasets and checkpoints under the
// work directory (default ./acceptance_work).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pulseflow/classical.hpp"
#include "pulseflow/core.hpp"
#include "pulseflow/dataset.hpp"
#include "pulseflow/eval.hpp"
#include "pulseflow/flow.hpp"
#include "pulseflow/loss.hpp"
#include "pulseflow/model.hpp"
#include "pulseflow/parallel.hpp"
#include "pulseflow/simulator.hpp"
#include "pulseflow/train.hpp"
#include "gradcheck.hpp"

namespace fs = std::filesystem;
using namespace pulseflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Flow solver

Outcome flow_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20260101);
  // Dyadic costs keep every path sum exact in binary floating point.
  std::uniform_int_distribution<int> cost(0, 256);
  std::size_t mismatches = 0, non_binary = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 8);
    std::vector<double> v(n * (n + 1), 0.0);
    for (auto& x : v) x = cost(rng) / 64.0;
    const flow::CostMatrix c(n, v, n);
    const auto sol = flow::solve_min_cost_flow(c);

    double best = std::numeric_limits<double>::infinity();
    flow::for_each_assignment(n, n, [&](std::span<const Index> links) {
      best = std::min(best, flow::assignment_cost(c, links));
    });
    const auto links = sol.assignment.links();
    if (sol.total_cost != best || flow::assignment_cost(c, links) != best) ++mismatches;
    for (double x : sol.assignment.values()) non_binary += x != 0.0 && x != 1.0;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && non_binary == 0 && secs < 10.0,
          fmt("200 matrices, %zu cost mismatches, %zu non-binary entries, %.2fs (limit 10s)", mismatches,
              non_binary, secs)};
}

// Label partition computed straight from the labels, independent of links.
std::vector<std::vector<Index>> label_partition(const std::vector<Label>& labels) {
  std::map<Label, std::vector<Index>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  std::vector<std::vector<Index>> out;
  for (auto& [_, chain] : by_label) out.push_back(std::move(chain));
  std::sort(out.begin(), out.end());
  return out;
}

Outcome ground_truth_recovery() {
  std::mt19937_64 rng(77);
  std::size_t failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int case_id = 1 + trial % 5;
    const auto full = sim::realize(sim::sample_scenario(case_id, rng));
    const std::size_t n = std::min<std::size_t>(full.size(), 1 + rng() % 64);
    const auto seq = full.slice(0, n);
    const auto y = labels_to_assignment(seq);
    const auto decoded = flow::lp_decode(y, n);
    auto chains = assignment_to_clusters(decoded).chains();
    std::sort(chains.begin(), chains.end());
    if (decoded != y || chains != label_partition(seq.labels())) ++failures;
  }
  return {failures == 0, fmt("100 scenarios, %zu failures", failures)};
}

// ---------------------------------------------------------------------------
// Model and loss

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto r = model::testing::gradient_check(model::testing::tiny_config(), model::Lambdas{}, seed, 6, 1e-5);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = r.worst;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("3 seeds, max relative error %.3e (limit 1e-4) %s, %.2fs (limit 60s)", worst, where.c_str(), secs)};
}

Outcome loss_analytics() {
  double err = 0.0;
  const model::Lambdas lambdas{};
  std::mt19937_64 rng(5);
  // Zero total on p = y.
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<Label> labels(n);
    for (auto& l : labels) l = static_cast<Label>(rng() % 4);
    const auto y = AssignmentMatrix::from_links(labels_to_links(labels));
    err = std::max(err, std::abs(model::flow_loss(y, y, lambdas).total));
  }
  for (std::size_t n = 2; n <= 8; ++n) {
    // Row 0 uniform over its first m allowed columns; every other row is one-hot.
    for (std::size_t m = 1; m <= n; ++m) {
      std::vector<double> v(n * (n + 1), 0.0);
      std::vector<Index> truth(n, n);
      for (std::size_t j = 1; j <= m; ++j) v[j] = 1.0 / static_cast<double>(m);
      for (std::size_t i = 1; i < n; ++i) v[i * (n + 1) + n] = 1.0;
      truth[0] = 1;
      const AssignmentMatrix p(n, v, AssignmentKind::soft);
      const auto l = model::flow_loss(p, AssignmentMatrix::from_links(truth), lambdas);
      const double expected = (1.0 - 1.0 / std::sqrt(static_cast<double>(m))) / static_cast<double>(n);
      err = std::max(err, std::abs(l.l4 - expected));
    }
    if (n < 3) continue;
    // Rows 0 and 1 both claim the last sample.
    std::vector<double> v(n * (n + 1), 0.0);
    v[n - 1] = 1.0;
    v[(n + 1) + n - 1] = 1.0;
    for (std::size_t i = 2; i < n; ++i) v[i * (n + 1) + n] = 1.0;
    const AssignmentMatrix p(n, v, AssignmentKind::soft);
    std::vector<Index> truth(n, n);
    truth[1] = n - 1;
    const auto l = model::flow_loss(p, AssignmentMatrix::from_links(truth), lambdas);
    err = std::max(err, std::abs(l.l2 - 1.0 / static_cast<double>(n)));
  }
  return {err <= 1e-12, fmt("max deviation from closed forms %.3e (limit 1e-12)", err)};
}

// ---------------------------------------------------------------------------
// Classical baselines

sim::Scenario two_constant_emitters(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pri(sim::kMinPri, sim::kMaxPri);
  std::uniform_int_distribution<int> count(20, sim::kMaxPulses);
  double a = 0.0, b = 0.0;
  do {
    a = pri(rng);
    b = pri(rng);
  } while (std::max(a, b) < 1.25 * std::min(a, b));
  sim::Scenario s;
  for (double p : {a, b}) {
    sim::EmitterSpec e;
    e.pattern.type = sim::PriType::constant;
    e.pattern.base_pris = {p};
    e.start_time = std::uniform_real_distribution<double>(0.0, p)(rng);
    e.pulse_count = count(rng);
    s.emitters.push_back(e);
  }
  s.seed = rng();
  return s;
}

Outcome classical_sanity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::vector<PulseSequence> seqs;
  for (int i = 0; i < 50; ++i) seqs.push_back(sim::realize(two_constant_emitters(rng)));

  bool pass = true;
  std::string detail;
  for (auto m : {classical::Method::cdif, classical::Method::sdif}) {
    double acc = 0.0;
    int counts_ok = 0;
    for (const auto& seq : seqs) {
      const auto pred = classical::deinterleave(m, seq);
      const auto truth_links = labels_to_links(seq.labels());
      acc += eval::acc_link(clusters_to_links(pred), truth_links);
      counts_ok += eval::radar_count(pred) == eval::radar_count(links_to_clusters(truth_links));
    }
    acc /= static_cast<double>(seqs.size());
    const double count_rate = counts_ok / static_cast<double>(seqs.size());
    pass = pass && acc >= 0.95 && count_rate >= 0.95;
    detail += fmt("%s acc_link %.4f (>= 0.95) radar count %.2f (>= 0.95); ", std::string(to_string(m)).c_str(), acc,
                  count_rate);
  }
  const double secs = seconds_since(t0);
  return {pass && secs < 30.0, detail + fmt("%.2fs (limit 30s)", secs)};
}

Outcome prit_subharmonic() {
  std::vector<double> t;
  for (int i = 0; i < 50; ++i) t.push_back(500.0 * i);
  const auto bins = classical::Binning::geometric(1.01, 1100.0);
  const auto s = classical::pri_spectrum(t, bins);
  const double at_pri = s.magnitude[*bins.bin_of(500.0)];
  const double at_double = s.magnitude[*bins.bin_of(1000.0)];
  const double ratio = at_double / at_pri;
  return {ratio < 0.10, fmt("|D(2 PRI)| / |D(PRI)| = %.4f (limit 0.10)", ratio)};
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct Artifacts {
  fs::path dir;
  fs::path train_data, holdout_data, validation_data;
  fs::path smcf, baseline;
  double smcf_seconds = 0.0;
  std::optional<eval::EvalReport> report;
};

constexpr std::size_t kTrainRecords = 20000;
constexpr std::size_t kHoldoutRecords = 500;
constexpr std::size_t kSelectionRecords = 100;
constexpr std::uint64_t kTrainSeed = 1;

void ensure_datasets(Artifacts& a) {
  const auto mix = sim::parse_case_mix("1:1");
  const unsigned threads = default_threads();
  auto make = [&](const fs::path& p, std::size_t count, std::uint64_t seed) {
    if (!fs::exists(p)) sim::generate_dataset(mix, count, seed, p, threads);
  };
  make(a.train_data, kTrainRecords, 101);
  make(a.holdout_data, kHoldoutRecords, 202);
  make(a.validation_data, kSelectionRecords, 303);
}

double train_desk(const Artifacts& a, bool baseline, const fs::path& out) {
  auto tc = train::TrainConfig::desk();
  tc.seed = kTrainSeed;
  tc.baseline = baseline;
  tc.threads = default_threads();
  const auto t0 = Clock::now();
  train::train(model::ModelConfig::desk(), tc, a.train_data, out, a.validation_data);
  return seconds_since(t0);
}

Artifacts& artifacts(const fs::path& dir) {
  static std::optional<Artifacts> a;
  if (a) {
    if (!a->report) throw Error("training artifacts unavailable");
    return *a;
  }
  a.emplace();
  a->dir = dir;
  a->train_data = dir / "case1_train.jsonl";
  a->holdout_data = dir / "case1_holdout.jsonl";
  a->validation_data = dir / "case1_selection.jsonl";
  a->smcf = dir / "smcf.ckpt";
  a->baseline = dir / "baseline.ckpt";
  fs::create_directories(dir);
  ensure_datasets(*a);
  std::cout << "# training desk preset (smcf) on " << kTrainRecords << " Case-1 records" << std::endl;
  a->smcf_seconds = train_desk(*a, false, a->smcf);
  std::cout << "# training desk preset (baseline, same seed and budget)" << std::endl;
  train_desk(*a, true, a->baseline);

  eval::EvalOptions opt;
  opt.methods = {"smcf", "baseline"};
  opt.decodes = {eval::Decode::greedy, eval::Decode::lp};
  opt.checkpoints = {{"smcf", a->smcf}, {"baseline", a->baseline}};
  opt.threads = default_threads();
  opt.dataset_name = "case1_holdout";
  a->report = eval::evaluate(a->holdout_data, opt);
  std::ofstream(dir / "holdout_report.csv") << eval::report_to_csv(*a->report);
  return *a;
}

Outcome desk_training(const fs::path& dir) {
  auto& a = artifacts(dir);
  const auto m = a.report->find("all", "smcf", "lp").value();
  const double hours = a.smcf_seconds / 3600.0;
  return {m.acc_link >= 0.85 && m.acc_nor >= 0.80 && hours <= 4.0,
          fmt("%zu held-out records: acc_link %.4f (>= 0.85) acc_nor %.4f (>= 0.80), training %.2fh (limit 4h)",
              m.n_records, m.acc_link, m.acc_nor, hours)};
}

Outcome penalty_ablation(const fs::path& dir) {
  auto& a = artifacts(dir);
  const auto sg = a.report->find("all", "smcf", "greedy").value();
  const auto bg = a.report->find("all", "baseline", "greedy").value();
  const auto sl = a.report->find("all", "smcf", "lp").value();
  const auto bl = a.report->find("all", "baseline", "lp").value();
  return {bg.v_1m >= sg.v_1m && sl.acc_link >= bl.acc_link,
          fmt("V_1m argmax baseline %.4f >= smcf %.4f; acc_link (lp) smcf %.4f >= baseline %.4f", bg.v_1m, sg.v_1m,
              sl.acc_link, bl.acc_link)};
}

Outcome lp_feasibility(const fs::path& dir) {
  auto& a = artifacts(dir);
  const auto ds = sim::read_dataset(a.holdout_data);
  std::size_t violating = 0, checked = 0;
  for (const auto& [name, path] : {std::pair{"smcf", a.smcf}, std::pair{"baseline", a.baseline}}) {
    const auto ck = train::load_checkpoint(path);
    const eval::LearnedModel model{ck.config, ck.params};
    const std::size_t window = ck.config.seq_len;
    std::vector<double> v(ds.records.size(), 0.0);
    parallel_for(ds.records.size(), default_threads(), [&](std::size_t r) {
      v[r] = eval::evaluate_sequence(ds.records[r].seq, name, eval::Decode::lp, &model, window, window / 2).v_1m;
    });
    for (double x : v) violating += x != 0.0;
    checked += v.size();
  }
  return {violating == 0, fmt("%zu LP-decoded records (smcf, baseline), %zu with V_1m > 0", checked, violating)};
}

// ---------------------------------------------------------------------------
// Determinism through the command-line tool

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) {
  const std::string full = cmd + " >/dev/null 2>&1";
  return std::system(full.c_str());
}

Outcome determinism(const fs::path& dir) {
  const fs::path d = dir / "determinism";
  fs::create_directories(d);
  const std::string cli = PULSEFLOW_CLI;
  std::vector<std::string> diffs;
  bool ok = true;
  for (int rep = 0; rep < 2; ++rep) {
    const auto r = std::to_string(rep);
    const auto p = [&](const std::string& f) { return (d / (f + r)).string(); };
    ok &= run(cli + " gen --case-mix 1:1,3:1 --count 40 --seed 9 --threads " + (rep ? "3" : "1") + " --out " +
              p("data")) == 0;
    ok &= run(cli + " train --model-preset desk --data " + p("data") + " --out " + p("model") +
              " --seed 4 --threads 1 --steps 20 --batch-size 8 --eval-every 10 --validation " + p("data")) == 0;
    ok &= run(cli + " eval --data " + p("data") + " --methods cdif,smcf --checkpoint " + p("model") + " --out " +
              p("report") + " --name det --threads " + (rep ? "3" : "1")) == 0;
  }
  for (const std::string f : {"data", "model", "model.csv", "report"}) {
    const auto base = f == "model.csv" ? std::string("model") : f;
    const auto suffix = f == "model.csv" ? std::string(".csv") : std::string();
    const auto a = slurp(d / (base + "0" + suffix)), b = slurp(d / (base + "1" + suffix));
    if (a.empty() || a != b) diffs.push_back(f);
  }
  std::string which;
  for (const auto& x : diffs) which += " " + x;
  return {ok && diffs.empty(),
          ok ? (diffs.empty() ? "gen, train --threads 1, eval outputs byte-identical across two runs"
                              : "differing outputs:" + which)
             : "a command failed"};
}

struct Criterion {
  std::string name;
  std::function<Outcome(const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::vector<std::string> only;
  bool list = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      for (std::string x; std::getline(s, x, ',');) only.push_back(x);
    } else if (arg == "--list") {
      list = true;
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--only NAME,...] [--list]\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {"flow_exactness", [](const fs::path&) { return flow_exactness(); }},
      {"ground_truth_recovery", [](const fs::path&) { return ground_truth_recovery(); }},
      {"gradient_correctness", [](const fs::path&) { return gradient_correctness(); }},
      {"loss_analytics", [](const fs::path&) { return loss_analytics(); }},
      {"classical_sanity", [](const fs::path&) { return classical_sanity(); }},
      {"prit_subharmonic", [](const fs::path&) { return prit_subharmonic(); }},
      {"determinism", determinism},
      {"desk_training", desk_training},
      {"penalty_ablation", penalty_ablation},
      {"lp_feasibility", lp_feasibility},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (list) {
      std::cout << c.name << "\n";
      continue;
    }
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
