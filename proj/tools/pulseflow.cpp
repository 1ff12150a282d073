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
#include <chrono>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pulseflow/classical.hpp"
#include "pulseflow/dataset.hpp"
#include "pulseflow/eval.hpp"
#include "pulseflow/plot.hpp"
#include "pulseflow/simulator.hpp"
#include "pulseflow/train.hpp"

namespace fs = std::filesystem;
using namespace pulseflow;

namespace {

unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string env_name(const std::string& sub, const std::string& flag) {
  std::string out = "PULSEFLOW_" + sub + "_" + flag;
  for (auto& c : out) c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Registers an option with its environment variable and a captured default.
template <typename T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  return app->add_option("--" + name, value, help)->envname(env_name(app->get_name(), name))->capture_default_str();
}

CLI::Option* toggle(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
  return app->add_flag("--" + name, value, help)->envname(env_name(app->get_name(), name));
}

// Config-file reader that yields to the environment: an entry whose variable
// is set is dropped, so the precedence is file < environment < flags.
class EnvFirstConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    std::erase_if(items, [](const CLI::ConfigItem& item) {
      if (item.parents.size() != 1) return false;
      return std::getenv(env_name(item.parents[0], item.name).c_str()) != nullptr;
    });
    return items;
  }
};

void log_config(const CLI::App& sub) {
  std::cerr << "# resolved configuration [" << sub.get_name() << "]\n" << sub.config_to_str(true, false);
  std::cerr.flush();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

PulseSequence read_toa_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<double> toas;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string text = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) {
      throw Error("malformed input at line " + std::to_string(lineno) + ": '" + text + "'");
    }
    toas.push_back(v);
  }
  if (toas.empty()) throw Error("empty input");
  return PulseSequence(std::move(toas));
}

struct GenArgs {
  std::string case_mix = "1:1,2:1,3:1,4:1,5:1";
  std::size_t count = 1000;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = hardware_threads();
};

int run_gen(const GenArgs& a) {
  const auto mix = sim::parse_case_mix(a.case_mix);
  const auto header = sim::generate_dataset(mix, a.count, a.seed, a.out, a.threads);
  const auto ds = sim::read_dataset(a.out);
  std::map<int, std::size_t> per_case;
  for (const auto& r : ds.records) ++per_case[r.case_id];
  std::cout << "wrote " << header.count << " records to " << a.out << "\n";
  for (const auto& [c, n] : per_case) std::cout << "  case " << c << ": " << n << "\n";
  return 0;
}

struct TrainArgs {
  std::string model_preset = "desk";
  std::string data;
  std::string out;
  std::string validation;
  std::uint64_t seed = 0;
  bool baseline = false;
  unsigned threads = hardware_threads();
  std::optional<std::size_t> steps, batch_size, eval_every, checkpoint_every, warmup_steps;
  std::optional<bool> linear_decay, sinusoidal_tokens;
  std::optional<double> lr, lambda_column, lambda_balance, lambda_binary, dropout;
  std::optional<std::size_t> seq_len, d_model, layers, heads, d_ff, n_quant, rel_clip, lookahead;
  std::optional<std::string> head;
  std::optional<bool> rel_values;
};

int run_train(const TrainArgs& a) {
  auto mc = model::ModelConfig::preset(a.model_preset);
  auto tc = train::TrainConfig::preset(a.model_preset);
  tc.seed = a.seed;
  tc.baseline = a.baseline;
  tc.threads = a.threads;
  if (a.steps) tc.steps = *a.steps;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.eval_every) tc.eval_every = *a.eval_every;
  if (a.checkpoint_every) tc.checkpoint_every = *a.checkpoint_every;
  if (a.warmup_steps) tc.warmup_steps = *a.warmup_steps;
  if (a.linear_decay) tc.linear_decay = *a.linear_decay;
  if (a.sinusoidal_tokens) mc.sinusoidal_tokens = *a.sinusoidal_tokens;
  if (a.lr) tc.lr = *a.lr;
  if (a.lambda_column) tc.lambdas.column = *a.lambda_column;
  if (a.lambda_balance) tc.lambdas.balance = *a.lambda_balance;
  if (a.lambda_binary) tc.lambdas.binary = *a.lambda_binary;
  if (a.dropout) mc.dropout = *a.dropout;
  if (a.seq_len) mc.seq_len = *a.seq_len;
  if (a.d_model) mc.d_model = *a.d_model;
  if (a.layers) mc.n_layers = *a.layers;
  if (a.heads) mc.n_heads = *a.heads;
  if (a.d_ff) mc.d_ff = *a.d_ff;
  if (a.n_quant) mc.n_quant = *a.n_quant;
  if (a.rel_clip) mc.rel_clip = *a.rel_clip;
  if (a.lookahead) mc.lookahead = *a.lookahead;
  if (a.head) mc.head = model::head_indexing_from_string(*a.head);
  if (a.rel_values) mc.rel_values = *a.rel_values;
  mc.validate();
  tc.validate();
  std::cerr << "# model: seq_len " << mc.seq_len << ", d_model " << mc.d_model << ", layers " << mc.n_layers
            << ", heads " << mc.n_heads << ", head " << model::to_string(mc.head) << ", dropout " << mc.dropout
            << "\n# train: steps " << tc.steps << ", batch " << tc.batch_size << ", lr " << tc.lr << ", lambdas "
            << tc.effective_lambdas().column << "/" << tc.effective_lambdas().balance << "/"
            << tc.effective_lambdas().binary << "\n";
  const auto start = std::chrono::steady_clock::now();
  const auto res = train::train(mc, tc, a.data, a.out,
                                a.validation.empty() ? std::nullopt : std::optional<fs::path>(a.validation));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& last = res.log.back().loss;
  std::cout << "trained " << res.log.size() << " steps in " << secs << " s; final ce " << last.ce << ", total "
            << last.total << "\n";
  if (res.best_validation) std::cout << "best held-out acc_link " << *res.best_validation << "\n";
  std::cout << "checkpoint " << a.out << ", metrics " << a.out << ".csv\n";
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string methods = "cdif,sdif,prit,smcf,baseline";
  std::string decode = "greedy,lp";
  std::vector<std::string> checkpoints;
  std::string out;
  std::string name;
  std::optional<std::size_t> window, stride;
  unsigned threads = hardware_threads();
};

int run_eval(const EvalArgs& a) {
  eval::EvalOptions opt;
  opt.methods = split_list(a.methods);
  opt.decodes.clear();
  for (const auto& d : split_list(a.decode)) opt.decodes.push_back(eval::decode_from_string(d));
  for (const auto& c : a.checkpoints) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) {
      opt.checkpoints["smcf"] = c;
    } else {
      opt.checkpoints[c.substr(0, eq)] = c.substr(eq + 1);
    }
  }
  opt.window = a.window;
  opt.stride = a.stride;
  opt.threads = a.threads;
  opt.dataset_name = a.name.empty() ? fs::path(a.data).stem().string() : a.name;
  const auto report = eval::evaluate(a.data, opt);
  const auto csv = eval::report_to_csv(report);
  if (!a.out.empty()) write_text(a.out, csv);
  std::printf("%-6s %-9s %-7s %9s %9s %9s %6s\n", "case", "method", "decode", "acc_link", "acc_nor", "v_1m", "n");
  for (const auto& r : report.rows) {
    std::printf("%-6s %-9s %-7s %9.4f %9.4f %9.4f %6zu\n", r.case_name.c_str(), r.method.c_str(), r.decode.c_str(),
                r.metrics.acc_link, r.metrics.acc_nor, r.metrics.v_1m, r.metrics.n_records);
  }
  return 0;
}

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string decode = "lp";
  std::string csv;
  std::optional<std::size_t> window, stride;
};

int run_infer(const InferArgs& a) {
  const auto seq = read_toa_file(a.input);
  auto ck = train::load_checkpoint(a.checkpoint);
  const eval::LearnedModel m{ck.config, std::move(ck.params)};
  const std::size_t window = a.window.value_or(m.config.seq_len);
  const std::size_t stride = a.stride.value_or(std::max<std::size_t>(1, window / 2));
  const auto links = eval::infer_windowed(m, seq, window, stride, eval::decode_from_string(a.decode));
  const auto clusters = assignment_to_clusters(links);
  std::vector<std::size_t> chain_of(seq.size(), 0);
  std::cout << clusters.num_chains() << " chains over " << seq.size() << " pulses\n";
  for (std::size_t c = 0; c < clusters.num_chains(); ++c) {
    const auto& chain = clusters.chains()[c];
    std::cout << "chain " << c << " (" << chain.size() << " pulses";
    if (chain.size() > 1) {
      const double pri = (seq.toas()[chain.back()] - seq.toas()[chain.front()]) / static_cast<double>(chain.size() - 1);
      std::cout << ", mean PRI " << pri << " us";
    }
    std::cout << "):";
    for (Index i : chain) {
      std::cout << ' ' << i;
      chain_of[i] = c;
    }
    std::cout << '\n';
  }
  if (!a.csv.empty()) {
    std::ostringstream out;
    out << "index,toa_us,chain\n";
    out.precision(17);
    for (std::size_t i = 0; i < seq.size(); ++i) out << i << ',' << seq.toas()[i] << ',' << chain_of[i] << '\n';
    write_text(a.csv, out.str());
  }
  return 0;
}

struct PlotArgs {
  std::string out_dir = "plots";
  std::vector<std::string> patterns;
  int count = 30;
  std::uint64_t seed = 0;
  std::string data;
  std::size_t record = 0;
  int max_level = 3;
};

int run_plot(const PlotArgs& a) {
  std::vector<plot::Panel> panels;
  if (a.patterns.empty()) {
    panels = plot::pri_type_panels();
  } else {
    for (std::size_t k = 0; k < a.patterns.size(); ++k) {
      panels.push_back({"pattern" + std::to_string(k), plot::parse_pattern(a.patterns[k])});
    }
  }
  for (std::size_t k = 0; k < panels.size(); ++k) {
    sim::Rng rng(a.seed + k);
    const auto pris = sim::generate_pri_sequence(panels[k].pattern, a.count, rng);
    const fs::path base = fs::path(a.out_dir) / ("pri_" + panels[k].name);
    write_text(base.string() + ".csv", plot::pri_csv(pris));
    write_text(base.string() + ".svg", plot::pri_svg(pris, panels[k].name));
    std::cout << "wrote " << base.string() << ".{csv,svg}\n";
  }
  if (!a.data.empty()) {
    const auto ds = sim::read_dataset(a.data);
    if (a.record >= ds.records.size()) throw Error("record index out of range");
    const auto& toas = ds.records[a.record].seq.toas();
    for (int c = 1; c <= a.max_level; ++c) {
      const auto h = classical::toa_diff_histogram(toas, c, classical::Binning{});
      const fs::path p = fs::path(a.out_dir) / ("histogram_record" + std::to_string(a.record) + "_level" +
                                                std::to_string(c) + ".csv");
      write_text(p, plot::histogram_csv(h));
      std::cout << "wrote " << p.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulseflow: deinterleave interleaved radar pulse trains"};
  app.set_config("--config", "", "TOML/INI file with defaults; environment and flags override it");
  app.config_formatter(std::make_shared<EnvFirstConfig>());
  app.require_subcommand(1);
  app.fallthrough();

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a labelled dataset");
  flag(g, "case-mix", gen.case_mix, "Case weights, e.g. 1:1,2:1");
  flag(g, "count", gen.count, "Number of records");
  flag(g, "seed", gen.seed, "Dataset seed");
  flag(g, "out", gen.out, "Output JSON-lines path")->required();
  flag(g, "threads", gen.threads, "Worker threads (output does not depend on it)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the soft min-cost flow model");
  flag(t, "model-preset", tr.model_preset, "Model and training preset")->check(CLI::IsMember({"desk", "paper"}));
  flag(t, "data", tr.data, "Training dataset")->required();
  flag(t, "out", tr.out, "Checkpoint path (metrics go to <out>.csv)")->required();
  flag(t, "validation", tr.validation, "Held-out dataset for best-checkpoint selection");
  flag(t, "seed", tr.seed, "Initialisation, shuffling and dropout seed");
  toggle(t, "baseline", tr.baseline, "Train with every penalty weight at zero");
  flag(t, "threads", tr.threads, "Worker threads; 1 guarantees bitwise determinism");
  flag(t, "steps", tr.steps, "Optimiser steps [preset]");
  flag(t, "batch-size", tr.batch_size, "Windows per step [preset]");
  flag(t, "lr", tr.lr, "Adam learning rate [preset]");
  flag(t, "warmup-steps", tr.warmup_steps, "Linear learning-rate warmup steps [preset]");
  flag(t, "linear-decay", tr.linear_decay, "Decay the learning rate linearly to zero after warmup [preset]");
  flag(t, "sinusoidal-tokens", tr.sinusoidal_tokens, "Initialise token embeddings from sinusoids of the value [preset]");
  flag(t, "eval-every", tr.eval_every, "Validate every N steps [0: off]");
  flag(t, "checkpoint-every", tr.checkpoint_every, "Write <out>.step<N> every N steps [0: off]");
  flag(t, "lambda-column", tr.lambda_column, "Weight of the one-to-many hinge [10]");
  flag(t, "lambda-balance", tr.lambda_balance, "Weight of the flow balance term [1]");
  flag(t, "lambda-binary", tr.lambda_binary, "Weight of the L1-L2 row gap [5]");
  flag(t, "dropout", tr.dropout, "Dropout on attention and feed-forward outputs [preset]");
  flag(t, "seq-len", tr.seq_len, "Window length [preset]");
  flag(t, "d-model", tr.d_model, "Representation width [preset]");
  flag(t, "layers", tr.layers, "Encoder layers [preset]");
  flag(t, "heads", tr.heads, "Attention heads [preset]");
  flag(t, "d-ff", tr.d_ff, "Feed-forward width [preset]");
  flag(t, "n-quant", tr.n_quant, "Quantisation levels [preset]");
  flag(t, "rel-clip", tr.rel_clip, "Relative position clipping distance [preset]");
  flag(t, "lookahead", tr.lookahead, "Maximum link distance [preset]");
  flag(t, "head", tr.head, "Representative indexing: relative or absolute [preset]")
      ->check(CLI::IsMember({"relative", "absolute"}));
  flag(t, "rel-values", tr.rel_values, "Add relative embeddings to attention values [preset]");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate methods on a labelled dataset");
  flag(e, "data", ev.data, "Dataset to evaluate")->required();
  flag(e, "methods", ev.methods, "Comma list of oracle,cdif,sdif,prit,smcf,baseline");
  flag(e, "decode", ev.decode, "Comma list of greedy,lp (learned methods only)");
  flag(e, "checkpoint", ev.checkpoints, "Checkpoint, as PATH (smcf) or METHOD=PATH; repeatable");
  flag(e, "out", ev.out, "Report CSV path");
  flag(e, "name", ev.name, "Dataset name in the report [file stem]");
  flag(e, "window", ev.window, "Inference window [model seq_len]");
  flag(e, "stride", ev.stride, "Window stride [window / 2]");
  flag(e, "threads", ev.threads, "Worker threads (report does not depend on it)");

  InferArgs in;
  auto* i = app.add_subcommand("infer", "Deinterleave one ToA sequence with a trained model");
  flag(i, "checkpoint", in.checkpoint, "Model checkpoint")->required();
  flag(i, "input", in.input, "Plain-text ToAs in microseconds, one per line")->required();
  flag(i, "decode", in.decode, "greedy or lp")->check(CLI::IsMember({"greedy", "lp"}));
  flag(i, "csv", in.csv, "Optional CSV output (index,toa_us,chain)");
  flag(i, "window", in.window, "Inference window [model seq_len]");
  flag(i, "stride", in.stride, "Window stride [window / 2]");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "PRI scatter plots and difference histograms");
  flag(p, "out-dir", pl.out_dir, "Output directory");
  flag(p, "pattern", pl.patterns, "Pattern spec type:pri[/pri..][:dev[:dwell/..]]; repeatable [the five PRI types]");
  flag(p, "count", pl.count, "PRIs per pattern")->check(CLI::PositiveNumber);
  flag(p, "seed", pl.seed, "Seed for deviations and random staggers");
  flag(p, "data", pl.data, "Dataset for difference histograms");
  flag(p, "record", pl.record, "Record index for difference histograms");
  flag(p, "max-level", pl.max_level, "Histogram difference levels to write")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }

  try {
    for (const auto* sub : app.get_subcommands()) log_config(*sub);
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*i) return run_infer(in);
    if (*p) return run_plot(pl);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
