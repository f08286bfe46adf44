// Copyright 2026 The HVSARN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: synth, train, eval, gradcheck, ablate.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hvsarn/config.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/evaluation.hpp"
#include "hvsarn/io.hpp"
#include "hvsarn/training.hpp"

#ifndef HVSARN_GIT_DESCRIBE
#define HVSARN_GIT_DESCRIBE "unknown"
#endif

namespace {

using hvsarn::fs::path;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int precision_bits() {
  const char* env = std::getenv("HVSARN_PRECISION");
  if (env == nullptr || std::string(env).empty() || std::string(env) == "32") return 32;
  if (std::string(env) == "64") return 64;
  throw UsageError("HVSARN_PRECISION must be 32 or 64, got '" + std::string(env) + "'");
}

// Creates `dir`, refusing to reuse a non-empty directory unless `force`.
void prepare_out_dir(const path& dir, bool force) {
  namespace fs = hvsarn::fs;
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw UsageError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

void write_run_manifest(const path& dir, const std::string& command, const json& config, std::uint64_t seed,
                        const json& artifacts, const Timer& timer) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["artifacts"] = artifacts;
  m["wall_clock_seconds"] = timer.seconds();
  m["git_describe"] = HVSARN_GIT_DESCRIBE;
  m["precision"] = precision_bits();
  hvsarn::io::write_text_atomic(dir / "run.json", m.dump(2) + "\n");
}

json read_config_json(const std::string& file) {
  if (file.empty()) return json::object();
  try {
    return json::parse(hvsarn::io::read_text(file));
  } catch (const json::exception& e) {
    throw hvsarn::ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
}

void print_grid(const hvsarn::MetricReport& report) {
  for (const auto& p : report.grid) std::cout << hvsarn::metric_name(p) << '\t';
  std::cout << '\n';
  for (double r : report.recall) std::cout << std::fixed << std::setprecision(2) << 100.0 * r << '\t';
  std::cout << '\n';
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  int count = 50;
  int frames = 16;
  int objects = 4;
  std::uint64_t seed = 0;
  std::string difficulty = "separable";
  bool force = false;
};

std::uint64_t sample_seed(std::uint64_t base, std::size_t index) { return base * 1000003ULL + index; }

int cmd_synth(const SynthArgs& a) {
  const auto difficulty = hvsarn::parse_difficulty(a.difficulty);
  if (a.count < 0) throw UsageError("--count must be >= 0");
  prepare_out_dir(a.out_dir, a.force);
  std::vector<hvsarn::Sample> samples;
  for (int i = 0; i < a.count; ++i) {
    samples.push_back(hvsarn::synth_sample(sample_seed(a.seed, static_cast<std::size_t>(i)), a.frames, a.objects, difficulty));
  }
  hvsarn::save_dataset(samples, a.out_dir,
                       {{"generator", "synth"}, {"T", a.frames}, {"K", a.objects}, {"seed", a.seed},
                        {"difficulty", a.difficulty}});
  std::cout << "wrote " << a.count << " samples to " << a.out_dir << '\n';
  return 0;
}

struct TrainArgs {
  std::string data_dir;
  std::string config_file;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<int> batch;
  bool force = false;
};

template <class S>
int train_impl(const TrainArgs& a) {
  Timer timer;
  const json cj = read_config_json(a.config_file);
  auto config = hvsarn::model_config_from_json(cj);
  auto hp = hvsarn::train_config_from_json(cj);
  if (a.seed) config.seed = *a.seed;
  if (a.steps) hp.steps = *a.steps;
  if (a.lr) hp.lr = *a.lr;
  if (a.batch) hp.batch = *a.batch;
  hp.validate();
  const auto data = hvsarn::load_dataset(a.data_dir);
  prepare_out_dir(a.out_dir, a.force);

  auto state = hvsarn::make_train_state<S>(config);
  const path out(a.out_dir);
  json artifacts = {{"checkpoint", (out / "checkpoint").string()}, {"loss_curve", (out / "loss_curve.tsv").string()}};
  hvsarn::TrainHooks hooks;
  hooks.on_step = [&](std::int64_t step, double loss) {
    if (step % 100 == 0 || step == hp.steps) std::cout << "step " << step << " loss " << loss << std::endl;
  };
  hooks.on_checkpoint = [&](std::int64_t step) {
    const auto dir = out / ("checkpoint_step_" + std::to_string(step));
    hvsarn::save_checkpoint(state, dir, hp);
    artifacts["periodic_checkpoints"].push_back(dir.string());
  };
  const auto curve = hvsarn::train(state, data, hp, hooks);
  hvsarn::save_checkpoint(state, out / "checkpoint", hp);
  std::ostringstream tsv;
  tsv << "step\tloss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) tsv << (i + 1) << '\t' << std::setprecision(9) << curve[i] << '\n';
  hvsarn::io::write_text_atomic(out / "loss_curve.tsv", tsv.str());
  json snapshot = hvsarn::to_json(config);
  snapshot["train"] = hvsarn::to_json(hp);
  write_run_manifest(out, "train", snapshot, config.seed, artifacts, timer);
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string predictions;
  std::string data_dir;
  std::string metrics;
  std::string out_dir;
  std::string config_file;
};

template <class S>
std::vector<hvsarn::SegmentPrediction> predict_from_checkpoint(const EvalArgs& a, const std::vector<hvsarn::Sample>& data,
                                                               json& config_snapshot, std::size_t& top_n) {
  if (!hvsarn::fs::exists(path(a.checkpoint) / "manifest.json")) {
    throw UsageError("checkpoint not found: " + a.checkpoint);
  }
  const auto state = hvsarn::load_checkpoint<S>(a.checkpoint);
  if (!a.config_file.empty()) {
    auto cfg = hvsarn::model_config_from_json(read_config_json(a.config_file));
    cfg.seed = state.config.seed;
    if (hvsarn::to_json(cfg) != hvsarn::to_json(state.config)) {
      throw UsageError("checkpoint/config mismatch: --config differs from the checkpoint's configuration");
    }
  }
  for (const auto& s : data) {
    try {
      hvsarn::check_compatible(state.config, s);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("checkpoint/config mismatch: ") + e.what());
    }
  }
  config_snapshot = hvsarn::to_json(state.config);
  top_n = static_cast<std::size_t>(state.config.top_n);
  return hvsarn::infer_all(state.params, state.config, data);
}

int cmd_eval(const EvalArgs& a) {
  Timer timer;
  if (a.checkpoint.empty() == a.predictions.empty()) throw UsageError("give exactly one of --checkpoint or --predictions");
  const auto grid = a.metrics.empty() ? hvsarn::default_metric_grid() : hvsarn::parse_metric_grid(a.metrics);
  const auto data = hvsarn::load_dataset(a.data_dir);
  json config_snapshot = json::object();
  std::size_t top_n = 5;
  for (const auto& p : grid) top_n = std::max(top_n, static_cast<std::size_t>(p.n));
  std::vector<hvsarn::SegmentPrediction> predictions;
  if (!a.checkpoint.empty()) {
    std::string dtype;
    try {
      dtype = hvsarn::checkpoint_dtype(a.checkpoint);
    } catch (const hvsarn::MissingFileError&) {
      throw UsageError("checkpoint not found: " + a.checkpoint);
    }
    std::size_t config_top_n = 0;
    predictions = dtype == "f64" ? predict_from_checkpoint<double>(a, data, config_snapshot, config_top_n)
                                 : predict_from_checkpoint<float>(a, data, config_snapshot, config_top_n);
    top_n = std::max(top_n, config_top_n);
  } else {
    predictions = hvsarn::align_predictions(hvsarn::read_predictions(a.predictions), data);
  }
  const auto report = hvsarn::evaluate(predictions, hvsarn::annotations_of(data), grid);
  print_grid(report);
  if (!a.out_dir.empty()) {
    const path out(a.out_dir);
    hvsarn::fs::create_directories(out);
    json artifacts = {{"report", (out / "report.tsv").string()}};
    if (!a.checkpoint.empty()) {
      hvsarn::write_predictions(out / "predictions.jsonl", predictions, top_n);
      artifacts["predictions"] = (out / "predictions.jsonl").string();
    }
    hvsarn::io::write_text_atomic(out / "report.tsv", hvsarn::format_report_tsv({{"model", report}}));
    json hits = json::array();
    for (std::size_t q = 0; q < report.count(); ++q) hits.push_back({{"query_id", report.query_ids[q]}, {"hits", report.hits[q]}});
    hvsarn::io::write_text_atomic(out / "hits.json", hits.dump(2) + "\n");
    write_run_manifest(out, "eval", config_snapshot, 0, artifacts, timer);
  }
  return 0;
}

struct GradcheckArgs {
  std::string config_file;
  double tolerance = 1e-4;
  std::optional<std::uint64_t> seed;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  json cj = read_config_json(a.config_file);
  if (a.config_file.empty()) cj = {{"D", 6}, {"L", 1}};
  auto config = hvsarn::model_config_from_json(cj);
  if (a.seed) config.seed = *a.seed;
  hvsarn::GradcheckOptions options;
  options.tolerance = a.tolerance;
  Timer timer;
  const auto report = hvsarn::gradcheck(config, options);
  for (const auto& e : report.entries) {
    std::cout << std::left << std::setw(40) << e.name << std::setw(8) << e.size << std::scientific << std::setprecision(3)
              << e.max_rel_error << "  " << (e.used ? (e.passed ? "ok" : "FAIL") : (e.passed ? "unused" : "FAIL"))
              << '\n';
  }
  std::cout << std::defaultfloat << "max relative error " << report.max_rel_error() << ", tolerance " << a.tolerance
            << ", " << report.entries.size() << " tensors, " << timer.seconds() << " s\n";
  if (!report.passed()) {
    std::cout << "failed tensors:";
    for (const auto& n : report.failures()) std::cout << ' ' << n;
    std::cout << '\n';
    return 1;
  }
  return 0;
}

struct AblateArgs {
  std::string data_dir;
  std::string eval_dir;
  std::string out_dir;
  std::string config_file;
  std::vector<std::string> ablations;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<int> batch;
  std::string metrics;
  bool force = false;
};

template <class S>
int ablate_impl(const AblateArgs& a) {
  Timer timer;
  const json cj = read_config_json(a.config_file);
  auto base = hvsarn::model_config_from_json(cj);
  auto hp = hvsarn::train_config_from_json(cj);
  if (a.seed) base.seed = *a.seed;
  if (a.steps) hp.steps = *a.steps;
  if (a.lr) hp.lr = *a.lr;
  if (a.batch) hp.batch = *a.batch;
  hp.validate();
  std::vector<std::string> names = a.ablations;
  if (names.empty()) names = {"object_only", "frame_only", "two_stream", "wo_visual", "wo_semantic", "wo_visual_semantic", "full"};
  std::vector<std::pair<std::string, hvsarn::ModelConfig>> configs;
  for (const auto& n : names) configs.emplace_back(n, hvsarn::ablate(base, n));
  const auto train_set = hvsarn::load_dataset(a.data_dir);
  const auto eval_set = a.eval_dir.empty() ? train_set : hvsarn::load_dataset(a.eval_dir);
  const auto grid = a.metrics.empty() ? hvsarn::default_metric_grid() : hvsarn::parse_metric_grid(a.metrics);
  prepare_out_dir(a.out_dir, a.force);
  const auto rows = hvsarn::ablation_report<S>(configs, train_set, eval_set, hp, grid);
  const auto tsv = hvsarn::format_ablation_tsv(rows);
  std::cout << tsv;
  const path out(a.out_dir);
  hvsarn::io::write_text_atomic(out / "ablation.tsv", tsv);
  json snapshot = hvsarn::to_json(base);
  snapshot["train"] = hvsarn::to_json(hp);
  snapshot["ablations"] = names;
  write_run_manifest(out, "ablate", snapshot, base.seed, {{"report", (out / "ablation.tsv").string()}}, timer);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hvsarn: hierarchical visual/semantic graph-memory reasoning for temporal sentence grounding"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write synthetic samples");
  s->add_option("--out-dir", synth.out_dir, "output dataset directory")->required();
  s->add_option("--count", synth.count, "number of samples");
  s->add_option("--frames,-T", synth.frames, "frames per video");
  s->add_option("--objects,-K", synth.objects, "objects per frame");
  s->add_option("--seed", synth.seed, "base seed");
  s->add_option("--difficulty", synth.difficulty, "separable | noisy");
  s->add_flag("--force", synth.force, "overwrite a non-empty output directory");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model on a dataset directory");
  t->add_option("--data-dir", train.data_dir)->required();
  t->add_option("--config", train.config_file, "JSON model config");
  t->add_option("--out-dir", train.out_dir)->required();
  t->add_option("--seed", train.seed, "overrides config seed");
  t->add_option("--steps", train.steps, "overrides train.steps");
  t->add_option("--lr", train.lr, "overrides train.lr");
  t->add_option("--batch", train.batch, "overrides train.batch");
  t->add_flag("--force", train.force);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint or a predictions file");
  e->add_option("--checkpoint", eval.checkpoint);
  e->add_option("--predictions", eval.predictions, "JSON-lines predictions");
  e->add_option("--data-dir", eval.data_dir)->required();
  e->add_option("--metrics", eval.metrics, "n:m[,n:m...]");
  e->add_option("--out-dir", eval.out_dir);
  e->add_option("--config", eval.config_file, "must match the checkpoint config");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "compare backprop with central finite differences");
  g->add_option("--config", grad.config_file);
  g->add_option("--tolerance", grad.tolerance);
  g->add_option("--seed", grad.seed);

  AblateArgs abl;
  auto* a = app.add_subcommand("ablate", "train and evaluate ablation settings");
  a->add_option("--data-dir", abl.data_dir)->required();
  a->add_option("--eval-dir", abl.eval_dir, "defaults to --data-dir");
  a->add_option("--out-dir", abl.out_dir)->required();
  a->add_option("--config", abl.config_file);
  a->add_option("--ablation", abl.ablations, "setting name (repeatable)");
  a->add_option("--seed", abl.seed);
  a->add_option("--steps", abl.steps);
  a->add_option("--lr", abl.lr);
  a->add_option("--batch", abl.batch);
  a->add_option("--metrics", abl.metrics);
  a->add_flag("--force", abl.force);

  CLI11_PARSE(app, argc, argv);

  try {
    precision_bits();
    if (*s) return cmd_synth(synth);
    if (*t) return precision_bits() == 64 ? train_impl<double>(train) : train_impl<float>(train);
    if (*e) return cmd_eval(eval);
    if (*g) return cmd_gradcheck(grad);
    if (*a) return precision_bits() == 64 ? ablate_impl<double>(abl) : ablate_impl<float>(abl);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
  return 1;
}
