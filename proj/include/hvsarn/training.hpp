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

#pragma once

// Adam training loop, checkpoints and the finite-difference gradient check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "hvsarn/config.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/io.hpp"
#include "hvsarn/model.hpp"
#include "hvsarn/params.hpp"
#include "hvsarn/rng.hpp"

namespace hvsarn {

template <class S>
struct TrainState {
  ModelConfig config;
  ParamStore<S> params;
  std::vector<Matrix<S>> adam_m;  // aligned with params.entries()
  std::vector<Matrix<S>> adam_v;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

template <class S>
TrainState<S> make_train_state(const ModelConfig& config) {
  TrainState<S> state;
  state.config = config;
  state.params = init_params<S>(config);
  for (const auto& e : state.params.entries()) {
    state.adam_m.push_back(Matrix<S>::Zero(e.value.rows(), e.value.cols()));
    state.adam_v.push_back(Matrix<S>::Zero(e.value.rows(), e.value.cols()));
  }
  state.seed = config.seed;
  return state;
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

// Mean loss of `batch` and its gradient w.r.t. every parameter.
template <class S>
double batch_gradient(const TrainState<S>& state, const std::vector<Sample>& data,
                      const std::vector<std::size_t>& batch, std::vector<Matrix<S>>& grads) {
  grads.clear();
  for (const auto& e : state.params.entries()) grads.push_back(Matrix<S>::Zero(e.value.rows(), e.value.cols()));
  double total = 0.0;
  for (std::size_t idx : batch) {
    const Sample& sample = data[idx];
    if (!sample.video.annotation) throw std::invalid_argument("training sample " + sample.query.query_id + " has no annotation");
    ad::Tape<S> tape;
    Binding<S> binding(tape, state.params);
    const auto result = forward(binding, state.config, sample);
    tape.backward(*result.loss);
    total += static_cast<double>(result.loss->value()(0, 0));
    const auto g = binding.gradients();
    for (std::size_t i = 0; i < g.size(); ++i) grads[i] += g[i];
  }
  const S inv = S(1) / static_cast<S>(batch.size());
  for (auto& g : grads) g *= inv;
  return total / static_cast<double>(batch.size());
}

template <class S>
void adam_update(TrainState<S>& state, const std::vector<Matrix<S>>& grads, const TrainConfig& hp) {
  ++state.step;
  const S b1 = static_cast<S>(hp.beta1), b2 = static_cast<S>(hp.beta2);
  const S c1 = S(1) - static_cast<S>(std::pow(hp.beta1, static_cast<double>(state.step)));
  const S c2 = S(1) - static_cast<S>(std::pow(hp.beta2, static_cast<double>(state.step)));
  const S lr = static_cast<S>(hp.lr), eps = static_cast<S>(hp.eps);
  auto& entries = state.params.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto m = state.adam_m[i].array();
    auto v = state.adam_v[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.square();
    entries[i].value.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

struct TrainHooks {
  // Called after every optimizer step with the 1-based step and its loss.
  std::function<void(std::int64_t, double)> on_step;
  // Called every TrainConfig::checkpoint_every steps.
  std::function<void(std::int64_t)> on_checkpoint;
};

// Runs hp.steps optimizer steps. Batches are drawn without replacement from
// a per-epoch shuffle seeded by state.seed, so the run is a pure function of
// (state, data, hp). Returns the per-step mean batch loss.
template <class S>
std::vector<double> train(TrainState<S>& state, const std::vector<Sample>& data, const TrainConfig& hp,
                          const TrainHooks& hooks = {}) {
  hp.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& s : data) check_compatible(state.config, s);
  Rng rng(state.seed ^ 0x7472616E5EEDULL);
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(hp.steps));
  std::vector<Matrix<S>> grads;
  const std::size_t batch_size = std::min<std::size_t>(static_cast<std::size_t>(hp.batch), data.size());
  for (int step = 0; step < hp.steps; ++step) {
    std::vector<std::size_t> batch;
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    const double loss = batch_gradient(state, data, batch, grads);
    if (!std::isfinite(loss)) throw TrainingDiverged(state.step + 1, "loss is " + std::to_string(loss));
    adam_update(state, grads, hp);
    curve.push_back(loss);
    if (hooks.on_step) hooks.on_step(state.step, loss);
    if (hooks.on_checkpoint && hp.checkpoint_every > 0 && state.step % hp.checkpoint_every == 0) {
      hooks.on_checkpoint(state.step);
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json plus one raw little-endian blob per tensor.

template <class S>
constexpr const char* dtype_name() {
  return std::is_same_v<S, float> ? "f32" : "f64";
}

inline std::string checkpoint_dtype(const fs::path& dir) {
  const auto m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  return m.at("dtype").get<std::string>();
}

template <class S>
void save_checkpoint(const TrainState<S>& state, const fs::path& dir, const TrainConfig& hp = {}) {
  fs::create_directories(dir);
  nlohmann::json m;
  m["format"] = "hvsarn-checkpoint";
  m["version"] = 1;
  m["dtype"] = dtype_name<S>();
  m["config"] = to_json(state.config);
  m["train"] = to_json(hp);
  m["step"] = state.step;
  m["seed"] = state.seed;
  m["tensors"] = nlohmann::json::array();
  const auto& entries = state.params.entries();
  auto put = [&](const std::string& role, const std::string& name, const Matrix<S>& value) {
    const std::string file = role + "." + name + "." + dtype_name<S>();
    io::write_blob(dir / file, value.data(), static_cast<std::size_t>(value.size()));
    m["tensors"].push_back({{"name", name}, {"role", role}, {"shape", {value.rows(), value.cols()}}, {"file", file}});
  };
  for (std::size_t i = 0; i < entries.size(); ++i) {
    put("param", entries[i].name, entries[i].value);
    put("adam_m", entries[i].name, state.adam_m[i]);
    put("adam_v", entries[i].name, state.adam_v[i]);
  }
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

template <class S>
TrainState<S> load_checkpoint(const fs::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json", e.what());
  }
  if (m.value("format", "") != "hvsarn-checkpoint") throw FormatError("format", "not an hvsarn checkpoint");
  if (m.value("dtype", "") != dtype_name<S>()) {
    throw FormatError("dtype", "checkpoint holds " + m.value("dtype", std::string("?")) + ", requested " + dtype_name<S>());
  }
  TrainState<S> state = make_train_state<S>(model_config_from_json(m.at("config")));
  state.step = m.at("step").get<std::int64_t>();
  state.seed = m.at("seed").get<std::uint64_t>();
  std::size_t seen = 0;
  for (const auto& t : m.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto role = t.at("role").get<std::string>();
    if (!state.params.contains(name)) throw FormatError(name, "checkpoint tensor not part of the configured model");
    const auto idx = state.params.index_of(name);
    Matrix<S>* target = role == "param"    ? &state.params.entries()[idx].value
                        : role == "adam_m" ? &state.adam_m[idx]
                        : role == "adam_v" ? &state.adam_v[idx]
                                           : nullptr;
    if (target == nullptr) throw FormatError(name, "unknown tensor role " + role);
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != target->rows() || shape[1] != target->cols()) {
      throw ShapeError(name, "checkpoint shape does not match the configured model");
    }
    const auto data = io::read_blob<S>(dir / t.at("file").get<std::string>(), static_cast<std::size_t>(target->size()), name);
    *target = Eigen::Map<const Matrix<S>>(data.data(), target->rows(), target->cols());
    ++seen;
  }
  if (seen != 3 * state.params.size()) throw FormatError("tensors", "checkpoint is missing tensors");
  return state;
}

// ---------------------------------------------------------------------------
// Gradient check.

struct GradcheckEntry {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  bool used = true;
  bool passed = true;
};

struct GradcheckReport {
  double tolerance = 0.0;
  std::vector<GradcheckEntry> entries;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
      if (!e.passed) out.push_back(e.name);
    }
    return out;
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-6;
  int num_frames = 3;
  int num_objects = 2;
  int num_tokens = 3;
  // Applied to each analytic gradient before comparison (fault injection).
  std::function<void(const std::string&, Matrix<double>&)> tamper;
};

// Compares backpropagated gradients of the localization loss with central
// differences for every parameter tensor, in double precision.
inline GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options = {}) {
  config.validate();
  auto params = init_params<double>(config);
  const Sample sample = random_sample(config.seed + 17, options.num_frames, options.num_objects, options.num_tokens,
                                      config.feature_dim, config.semantic_dim, config.word_dim);
  auto loss_at = [&]() {
    ad::Tape<double> tape;
    Binding<double> binding(tape, params, /*trainable=*/false);
    return forward(binding, config, sample).loss->value()(0, 0);
  };

  std::vector<Matrix<double>> analytic;
  std::vector<bool> bound;
  {
    ad::Tape<double> tape;
    Binding<double> binding(tape, params);
    const auto result = forward(binding, config, sample);
    tape.backward(*result.loss);
    analytic = binding.gradients();
    for (std::size_t i = 0; i < params.size(); ++i) bound.push_back(binding.used(i));
  }

  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& entry = params.entries()[i];
    Matrix<double> a = analytic[i];
    if (options.tamper) options.tamper(entry.name, a);
    Matrix<double> numeric(entry.value.rows(), entry.value.cols());
    for (Eigen::Index j = 0; j < entry.value.size(); ++j) {
      double& x = entry.value.data()[j];
      const double saved = x;
      x = saved + options.step;
      const double up = loss_at();
      x = saved - options.step;
      const double down = loss_at();
      x = saved;
      numeric.data()[j] = (up - down) / (2.0 * options.step);
    }
    GradcheckEntry e;
    e.name = entry.name;
    e.size = static_cast<std::size_t>(entry.value.size());
    e.analytic_norm = a.norm();
    e.numeric_norm = numeric.norm();
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const double an = a.data()[j], nu = numeric.data()[j];
      const double denom = std::max({std::abs(an), std::abs(nu), options.floor});
      e.max_rel_error = std::max(e.max_rel_error, std::abs(an - nu) / denom);
    }
    e.used = bound[i] && (e.analytic_norm > 0.0 || e.numeric_norm > options.floor);
    e.passed = e.max_rel_error < options.tolerance;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace hvsarn
