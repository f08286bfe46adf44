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

#include <gtest/gtest.h>

#include <cstring>

#include "hvsarn/evaluation.hpp"
#include "hvsarn/training.hpp"
#include "test_support.hpp"

namespace hvsarn {
namespace {

using testing::TempDir;

ModelConfig small_config() {
  ModelConfig c;
  c.hidden = 8;
  c.steps = 1;
  c.seed = 3;
  return c;
}

std::vector<Sample> small_data(int count, int T = 6, int K = 2) {
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) out.push_back(synth_sample(500 + i, T, K, Difficulty::separable));
  return out;
}

template <class S>
bool bit_equal(const Matrix<S>& a, const Matrix<S>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(S) * static_cast<std::size_t>(a.size())) == 0;
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  auto state = make_train_state<float>(small_config());
  const auto before = state.params;
  TrainConfig hp;
  hp.lr = 0.0;
  hp.steps = 3;
  hp.batch = 2;
  train(state, small_data(4), hp);
  EXPECT_EQ(state.step, 3);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_TRUE(bit_equal(before.entries()[i].value, state.params.entries()[i].value)) << before.entries()[i].name;
  }
}

TEST(Train, SameSeedGivesIdenticalCurves) {
  const auto data = small_data(5);
  TrainConfig hp;
  hp.steps = 6;
  hp.batch = 2;
  auto a = make_train_state<float>(small_config());
  auto b = make_train_state<float>(small_config());
  const auto ca = train(a, data, hp);
  const auto cb = train(b, data, hp);
  EXPECT_EQ(ca, cb);
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_TRUE(bit_equal(a.params.entries()[i].value, b.params.entries()[i].value));
  }
  auto other = small_config();
  other.seed = 4;
  auto c = make_train_state<float>(other);
  EXPECT_NE(train(c, data, hp), ca);
}

TEST(Train, SingleSeparableSampleIsMemorized) {
  const auto data = small_data(1, 8, 3);
  TrainConfig hp;
  hp.steps = 500;
  hp.batch = 1;
  auto state = make_train_state<float>(small_config());
  const auto curve = train(state, data, hp);
  ASSERT_EQ(curve.size(), 500u);
  EXPECT_LT(curve.back(), 0.1 * curve.front());
  const auto p = infer(state.params, state.config, data[0]);
  const auto& truth = *data[0].video.annotation;
  EXPECT_GE(temporal_iou({p.top_segments[0].start, p.top_segments[0].end}, {truth.start, truth.end}), 0.7);
}

TEST(Train, HooksSeeEveryStep) {
  TrainConfig hp;
  hp.steps = 5;
  hp.batch = 1;
  hp.checkpoint_every = 2;
  std::vector<std::int64_t> steps, checkpoints;
  TrainHooks hooks;
  hooks.on_step = [&](std::int64_t s, double) { steps.push_back(s); };
  hooks.on_checkpoint = [&](std::int64_t s) { checkpoints.push_back(s); };
  auto state = make_train_state<float>(small_config());
  train(state, small_data(2), hp, hooks);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{1, 2, 3, 4, 5}));
  EXPECT_EQ(checkpoints, (std::vector<std::int64_t>{2, 4}));
}

TEST(Train, RejectsBadInputs) {
  auto state = make_train_state<float>(small_config());
  EXPECT_THROW(train(state, {}, TrainConfig{}), std::invalid_argument);
  auto unannotated = small_data(1);
  unannotated[0].video.annotation.reset();
  TrainConfig hp;
  hp.steps = 1;
  EXPECT_THROW(train(state, unannotated, hp), std::invalid_argument);
  hp.batch = 0;
  EXPECT_THROW(train(state, small_data(1), hp), ConfigError);
}

TEST(Train, NonFiniteLossRaisesDivergence) {
  auto state = make_train_state<float>(small_config());
  state.params.at("loc.start_w").setConstant(std::numeric_limits<float>::quiet_NaN());
  TrainConfig hp;
  hp.steps = 2;
  try {
    train(state, small_data(1), hp);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.step(), 1);
  }
}

TEST(Adam, FirstStepMovesEachWeightByLearningRate) {
  auto state = make_train_state<double>(small_config());
  const auto before = state.params;
  std::vector<Matrix<double>> grads;
  Rng rng(8);
  for (const auto& e : state.params.entries()) grads.push_back(testing::random_matrix(rng, e.value.rows(), e.value.cols(), 1.0));
  TrainConfig hp;
  hp.lr = 0.01;
  hp.eps = 0.0;
  adam_update(state, grads, hp);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Matrix<double> delta = state.params.entries()[i].value - before.entries()[i].value;
    for (Eigen::Index j = 0; j < delta.size(); ++j) {
      const double g = grads[i].data()[j];
      ASSERT_NEAR(delta.data()[j], -0.01 * (g > 0 ? 1.0 : -1.0), 1e-12);
    }
  }
}

TEST(Adam, MatchesHandRolledRecurrence) {
  auto state = make_train_state<double>(small_config());
  const double x0 = state.params.entries()[0].value(0, 0);
  TrainConfig hp;
  hp.lr = 0.05;
  double m = 0.0, v = 0.0, x = x0;
  const std::vector<double> gs = {0.3, -1.2, 0.7, 0.01};
  for (std::size_t t = 0; t < gs.size(); ++t) {
    std::vector<Matrix<double>> grads;
    for (const auto& e : state.params.entries()) grads.push_back(Matrix<double>::Zero(e.value.rows(), e.value.cols()));
    grads[0](0, 0) = gs[t];
    adam_update(state, grads, hp);
    m = 0.9 * m + 0.1 * gs[t];
    v = 0.999 * v + 0.001 * gs[t] * gs[t];
    const double mh = m / (1.0 - std::pow(0.9, t + 1.0)), vh = v / (1.0 - std::pow(0.999, t + 1.0));
    x -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    ASSERT_NEAR(state.params.entries()[0].value(0, 0), x, 1e-12);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  auto state = make_train_state<float>(small_config());
  TrainConfig hp;
  hp.steps = 3;
  hp.batch = 2;
  train(state, small_data(3), hp);
  save_checkpoint(state, dir / "ckpt", hp);
  EXPECT_EQ(checkpoint_dtype(dir / "ckpt"), "f32");
  const auto loaded = load_checkpoint<float>(dir / "ckpt");
  EXPECT_EQ(loaded.step, state.step);
  EXPECT_EQ(loaded.seed, state.seed);
  EXPECT_EQ(to_json(loaded.config), to_json(state.config));
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    EXPECT_TRUE(bit_equal(state.params.entries()[i].value, loaded.params.entries()[i].value));
    EXPECT_TRUE(bit_equal(state.adam_m[i], loaded.adam_m[i]));
    EXPECT_TRUE(bit_equal(state.adam_v[i], loaded.adam_v[i]));
  }
}

TEST(Checkpoint, ResumedTrainingContinuesTheSameTrajectory) {
  TempDir dir;
  const auto data = small_data(3);
  TrainConfig hp;
  hp.steps = 2;
  hp.batch = 1;
  auto state = make_train_state<double>(small_config());
  train(state, data, hp);
  save_checkpoint(state, dir / "ckpt", hp);
  auto resumed = load_checkpoint<double>(dir / "ckpt");
  std::vector<Matrix<double>> g1, g2;
  EXPECT_EQ(batch_gradient(state, data, {0, 2}, g1), batch_gradient(resumed, data, {0, 2}, g2));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_TRUE(bit_equal(g1[i], g2[i]));
}

TEST(Checkpoint, DtypeMismatchIsAnError) {
  TempDir dir;
  save_checkpoint(make_train_state<float>(small_config()), dir / "ckpt");
  try {
    load_checkpoint<double>(dir / "ckpt");
    FAIL() << "expected a dtype error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.field(), "dtype");
  }
}

TEST(Checkpoint, MissingOrCorruptFilesAreErrors) {
  TempDir dir;
  EXPECT_THROW(load_checkpoint<float>(dir / "nothing"), MissingFileError);
  save_checkpoint(make_train_state<float>(small_config()), dir / "ckpt");
  const auto blob = dir / "ckpt" / "param.loc.start_w.f32";
  ASSERT_TRUE(fs::exists(blob));
  fs::resize_file(blob, 3);
  EXPECT_THROW(load_checkpoint<float>(dir / "ckpt"), FormatError);
  fs::remove(blob);
  EXPECT_THROW(load_checkpoint<float>(dir / "ckpt"), MissingFileError);
}

TEST(Gradcheck, TamperedGradientIsReportedByName) {
  ModelConfig c;
  c.hidden = 6;
  c.steps = 1;
  GradcheckOptions options;
  options.tamper = [](const std::string& name, Matrix<double>& g) {
    if (name == "cross.obj.W2_f") g(0, 0) += 1e-2;
  };
  const auto report = gradcheck(c, options);
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.failures(), std::vector<std::string>{"cross.obj.W2_f"});
}

TEST(Gradcheck, ZeroStepsLeavesReasoningParametersUnused) {
  ModelConfig c;
  c.hidden = 6;
  c.steps = 0;
  const auto report = gradcheck(c);
  EXPECT_TRUE(report.passed());
  std::size_t reasoning = 0;
  for (const auto& e : report.entries) {
    const bool is_reasoning = e.name.rfind("reason.", 0) == 0;
    reasoning += is_reasoning ? 1 : 0;
    EXPECT_EQ(e.used, !is_reasoning) << e.name;
  }
  EXPECT_GT(reasoning, 0u);
}

TEST(Gradcheck, EveryTensorIsCoveredOnce) {
  ModelConfig c;
  c.hidden = 6;
  c.steps = 1;
  const auto report = gradcheck(c);
  const auto params = init_params<double>(c);
  ASSERT_EQ(report.entries.size(), params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(report.entries[i].name, params.entries()[i].name);
    EXPECT_EQ(report.entries[i].size, static_cast<std::size_t>(params.entries()[i].value.size()));
  }
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

}  // namespace
}  // namespace hvsarn
