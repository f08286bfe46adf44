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

// The full network: encoders, hierarchy, localization head.

#include <optional>
#include <stdexcept>
#include <string>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/config.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/encoders.hpp"
#include "hvsarn/hierarchy.hpp"
#include "hvsarn/localization.hpp"
#include "hvsarn/params.hpp"
#include "hvsarn/rng.hpp"

namespace hvsarn {

// Every parameter tensor for `config`, initialized from config.seed.
// Parameters of branches a configuration switches off are still created so
// that checkpoints and gradient reports always cover the same tensors.
template <class S>
ParamStore<S> init_params(const ModelConfig& config) {
  config.validate();
  ParamStore<S> store;
  Rng rng(config.seed);
  init_video_encoder(ParamInit<S>(store, rng, "enc.video"), config);
  init_query_encoder(ParamInit<S>(store, rng, "enc.query"), config);
  init_hierarchy(ParamInit<S>(store, rng, ""), config);
  const int frame_width = config.fusion == FusionMode::two_stream ? 4 * config.hidden : 2 * config.hidden;
  init_localization(ParamInit<S>(store, rng, "loc"), frame_width, config.hidden);
  return store;
}

inline void check_compatible(const ModelConfig& c, const Sample& s) {
  if (s.video.num_frames > c.max_frames) throw std::invalid_argument("sample T exceeds T_max");
  if (s.video.num_objects > c.max_objects) throw std::invalid_argument("sample K exceeds K_max");
  if (s.video.feature_dim() != c.feature_dim) throw std::invalid_argument("sample D_in differs from config");
  if (s.video.semantic_dim() != c.semantic_dim) throw std::invalid_argument("sample D_sem differs from config");
  if (s.query.word_dim() != c.word_dim) throw std::invalid_argument("sample D_w differs from config");
}

template <class S>
struct ForwardResult {
  EncodedVideo<S> video;
  EncodedQuery<S> query;
  FrameRepresentations<S> frames;
  ad::Var<S> contextual;
  SpanLogits<S> logits;
  std::optional<ad::Var<S>> loss;  // present when the sample is annotated
};

template <class S>
ForwardResult<S> forward(Binding<S>& binding, const ModelConfig& config, const Sample& sample,
                         AttentionTrace<S>* trace = nullptr) {
  check_compatible(config, sample);
  const Scope<S> root(binding, "");
  ForwardResult<S> out;
  out.video = encode_video(root.child("enc.video"), sample.video);
  out.query = encode_query(root.child("enc.query"), sample.query, config.heads);
  if (trace != nullptr) {
    for (const auto& a : out.query.attention) record_attention(trace, "query.self_attention", AttentionLayout::rows, 0, a);
  }
  out.frames = hierarchy_forward(root, out.video, out.query.sentence, config, trace);
  out.contextual = fuse_and_contextualize(root.child("loc"), out.frames);
  out.logits = span_logits(root.child("loc"), out.contextual);
  if (sample.video.annotation) out.loss = span_loss(out.logits, *sample.video.annotation);
  return out;
}

template <class S>
SegmentPrediction infer(const ParamStore<S>& params, const ModelConfig& config, const Sample& sample) {
  ad::Tape<S> tape;
  Binding<S> binding(tape, params, /*trainable=*/false);
  auto prediction = predict(forward(binding, config, sample).logits);
  prediction.query_id = sample.query.query_id;
  return prediction;
}

}  // namespace hvsarn
