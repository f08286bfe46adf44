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

// Object-level reasoning within each frame, query-guided fusion of objects
// into frames, and frame-level reasoning across the video.

#include <string>
#include <utility>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/config.hpp"
#include "hvsarn/cross_space.hpp"
#include "hvsarn/encoders.hpp"
#include "hvsarn/params.hpp"
#include "hvsarn/reasoners.hpp"

namespace hvsarn {

template <class S>
struct FrameRepresentations {
  ad::Var<S> visual;    // [T x D]
  ad::Var<S> semantic;  // [T x D]
};

template <class S>
struct NodePair {
  ad::Var<S> visual;
  ad::Var<S> semantic;
};

template <class S>
void init_fusion(ParamInit<S> p, int dim) {
  p.weight("W_a", dim, dim);
  p.weight("U_a", dim, dim);
  p.bias("b_a", dim);
  p.weight("w", dim, 1);
}

// Parameter sets: "reason.{obj,frame}.{visual,semantic}", "cross.{obj,frame}",
// "fuse".
template <class S>
void init_hierarchy(ParamInit<S> p, const ModelConfig& c) {
  for (const char* level : {"obj", "frame"}) {
    for (const char* graph : {"visual", "semantic"}) {
      init_reasoner(p.child("reason").child(level).child(graph), c.reasoner, c.hidden, c.hidden);
    }
    init_cross_space(p.child("cross").child(level), c.hidden);
  }
  init_fusion(p.child("fuse"), c.hidden);
}

// One level of visual + semantic reasoning over G graphs of `group` nodes:
// visual graph, visual-to-semantic, semantic graph, semantic-to-visual.
template <class S>
NodePair<S> level_pass(const Scope<S>& p, const std::string& level, const ad::Var<S>& visual,
                       const ad::Var<S>& semantic, const ad::Var<S>& controllers, int group, const ModelConfig& c,
                       bool cross_space, AttentionTrace<S>* trace) {
  const auto reason_scope = p.child("reason").child(level);
  const auto cross = p.child("cross").child(level);
  const std::string site = level;

  auto visual_l = visual;
  if (c.use_visual_graph) {
    visual_l = run_reasoner(c.reasoner, reason_scope.child("visual"), GraphBatch<S>{visual, controllers, group},
                            c.steps, trace, site + ".visual")
                   .nodes;
  }
  if (!c.use_semantic_graph) return {visual_l, semantic};

  auto semantic_in = semantic;
  if (cross_space) semantic_in = visual_to_semantic(cross, visual_l, semantic, group, trace, site).enhanced;
  const auto semantic_l = run_reasoner(c.reasoner, reason_scope.child("semantic"),
                                       GraphBatch<S>{semantic_in, controllers, group}, c.steps, trace,
                                       site + ".semantic")
                              .nodes;
  auto visual_out = visual_l;
  if (cross_space) visual_out = semantic_to_visual(cross, semantic_l, visual_l, group, trace, site).enhanced;
  return {visual_out, semantic_l};
}

// Per-frame graphs over the K objects; each frame's controller starts at Q.
template <class S>
NodePair<S> object_level_pass(const Scope<S>& p, const EncodedVideo<S>& video, const ad::Var<S>& sentence,
                              const ModelConfig& c, AttentionTrace<S>* trace = nullptr) {
  const auto controllers = ad::repeat_rows(sentence, video.num_frames);
  return level_pass(p, "obj", video.visual, video.semantic, controllers, video.num_objects, c, true, trace);
}

// v_t = sum_k softmax_k(w^T tanh(W_a v_tk + U_a Q + b_a)) v_tk;  s_t = mean_k s_tk
template <class S>
FrameRepresentations<S> fuse_objects(const Scope<S>& p, const ad::Var<S>& visual, const ad::Var<S>& semantic,
                                     const ad::Var<S>& sentence, int num_objects,
                                     AttentionTrace<S>* trace = nullptr) {
  const int K = num_objects;
  const auto frames = visual.rows() / K;
  const auto query_term = ad::repeat_rows(ad::matmul(sentence, p("U_a")), static_cast<int>(frames * K));
  const auto scores =
      ad::matmul(ad::tanh(ad::add_row(ad::add(ad::matmul(visual, p("W_a")), query_term), p("b_a"))), p("w"));
  const auto weights = ad::group_softmax(scores, K);
  record_attention(trace, "fuse", AttentionLayout::grouped, K, weights);
  return {ad::group_weighted_sum(weights, visual, K), ad::group_mean(semantic, K)};
}

// One graph whose nodes are the T frames; controller starts at Q.
template <class S>
FrameRepresentations<S> frame_level_pass(const Scope<S>& p, const FrameRepresentations<S>& frames,
                                         const ad::Var<S>& sentence, const ModelConfig& c,
                                         AttentionTrace<S>* trace = nullptr) {
  if (!c.use_frame_level) return frames;
  const int T = static_cast<int>(frames.visual.rows());
  const auto out = level_pass(p, "frame", frames.visual, frames.semantic, sentence, T, c,
                              c.cross_space_at_frame_level, trace);
  return {out.visual, out.semantic};
}

// Frame features fed to the localization head, per the configured hierarchy.
// Hierarchical: object level -> fusion -> frame level, with "object only"
// skipping the frame level and "frame only" replacing the object level by a
// per-frame mean of the encoder outputs. Two stream: both run from the
// encoder outputs and their frame features are concatenated.
template <class S>
FrameRepresentations<S> hierarchy_forward(const Scope<S>& p, const EncodedVideo<S>& video, const ad::Var<S>& sentence,
                                          const ModelConfig& c, AttentionTrace<S>* trace = nullptr) {
  const int K = video.num_objects;
  auto object_stream = [&] {
    const auto nodes = object_level_pass(p, video, sentence, c, trace);
    return fuse_objects(p.child("fuse"), nodes.visual, nodes.semantic, sentence, K, trace);
  };
  auto pooled = [&] {
    return FrameRepresentations<S>{ad::group_mean(video.visual, K), ad::group_mean(video.semantic, K)};
  };
  if (c.fusion == FusionMode::two_stream) {
    const auto obj = object_stream();
    const auto frm = frame_level_pass(p, pooled(), sentence, c, trace);
    return {ad::concat_cols(obj.visual, frm.visual), ad::concat_cols(obj.semantic, frm.semantic)};
  }
  const auto frames = c.use_object_level ? object_stream() : pooled();
  return frame_level_pass(p, frames, sentence, c, trace);
}

}  // namespace hvsarn
