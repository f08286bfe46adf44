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

// Initial object-level visual/semantic node features and the sentence vector.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/config.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/gru.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

template <class S>
struct EncodedVideo {
  ad::Var<S> visual;    // [T*K x D]
  ad::Var<S> semantic;  // [T*K x D]
  int num_frames = 0;
  int num_objects = 0;
};

template <class S>
struct EncodedQuery {
  ad::Var<S> sentence;           // [1 x D]
  ad::Var<S> contextual_tokens;  // [N x D]
  std::vector<ad::Var<S>> attention;  // one [N x N] matrix per head
};

inline int head_width(const ModelConfig& c) { return (c.hidden + c.heads - 1) / c.heads; }

template <class S>
void init_video_encoder(ParamInit<S> p, const ModelConfig& c) {
  p.weight("obj_W", c.feature_dim, c.hidden);
  p.bias("obj_b", c.hidden);
  p.weight("box_W", 4, c.hidden);
  p.bias("box_b", c.hidden);
  p.weight("sem_W", c.semantic_dim, c.hidden);
  p.bias("sem_b", c.hidden);
}

template <class S>
void init_query_encoder(ParamInit<S> p, const ModelConfig& c) {
  const int D = c.hidden;
  const int width = head_width(c) * c.heads;
  p.weight("in_W", c.word_dim, D);
  p.bias("in_b", D);
  p.weight("att_Wq", D, width);
  p.weight("att_Wk", D, width);
  p.weight("att_Wv", D, width);
  p.weight("att_Wo", width, D);
  p.bias("att_bo", D);
  init_bigru(p.child("gru"), D, D / 2);
  p.weight("out_W", D, D);
  p.bias("out_b", D);
}

template <class S>
ad::Var<S> constant_from(ad::Tape<S>& tape, const Matrix<float>& m) {
  return tape.constant(m.template cast<S>());
}

// visual = LinearA(object_features) + LinearB(boxes); semantic = LinearC(semantic_embeddings).
template <class S>
EncodedVideo<S> encode_video(const Scope<S>& p, const VideoSample& sample) {
  auto& tape = p.tape();
  const auto obj_W = p("obj_W");
  const auto sem_W = p("sem_W");
  if (obj_W.rows() != sample.feature_dim()) {
    throw std::invalid_argument("encode_video: object feature dim " + std::to_string(sample.feature_dim()) +
                                " does not match parameters (" + std::to_string(obj_W.rows()) + ")");
  }
  if (sem_W.rows() != sample.semantic_dim()) {
    throw std::invalid_argument("encode_video: semantic dim " + std::to_string(sample.semantic_dim()) +
                                " does not match parameters (" + std::to_string(sem_W.rows()) + ")");
  }
  const auto feats = constant_from(tape, sample.object_features);
  const auto boxes = constant_from(tape, sample.boxes);
  const auto sem = constant_from(tape, sample.semantic_embeddings);
  EncodedVideo<S> out;
  out.visual = ad::add(ad::affine(feats, obj_W, p("obj_b")), ad::affine(boxes, p("box_W"), p("box_b")));
  out.semantic = ad::affine(sem, sem_W, p("sem_b"));
  out.num_frames = sample.num_frames;
  out.num_objects = sample.num_objects;
  return out;
}

// Multi-head self-attention with a residual connection, then a Bi-GRU whose
// two final states are concatenated and projected to the sentence vector.
template <class S>
EncodedQuery<S> encode_query(const Scope<S>& p, const QuerySample& sample, int heads) {
  if (sample.num_tokens() < 1) throw std::invalid_argument("encode_query: query has no tokens");
  auto& tape = p.tape();
  const auto in_W = p("in_W");
  if (in_W.rows() != sample.word_dim()) {
    throw std::invalid_argument("encode_query: word dim " + std::to_string(sample.word_dim()) +
                                " does not match parameters (" + std::to_string(in_W.rows()) + ")");
  }
  const auto tokens = constant_from(tape, sample.token_embeddings);
  const auto x = ad::affine(tokens, in_W, p("in_b"));
  const auto q = ad::matmul(x, p("att_Wq"));
  const auto k = ad::matmul(x, p("att_Wk"));
  const auto v = ad::matmul(x, p("att_Wv"));
  const auto dh = q.cols() / heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

  EncodedQuery<S> out;
  ad::Var<S> mixed;
  for (int h = 0; h < heads; ++h) {
    const auto qh = ad::slice_cols(q, h * dh, dh);
    const auto kh = ad::slice_cols(k, h * dh, dh);
    const auto vh = ad::slice_cols(v, h * dh, dh);
    const auto weights = ad::row_softmax(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt));
    out.attention.push_back(weights);
    const auto head = ad::matmul(weights, vh);
    mixed = h == 0 ? head : ad::concat_cols(mixed, head);
  }
  const auto attended = ad::add(x, ad::affine(mixed, p("att_Wo"), p("att_bo")));
  const auto gru = run_bigru(p.child("gru"), attended);
  out.contextual_tokens = gru.sequence;
  out.sentence = ad::affine(gru.last, p("out_W"), p("out_b"));
  return out;
}

}  // namespace hvsarn
