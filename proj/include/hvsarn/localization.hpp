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

// Frame fusion m_t = [v_t, s_t], Bi-GRU context, and a span head: start and
// end distributions over frames, ranked (i < j) pairs, cross-entropy loss.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hvsarn/autodiff.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/gru.hpp"
#include "hvsarn/hierarchy.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

struct ScoredSegment {
  double start = 0.0;  // fraction of the video
  double end = 0.0;
  double score = 0.0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

struct SegmentPrediction {
  std::string query_id;
  std::vector<double> start_logits;
  std::vector<double> end_logits;
  std::vector<ScoredSegment> top_segments;  // score descending
};

template <class S>
void init_localization(ParamInit<S> p, int input_dim, int hidden) {
  init_bigru(p.child("gru"), input_dim, hidden / 2);
  p.weight("start_w", hidden, 1);
  p.weight("end_w", hidden, 1);
}

template <class S>
ad::Var<S> fuse_and_contextualize(const Scope<S>& p, const FrameRepresentations<S>& frames) {
  if (frames.visual.rows() < 1) throw std::invalid_argument("fuse_and_contextualize: no frames");
  return run_bigru(p.child("gru"), ad::concat_cols(frames.visual, frames.semantic)).sequence;
}

template <class S>
struct SpanLogits {
  ad::Var<S> start;  // [T x 1]
  ad::Var<S> end;    // [T x 1]
};

template <class S>
SpanLogits<S> span_logits(const Scope<S>& p, const ad::Var<S>& contextual) {
  return {ad::matmul(contextual, p("start_w")), ad::matmul(contextual, p("end_w"))};
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  const double mx = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (y[i] = std::exp(x[i] - mx));
  for (auto& v : y) v /= total;
  return y;
}

// All pairs (i, j), i < j, scored softmax(start)_i * softmax(end)_j, sorted
// by score descending with ties broken by smaller i, then smaller j. Pair
// (i, j) covers fractions [i / T, (j + 1) / T].
inline SegmentPrediction predict(std::vector<double> start_logits, std::vector<double> end_logits) {
  if (start_logits.size() != end_logits.size() || start_logits.empty()) {
    throw std::invalid_argument("predict: logits must be non-empty and equally long");
  }
  const int T = static_cast<int>(start_logits.size());
  const auto ps = softmax(start_logits);
  const auto pe = softmax(end_logits);
  SegmentPrediction out;
  out.top_segments.reserve(static_cast<std::size_t>(T) * (T - 1) / 2);
  for (int i = 0; i < T; ++i) {
    for (int j = i + 1; j < T; ++j) {
      out.top_segments.push_back({static_cast<double>(i) / T, static_cast<double>(j + 1) / T, ps[i] * pe[j], i, j});
    }
  }
  std::stable_sort(out.top_segments.begin(), out.top_segments.end(),
                   [](const ScoredSegment& a, const ScoredSegment& b) { return a.score > b.score; });
  out.start_logits = std::move(start_logits);
  out.end_logits = std::move(end_logits);
  return out;
}

template <class S>
SegmentPrediction predict(const SpanLogits<S>& logits) {
  auto to_vec = [](const Matrix<S>& m) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = static_cast<double>(m(i, 0));
    return v;
  };
  return predict(to_vec(logits.start.value()), to_vec(logits.end.value()));
}

// Frame targets for the loss: floor(start*T) and min(ceil(end*T) - 1, T - 1).
inline std::pair<int, int> target_frames(const GroundTruthSegment& truth, int num_frames) {
  validate(truth);
  if (num_frames < 1) throw std::invalid_argument("target_frames: T must be positive");
  const int s = start_frame(truth, num_frames);
  const int e = end_frame(truth, num_frames);
  if (s < 0 || s >= num_frames || e < 0 || e < s) {
    throw std::out_of_range("target_frames: segment maps outside frames [0, " + std::to_string(num_frames) +
                            "); T is too small for this annotation");
  }
  return {s, e};
}

template <class S>
ad::Var<S> span_loss(const SpanLogits<S>& logits, const GroundTruthSegment& truth) {
  const auto [s, e] = target_frames(truth, static_cast<int>(logits.start.rows()));
  return ad::add(ad::softmax_cross_entropy(logits.start, s), ad::softmax_cross_entropy(logits.end, e));
}

inline double loss(const SegmentPrediction& prediction, const GroundTruthSegment& truth, int num_frames) {
  if (static_cast<int>(prediction.start_logits.size()) != num_frames) {
    throw std::invalid_argument("loss: logits length differs from T");
  }
  const auto [s, e] = target_frames(truth, num_frames);
  auto nll = [](const std::vector<double>& x, int target) {
    const double mx = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (double v : x) total += std::exp(v - mx);
    return mx + std::log(total) - x[static_cast<std::size_t>(target)];
  };
  return nll(prediction.start_logits, s) + nll(prediction.end_logits, e);
}

}  // namespace hvsarn
