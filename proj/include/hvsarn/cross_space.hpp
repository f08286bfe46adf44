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

// Visual-to-semantic and semantic-to-visual enhancement between the two
// graphs of one level. For target node k and source nodes i of the same
// graph:
//
//   v2s:  f_k = sum_i softmax_i(W1f [v_i, s_k]) (v_i W2f),   s~_k = [s_k, f_k] Pvs
//   s2v:  f_k = sum_i softmax_i(W3f [s_i, v_k]) (s_i W4f),   v~_k = [v_k, f_k] Psv
//
// W1f/W3f are [2D x 1]: rows [0, D) act on the source, rows [D, 2D) on the
// target. The target term is constant over i and so cancels in the softmax.

#include <stdexcept>
#include <string>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

template <class S>
void init_cross_space(ParamInit<S> p, int dim) {
  p.weight("W1_f", 2 * dim, 1);
  p.weight("W2_f", dim, dim);
  p.weight("W3_f", 2 * dim, 1);
  p.weight("W4_f", dim, dim);
  p.weight("P_vs", 2 * dim, dim);
  p.weight("P_sv", 2 * dim, dim);
}

template <class S>
struct CrossSpaceResult {
  ad::Var<S> enhanced;  // [G*K x D], after projection
  ad::Var<S> context;   // f, [G*K x D], before projection
  ad::Var<S> weights;   // [G*K*K x 1], pairwise layout
};

namespace detail {

template <class S>
CrossSpaceResult<S> enhance(const ad::Var<S>& source, const ad::Var<S>& target, int group, const ad::Var<S>& score_w,
                            const ad::Var<S>& value_w, const ad::Var<S>& projection, const char* op) {
  if (source.rows() != target.rows()) throw std::invalid_argument(std::string(op) + ": node count mismatch");
  if (group < 1 || source.rows() % group != 0) throw std::invalid_argument(std::string(op) + ": bad group size");
  const auto dim = source.cols();
  const auto source_score = ad::matmul(source, ad::slice_rows(score_w, 0, dim));
  const auto target_score = ad::matmul(target, ad::slice_rows(score_w, dim, target.cols()));
  const auto weights = ad::pair_softmax(ad::pair_sum(target_score, source_score, group), group, false);
  const auto context = ad::pair_weighted_sum(weights, ad::matmul(source, value_w), group);
  return {ad::matmul(ad::concat_cols(target, context), projection), context, weights};
}

}  // namespace detail

template <class S>
CrossSpaceResult<S> visual_to_semantic(const Scope<S>& p, const ad::Var<S>& visual, const ad::Var<S>& semantic,
                                       int group, AttentionTrace<S>* trace = nullptr,
                                       const std::string& site = "cross") {
  auto out = detail::enhance(visual, semantic, group, p("W1_f"), p("W2_f"), p("P_vs"), "visual_to_semantic");
  record_attention(trace, site + ".v2s", AttentionLayout::pairwise, group, out.weights);
  return out;
}

template <class S>
CrossSpaceResult<S> semantic_to_visual(const Scope<S>& p, const ad::Var<S>& semantic, const ad::Var<S>& visual,
                                       int group, AttentionTrace<S>* trace = nullptr,
                                       const std::string& site = "cross") {
  auto out = detail::enhance(semantic, visual, group, p("W3_f"), p("W4_f"), p("P_sv"), "semantic_to_visual");
  record_attention(trace, site + ".s2v", AttentionLayout::pairwise, group, out.weights);
  return out;
}

}  // namespace hvsarn
