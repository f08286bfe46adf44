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

// Drop-in alternatives to graph memory reasoning, used for ablations, and
// the dispatcher that picks one by ReasonerKind.
//
//   gcn             V <- tanh(V Ws + mean_{i != k}(v_i) Wn + b)
//   gcn_fusion      same over X = [V, Q] (controller appended to each node)
//   self_attention  V <- V + softmax(V Wq (V Wk)^T / sqrt(Dn)) V Wv
//   memory_network  u <- u + sum_k softmax(u . v_k Wk) v_k Wv
//                   V <- V + tanh(V Ws + u Wu + b)   (no node-to-node edges)

#include <cmath>
#include <stdexcept>
#include <string>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/config.hpp"
#include "hvsarn/graph_memory.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

template <class S>
void init_reasoner(ParamInit<S> p, ReasonerKind kind, int node_dim, int controller_dim) {
  const int Dn = node_dim, D = controller_dim;
  switch (kind) {
    case ReasonerKind::graph_memory:
      init_graph_memory(p, Dn, D);
      return;
    case ReasonerKind::gcn:
      p.weight("Ws", Dn, Dn);
      p.weight("Wn", Dn, Dn);
      p.bias("b", Dn);
      return;
    case ReasonerKind::gcn_fusion:
      p.weight("Ws", Dn + D, Dn);
      p.weight("Wn", Dn + D, Dn);
      p.bias("b", Dn);
      return;
    case ReasonerKind::self_attention:
      p.weight("Wq", Dn, Dn);
      p.weight("Wk", Dn, Dn);
      p.weight("Wv", Dn, Dn);
      return;
    case ReasonerKind::memory_network:
      p.weight("Wk", Dn, D);
      p.weight("Wv", Dn, D);
      p.weight("Ws", Dn, Dn);
      p.weight("Wu", D, Dn);
      p.bias("b", Dn);
      return;
  }
  throw std::invalid_argument("unknown reasoner kind");
}

// Weights 1/(K-1) on every i != k, so pair_weighted_sum yields the mean over
// neighbours (zero when K == 1).
template <class S>
Matrix<S> neighbor_mean_weights(Eigen::Index graphs, int group) {
  Matrix<S> w = Matrix<S>::Zero(graphs * group * group, 1);
  if (group < 2) return w;
  for (Eigen::Index r = 0; r < graphs * group; ++r) {
    const auto self = r % group;
    for (int i = 0; i < group; ++i) {
      if (i != self) w(r * group + i, 0) = S(1) / S(group - 1);
    }
  }
  return w;
}

template <class S>
ad::Var<S> neighbor_mean(const ad::Var<S>& nodes, int group) {
  const auto graphs = nodes.rows() / group;
  return ad::pair_weighted_sum(nodes.tape()->constant(neighbor_mean_weights<S>(graphs, group)), nodes, group);
}

template <class S>
GraphBatch<S> gcn_step(const Scope<S>& p, const GraphBatch<S>& state, bool fuse_controller) {
  const int K = state.group;
  auto x = state.nodes;
  if (fuse_controller) x = ad::concat_cols(x, ad::repeat_rows(state.controller, K));
  const auto agg = neighbor_mean(x, K);
  const auto nodes = ad::tanh(ad::add_row(ad::add(ad::matmul(x, p("Ws")), ad::matmul(agg, p("Wn"))), p("b")));
  return {nodes, state.controller, K, state.step + 1};
}

template <class S>
GraphBatch<S> self_attention_step(const Scope<S>& p, const GraphBatch<S>& state, AttentionTrace<S>* trace,
                                  const std::string& site) {
  const int K = state.group;
  const auto& V = state.nodes;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(V.cols()));
  const auto logits = ad::scale(ad::pair_dot(ad::matmul(V, p("Wq")), ad::matmul(V, p("Wk")), K), inv_sqrt);
  const auto weights = ad::pair_softmax(logits, K, /*exclude_self=*/false);
  record_attention(trace, site + ".self_attention", AttentionLayout::pairwise, K, weights);
  const auto nodes = ad::add(V, ad::pair_weighted_sum(weights, ad::matmul(V, p("Wv")), K));
  return {nodes, state.controller, K, state.step + 1};
}

template <class S>
GraphBatch<S> memory_network_step(const Scope<S>& p, const GraphBatch<S>& state, AttentionTrace<S>* trace,
                                  const std::string& site) {
  const int K = state.group;
  const auto& V = state.nodes;
  auto& tape = p.tape();
  const auto keys = ad::matmul(V, p("Wk"));
  const auto ones = tape.constant(Matrix<S>::Ones(keys.cols(), 1));
  const auto logits = ad::matmul(ad::hadamard(ad::repeat_rows(state.controller, K), keys), ones);
  const auto weights = ad::group_softmax(logits, K);
  record_attention(trace, site + ".memory", AttentionLayout::grouped, K, weights);
  const auto controller = ad::add(state.controller, ad::group_weighted_sum(weights, ad::matmul(V, p("Wv")), K));
  const auto update = ad::tanh(
      ad::add_row(ad::add(ad::matmul(V, p("Ws")), ad::repeat_rows(ad::matmul(controller, p("Wu")), K)), p("b")));
  return {ad::add(V, update), controller, K, state.step + 1};
}

template <class S>
GraphBatch<S> run_reasoner(ReasonerKind kind, const Scope<S>& p, const GraphBatch<S>& initial, int steps,
                           AttentionTrace<S>* trace = nullptr, const std::string& site = "graph") {
  if (steps < 0) throw std::invalid_argument("run_reasoner: steps must be >= 0");
  if (kind == ReasonerKind::graph_memory) return reason(initial, GraphMemoryParams<S>::bind(p), steps, trace, site);
  detail::check_batch(initial, "run_reasoner");
  GraphBatch<S> state = initial;
  for (int l = 0; l < steps; ++l) {
    switch (kind) {
      case ReasonerKind::gcn: state = gcn_step(p, state, false); break;
      case ReasonerKind::gcn_fusion: state = gcn_step(p, state, true); break;
      case ReasonerKind::self_attention: state = self_attention_step(p, state, trace, site); break;
      case ReasonerKind::memory_network: state = memory_network_step(p, state, trace, site); break;
      default: throw std::invalid_argument("unknown reasoner kind");
    }
  }
  return state;
}

}  // namespace hvsarn
