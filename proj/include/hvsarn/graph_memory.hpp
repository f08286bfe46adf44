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

// Graph memory reasoning over fully connected graphs.
//
// A batch holds G independent graphs of K nodes each: nodes are [G*K x Dn]
// (graph-major) and controllers are [G x D], one query state per graph.
//
// Read (per graph):
//   a_k  = w^T tanh(W1a Q + W2a v_k + ba)        r = sum_k softmax(a)_k v_k
//   Q'   = tanh(W1r Q + U1r r + b1r)             G = sigmoid(W2r Q + U2r r + b2r)
//   Qnew = G * Q + (1 - G) * Q'
// Write (per node k, from the pre-step snapshot):
//   c_k  = sum_{i != k} softmax_i(MLP([v_k, v_i])) v_i   (c_k = 0 when K = 1)
//   v'   = tanh(W1c v_k + U1c Qnew + H1c c_k + b1c)
//   Z    = sigmoid(W2c v_k + U2c Qnew + H2c c_k + b2c)
//   vnew = Z * v_k + (1 - Z) * v'
// Row vectors are multiplied on the right, so every W above is stored
// transposed ([in x out]).

#include <stdexcept>
#include <string>
#include <vector>

#include "hvsarn/attention_trace.hpp"
#include "hvsarn/autodiff.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

template <class S>
void init_graph_memory(ParamInit<S> p, int node_dim, int controller_dim) {
  const int Dn = node_dim, D = controller_dim;
  p.weight("W1_alpha", D, D);
  p.weight("W2_alpha", Dn, D);
  p.bias("b_alpha", D);
  p.weight("w", D, 1);
  p.weight("W1_r", D, D);
  p.weight("U1_r", Dn, D);
  p.bias("b1_r", D);
  p.weight("W2_r", D, D);
  p.weight("U2_r", Dn, D);
  p.bias("b2_r", D);
  // Edge MLP: [v_k, v_i] -> tanh(v_k A + v_i B + b) u, a scalar logit.
  p.weight("mlp_A", Dn, D);
  p.weight("mlp_B", Dn, D);
  p.bias("mlp_b", D);
  p.weight("mlp_u", D, 1);
  p.weight("W1_c", Dn, Dn);
  p.weight("U1_c", D, Dn);
  p.weight("H1_c", Dn, Dn);
  p.bias("b1_c", Dn);
  p.weight("W2_c", Dn, Dn);
  p.weight("U2_c", D, Dn);
  p.weight("H2_c", Dn, Dn);
  p.bias("b2_c", Dn);
}

template <class S>
struct GraphMemoryParams {
  ad::Var<S> W1_alpha, W2_alpha, b_alpha, w;
  ad::Var<S> W1_r, U1_r, b1_r, W2_r, U2_r, b2_r;
  ad::Var<S> mlp_A, mlp_B, mlp_b, mlp_u;
  ad::Var<S> W1_c, U1_c, H1_c, b1_c, W2_c, U2_c, H2_c, b2_c;

  static GraphMemoryParams bind(const Scope<S>& p) {
    return {p("W1_alpha"), p("W2_alpha"), p("b_alpha"), p("w"),     p("W1_r"), p("U1_r"), p("b1_r"),  p("W2_r"),
            p("U2_r"),     p("b2_r"),     p("mlp_A"),   p("mlp_B"), p("mlp_b"), p("mlp_u"), p("W1_c"), p("U1_c"),
            p("H1_c"),     p("b1_c"),     p("W2_c"),    p("U2_c"),  p("H2_c"), p("b2_c")};
  }
};

template <class S>
struct GraphBatch {
  ad::Var<S> nodes;       // [G*K x Dn]
  ad::Var<S> controller;  // [G x D]
  int group = 0;          // K
  int step = 0;
};

template <class S>
struct ReadResult {
  ad::Var<S> content;     // r, [G x Dn]
  ad::Var<S> controller;  // Q^l, [G x D]
  ad::Var<S> weights;     // softmax(alpha), [G*K x 1]
  ad::Var<S> gate;        // G^l, [G x D]
};

template <class S>
struct WriteResult {
  ad::Var<S> nodes;    // [G*K x Dn]
  ad::Var<S> context;  // c, [G*K x Dn]
  ad::Var<S> weights;  // edge softmax, [G*K*K x 1]
  ad::Var<S> gate;     // Z, [G*K x Dn]
};

namespace detail {

template <class S>
void check_batch(const GraphBatch<S>& b, const char* op) {
  if (b.group < 1 || b.nodes.rows() == 0) throw std::invalid_argument(std::string(op) + ": empty node set");
  if (b.nodes.rows() != b.controller.rows() * b.group) {
    throw std::invalid_argument(std::string(op) + ": node rows must equal graphs * group size");
  }
}

}  // namespace detail

template <class S>
ReadResult<S> read(const GraphBatch<S>& state, const GraphMemoryParams<S>& p) {
  detail::check_batch(state, "read");
  const int K = state.group;
  const auto& Q = state.controller;
  const auto& V = state.nodes;
  const auto query_term = ad::repeat_rows(ad::matmul(Q, p.W1_alpha), K);
  const auto pre = ad::add_row(ad::add(query_term, ad::matmul(V, p.W2_alpha)), p.b_alpha);
  const auto alpha = ad::matmul(ad::tanh(pre), p.w);
  const auto weights = ad::group_softmax(alpha, K);
  const auto r = ad::group_weighted_sum(weights, V, K);

  const auto candidate = ad::tanh(ad::add_row(ad::add(ad::matmul(Q, p.W1_r), ad::matmul(r, p.U1_r)), p.b1_r));
  const auto gate = ad::sigmoid(ad::add_row(ad::add(ad::matmul(Q, p.W2_r), ad::matmul(r, p.U2_r)), p.b2_r));
  return {r, ad::gated_mix(gate, Q, candidate), weights, gate};
}

template <class S>
WriteResult<S> write(const GraphBatch<S>& state, const ad::Var<S>& controller_new, const GraphMemoryParams<S>& p) {
  detail::check_batch(state, "write");
  const int K = state.group;
  const auto& V = state.nodes;
  const auto hidden = ad::tanh(ad::pair_sum(ad::matmul(V, p.mlp_A), ad::add_row(ad::matmul(V, p.mlp_B), p.mlp_b), K));
  const auto logits = ad::matmul(hidden, p.mlp_u);
  const auto weights = ad::pair_softmax(logits, K, /*exclude_self=*/true);
  const auto context = ad::pair_weighted_sum(weights, V, K);

  const auto q1 = ad::repeat_rows(ad::matmul(controller_new, p.U1_c), K);
  const auto q2 = ad::repeat_rows(ad::matmul(controller_new, p.U2_c), K);
  const auto candidate =
      ad::tanh(ad::add_row(ad::add(ad::matmul(V, p.W1_c), q1, ad::matmul(context, p.H1_c)), p.b1_c));
  const auto gate = ad::sigmoid(ad::add_row(ad::add(ad::matmul(V, p.W2_c), q2, ad::matmul(context, p.H2_c)), p.b2_c));
  return {ad::gated_mix(gate, V, candidate), context, weights, gate};
}

// `steps` alternating read/write rounds; steps == 0 returns `initial`.
template <class S>
GraphBatch<S> reason(const GraphBatch<S>& initial, const GraphMemoryParams<S>& p, int steps,
                     AttentionTrace<S>* trace = nullptr, const std::string& site = "graph") {
  if (steps < 0) throw std::invalid_argument("reason: steps must be >= 0");
  GraphBatch<S> state = initial;
  for (int l = 0; l < steps; ++l) {
    const auto rd = read(state, p);
    const auto wr = write(state, rd.controller, p);
    record_attention(trace, site + ".read", AttentionLayout::grouped, state.group, rd.weights);
    record_attention(trace, site + ".write", AttentionLayout::pairwise_self, state.group, wr.weights);
    state = GraphBatch<S>{wr.nodes, rd.controller, state.group, state.step + 1};
  }
  return state;
}

// Value-level view of one graph, for callers outside an autodiff context.
template <class S>
struct GraphMemoryState {
  Matrix<S> controller;  // [1 x D]
  Matrix<S> nodes;       // [K x Dn]
  int step = 0;
};

template <class S>
GraphMemoryState<S> reason(const GraphMemoryState<S>& initial, const ParamStore<S>& store, const std::string& prefix,
                           int steps) {
  ad::Tape<S> tape;
  Binding<S> binding(tape, store, /*trainable=*/false);
  const auto params = GraphMemoryParams<S>::bind(Scope<S>(binding, prefix));
  GraphBatch<S> batch{tape.constant(initial.nodes), tape.constant(initial.controller),
                      static_cast<int>(initial.nodes.rows()), initial.step};
  const auto out = reason(batch, params, steps);
  return {out.controller.value(), out.nodes.value(), out.step};
}

}  // namespace hvsarn
