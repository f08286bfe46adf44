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

// Bidirectional GRU with hidden width h per direction.
//
//   z = sigmoid(x Wz + h Uz + bz)     r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + (r * h) Un + bn)  h' = z * h + (1 - z) * n

#include <string>
#include <vector>

#include "hvsarn/autodiff.hpp"
#include "hvsarn/params.hpp"

namespace hvsarn {

template <class S>
void init_gru_direction(ParamInit<S> p, int input_dim, int hidden) {
  p.weight("W_ih", input_dim, 3 * hidden);
  p.weight("U_zr", hidden, 2 * hidden);
  p.weight("U_n", hidden, hidden);
  p.bias("b", 3 * hidden);
}

template <class S>
void init_bigru(ParamInit<S> p, int input_dim, int hidden) {
  init_gru_direction(p.child("fwd"), input_dim, hidden);
  init_gru_direction(p.child("bwd"), input_dim, hidden);
}

template <class S>
struct GruRun {
  ad::Var<S> sequence;  // [T x h], row t is the state after consuming x_t
  ad::Var<S> last;      // [1 x h], state after the final consumed step
};

template <class S>
GruRun<S> run_gru(const Scope<S>& p, const ad::Var<S>& inputs, bool reverse) {
  auto& tape = p.tape();
  const auto W_ih = p("W_ih");
  const auto U_zr = p("U_zr");
  const auto U_n = p("U_n");
  const auto hidden = U_n.rows();
  const auto gx = ad::affine(inputs, W_ih, p("b"));
  const auto gx_z = ad::slice_cols(gx, 0, hidden);
  const auto gx_r = ad::slice_cols(gx, hidden, hidden);
  const auto gx_n = ad::slice_cols(gx, 2 * hidden, hidden);

  const auto steps = inputs.rows();
  std::vector<ad::Var<S>> states(static_cast<std::size_t>(steps));
  auto h = tape.constant(Matrix<S>::Zero(1, hidden));
  for (Eigen::Index i = 0; i < steps; ++i) {
    const Eigen::Index t = reverse ? steps - 1 - i : i;
    const auto hzr = ad::matmul(h, U_zr);
    const auto z = ad::sigmoid(ad::add(ad::slice_rows(gx_z, t, 1), ad::slice_cols(hzr, 0, hidden)));
    const auto r = ad::sigmoid(ad::add(ad::slice_rows(gx_r, t, 1), ad::slice_cols(hzr, hidden, hidden)));
    const auto n = ad::tanh(ad::add(ad::slice_rows(gx_n, t, 1), ad::matmul(ad::hadamard(r, h), U_n)));
    h = ad::gated_mix(z, h, n);
    states[static_cast<std::size_t>(t)] = h;
  }
  return {ad::stack_rows(states), h};
}

template <class S>
struct BiGruRun {
  ad::Var<S> sequence;  // [T x 2h], forward then backward state per step
  ad::Var<S> last;      // [1 x 2h], final forward state and final backward state
};

template <class S>
BiGruRun<S> run_bigru(const Scope<S>& p, const ad::Var<S>& inputs) {
  const auto fwd = run_gru(p.child("fwd"), inputs, false);
  const auto bwd = run_gru(p.child("bwd"), inputs, true);
  return {ad::concat_cols(fwd.sequence, bwd.sequence), ad::concat_cols(fwd.last, bwd.last)};
}

}  // namespace hvsarn
