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

#include <string>
#include <vector>

#include "hvsarn/autodiff.hpp"

namespace hvsarn {

// How a recorded weight matrix partitions into probability vectors.
enum class AttentionLayout {
  grouped,        // [G*K x 1], one simplex per block of K
  pairwise,       // [G*K*K x 1], one simplex per (g, k) over all sources
  pairwise_self,  // like pairwise, with the i == k entry fixed at 0
  rows,           // dense matrix, one simplex per row
};

template <class S>
struct AttentionRecord {
  std::string site;
  AttentionLayout layout;
  int group;
  Matrix<S> weights;
};

template <class S>
using AttentionTrace = std::vector<AttentionRecord<S>>;

template <class S>
void record_attention(AttentionTrace<S>* trace, std::string site, AttentionLayout layout, int group,
                      const ad::Var<S>& weights) {
  if (trace != nullptr) trace->push_back({std::move(site), layout, group, weights.value()});
}

}  // namespace hvsarn
