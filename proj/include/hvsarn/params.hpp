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

// Named parameter tensors and their binding onto an autodiff tape.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hvsarn/autodiff.hpp"
#include "hvsarn/rng.hpp"

namespace hvsarn {

template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix<S> value;
  };

  Matrix<S>& add(const std::string& name, Matrix<S> value) {
    if (index_.count(name) != 0) throw std::invalid_argument("duplicate parameter: " + name);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(value)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  Matrix<S>& at(const std::string& name) { return entries_[index_of(name)].value; }
  const Matrix<S>& at(const std::string& name) const { return entries_[index_of(name)].value; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<T>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class S>
Matrix<S> xavier_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<S> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
  return m;
}

// Helper for module initializers: creates "<prefix>.<field>" tensors.
template <class S>
class ParamInit {
 public:
  ParamInit(ParamStore<S>& store, Rng& rng, std::string prefix)
      : store_(store), rng_(rng), prefix_(std::move(prefix)) {}

  void weight(const std::string& field, Eigen::Index rows, Eigen::Index cols) {
    store_.add(name(field), xavier_uniform<S>(rng_, rows, cols));
  }
  void bias(const std::string& field, Eigen::Index cols) { store_.add(name(field), Matrix<S>::Zero(1, cols)); }

  ParamInit child(const std::string& sub) const { return ParamInit(store_, rng_, name(sub)); }
  std::string name(const std::string& field) const { return prefix_.empty() ? field : prefix_ + "." + field; }

 private:
  ParamStore<S>& store_;
  Rng& rng_;
  std::string prefix_;
};

// Places parameters on a tape on first use. Parameters never requested by a
// forward pass receive an all-zero gradient.
template <class S>
class Binding {
 public:
  Binding(ad::Tape<S>& tape, const ParamStore<S>& store, bool trainable = true)
      : tape_(tape), store_(store), trainable_(trainable), ids_(store.size(), -1) {}

  ad::Var<S> operator()(const std::string& name) {
    const std::size_t idx = store_.index_of(name);
    if (ids_[idx] < 0) {
      const auto& value = store_.entries()[idx].value;
      ids_[idx] = (trainable_ ? tape_.variable(value) : tape_.constant(value)).id();
    }
    return ad::Var<S>(&tape_, ids_[idx]);
  }

  ad::Tape<S>& tape() { return tape_; }
  const ParamStore<S>& store() const { return store_; }

  bool used(std::size_t idx) const { return ids_[idx] >= 0; }

  // Gradients in store order, valid after tape().backward().
  std::vector<Matrix<S>> gradients() const {
    std::vector<Matrix<S>> out;
    out.reserve(store_.size());
    for (std::size_t i = 0; i < store_.size(); ++i) {
      const auto& value = store_.entries()[i].value;
      if (ids_[i] >= 0 && tape_.grad(ids_[i]).size() != 0) {
        out.push_back(tape_.grad(ids_[i]));
      } else {
        out.push_back(Matrix<S>::Zero(value.rows(), value.cols()));
      }
    }
    return out;
  }

 private:
  ad::Tape<S>& tape_;
  const ParamStore<S>& store_;
  bool trainable_;
  std::vector<int> ids_;
};

// Name-prefixed view of a Binding used by module param structs.
template <class S>
class Scope {
 public:
  Scope(Binding<S>& binding, std::string prefix) : binding_(binding), prefix_(std::move(prefix)) {}
  ad::Var<S> operator()(const std::string& field) const {
    return binding_(prefix_.empty() ? field : prefix_ + "." + field);
  }
  Scope child(const std::string& sub) const { return Scope(binding_, prefix_.empty() ? sub : prefix_ + "." + sub); }
  ad::Tape<S>& tape() const { return binding_.tape(); }

 private:
  Binding<S>& binding_;
  std::string prefix_;
};

}  // namespace hvsarn
