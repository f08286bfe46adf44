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

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value on the tape is a 2-D matrix; vectors are 1 x d rows.
//
// "Grouped" ops treat a [G*K x d] matrix as G consecutive blocks of K rows,
// one block per graph. "Pair" ops address rows (g, k, i) of a [G*K*K x d]
// matrix laid out as g-major, then target k, then source i.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hvsarn {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace ad {

template <class S>
class Tape;

template <class S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, int id) : tape_(tape), id_(id) {}

  const Matrix<S>& value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<S>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<S>* tape_ = nullptr;
  int id_ = -1;
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix<S>& grad)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Matrix<S> value) { return push(std::move(value), false, nullptr); }
  Var<S> variable(Matrix<S> value) { return push(std::move(value), true, nullptr); }

  // Records an op result. The backward closure runs only if some input
  // requires a gradient.
  Var<S> record(Matrix<S> value, std::initializer_list<Var<S>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }
  Var<S> record(Matrix<S> value, const std::vector<Var<S>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id()].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  const Matrix<S>& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // Gradient of the last backward() root w.r.t. node `id`; empty if the node
  // did not influence the root.
  const Matrix<S>& grad(int id) const { return nodes_[id].grad; }

  // Adds `delta` into the gradient buffer of `v` (no-op for constants).
  template <class Derived>
  void accumulate(const Var<S>& v, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  // Gradient buffer for in-place accumulation by hand-written backward code.
  Matrix<S>* grad_buffer(const Var<S>& v) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return nullptr;
    if (n.grad.size() == 0) n.grad = Matrix<S>::Zero(n.value.rows(), n.value.cols());
    return &n.grad;
  }

  void backward(const Var<S>& root) {
    if (root.rows() != 1 || root.cols() != 1) {
      throw std::invalid_argument("backward root must be a 1x1 scalar");
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.id()].grad = Matrix<S>::Ones(1, 1);
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      // Inputs always precede their consumer, so a closure never writes to
      // the buffer it reads.
      if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<S> value;
    Matrix<S> grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var<S> push(Matrix<S> value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix<S>(), needs_grad, std::move(backward)});
    return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <class S>
inline void check_same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

inline void check_groups(Eigen::Index rows, int group, const char* op) {
  if (group <= 0 || rows % group != 0) {
    throw std::invalid_argument(std::string(op) + ": rows not divisible by group size");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear algebra.

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix<S> out;
  out.noalias() = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    if (t.needs_grad(a.id())) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b.id())) t.accumulate(b, a.value().transpose() * g);
  });
}

// a * b^T
template <class S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Matrix<S> out;
  out.noalias() = a.value() * b.value().transpose();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    if (t.needs_grad(a.id())) t.accumulate(a, g * b.value());
    if (t.needs_grad(b.id())) t.accumulate(b, g.transpose() * a.value());
  });
}

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b, const Var<S>& c) {
  return add(add(a, b), c);
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

// Adds the 1 x d row `b` to every row of `a`.
template <class S>
Var<S> add_row(const Var<S>& a, const Var<S>& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw std::invalid_argument("add_row: bias shape mismatch");
  Matrix<S> out = a.value();
  out.rowwise() += b.value().row(0);
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b.id())) t.accumulate(b, g.colwise().sum());
  });
}

template <class S>
Var<S> hadamard(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "hadamard");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape<S>& t, const Matrix<S>& g) {
    if (t.needs_grad(a.id())) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b.id())) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <class S>
Var<S> scale(const Var<S>& a, S factor) {
  return a.tape()->record(a.value() * factor, {a}, [a, factor](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, g * factor);
  });
}

template <class S>
Var<S> tanh(const Var<S>& a) {
  Matrix<S> out = a.value().array().tanh().matrix();
  Matrix<S> y = out;
  return a.tape()->record(std::move(out), {a}, [a, y = std::move(y)](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, (g.array() * (S(1) - y.array().square())).matrix());
  });
}

template <class S>
inline S sigmoid_scalar(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <class S>
Var<S> sigmoid(const Var<S>& a) {
  Matrix<S> out = a.value().unaryExpr([](S x) { return sigmoid_scalar(x); });
  Matrix<S> y = out;
  return a.tape()->record(std::move(out), {a}, [a, y = std::move(y)](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, (g.array() * y.array() * (S(1) - y.array())).matrix());
  });
}

// gate * keep + (1 - gate) * candidate
template <class S>
Var<S> gated_mix(const Var<S>& gate, const Var<S>& keep, const Var<S>& candidate) {
  detail::check_same_shape(gate, keep, "gated_mix");
  detail::check_same_shape(gate, candidate, "gated_mix");
  Matrix<S> out = (gate.value().array() * keep.value().array() +
                   (S(1) - gate.value().array()) * candidate.value().array())
                      .matrix();
  return gate.tape()->record(std::move(out), {gate, keep, candidate},
                             [gate, keep, candidate](Tape<S>& t, const Matrix<S>& g) {
                               const auto& z = gate.value().array();
                               if (t.needs_grad(gate.id())) {
                                 t.accumulate(gate, (g.array() * (keep.value().array() - candidate.value().array())).matrix());
                               }
                               t.accumulate(keep, (g.array() * z).matrix());
                               t.accumulate(candidate, (g.array() * (S(1) - z)).matrix());
                             });
}

// ---------------------------------------------------------------------------
// Shape manipulation.

template <class S>
Var<S> concat_cols(const Var<S>& a, const Var<S>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row count mismatch");
  const auto ca = a.cols();
  const auto cb = b.cols();
  Matrix<S> out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, g.leftCols(ca));
    t.accumulate(b, g.rightCols(cb));
  });
}

template <class S>
Var<S> slice_rows(const Var<S>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows: out of range");
  return a.tape()->record(a.value().middleRows(start, count), {a},
                          [a, start, count](Tape<S>& t, const Matrix<S>& g) {
                            if (Matrix<S>* buf = t.grad_buffer(a)) buf->middleRows(start, count) += g;
                          });
}

template <class S>
Var<S> slice_cols(const Var<S>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols: out of range");
  return a.tape()->record(a.value().middleCols(start, count), {a},
                          [a, start, count](Tape<S>& t, const Matrix<S>& g) {
                            if (Matrix<S>* buf = t.grad_buffer(a)) buf->middleCols(start, count) += g;
                          });
}

template <class S>
Var<S> stack_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("stack_rows: column mismatch");
    rows += p.rows();
  }
  Matrix<S> out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts](Tape<S>& t, const Matrix<S>& g) {
    Eigen::Index r0 = 0;
    for (const auto& p : parts) {
      t.accumulate(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

// Row g of `a` becomes rows [g*times, (g+1)*times) of the output.
template <class S>
Var<S> repeat_rows(const Var<S>& a, int times) {
  if (times <= 0) throw std::invalid_argument("repeat_rows: times must be positive");
  const auto groups = a.rows();
  Matrix<S> out(groups * times, a.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    out.middleRows(g * times, times).rowwise() = a.value().row(g);
  }
  return a.tape()->record(std::move(out), {a}, [a, times, groups](Tape<S>& t, const Matrix<S>& g) {
    Matrix<S> d(groups, g.cols());
    for (Eigen::Index i = 0; i < groups; ++i) d.row(i) = g.middleRows(i * times, times).colwise().sum();
    t.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------
// Grouped reductions and attention.

// Softmax over each consecutive block of `group` entries of a column vector.
template <class S>
Var<S> group_softmax(const Var<S>& logits, int group) {
  if (logits.cols() != 1) throw std::invalid_argument("group_softmax: expects a column vector");
  detail::check_groups(logits.rows(), group, "group_softmax");
  const auto n = logits.rows() / group;
  Matrix<S> y(logits.rows(), 1);
  for (Eigen::Index b = 0; b < n; ++b) {
    auto seg = logits.value().middleRows(b * group, group);
    const S mx = seg.maxCoeff();
    auto e = (seg.array() - mx).exp();
    y.middleRows(b * group, group) = (e / e.sum()).matrix();
  }
  Matrix<S> yc = y;
  return logits.tape()->record(std::move(y), {logits},
                               [logits, group, n, y = std::move(yc)](Tape<S>& t, const Matrix<S>& g) {
                                 Matrix<S> d(y.rows(), 1);
                                 for (Eigen::Index b = 0; b < n; ++b) {
                                   auto ys = y.middleRows(b * group, group).array();
                                   auto gs = g.middleRows(b * group, group).array();
                                   const S dot = (ys * gs).sum();
                                   d.middleRows(b * group, group) = (ys * (gs - dot)).matrix();
                                 }
                                 t.accumulate(logits, d);
                               });
}

// out[g] = sum_k weights[g*K + k] * values[g*K + k]
template <class S>
Var<S> group_weighted_sum(const Var<S>& weights, const Var<S>& values, int group) {
  if (weights.cols() != 1 || weights.rows() != values.rows()) {
    throw std::invalid_argument("group_weighted_sum: weight/value shape mismatch");
  }
  detail::check_groups(values.rows(), group, "group_weighted_sum");
  const auto n = values.rows() / group;
  Matrix<S> out(n, values.cols());
  for (Eigen::Index b = 0; b < n; ++b) {
    out.row(b).noalias() = weights.value().middleRows(b * group, group).transpose() *
                           values.value().middleRows(b * group, group);
  }
  return weights.tape()->record(std::move(out), {weights, values},
                                [weights, values, group, n](Tape<S>& t, const Matrix<S>& g) {
                                  if (t.needs_grad(weights.id())) {
                                    Matrix<S> dw(weights.rows(), 1);
                                    for (Eigen::Index b = 0; b < n; ++b) {
                                      dw.middleRows(b * group, group).noalias() =
                                          values.value().middleRows(b * group, group) * g.row(b).transpose();
                                    }
                                    t.accumulate(weights, dw);
                                  }
                                  if (t.needs_grad(values.id())) {
                                    Matrix<S> dv(values.rows(), values.cols());
                                    for (Eigen::Index b = 0; b < n; ++b) {
                                      dv.middleRows(b * group, group).noalias() =
                                          weights.value().middleRows(b * group, group) * g.row(b);
                                    }
                                    t.accumulate(values, dv);
                                  }
                                });
}

template <class S>
Var<S> group_mean(const Var<S>& values, int group) {
  detail::check_groups(values.rows(), group, "group_mean");
  const auto n = values.rows() / group;
  Matrix<S> out(n, values.cols());
  for (Eigen::Index b = 0; b < n; ++b) out.row(b) = values.value().middleRows(b * group, group).colwise().mean();
  return values.tape()->record(std::move(out), {values}, [values, group, n](Tape<S>& t, const Matrix<S>& g) {
    Matrix<S> d(values.rows(), values.cols());
    for (Eigen::Index b = 0; b < n; ++b) d.middleRows(b * group, group).rowwise() = g.row(b) / S(group);
    t.accumulate(values, d);
  });
}

// Row (g, k, i) of the output is target[g*K + k] + source[g*K + i].
template <class S>
Var<S> pair_sum(const Var<S>& target, const Var<S>& source, int group) {
  detail::check_same_shape(target, source, "pair_sum");
  detail::check_groups(target.rows(), group, "pair_sum");
  const auto n = target.rows() / group;
  const auto cols = target.cols();
  Matrix<S> out(n * group * group, cols);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (int k = 0; k < group; ++k) {
      const auto base = (b * group + k) * group;
      out.middleRows(base, group) = source.value().middleRows(b * group, group);
      out.middleRows(base, group).rowwise() += target.value().row(b * group + k);
    }
  }
  return target.tape()->record(std::move(out), {target, source},
                               [target, source, group, n, cols](Tape<S>& t, const Matrix<S>& g) {
                                 Matrix<S> dt = Matrix<S>::Zero(target.rows(), cols);
                                 Matrix<S> ds = Matrix<S>::Zero(source.rows(), cols);
                                 for (Eigen::Index b = 0; b < n; ++b) {
                                   for (int k = 0; k < group; ++k) {
                                     const auto base = (b * group + k) * group;
                                     auto block = g.middleRows(base, group);
                                     dt.row(b * group + k) += block.colwise().sum();
                                     ds.middleRows(b * group, group) += block;
                                   }
                                 }
                                 t.accumulate(target, dt);
                                 t.accumulate(source, ds);
                               });
}

// For every target (g, k): softmax of logits (g, k, ·) over sources i. With
// `exclude_self` the source i == k gets weight exactly 0; a target with no
// admissible source gets an all-zero weight row.
template <class S>
Var<S> pair_softmax(const Var<S>& logits, int group, bool exclude_self) {
  if (logits.cols() != 1) throw std::invalid_argument("pair_softmax: expects a column vector");
  detail::check_groups(logits.rows(), group * group, "pair_softmax");
  const auto targets = logits.rows() / group;
  Matrix<S> y = Matrix<S>::Zero(logits.rows(), 1);
  for (Eigen::Index r = 0; r < targets; ++r) {
    const int self = static_cast<int>(r % group);
    S mx = -std::numeric_limits<S>::infinity();
    for (int i = 0; i < group; ++i) {
      if (exclude_self && i == self) continue;
      mx = std::max(mx, logits.value()(r * group + i, 0));
    }
    if (!std::isfinite(mx)) continue;
    S total = 0;
    for (int i = 0; i < group; ++i) {
      if (exclude_self && i == self) continue;
      const S e = std::exp(logits.value()(r * group + i, 0) - mx);
      y(r * group + i, 0) = e;
      total += e;
    }
    y.middleRows(r * group, group) /= total;
  }
  Matrix<S> yc = y;
  return logits.tape()->record(std::move(y), {logits},
                               [logits, group, targets, y = std::move(yc)](Tape<S>& t, const Matrix<S>& g) {
                                 Matrix<S> d(y.rows(), 1);
                                 for (Eigen::Index r = 0; r < targets; ++r) {
                                   auto ys = y.middleRows(r * group, group).array();
                                   auto gs = g.middleRows(r * group, group).array();
                                   const S dot = (ys * gs).sum();
                                   d.middleRows(r * group, group) = (ys * (gs - dot)).matrix();
                                 }
                                 t.accumulate(logits, d);
                               });
}

// out[g*K + k] = sum_i weights(g, k, i) * source[g*K + i]
template <class S>
Var<S> pair_weighted_sum(const Var<S>& weights, const Var<S>& source, int group) {
  detail::check_groups(source.rows(), group, "pair_weighted_sum");
  if (weights.cols() != 1 || weights.rows() != source.rows() * group) {
    throw std::invalid_argument("pair_weighted_sum: weight shape mismatch");
  }
  const auto n = source.rows() / group;
  Matrix<S> out(source.rows(), source.cols());
  for (Eigen::Index b = 0; b < n; ++b) {
    // [K x K] weight block times [K x d] source block.
    Eigen::Map<const Matrix<S>> w(weights.value().data() + b * group * group, group, group);
    out.middleRows(b * group, group).noalias() = w * source.value().middleRows(b * group, group);
  }
  return weights.tape()->record(
      std::move(out), {weights, source}, [weights, source, group, n](Tape<S>& t, const Matrix<S>& g) {
        if (t.needs_grad(weights.id())) {
          Matrix<S> dw(weights.rows(), 1);
          for (Eigen::Index b = 0; b < n; ++b) {
            Eigen::Map<Matrix<S>> d(dw.data() + b * group * group, group, group);
            d.noalias() = g.middleRows(b * group, group) * source.value().middleRows(b * group, group).transpose();
          }
          t.accumulate(weights, dw);
        }
        if (t.needs_grad(source.id())) {
          Matrix<S> ds(source.rows(), source.cols());
          for (Eigen::Index b = 0; b < n; ++b) {
            Eigen::Map<const Matrix<S>> w(weights.value().data() + b * group * group, group, group);
            ds.middleRows(b * group, group).noalias() = w.transpose() * g.middleRows(b * group, group);
          }
          t.accumulate(source, ds);
        }
      });
}

// Row (g, k, i) of the output is target[g*K + k] . source[g*K + i].
template <class S>
Var<S> pair_dot(const Var<S>& target, const Var<S>& source, int group) {
  detail::check_same_shape(target, source, "pair_dot");
  detail::check_groups(target.rows(), group, "pair_dot");
  const auto n = target.rows() / group;
  Matrix<S> out(n * group * group, 1);
  for (Eigen::Index b = 0; b < n; ++b) {
    Eigen::Map<Matrix<S>> block(out.data() + b * group * group, group, group);
    block.noalias() = target.value().middleRows(b * group, group) * source.value().middleRows(b * group, group).transpose();
  }
  return target.tape()->record(std::move(out), {target, source},
                               [target, source, group, n](Tape<S>& t, const Matrix<S>& g) {
                                 Matrix<S> dt(target.rows(), target.cols());
                                 Matrix<S> ds(source.rows(), source.cols());
                                 for (Eigen::Index b = 0; b < n; ++b) {
                                   Eigen::Map<const Matrix<S>> gb(g.data() + b * group * group, group, group);
                                   dt.middleRows(b * group, group).noalias() = gb * source.value().middleRows(b * group, group);
                                   ds.middleRows(b * group, group).noalias() =
                                       gb.transpose() * target.value().middleRows(b * group, group);
                                 }
                                 t.accumulate(target, dt);
                                 t.accumulate(source, ds);
                               });
}

// Row-wise softmax of a dense matrix.
template <class S>
Var<S> row_softmax(const Var<S>& a) {
  Matrix<S> y(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const S mx = a.value().row(r).maxCoeff();
    auto e = (a.value().row(r).array() - mx).exp();
    y.row(r) = (e / e.sum()).matrix();
  }
  Matrix<S> yc = y;
  return a.tape()->record(std::move(y), {a}, [a, y = std::move(yc)](Tape<S>& t, const Matrix<S>& g) {
    Matrix<S> d(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const S dot = y.row(r).dot(g.row(r));
      d.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------
// Losses and reductions.

// -log softmax(logits)[target] for a column vector of logits.
template <class S>
Var<S> softmax_cross_entropy(const Var<S>& logits, Eigen::Index target) {
  if (logits.cols() != 1) throw std::invalid_argument("softmax_cross_entropy: expects a column vector");
  if (target < 0 || target >= logits.rows()) throw std::out_of_range("softmax_cross_entropy: target out of range");
  const auto& x = logits.value();
  const S mx = x.maxCoeff();
  const S lse = mx + std::log((x.array() - mx).exp().sum());
  Matrix<S> p = (x.array() - lse).exp().matrix();
  Matrix<S> out(1, 1);
  out(0, 0) = lse - x(target, 0);
  return logits.tape()->record(std::move(out), {logits},
                               [logits, target, p = std::move(p)](Tape<S>& t, const Matrix<S>& g) {
                                 Matrix<S> d = p;
                                 d(target, 0) -= S(1);
                                 t.accumulate(logits, d * g(0, 0));
                               });
}

template <class S>
Var<S> sum_all(const Var<S>& a) {
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape<S>& t, const Matrix<S>& g) {
    t.accumulate(a, Matrix<S>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

// x * W + b (b broadcast over rows).
template <class S>
Var<S> affine(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  return add_row(matmul(x, w), b);
}

}  // namespace ad
}  // namespace hvsarn
