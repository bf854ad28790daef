// Copyright 2026 The coop_predict Authors
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

#ifndef COOP__AUTODIFF__TENSOR_HPP_
#define COOP__AUTODIFF__TENSOR_HPP_

#include "coop/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coop::ad
{
/// Dense row-major 2-D array; the shape is (rows, cols). Scalars are 1x1.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename T>
class Tape;

template <typename T>
class ParamStore;

/// Handle to a value recorded on a Tape.
template <typename T>
class Var
{
public:
  Var() = default;
  Var(Tape<T> * tape, int id) : tape_(tape), id_(id) {}

  const Matrix<T> & value() const { return tape_->value(id_); }
  /// Gradient after backward(); an empty matrix when none reached this value.
  const Matrix<T> & grad() const { return tape_->grad_or_empty(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  T item() const { return value()(0, 0); }
  Tape<T> * tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

private:
  Tape<T> * tape_{nullptr};
  int id_{-1};
};

/// Named trainable tensor with its Adam moments.
template <typename T>
struct Parameter
{
  std::string name;
  Matrix<T> value;
  Matrix<T> adam_m;
  Matrix<T> adam_v;
  std::int64_t adam_step{0};
};

/// Ordered, uniquely named parameter collection. References stay valid across `add`.
template <typename T>
class ParamStore
{
public:
  Parameter<T> & add(std::string name, Matrix<T> value)
  {
    if (index_.contains(name)) {
      throw ConfigError("duplicate parameter name '" + name + "'");
    }
    index_.emplace(name, params_.size());
    Parameter<T> p;
    p.name = std::move(name);
    p.adam_m = Matrix<T>::Zero(value.rows(), value.cols());
    p.adam_v = Matrix<T>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    params_.push_back(std::move(p));
    return params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T> & operator[](std::size_t i) { return params_[i]; }
  const Parameter<T> & operator[](std::size_t i) const { return params_[i]; }

  std::optional<std::size_t> index_of(std::string_view name) const
  {
    auto it = index_.find(name);
    if (it == index_.end()) {
      return std::nullopt;
    }
    return it->second;
  }
  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }

  const Parameter<T> & at(std::string_view name) const { return params_[require(name)]; }
  Parameter<T> & at(std::string_view name) { return params_[require(name)]; }

  std::size_t total_elements() const
  {
    std::size_t n = 0;
    for (const auto & p : params_) {
      n += static_cast<std::size_t>(p.value.size());
    }
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const
  {
    ParamStore<U> out;
    for (const auto & p : params_) {
      auto & q = out.add(p.name, p.value.template cast<U>());
      q.adam_m = p.adam_m.template cast<U>();
      q.adam_v = p.adam_v.template cast<U>();
      q.adam_step = p.adam_step;
    }
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

private:
  std::size_t require(std::string_view name) const
  {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw MissingWeight("no parameter named '" + std::string(name) + "'");
    }
    return it->second;
  }

  std::deque<Parameter<T>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Per-parameter gradient buffers aligned with a ParamStore.
template <typename T>
using GradientSet = std::vector<Matrix<T>>;

template <typename T>
GradientSet<T> zero_gradients(const ParamStore<T> & store)
{
  GradientSet<T> g;
  g.reserve(store.size());
  for (const auto & p : store) {
    g.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
  }
  return g;
}

/// Computation record for reverse-mode differentiation. Single owner; not thread-safe.
/// Values are appended in execution order, so the node list is already topologically sorted.
template <typename T>
class Tape
{
public:
  using BackwardFn = std::function<void(Tape &, const Matrix<T> & out_grad)>;

  explicit Tape(bool strict_finite = false) : strict_finite_(strict_finite) {}

  /// With gradients disabled, parameter leaves are recorded as constants and no backward rules are kept.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }
  Tape(const Tape &) = delete;
  Tape & operator=(const Tape &) = delete;

  Var<T> constant(Matrix<T> value) { return push(std::move(value), false, nullptr); }

  /// Leaf that receives a gradient.
  Var<T> variable(Matrix<T> value) { return push(std::move(value), true, nullptr); }

  /// Leaf bound to a stored parameter; repeated calls return the same node.
  Var<T> param(const ParamStore<T> & store, std::size_t index)
  {
    if (store_ != nullptr && store_ != &store) {
      throw ConfigError("a tape can bind parameters from one store only");
    }
    if (store_ == nullptr) {
      store_ = &store;
      param_nodes_.assign(store.size(), -1);
    }
    if (index >= param_nodes_.size()) {
      param_nodes_.resize(store.size(), -1);
    }
    if (param_nodes_[index] >= 0) {
      return Var<T>(this, param_nodes_[index]);
    }
    Node n;
    n.external = &store[index].value;
    n.requires_grad = grad_enabled_;
    n.param_index = static_cast<int>(index);
    nodes_.push_back(std::move(n));
    param_nodes_[index] = static_cast<int>(nodes_.size()) - 1;
    return Var<T>(this, param_nodes_[index]);
  }

  Var<T> param(const ParamStore<T> & store, std::string_view name)
  {
    const auto idx = store.index_of(name);
    if (!idx) {
      throw MissingWeight("no parameter named '" + std::string(name) + "'");
    }
    return param(store, *idx);
  }

  /// Records an operation result. `fn` is called during backward with the output gradient.
  Var<T> record(Matrix<T> value, bool requires_grad, BackwardFn fn)
  {
    if (strict_finite_ && !value.allFinite()) {
      throw NonFiniteDetected("non-finite value produced at tape node " + std::to_string(nodes_.size()));
    }
    return push(std::move(value), requires_grad, requires_grad ? std::move(fn) : nullptr);
  }

  const Matrix<T> & value(int id) const
  {
    const Node & n = nodes_[static_cast<std::size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Mutable gradient, zero-initialised on first access.
  Matrix<T> & grad(int id)
  {
    Node & n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
      const Matrix<T> & v = value(id);
      n.grad = Matrix<T>::Zero(v.rows(), v.cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  const Matrix<T> & grad_or_empty(int id) const
  {
    static const Matrix<T> empty;
    const Node & n = nodes_[static_cast<std::size_t>(id)];
    return n.has_grad ? n.grad : empty;
  }

  /// Runs the recorded backward rules from a scalar loss, then releases them.
  void backward(const Var<T> & loss)
  {
    if (loss.tape() != this) {
      throw ConfigError("loss belongs to another tape");
    }
    const Matrix<T> & v = value(loss.id());
    if (v.rows() != 1 || v.cols() != 1) {
      throw NotScalar(
        "backward needs a 1x1 loss, got " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
    }
    grad(loss.id())(0, 0) += T(1);
    for (int id = loss.id(); id >= 0; --id) {
      Node & n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward && n.has_grad) {
        n.backward(*this, n.grad);
      }
    }
    for (auto & n : nodes_) {
      n.backward = nullptr;
    }
  }

  /// Adds gradients of every bound parameter into `into` (aligned with the store).
  void accumulate_param_grads(GradientSet<T> & into, T scale = T(1)) const
  {
    for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
      const int id = param_nodes_[i];
      if (id < 0) {
        continue;
      }
      const Node & n = nodes_[static_cast<std::size_t>(id)];
      if (n.has_grad) {
        into[i] += scale * n.grad;
      }
    }
  }

  /// Gradient of a bound parameter, or nullptr when it was not reached.
  const Matrix<T> * param_grad(std::size_t index) const
  {
    if (index >= param_nodes_.size() || param_nodes_[index] < 0) {
      return nullptr;
    }
    const Node & n = nodes_[static_cast<std::size_t>(param_nodes_[index])];
    return n.has_grad ? &n.grad : nullptr;
  }

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node
  {
    Matrix<T> value;
    const Matrix<T> * external{nullptr};
    Matrix<T> grad;
    bool requires_grad{false};
    bool has_grad{false};
    int param_index{-1};
    BackwardFn backward;
  };

  Var<T> push(Matrix<T> value, bool requires_grad, BackwardFn fn)
  {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::deque<Node> nodes_;
  const ParamStore<T> * store_{nullptr};
  std::vector<int> param_nodes_;
  bool strict_finite_{false};
  bool grad_enabled_{true};
};

}  // namespace coop::ad

#endif  // COOP__AUTODIFF__TENSOR_HPP_
