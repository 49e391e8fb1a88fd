/* Copyright 2026 The MAFT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "maft/autograd.hpp"

#include <cstring>
#include <utility>

#include "maft/error.hpp"

namespace maft {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void HashBytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

}  // namespace

Parameter& ParameterSet::Add(std::string name, Tensor value, bool trainable) {
  Check(!index_.contains(name), ErrorCode::kInvalidArgument,
        "duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(value), trainable});
  return params_.back();
}

Parameter& ParameterSet::Get(std::string_view name) {
  auto it = index_.find(name);
  Check(it != index_.end(), ErrorCode::kInvalidArgument,
        "unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter& ParameterSet::Get(std::string_view name) const {
  auto it = index_.find(name);
  Check(it != index_.end(), ErrorCode::kInvalidArgument,
        "unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

const Parameter* ParameterSet::Find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

std::uint64_t ParameterSet::Fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const Parameter& p : params_) {
    HashBytes(h, p.name.data(), p.name.size());
    const unsigned char flag = p.trainable ? 1 : 0;
    HashBytes(h, &flag, 1);
    for (std::size_t d : p.value.shape()) HashBytes(h, &d, sizeof d);
    HashBytes(h, p.value.data(), p.value.size() * sizeof(double));
  }
  return h;
}

const Tensor& Var::value() const { return tape_->value(*this); }

Tape::Tape(DType dtype, bool record) : dtype_(dtype), record_(record) {}

Var Tape::Constant(Tensor value) {
  if (value.dtype() != dtype_) value = value.AsType(dtype_);
  nodes_.push_back(Node{std::move(value), Tensor(), false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Watch(const Parameter& param) {
  if (auto it = watched_.find(param.name); it != watched_.end()) {
    return Var(this, it->second);
  }
  Tensor value = param.value;
  if (value.dtype() != dtype_) value = value.AsType(dtype_);
  const bool tracked = record_ && param.trainable;
  nodes_.push_back(Node{std::move(value), Tensor(), tracked, nullptr,
                        tracked ? param.name : std::string()});
  watched_.emplace(param.name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return Record(std::move(value), std::span<const Var>(inputs.begin(),
                                                       inputs.size()),
                std::move(fn));
}

Var Tape::Record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  value.Quantize();
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      Check(in.tape() == this, ErrorCode::kInvalidArgument,
            "operation mixes values from different tapes");
      needs = needs || nodes_[in.id()].requires_grad;
    }
  }
  nodes_.push_back(
      Node{std::move(value), Tensor(), needs, needs ? std::move(fn) : nullptr,
           {}});
  return Var(this, nodes_.size() - 1);
}

void Tape::Accumulate(Var v, const Tensor& grad) {
  AccumulateScaled(v, grad, 1.0);
}

void Tape::AccumulateScaled(Var v, const Tensor& grad, double scale) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (node.grad.empty()) node.grad = Tensor(node.value.shape(), DType::kFloat64);
  Check(node.grad.size() == grad.size(), ErrorCode::kDimension,
        "gradient shape mismatch");
  double* g = node.grad.data();
  const double* src = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] += scale * src[i];
}

Gradients Tape::Backward(Var loss) {
  Check(loss.tape() == this, ErrorCode::kInvalidArgument,
        "loss was not produced on this tape");
  const Tensor& lv = nodes_[loss.id()].value;
  Check(lv.size() == 1, ErrorCode::kDimension,
        "backward needs a scalar loss, got shape " + ShapeString(lv.shape()));
  for (Node& n : nodes_) n.grad = Tensor();
  if (nodes_[loss.id()].requires_grad) {
    nodes_[loss.id()].grad = Tensor::Full(lv.shape(), 1.0);
  }
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
  Gradients grads;
  for (const auto& [name, id] : watched_) {
    const Node& n = nodes_[id];
    if (n.param.empty()) continue;
    Tensor g = n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
    grads.emplace(name, std::move(g));
  }
  return grads;
}

}  // namespace maft
