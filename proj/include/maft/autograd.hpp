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

#ifndef MAFT_AUTOGRAD_HPP_
#define MAFT_AUTOGRAD_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maft/tensor.hpp"

namespace maft {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

// Ordered collection of uniquely named parameters.
class ParameterSet {
 public:
  Parameter& Add(std::string name, Tensor value, bool trainable = true);
  Parameter& Get(std::string_view name);
  const Parameter& Get(std::string_view name) const;
  const Parameter* Find(std::string_view name) const;

  std::size_t size() const noexcept { return params_.size(); }
  std::vector<Parameter>::iterator begin() { return params_.begin(); }
  std::vector<Parameter>::iterator end() { return params_.end(); }
  std::vector<Parameter>::const_iterator begin() const {
    return params_.begin();
  }
  std::vector<Parameter>::const_iterator end() const { return params_.end(); }

  std::size_t NumScalars() const;
  // FNV-1a over names, trainable flags, shapes and raw value bits.
  std::uint64_t Fingerprint() const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using Gradients = std::map<std::string, Tensor, std::less<>>;

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape. Operations append nodes in execution order;
// Backward() walks them in reverse. A non-recording tape evaluates values
// only, which is how frozen teachers and inference passes run.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(DType dtype = DType::kFloat64, bool record = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DType dtype() const noexcept { return dtype_; }
  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var Constant(Tensor value);
  // Watching the same parameter twice returns the same leaf, so gradients
  // from repeated use accumulate.
  Var Watch(const Parameter& param);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradients for every watched trainable parameter; unreachable ones are
  // zero-filled.
  Gradients Backward(Var loss);

  // For op implementations.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var Record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  void Accumulate(Var v, const Tensor& grad);
  void AccumulateScaled(Var v, const Tensor& grad, double scale);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param;
  };

  DType dtype_;
  bool record_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> watched_;
};

// Differentiable operations. All inputs must live on the same tape; outputs
// are rounded to the tape dtype.
namespace ops {

Var MatMul(Var a, Var b);              // [m,k] x [k,n]
Var MatMulTransposed(Var a, Var b);    // [m,k] x [n,k]^T
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var AddBias(Var x, Var bias);          // [r,c] + [c]
Var Scale(Var x, double factor);
Var SoftmaxRows(Var x);
Var LayerNorm(Var x, Var gain, Var bias, double eps);
Var Gelu(Var x);
Var Sum(Var x);
Var Mean(Var x);
Var Rows(Var x, std::size_t begin, std::size_t count);
Var Cols(Var x, std::size_t begin, std::size_t count);
Var ConcatRows(std::span<const Var> parts);
Var RepeatRows(Var row, std::size_t times);
Var Transpose(Var x);
Var GatherColumns(Var x, std::span<const std::size_t> columns);
Var L2NormalizeRows(Var x);
// Mean cross-entropy against (1 - smoothing) * onehot + smoothing / C.
Var CrossEntropy(Var logits, std::span<const std::size_t> targets,
                 double smoothing = 0.0);

// Elementwise losses, mean-reduced to a scalar.
Var SmoothL1Mean(Var x, Var y);
Var L1Mean(Var x, Var y);
Var L2Mean(Var x, Var y);
// Mean over rows of KL(p || q) with each row renormalized to sum to one;
// x is the prediction q, y the target p.
Var RowKLMean(Var x, Var y);

// Records per-head attention probabilities of a single call.
struct AttentionProbe {
  std::vector<Tensor> probabilities;  // one [m,n] tensor per head
};

// Multi-head scaled dot-product attention over pre-projected inputs:
// per head softmax(q_h k_h^T / sqrt(d_head) + bias) v_h, heads concatenated.
// bias may be null; when present it is [m,n] with entries in {finite, -inf}.
Var Attention(Var q, Var k, Var v, const Tensor* bias, std::size_t heads,
              AttentionProbe* probe = nullptr);

}  // namespace ops

// Plain row-major matrix product used by the ops; counts multiply-accumulates
// against the active FlopTally.
void Gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate = false);

}  // namespace maft

#endif  // MAFT_AUTOGRAD_HPP_
