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

#include "maft/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <utility>

#include "maft/error.hpp"

namespace maft {

std::string_view DTypeName(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

DType ParseDType(std::string_view name) {
  if (name == "float32") return DType::kFloat32;
  if (name == "float64") return DType::kFloat64;
  Fail(ErrorCode::kFormat, "unknown dtype '" + std::string(name) + "'");
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  return out.str();
}

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(ShapeSize(shape_), 0.0) {
  for (std::size_t d : shape_) {
    Check(d > 0, ErrorCode::kDimension, "tensor extents must be positive");
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(std::move(values)) {
  for (std::size_t d : shape_) {
    Check(d > 0, ErrorCode::kDimension, "tensor extents must be positive");
  }
  Check(data_.size() == ShapeSize(shape_), ErrorCode::kDimension,
        "buffer length " + std::to_string(data_.size()) +
            " does not match shape " + ShapeString(shape_));
  Quantize();
}

Tensor Tensor::Zeros(Shape shape, DType dtype) {
  return Tensor(std::move(shape), dtype);
}

Tensor Tensor::Full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  const double v = RoundToDType(value, dtype);
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::Scalar(double value, DType dtype) {
  return Full({1}, value, dtype);
}

Tensor Tensor::Matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values, DType dtype) {
  return Tensor({rows, cols}, std::vector<double>(values), dtype);
}

std::size_t Tensor::dim(std::size_t axis) const {
  Check(axis < shape_.size(), ErrorCode::kDimension, "axis out of range");
  return shape_[axis];
}

std::size_t Tensor::rows() const {
  Check(rank() == 2, ErrorCode::kDimension,
        "expected a matrix, got shape " + ShapeString(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  Check(rank() == 2, ErrorCode::kDimension,
        "expected a matrix, got shape " + ShapeString(shape_));
  return shape_[1];
}

double Tensor::item() const {
  Check(data_.size() == 1, ErrorCode::kDimension,
        "item() needs a single-element tensor, got " + ShapeString(shape_));
  return data_[0];
}

Tensor Tensor::AsType(DType dtype) const {
  Tensor out = *this;
  out.dtype_ = dtype;
  out.Quantize();
  return out;
}

Tensor Tensor::Reshape(Shape shape) const {
  Check(ShapeSize(shape) == data_.size(), ErrorCode::kDimension,
        "cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

void Tensor::Quantize() {
  if (dtype_ != DType::kFloat32) return;
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

bool Tensor::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::FiniteOrNegInf() const {
  for (double v : data_) {
    if (std::isnan(v) || v == HUGE_VAL) return false;
  }
  return true;
}

bool BitwiseEqual(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  Check(a.shape() == b.shape(), ErrorCode::kDimension,
        "shape mismatch " + ShapeString(a.shape()) + " vs " +
            ShapeString(b.shape()));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace maft
