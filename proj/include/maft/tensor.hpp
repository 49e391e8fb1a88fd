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

#ifndef MAFT_TENSOR_HPP_
#define MAFT_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace maft {

enum class DType { kFloat32, kFloat64 };

std::string_view DTypeName(DType dtype);
DType ParseDType(std::string_view name);

using Shape = std::vector<std::size_t>;

std::string ShapeString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

// Dense row-major array. Scalars are held in double precision; a kFloat32
// tensor only ever stores values that are exactly representable as float
// (every kernel rounds its output through Quantize()).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, DType dtype = DType::kFloat64);
  Tensor(Shape shape, std::vector<double> values,
         DType dtype = DType::kFloat64);

  static Tensor Zeros(Shape shape, DType dtype = DType::kFloat64);
  static Tensor Full(Shape shape, double value, DType dtype = DType::kFloat64);
  static Tensor Scalar(double value, DType dtype = DType::kFloat64);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values,
                       DType dtype = DType::kFloat64);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const noexcept { return shape_.empty(); }
  DType dtype() const noexcept { return dtype_; }

  // Rank-2 helpers.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double item() const;

  Tensor AsType(DType dtype) const;
  Tensor Reshape(Shape shape) const;
  void Quantize();

  bool AllFinite() const;
  // Finite or -inf; the only non-finite value an attention bias may hold.
  bool FiniteOrNegInf() const;

 private:
  Shape shape_;
  DType dtype_ = DType::kFloat64;
  std::vector<double> data_;
};

bool BitwiseEqual(const Tensor& a, const Tensor& b);
double MaxAbsDiff(const Tensor& a, const Tensor& b);

inline double RoundToDType(double v, DType dtype) {
  return dtype == DType::kFloat32 ? static_cast<double>(static_cast<float>(v))
                                  : v;
}

}  // namespace maft

#endif  // MAFT_TENSOR_HPP_
