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

#ifndef MAFT_OPTIM_HPP_
#define MAFT_OPTIM_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "maft/autograd.hpp"
#include "maft/tensor.hpp"

namespace maft {

struct AdamWOptions {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamWState {
  struct Moments {
    Tensor m;
    Tensor v;
  };
  std::int64_t step = 0;
  std::map<std::string, Moments, std::less<>> moments;
};

// One AdamW update. Decay is decoupled: p <- p - lr*wd*p first, then the
// bias-corrected Adam step. Parameters with trainable=false, or without an
// entry in grads, are left untouched.
void AdamWStep(ParameterSet& params, const Gradients& grads,
               const AdamWOptions& options, AdamWState& state);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double h);

// |a - b| / max(|a|, |b|, floor).
double RelativeError(double analytic, double numeric, double floor = 1e-8);

}  // namespace maft

#endif  // MAFT_OPTIM_HPP_
