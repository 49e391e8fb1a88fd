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

#include "maft/optim.hpp"

#include <algorithm>
#include <cmath>

#include "maft/error.hpp"

namespace maft {

void AdamWStep(ParameterSet& params, const Gradients& grads,
               const AdamWOptions& options, AdamWState& state) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (Parameter& p : params) {
    if (!p.trainable) continue;
    auto git = grads.find(p.name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    Check(g.shape() == p.value.shape(), ErrorCode::kDimension,
          "gradient for '" + p.name + "' has shape " + ShapeString(g.shape()) +
              ", parameter has " + ShapeString(p.value.shape()));
    auto [it, inserted] = state.moments.try_emplace(p.name);
    if (inserted) {
      it->second.m = Tensor(p.value.shape());
      it->second.v = Tensor(p.value.shape());
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    Check(m.shape() == p.value.shape(), ErrorCode::kDimension,
          "optimizer state shape mismatch for '" + p.name + "'");
    const double decay = 1.0 - options.lr * options.weight_decay;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double w = p.value[i] * decay;
      w -= options.lr * mhat / (std::sqrt(vhat) + options.eps);
      p.value[i] = w;
    }
    p.value.Quantize();
  }
}

Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double h) {
  Check(h > 0.0, ErrorCode::kInvalidArgument, "step h must be positive");
  Tensor grad(x.shape(), DType::kFloat64);
  Tensor probe = x.AsType(DType::kFloat64);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double RelativeError(double analytic, double numeric, double floor) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace maft
