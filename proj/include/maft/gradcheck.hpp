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

#ifndef MAFT_GRADCHECK_HPP_
#define MAFT_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "maft/data.hpp"
#include "maft/encoder.hpp"
#include "maft/report.hpp"

namespace maft {

struct GradCheckOptions {
  EncoderConfig encoder;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double tolerance = 1e-4;
  double step = 1e-6;
  // Single-coordinate checks per parameter, on its largest gradient entries,
  // on top of one directional check.
  std::size_t coordinate_checks = 2;
  double lambda = 1.0;
  // Softmax temperature for the check. Random weights at the toy default
  // (0.01) saturate the class softmax, leaving gradients near 1e-12 that
  // central differences cannot resolve in double precision.
  double temperature = 0.1;
  std::size_t num_classes = 6;
  std::size_t classes_per_scene = 3;
  ProposalSpec proposals;
};

struct GradCheckEntry {
  std::uint64_t seed = 0;
  std::string param;
  std::string probe;  // "direction" or "index <i>"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t params_checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  double temperature = 0.0;
  bool passed = false;

  Report ToReport() const;
};

// Float64 comparison of the analytic gradient of the full fine-tuning
// objective (mask-aware + lambda * distillation) against central differences
// for every parameter of a toy encoder made fully trainable. The student is
// a perturbed copy of the teacher so both loss terms are active.
GradCheckReport RunGradCheck(const GradCheckOptions& options);

}  // namespace maft

#endif  // MAFT_GRADCHECK_HPP_
