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

#ifndef MAFT_OBJECTIVE_HPP_
#define MAFT_OBJECTIVE_HPP_

#include <cstddef>
#include <span>
#include <string>

#include "maft/autograd.hpp"
#include "maft/tensor.hpp"

namespace maft {

// S[k, n] = |gt_k & p_n| / |gt_k | p_n| for binary masks gt [K,H,W] and
// proposals [N,H,W]; an empty union scores 0.
Tensor IouMatrix(const Tensor& gt_masks, const Tensor& proposals);

struct NormalizedIou {
  Tensor values;
  // Set when max == min, in which case values are all zero.
  bool degenerate = false;
};

// Min-max normalisation over the whole matrix, or per row when requested.
// In per-row mode a constant row is zeroed and only flags the result when
// every row is constant.
NormalizedIou MinMaxNormalize(const Tensor& s, bool per_row = false);

// A^c [N,C] -> [K,N] with out[k,n] = A^c[n, classes[k]].
Var SelectScores(Var scores, std::span<const std::size_t> classes);
Tensor SelectScores(const Tensor& scores, std::span<const std::size_t> classes);

double SmoothL1(double x, double y);

enum class AlignmentLoss { kSmoothL1, kL1, kL2, kKL };
AlignmentLoss ParseAlignmentLoss(const std::string& name);
std::string AlignmentLossName(AlignmentLoss loss);

// Mean elementwise alignment between selected scores and normalised IoU.
Var MaskAwareLoss(Var selected, const Tensor& target,
                  AlignmentLoss loss = AlignmentLoss::kSmoothL1);

// Mean SmoothL1 between student and teacher predictions. The teacher enters
// the tape as a constant.
Var SelfDistillationLoss(Var student, const Tensor& teacher);

struct LossBreakdown {
  double l_ma = 0.0;
  double l_dis = 0.0;
  double lambda = 1.0;
  double total = 0.0;
};

LossBreakdown TotalLoss(double l_ma, double l_dis, double lambda = 1.0);
Var TotalLoss(Var l_ma, Var l_dis, double lambda);

}  // namespace maft

#endif  // MAFT_OBJECTIVE_HPP_
