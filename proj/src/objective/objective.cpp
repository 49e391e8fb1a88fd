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

#include "maft/objective.hpp"

#include <algorithm>
#include <cmath>

#include "maft/error.hpp"

namespace maft {
namespace {

void RequireMasks(const Tensor& m, const char* what) {
  Check(m.rank() == 3, ErrorCode::kDimension,
        std::string(what) + " must be [N,H,W], got " + ShapeString(m.shape()));
}

}  // namespace

Tensor IouMatrix(const Tensor& gt_masks, const Tensor& proposals) {
  RequireMasks(gt_masks, "gt masks");
  RequireMasks(proposals, "proposals");
  Check(gt_masks.dim(1) == proposals.dim(1) &&
            gt_masks.dim(2) == proposals.dim(2),
        ErrorCode::kDimension,
        "mask sizes differ: " + ShapeString(gt_masks.shape()) + " vs " +
            ShapeString(proposals.shape()));
  const std::size_t k = gt_masks.dim(0), n = proposals.dim(0);
  const std::size_t hw = gt_masks.dim(1) * gt_masks.dim(2);
  Tensor s({k, n});
  for (std::size_t a = 0; a < k; ++a) {
    const double* g = gt_masks.data() + a * hw;
    for (std::size_t b = 0; b < n; ++b) {
      const double* p = proposals.data() + b * hw;
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        const bool gi = g[i] >= 0.5, pi = p[i] >= 0.5;
        inter += gi && pi;
        uni += gi || pi;
      }
      s.at(a, b) = uni == 0 ? 0.0
                            : static_cast<double>(inter) /
                                  static_cast<double>(uni);
    }
  }
  return s;
}

NormalizedIou MinMaxNormalize(const Tensor& s, bool per_row) {
  Check(s.rank() == 2, ErrorCode::kDimension, "IoU matrix must be 2-D");
  NormalizedIou out{Tensor(s.shape(), s.dtype()), false};
  if (s.size() == 0) {
    out.degenerate = true;
    return out;
  }
  auto normalize = [&](std::size_t begin, std::size_t end) {
    const auto [lo, hi] =
        std::minmax_element(s.data() + begin, s.data() + end);
    const double mn = *lo, mx = *hi;
    if (mx == mn) return false;
    for (std::size_t i = begin; i < end; ++i) {
      out.values[i] = (s[i] - mn) / (mx - mn);
    }
    return true;
  };
  if (!per_row) {
    out.degenerate = !normalize(0, s.size());
  } else {
    bool any = false;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      any = normalize(r * s.cols(), (r + 1) * s.cols()) || any;
    }
    out.degenerate = !any;
  }
  out.values.Quantize();
  return out;
}

Var SelectScores(Var scores, std::span<const std::size_t> classes) {
  return ops::Transpose(ops::GatherColumns(scores, classes));
}

Tensor SelectScores(const Tensor& scores,
                    std::span<const std::size_t> classes) {
  Tape tape(scores.dtype(), false);
  return SelectScores(tape.Constant(scores), classes).value();
}

double SmoothL1(double x, double y) {
  const double d = std::abs(x - y);
  return d < 1.0 ? 0.5 * d * d : d - 0.5;
}

AlignmentLoss ParseAlignmentLoss(const std::string& name) {
  if (name == "smooth_l1") return AlignmentLoss::kSmoothL1;
  if (name == "l1") return AlignmentLoss::kL1;
  if (name == "l2") return AlignmentLoss::kL2;
  if (name == "kl") return AlignmentLoss::kKL;
  Fail(ErrorCode::kInvalidArgument,
       "unknown alignment loss '" + name + "' (smooth_l1, l1, l2, kl)");
}

std::string AlignmentLossName(AlignmentLoss loss) {
  switch (loss) {
    case AlignmentLoss::kSmoothL1: return "smooth_l1";
    case AlignmentLoss::kL1: return "l1";
    case AlignmentLoss::kL2: return "l2";
    case AlignmentLoss::kKL: return "kl";
  }
  return "smooth_l1";
}

Var MaskAwareLoss(Var selected, const Tensor& target, AlignmentLoss loss) {
  Check(selected.value().shape() == target.shape(), ErrorCode::kDimension,
        "mask-aware loss shapes differ: " +
            ShapeString(selected.value().shape()) + " vs " +
            ShapeString(target.shape()));
  Var t = selected.tape()->Constant(target);
  switch (loss) {
    case AlignmentLoss::kSmoothL1: return ops::SmoothL1Mean(selected, t);
    case AlignmentLoss::kL1: return ops::L1Mean(selected, t);
    case AlignmentLoss::kL2: return ops::L2Mean(selected, t);
    case AlignmentLoss::kKL: return ops::RowKLMean(selected, t);
  }
  return ops::SmoothL1Mean(selected, t);
}

Var SelfDistillationLoss(Var student, const Tensor& teacher) {
  Check(student.value().shape() == teacher.shape(), ErrorCode::kDimension,
        "distillation shapes differ: " + ShapeString(student.value().shape()) +
            " vs " + ShapeString(teacher.shape()));
  return ops::SmoothL1Mean(student, student.tape()->Constant(teacher));
}

LossBreakdown TotalLoss(double l_ma, double l_dis, double lambda) {
  Check(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be >= 0");
  return {l_ma, l_dis, lambda, l_ma + lambda * l_dis};
}

Var TotalLoss(Var l_ma, Var l_dis, double lambda) {
  Check(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be >= 0");
  return ops::Add(l_ma, ops::Scale(l_dis, lambda));
}

}  // namespace maft
