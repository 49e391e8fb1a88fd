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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "maft/autograd.hpp"
#include "maft/error.hpp"
#include "maft/objective.hpp"
#include "maft/optim.hpp"
#include "test_util.hpp"

namespace maft {
namespace {

using testing::RandomBinary;
using testing::RandomTensor;

Tensor Box(std::size_t h, std::size_t w, std::size_t y0, std::size_t x0,
           std::size_t y1, std::size_t x1) {
  Tensor m = Tensor::Zeros({1, h, w});
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) m[y * w + x] = 1.0;
  return m;
}

double Value(Var v) { return v.value().item(); }

TEST(IouMatrix, Examples) {
  const Tensor a = Box(8, 8, 0, 0, 4, 4);
  const Tensor b = Box(8, 8, 0, 2, 4, 6);  // shares a 4x2 strip
  const Tensor far = Box(8, 8, 5, 5, 8, 8);
  EXPECT_DOUBLE_EQ(IouMatrix(a, a)[0], 1.0);
  EXPECT_DOUBLE_EQ(IouMatrix(a, far)[0], 0.0);
  EXPECT_NEAR(IouMatrix(a, b)[0], 8.0 / 24.0, 1e-15);
  EXPECT_NEAR(IouMatrix(a, b)[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(IouMatrix(Tensor::Zeros({1, 3, 3}), Tensor::Zeros({1, 3, 3}))[0], 0.0);
  EXPECT_MAFT_ERROR(IouMatrix(a, Tensor::Zeros({1, 8, 7})), ErrorCode::kDimension);
}

TEST(IouMatrix, PixelCountOracle) {
  const Tensor gt = RandomBinary({3, 6, 7}, 1, 0.4);
  const Tensor pr = RandomBinary({5, 6, 7}, 2, 0.5);
  const Tensor s = IouMatrix(gt, pr);
  ASSERT_EQ(s.shape(), (Shape{3, 5}));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t n = 0; n < 5; ++n) {
      std::size_t inter = 0, uni = 0;
      for (std::size_t p = 0; p < 42; ++p) {
        const bool g = gt[k * 42 + p] > 0.5, q = pr[n * 42 + p] > 0.5;
        inter += g && q;
        uni += g || q;
      }
      const double want = uni == 0 ? 0.0 : double(inter) / double(uni);
      EXPECT_DOUBLE_EQ(s.at(k, n), want);
      EXPECT_GE(s.at(k, n), 0.0);
      EXPECT_LE(s.at(k, n), 1.0);
    }
}

TEST(MinMax, Examples) {
  const NormalizedIou r = MinMaxNormalize(Tensor::Matrix(1, 3, {0.2, 0.5, 0.8}));
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.values[0], 0.0, 1e-15);
  EXPECT_NEAR(r.values[1], 0.5, 1e-15);
  EXPECT_NEAR(r.values[2], 1.0, 1e-15);

  const NormalizedIou c = MinMaxNormalize(Tensor::Full({2, 3}, 0.4));
  EXPECT_TRUE(c.degenerate);
  for (double v : c.values.values()) EXPECT_EQ(v, 0.0);

  const Tensor span = Tensor::Matrix(2, 2, {0.0, 0.25, 1.0, 0.5});
  EXPECT_TRUE(BitwiseEqual(MinMaxNormalize(span).values, span));
}

TEST(MinMax, WholeMatrixVersusPerRow) {
  const Tensor s = Tensor::Matrix(2, 2, {0.1, 0.3, 0.5, 0.9});
  const NormalizedIou whole = MinMaxNormalize(s);
  EXPECT_NEAR(whole.values.at(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(whole.values.at(1, 0), 0.5, 1e-15);
  const NormalizedIou rows = MinMaxNormalize(s, true);
  EXPECT_NEAR(rows.values.at(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(rows.values.at(1, 0), 0.0, 1e-15);
  // One constant row is zeroed without flagging.
  const NormalizedIou mixed =
      MinMaxNormalize(Tensor::Matrix(2, 2, {0.4, 0.4, 0.1, 0.3}), true);
  EXPECT_FALSE(mixed.degenerate);
  EXPECT_EQ(mixed.values.at(0, 0), 0.0);
  EXPECT_TRUE(MinMaxNormalize(Tensor::Matrix(2, 2, {0.4, 0.4, 0.2, 0.2}), true)
                  .degenerate);
}

TEST(MinMax, RangeProperty) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Tensor s = IouMatrix(RandomBinary({3, 5, 5}, seed, 0.4),
                               RandomBinary({6, 5, 5}, seed + 77, 0.5));
    const NormalizedIou r = MinMaxNormalize(s);
    if (r.degenerate) continue;
    const auto [lo, hi] = std::minmax_element(r.values.values().begin(),
                                              r.values.values().end());
    EXPECT_NEAR(*lo, 0.0, 1e-15);
    EXPECT_NEAR(*hi, 1.0, 1e-15);
  }
}

TEST(SelectScores, GatherAndTranspose) {
  const Tensor a = RandomTensor({4, 3}, 5);
  const std::vector<std::size_t> all = {0, 1, 2};
  const Tensor t = SelectScores(a, all);
  ASSERT_EQ(t.shape(), (Shape{3, 4}));
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(t.at(c, n), a.at(n, c));
  const std::vector<std::size_t> one = {2};
  const Tensor r = SelectScores(a, one);
  for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(r[n], a.at(n, 2));
  const std::vector<std::size_t> perm = {2, 0, 1};
  const Tensor p = SelectScores(a, perm);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(p.at(k, n), t.at(perm[k], n));
  const std::vector<std::size_t> bad = {3};
  EXPECT_MAFT_ERROR(SelectScores(a, bad), ErrorCode::kInvalidArgument);
}

TEST(SmoothL1, Examples) {
  EXPECT_DOUBLE_EQ(SmoothL1(0.5, 0.0), 0.125);
  EXPECT_DOUBLE_EQ(SmoothL1(0.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(SmoothL1(3.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(SmoothL1(0.3, 0.3), 0.0);
  // Continuous at the breakpoint.
  EXPECT_NEAR(SmoothL1(1.0 - 1e-9, 0.0), SmoothL1(1.0 + 1e-9, 0.0), 1e-8);
}

TEST(MaskAwareLoss, Examples) {
  Tape tape(DType::kFloat64, false);
  const Tensor target = Tensor::Matrix(2, 2, {0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(Value(MaskAwareLoss(tape.Constant(target), target)), 0.0);
  Tensor off = target;
  for (double& v : off.values()) v += 0.5;
  EXPECT_NEAR(Value(MaskAwareLoss(tape.Constant(off), target)), 0.125, 1e-15);
  const Tensor mixed = Tensor::Matrix(2, 2, {0.1, 0.7, 1.3, 2.4});
  EXPECT_NEAR(Value(MaskAwareLoss(tape.Constant(mixed), target)), 0.53125, 1e-12);
  EXPECT_MAFT_ERROR(MaskAwareLoss(tape.Constant(Tensor::Zeros({2, 3})), target),
                    ErrorCode::kDimension);
}

TEST(MaskAwareLoss, MatchesElementwiseMean) {
  Tape tape(DType::kFloat64, false);
  const Tensor a = RandomTensor({3, 7}, 8, 2.0);
  const Tensor b = RandomTensor({3, 7}, 9, 2.0);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += SmoothL1(a[i], b[i]);
  EXPECT_NEAR(Value(MaskAwareLoss(tape.Constant(a), b)), s / 21.0, 1e-14);
}

TEST(MaskAwareLoss, ColumnPermutationInvariant) {
  Tape tape(DType::kFloat64, false);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = RandomTensor({3, 6}, seed), b = RandomTensor({3, 6}, seed + 40);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(seed));
    Tensor pa({3, 6}), pb({3, 6});
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t n = 0; n < 6; ++n) {
        pa.at(k, n) = a.at(k, perm[n]);
        pb.at(k, n) = b.at(k, perm[n]);
      }
    for (AlignmentLoss loss : {AlignmentLoss::kSmoothL1, AlignmentLoss::kL1,
                               AlignmentLoss::kL2})
      EXPECT_NEAR(Value(MaskAwareLoss(tape.Constant(a), b, loss)),
                  Value(MaskAwareLoss(tape.Constant(pa), pb, loss)), 1e-14);
  }
}

TEST(MaskAwareLoss, NonNegativeZeroIffAligned) {
  Tape tape(DType::kFloat64, false);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = RandomTensor({2, 5}, seed), b = RandomTensor({2, 5}, seed + 9);
    for (AlignmentLoss loss : {AlignmentLoss::kSmoothL1, AlignmentLoss::kL1,
                               AlignmentLoss::kL2}) {
      EXPECT_GT(Value(MaskAwareLoss(tape.Constant(a), b, loss)), 0.0);
      EXPECT_EQ(Value(MaskAwareLoss(tape.Constant(a), a, loss)), 0.0);
    }
  }
}

// Gradient of the loss w.r.t. the selected scores against central differences,
// with points kept away from the |x - y| = 1 breakpoint.
TEST(MaskAwareLoss, GradientMatchesFiniteDifferences) {
  const Tensor target = MinMaxNormalize(RandomTensor({3, 4}, 11)).values;
  Tensor x = RandomTensor({3, 4}, 12, 1.5);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(std::abs(x[i] - target[i]) - 1.0) < 1e-3) x[i] += 0.01;
  for (AlignmentLoss loss : {AlignmentLoss::kSmoothL1, AlignmentLoss::kL1,
                             AlignmentLoss::kL2}) {
    ParameterSet ps;
    ps.Add("x", x);
    Tape tape;
    const Gradients g =
        tape.Backward(MaskAwareLoss(tape.Watch(ps.Get("x")), target, loss));
    const Tensor fd = FiniteDifferenceGradient(
        [&](const Tensor& v) {
          Tape t(DType::kFloat64, false);
          return Value(MaskAwareLoss(t.Constant(v), target, loss));
        },
        x, 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i)
      EXPECT_LE(RelativeError(g.at("x")[i], fd[i], 1e-6), 1e-4)
          << AlignmentLossName(loss) << " at " << i;
  }
}

TEST(AlignmentLoss, NamesRoundTrip) {
  for (AlignmentLoss l : {AlignmentLoss::kSmoothL1, AlignmentLoss::kL1,
                          AlignmentLoss::kL2, AlignmentLoss::kKL})
    EXPECT_EQ(ParseAlignmentLoss(AlignmentLossName(l)), l);
  EXPECT_MAFT_ERROR(ParseAlignmentLoss("huber"), ErrorCode::kInvalidArgument);
}

TEST(SelfDistillation, ExamplesAndTeacherIsConstant) {
  const Tensor teacher = Tensor::Matrix(5, 1, {0.1, 0.2, 0.3, 0.2, 0.2});
  ParameterSet ps;
  ps.Add("s", teacher);
  Tape tape;
  Var s = tape.Watch(ps.Get("s"));
  EXPECT_EQ(Value(SelfDistillationLoss(s, teacher)), 0.0);
  Tensor off = teacher;
  for (double& v : off.values()) v += 0.5;
  Tape t2(DType::kFloat64, false);
  EXPECT_NEAR(Value(SelfDistillationLoss(t2.Constant(off), teacher)), 0.125, 1e-15);

  const Tensor before = teacher;
  ParameterSet ps3;
  ps3.Add("s", RandomTensor({5, 1}, 4));
  Tape t3;
  const Gradients g =
      t3.Backward(SelfDistillationLoss(t3.Watch(ps3.Get("s")), teacher));
  EXPECT_EQ(g.size(), 1u);
  EXPECT_TRUE(BitwiseEqual(teacher, before));
  EXPECT_MAFT_ERROR(SelfDistillationLoss(t2.Constant(Tensor::Zeros({4, 1})), teacher),
                    ErrorCode::kDimension);
}

TEST(TotalLoss, Examples) {
  const LossBreakdown a = TotalLoss(0.2, 0.3);
  EXPECT_DOUBLE_EQ(a.total, 0.5);
  EXPECT_EQ(TotalLoss(0.2, 0.3, 0.0).total, 0.2);
  EXPECT_EQ(TotalLoss(0.0, 0.0).total, 0.0);
  for (double lambda : {0.0, 0.25, 1.0, 3.0}) {
    const LossBreakdown b = TotalLoss(0.37, 0.11, lambda);
    EXPECT_EQ(b.total, 0.37 + lambda * 0.11);
    EXPECT_EQ(b.lambda, lambda);
  }
  EXPECT_MAFT_ERROR(TotalLoss(0.1, 0.1, -1.0), ErrorCode::kInvalidArgument);

  Tape tape(DType::kFloat64, false);
  Var v = TotalLoss(tape.Constant(Tensor::Scalar(0.2)),
                    tape.Constant(Tensor::Scalar(0.3)), 2.0);
  EXPECT_NEAR(Value(v), 0.8, 1e-15);
}

}  // namespace
}  // namespace maft
