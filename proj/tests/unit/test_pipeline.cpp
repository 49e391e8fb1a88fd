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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "maft/autograd.hpp"
#include "maft/encoder.hpp"
#include "maft/error.hpp"
#include "maft/flops.hpp"
#include "maft/objective.hpp"
#include "maft/pipeline.hpp"
#include "maft/text.hpp"
#include "test_util.hpp"

namespace maft {
namespace {

using testing::RandomTensor;

Tensor UnitRows(Tensor t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
    s = std::sqrt(s);
    for (std::size_t c = 0; c < t.cols(); ++c) t.at(r, c) /= s;
  }
  return t;
}

Tensor RandomProbabilities(std::size_t n, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t({n, c});
  for (double& v : t.values()) v = u(rng);
  return t;
}

Tensor Image(std::size_t size, std::uint64_t seed) {
  Tensor img({size, size, 3});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.values()) v = u(rng);
  return img;
}

// Four-tap bilinear sample with explicit weights.
double Bilinear(const Tensor& img, double sy, double sx, std::size_t ch,
                std::size_t ymax, std::size_t xmax) {
  const std::size_t w = img.dim(1);
  const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
  const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, ymax), x1 = std::min(x0 + 1, xmax);
  const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
  auto at = [&](std::size_t y, std::size_t x) { return img[(y * w + x) * 3 + ch]; };
  return (1 - fy) * (1 - fx) * at(y0, x0) + (1 - fy) * fx * at(y0, x1) +
         fy * (1 - fx) * at(y1, x0) + fy * fx * at(y1, x1);
}

TEST(Classify, Examples) {
  // Equal cosines -> uniform.
  const Tensor e = UnitRows(Tensor::Matrix(1, 2, {1, 1}));
  const Tensor t = UnitRows(Tensor::Matrix(3, 2, {1, 0, 0, 1, 1, -1}));
  const Tensor same = Classify(e, UnitRows(Tensor::Matrix(3, 2, {1, 1, 1, 1, 1, 1})), 0.5);
  for (double v : same.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  // Cosines (1, 0) at tau = 1.
  const Tensor two = Classify(Tensor::Matrix(1, 2, {1, 0}),
                              Tensor::Matrix(2, 2, {1, 0, 0, 1}), 1.0);
  EXPECT_NEAR(two[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(two[1], 1.0 / (std::exp(1.0) + 1.0), 1e-15);
  EXPECT_NEAR(two[0], 0.731, 5e-4);
  // Small tau -> one-hot at the argmax.
  const Tensor sharp = Classify(e, t, 1e-4);
  EXPECT_NEAR(sharp[0], 0.5, 1e-12);
  EXPECT_NEAR(sharp[1], 0.5, 1e-12);
  EXPECT_NEAR(sharp[2], 0.0, 1e-12);
  EXPECT_MAFT_ERROR(Classify(e, t, 0.0), ErrorCode::kInvalidArgument);
  EXPECT_MAFT_ERROR(Classify(e, t, -1.0), ErrorCode::kInvalidArgument);
}

TEST(Classify, RowsAreDistributionsWithCosineArgmax) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor ei = UnitRows(RandomTensor({5, 8}, seed));
    const Tensor et = UnitRows(RandomTensor({7, 8}, seed + 100));
    const Tensor a = Classify(ei, et, 0.05);
    for (std::size_t n = 0; n < 5; ++n) {
      double s = 0.0, best_cos = -2.0;
      std::size_t arg_cos = 0, arg_p = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        s += a.at(n, c);
        double cos = 0.0;
        for (std::size_t j = 0; j < 8; ++j) cos += ei.at(n, j) * et.at(c, j);
        if (cos > best_cos) best_cos = cos, arg_cos = c;
        if (a.at(n, c) > a.at(n, arg_p)) arg_p = c;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
      EXPECT_EQ(arg_cos, arg_p);
    }
  }
}

TEST(Classify, VarMatchesTensor) {
  const Tensor ei = UnitRows(RandomTensor({3, 6}, 1));
  const Tensor et = UnitRows(RandomTensor({4, 6}, 2));
  Tape tape(DType::kFloat64, false);
  EXPECT_LE(MaxAbsDiff(Classify(tape.Constant(ei), et, 0.1).value(),
                       Classify(ei, et, 0.1)),
            1e-15);
}

TEST(Resize, IdentityAtSameSize) {
  const Tensor img = Image(16, 1);
  const Tensor out = ResizeBilinear(img, Box{0, 0, 15, 15}, 16);
  EXPECT_TRUE(BitwiseEqual(out, img));
}

TEST(Resize, MatchesFourTapOracle) {
  const Tensor img = Image(20, 2);
  const Box box{3, 5, 14, 17};
  const std::size_t out = 9;
  const Tensor r = ResizeBilinear(img, box, out);
  for (std::size_t i = 0; i < out; ++i)
    for (std::size_t j = 0; j < out; ++j)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double sy = box.y0 + i * double(box.y1 - box.y0) / (out - 1);
        const double sx = box.x0 + j * double(box.x1 - box.x0) / (out - 1);
        EXPECT_NEAR(r[(i * out + j) * 3 + ch],
                    Bilinear(img, sy, sx, ch, box.y1, box.x1), 1e-12);
      }
}

TEST(Resize, CountsUnderResizeStream) {
  FlopTally t;
  {
    FlopScope scope(t);
    ResizeBilinear(Image(8, 3), Box{0, 0, 7, 7}, 5);
  }
  EXPECT_EQ(t[FlopStream::kResize], 5u * 5u * 9u);
  EXPECT_EQ(t.EncoderTotal(), 0u);
}

TEST(Merge, FullMaskReturnsImage) {
  const Tensor img = Image(16, 4);
  const Tensor ones = Tensor::Full({16, 16}, 1.0);
  for (MergeMode m : {MergeMode::kMask, MergeMode::kCrop, MergeMode::kMaskAndCrop})
    EXPECT_TRUE(BitwiseEqual(MergeOne(img, ones, m, 16), img));
}

TEST(Merge, MaskAndCropOracle) {
  const std::size_t s = 16;
  const Tensor img = Image(s, 5);
  Tensor mask = Tensor::Zeros({s, s});
  for (std::size_t y = 5; y <= 10; ++y)
    for (std::size_t x = 5; x <= 10; ++x) mask[y * s + x] = 1.0;
  mask[5 * s + 5] = 0.0;  // a hole inside the box stays zeroed
  Tensor masked = img;
  for (std::size_t p = 0; p < s * s; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch) masked[p * 3 + ch] *= mask[p];
  const std::size_t out = 12;
  const Tensor got = MergeOne(img, mask, MergeMode::kMaskAndCrop, out);
  for (std::size_t i = 0; i < out; ++i)
    for (std::size_t j = 0; j < out; ++j)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double sy = 5 + i * 5.0 / (out - 1), sx = 5 + j * 5.0 / (out - 1);
        EXPECT_NEAR(got[(i * out + j) * 3 + ch],
                    Bilinear(masked, sy, sx, ch, 10, 10), 1e-12);
      }
  EXPECT_EQ(got[0], 0.0);  // the hole at the box corner

  // Mask mode keeps the full frame and zeroes the background.
  const Tensor m = MergeOne(img, mask, MergeMode::kMask, s);
  EXPECT_TRUE(BitwiseEqual(m, masked));
}

TEST(Merge, EmptyMaskInCropModes) {
  const Tensor img = Image(8, 6);
  const Tensor empty = Tensor::Zeros({8, 8});
  EXPECT_MAFT_ERROR(MaskBox(empty), ErrorCode::kDegenerate);
  EXPECT_MAFT_ERROR(MergeOne(img, empty, MergeMode::kCrop, 8),
                    ErrorCode::kDegenerate);
  EXPECT_NO_THROW(MergeOne(img, empty, MergeMode::kMask, 8));
  Tensor dot = Tensor::Zeros({8, 8});
  dot[2 * 8 + 6] = 1.0;
  const Box b = MaskBox(dot);
  EXPECT_EQ(b.y0, 2u);
  EXPECT_EQ(b.y1, 2u);
  EXPECT_EQ(b.x0, 6u);
  EXPECT_EQ(b.x1, 6u);
}

TEST(ClassifyByMerge, TrivialCaseAgreesWithIpPath) {
  const EncoderConfig cfg;
  const EncoderWeights w = EncoderWeights::Init(cfg, 3);
  const TextEmbeddings text = EmbedClasses(MakeVocabulary(5), cfg.embed_dim, 1);
  const Tensor img = Image(cfg.image_size, 7);
  const Tensor ones = Tensor::Full({1, 32, 32}, 1.0);
  const Tensor merged = ClassifyByMerge(img, ones, MergeMode::kMask, w,
                                        text.matrix, cfg.temperature);
  const Tensor plain = Classify(EncodePlain(w, img), text.matrix, cfg.temperature);
  const Tensor ip = Classify(EncodeIp(w, img, ones), text.matrix, cfg.temperature);
  EXPECT_LE(MaxAbsDiff(merged, plain), 1e-6);
  EXPECT_LE(MaxAbsDiff(merged, ip), 1e-6);
}

TEST(ClassifyByMerge, ShapesAndEmptyFallback) {
  const EncoderConfig cfg;
  const EncoderWeights w = EncoderWeights::Init(cfg, 3);
  const TextEmbeddings text = EmbedClasses(MakeVocabulary(4), cfg.embed_dim, 1);
  const Tensor img = Image(cfg.image_size, 8);
  Tensor masks = testing::RandomBinary({3, 32, 32}, 9);
  for (std::size_t p = 0; p < 32 * 32; ++p) masks[2 * 32 * 32 + p] = 0.0;
  const Tensor a = ClassifyByMerge(img, masks, MergeMode::kMaskAndCrop, w,
                                   text.matrix, cfg.temperature);
  ASSERT_EQ(a.shape(), (Shape{3, 4}));
  for (std::size_t n = 0; n < 3; ++n) {
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) s += a.at(n, c);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Ensemble, Boundaries) {
  const std::vector<std::size_t> seen = {0, 2, 3};
  const Tensor ap = RandomProbabilities(4, 3, 1);
  const Tensor ac = RandomProbabilities(4, 5, 2);
  const Tensor one = Ensemble(ap, ac, 1.0, seen);
  const Tensor zero = Ensemble(ap, ac, 0.0, seen);
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(one.at(n, seen[k]), ap.at(n, k));
      EXPECT_EQ(zero.at(n, seen[k]), ac.at(n, seen[k]));
    }
    for (std::size_t c : {1u, 4u}) {
      EXPECT_EQ(one.at(n, c), ac.at(n, c));
      EXPECT_EQ(zero.at(n, c), 1.0);
    }
  }
}

TEST(Ensemble, HandValue) {
  const Tensor ap = Tensor::Matrix(1, 1, {0.8});
  const Tensor ac = Tensor::Matrix(1, 2, {0.5, 0.25});
  const std::vector<std::size_t> seen = {0};
  const Tensor e = Ensemble(ap, ac, 0.7, seen);
  EXPECT_NEAR(e[0], std::pow(0.8, 0.7) * std::pow(0.5, 0.3), 1e-15);
  EXPECT_NEAR(e[0], 0.694, 1e-3);  // 0.69479...
  EXPECT_NEAR(e[1], std::pow(0.25, 0.7), 1e-15);
}

TEST(Ensemble, MonotoneAndBounded) {
  const std::vector<std::size_t> seen = {1, 2};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Tensor ap = RandomProbabilities(3, 2, seed);
    Tensor ac = RandomProbabilities(3, 4, seed + 500);
    const double lambda = (seed % 11) / 10.0;
    const Tensor before = Ensemble(ap, ac, lambda, seen);
    for (double v : before.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (double& v : ac.values()) v = std::min(1.0, v + 0.1);
    const Tensor after = Ensemble(ap, ac, lambda, seen);
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_GE(after[i], before[i]);
  }
}

TEST(Compose, Examples) {
  const SegmentationMap one =
      ComposeOutput(Tensor::Matrix(1, 2, {0.9, 0.1}), Tensor::Full({1, 3, 3}, 1.0));
  for (std::size_t p = 0; p < 9; ++p) {
    EXPECT_EQ(one.scores[p], 0.9);
    EXPECT_EQ(one.scores[9 + p], 0.1);
  }
  Tensor masks = Tensor::Zeros({2, 2, 2});
  masks[0] = masks[1] = 1.0;      // top row -> proposal 0
  masks[4 + 2] = masks[4 + 3] = 1.0;  // bottom row -> proposal 1
  const SegmentationMap split =
      ComposeOutput(Tensor::Matrix(2, 3, {0, 0, 1, 0, 1, 0}), masks);
  EXPECT_EQ(split.Labels(), (std::vector<std::size_t>{2, 2, 1, 1}));
}

TEST(Compose, BruteForceAndLinearity) {
  const Tensor masks = testing::RandomBinary({4, 5, 6}, 3);
  const Tensor a1 = RandomProbabilities(4, 3, 4), a2 = RandomProbabilities(4, 3, 5);
  const SegmentationMap o = ComposeOutput(a1, masks);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 30; ++p) {
      double s = 0.0;
      for (std::size_t n = 0; n < 4; ++n) s += a1.at(n, c) * masks[n * 30 + p];
      EXPECT_NEAR(o.scores[c * 30 + p], s, 1e-15);
    }
  Tensor mix({4, 3});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a1[i] - 0.5 * a2[i];
  const SegmentationMap m = ComposeOutput(mix, masks);
  const SegmentationMap o2 = ComposeOutput(a2, masks);
  for (std::size_t i = 0; i < m.scores.size(); ++i)
    EXPECT_NEAR(m.scores[i], 2.0 * o.scores[i] - 0.5 * o2.scores[i], 1e-12);
}

TEST(Compose, TieBreaksToLowestIndex) {
  const SegmentationMap t =
      ComposeOutput(Tensor::Matrix(1, 3, {0.2, 0.4, 0.4}), Tensor::Full({1, 1, 2}, 1.0));
  EXPECT_EQ(t.Labels(), (std::vector<std::size_t>{1, 1}));
  const SegmentationMap z =
      ComposeOutput(Tensor::Matrix(1, 3, {0.5, 0.5, 0.5}), Tensor::Zeros({1, 1, 1}));
  EXPECT_EQ(z.Labels(), (std::vector<std::size_t>{0}));
}

TEST(UpperBound, GtProposalsReproduceGt) {
  Tensor gt = Tensor::Zeros({2, 4, 4});
  for (std::size_t p = 0; p < 16; ++p) (p < 6 ? gt[p] : gt[16 + p]) = 1.0;
  const std::vector<std::size_t> classes = {3, 1};
  const Tensor s = UpperBoundScores(gt, classes, gt, 5);
  ASSERT_EQ(s.shape(), (Shape{2, 5}));
  EXPECT_EQ(s.at(0, 3), 1.0);
  EXPECT_EQ(s.at(1, 1), 1.0);
  EXPECT_EQ(s.at(0, 1), 0.0);
  EXPECT_EQ(s.at(0, 0) + s.at(0, 2) + s.at(0, 4), 0.0);
  const std::vector<std::size_t> labels = ComposeOutput(s, gt).Labels();
  for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(labels[p], p < 6 ? 3u : 1u);

  // A proposal disjoint from every gt mask scores zero everywhere.
  Tensor wrong = Tensor::Zeros({1, 4, 4});
  const Tensor w = UpperBoundScores(gt, classes, wrong, 5);
  for (double v : w.values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace maft
