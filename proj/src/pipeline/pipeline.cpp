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

#include "maft/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "maft/error.hpp"
#include "maft/flops.hpp"
#include "maft/objective.hpp"

namespace maft {

Var Classify(Var image_embeddings, const Tensor& text_embeddings, double tau) {
  Check(tau > 0.0, ErrorCode::kInvalidArgument, "temperature must be > 0");
  Check(text_embeddings.rank() == 2 &&
            image_embeddings.value().rank() == 2 &&
            text_embeddings.cols() == image_embeddings.value().cols(),
        ErrorCode::kDimension,
        "embedding widths differ: " +
            ShapeString(image_embeddings.value().shape()) + " vs " +
            ShapeString(text_embeddings.shape()));
  Tape& tape = *image_embeddings.tape();
  FlopStreamScope stream(FlopStream::kProjection);
  Var logits = ops::MatMulTransposed(image_embeddings,
                                     tape.Constant(text_embeddings));
  return ops::SoftmaxRows(ops::Scale(logits, 1.0 / tau));
}

Tensor Classify(const Tensor& image_embeddings, const Tensor& text_embeddings,
                double tau) {
  Tape tape(image_embeddings.dtype(), false);
  return Classify(tape.Constant(image_embeddings), text_embeddings, tau)
      .value();
}

MergeMode ParseMergeMode(const std::string& name) {
  if (name == "mask") return MergeMode::kMask;
  if (name == "crop") return MergeMode::kCrop;
  if (name == "mask_and_crop") return MergeMode::kMaskAndCrop;
  Fail(ErrorCode::kInvalidArgument,
       "unknown merge mode '" + name + "' (mask, crop, mask_and_crop)");
}

std::string MergeModeName(MergeMode mode) {
  switch (mode) {
    case MergeMode::kMask: return "mask";
    case MergeMode::kCrop: return "crop";
    case MergeMode::kMaskAndCrop: return "mask_and_crop";
  }
  return "mask";
}

Box MaskBox(const Tensor& mask) {
  Check(mask.rank() == 2, ErrorCode::kDimension, "mask must be [H,W]");
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  Box box{h, w, 0, 0};
  bool any = false;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask[y * w + x] < 0.5) continue;
      any = true;
      box.y0 = std::min(box.y0, y);
      box.x0 = std::min(box.x0, x);
      box.y1 = std::max(box.y1, y);
      box.x1 = std::max(box.x1, x);
    }
  }
  Check(any, ErrorCode::kDegenerate, "empty mask has no bounding box");
  return box;
}

Tensor ResizeBilinear(const Tensor& image, const Box& box, std::size_t out) {
  Check(image.rank() == 3 && image.dim(2) == 3, ErrorCode::kDimension,
        "image must be [H,W,3], got " + ShapeString(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1);
  Check(box.y0 <= box.y1 && box.x0 <= box.x1 && box.y1 < h && box.x1 < w,
        ErrorCode::kInvalidArgument, "box outside image");
  Check(out >= 1, ErrorCode::kInvalidArgument, "output size must be >= 1");
  const double span_y = static_cast<double>(box.y1 - box.y0);
  const double span_x = static_cast<double>(box.x1 - box.x0);
  const double denom = out > 1 ? static_cast<double>(out - 1) : 1.0;
  Tensor result({out, out, 3}, image.dtype());
  for (std::size_t i = 0; i < out; ++i) {
    const double sy = static_cast<double>(box.y0) +
                      (out > 1 ? static_cast<double>(i) * span_y / denom
                               : 0.5 * span_y);
    const auto y0 = std::min(static_cast<std::size_t>(sy), box.y1);
    const std::size_t y1 = std::min(y0 + 1, box.y1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out; ++j) {
      const double sx = static_cast<double>(box.x0) +
                        (out > 1 ? static_cast<double>(j) * span_x / denom
                                 : 0.5 * span_x);
      const auto x0 = std::min(static_cast<std::size_t>(sx), box.x1);
      const std::size_t x1 = std::min(x0 + 1, box.x1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double a = image[(y0 * w + x0) * 3 + ch];
        const double b = image[(y0 * w + x1) * 3 + ch];
        const double c = image[(y1 * w + x0) * 3 + ch];
        const double d = image[(y1 * w + x1) * 3 + ch];
        const double top = a + fx * (b - a);
        const double bottom = c + fx * (d - c);
        result[(i * out + j) * 3 + ch] = top + fy * (bottom - top);
      }
    }
  }
  FlopStreamScope stream(FlopStream::kResize);
  RecordMacs(out * out * 3 * 3);
  result.Quantize();
  return result;
}

Tensor MergeOne(const Tensor& image, const Tensor& mask, MergeMode mode,
                std::size_t out_size) {
  Check(image.rank() == 3 && image.dim(2) == 3, ErrorCode::kDimension,
        "image must be [H,W,3], got " + ShapeString(image.shape()));
  Check(mask.rank() == 2 && mask.dim(0) == image.dim(0) &&
            mask.dim(1) == image.dim(1),
        ErrorCode::kDimension,
        "mask " + ShapeString(mask.shape()) + " does not match image " +
            ShapeString(image.shape()));
  const std::size_t h = image.dim(0), w = image.dim(1);
  Tensor source = image;
  if (mode != MergeMode::kCrop) {
    for (std::size_t p = 0; p < h * w; ++p) {
      if (mask[p] < 0.5) {
        source[p * 3] = source[p * 3 + 1] = source[p * 3 + 2] = 0.0;
      }
    }
  }
  const Box box =
      mode == MergeMode::kMask ? Box{0, 0, h - 1, w - 1} : MaskBox(mask);
  return ResizeBilinear(source, box, out_size);
}

std::vector<Tensor> Merge(const Tensor& image, const Tensor& masks,
                          MergeMode mode, std::size_t out_size) {
  Check(masks.rank() == 3, ErrorCode::kDimension, "masks must be [N,H,W]");
  const std::size_t hw = masks.dim(1) * masks.dim(2);
  std::vector<Tensor> out;
  for (std::size_t n = 0; n < masks.dim(0); ++n) {
    Tensor mask({masks.dim(1), masks.dim(2)},
                std::vector<double>(masks.data() + n * hw,
                                    masks.data() + (n + 1) * hw));
    out.push_back(MergeOne(image, mask, mode, out_size));
  }
  return out;
}

Tensor ClassifyByMerge(const Tensor& image, const Tensor& masks,
                       MergeMode mode, const EncoderWeights& weights,
                       const Tensor& text_embeddings, double tau,
                       DType dtype) {
  Check(masks.rank() == 3 && masks.dim(0) >= 1, ErrorCode::kDimension,
        "masks must be [N>=1,H,W]");
  const std::size_t n = masks.dim(0), hw = masks.dim(1) * masks.dim(2);
  const std::size_t size = weights.config.image_size;
  const std::size_t e = weights.config.embed_dim;
  Tensor embeddings({n, e}, dtype);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor mask({masks.dim(1), masks.dim(2)},
                std::vector<double>(masks.data() + i * hw,
                                    masks.data() + (i + 1) * hw));
    Tensor sub;
    try {
      sub = MergeOne(image, mask, mode, size);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kDegenerate) throw;
      sub = ResizeBilinear(image, {0, 0, image.dim(0) - 1, image.dim(1) - 1},
                           size);
    }
    const Tensor row = EncodePlain(weights, sub, dtype);
    std::copy_n(row.data(), e, embeddings.data() + i * e);
  }
  return Classify(embeddings, text_embeddings, tau);
}

Tensor Ensemble(const Tensor& ap, const Tensor& ac, double lambda,
                std::span<const std::size_t> seen_classes) {
  Check(lambda >= 0.0 && lambda <= 1.0, ErrorCode::kInvalidArgument,
        "ensemble lambda must be in [0,1]");
  Check(ac.rank() == 2 && ap.rank() == 2 && ap.rows() == ac.rows() &&
            ap.cols() == seen_classes.size(),
        ErrorCode::kDimension,
        "ensemble shapes: A^p " + ShapeString(ap.shape()) + ", A^c " +
            ShapeString(ac.shape()) + ", " +
            std::to_string(seen_classes.size()) + " seen classes");
  const std::size_t n = ac.rows(), c = ac.cols();
  std::vector<std::ptrdiff_t> seen_pos(c, -1);
  for (std::size_t j = 0; j < seen_classes.size(); ++j) {
    Check(seen_classes[j] < c, ErrorCode::kInvalidArgument,
          "seen class index out of range");
    seen_pos[seen_classes[j]] = static_cast<std::ptrdiff_t>(j);
  }
  Tensor out({n, c}, ac.dtype());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double a = ac.at(i, k);
      out.at(i, k) =
          seen_pos[k] >= 0
              ? std::pow(ap.at(i, static_cast<std::size_t>(seen_pos[k])),
                         lambda) *
                    std::pow(a, 1.0 - lambda)
              : std::pow(a, lambda);
    }
  }
  out.Quantize();
  return out;
}

std::vector<std::size_t> SegmentationMap::Labels() const {
  const std::size_t c = scores.dim(0), hw = scores.dim(1) * scores.dim(2);
  std::vector<std::size_t> labels(hw, 0);
  for (std::size_t p = 0; p < hw; ++p) {
    double best = scores[p];
    for (std::size_t k = 1; k < c; ++k) {
      if (scores[k * hw + p] > best) {
        best = scores[k * hw + p];
        labels[p] = k;
      }
    }
  }
  return labels;
}

SegmentationMap ComposeOutput(const Tensor& scores, const Tensor& masks) {
  Check(scores.rank() == 2 && masks.rank() == 3 &&
            scores.rows() == masks.dim(0),
        ErrorCode::kDimension,
        "compose_output shapes: scores " + ShapeString(scores.shape()) +
            ", masks " + ShapeString(masks.shape()));
  const std::size_t n = scores.rows(), c = scores.cols();
  const std::size_t hw = masks.dim(1) * masks.dim(2);
  SegmentationMap out{Tensor({c, masks.dim(1), masks.dim(2)}, scores.dtype())};
  for (std::size_t k = 0; k < c; ++k) {
    double* plane = out.scores.data() + k * hw;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = scores.at(i, k);
      if (a == 0.0) continue;
      const double* m = masks.data() + i * hw;
      for (std::size_t p = 0; p < hw; ++p) plane[p] += a * m[p];
    }
  }
  out.scores.Quantize();
  return out;
}

Tensor UpperBoundScores(const Tensor& gt_masks,
                        std::span<const std::size_t> gt_classes,
                        const Tensor& proposals, std::size_t num_classes) {
  Check(gt_masks.rank() == 3 && gt_masks.dim(0) == gt_classes.size(),
        ErrorCode::kDimension, "one gt mask per gt class required");
  const Tensor s = IouMatrix(gt_masks, proposals);
  Tensor out({proposals.dim(0), num_classes});
  for (std::size_t k = 0; k < gt_classes.size(); ++k) {
    Check(gt_classes[k] < num_classes, ErrorCode::kInvalidArgument,
          "gt class index out of range");
    for (std::size_t n = 0; n < proposals.dim(0); ++n) {
      out.at(n, gt_classes[k]) = s.at(k, n);
    }
  }
  return out;
}

}  // namespace maft
