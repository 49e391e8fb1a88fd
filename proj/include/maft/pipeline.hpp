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

#ifndef MAFT_PIPELINE_HPP_
#define MAFT_PIPELINE_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maft/autograd.hpp"
#include "maft/encoder.hpp"
#include "maft/tensor.hpp"

namespace maft {

// A^c [N,C] = row softmax of (E_I E_T^T) / tau.
Var Classify(Var image_embeddings, const Tensor& text_embeddings, double tau);
Tensor Classify(const Tensor& image_embeddings, const Tensor& text_embeddings,
                double tau);

enum class MergeMode { kMask, kCrop, kMaskAndCrop };
MergeMode ParseMergeMode(const std::string& name);
std::string MergeModeName(MergeMode mode);

// Inclusive pixel box.
struct Box {
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;
};

// Tight bounding box of a mask [H,W]; throws kDegenerate for an empty mask.
Box MaskBox(const Tensor& mask);

// Bilinear resize of the box region of an [H,W,3] image to out x out, with
// corner-aligned sampling (output corners land on box corners). Counts its
// multiply-accumulates under FlopStream::kResize.
Tensor ResizeBilinear(const Tensor& image, const Box& box, std::size_t out);

// One sub-image for one mask [H,W]. Crop modes throw kDegenerate on an empty
// mask.
Tensor MergeOne(const Tensor& image, const Tensor& mask, MergeMode mode,
                std::size_t out_size);
// Sub-images for masks [N,H,W].
std::vector<Tensor> Merge(const Tensor& image, const Tensor& masks,
                          MergeMode mode, std::size_t out_size);

// Baseline path: one plain encoder pass per merged sub-image, then Classify.
// Empty masks in crop modes fall back to the full-image box.
Tensor ClassifyByMerge(const Tensor& image, const Tensor& masks,
                       MergeMode mode, const EncoderWeights& weights,
                       const Tensor& text_embeddings, double tau,
                       DType dtype = DType::kFloat64);

// Geometric ensemble. ap is [N, |seen|] with columns in seen_classes order,
// ac is [N, C]. Seen columns get ap^lambda * ac^(1-lambda), unseen columns
// ac^lambda.
Tensor Ensemble(const Tensor& ap, const Tensor& ac, double lambda,
                std::span<const std::size_t> seen_classes);

struct SegmentationMap {
  Tensor scores;  // [C,H,W]

  std::size_t num_classes() const { return scores.dim(0); }
  // Per-pixel argmax, lowest class index on ties; row-major H*W.
  std::vector<std::size_t> Labels() const;
};

// O[c,y,x] = sum_n scores[n,c] * masks[n,y,x].
SegmentationMap ComposeOutput(const Tensor& scores, const Tensor& masks);

// Upper-bound scores [N,C]: IoU of each proposal with each gt mask placed at
// that gt class column, zero for absent classes.
Tensor UpperBoundScores(const Tensor& gt_masks,
                        std::span<const std::size_t> gt_classes,
                        const Tensor& proposals, std::size_t num_classes);

}  // namespace maft

#endif  // MAFT_PIPELINE_HPP_
