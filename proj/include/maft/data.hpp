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

#ifndef MAFT_DATA_HPP_
#define MAFT_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maft/tensor.hpp"
#include "maft/text.hpp"

namespace maft {

// SplitMix64 combination of a base seed and a stream index.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream);

struct SyntheticScene {
  std::size_t height = 0;
  std::size_t width = 0;
  Tensor image;                       // [H,W,3], values in [0,1]
  std::vector<std::size_t> labels;    // H*W class indices, row-major
  std::vector<std::size_t> classes;   // present classes, ascending

  // [K,H,W] binary masks, one per present class in `classes` order.
  Tensor GtMasks() const;
  // Present class covering the most pixels, lowest index on ties.
  std::size_t MajorityClass() const;
  // Rebuilds `classes` from `labels`.
  void RefreshClasses();
};

struct SceneSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes_per_scene = 3;
  // Classes to draw from; empty means the whole vocabulary.
  std::vector<std::size_t> pool;
  // Class that must be present (added on top of the pool draw).
  std::optional<std::size_t> required;
};

// One background class plus rectangles, ellipses and stripes for the rest.
// Colour and texture follow each class's attribute vector, so appearance
// varies smoothly across the embedding subspace. Every present class covers
// at least 1% of the pixels. Deterministic per seed.
SyntheticScene GenScene(std::uint64_t seed, const TextEmbeddings& text,
                        const SceneSpec& spec);

enum class PerturbKind {
  kIdentity,
  kErode,
  kDilate,
  kShift,
  kUnion,
  kRandomBlob,
};

std::string PerturbKindName(PerturbKind kind);
PerturbKind ParsePerturbKind(const std::string& name);

struct ProposalSpec {
  // Kinds applied once per gt class, except kRandomBlob which adds
  // `blobs` class-agnostic blobs per set. Identity is always included.
  std::vector<PerturbKind> kinds = {PerturbKind::kIdentity,
                                    PerturbKind::kErode,
                                    PerturbKind::kDilate,
                                    PerturbKind::kShift,
                                    PerturbKind::kUnion,
                                    PerturbKind::kRandomBlob};
  std::size_t max_radius = 4;  // erode/dilate radius drawn from [1, max]
  std::size_t max_shift = 8;   // shift offsets drawn from [-max, max]
  std::size_t blobs = 2;
};

struct MaskProposalSet {
  Tensor masks;                      // [N,H,W] binary
  std::vector<long> source_class;    // vocabulary index, -1 for blobs
  std::vector<PerturbKind> kinds;
  Tensor iou;                        // [K,N] against the gt masks

  std::size_t size() const { return masks.dim(0); }
};

// Binary morphology with a 3x3 square element; pixels outside the image
// count as background.
Tensor Erode(const Tensor& mask, std::size_t radius);
Tensor Dilate(const Tensor& mask, std::size_t radius);
Tensor ShiftMask(const Tensor& mask, long dy, long dx);

// Perturbed proposals for gt masks [K,H,W] belonging to gt_classes. Empty
// results are dropped.
MaskProposalSet PerturbProposals(const Tensor& gt_masks,
                                 const std::vector<std::size_t>& gt_classes,
                                 std::uint64_t seed,
                                 const ProposalSpec& spec = {});

struct DataConfig {
  std::size_t num_classes = 12;
  double unseen_fraction = 0.25;
  std::size_t image_size = 32;
  std::size_t classes_per_scene = 3;
  std::size_t train_scenes = 64;
  std::size_t val_scenes = 32;
  std::size_t test_scenes = 32;
  std::size_t embed_dim = 32;
  std::uint64_t seed = 0;

  void Validate() const;
  std::vector<std::pair<std::string, std::string>> ToPairs() const;
  void Set(const std::string& key, const std::string& value);
};

// train and val hold seen classes only; every test scene holds at least one
// unseen class.
struct Dataset {
  DataConfig config;
  TextEmbeddings text;
  std::vector<SyntheticScene> train;
  std::vector<SyntheticScene> val;
  std::vector<SyntheticScene> test;

  const std::vector<SyntheticScene>& split(const std::string& name) const;
};

Dataset GenerateDataset(const DataConfig& config);

// Scene spec for seen-only scenes of this dataset.
SceneSpec SeenSceneSpec(const Dataset& data);

void SaveDataset(const Dataset& data, const std::string& path);
Dataset LoadDataset(const std::string& path);

}  // namespace maft

#endif  // MAFT_DATA_HPP_
