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

#ifndef MAFT_CONFIG_HPP_
#define MAFT_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maft/data.hpp"
#include "maft/encoder.hpp"
#include "maft/objective.hpp"
#include "maft/pipeline.hpp"

namespace maft {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Toy teacher pre-training on full images.
struct PretrainConfig {
  std::size_t iterations = 400;
  std::size_t batch_size = 16;
  double lr = 2e-3;
  double weight_decay = 1e-4;
  std::size_t warmup = 20;
  double label_smoothing = 0.1;
  double target_accuracy = 0.9;
  std::uint64_t seed = 0;

  void Validate() const;
  KeyValues ToPairs() const;
  void Set(const std::string& key, const std::string& value);
};

// Mask-aware fine-tuning. tau, start_mask_layer and frozen_units override
// the teacher's encoder settings for the student when present.
struct TrainConfig {
  std::size_t iterations = 500;
  std::size_t batch_size = 4;
  double lr = 2e-4;
  double weight_decay = 1e-5;
  double lambda = 1.0;
  std::optional<double> tau;
  std::optional<std::size_t> start_mask_layer;
  std::optional<FrozenUnits> frozen_units;
  AlignmentLoss loss = AlignmentLoss::kSmoothL1;
  bool per_row_normalization = false;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  ProposalSpec proposals;
  // Where a batch producing a non-finite loss is written.
  std::string dump_path;

  void Validate() const;
  KeyValues ToPairs() const;
  void Set(const std::string& key, const std::string& value);
};

enum class EvalMode { kFrozenMerge, kIpClip, kUpperBound };
EvalMode ParseEvalMode(const std::string& name);
std::string EvalModeName(EvalMode mode);

struct EvalConfig {
  EvalMode mode = EvalMode::kIpClip;
  MergeMode merge_mode = MergeMode::kMaskAndCrop;
  std::optional<double> ensemble_lambda;
  std::string split = "test";
  std::uint64_t seed = 0;
  ProposalSpec proposals;

  void Validate() const;
  KeyValues ToPairs() const;
  void Set(const std::string& key, const std::string& value);
};

// Proposal spec keys shared by [train] and [eval]: proposal_kinds,
// proposal_max_radius, proposal_max_shift, proposal_blobs.
bool SetProposalKey(ProposalSpec& spec, const std::string& key,
                    const std::string& value);
KeyValues ProposalPairs(const ProposalSpec& spec);

// Everything a CLI run needs. File form is INI-style: a top-level
// format_version key, then [encoder], [data], [pretrain], [train] and [eval]
// sections of key=value lines.
struct ExperimentConfig {
  EncoderConfig encoder;
  DataConfig data;
  PretrainConfig pretrain;
  TrainConfig train;
  EvalConfig eval;

  // Cross-section checks (image sizes, widths).
  void Validate() const;
  std::string Text() const;
  void Save(const std::string& path) const;
  static ExperimentConfig Parse(const std::string& text);
  static ExperimentConfig Load(const std::string& path);
  // Applies "section.key=value".
  void Set(const std::string& dotted_key, const std::string& value);
  // Reseeds every section from one seed.
  void Reseed(std::uint64_t seed);
};

inline constexpr int kConfigFormatVersion = 1;

// The 64x64, 12-class setting used by the end-to-end experiments.
ExperimentConfig ExperimentPreset();

}  // namespace maft

#endif  // MAFT_CONFIG_HPP_
