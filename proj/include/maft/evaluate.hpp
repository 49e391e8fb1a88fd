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

#ifndef MAFT_EVALUATE_HPP_
#define MAFT_EVALUATE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maft/config.hpp"
#include "maft/data.hpp"
#include "maft/encoder.hpp"
#include "maft/flops.hpp"
#include "maft/report.hpp"

namespace maft {

// Harmonic mean 2ab/(a+b); 0 when a+b = 0.
double HIoU(double miou_seen, double miou_unseen);

// Spearman rank correlation with average ranks for ties; 0 when either
// input is constant.
double Spearman(std::span<const double> x, std::span<const double> y);

struct EvalReport {
  EvalConfig config;
  std::vector<std::string> class_names;
  std::vector<bool> class_seen;
  std::vector<double> per_class_iou;  // percent; -1 when the class never
                                      // appears in gt or prediction
  double miou_seen = 0.0;
  double miou_unseen = 0.0;
  double miou_all = 0.0;
  double hiou = 0.0;
  // Mean Spearman correlation between A^c_select rows and true IoU rows.
  double spearman_seen = 0.0;
  double spearman_unseen = 0.0;
  std::size_t seen_rows = 0;
  std::size_t unseen_rows = 0;
  std::size_t scenes = 0;
  std::size_t proposals = 0;
  std::uint64_t model_fingerprint = 0;

  Report ToReport() const;
};

// Scores every scene of the split, composes the segmentation map and
// accumulates per-class IoU over the split. Proposals come from
// PerturbProposals with the config's spec and seed.
EvalReport Evaluate(const EncoderWeights& weights, const Dataset& data,
                    const EvalConfig& config);

// Per-proposal class scores [N, C] of one scene for the given mode, before
// any ensemble.
Tensor ProposalScores(const EncoderWeights& weights, const Dataset& data,
                      const SyntheticScene& scene,
                      const MaskProposalSet& proposals,
                      const EvalConfig& config);

// Synthetic proposal-generator scores [N, |seen|]: one-hot on the source
// class of each proposal when that class is seen, zero otherwise.
Tensor SyntheticProposalScores(const MaskProposalSet& proposals,
                               const ClassVocabulary& vocab);

// Mean |A_S - A_T| between two encoders' full-image predictions over the
// whole vocabulary, averaged over scenes and classes.
double DistillationGap(const EncoderWeights& student,
                       const EncoderWeights& teacher, const Dataset& data,
                       const std::vector<SyntheticScene>& scenes);

enum class FlopPipeline { kMerge, kIpClip };
FlopPipeline ParseFlopPipeline(const std::string& name);
std::string FlopPipelineName(FlopPipeline pipeline);

struct FlopReport {
  FlopPipeline pipeline = FlopPipeline::kIpClip;
  std::size_t num_proposals = 0;
  EncoderConfig encoder;
  FlopTally tally;
  // Encoder cost of one full-image pass at this config.
  std::uint64_t plain_pass_macs = 0;

  std::uint64_t encoder_macs() const { return tally.EncoderTotal(); }
  std::uint64_t resize_macs() const { return tally[FlopStream::kResize]; }
  Report ToReport() const;
};

// Runs the pipeline once under an instrumented tally on a random image with
// n rectangular proposals.
FlopReport CountFlops(FlopPipeline pipeline, const EncoderConfig& encoder,
                      std::size_t n, std::uint64_t seed = 0,
                      MergeMode merge_mode = MergeMode::kMaskAndCrop);

}  // namespace maft

#endif  // MAFT_EVALUATE_HPP_
