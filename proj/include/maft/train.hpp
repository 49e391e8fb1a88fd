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

#ifndef MAFT_TRAIN_HPP_
#define MAFT_TRAIN_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "maft/config.hpp"
#include "maft/data.hpp"
#include "maft/encoder.hpp"
#include "maft/objective.hpp"

namespace maft {

struct PretrainResult {
  EncoderWeights weights;
  std::vector<double> losses;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  bool converged = false;  // final accuracy reached the target
};

// Full-image accuracy on scenes: argmax over seen classes of the plain
// embedding against each scene's majority class.
double FullImageAccuracy(const EncoderWeights& weights, const Dataset& data,
                         const std::vector<SyntheticScene>& scenes);

// Trains a fresh encoder with every parameter trainable: forward_plain,
// classify over the seen classes, cross-entropy on the scene-majority class.
// Batches are drawn from the seen-class scene generator; accuracy is measured
// on the val split. Returns the weights even when the target is missed.
PretrainResult PretrainToy(const EncoderConfig& encoder, const Dataset& data,
                           const PretrainConfig& config);

using SnapshotFn = std::function<void(std::size_t iteration,
                                      const EncoderWeights& student)>;

struct FinetuneResult {
  EncoderWeights student;
  std::vector<LossBreakdown> curve;  // one entry per iteration
};

// Mask-aware fine-tuning of a copy of the teacher. Zero iterations returns
// the teacher unchanged. on_snapshot fires after every eval_every steps and
// after the last step. Throws kInvariant if a training batch would supervise
// an unseen class and kNumeric (after dumping the batch) on a non-finite
// loss.
FinetuneResult FinetuneMaft(const EncoderWeights& teacher, const Dataset& data,
                            const TrainConfig& config,
                            const SnapshotFn& on_snapshot = nullptr);

// Student encoder settings derived from the teacher and the train config.
EncoderConfig StudentConfig(const EncoderConfig& teacher,
                            const TrainConfig& config);

// Loss of one fine-tuning sample on `tape`: the terms of the objective for a
// scene, its proposals and the teacher's prediction on the same image.
struct SampleLoss {
  Var l_ma;          // invalid when the IoU targets were degenerate
  Var l_dis;
};

SampleLoss MaftSampleLoss(Tape& tape, const EncoderWeights& student,
                          const Tensor& teacher_prediction,
                          const SyntheticScene& scene,
                          const MaskProposalSet& proposals,
                          const TextEmbeddings& text,
                          const TrainConfig& config);

// Combines per-sample losses: l_ma averaged over non-degenerate samples,
// l_dis over all samples.
Var CombineSampleLosses(Tape& tape, const std::vector<SampleLoss>& samples,
                        double lambda, LossBreakdown* breakdown);

}  // namespace maft

#endif  // MAFT_TRAIN_HPP_
