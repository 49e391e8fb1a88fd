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

#include "maft/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "maft/container.hpp"
#include "maft/error.hpp"
#include "maft/optim.hpp"
#include "maft/pipeline.hpp"

namespace maft {
namespace {

constexpr std::uint64_t kPretrainStream = 4ull << 20;
constexpr std::uint64_t kFinetuneOrderStream = 5ull << 20;
constexpr std::uint64_t kFinetuneProposalStream = 6ull << 20;

// Linear warmup, then cosine decay to a tenth of the peak.
double PretrainLr(const PretrainConfig& cfg, std::size_t it) {
  if (it < cfg.warmup) {
    return cfg.lr * static_cast<double>(it + 1) /
           static_cast<double>(cfg.warmup);
  }
  const double span = static_cast<double>(
      std::max<std::size_t>(1, cfg.iterations - cfg.warmup));
  const double t = static_cast<double>(it - cfg.warmup) / span;
  return cfg.lr * (0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * t)));
}

std::vector<std::size_t> SeenPositions(const ClassVocabulary& vocab,
                                       const std::vector<std::size_t>& classes) {
  const std::vector<std::size_t> seen = vocab.SeenIndices();
  std::vector<std::size_t> pos;
  for (std::size_t c : classes) {
    const auto it = std::find(seen.begin(), seen.end(), c);
    Check(it != seen.end(), ErrorCode::kInvariant,
          "leakage guard: unseen class " + vocab.names.at(c) +
              " reached the training loss");
    pos.push_back(static_cast<std::size_t>(it - seen.begin()));
  }
  return pos;
}

bool GradientsFinite(const Gradients& grads) {
  return std::all_of(grads.begin(), grads.end(),
                     [](const auto& kv) { return kv.second.AllFinite(); });
}

void DumpBatch(const std::string& path, std::size_t iteration,
               const std::vector<const SyntheticScene*>& scenes,
               const std::vector<MaskProposalSet>& proposals,
               const LossBreakdown& loss) {
  TensorFile file;
  file.SetMeta("batch", "iteration", std::to_string(iteration));
  file.SetMeta("batch", "l_ma", std::to_string(loss.l_ma));
  file.SetMeta("batch", "l_dis", std::to_string(loss.l_dis));
  for (std::size_t b = 0; b < scenes.size(); ++b) {
    const std::string p = "sample" + std::to_string(b) + ".";
    file.Put(p + "image", scenes[b]->image);
    file.Put(p + "gt_masks", scenes[b]->GtMasks());
    file.Put(p + "proposals", proposals[b].masks);
    file.Put(p + "iou", proposals[b].iou);
  }
  file.Save(path);
}

}  // namespace

double FullImageAccuracy(const EncoderWeights& weights, const Dataset& data,
                         const std::vector<SyntheticScene>& scenes) {
  Check(!scenes.empty(), ErrorCode::kInvalidArgument, "no scenes to score");
  const std::vector<std::size_t> seen = data.text.vocab.SeenIndices();
  const Tensor e_seen = data.text.Select(seen);
  std::size_t correct = 0;
  for (const SyntheticScene& s : scenes) {
    const Tensor e = EncodePlain(weights, s.image);
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t j = 0; j < seen.size(); ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < e.cols(); ++i) dot += e[i] * e_seen.at(j, i);
      if (dot > best_score) {
        best_score = dot;
        best = j;
      }
    }
    correct += seen[best] == s.MajorityClass();
  }
  return static_cast<double>(correct) / static_cast<double>(scenes.size());
}

PretrainResult PretrainToy(const EncoderConfig& encoder, const Dataset& data,
                           const PretrainConfig& config) {
  config.Validate();
  encoder.Validate();
  Check(encoder.image_size == data.config.image_size &&
            encoder.embed_dim == data.text.embed_dim(),
        ErrorCode::kInvalidArgument,
        "encoder image_size/embed_dim do not match the dataset");
  PretrainResult result;
  result.weights = EncoderWeights::Init(encoder, config.seed);
  result.weights.SetAllTrainable(true);
  const std::vector<std::size_t> seen = data.text.vocab.SeenIndices();
  const Tensor e_seen = data.text.Select(seen);
  const SceneSpec spec = SeenSceneSpec(data);
  result.initial_accuracy = FullImageAccuracy(result.weights, data, data.val);

  AdamWState state;
  AdamWOptions opts;
  opts.weight_decay = config.weight_decay;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Tape tape(DType::kFloat32);
    Var e_text = tape.Constant(e_seen);
    std::vector<Var> rows;
    std::vector<std::size_t> targets;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const SyntheticScene scene = GenScene(
          MixSeed(config.seed, kPretrainStream + it * config.batch_size + b),
          data.text, spec);
      const auto pos = SeenPositions(data.text.vocab, {scene.MajorityClass()});
      targets.push_back(pos.front());
      rows.push_back(ForwardPlain(tape, result.weights, scene.image));
    }
    Var embeddings = ops::ConcatRows(rows);
    Var logits = ops::Scale(ops::MatMulTransposed(embeddings, e_text),
                            1.0 / encoder.temperature);
    Var loss = ops::CrossEntropy(logits, targets, config.label_smoothing);
    const double value = loss.value().item();
    Check(std::isfinite(value), ErrorCode::kNumeric,
          "pretraining loss became non-finite at iteration " +
              std::to_string(it));
    const Gradients grads = tape.Backward(loss);
    opts.lr = PretrainLr(config, it);
    AdamWStep(result.weights.params, grads, opts, state);
    result.losses.push_back(value);
  }
  result.final_accuracy = FullImageAccuracy(result.weights, data, data.val);
  result.converged = result.final_accuracy >= config.target_accuracy;
  result.weights.ApplyFrozenUnits(encoder.frozen_units);
  return result;
}

EncoderConfig StudentConfig(const EncoderConfig& teacher,
                            const TrainConfig& config) {
  EncoderConfig cfg = teacher;
  if (config.tau) cfg.temperature = *config.tau;
  if (config.start_mask_layer) cfg.start_mask_layer = *config.start_mask_layer;
  if (config.frozen_units) cfg.frozen_units = *config.frozen_units;
  cfg.Validate();
  return cfg;
}

SampleLoss MaftSampleLoss(Tape& tape, const EncoderWeights& student,
                          const Tensor& teacher_prediction,
                          const SyntheticScene& scene,
                          const MaskProposalSet& proposals,
                          const TextEmbeddings& text,
                          const TrainConfig& config) {
  const std::vector<std::size_t> pos =
      SeenPositions(text.vocab, scene.classes);
  const Tensor e_seen = text.Select(text.vocab.SeenIndices());
  const double tau = student.config.temperature;
  SampleLoss out;
  const NormalizedIou target =
      MinMaxNormalize(proposals.iou, config.per_row_normalization);
  if (!target.degenerate) {
    Var ac = Classify(ForwardIp(tape, student, scene.image, proposals.masks),
                      e_seen, tau);
    out.l_ma = MaskAwareLoss(SelectScores(ac, pos), target.values, config.loss);
  }
  Var as = Classify(ForwardPlain(tape, student, scene.image), e_seen, tau);
  out.l_dis = SelfDistillationLoss(as, teacher_prediction);
  return out;
}

Var CombineSampleLosses(Tape& tape, const std::vector<SampleLoss>& samples,
                        double lambda, LossBreakdown* breakdown) {
  Check(!samples.empty(), ErrorCode::kInvalidArgument, "empty batch");
  std::vector<Var> ma, dis;
  for (const SampleLoss& s : samples) {
    if (s.l_ma.valid()) ma.push_back(s.l_ma);
    dis.push_back(s.l_dis);
  }
  auto mean = [&](const std::vector<Var>& v) {
    if (v.empty()) return tape.Constant(Tensor::Scalar(0.0, tape.dtype()));
    Var sum = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) sum = ops::Add(sum, v[i]);
    return ops::Scale(sum, 1.0 / static_cast<double>(v.size()));
  };
  Var l_ma = mean(ma), l_dis = mean(dis);
  Var total = TotalLoss(l_ma, l_dis, lambda);
  if (breakdown != nullptr) {
    // Recombined in double so total = l_ma + lambda * l_dis holds exactly.
    *breakdown = TotalLoss(l_ma.value().item(), l_dis.value().item(), lambda);
  }
  return total;
}

FinetuneResult FinetuneMaft(const EncoderWeights& teacher, const Dataset& data,
                            const TrainConfig& config,
                            const SnapshotFn& on_snapshot) {
  FinetuneResult result;
  result.student = teacher;
  if (config.iterations == 0) return result;
  config.Validate();
  Check(!data.train.empty(), ErrorCode::kInvalidArgument,
        "training split is empty");
  Check(teacher.config.image_size == data.config.image_size &&
            teacher.config.embed_dim == data.text.embed_dim(),
        ErrorCode::kInvalidArgument,
        "teacher image_size/embed_dim do not match the dataset");
  EncoderWeights& student = result.student;
  student.config = StudentConfig(teacher.config, config);
  student.ApplyFrozenUnits(student.config.frozen_units);
  const DType dtype = student.params.Get("proj").value.dtype();
  const Tensor e_seen = data.text.Select(data.text.vocab.SeenIndices());
  const std::string dump_path =
      config.dump_path.empty()
          ? (std::filesystem::temp_directory_path() / "maft_nonfinite_batch.maft")
                .string()
          : config.dump_path;

  AdamWOptions opts;
  opts.lr = config.lr;
  opts.weight_decay = config.weight_decay;
  AdamWState state;
  std::mt19937_64 order_rng(MixSeed(config.seed, kFinetuneOrderStream));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    std::vector<const SyntheticScene*> batch;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        order.resize(data.train.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      batch.push_back(&data.train[order[cursor++]]);
    }
    Tape tape(dtype);
    std::vector<SampleLoss> samples;
    std::vector<MaskProposalSet> proposals;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const SyntheticScene& scene = *batch[b];
      SeenPositions(data.text.vocab, scene.classes);
      proposals.push_back(PerturbProposals(
          scene.GtMasks(), scene.classes,
          MixSeed(MixSeed(config.seed, kFinetuneProposalStream + it), b),
          config.proposals));
      const Tensor teacher_pred = Classify(
          EncodePlain(teacher, scene.image, dtype), e_seen,
          student.config.temperature);
      samples.push_back(MaftSampleLoss(tape, student, teacher_pred, scene,
                                       proposals.back(), data.text, config));
    }
    LossBreakdown breakdown;
    Var total = CombineSampleLosses(tape, samples, config.lambda, &breakdown);
    Gradients grads;
    bool finite = std::isfinite(breakdown.total);
    if (finite) {
      grads = tape.Backward(total);
      finite = GradientsFinite(grads);
    }
    if (!finite) {
      DumpBatch(dump_path, it, batch, proposals, breakdown);
      Fail(ErrorCode::kNumeric, "non-finite loss or gradient at iteration " +
                                    std::to_string(it) + "; batch dumped to " +
                                    dump_path);
    }
    AdamWStep(student.params, grads, opts, state);
    result.curve.push_back(breakdown);
    const bool last = it + 1 == config.iterations;
    if (on_snapshot && ((it + 1) % config.eval_every == 0 || last)) {
      on_snapshot(it + 1, student);
    }
  }
  return result;
}

}  // namespace maft
