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

#include "maft/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "maft/error.hpp"
#include "maft/keyvalue.hpp"
#include "maft/objective.hpp"
#include "maft/pipeline.hpp"

namespace maft {
namespace {

constexpr std::uint64_t kEvalProposalStream = 7ull << 20;

std::vector<double> AverageRanks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::string Hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t Fnv1a(const std::string& s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Tensor Column(const Tensor& m, std::size_t c) {
  Tensor out({m.rows()});
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = m.at(r, c);
  return out;
}

}  // namespace

double HIoU(double miou_seen, double miou_unseen) {
  const double sum = miou_seen + miou_unseen;
  return sum == 0.0 ? 0.0 : 2.0 * miou_seen * miou_unseen / sum;
}

double Spearman(std::span<const double> x, std::span<const double> y) {
  Check(x.size() == y.size(), ErrorCode::kDimension,
        "spearman inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const std::vector<double> rx = AverageRanks(x), ry = AverageRanks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Report EvalReport::ToReport() const {
  Report r;
  for (const auto& [k, v] : config.ToPairs()) r.Set("eval." + k, v);
  r.Set("model_fingerprint", Hex(model_fingerprint));
  r.Set("config_fingerprint",
        Hex(Fnv1a(r.Text(), 0xcbf29ce484222325ull)));
  r.SetInt("scenes", static_cast<long long>(scenes));
  r.SetInt("proposals", static_cast<long long>(proposals));
  r.SetNumber("miou_seen", miou_seen);
  r.SetNumber("miou_unseen", miou_unseen);
  r.SetNumber("miou_all", miou_all);
  r.SetNumber("hiou", hiou);
  r.SetNumber("spearman_seen", spearman_seen);
  r.SetNumber("spearman_unseen", spearman_unseen);
  r.SetInt("spearman_seen_rows", static_cast<long long>(seen_rows));
  r.SetInt("spearman_unseen_rows", static_cast<long long>(unseen_rows));
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const std::string tag = class_seen[c] ? "seen" : "unseen";
    r.Set("class." + class_names[c] + ".split", tag);
    r.SetNumber("class." + class_names[c] + ".iou", per_class_iou[c]);
  }
  return r;
}

Tensor SyntheticProposalScores(const MaskProposalSet& proposals,
                               const ClassVocabulary& vocab) {
  const std::vector<std::size_t> seen = vocab.SeenIndices();
  Tensor ap({proposals.size(), seen.size()});
  for (std::size_t n = 0; n < proposals.size(); ++n) {
    const long src = proposals.source_class[n];
    if (src < 0) continue;
    const auto it =
        std::find(seen.begin(), seen.end(), static_cast<std::size_t>(src));
    if (it != seen.end()) ap.at(n, static_cast<std::size_t>(it - seen.begin())) = 1.0;
  }
  return ap;
}

Tensor ProposalScores(const EncoderWeights& weights, const Dataset& data,
                      const SyntheticScene& scene,
                      const MaskProposalSet& proposals,
                      const EvalConfig& config) {
  const double tau = weights.config.temperature;
  switch (config.mode) {
    case EvalMode::kFrozenMerge:
      return ClassifyByMerge(scene.image, proposals.masks, config.merge_mode,
                             weights, data.text.matrix, tau);
    case EvalMode::kIpClip:
      return Classify(EncodeIp(weights, scene.image, proposals.masks),
                      data.text.matrix, tau);
    case EvalMode::kUpperBound:
      return UpperBoundScores(scene.GtMasks(), scene.classes, proposals.masks,
                              data.text.num_classes());
  }
  Fail(ErrorCode::kInvalidArgument, "unknown eval mode");
}

EvalReport Evaluate(const EncoderWeights& weights, const Dataset& data,
                    const EvalConfig& config) {
  config.Validate();
  const std::vector<SyntheticScene>& scenes = data.split(config.split);
  Check(!scenes.empty(), ErrorCode::kInvalidArgument,
        "split '" + config.split + "' is empty");
  if (config.mode != EvalMode::kUpperBound) {
    Check(weights.config.image_size == data.config.image_size &&
              weights.config.embed_dim == data.text.embed_dim(),
          ErrorCode::kInvalidArgument,
          "model image_size/embed_dim do not match the dataset");
  }
  const ClassVocabulary& vocab = data.text.vocab;
  const std::size_t c = vocab.size();
  const std::vector<std::size_t> seen = vocab.SeenIndices();
  std::vector<std::uint64_t> inter(c, 0), uni(c, 0);
  EvalReport report;
  report.config = config;
  report.class_names = vocab.names;
  for (std::size_t k = 0; k < c; ++k) report.class_seen.push_back(vocab.is_seen(k));
  report.model_fingerprint = weights.params.Fingerprint();
  double rho_seen = 0.0, rho_unseen = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const SyntheticScene& scene = scenes[i];
    const MaskProposalSet proposals =
        PerturbProposals(scene.GtMasks(), scene.classes,
                         MixSeed(config.seed, kEvalProposalStream + i),
                         config.proposals);
    report.proposals += proposals.size();
    Tensor scores = ProposalScores(weights, data, scene, proposals, config);
    for (std::size_t k = 0; k < scene.classes.size(); ++k) {
      const Tensor col = Column(scores, scene.classes[k]);
      const std::span<const double> iou_row(
          proposals.iou.data() + k * proposals.size(), proposals.size());
      const double rho = Spearman(col.values(), iou_row);
      if (vocab.is_seen(scene.classes[k])) {
        rho_seen += rho;
        ++report.seen_rows;
      } else {
        rho_unseen += rho;
        ++report.unseen_rows;
      }
    }
    if (config.ensemble_lambda) {
      scores = Ensemble(SyntheticProposalScores(proposals, vocab), scores,
                        *config.ensemble_lambda, seen);
    }
    const std::vector<std::size_t> pred =
        ComposeOutput(scores, proposals.masks).Labels();
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const std::size_t g = scene.labels[p];
      if (pred[p] == g) {
        ++inter[g];
        ++uni[g];
      } else {
        ++uni[g];
        ++uni[pred[p]];
      }
    }
  }
  report.scenes = scenes.size();
  report.spearman_seen =
      report.seen_rows ? rho_seen / static_cast<double>(report.seen_rows) : 0.0;
  report.spearman_unseen =
      report.unseen_rows ? rho_unseen / static_cast<double>(report.unseen_rows)
                         : 0.0;
  double sum_s = 0.0, sum_u = 0.0;
  std::size_t n_s = 0, n_u = 0;
  report.per_class_iou.assign(c, -1.0);
  for (std::size_t k = 0; k < c; ++k) {
    if (uni[k] == 0) continue;
    const double iou = 100.0 * static_cast<double>(inter[k]) /
                       static_cast<double>(uni[k]);
    report.per_class_iou[k] = iou;
    if (vocab.is_seen(k)) {
      sum_s += iou;
      ++n_s;
    } else {
      sum_u += iou;
      ++n_u;
    }
  }
  report.miou_seen = n_s ? sum_s / static_cast<double>(n_s) : 0.0;
  report.miou_unseen = n_u ? sum_u / static_cast<double>(n_u) : 0.0;
  report.miou_all = (n_s + n_u) ? (sum_s + sum_u) / static_cast<double>(n_s + n_u)
                                : 0.0;
  report.hiou = HIoU(report.miou_seen, report.miou_unseen);
  return report;
}

double DistillationGap(const EncoderWeights& student,
                       const EncoderWeights& teacher, const Dataset& data,
                       const std::vector<SyntheticScene>& scenes) {
  Check(!scenes.empty(), ErrorCode::kInvalidArgument, "no scenes to score");
  double total = 0.0;
  std::size_t count = 0;
  for (const SyntheticScene& s : scenes) {
    const Tensor a_s = Classify(EncodePlain(student, s.image), data.text.matrix,
                                student.config.temperature);
    const Tensor a_t = Classify(EncodePlain(teacher, s.image), data.text.matrix,
                                student.config.temperature);
    for (std::size_t i = 0; i < a_s.size(); ++i) {
      total += std::abs(a_s[i] - a_t[i]);
    }
    count += a_s.size();
  }
  return total / static_cast<double>(count);
}

FlopPipeline ParseFlopPipeline(const std::string& name) {
  if (name == "merge") return FlopPipeline::kMerge;
  if (name == "ipclip") return FlopPipeline::kIpClip;
  Fail(ErrorCode::kInvalidArgument,
       "unknown pipeline '" + name + "' (merge, ipclip)");
}

std::string FlopPipelineName(FlopPipeline pipeline) {
  return pipeline == FlopPipeline::kMerge ? "merge" : "ipclip";
}

Report FlopReport::ToReport() const {
  Report r;
  r.Set("pipeline", FlopPipelineName(pipeline));
  r.SetInt("num_proposals", static_cast<long long>(num_proposals));
  for (const auto& [k, v] : encoder.ToPairs()) r.Set("encoder." + k, v);
  r.Set("encoder_macs", std::to_string(encoder_macs()));
  r.Set("resize_macs", std::to_string(resize_macs()));
  r.Set("total_macs", std::to_string(tally.Total()));
  r.Set("shared_macs", std::to_string(tally[FlopStream::kShared]));
  r.Set("class_stream_macs", std::to_string(tally[FlopStream::kClassStream]));
  r.Set("feature_stream_macs",
        std::to_string(tally[FlopStream::kFeatureStream]));
  r.Set("projection_macs", std::to_string(tally[FlopStream::kProjection]));
  r.Set("plain_pass_macs", std::to_string(plain_pass_macs));
  r.SetNumber("encoder_gmacs", static_cast<double>(encoder_macs()) * 1e-9);
  return r;
}

FlopReport CountFlops(FlopPipeline pipeline, const EncoderConfig& encoder,
                      std::size_t n, std::uint64_t seed, MergeMode merge_mode) {
  encoder.Validate();
  Check(n >= 1, ErrorCode::kInvalidArgument, "need at least one proposal");
  const EncoderWeights weights =
      EncoderWeights::Init(encoder, seed, DType::kFloat64);
  const std::size_t s = encoder.image_size;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor image({s, s, 3});
  for (double& v : image.values()) v = unit(rng);
  Tensor masks({n, s, s});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pos(0, s - 1);
    std::size_t y0 = pos(rng), y1 = pos(rng), x0 = pos(rng), x1 = pos(rng);
    if (y0 > y1) std::swap(y0, y1);
    if (x0 > x1) std::swap(x0, x1);
    for (std::size_t y = y0; y <= y1; ++y) {
      for (std::size_t x = x0; x <= x1; ++x) masks[(i * s + y) * s + x] = 1.0;
    }
  }
  FlopReport report;
  report.pipeline = pipeline;
  report.num_proposals = n;
  report.encoder = encoder;
  {
    FlopTally plain;
    FlopScope scope(plain);
    EncodePlain(weights, image);
    report.plain_pass_macs = plain.EncoderTotal();
  }
  FlopScope scope(report.tally);
  if (pipeline == FlopPipeline::kMerge) {
    for (const Tensor& sub : Merge(image, masks, merge_mode, s)) {
      EncodePlain(weights, sub);
    }
  } else {
    EncodeIp(weights, image, masks);
  }
  return report;
}

}  // namespace maft
