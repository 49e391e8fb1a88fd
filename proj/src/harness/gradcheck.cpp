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

#include "maft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "maft/error.hpp"
#include "maft/optim.hpp"
#include "maft/pipeline.hpp"
#include "maft/train.hpp"

namespace maft {
namespace {

struct Problem {
  EncoderWeights student;
  Dataset data;
  SyntheticScene scene;
  MaskProposalSet proposals;
  Tensor teacher_prediction;
  TrainConfig train;
};

Problem MakeProblem(const GradCheckOptions& o, std::uint64_t seed) {
  Problem p;
  p.data.config.num_classes = o.num_classes;
  p.data.config.image_size = o.encoder.image_size;
  p.data.config.embed_dim = o.encoder.embed_dim;
  p.data.config.classes_per_scene = o.classes_per_scene;
  p.data.text = EmbedClasses(
      SplitVocab(MakeVocabulary(o.num_classes), MixSeed(seed, 1), 0.25),
      o.encoder.embed_dim, MixSeed(seed, 2));
  p.scene = GenScene(MixSeed(seed, 3), p.data.text, SeenSceneSpec(p.data));
  p.proposals = PerturbProposals(p.scene.GtMasks(), p.scene.classes,
                                 MixSeed(seed, 4), o.proposals);
  EncoderConfig encoder = o.encoder;
  encoder.temperature = o.temperature;
  const EncoderWeights teacher =
      EncoderWeights::Init(encoder, MixSeed(seed, 5), DType::kFloat64);
  p.student = teacher;
  std::mt19937_64 rng(MixSeed(seed, 6));
  std::normal_distribution<double> noise(0.0, 0.02);
  for (Parameter& param : p.student.params) {
    for (double& v : param.value.values()) v += noise(rng);
  }
  p.student.SetAllTrainable(true);
  p.train.lambda = o.lambda;
  const Tensor e_seen = p.data.text.Select(p.data.text.vocab.SeenIndices());
  p.teacher_prediction =
      Classify(EncodePlain(teacher, p.scene.image), e_seen,
               teacher.config.temperature);
  return p;
}

Var Objective(Tape& tape, const Problem& p) {
  std::vector<SampleLoss> samples = {
      MaftSampleLoss(tape, p.student, p.teacher_prediction, p.scene,
                     p.proposals, p.data.text, p.train)};
  return CombineSampleLosses(tape, samples, p.train.lambda, nullptr);
}

double Evaluate(const Problem& p) {
  Tape tape(DType::kFloat64, false);
  return Objective(tape, p).value().item();
}

}  // namespace

Report GradCheckReport::ToReport() const {
  Report r;
  r.SetInt("params_checked", static_cast<long long>(params_checked));
  r.SetInt("probes", static_cast<long long>(entries.size()));
  r.SetNumber("max_rel_error", max_rel_error);
  r.SetNumber("tolerance", tolerance);
  r.SetNumber("temperature", temperature);
  r.Set("passed", passed ? "true" : "false");
  for (const GradCheckEntry& e : entries) {
    if (e.rel_error > tolerance) {
      r.SetNumber("fail.seed" + std::to_string(e.seed) + "." + e.param + "." +
                      (e.probe == "direction" ? std::string("direction")
                                              : "index" + e.probe.substr(6)),
                  e.rel_error);
    }
  }
  return r;
}

GradCheckReport RunGradCheck(const GradCheckOptions& options) {
  options.encoder.Validate();
  Check(!options.seeds.empty(), ErrorCode::kInvalidArgument,
        "grad check needs at least one seed");
  Check(options.step > 0.0, ErrorCode::kInvalidArgument, "step must be > 0");
  Check(options.temperature > 0.0, ErrorCode::kInvalidArgument,
        "temperature must be > 0");
  GradCheckReport report;
  report.tolerance = options.tolerance;
  report.temperature = options.temperature;
  for (std::uint64_t seed : options.seeds) {
    Problem p = MakeProblem(options, seed);
    Gradients grads;
    {
      Tape tape(DType::kFloat64);
      grads = tape.Backward(Objective(tape, p));
    }
    std::mt19937_64 rng(MixSeed(seed, 7));
    std::normal_distribution<double> normal;
    for (Parameter& param : p.student.params) {
      const Tensor& g = grads.at(param.name);
      const std::size_t n = g.size();
      ++report.params_checked;
      auto probe = [&](const std::vector<double>& dir, std::string label) {
        const Tensor saved = param.value;
        double analytic = 0.0;
        for (std::size_t i = 0; i < n; ++i) analytic += g[i] * dir[i];
        for (std::size_t i = 0; i < n; ++i) {
          param.value[i] = saved[i] + options.step * dir[i];
        }
        const double up = Evaluate(p);
        for (std::size_t i = 0; i < n; ++i) {
          param.value[i] = saved[i] - options.step * dir[i];
        }
        const double down = Evaluate(p);
        param.value = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        GradCheckEntry e{seed, param.name, std::move(label), analytic, numeric,
                         RelativeError(analytic, numeric)};
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        report.entries.push_back(std::move(e));
      };
      // Direction mixing the gradient with an independent random vector, so
      // the probe has signal even where the gradient is small.
      double gnorm = 0.0, rnorm = 0.0;
      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i) {
        r[i] = normal(rng);
        gnorm += g[i] * g[i];
        rnorm += r[i] * r[i];
      }
      gnorm = std::sqrt(gnorm);
      rnorm = std::sqrt(rnorm);
      std::vector<double> dir(n);
      double dnorm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dir[i] = (gnorm > 0.0 ? g[i] / gnorm : 0.0) + r[i] / rnorm;
        dnorm += dir[i] * dir[i];
      }
      dnorm = std::sqrt(dnorm);
      for (double& v : dir) v /= dnorm;
      probe(dir, "direction");
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      const std::size_t top = std::min(options.coordinate_checks, n);
      std::partial_sort(order.begin(), order.begin() + top, order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return std::abs(g[a]) > std::abs(g[b]);
                        });
      for (std::size_t t = 0; t < top; ++t) {
        std::vector<double> e(n, 0.0);
        e[order[t]] = 1.0;
        probe(e, "index " + std::to_string(order[t]));
      }
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace maft
