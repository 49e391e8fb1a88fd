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

#include "maft/config.hpp"

#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "maft/error.hpp"
#include "maft/keyvalue.hpp"

namespace maft {
namespace {

std::string JoinKinds(const std::vector<PerturbKind>& kinds) {
  std::string out;
  for (PerturbKind k : kinds) {
    if (!out.empty()) out += ',';
    out += PerturbKindName(k);
  }
  return out;
}

std::vector<PerturbKind> SplitKinds(const std::string& text) {
  std::vector<PerturbKind> kinds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) kinds.push_back(ParsePerturbKind(item));
  }
  return kinds;
}

void WriteSection(std::ostringstream& out, const char* name,
                  const KeyValues& pairs) {
  out << '\n' << '[' << name << "]\n";
  for (const auto& [k, v] : pairs) out << k << '=' << v << '\n';
}

}  // namespace

void PretrainConfig::Validate() const {
  Check(iterations >= 1 && batch_size >= 1, ErrorCode::kInvalidArgument,
        "pretrain iterations and batch_size must be >= 1");
  Check(lr > 0.0 && weight_decay >= 0.0, ErrorCode::kInvalidArgument,
        "pretrain lr must be > 0 and weight_decay >= 0");
  Check(label_smoothing >= 0.0 && label_smoothing < 1.0,
        ErrorCode::kInvalidArgument, "label_smoothing must be in [0,1)");
  Check(target_accuracy >= 0.0 && target_accuracy <= 1.0,
        ErrorCode::kInvalidArgument, "target_accuracy must be in [0,1]");
}

KeyValues PretrainConfig::ToPairs() const {
  return {
      {"iterations", std::to_string(iterations)},
      {"batch_size", std::to_string(batch_size)},
      {"lr", FormatDouble(lr)},
      {"weight_decay", FormatDouble(weight_decay)},
      {"warmup", std::to_string(warmup)},
      {"label_smoothing", FormatDouble(label_smoothing)},
      {"target_accuracy", FormatDouble(target_accuracy)},
      {"seed", std::to_string(seed)},
  };
}

void PretrainConfig::Set(const std::string& key, const std::string& value) {
  if (key == "iterations") {
    iterations = ParseSize(key, value);
  } else if (key == "batch_size") {
    batch_size = ParseSize(key, value);
  } else if (key == "lr") {
    lr = ParseDouble(key, value);
  } else if (key == "weight_decay") {
    weight_decay = ParseDouble(key, value);
  } else if (key == "warmup") {
    warmup = ParseSize(key, value);
  } else if (key == "label_smoothing") {
    label_smoothing = ParseDouble(key, value);
  } else if (key == "target_accuracy") {
    target_accuracy = ParseDouble(key, value);
  } else if (key == "seed") {
    seed = ParseUint64(key, value);
  } else {
    Fail(ErrorCode::kInvalidArgument, "unknown pretrain key '" + key + "'");
  }
}

bool SetProposalKey(ProposalSpec& spec, const std::string& key,
                    const std::string& value) {
  if (key == "proposal_kinds") {
    spec.kinds = SplitKinds(value);
  } else if (key == "proposal_max_radius") {
    spec.max_radius = ParseSize(key, value);
  } else if (key == "proposal_max_shift") {
    spec.max_shift = ParseSize(key, value);
  } else if (key == "proposal_blobs") {
    spec.blobs = ParseSize(key, value);
  } else {
    return false;
  }
  return true;
}

KeyValues ProposalPairs(const ProposalSpec& spec) {
  return {
      {"proposal_kinds", JoinKinds(spec.kinds)},
      {"proposal_max_radius", std::to_string(spec.max_radius)},
      {"proposal_max_shift", std::to_string(spec.max_shift)},
      {"proposal_blobs", std::to_string(spec.blobs)},
  };
}

void TrainConfig::Validate() const {
  Check(iterations >= 1, ErrorCode::kInvalidArgument,
        "iterations must be >= 1");
  Check(lr > 0.0, ErrorCode::kInvalidArgument, "lr must be > 0");
  Check(batch_size >= 1, ErrorCode::kInvalidArgument,
        "batch_size must be >= 1");
  Check(weight_decay >= 0.0 && lambda >= 0.0, ErrorCode::kInvalidArgument,
        "weight_decay and lambda must be >= 0");
  Check(!tau || *tau > 0.0, ErrorCode::kInvalidArgument, "tau must be > 0");
  Check(eval_every >= 1, ErrorCode::kInvalidArgument,
        "eval_every must be >= 1");
}

KeyValues TrainConfig::ToPairs() const {
  KeyValues kv = {
      {"iterations", std::to_string(iterations)},
      {"batch_size", std::to_string(batch_size)},
      {"lr", FormatDouble(lr)},
      {"weight_decay", FormatDouble(weight_decay)},
      {"lambda", FormatDouble(lambda)},
  };
  if (tau) kv.emplace_back("tau", FormatDouble(*tau));
  if (start_mask_layer) {
    kv.emplace_back("start_mask_layer", std::to_string(*start_mask_layer));
  }
  if (frozen_units) kv.emplace_back("frozen_units", frozen_units->ToString());
  kv.emplace_back("loss", AlignmentLossName(loss));
  kv.emplace_back("per_row_normalization",
                  per_row_normalization ? "true" : "false");
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("eval_every", std::to_string(eval_every));
  for (auto& p : ProposalPairs(proposals)) kv.push_back(std::move(p));
  if (!dump_path.empty()) kv.emplace_back("dump_path", dump_path);
  return kv;
}

void TrainConfig::Set(const std::string& key, const std::string& value) {
  if (key == "iterations") {
    iterations = ParseSize(key, value);
  } else if (key == "batch_size") {
    batch_size = ParseSize(key, value);
  } else if (key == "lr") {
    lr = ParseDouble(key, value);
  } else if (key == "weight_decay") {
    weight_decay = ParseDouble(key, value);
  } else if (key == "lambda") {
    lambda = ParseDouble(key, value);
  } else if (key == "tau") {
    tau = ParseDouble(key, value);
  } else if (key == "start_mask_layer") {
    start_mask_layer = ParseSize(key, value);
  } else if (key == "frozen_units") {
    frozen_units = FrozenUnits::Parse(value);
  } else if (key == "loss") {
    loss = ParseAlignmentLoss(value);
  } else if (key == "per_row_normalization") {
    per_row_normalization = ParseBool(key, value);
  } else if (key == "seed") {
    seed = ParseUint64(key, value);
  } else if (key == "eval_every") {
    eval_every = ParseSize(key, value);
  } else if (key == "dump_path") {
    dump_path = value;
  } else if (!SetProposalKey(proposals, key, value)) {
    Fail(ErrorCode::kInvalidArgument, "unknown train key '" + key + "'");
  }
}

EvalMode ParseEvalMode(const std::string& name) {
  if (name == "frozen_merge") return EvalMode::kFrozenMerge;
  if (name == "ipclip") return EvalMode::kIpClip;
  if (name == "upper_bound") return EvalMode::kUpperBound;
  Fail(ErrorCode::kInvalidArgument,
       "unknown eval mode '" + name + "' (frozen_merge, ipclip, upper_bound)");
}

std::string EvalModeName(EvalMode mode) {
  switch (mode) {
    case EvalMode::kFrozenMerge: return "frozen_merge";
    case EvalMode::kIpClip: return "ipclip";
    case EvalMode::kUpperBound: return "upper_bound";
  }
  return "ipclip";
}

void EvalConfig::Validate() const {
  Check(!ensemble_lambda || (*ensemble_lambda >= 0.0 && *ensemble_lambda <= 1.0),
        ErrorCode::kInvalidArgument, "ensemble lambda must be in [0,1]");
  Check(split == "train" || split == "val" || split == "test",
        ErrorCode::kInvalidArgument, "split must be train, val or test");
}

KeyValues EvalConfig::ToPairs() const {
  KeyValues kv = {
      {"mode", EvalModeName(mode)},
      {"merge_mode", MergeModeName(merge_mode)},
  };
  if (ensemble_lambda) {
    kv.emplace_back("ensemble_lambda", FormatDouble(*ensemble_lambda));
  }
  kv.emplace_back("split", split);
  kv.emplace_back("seed", std::to_string(seed));
  for (auto& p : ProposalPairs(proposals)) kv.push_back(std::move(p));
  return kv;
}

void EvalConfig::Set(const std::string& key, const std::string& value) {
  if (key == "mode") {
    mode = ParseEvalMode(value);
  } else if (key == "merge_mode") {
    merge_mode = ParseMergeMode(value);
  } else if (key == "ensemble_lambda") {
    if (value == "off") {
      ensemble_lambda.reset();
    } else {
      ensemble_lambda = ParseDouble(key, value);
    }
  } else if (key == "split") {
    split = value;
  } else if (key == "seed") {
    seed = ParseUint64(key, value);
  } else if (!SetProposalKey(proposals, key, value)) {
    Fail(ErrorCode::kInvalidArgument, "unknown eval key '" + key + "'");
  }
}

void ExperimentConfig::Validate() const {
  encoder.Validate();
  data.Validate();
  pretrain.Validate();
  train.Validate();
  eval.Validate();
  Check(encoder.image_size == data.image_size, ErrorCode::kInvalidArgument,
        "encoder.image_size must equal data.image_size");
  Check(encoder.embed_dim == data.embed_dim, ErrorCode::kInvalidArgument,
        "encoder.embed_dim must equal data.embed_dim");
  if (train.start_mask_layer) {
    Check(*train.start_mask_layer <= encoder.num_layers,
          ErrorCode::kInvalidArgument,
          "train.start_mask_layer exceeds encoder.num_layers");
  }
}

std::string ExperimentConfig::Text() const {
  std::ostringstream out;
  out << "format_version=" << kConfigFormatVersion << '\n';
  WriteSection(out, "encoder", encoder.ToPairs());
  WriteSection(out, "data", data.ToPairs());
  WriteSection(out, "pretrain", pretrain.ToPairs());
  WriteSection(out, "train", train.ToPairs());
  WriteSection(out, "eval", eval.ToPairs());
  return out.str();
}

void ExperimentConfig::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(out.good(), ErrorCode::kIo, "cannot open " + path + " for writing");
  out << Text();
  Check(out.good(), ErrorCode::kIo, "failed writing " + path);
}

ExperimentConfig ExperimentConfig::Parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    Fail(ErrorCode::kFormat, std::string("config: ") + e.message() +
                                 " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig cfg;
  bool versioned = false;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      if (name == "format_version") {
        Check(node.data() == std::to_string(kConfigFormatVersion),
              ErrorCode::kFormat,
              "unsupported config format_version " + node.data());
        versioned = true;
        continue;
      }
      // An empty section also parses as a childless node.
      Check(node.data().empty(), ErrorCode::kFormat,
            "unknown top-level key '" + name + "'");
      continue;
    }
    for (const auto& [key, value] : node) {
      Check(value.empty(), ErrorCode::kFormat, "nested config key " + key);
      cfg.Set(name + "." + key, value.data());
    }
  }
  Check(versioned, ErrorCode::kFormat, "config is missing format_version");
  cfg.Validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorCode::kIo, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str());
}

void ExperimentConfig::Set(const std::string& dotted_key,
                           const std::string& value) {
  const auto dot = dotted_key.find('.');
  Check(dot != std::string::npos, ErrorCode::kInvalidArgument,
        "config key '" + dotted_key + "' needs a section prefix");
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  if (section == "encoder") {
    encoder.Set(key, value);
  } else if (section == "data") {
    data.Set(key, value);
  } else if (section == "pretrain") {
    pretrain.Set(key, value);
  } else if (section == "train") {
    train.Set(key, value);
  } else if (section == "eval") {
    eval.Set(key, value);
  } else {
    Fail(ErrorCode::kInvalidArgument, "unknown config section '" + section +
                                          "'");
  }
}

void ExperimentConfig::Reseed(std::uint64_t seed) {
  data.seed = seed;
  pretrain.seed = seed;
  train.seed = seed;
  eval.seed = seed;
}

ExperimentConfig ExperimentPreset() {
  ExperimentConfig cfg;
  cfg.encoder.image_size = 64;
  cfg.encoder.patch_size = 8;
  cfg.data.image_size = 64;
  cfg.data.num_classes = 12;
  cfg.data.unseen_fraction = 0.25;
  cfg.data.train_scenes = 512;
  cfg.data.test_scenes = 96;
  cfg.train.proposals.max_radius = 8;
  cfg.train.proposals.max_shift = 16;
  cfg.eval.proposals = cfg.train.proposals;
  return cfg;
}

}  // namespace maft
