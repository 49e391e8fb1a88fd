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

#include "maft/encoder.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "maft/container.hpp"
#include "maft/error.hpp"
#include "maft/flops.hpp"
#include "maft/keyvalue.hpp"

namespace maft {
namespace {

constexpr double kLayerNormEps = 1e-5;

struct UnitName {
  FrozenUnit unit;
  const char* name;
};

constexpr UnitName kUnitNames[] = {
    {FrozenUnit::kConv, "conv"}, {FrozenUnit::kCls, "cls"},
    {FrozenUnit::kPos, "pos"},   {FrozenUnit::kMlp, "mlp"},
    {FrozenUnit::kProj, "proj"},
};

std::string LayerPrefix(std::size_t layer) {
  return "layers." + std::to_string(layer) + ".";
}

Tensor Normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// [H, W, 3] -> [hw, p*p*3], patches row-major, (dy, dx, channel) inside.
Tensor Patchify(const Tensor& image, std::size_t patch) {
  const std::size_t size = image.dim(0);
  const std::size_t grid = size / patch;
  Tensor out({grid * grid, patch * patch * 3});
  for (std::size_t gr = 0; gr < grid; ++gr) {
    for (std::size_t gc = 0; gc < grid; ++gc) {
      double* row = out.data() + (gr * grid + gc) * patch * patch * 3;
      for (std::size_t dy = 0; dy < patch; ++dy) {
        const double* src =
            image.data() + ((gr * patch + dy) * size + gc * patch) * 3;
        std::copy_n(src, patch * 3, row + dy * patch * 3);
      }
    }
  }
  return out;
}

struct Qkv {
  Var q, k, v;
};

Qkv Project(Var x, const AttentionWeights& w) {
  Var qkv = ops::AddBias(ops::MatMul(x, w.in_weight), w.in_bias);
  const std::size_t d = x.value().cols();
  return {ops::Cols(qkv, 0, d), ops::Cols(qkv, d, d), ops::Cols(qkv, 2 * d, d)};
}

Var OutProject(Var a, const AttentionWeights& w) {
  return ops::AddBias(ops::MatMul(a, w.out_weight), w.out_bias);
}

struct LayerBinding {
  Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  AttentionWeights attn;
  Var fc1_w, fc1_b, fc2_w, fc2_b;
};

LayerBinding BindLayer(Tape& tape, const EncoderWeights& w, std::size_t i) {
  const std::string p = LayerPrefix(i);
  auto watch = [&](const std::string& name) {
    return tape.Watch(w.params.Get(p + name));
  };
  LayerBinding b;
  b.ln1_gain = watch("ln_1.gain");
  b.ln1_bias = watch("ln_1.bias");
  b.ln2_gain = watch("ln_2.gain");
  b.ln2_bias = watch("ln_2.bias");
  b.attn = BindAttention(tape, w, i);
  b.fc1_w = watch("mlp.fc1.weight");
  b.fc1_b = watch("mlp.fc1.bias");
  b.fc2_w = watch("mlp.fc2.weight");
  b.fc2_b = watch("mlp.fc2.bias");
  return b;
}

Var Mlp(Var x, const LayerBinding& b) {
  Var h = ops::LayerNorm(x, b.ln2_gain, b.ln2_bias, kLayerNormEps);
  h = ops::Gelu(ops::AddBias(ops::MatMul(h, b.fc1_w), b.fc1_b));
  h = ops::AddBias(ops::MatMul(h, b.fc2_w), b.fc2_b);
  return ops::Add(x, h);
}

// Pre-norm block with joint attention over every token.
Var JointBlock(Var x, const LayerBinding& b) {
  Var h = ops::LayerNorm(x, b.ln1_gain, b.ln1_bias, kLayerNormEps);
  Qkv p = Project(h, b.attn);
  Var a = ops::Attention(p.q, p.k, p.v, nullptr, b.attn.heads);
  x = ops::Add(x, OutProject(a, b.attn));
  return Mlp(x, b);
}

}  // namespace

FrozenUnits FrozenUnits::Default() {
  return FrozenUnits()
      .with(FrozenUnit::kConv)
      .with(FrozenUnit::kCls)
      .with(FrozenUnit::kPos)
      .with(FrozenUnit::kMlp);
}

FrozenUnits FrozenUnits::Parse(const std::string& text) {
  FrozenUnits units;
  if (text.empty() || text == "none") return units;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    bool found = false;
    for (const UnitName& u : kUnitNames) {
      if (part == u.name) {
        units = units.with(u.unit);
        found = true;
      }
    }
    Check(found, ErrorCode::kInvalidArgument,
          "unknown frozen unit '" + part + "'");
  }
  return units;
}

std::string FrozenUnits::ToString() const {
  std::string out;
  for (const UnitName& u : kUnitNames) {
    if (!contains(u.unit)) continue;
    if (!out.empty()) out += ',';
    out += u.name;
  }
  return out.empty() ? "none" : out;
}

std::size_t EncoderConfig::DefaultStartLayer(std::size_t num_layers) {
  return static_cast<std::size_t>(
      std::lround(8.0 * static_cast<double>(num_layers) / 12.0));
}

void EncoderConfig::Validate() const {
  Check(patch_size > 0 && image_size > 0 && image_size % patch_size == 0,
        ErrorCode::kInvalidArgument,
        "image_size must be a positive multiple of patch_size");
  Check(hidden_dim > 0 && num_heads > 0 && hidden_dim % num_heads == 0,
        ErrorCode::kInvalidArgument, "hidden_dim must be divisible by num_heads");
  Check(num_layers > 0, ErrorCode::kInvalidArgument, "num_layers must be > 0");
  Check(embed_dim > 0, ErrorCode::kInvalidArgument, "embed_dim must be > 0");
  Check(start_mask_layer <= num_layers, ErrorCode::kInvalidArgument,
        "start_mask_layer must not exceed num_layers");
  Check(temperature > 0.0, ErrorCode::kInvalidArgument,
        "temperature must be > 0");
}

std::vector<std::pair<std::string, std::string>> EncoderConfig::ToPairs()
    const {
  return {
      {"image_size", std::to_string(image_size)},
      {"patch_size", std::to_string(patch_size)},
      {"num_layers", std::to_string(num_layers)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"num_heads", std::to_string(num_heads)},
      {"embed_dim", std::to_string(embed_dim)},
      {"start_mask_layer", std::to_string(start_mask_layer)},
      {"frozen_units", frozen_units.ToString()},
      {"temperature", FormatDouble(temperature)},
  };
}

void EncoderConfig::Set(const std::string& key, const std::string& value) {
  if (key == "image_size") {
    image_size = ParseSize(key, value);
  } else if (key == "patch_size") {
    patch_size = ParseSize(key, value);
  } else if (key == "num_layers") {
    num_layers = ParseSize(key, value);
  } else if (key == "hidden_dim") {
    hidden_dim = ParseSize(key, value);
  } else if (key == "num_heads") {
    num_heads = ParseSize(key, value);
  } else if (key == "embed_dim") {
    embed_dim = ParseSize(key, value);
  } else if (key == "start_mask_layer") {
    start_mask_layer = ParseSize(key, value);
  } else if (key == "frozen_units") {
    frozen_units = FrozenUnits::Parse(value);
  } else if (key == "temperature") {
    temperature = ParseDouble(key, value);
  } else {
    Fail(ErrorCode::kInvalidArgument, "unknown encoder key '" + key + "'");
  }
}

bool BelongsToUnit(const std::string& name, FrozenUnit unit) {
  switch (unit) {
    case FrozenUnit::kConv:
      return name.rfind("conv.", 0) == 0;
    case FrozenUnit::kCls:
      return name == "class_embedding";
    case FrozenUnit::kPos:
      return name == "positional_embedding";
    case FrozenUnit::kMlp:
      return name.rfind("layers.", 0) == 0 &&
             name.find(".mlp.") != std::string::npos;
    case FrozenUnit::kProj:
      return name == "proj";
  }
  return false;
}

EncoderWeights EncoderWeights::Init(const EncoderConfig& config,
                                    std::uint64_t seed, DType dtype) {
  config.Validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config.hidden_dim;
  const std::size_t p = config.patch_size;
  const std::size_t hw = config.num_patches();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  EncoderWeights w;
  w.config = config;
  auto add = [&](std::string name, Tensor t) {
    w.params.Add(std::move(name), t.AsType(dtype));
  };
  add("conv.weight",
      Normal({p * p * 3, d}, 1.0 / std::sqrt(static_cast<double>(p * p * 3)),
             rng));
  add("class_embedding", Normal({1, d}, inv_sqrt_d, rng));
  add("positional_embedding", Normal({1 + hw, d}, inv_sqrt_d, rng));
  add("ln_pre.gain", Tensor::Full({d}, 1.0));
  add("ln_pre.bias", Tensor::Zeros({d}));
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    const std::string pre = LayerPrefix(i);
    add(pre + "ln_1.gain", Tensor::Full({d}, 1.0));
    add(pre + "ln_1.bias", Tensor::Zeros({d}));
    add(pre + "attn.in_proj.weight", Normal({d, 3 * d}, inv_sqrt_d, rng));
    add(pre + "attn.in_proj.bias", Tensor::Zeros({3 * d}));
    add(pre + "attn.out_proj.weight", Normal({d, d}, inv_sqrt_d, rng));
    add(pre + "attn.out_proj.bias", Tensor::Zeros({d}));
    add(pre + "ln_2.gain", Tensor::Full({d}, 1.0));
    add(pre + "ln_2.bias", Tensor::Zeros({d}));
    add(pre + "mlp.fc1.weight", Normal({d, 4 * d}, inv_sqrt_d, rng));
    add(pre + "mlp.fc1.bias", Tensor::Zeros({4 * d}));
    add(pre + "mlp.fc2.weight",
        Normal({4 * d, d}, 0.5 * inv_sqrt_d, rng));
    add(pre + "mlp.fc2.bias", Tensor::Zeros({d}));
  }
  add("ln_post.gain", Tensor::Full({d}, 1.0));
  add("ln_post.bias", Tensor::Zeros({d}));
  add("proj", Normal({d, config.embed_dim}, inv_sqrt_d, rng));
  w.ApplyFrozenUnits(config.frozen_units);
  return w;
}

EncoderWeights EncoderWeights::Cast(DType dtype) const {
  EncoderWeights out;
  out.config = config;
  for (const Parameter& p : params) {
    out.params.Add(p.name, p.value.AsType(dtype), p.trainable);
  }
  return out;
}

void EncoderWeights::ApplyFrozenUnits(FrozenUnits units) {
  config.frozen_units = units;
  for (Parameter& p : params) {
    bool frozen = false;
    for (const UnitName& u : kUnitNames) {
      frozen = frozen || (units.contains(u.unit) && BelongsToUnit(p.name, u.unit));
    }
    p.trainable = !frozen;
  }
}

void EncoderWeights::SetAllTrainable(bool trainable) {
  for (Parameter& p : params) p.trainable = trainable;
}

Tensor DownsampleMasks(const Tensor& masks, std::size_t grid_h,
                       std::size_t grid_w) {
  Check(masks.rank() == 3, ErrorCode::kDimension,
        "masks must be N x H x W, got " + ShapeString(masks.shape()));
  const std::size_t n = masks.dim(0), h = masks.dim(1), w = masks.dim(2);
  Check(grid_h > 0 && grid_w > 0 && h % grid_h == 0 && w % grid_w == 0,
        ErrorCode::kDimension, "mask size does not divide into the patch grid");
  const std::size_t ph = h / grid_h, pw = w / grid_w;
  Tensor out({n, grid_h * grid_w});
  for (std::size_t i = 0; i < n; ++i) {
    const double* m = masks.data() + i * h * w;
    for (std::size_t gr = 0; gr < grid_h; ++gr) {
      for (std::size_t gc = 0; gc < grid_w; ++gc) {
        std::size_t covered = 0;
        for (std::size_t y = gr * ph; y < (gr + 1) * ph; ++y) {
          for (std::size_t x = gc * pw; x < (gc + 1) * pw; ++x) {
            covered += m[y * w + x] >= 0.5 ? 1 : 0;
          }
        }
        // covered / area >= 0.5, in integers.
        out[i * grid_h * grid_w + gr * grid_w + gc] =
            2 * covered >= ph * pw ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

Tensor BuildAttentionBias(const Tensor& downsampled) {
  Check(downsampled.rank() == 2, ErrorCode::kDimension,
        "downsampled masks must be N x hw");
  const std::size_t n = downsampled.rows(), hw = downsampled.cols();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Tensor bias({n, n + hw});
  for (std::size_t i = 0; i < n; ++i) {
    double* row = bias.data() + i * (n + hw);
    for (std::size_t j = 0; j < n; ++j) row[j] = i == j ? 0.0 : neg_inf;
    for (std::size_t j = 0; j < hw; ++j) {
      row[n + j] = downsampled[i * hw + j] >= 0.5 ? 0.0 : neg_inf;
    }
  }
  return bias;
}

AttentionWeights BindAttention(Tape& tape, const EncoderWeights& weights,
                               std::size_t layer) {
  const std::string p = LayerPrefix(layer) + "attn.";
  AttentionWeights w;
  w.in_weight = tape.Watch(weights.params.Get(p + "in_proj.weight"));
  w.in_bias = tape.Watch(weights.params.Get(p + "in_proj.bias"));
  w.out_weight = tape.Watch(weights.params.Get(p + "out_proj.weight"));
  w.out_bias = tape.Watch(weights.params.Get(p + "out_proj.bias"));
  w.heads = weights.config.num_heads;
  return w;
}

Var MaskedMha(Var cls_star, Var f_star, const Tensor& bias,
              const AttentionWeights& w, ops::AttentionProbe* probe) {
  Check(bias.rank() == 2 && bias.rows() == cls_star.value().rows() &&
            bias.cols() == f_star.value().rows(),
        ErrorCode::kDimension, "attention bias must be N x (N + hw)");
  Qkv queries = Project(cls_star, w);
  Qkv keys = Project(f_star, w);
  Var a = ops::Attention(queries.q, keys.k, keys.v, &bias, w.heads, probe);
  return OutProject(a, w);
}

Var StdMha(Var feat, const AttentionWeights& w) {
  Qkv p = Project(feat, w);
  return OutProject(ops::Attention(p.q, p.k, p.v, nullptr, w.heads), w);
}

Var ForwardIp(Tape& tape, const EncoderWeights& weights, const Tensor& image,
              const Tensor& masks, ForwardProbe* probe) {
  const EncoderConfig& cfg = weights.config;
  cfg.Validate();
  const std::size_t size = cfg.image_size;
  Check(image.rank() == 3 && image.dim(0) == size && image.dim(1) == size &&
            image.dim(2) == 3,
        ErrorCode::kDimension,
        "image must be " + std::to_string(size) + "x" + std::to_string(size) +
            "x3, got " + ShapeString(image.shape()));
  Check(masks.rank() == 3 && masks.dim(0) >= 1, ErrorCode::kDimension,
        "need at least one mask proposal (N x H x W)");
  Check(masks.dim(1) == size && masks.dim(2) == size, ErrorCode::kDimension,
        "mask spatial size " + std::to_string(masks.dim(1)) + "x" +
            std::to_string(masks.dim(2)) + " differs from image size " +
            std::to_string(size));
  const std::size_t n = masks.dim(0);
  const std::size_t hw = cfg.num_patches();
  const std::size_t L = cfg.start_mask_layer;
  auto param = [&](const char* name) {
    return tape.Watch(weights.params.Get(name));
  };

  Var tokens;
  {
    FlopStreamScope stream(FlopStream::kShared);
    Var patches = tape.Constant(Patchify(image, cfg.patch_size));
    Var feat = ops::MatMul(patches, param("conv.weight"));
    const Var parts[] = {param("class_embedding"), feat};
    tokens = ops::Add(ops::ConcatRows(parts), param("positional_embedding"));
    tokens = ops::LayerNorm(tokens, param("ln_pre.gain"), param("ln_pre.bias"),
                            kLayerNormEps);
    for (std::size_t i = 0; i < L; ++i) {
      tokens = JointBlock(tokens, BindLayer(tape, weights, i));
    }
  }

  Var cls = ops::RepeatRows(ops::Rows(tokens, 0, 1), n);
  Var feat = ops::Rows(tokens, 1, hw);
  Tensor bias;
  if (L < cfg.num_layers) {
    bias = BuildAttentionBias(DownsampleMasks(masks, cfg.grid(), cfg.grid()));
    if (probe != nullptr) probe->bias = bias;
  }
  for (std::size_t i = L; i < cfg.num_layers; ++i) {
    const LayerBinding b = BindLayer(tape, weights, i);
    Qkv fp;
    {
      FlopStreamScope stream(FlopStream::kFeatureStream);
      fp = Project(ops::LayerNorm(feat, b.ln1_gain, b.ln1_bias, kLayerNormEps),
                   b.attn);
    }
    {
      FlopStreamScope stream(FlopStream::kClassStream);
      Qkv cp = Project(
          ops::LayerNorm(cls, b.ln1_gain, b.ln1_bias, kLayerNormEps), b.attn);
      const Var keys[] = {cp.k, fp.k};
      const Var values[] = {cp.v, fp.v};
      ops::AttentionProbe attn_probe;
      Var a = ops::Attention(cp.q, ops::ConcatRows(keys),
                             ops::ConcatRows(values), &bias, b.attn.heads,
                             probe != nullptr ? &attn_probe : nullptr);
      if (probe != nullptr) {
        probe->class_attention.push_back(std::move(attn_probe.probabilities));
      }
      cls = Mlp(ops::Add(cls, OutProject(a, b.attn)), b);
    }
    {
      FlopStreamScope stream(FlopStream::kFeatureStream);
      Var a = ops::Attention(fp.q, fp.k, fp.v, nullptr, b.attn.heads);
      feat = Mlp(ops::Add(feat, OutProject(a, b.attn)), b);
    }
    if (probe != nullptr) probe->feature_tokens.push_back(feat.value());
  }

  FlopStreamScope stream(FlopStream::kProjection);
  Var out = ops::LayerNorm(cls, param("ln_post.gain"), param("ln_post.bias"),
                           kLayerNormEps);
  out = ops::MatMul(out, param("proj"));
  return ops::L2NormalizeRows(out);
}

Var ForwardPlain(Tape& tape, const EncoderWeights& weights,
                 const Tensor& image, ForwardProbe* probe) {
  const std::size_t size = weights.config.image_size;
  return ForwardIp(tape, weights, image, Tensor::Full({1, size, size}, 1.0),
                   probe);
}

Tensor EncodeIp(const EncoderWeights& weights, const Tensor& image,
                const Tensor& masks, DType dtype) {
  Tape tape(dtype, /*record=*/false);
  return ForwardIp(tape, weights, image, masks).value();
}

Tensor EncodePlain(const EncoderWeights& weights, const Tensor& image,
                   DType dtype) {
  Tape tape(dtype, /*record=*/false);
  return ForwardPlain(tape, weights, image).value();
}

void SaveCheckpoint(const EncoderWeights& weights, const std::string& path) {
  TensorFile file;
  for (const Parameter& p : weights.params) file.Put(p.name, p.value);
  for (const auto& [k, v] : weights.config.ToPairs()) {
    file.SetMeta("config", k, v);
  }
  file.Save(path);
}

EncoderWeights LoadCheckpoint(const std::string& path) {
  const TensorFile file = TensorFile::Load(path);
  EncoderConfig cfg;
  const auto entries = file.Section("config");
  Check(!entries.empty(), ErrorCode::kFormat,
        "checkpoint '" + path + "' has no [config] section");
  for (const auto& [k, v] : entries) cfg.Set(k, v);
  cfg.Validate();
  // Layout and shapes come from a fresh initialisation; values from the file.
  EncoderWeights w = EncoderWeights::Init(cfg, 0);
  EncoderWeights out;
  out.config = cfg;
  for (const Parameter& p : w.params) {
    const Tensor& t = file.Get(p.name);
    Check(t.shape() == p.value.shape(), ErrorCode::kFormat,
          "checkpoint tensor '" + p.name + "' has shape " +
              ShapeString(t.shape()) + ", expected " +
              ShapeString(p.value.shape()));
    Check(t.AllFinite(), ErrorCode::kFormat,
          "checkpoint tensor '" + p.name + "' holds non-finite values");
    out.params.Add(p.name, t, p.trainable);
  }
  return out;
}

}  // namespace maft
