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

#ifndef MAFT_ENCODER_HPP_
#define MAFT_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maft/autograd.hpp"
#include "maft/tensor.hpp"

namespace maft {

// Units that can be excluded from fine-tuning.
enum class FrozenUnit : unsigned {
  kConv = 1u << 0,
  kCls = 1u << 1,
  kPos = 1u << 2,
  kMlp = 1u << 3,
  kProj = 1u << 4,
};

class FrozenUnits {
 public:
  constexpr FrozenUnits() = default;
  constexpr explicit FrozenUnits(unsigned bits) : bits_(bits) {}

  static FrozenUnits None() { return FrozenUnits(); }
  // {conv, cls, pos, mlp}; the final projection stays trainable.
  static FrozenUnits Default();
  // Comma-separated unit names, "none" or empty for the empty set.
  static FrozenUnits Parse(const std::string& text);

  bool contains(FrozenUnit u) const {
    return (bits_ & static_cast<unsigned>(u)) != 0;
  }
  FrozenUnits with(FrozenUnit u) const {
    return FrozenUnits(bits_ | static_cast<unsigned>(u));
  }
  unsigned bits() const { return bits_; }
  std::string ToString() const;

  friend bool operator==(FrozenUnits, FrozenUnits) = default;

 private:
  unsigned bits_ = 0;
};

struct EncoderConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t num_layers = 4;
  std::size_t hidden_dim = 64;
  std::size_t num_heads = 4;
  std::size_t embed_dim = 32;
  std::size_t start_mask_layer = 3;
  FrozenUnits frozen_units = FrozenUnits::Default();
  double temperature = 0.01;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }

  // Masked attention starts at round(8 * depth / 12).
  static std::size_t DefaultStartLayer(std::size_t num_layers);

  void Validate() const;
  std::vector<std::pair<std::string, std::string>> ToPairs() const;
  // Applies recognised keys; unknown keys are rejected.
  void Set(const std::string& key, const std::string& value);
};

// Parameter naming:
//   conv.weight [p*p*3, d]        class_embedding [1, d]
//   positional_embedding [1+hw, d]
//   ln_pre.{gain,bias}            ln_post.{gain,bias}     proj [d, embed]
//   layers.<i>.ln_1.{gain,bias}   layers.<i>.attn.in_proj.{weight,bias}
//   layers.<i>.attn.out_proj.{weight,bias}
//   layers.<i>.ln_2.{gain,bias}   layers.<i>.mlp.{fc1,fc2}.{weight,bias}
struct EncoderWeights {
  EncoderConfig config;
  ParameterSet params;

  static EncoderWeights Init(const EncoderConfig& config, std::uint64_t seed,
                             DType dtype = DType::kFloat32);
  EncoderWeights Cast(DType dtype) const;
  // Sets trainable flags from the frozen-unit set.
  void ApplyFrozenUnits(FrozenUnits units);
  void SetAllTrainable(bool trainable);
};

// Which frozen unit a parameter belongs to, if any.
bool BelongsToUnit(const std::string& param_name, FrozenUnit unit);

// N x H x W binary masks -> N x (grid_h * grid_w). A patch is on when its
// covered fraction is >= 0.5. Output is row-major over the patch grid.
Tensor DownsampleMasks(const Tensor& masks, std::size_t grid_h,
                       std::size_t grid_w);

// B = 0 where [I(N,N); Flat(M)] is 1 and -inf elsewhere; N x (N + hw).
Tensor BuildAttentionBias(const Tensor& downsampled_masks);

// Per-layer attention weights bound onto a tape.
struct AttentionWeights {
  Var in_weight;   // [d, 3d]
  Var in_bias;     // [3d]
  Var out_weight;  // [d, d]
  Var out_bias;    // [d]
  std::size_t heads = 1;
};

AttentionWeights BindAttention(Tape& tape, const EncoderWeights& weights,
                               std::size_t layer);

// Class-token attention: queries from cls_star [N, d], keys and values from
// f_star [N + hw, d], additive bias [N, N + hw].
Var MaskedMha(Var cls_star, Var f_star, const Tensor& bias,
              const AttentionWeights& w, ops::AttentionProbe* probe = nullptr);

// Plain self-attention over feature tokens [hw, d].
Var StdMha(Var feat, const AttentionWeights& w);

// Optional taps on a forward pass.
struct ForwardProbe {
  // Feature tokens after every layer with index >= start_mask_layer.
  std::vector<Tensor> feature_tokens;
  // Class-stream attention for masked layers: [layer][head] -> [N, N + hw].
  std::vector<std::vector<Tensor>> class_attention;
  // Attention bias used by the masked layers.
  Tensor bias;
};

// Image [H, W, 3] and masks [N, H, W] -> L2-normalised embeddings [N, embed].
Var ForwardIp(Tape& tape, const EncoderWeights& weights, const Tensor& image,
              const Tensor& masks, ForwardProbe* probe = nullptr);

// ForwardIp with a single all-ones proposal; [1, embed].
Var ForwardPlain(Tape& tape, const EncoderWeights& weights,
                 const Tensor& image, ForwardProbe* probe = nullptr);

// Inference helpers on a non-recording tape.
Tensor EncodeIp(const EncoderWeights& weights, const Tensor& image,
                const Tensor& masks, DType dtype = DType::kFloat64);
Tensor EncodePlain(const EncoderWeights& weights, const Tensor& image,
                   DType dtype = DType::kFloat64);

// Checkpoint = tensor container with every parameter plus a [config] section.
void SaveCheckpoint(const EncoderWeights& weights, const std::string& path);
EncoderWeights LoadCheckpoint(const std::string& path);

}  // namespace maft

#endif  // MAFT_ENCODER_HPP_
