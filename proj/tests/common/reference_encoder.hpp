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

// Loop-level re-implementation of the encoder forward pass, written against
// the parameter layout only. Used as an oracle for the tape implementation.

#ifndef MAFT_TESTS_REFERENCE_ENCODER_HPP_
#define MAFT_TESTS_REFERENCE_ENCODER_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "maft/encoder.hpp"
#include "maft/tensor.hpp"

namespace maft::reference {

using Mat = std::vector<std::vector<double>>;

inline Mat FromTensor(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

inline std::vector<double> Row(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

inline Mat Affine(const Mat& x, const Tensor& w, const Tensor* b) {
  const std::size_t k = w.rows(), n = w.cols();
  Mat out(x.size(), std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = b != nullptr ? (*b)[j] : 0.0;
      for (std::size_t i = 0; i < k; ++i) s += x[r][i] * w.at(i, j);
      out[r][j] = s;
    }
  }
  return out;
}

inline Mat Norm(const Mat& x, const Tensor& gain, const Tensor& bias) {
  Mat out = x;
  for (auto& row : out) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t i = 0; i < row.size(); ++i)
      row[i] = (row[i] - mean) * inv * gain[i] + bias[i];
  }
  return out;
}

inline double Gelu(double x) {
  const double c = std::sqrt(2.0 / std::acos(-1.0));
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline Mat Plus(Mat a, const Mat& b) {
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] += b[r][c];
  return a;
}

// Attention of queries q over keys k / values v; allowed[i][j] gates keys.
inline Mat Attend(const Mat& q, const Mat& k, const Mat& v,
                  const std::vector<std::vector<bool>>& allowed,
                  std::size_t heads) {
  const std::size_t d = q[0].size(), dh = d / heads;
  Mat out(q.size(), std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> logits(k.size(),
                                 -std::numeric_limits<double>::infinity());
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (!allowed[i][j]) continue;
        double s = 0.0;
        for (std::size_t t = 0; t < dh; ++t)
          s += q[i][h * dh + t] * k[j][h * dh + t];
        logits[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, logits[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < k.size(); ++j)
        if (allowed[i][j]) z += std::exp(logits[j] - mx);
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (!allowed[i][j]) continue;
        const double p = std::exp(logits[j] - mx) / z;
        for (std::size_t t = 0; t < dh; ++t)
          out[i][h * dh + t] += p * v[j][h * dh + t];
      }
    }
  }
  return out;
}

struct LayerParams {
  const Tensor *ln1_g, *ln1_b, *ln2_g, *ln2_b, *in_w, *in_b, *out_w, *out_b,
      *fc1_w, *fc1_b, *fc2_w, *fc2_b;
};

inline LayerParams Layer(const EncoderWeights& w, std::size_t i) {
  const std::string p = "layers." + std::to_string(i) + ".";
  auto g = [&](const std::string& n) { return &w.params.Get(p + n).value; };
  return {g("ln_1.gain"),          g("ln_1.bias"),
          g("ln_2.gain"),          g("ln_2.bias"),
          g("attn.in_proj.weight"), g("attn.in_proj.bias"),
          g("attn.out_proj.weight"), g("attn.out_proj.bias"),
          g("mlp.fc1.weight"),     g("mlp.fc1.bias"),
          g("mlp.fc2.weight"),     g("mlp.fc2.bias")};
}

struct Qkv {
  Mat q, k, v;
};

inline Qkv Project(const Mat& x, const LayerParams& l) {
  const Mat all = Affine(x, *l.in_w, l.in_b);
  const std::size_t d = x[0].size();
  Qkv out;
  for (const auto& row : all) {
    out.q.emplace_back(row.begin(), row.begin() + d);
    out.k.emplace_back(row.begin() + d, row.begin() + 2 * d);
    out.v.emplace_back(row.begin() + 2 * d, row.end());
  }
  return out;
}

inline Mat Mlp(const Mat& x, const LayerParams& l) {
  Mat h = Affine(Norm(x, *l.ln2_g, *l.ln2_b), *l.fc1_w, l.fc1_b);
  for (auto& row : h)
    for (double& v : row) v = Gelu(v);
  return Plus(x, Affine(h, *l.fc2_w, l.fc2_b));
}

// Patch coverage >= 0.5 by direct pixel counting.
inline std::vector<bool> PatchMask(const Tensor& masks, std::size_t n,
                                   std::size_t patch, std::size_t grid) {
  const std::size_t size = grid * patch;
  std::vector<bool> on(grid * grid);
  for (std::size_t gr = 0; gr < grid; ++gr) {
    for (std::size_t gc = 0; gc < grid; ++gc) {
      double count = 0.0;
      for (std::size_t y = gr * patch; y < (gr + 1) * patch; ++y)
        for (std::size_t x = gc * patch; x < (gc + 1) * patch; ++x)
          count += masks[(n * size + y) * size + x];
      on[gr * grid + gc] = count * 2.0 >= static_cast<double>(patch * patch);
    }
  }
  return on;
}

// Embeddings [N, embed] for image [H,W,3] and masks [N,H,W].
inline Mat Forward(const EncoderWeights& w, const Tensor& image,
                   const Tensor& masks) {
  const EncoderConfig& c = w.config;
  const std::size_t p = c.patch_size, grid = c.grid(), hw = grid * grid;
  const std::size_t n = masks.dim(0), size = c.image_size;
  auto get = [&](const char* name) { return &w.params.Get(name).value; };

  Mat patches(hw, std::vector<double>(p * p * 3));
  for (std::size_t gr = 0; gr < grid; ++gr)
    for (std::size_t gc = 0; gc < grid; ++gc)
      for (std::size_t dy = 0; dy < p; ++dy)
        for (std::size_t dx = 0; dx < p; ++dx)
          for (std::size_t ch = 0; ch < 3; ++ch)
            patches[gr * grid + gc][(dy * p + dx) * 3 + ch] =
                image[((gr * p + dy) * size + gc * p + dx) * 3 + ch];
  Mat tokens;
  tokens.push_back(Row(*get("class_embedding")));
  for (auto& row : Affine(patches, *get("conv.weight"), nullptr))
    tokens.push_back(row);
  tokens = Plus(tokens, FromTensor(*get("positional_embedding")));
  tokens = Norm(tokens, *get("ln_pre.gain"), *get("ln_pre.bias"));

  const std::size_t L = c.start_mask_layer;
  for (std::size_t i = 0; i < L; ++i) {
    const LayerParams l = Layer(w, i);
    const Qkv a = Project(Norm(tokens, *l.ln1_g, *l.ln1_b), l);
    std::vector<std::vector<bool>> all(tokens.size(),
                                       std::vector<bool>(tokens.size(), true));
    tokens = Plus(tokens,
                  Affine(Attend(a.q, a.k, a.v, all, c.num_heads), *l.out_w,
                         l.out_b));
    tokens = Mlp(tokens, l);
  }

  Mat cls(n, tokens[0]);
  Mat feat(tokens.begin() + 1, tokens.end());
  // Class token i sees itself and its proposal's patches.
  std::vector<std::vector<bool>> cls_allowed(n, std::vector<bool>(n + hw));
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<bool> on = PatchMask(masks, i, p, grid);
    cls_allowed[i][i] = true;
    for (std::size_t j = 0; j < hw; ++j) cls_allowed[i][n + j] = on[j];
  }
  std::vector<std::vector<bool>> feat_allowed(hw, std::vector<bool>(hw, true));
  for (std::size_t i = L; i < c.num_layers; ++i) {
    const LayerParams l = Layer(w, i);
    const Qkv cq = Project(Norm(cls, *l.ln1_g, *l.ln1_b), l);
    const Qkv fq = Project(Norm(feat, *l.ln1_g, *l.ln1_b), l);
    Mat keys = cq.k, values = cq.v;
    keys.insert(keys.end(), fq.k.begin(), fq.k.end());
    values.insert(values.end(), fq.v.begin(), fq.v.end());
    cls = Mlp(Plus(cls, Affine(Attend(cq.q, keys, values, cls_allowed,
                                      c.num_heads),
                               *l.out_w, l.out_b)),
              l);
    feat = Mlp(Plus(feat, Affine(Attend(fq.q, fq.k, fq.v, feat_allowed,
                                        c.num_heads),
                                 *l.out_w, l.out_b)),
               l);
  }
  Mat out = Affine(Norm(cls, *get("ln_post.gain"), *get("ln_post.bias")),
                   *get("proj"), nullptr);
  for (auto& row : out) {
    double s = 0.0;
    for (double v : row) s += v * v;
    s = std::sqrt(s);
    for (double& v : row) v /= s;
  }
  return out;
}

}  // namespace maft::reference

#endif  // MAFT_TESTS_REFERENCE_ENCODER_HPP_
