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

#include "maft/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "maft/error.hpp"

namespace maft {
namespace {

constexpr double kMaxPairCosine = 0.8;
constexpr std::uint64_t kBasisSeed = 0x5eedba5e;

}  // namespace

std::vector<std::size_t> ClassVocabulary::SeenIndices() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < size(); ++c) {
    if (splits[c] == Split::kSeen) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> ClassVocabulary::UnseenIndices() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < size(); ++c) {
    if (splits[c] == Split::kUnseen) out.push_back(c);
  }
  return out;
}

void ClassVocabulary::Validate() const {
  Check(names.size() == splits.size(), ErrorCode::kInvalidArgument,
        "vocabulary needs one split tag per class");
  std::set<std::string> unique;
  for (const std::string& n : names) {
    Check(!n.empty() && n.find_first_of(" \t\n=[]") == std::string::npos,
          ErrorCode::kInvalidArgument, "invalid class name '" + n + "'");
    Check(unique.insert(n).second, ErrorCode::kInvalidArgument,
          "duplicate class name '" + n + "'");
  }
}

ClassVocabulary MakeVocabulary(std::size_t num_classes) {
  ClassVocabulary vocab;
  for (std::size_t c = 0; c < num_classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class%02zu", c);
    vocab.names.emplace_back(name);
    vocab.splits.push_back(Split::kSeen);
  }
  return vocab;
}

ClassVocabulary SplitVocab(const ClassVocabulary& vocab, std::uint64_t seed,
                           double unseen_fraction) {
  vocab.Validate();
  const std::size_t c = vocab.size();
  const auto unseen = static_cast<std::size_t>(
      std::lround(unseen_fraction * static_cast<double>(c)));
  Check(unseen_fraction > 0.0 && unseen_fraction < 1.0 && unseen >= 1 &&
            unseen < c,
        ErrorCode::kInvalidArgument,
        "unseen fraction must leave at least one class on each side");
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  ClassVocabulary out = vocab;
  std::fill(out.splits.begin(), out.splits.end(), Split::kSeen);
  for (std::size_t i = 0; i < unseen; ++i) out.splits[order[i]] = Split::kUnseen;
  return out;
}

Tensor TextEmbeddings::Select(const std::vector<std::size_t>& classes) const {
  const std::size_t e = embed_dim();
  Tensor out({classes.size(), e}, matrix.dtype());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    Check(classes[i] < num_classes(), ErrorCode::kInvalidArgument,
          "class index out of range");
    std::copy_n(matrix.data() + classes[i] * e, e, out.data() + i * e);
  }
  return out;
}

Tensor AttributeBasis(std::size_t embed_dim) {
  const std::size_t k = std::min(kAttributeDim, embed_dim);
  std::mt19937_64 rng(kBasisSeed);
  std::normal_distribution<double> normal;
  Tensor basis({embed_dim, k});
  // Gram-Schmidt on Gaussian columns.
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col(embed_dim);
    for (double& v : col) v = normal(rng);
    for (std::size_t prev = 0; prev < j; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < embed_dim; ++i) {
        dot += col[i] * basis.at(i, prev);
      }
      for (std::size_t i = 0; i < embed_dim; ++i) {
        col[i] -= dot * basis.at(i, prev);
      }
    }
    double norm = 0.0;
    for (double v : col) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < embed_dim; ++i) basis.at(i, j) = col[i] / norm;
  }
  return basis;
}

TextEmbeddings EmbedClasses(const ClassVocabulary& vocab, std::size_t embed_dim,
                            std::uint64_t seed) {
  vocab.Validate();
  const std::size_t c = vocab.size();
  Check(c >= 2, ErrorCode::kInvalidArgument, "need at least two classes");
  const auto min_dim = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(c))));
  Check(embed_dim >= min_dim, ErrorCode::kInvalidArgument,
        "embed_dim " + std::to_string(embed_dim) + " cannot separate " +
            std::to_string(c) + " classes (need >= " +
            std::to_string(min_dim) + ")");
  const Tensor basis = AttributeBasis(embed_dim);
  const std::size_t k = basis.cols();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> attrs;
  constexpr int kMaxDraws = 100000;
  for (std::size_t cls = 0; cls < c; ++cls) {
    std::vector<double> z(k);
    bool accepted = false;
    for (int draw = 0; draw < kMaxDraws && !accepted; ++draw) {
      double norm = 0.0;
      for (double& v : z) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : z) v /= norm;
      accepted = std::all_of(attrs.begin(), attrs.end(), [&](const auto& o) {
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += z[i] * o[i];
        return dot < kMaxPairCosine;
      });
    }
    Check(accepted, ErrorCode::kConvergence,
          "could not draw separated class embeddings");
    attrs.push_back(z);
  }
  TextEmbeddings text;
  text.vocab = vocab;
  text.matrix = Tensor({c, embed_dim});
  for (std::size_t cls = 0; cls < c; ++cls) {
    double norm = 0.0;
    for (std::size_t i = 0; i < embed_dim; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < k; ++j) v += basis.at(i, j) * attrs[cls][j];
      text.matrix.at(cls, i) = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < embed_dim; ++i) text.matrix.at(cls, i) /= norm;
  }
  return text;
}

Tensor ClassAttributes(const TextEmbeddings& text) {
  const Tensor basis = AttributeBasis(text.embed_dim());
  const std::size_t c = text.num_classes(), e = text.embed_dim();
  Tensor attrs({c, kAttributeDim});
  for (std::size_t cls = 0; cls < c; ++cls) {
    for (std::size_t j = 0; j < basis.cols(); ++j) {
      double v = 0.0;
      for (std::size_t i = 0; i < e; ++i) {
        v += basis.at(i, j) * text.matrix.at(cls, i);
      }
      attrs.at(cls, j) = v;
    }
  }
  return attrs;
}

void StoreEmbeddings(const TextEmbeddings& text, TensorFile& file) {
  text.vocab.Validate();
  file.Put("text_embeddings", text.matrix);
  for (std::size_t c = 0; c < text.num_classes(); ++c) {
    file.SetMeta("vocabulary", text.vocab.names[c],
                 text.vocab.is_seen(c) ? "seen" : "unseen");
  }
}

TextEmbeddings ReadEmbeddings(const TensorFile& file) {
  TextEmbeddings text;
  for (const auto& [name, tag] : file.Section("vocabulary")) {
    Check(tag == "seen" || tag == "unseen", ErrorCode::kFormat,
          "bad split tag '" + tag + "' for class '" + name + "'");
    text.vocab.names.push_back(name);
    text.vocab.splits.push_back(tag == "seen" ? Split::kSeen : Split::kUnseen);
  }
  Check(text.vocab.size() >= 1, ErrorCode::kFormat,
        "missing [vocabulary] section");
  text.vocab.Validate();
  Tensor m = file.Get("text_embeddings");
  Check(m.rank() == 2 && m.rows() == text.vocab.size(), ErrorCode::kFormat,
        "text_embeddings has " + ShapeString(m.shape()) + " for " +
            std::to_string(text.vocab.size()) + " classes");
  Check(m.AllFinite(), ErrorCode::kFormat,
        "text_embeddings holds non-finite values");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) norm += m.at(r, j) * m.at(r, j);
    norm = std::sqrt(norm);
    Check(norm > 0.0, ErrorCode::kFormat, "text embedding row is all zero");
    if (std::abs(norm - 1.0) > 1e-5) {
      for (std::size_t j = 0; j < m.cols(); ++j) m.at(r, j) /= norm;
    }
  }
  text.matrix = std::move(m);
  return text;
}

void SaveEmbeddings(const TextEmbeddings& text, const std::string& path) {
  TensorFile file;
  StoreEmbeddings(text, file);
  file.Save(path);
}

TextEmbeddings LoadEmbeddings(const std::string& path) {
  return ReadEmbeddings(TensorFile::Load(path));
}

}  // namespace maft
