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

#ifndef MAFT_TEXT_HPP_
#define MAFT_TEXT_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "maft/container.hpp"
#include "maft/tensor.hpp"

namespace maft {

enum class Split { kSeen, kUnseen };

struct ClassVocabulary {
  std::vector<std::string> names;
  std::vector<Split> splits;

  std::size_t size() const { return names.size(); }
  bool is_seen(std::size_t c) const { return splits.at(c) == Split::kSeen; }
  std::vector<std::size_t> SeenIndices() const;
  std::vector<std::size_t> UnseenIndices() const;
  // Names unique, one tag per name, no whitespace or '=' in names.
  void Validate() const;
};

// Default vocabulary "class00", "class01", ... all tagged seen.
ClassVocabulary MakeVocabulary(std::size_t num_classes);

// Deterministically tags round(unseen_fraction * C) classes unseen.
ClassVocabulary SplitVocab(const ClassVocabulary& vocab, std::uint64_t seed,
                           double unseen_fraction);

// Frozen class embeddings, C x embed_dim, rows unit-norm.
struct TextEmbeddings {
  ClassVocabulary vocab;
  Tensor matrix;

  std::size_t num_classes() const { return vocab.size(); }
  std::size_t embed_dim() const { return matrix.cols(); }
  // Rows for the given class indices, in order.
  Tensor Select(const std::vector<std::size_t>& classes) const;
};

// Width of the attribute subspace the synthetic embeddings live in.
inline constexpr std::size_t kAttributeDim = 6;

// Fixed orthonormal basis [embed_dim, min(kAttributeDim, embed_dim)]
// spanning the embedding subspace.
Tensor AttributeBasis(std::size_t embed_dim);

// Synthetic stand-in for a frozen text tower. Each class draws a Gaussian
// attribute vector, resampled until its cosine with every earlier class is
// below 0.8; rows are the attribute vectors mapped through AttributeBasis and
// normalised. Deterministic per seed.
TextEmbeddings EmbedClasses(const ClassVocabulary& vocab, std::size_t embed_dim,
                            std::uint64_t seed);

// Per-class attribute vectors [C, kAttributeDim], the coordinates of each
// embedding in AttributeBasis (zero-padded when embed_dim is narrower).
Tensor ClassAttributes(const TextEmbeddings& text);

// Container entry "text_embeddings" plus a [vocabulary] section of
// "name=seen|unseen" lines in class order.
void StoreEmbeddings(const TextEmbeddings& text, TensorFile& file);
TextEmbeddings ReadEmbeddings(const TensorFile& file);
void SaveEmbeddings(const TextEmbeddings& text, const std::string& path);
TextEmbeddings LoadEmbeddings(const std::string& path);

}  // namespace maft

#endif  // MAFT_TEXT_HPP_
