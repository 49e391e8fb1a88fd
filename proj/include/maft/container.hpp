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

#ifndef MAFT_CONTAINER_HPP_
#define MAFT_CONTAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maft/tensor.hpp"

namespace maft {

// Versioned tensor container used for checkpoints, embeddings and datasets.
//
// Layout:
//   "MAFT"                      4 bytes
//   version                     uint32, little-endian
//   header length in bytes      uint64, little-endian
//   header                      UTF-8 text, see below
//   payload                     tensors, little-endian, at header offsets
//
// The header is line oriented. It starts with "format_version=<v>" followed
// by sections. "[tensors]" lists "<name> <dtype> <d0>x<d1>... <offset>" with
// offsets relative to the start of the payload. Every other section holds
// ordered "key=value" lines.
class TensorFile {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void Put(std::string name, Tensor tensor);
  bool Contains(std::string_view name) const;
  const Tensor& Get(std::string_view name) const;
  std::vector<std::string> Names() const;

  void SetMeta(std::string_view section, std::string key, std::string value);
  std::optional<std::string> Meta(std::string_view section,
                                  std::string_view key) const;
  // Ordered entries of a section; empty if absent.
  std::vector<std::pair<std::string, std::string>> Section(
      std::string_view section) const;

  void Save(const std::filesystem::path& path) const;
  static TensorFile Load(const std::filesystem::path& path);

 private:
  struct SectionData {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };

  std::vector<std::pair<std::string, Tensor>> tensors_;
  std::vector<SectionData> sections_;
};

}  // namespace maft

#endif  // MAFT_CONTAINER_HPP_
