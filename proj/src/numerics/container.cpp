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

#include "maft/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "maft/error.hpp"

namespace maft {
namespace {

constexpr char kMagic[4] = {'M', 'A', 'F', 'T'};

template <typename T>
void PutLittleEndian(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T GetLittleEndian(const char* src) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

bool ValidToken(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=' ||
           c == '[' || c == ']';
  });
}

Shape ParseShape(const std::string& text) {
  Shape shape;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, 'x')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(part, &used);
      Check(used == part.size() && v > 0, ErrorCode::kFormat,
            "bad shape '" + text + "'");
      shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      Fail(ErrorCode::kFormat, "bad shape '" + text + "'");
    }
  }
  Check(!shape.empty(), ErrorCode::kFormat, "empty shape");
  return shape;
}

}  // namespace

void TensorFile::Put(std::string name, Tensor tensor) {
  Check(ValidToken(name), ErrorCode::kInvalidArgument,
        "tensor name '" + name + "' must be a non-empty token");
  Check(!tensor.empty(), ErrorCode::kInvalidArgument,
        "tensor '" + name + "' has no shape");
  for (auto& [n, t] : tensors_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  tensors_.emplace_back(std::move(name), std::move(tensor));
}

bool TensorFile::Contains(std::string_view name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& TensorFile::Get(std::string_view name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return t;
  }
  Fail(ErrorCode::kFormat, "missing tensor '" + std::string(name) + "'");
}

std::vector<std::string> TensorFile::Names() const {
  std::vector<std::string> names;
  for (const auto& e : tensors_) names.push_back(e.first);
  return names;
}

void TensorFile::SetMeta(std::string_view section, std::string key,
                         std::string value) {
  Check(ValidToken(section) && section != "tensors",
        ErrorCode::kInvalidArgument,
        "invalid section name '" + std::string(section) + "'");
  Check(ValidToken(key), ErrorCode::kInvalidArgument,
        "invalid key '" + key + "'");
  Check(value.find('\n') == std::string::npos, ErrorCode::kInvalidArgument,
        "metadata values must be single-line");
  auto sit = std::find_if(sections_.begin(), sections_.end(),
                          [&](const SectionData& s) { return s.name == section; });
  if (sit == sections_.end()) {
    sections_.push_back(SectionData{std::string(section), {}});
    sit = sections_.end() - 1;
  }
  for (auto& [k, v] : sit->entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  sit->entries.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> TensorFile::Meta(std::string_view section,
                                            std::string_view key) const {
  for (const SectionData& s : sections_) {
    if (s.name != section) continue;
    for (const auto& [k, v] : s.entries) {
      if (k == key) return v;
    }
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> TensorFile::Section(
    std::string_view section) const {
  for (const SectionData& s : sections_) {
    if (s.name == section) return s.entries;
  }
  return {};
}

void TensorFile::Save(const std::filesystem::path& path) const {
  std::string header = "format_version=" + std::to_string(kVersion) + "\n";
  header += "[tensors]\n";
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    header += name + " " + std::string(DTypeName(t.dtype())) + " " +
              ShapeString(t.shape()) + " " + std::to_string(offset) + "\n";
    offset += t.size() * (t.dtype() == DType::kFloat32 ? 4 : 8);
  }
  for (const SectionData& s : sections_) {
    header += "[" + s.name + "]\n";
    for (const auto& [k, v] : s.entries) header += k + "=" + v + "\n";
  }

  std::string blob(kMagic, 4);
  PutLittleEndian<std::uint32_t>(blob, kVersion);
  PutLittleEndian<std::uint64_t>(blob, header.size());
  blob += header;
  blob.reserve(blob.size() + offset);
  for (const auto& [name, t] : tensors_) {
    for (double v : t.values()) {
      if (t.dtype() == DType::kFloat32) {
        PutLittleEndian<float>(blob, static_cast<float>(v));
      } else {
        PutLittleEndian<double>(blob, v);
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(out.good(), ErrorCode::kIo, "cannot open '" + path.string() +
                                        "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  Check(out.good(), ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

TensorFile TensorFile::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  Check(blob.size() >= 16 && std::memcmp(blob.data(), kMagic, 4) == 0,
        ErrorCode::kFormat, "'" + path.string() + "' is not a MAFT container");
  const auto version = GetLittleEndian<std::uint32_t>(blob.data() + 4);
  Check(version == kVersion, ErrorCode::kFormat,
        "unsupported container version " + std::to_string(version));
  const auto header_len = GetLittleEndian<std::uint64_t>(blob.data() + 8);
  Check(header_len <= blob.size() - 16, ErrorCode::kFormat,
        "truncated container header");
  const std::string header = blob.substr(16, header_len);
  const std::size_t payload = 16 + header_len;

  TensorFile file;
  std::stringstream lines(header);
  std::string line;
  std::string section;
  bool saw_version = false;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      Check(line.back() == ']', ErrorCode::kFormat,
            "bad section line '" + line + "'");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    if (section.empty()) {
      Check(line == "format_version=" + std::to_string(kVersion),
            ErrorCode::kFormat, "unexpected header line '" + line + "'");
      saw_version = true;
      continue;
    }
    if (section == "tensors") {
      std::stringstream fields(line);
      std::string name, dtype_name, shape_text;
      std::uint64_t offset = 0;
      Check(static_cast<bool>(fields >> name >> dtype_name >> shape_text >>
                              offset),
            ErrorCode::kFormat, "bad tensor line '" + line + "'");
      const DType dtype = ParseDType(dtype_name);
      const Shape shape = ParseShape(shape_text);
      const std::size_t count = ShapeSize(shape);
      const std::size_t width = dtype == DType::kFloat32 ? 4 : 8;
      Check(payload + offset + count * width <= blob.size(),
            ErrorCode::kFormat, "tensor '" + name + "' exceeds file size");
      std::vector<double> values(count);
      const char* src = blob.data() + payload + offset;
      for (std::size_t i = 0; i < count; ++i) {
        values[i] = dtype == DType::kFloat32
                        ? static_cast<double>(
                              GetLittleEndian<float>(src + i * 4))
                        : GetLittleEndian<double>(src + i * 8);
      }
      file.Put(name, Tensor(shape, std::move(values), dtype));
      continue;
    }
    const std::size_t eq = line.find('=');
    Check(eq != std::string::npos, ErrorCode::kFormat,
          "bad metadata line '" + line + "'");
    file.SetMeta(section, line.substr(0, eq), line.substr(eq + 1));
  }
  Check(saw_version, ErrorCode::kFormat, "missing format_version");
  return file;
}

}  // namespace maft
