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

#include "maft/report.hpp"

#include <fstream>
#include <sstream>

#include "maft/error.hpp"
#include "maft/keyvalue.hpp"

namespace maft {

void Report::Set(std::string key, std::string value) {
  Check(!key.empty() && key.find_first_of("=\n") == std::string::npos &&
            value.find('\n') == std::string::npos,
        ErrorCode::kInvalidArgument, "invalid report entry '" + key + "'");
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void Report::SetNumber(std::string key, double value) {
  Set(std::move(key), FormatDouble(value));
}

void Report::SetInt(std::string key, long long value) {
  Set(std::move(key), std::to_string(value));
}

void Report::Merge(const Report& other, const std::string& prefix) {
  for (const auto& [k, v] : other.entries_) Set(prefix + k, v);
}

std::optional<std::string> Report::Get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

double Report::Number(std::string_view key) const {
  const auto v = Get(key);
  Check(v.has_value(), ErrorCode::kFormat,
        "report has no entry '" + std::string(key) + "'");
  return ParseDouble(std::string(key), *v);
}

std::string Report::Text() const {
  std::ostringstream out;
  out << "format_version=" << kReportFormatVersion << '\n';
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  return out.str();
}

void Report::Write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Check(out.good(), ErrorCode::kIo, "cannot open " + path + " for writing");
  out << Text();
  Check(out.good(), ErrorCode::kIo, "failed writing " + path);
}

Report Report::Parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Report report;
  bool versioned = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Check(eq != std::string::npos && eq > 0, ErrorCode::kFormat,
          "malformed report line '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (!versioned) {
      Check(key == "format_version", ErrorCode::kFormat,
            "report must start with format_version");
      Check(value == std::to_string(kReportFormatVersion), ErrorCode::kFormat,
            "unsupported report format_version " + value);
      versioned = true;
      continue;
    }
    report.Set(std::move(key), std::move(value));
  }
  Check(versioned, ErrorCode::kFormat, "empty report");
  return report;
}

Report Report::Read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Check(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str());
}

}  // namespace maft
