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

#ifndef MAFT_REPORT_HPP_
#define MAFT_REPORT_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace maft {

inline constexpr int kReportFormatVersion = 1;

// Ordered key=value report. Text form starts with "format_version=<v>".
class Report {
 public:
  void Set(std::string key, std::string value);
  void SetNumber(std::string key, double value);
  void SetInt(std::string key, long long value);
  // Appends every entry of other with the given key prefix.
  void Merge(const Report& other, const std::string& prefix = "");

  std::optional<std::string> Get(std::string_view key) const;
  double Number(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string Text() const;
  void Write(const std::string& path) const;
  static Report Parse(const std::string& text);
  static Report Read(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace maft

#endif  // MAFT_REPORT_HPP_
