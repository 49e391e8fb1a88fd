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

#include "maft/keyvalue.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "maft/error.hpp"

namespace maft {
namespace {

[[noreturn]] void BadValue(const std::string& key, const std::string& value) {
  Fail(ErrorCode::kInvalidArgument,
       "invalid value '" + value + "' for " + key);
}

}  // namespace

std::size_t ParseSize(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(ParseUint64(key, value));
}

std::uint64_t ParseUint64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-' || value[0] == '+') {
    BadValue(key, value);
  }
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  BadValue(key, value);
}

double ParseDouble(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::logic_error&) {
  }
  BadValue(key, value);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  BadValue(key, value);
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string FormatFixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace maft
