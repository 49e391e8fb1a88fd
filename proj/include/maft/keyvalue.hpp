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

#ifndef MAFT_KEYVALUE_HPP_
#define MAFT_KEYVALUE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>

namespace maft {

// Strict parsers for config values; the whole string must be consumed.
// Failures raise kInvalidArgument naming the key.
std::size_t ParseSize(const std::string& key, const std::string& value);
std::uint64_t ParseUint64(const std::string& key, const std::string& value);
double ParseDouble(const std::string& key, const std::string& value);
bool ParseBool(const std::string& key, const std::string& value);

// Round-trippable decimal form.
std::string FormatDouble(double v);
// Fixed-point with the given number of decimals.
std::string FormatFixed(double v, int decimals);

}  // namespace maft

#endif  // MAFT_KEYVALUE_HPP_
