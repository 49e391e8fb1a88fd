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

#include "maft/flops.hpp"

namespace maft {
namespace {

thread_local FlopTally* active_tally = nullptr;
thread_local FlopStream active_stream = FlopStream::kShared;

}  // namespace

std::uint64_t FlopTally::Total() const {
  std::uint64_t total = 0;
  for (std::uint64_t m : macs) total += m;
  return total;
}

std::uint64_t FlopTally::EncoderTotal() const {
  return Total() - (*this)[FlopStream::kResize];
}

FlopScope::FlopScope(FlopTally& tally) : previous_(active_tally) {
  active_tally = &tally;
}

FlopScope::~FlopScope() { active_tally = previous_; }

FlopStreamScope::FlopStreamScope(FlopStream stream)
    : previous_(active_stream) {
  active_stream = stream;
}

FlopStreamScope::~FlopStreamScope() { active_stream = previous_; }

void RecordMacs(std::uint64_t count) {
  if (active_tally != nullptr) {
    active_tally->macs[static_cast<std::size_t>(active_stream)] += count;
  }
}

}  // namespace maft
