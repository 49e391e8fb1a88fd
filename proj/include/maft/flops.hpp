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

#ifndef MAFT_FLOPS_HPP_
#define MAFT_FLOPS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>

namespace maft {

// Where a multiply-accumulate is attributed.
enum class FlopStream : std::size_t {
  kShared = 0,   // patch embedding and the joint layers before the split
  kClassStream,  // replicated class tokens in masked layers
  kFeatureStream,
  kProjection,   // final layer norm + projection of class tokens
  kResize,       // sub-image construction for the merge baseline
};

inline constexpr std::size_t kNumFlopStreams = 5;

struct FlopTally {
  std::array<std::uint64_t, kNumFlopStreams> macs{};

  std::uint64_t operator[](FlopStream s) const {
    return macs[static_cast<std::size_t>(s)];
  }
  std::uint64_t Total() const;
  std::uint64_t EncoderTotal() const;  // everything except kResize
};

// Installs a tally for the current thread; kernels add to it while alive.
class FlopScope {
 public:
  explicit FlopScope(FlopTally& tally);
  ~FlopScope();
  FlopScope(const FlopScope&) = delete;
  FlopScope& operator=(const FlopScope&) = delete;

 private:
  FlopTally* previous_;
};

// Sets the stream subsequent kernel work is attributed to.
class FlopStreamScope {
 public:
  explicit FlopStreamScope(FlopStream stream);
  ~FlopStreamScope();
  FlopStreamScope(const FlopStreamScope&) = delete;
  FlopStreamScope& operator=(const FlopStreamScope&) = delete;

 private:
  FlopStream previous_;
};

void RecordMacs(std::uint64_t count);

}  // namespace maft

#endif  // MAFT_FLOPS_HPP_
