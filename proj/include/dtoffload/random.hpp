// Copyright 2026 The dtoffload Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DTOFFLOAD_RANDOM_HPP_
#define DTOFFLOAD_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace dtoff {

using Rng = std::mt19937_64;

// splitmix64 finaliser; used to derive independent stream seeds from one
// master seed so that every consumer of randomness is addressable.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index) noexcept {
  return derive_seed(derive_seed(master, stream), index);
}

// Named streams. Values are part of the reproducibility contract.
namespace streams {
inline constexpr std::uint64_t kServerPool = 1;
inline constexpr std::uint64_t kTrainScenario = 2;
inline constexpr std::uint64_t kBatchDraw = 3;
inline constexpr std::uint64_t kDnnInit = 4;
inline constexpr std::uint64_t kExtractorInit = 5;
inline constexpr std::uint64_t kProbe = 6;
inline constexpr std::uint64_t kRandomScheme = 7;
}  // namespace streams

}  // namespace dtoff

#endif  // DTOFFLOAD_RANDOM_HPP_
