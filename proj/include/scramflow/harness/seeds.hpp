// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace scramflow::harness {

/// SplitMix64 finalizer: a bijection on 64-bit words with full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent random streams used by one realization.
enum class Stream : std::uint64_t { disorder = 1, sampling = 2, typicality = 3 };

/// Counter-based seed: a pure function of (master, cell, realization), so any realization can be
/// recomputed alone and worker scheduling never changes results.
constexpr std::uint64_t realization_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t k) {
  return mix64(mix64(mix64(master) ^ cell) + k);
}

constexpr std::uint64_t stream_seed(std::uint64_t realization, Stream s) {
  return mix64(realization ^ (static_cast<std::uint64_t>(s) * 0xd1b54a32d192ed03ULL));
}

}  // namespace scramflow::harness
