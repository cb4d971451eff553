#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace metalink {

using Rng = std::mt19937_64;

// Independent stream for (seed, tag...). Same inputs, same stream.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// 64-bit seed drawn from a stream, for handing to sub-components.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  Rng r = make_rng(seed, tags);
  return r();
}

}  // namespace metalink
