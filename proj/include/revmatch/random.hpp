// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace revmatch {

/// Seeded generator with a portable bounded draw. The standard distributions are
/// implementation-defined, so every seeded result in the library goes through `below`.
class SeededRng
{
public:
  explicit SeededRng(std::uint64_t seed)
    : engine_(seed)
  {}

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound)
  {
    std::uint64_t const threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;)
    {
      std::uint64_t const r = engine_();
      if (r >= threshold)
        return r % bound;
    }
  }

  /// Fisher-Yates, drawing j = below(i + 1) for i from the back.
  template <typename T>
  void shuffle(std::span<T> items)
  {
    for (std::size_t i = items.size(); i > 1; --i)
    {
      auto const j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace revmatch
