// Copyright 2026 The PQ Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pq {

/// Seeded generator whose derived draws (uniform, normal, shuffles) are
/// computed here rather than by the implementation-defined std distributions,
/// so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pq
