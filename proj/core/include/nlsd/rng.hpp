#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace nlsd {

// SplitMix64 finalizer. Used both as the generator step and to fold
// structured keys (image id hash, labeller index, round, epoch) into
// decorrelated stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over raw bytes; stable across platforms, used for string ids and
// dataset fingerprints.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a_accumulate(std::uint64_t state, std::string_view bytes);

// Folds (seed, key...) into a single stream seed. Every random draw in the
// project flows from one global seed through this function, so any draw is
// a pure function of its keys and can be reproduced in isolation.
std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

// Small deterministic generator over a derived stream.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t stream_seed) : state_(stream_seed) {}

  std::uint64_t next_u64();
  double next_double();                      // uniform in [0, 1)
  double next_uniform(double lo, double hi);
  double next_gaussian();                    // standard normal (Box-Muller)
  int next_index(int n);                     // uniform in {0, .., n-1}

 private:
  std::uint64_t state_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace nlsd
