#include "nlsd/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nlsd {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes) {
  return fnv1a_accumulate(0xCBF29CE484222325ull, bytes);
}

std::uint64_t fnv1a_accumulate(std::uint64_t state, std::string_view bytes) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001B3ull;
  }
  return state;
}

std::uint64_t derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t k : keys) {
    s = splitmix64(s ^ (k + 0x9E3779B97F4A7C15ull));
  }
  return s;
}

std::uint64_t StreamRng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double StreamRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double StreamRng::next_uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double StreamRng::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // u1 in (0, 1] so the log is always finite.
  double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  cached_gaussian_ = r * std::sin(a);
  has_cached_gaussian_ = true;
  return r * std::cos(a);
}

int StreamRng::next_index(int n) {
  if (n <= 0) throw std::invalid_argument("StreamRng::next_index: n must be positive");
  return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

}  // namespace nlsd
