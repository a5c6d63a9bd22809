#pragma once

// Counter-based random streams.
//
// Algorithm "splitmix64-ctr": the i-th output of a stream with key K is
// mix64(K + (i + 1) * 0x9e3779b97f4a7c15), where mix64 is the SplitMix64
// finaliser. Substream s of a run seeded with S uses the key
// mix64(S ^ mix64(s + 0x632be59bd9b4e019)). Outputs depend only on (S, s, i),
// so results do not depend on thread scheduling or platform.

#include <cmath>
#include <cstdint>

namespace lnamc {

inline constexpr const char* kRngName = "splitmix64-ctr";

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr CounterRng substream(std::uint64_t seed, std::uint64_t stream) {
    return CounterRng(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  constexpr result_type operator()() { return mix64(key_ + ++counter_ * 0x9e3779b97f4a7c15ULL); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate, rate > 0.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lnamc
