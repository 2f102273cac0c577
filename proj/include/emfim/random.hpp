#pragma once

#include <cstdint>
#include <random>

namespace emfim {

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tags so that data draws and perturbation draws of one replicate never share a stream.
enum class StreamPurpose : std::uint64_t { data = 1, perturbation = 2, aux = 3 };

/**
 * Seed-addressed random source.
 *
 * A stream is fully determined by (seed, index, purpose), so replicate k
 * draws the same numbers whatever order or thread it runs on.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t index = 0,
                        StreamPurpose purpose = StreamPurpose::aux)
      : engine_(mix64(mix64(mix64(seed) ^ index) ^ static_cast<std::uint64_t>(purpose))) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double normal() { return normal_(engine_); }
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  /// Fair coin from the top bit of one engine draw.
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace emfim
