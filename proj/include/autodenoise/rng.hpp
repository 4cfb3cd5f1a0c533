#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace autodenoise {

// splitmix64 output mixer. Doubles as the hash used to derive independent
// substream seeds, so every consumer of randomness in a run reads its own
// stream keyed by (seed, purpose, epoch, sample index, ...).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) noexcept {
  std::uint64_t h = mix64(seed + kGoldenGamma);
  ((h = mix64(h + kGoldenGamma * (static_cast<std::uint64_t>(tags) + 1))), ...);
  return h;
}

// Deterministic generator over the splitmix64 sequence. Sampling transforms
// are self-contained so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept { return mix64(state_ += kGoldenGamma); }

  // uniform in [0, 1)
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform integer in [0, n); n >= 1; unbiased (rejection from the top)
  std::uint64_t next_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal, Marsaglia polar method
  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double k = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * k;
    have_spare_ = true;
    return u * k;
  }

  // Fisher-Yates
  template <class T>
  void shuffle(std::vector<T>& xs) noexcept {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(next_below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Substream purposes. Keeping recommender-side streams (shuffle, negative
// sampling) separate from controller-side streams (actions) makes training
// trajectories comparable across weighting schemes under one seed.
namespace stream {
constexpr std::uint64_t kInitRecommender = 1;
constexpr std::uint64_t kInitController = 2;
constexpr std::uint64_t kShuffle = 3;
constexpr std::uint64_t kNegative = 4;
constexpr std::uint64_t kAction = 5;
constexpr std::uint64_t kEvalNegative = 6;
constexpr std::uint64_t kWeightReport = 7;
constexpr std::uint64_t kSyntheticNoise = 8;
}  // namespace stream

}  // namespace autodenoise
