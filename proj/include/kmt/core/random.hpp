#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kmt {

namespace detail {

/// Finalizer of MurmurHash3 / SplitMix64: a bijective 64-bit avalanche mix.
constexpr std::uint64_t fmix64(std::uint64_t z) noexcept {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return fmix64(h);
}

// Integer labels live in a separate domain from string labels.
constexpr std::uint64_t hash_index(std::uint64_t index) noexcept {
  return fmix64(fmix64(index ^ 0x5851f42d4c957f2dULL) + 0x14057b7ef767814fULL);
}

constexpr std::uint64_t root_key(std::uint64_t seed) noexcept { return fmix64(seed + kGolden); }

constexpr std::uint64_t child_key(std::uint64_t parent, std::uint64_t label_hash) noexcept {
  return fmix64(parent ^ fmix64(label_hash + kGolden));
}

inline constexpr std::uint64_t kLeftLabel = hash_label("L");
inline constexpr std::uint64_t kRightLabel = hash_label("R");

}  // namespace detail

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key selects the stream, the 64-bit counter the position in it.
/// Satisfies UniformRandomBitGenerator.
class CounterEngine {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;

  explicit CounterEngine(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (cached_ == 0) {
      Block out = philox({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0, 0},
                         {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
      ++counter_;
      buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
      buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
      cached_ = 2;
    }
    return buffer_[2 - cached_--];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1p-53; }

  std::uint64_t key() const noexcept { return key_; }

  static Block philox(Block ctr, std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
  std::array<std::uint64_t, 2> buffer_{};
  int cached_ = 0;
};

/// A reproducible random stream identified by (seed, branch-label path).
///
/// Splitting derives a child key by hashing; siblings with distinct labels are
/// independent streams, and equal (seed, path) always yields identical draws.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), key_(detail::root_key(seed)) {}

  RandomSource split(std::string_view label) const {
    return RandomSource(seed_, extend(std::string(label)), detail::child_key(key_, detail::hash_label(label)));
  }

  RandomSource split(std::uint64_t index) const {
    return RandomSource(seed_, extend("#" + std::to_string(index)),
                        detail::child_key(key_, detail::hash_index(index)));
  }

  /// Fresh engine positioned at the start of this stream.
  CounterEngine engine() const noexcept { return CounterEngine(key_); }

  /// Same stream as split(index).engine(), without materializing the child's path.
  CounterEngine engine_for(std::uint64_t index) const noexcept {
    return CounterEngine(detail::child_key(key_, detail::hash_index(index)));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }
  const std::vector<std::string>& path() const noexcept { return path_; }

  /// "seed/label/label..." for provenance columns.
  std::string path_string() const {
    std::string out = std::to_string(seed_);
    for (const auto& label : path_) out += "/" + label;
    return out;
  }

  friend bool operator==(const RandomSource& a, const RandomSource& b) {
    return a.seed_ == b.seed_ && a.key_ == b.key_ && a.path_ == b.path_;
  }

 private:
  RandomSource(std::uint64_t seed, std::vector<std::string> path, std::uint64_t key)
      : seed_(seed), key_(key), path_(std::move(path)) {}

  std::vector<std::string> extend(std::string label) const {
    auto path = path_;
    path.push_back(std::move(label));
    return path;
  }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::vector<std::string> path_;
};

/// Free-function form of RandomSource::split.
inline RandomSource split_rng(const RandomSource& src, std::string_view label) { return src.split(label); }
inline RandomSource split_rng(const RandomSource& src, std::uint64_t index) { return src.split(index); }

}  // namespace kmt
