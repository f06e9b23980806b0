#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "lqteam/linalg.hpp"

namespace lqteam {

// Philox4x32-10 counter-based generator. Draws are pure functions of
// (seed, path, node, channel, index), so path ensembles can be evaluated in
// any order or concurrently with bit-identical results.
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
  const std::array<std::uint32_t, 4> next = {
      static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
      static_cast<std::uint32_t>(p1),
      static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
      static_cast<std::uint32_t>(p0)};
  ctr = next;
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) round_once(ctr, key);
  return ctr;
}

}  // namespace philox

// Noise channel identifiers used when keying draws.
struct NoiseChannel {
  static constexpr std::uint32_t state() { return 0; }                 // dW
  static constexpr std::uint32_t observation(int dm) { return 1 + static_cast<std::uint32_t>(dm); }
  static constexpr std::uint32_t initial_state() { return 0xFFFFu; }   // x(0) / theta draw
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Pair of independent N(0,1) draws for (path, node, channel, pair_index).
  std::array<double, 2> normal_pair(std::uint64_t path, std::uint32_t node, std::uint32_t channel,
                                    std::uint32_t pair_index) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), node,
        (channel << 20) | pair_index};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = philox::block(ctr, key);
    const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    // u1 in (0,1], u2 in [0,1): Box-Muller stays finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  // Fills a vector of independent N(0,1) draws for one (path, node, channel).
  Vec normal_vector(std::uint64_t path, std::uint32_t node, std::uint32_t channel,
                    Eigen::Index len) const {
    Vec out(len);
    for (Eigen::Index i = 0; i < len; i += 2) {
      const auto pair = normal_pair(path, node, channel, static_cast<std::uint32_t>(i / 2));
      out[i] = pair[0];
      if (i + 1 < len) out[i + 1] = pair[1];
    }
    return out;
  }

 private:
  std::uint64_t seed_;
};

}  // namespace lqteam
