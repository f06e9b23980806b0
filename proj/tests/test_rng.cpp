#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "lqteam/rng.hpp"

using namespace lqteam;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  const auto zeros = philox::block({0u, 0u, 0u, 0u}, {0u, 0u});
  REQUIRE(zeros[0] == 0x6627e8d5u);
  REQUIRE(zeros[1] == 0xe169c58du);
  REQUIRE(zeros[2] == 0xbc57ac4cu);
  REQUIRE(zeros[3] == 0x9b00dbd8u);
  const auto ones = philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
  REQUIRE(ones[0] == 0x408f276du);
  REQUIRE(ones[1] == 0x41c83b0eu);
  REQUIRE(ones[2] == 0xa20bc7c6u);
  REQUIRE(ones[3] == 0x6d5451fdu);
  const auto pi = philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                {0xa4093822u, 0x299f31d0u});
  REQUIRE(pi[0] == 0xd16cfe09u);
  REQUIRE(pi[1] == 0x94fdccebu);
  REQUIRE(pi[2] == 0x5001e420u);
  REQUIRE(pi[3] == 0x24126ea1u);
}

TEST_CASE("Counter RNG is a pure function of its key") {
  CounterRng a(12345), b(12345), c(54321);
  const auto pa = a.normal_pair(7, 13, 2, 0);
  const auto pb = b.normal_pair(7, 13, 2, 0);
  const auto pc = c.normal_pair(7, 13, 2, 0);
  REQUIRE(pa[0] == pb[0]);
  REQUIRE(pa[1] == pb[1]);
  REQUIRE(pa[0] != pc[0]);
}

TEST_CASE("Draw order does not matter") {
  CounterRng rng(99);
  const auto late = rng.normal_pair(3, 100, 1, 5);
  const auto early = rng.normal_pair(0, 0, 0, 0);
  CounterRng rng2(99);
  const auto early2 = rng2.normal_pair(0, 0, 0, 0);
  const auto late2 = rng2.normal_pair(3, 100, 1, 5);
  REQUIRE(late[0] == late2[0]);
  REQUIRE(early[0] == early2[0]);
}

TEST_CASE("Distinct channels give independent-looking streams") {
  CounterRng rng(2024);
  const auto a = rng.normal_pair(5, 5, NoiseChannel::state(), 0);
  const auto b = rng.normal_pair(5, 5, NoiseChannel::observation(0), 0);
  const auto c = rng.normal_pair(5, 5, NoiseChannel::observation(1), 0);
  REQUIRE(a[0] != b[0]);
  REQUIRE(b[0] != c[0]);
}

TEST_CASE("Gaussian moments over many draws") {
  CounterRng rng(7);
  const std::size_t num = 200000;
  double sum = 0.0, sumsq = 0.0, sum3 = 0.0;
  for (std::size_t p = 0; p < num; ++p) {
    const auto pr = rng.normal_pair(p, 0, 0, 0);
    for (double v : pr) {
      sum += v;
      sumsq += v * v;
      sum3 += v * v * v;
    }
  }
  const double count = 2.0 * static_cast<double>(num);
  const double mean = sum / count;
  const double var = sumsq / count - mean * mean;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(count));
  REQUIRE(var == Catch::Approx(1.0).epsilon(0.02));
  REQUIRE(std::abs(sum3 / count) < 0.02);
}

TEST_CASE("normal_vector matches pairwise draws") {
  CounterRng rng(11);
  const Vec v = rng.normal_vector(2, 3, 1, 5);
  REQUIRE(v.size() == 5);
  const auto p0 = rng.normal_pair(2, 3, 1, 0);
  const auto p2 = rng.normal_pair(2, 3, 1, 2);
  REQUIRE(v[0] == p0[0]);
  REQUIRE(v[1] == p0[1]);
  REQUIRE(v[4] == p2[0]);
}
