#pragma once

#include <cstdint>
#include <vector>

#include "lqteam/grid.hpp"
#include "lqteam/linalg.hpp"

namespace lqteam {

// One time-gridded sample path: state, per-DM observations, filter states,
// controls, and the driving Brownian increments. All arrays share the grid
// length K+1; observation processes start at zero. Increment slot k holds the
// noise applied on [t_k, t_{k+1}) (slot K unused, kept zero).
struct Trajectory {
  TimeGrid grid;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  std::vector<Vec> x;                      // [node], n
  std::vector<std::vector<Vec>> y;         // [dm][node], k_i
  std::vector<std::vector<Vec>> xhat;      // [dm][node], filter dim
  std::vector<std::vector<Vec>> u;         // [dm][node], d_i
  std::vector<Vec> dW;                     // [node], m
  std::vector<std::vector<Vec>> dB;        // [dm][node], k_i
  std::vector<std::vector<Vec>> innovation;  // [dm][node], dy - C xhat dt per step

  int num_dms() const { return static_cast<int>(y.size()); }
};

}  // namespace lqteam
