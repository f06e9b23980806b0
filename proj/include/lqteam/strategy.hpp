#pragma once

#include <cstddef>
#include <vector>

#include "lqteam/grid.hpp"
#include "lqteam/linalg.hpp"

namespace lqteam {

// Per-DM affine decision law in that DM's own filter state:
//   u^i(t_k) = gain_i(t_k) xhat^i(t_k) + offset_i(t_k).
// Adaptedness is structural: the law for DM i acts only on xhat^i, which is
// driven only by y^i. Gains/offsets are tabulated on the grid once; runtime
// control evaluation is a matrix-vector product.
struct DecentralizedStrategy {
  TimeGrid grid;
  std::vector<std::vector<Mat>> gains;    // [dm][node], d_i x (filter dim)
  std::vector<std::vector<Vec>> offsets;  // [dm][node], d_i
  std::vector<Vec> mean_control;          // [node], stacked d

  int num_dms() const { return static_cast<int>(gains.size()); }

  Vec control(int dm, std::size_t node, const Vec& xhat) const {
    return gains[dm][node] * xhat + offsets[dm][node];
  }

  static DecentralizedStrategy zero(const TimeGrid& grid, const std::vector<int>& control_dims,
                                    int filter_dim) {
    DecentralizedStrategy s;
    s.grid = grid;
    const std::size_t nodes = grid.num_nodes();
    int d = 0;
    for (int di : control_dims) d += di;
    s.gains.resize(control_dims.size());
    s.offsets.resize(control_dims.size());
    for (std::size_t i = 0; i < control_dims.size(); ++i) {
      s.gains[i].assign(nodes, Mat::Zero(control_dims[i], filter_dim));
      s.offsets[i].assign(nodes, Vec::Zero(control_dims[i]));
    }
    s.mean_control.assign(nodes, Vec::Zero(d));
    return s;
  }
};

}  // namespace lqteam
