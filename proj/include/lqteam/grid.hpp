#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace lqteam {

// Uniform time grid on [0, T] with K steps of size dt. Nodes are
// t_k = k * dt, k = 0..K, and K * dt must reproduce T to one part in 1e9.
class TimeGrid {
 public:
  TimeGrid() = default;

  TimeGrid(double horizon, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
    const double steps = horizon / dt;
    const auto k = static_cast<std::size_t>(std::llround(steps));
    if (k == 0 || std::abs(static_cast<double>(k) * dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
      throw std::invalid_argument("TimeGrid: dt does not divide the horizon (Kdt != T to 1e-9)");
    }
    horizon_ = horizon;
    dt_ = dt;
    num_steps_ = k;
  }

  static TimeGrid with_steps(double horizon, std::size_t num_steps) {
    if (num_steps == 0) throw std::invalid_argument("TimeGrid: num_steps must be positive");
    return TimeGrid(horizon, horizon / static_cast<double>(num_steps));
  }

  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  std::size_t num_steps() const { return num_steps_; }
  std::size_t num_nodes() const { return num_steps_ + 1; }

  double node(std::size_t k) const { return static_cast<double>(k) * dt_; }

  // Index of the last node at or before time t (clamped to the grid).
  std::size_t floor_index(double t) const {
    if (t <= 0.0) return 0;
    auto k = static_cast<std::size_t>(t / dt_);
    if (k >= num_steps_) k = num_steps_ - 1;
    return k;
  }

  bool operator==(const TimeGrid& other) const {
    return horizon_ == other.horizon_ && dt_ == other.dt_ && num_steps_ == other.num_steps_;
  }

 private:
  double horizon_ = 0.0;
  double dt_ = 0.0;
  std::size_t num_steps_ = 0;
};

}  // namespace lqteam
