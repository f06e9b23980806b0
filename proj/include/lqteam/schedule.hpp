#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "lqteam/grid.hpp"
#include "lqteam/linalg.hpp"

namespace lqteam {

// Time-varying matrix coefficient sampled on a TimeGrid. Callers supply either
// a constant (broadcast to every node) or a tabulated per-node schedule.
// Tabulated schedules may carry node derivatives, in which case eval() uses
// cubic Hermite dense output; otherwise it interpolates linearly. Constant
// schedules evaluate exactly everywhere.
class MatrixSchedule {
 public:
  MatrixSchedule() = default;

  static MatrixSchedule constant(Mat value) {
    MatrixSchedule s;
    s.constant_ = std::move(value);
    s.is_constant_ = true;
    return s;
  }

  static MatrixSchedule constant(double value) { return constant(Mat::Constant(1, 1, value)); }

  static MatrixSchedule tabulated(const TimeGrid& grid, std::vector<Mat> values,
                                  std::vector<Mat> slopes = {}) {
    if (values.size() != grid.num_nodes())
      throw std::invalid_argument("MatrixSchedule: need one sample per grid node");
    if (!slopes.empty() && slopes.size() != values.size())
      throw std::invalid_argument("MatrixSchedule: slopes must match values");
    MatrixSchedule s;
    s.grid_ = grid;
    s.values_ = std::move(values);
    s.slopes_ = std::move(slopes);
    return s;
  }

  bool is_constant() const { return is_constant_; }
  bool empty() const { return !is_constant_ && values_.empty(); }

  Eigen::Index rows() const { return is_constant_ ? constant_.rows() : values_.front().rows(); }
  Eigen::Index cols() const { return is_constant_ ? constant_.cols() : values_.front().cols(); }

  // Value at grid node k.
  const Mat& at(std::size_t k) const {
    if (is_constant_) return constant_;
    return values_.at(k);
  }

  // Dense output at arbitrary t in [0, T].
  Mat eval(double t) const {
    if (is_constant_) return constant_;
    const std::size_t k = grid_.floor_index(t);
    const double h = grid_.dt();
    const double theta = (t - grid_.node(k)) / h;
    if (theta <= 0.0) return values_[k];
    if (theta >= 1.0) return values_[k + 1];
    if (!slopes_.empty()) {
      // Cubic Hermite on [t_k, t_{k+1}].
      const double th2 = theta * theta;
      const double th3 = th2 * theta;
      const double h00 = 2 * th3 - 3 * th2 + 1;
      const double h10 = th3 - 2 * th2 + theta;
      const double h01 = -2 * th3 + 3 * th2;
      const double h11 = th3 - th2;
      return h00 * values_[k] + (h10 * h) * slopes_[k] + h01 * values_[k + 1] +
             (h11 * h) * slopes_[k + 1];
    }
    return (1.0 - theta) * values_[k] + theta * values_[k + 1];
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<Mat>& values() const { return values_; }
  bool has_slopes() const { return !slopes_.empty(); }

 private:
  bool is_constant_ = false;
  Mat constant_;
  TimeGrid grid_;
  std::vector<Mat> values_;
  std::vector<Mat> slopes_;
};

// Vector-valued schedule; stored as single-column matrices.
using VectorSchedule = MatrixSchedule;

inline double max_node_norm(const MatrixSchedule& s, const TimeGrid& grid) {
  double m = 0.0;
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) m = std::max(m, s.at(k).norm());
  return m;
}

}  // namespace lqteam
