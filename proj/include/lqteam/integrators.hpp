#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lqteam/grid.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/schedule.hpp"

namespace lqteam {

// Non-finite value during deterministic integration. For Riccati flows this
// signals finite escape (loss of the PSD cone); it is reported, not masked.
class IntegrationBlowup : public std::runtime_error {
 public:
  IntegrationBlowup(const std::string& what, std::size_t node)
      : std::runtime_error(what + " at grid node " + std::to_string(node)), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

// Node values of an ODE solution together with the field evaluated at each
// node, for cubic Hermite dense output downstream.
struct OdeSolution {
  std::vector<Mat> value;  // one per grid node
  std::vector<Mat> slope;  // field(t_k, value_k)

  MatrixSchedule to_schedule(const TimeGrid& grid) const {
    return MatrixSchedule::tabulated(grid, value, slope);
  }
};

namespace detail {

inline void require_finite(const Mat& y, std::size_t node, const char* what) {
  if (!y.allFinite()) throw IntegrationBlowup(std::string(what) + ": non-finite value", node);
}

}  // namespace detail

// Classical RK4 sweep forward from value(0) = initial.
// Field signature: Mat f(double t, const Mat& y).
template <class Field>
OdeSolution rk4_forward(Field&& field, const Mat& initial, const TimeGrid& grid) {
  const std::size_t K = grid.num_steps();
  const double h = grid.dt();
  OdeSolution out;
  out.value.resize(K + 1);
  out.slope.resize(K + 1);
  out.value[0] = initial;
  for (std::size_t k = 0; k < K; ++k) {
    const double t = grid.node(k);
    const Mat& y = out.value[k];
    const Mat k1 = field(t, y);
    const Mat k2 = field(t + 0.5 * h, y + (0.5 * h) * k1);
    const Mat k3 = field(t + 0.5 * h, y + (0.5 * h) * k2);
    const Mat k4 = field(t + h, y + h * k3);
    out.slope[k] = k1;
    out.value[k + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::require_finite(out.value[k + 1], k + 1, "rk4_forward");
  }
  out.slope[K] = field(grid.node(K), out.value[K]);
  return out;
}

// Backward RK4 sweep from value(T) = terminal; classical 4th order on smooth
// fields. Returns the full node schedule with value[K] = terminal.
template <class Field>
OdeSolution rk4_backward(Field&& field, const Mat& terminal, const TimeGrid& grid) {
  const std::size_t K = grid.num_steps();
  const double h = -grid.dt();
  OdeSolution out;
  out.value.resize(K + 1);
  out.slope.resize(K + 1);
  out.value[K] = terminal;
  for (std::size_t k = K; k-- > 0;) {
    const double t = grid.node(k + 1);
    const Mat& y = out.value[k + 1];
    const Mat k1 = field(t, y);
    const Mat k2 = field(t + 0.5 * h, y + (0.5 * h) * k1);
    const Mat k3 = field(t + 0.5 * h, y + (0.5 * h) * k2);
    const Mat k4 = field(t + h, y + h * k3);
    out.slope[k + 1] = k1;
    out.value[k] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::require_finite(out.value[k], k, "rk4_backward");
  }
  out.slope[0] = field(grid.node(0), out.value[0]);
  return out;
}

// Transition operators Phi(t_k, t_j) of a linear generator A(t), stored as
// one-step factors Phi(t_{k+1}, t_k) so the cocycle property holds by
// composition. The adjoint family is obtained by transposition.
class TransitionFamily {
 public:
  TransitionFamily() = default;

  // Generator supplied as a dense-evaluable callable Mat A(double t).
  template <class Gen>
  TransitionFamily(Gen&& generator, Eigen::Index n, const TimeGrid& grid) : grid_(grid) {
    const std::size_t K = grid.num_steps();
    steps_.reserve(K);
    const Mat eye = Mat::Identity(n, n);
    for (std::size_t k = 0; k < K; ++k) {
      TimeGrid one(grid.dt(), grid.dt());
      const double t0 = grid.node(k);
      auto field = [&](double t, const Mat& y) -> Mat { return generator(t0 + t) * y; };
      steps_.push_back(rk4_forward(field, eye, one).value[1]);
      detail::require_finite(steps_.back(), k, "transition family");
    }
  }

  static TransitionFamily of_schedule(const MatrixSchedule& a, const TimeGrid& grid) {
    return TransitionFamily([&a](double t) { return a.eval(t); }, a.rows(), grid);
  }

  // Phi(t_to, t_from) for from <= to.
  Mat phi(std::size_t to, std::size_t from) const {
    if (from > to) throw std::invalid_argument("TransitionFamily: need from <= to");
    const Eigen::Index n = steps_.empty() ? 0 : steps_.front().rows();
    Mat acc = Mat::Identity(n, n);
    for (std::size_t k = from; k < to; ++k) acc = steps_[k] * acc;
    return acc;
  }

  // One-step factor Phi(t_{k+1}, t_k).
  const Mat& step(std::size_t k) const { return steps_.at(k); }

  const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  std::vector<Mat> steps_;
};

// Phi(t_to, t_from) solving dPhi/dt = A(t) Phi, Phi(from, from) = I.
inline Mat transition_matrix(const MatrixSchedule& a, const TimeGrid& grid, std::size_t from_node,
                             std::size_t to_node) {
  return TransitionFamily::of_schedule(a, grid).phi(to_node, from_node);
}

}  // namespace lqteam
