#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lqteam/integrators.hpp"
#include "lqteam/model.hpp"
#include "lqteam/report.hpp"
#include "lqteam/riccati.hpp"

namespace lqteam {

class FixedPointSingular : public std::runtime_error {
 public:
  FixedPointSingular(std::size_t node, double cond)
      : std::runtime_error("fixed-point system singular at grid node " + std::to_string(node) +
                           " (condition number " + std::to_string(cond) + ")"),
        node_(node),
        cond_(cond) {}
  std::size_t node() const { return node_; }
  double condition() const { return cond_; }

 private:
  std::size_t node_;
  double cond_;
};

using VectorFn = std::function<Vec(double)>;

namespace detail {

// Normalized coupling matrix Lambda(t) with blocks R_ii^{-1} R_ij off the
// diagonal and identities on it.
inline Mat coupling_matrix(const LqTeamSpec& spec, double t) {
  const int N = spec.num_dms();
  const int d = spec.dims.d();
  Mat lambda = Mat::Identity(d, d);
  const Mat R = spec.R.eval(t);
  for (int i = 0; i < N; ++i) {
    const int oi = spec.dims.control_offset(i);
    const int di = spec.dims.control[i];
    const Mat Rii = R.block(oi, oi, di, di);
    const auto solver = Rii.llt();
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      const int oj = spec.dims.control_offset(j);
      const int dj = spec.dims.control[j];
      lambda.block(oi, oj, di, dj) = solver.solve(R.block(oi, oj, di, dj));
    }
  }
  return lambda;
}

// Right side of the stacked mean-control node equation: block i is
// -R_ii^{-1} [ (B^{(i),*} K^i + E^{[i]}) x_bar + B^{(i),*} r^i + m^i ].
inline Vec coupling_rhs(const LqTeamSpec& spec, double t, const std::vector<Mat>& K,
                        const std::vector<Vec>& r, const Vec& x_bar) {
  const int N = spec.num_dms();
  Vec rhs(spec.dims.d());
  for (int i = 0; i < N; ++i) {
    const Mat Bi = spec.control_block_eval(i, t);
    const Mat Rii = spec.cost_R_block_eval(i, i, t);
    Vec qi = Bi.transpose() * (K[i] * x_bar + r[i]);
    qi += spec.cost_E_row_eval(i, t) * x_bar;
    if (spec.has_m())
      qi += spec.lin_m.eval(t).col(0).segment(spec.dims.control_offset(i), spec.dims.control[i]);
    rhs.segment(spec.dims.control_offset(i), spec.dims.control[i]) = -Rii.llt().solve(qi);
  }
  return rhs;
}

// Fourth-order finite-difference slopes of a tabulated vector schedule, used
// for Hermite dense output of the mean-control iterate. Each node uses the
// 5-point differentiation row of a window clamped to the grid.
inline std::vector<Mat> fd_slopes(const std::vector<Mat>& v, double h) {
  const std::size_t K = v.size() - 1;
  std::vector<Mat> s(v.size());
  if (K < 4) {
    for (std::size_t k = 0; k <= K; ++k) {
      if (k == 0)
        s[k] = (v[std::min<std::size_t>(1, K)] - v[0]) / h;
      else if (k == K)
        s[k] = (v[K] - v[K - 1]) / h;
      else
        s[k] = (v[k + 1] - v[k - 1]) / (2 * h);
    }
    return s;
  }
  static constexpr double kRows[5][5] = {{-25, 48, -36, 16, -3},
                                         {-3, -10, 18, -6, 1},
                                         {1, -8, 0, 8, -1},
                                         {-1, 6, -18, 10, 3},
                                         {3, -16, 36, -48, 25}};
  for (std::size_t k = 0; k <= K; ++k) {
    const std::size_t w = k <= 2 ? 0 : std::min(k - 2, K - 4);
    const std::size_t j = k - w;
    Mat acc = kRows[j][0] * v[w];
    for (std::size_t i = 1; i < 5; ++i) acc += kRows[j][i] * v[w + i];
    s[k] = acc / (12 * h);
  }
  return s;
}

}  // namespace detail

// Backward offset equations, one per DM, with the cross-DM mean controls as
// forcing:
//   rdot^i = -A* r^i - K^i v_i(t) - w_i(t),           r^i(T) = 0,
//   gamma_i = -R_ii^{-1} (B^{(i),*} r^i + m^i + sum_{j!=i} R_ij ubar^j),
//   v_i     = B^{(i)} gamma_i + sum_{j!=i} B^{(j)} ubar^j,
//   w_i     = F + E^{[i],*} gamma_i + sum_{j!=i} E^{[j],*} ubar^j.
// The K^i v_i term carries the closed-loop coefficient: expanding gamma_i
// gives the (-A* + K^i B^{(i)} R_ii^{-1} B^{(i),*}) r^i form.
inline std::vector<OdeSolution> solve_offset_odes(const LqTeamSpec& spec,
                                                  const std::vector<MatrixSchedule>& K,
                                                  const VectorFn& u_bar, const TimeGrid& grid) {
  const int N = spec.num_dms();
  const int n = spec.dims.n();
  std::vector<OdeSolution> out;
  out.reserve(N);
  for (int i = 0; i < N; ++i) {
    auto field = [&, i](double t, const Mat& r) -> Mat {
      const Mat A = spec.A.eval(t);
      const Mat Bi = spec.control_block_eval(i, t);
      const Mat Rii = spec.cost_R_block_eval(i, i, t);
      const Vec ub = u_bar(t);

      Vec gi = Bi.transpose() * r.col(0);
      if (spec.has_m())
        gi += spec.lin_m.eval(t).col(0).segment(spec.dims.control_offset(i), spec.dims.control[i]);
      Vec cross_v = Vec::Zero(n);
      Vec cross_w = Vec::Zero(n);
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        const Vec ubj = ub.segment(spec.dims.control_offset(j), spec.dims.control[j]);
        gi += spec.cost_R_block_eval(i, j, t) * ubj;
        cross_v += spec.control_block_eval(j, t) * ubj;
        cross_w += spec.cost_E_row_eval(j, t).transpose() * ubj;
      }
      const Vec gamma_i = -Rii.llt().solve(gi);
      const Vec v = Bi * gamma_i + cross_v;
      Vec w = cross_w + spec.cost_E_row_eval(i, t).transpose() * gamma_i;
      if (spec.has_F()) w += spec.lin_F.eval(t).col(0);

      return -(A.transpose() * r.col(0) + K[i].eval(t) * v + w);
    };
    out.push_back(rk4_backward(field, Mat::Zero(n, 1), grid));
  }
  return out;
}

struct FixedPointOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  double damping = 1.0;  // fallback 0.5 on residual increase
};

// Damped Picard iteration for the self-consistent mean-field system
// (ubar, r^1..r^N, xbar): given ubar, solve the offsets backward, integrate
// the mean state forward, and update ubar from the stacked node equation
// Lambda(t) ubar = rhs(t). The residual is the max-node Euclidean norm of the
// node-equation defect normalized by (1 + |ubar|).
inline FixedPointState mean_field_fixed_point(const LqTeamSpec& spec,
                                              const std::vector<MatrixSchedule>& K,
                                              const TimeGrid& grid,
                                              const FixedPointOptions& opts = {}) {
  const int N = spec.num_dms();
  const int d = spec.dims.d();
  const std::size_t nodes = grid.num_nodes();

  // Coupling matrix factorizations, checked for invertibility at every node.
  std::vector<Eigen::PartialPivLU<Mat>> lambda_lu(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    const Mat lambda = detail::coupling_matrix(spec, grid.node(k));
    const double cond = condition_number(lambda);
    if (!std::isfinite(cond) || cond > 1e12) throw FixedPointSingular(k, cond);
    lambda_lu[k].compute(lambda);
  }

  VectorSchedule u_bar = MatrixSchedule::constant(Mat::Zero(d, 1));
  auto u_bar_fn = [&u_bar](double t) -> Vec { return u_bar.eval(t).col(0); };

  FixedPointState state;
  double alpha = opts.damping;
  double prev_residual = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // Backward offsets and forward mean state under the current iterate.
    std::vector<OdeSolution> r = solve_offset_odes(spec, K, u_bar_fn, grid);
    auto mean_field = [&](double t, const Mat& xb) -> Mat {
      return spec.A.eval(t) * xb + spec.B.eval(t) * u_bar_fn(t);
    };
    OdeSolution x_bar = rk4_forward(mean_field, spec.x0_mean, grid);

    // Node-equation solve and defect of the current iterate.
    std::vector<Mat> u_new(nodes);
    double residual = 0.0;
    std::vector<Mat> Kk(N);
    std::vector<Vec> rk(N);
    for (std::size_t k = 0; k < nodes; ++k) {
      const double t = grid.node(k);
      for (int i = 0; i < N; ++i) {
        Kk[i] = K[i].at(k);
        rk[i] = r[i].value[k].col(0);
      }
      const Vec rhs = detail::coupling_rhs(spec, t, Kk, rk, x_bar.value[k].col(0));
      u_new[k] = lambda_lu[k].solve(rhs);
      const Vec u_cur = u_bar.eval(t).col(0);
      const Mat lambda = detail::coupling_matrix(spec, t);
      const double defect = (lambda * u_cur - rhs).norm() / (1.0 + u_cur.norm());
      residual = std::max(residual, defect);
    }
    state.residual_history.push_back(residual);
    state.iterations = iter + 1;

    if (residual <= opts.tolerance) {
      state.converged = true;
      state.residual = residual;
      state.u_bar.resize(nodes);
      for (std::size_t k = 0; k < nodes; ++k) state.u_bar[k] = u_bar.eval(grid.node(k)).col(0);
      state.r.clear();
      for (int i = 0; i < N; ++i) state.r.push_back(r[i].to_schedule(grid));
      state.x_bar = x_bar.to_schedule(grid);
      return state;
    }

    if (residual > prev_residual) alpha = 0.5;
    prev_residual = residual;

    // Damped update, tabulated with finite-difference Hermite slopes.
    std::vector<Mat> damped(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const Vec u_cur = u_bar.eval(grid.node(k)).col(0);
      damped[k] = (1.0 - alpha) * u_cur + alpha * u_new[k].col(0);
    }
    std::vector<Mat> slopes = detail::fd_slopes(damped, grid.dt());
    u_bar = MatrixSchedule::tabulated(grid, std::move(damped), std::move(slopes));
  }

  // Non-convergence: report the last iterate with its residual history.
  state.converged = false;
  state.residual = state.residual_history.empty() ? 0.0 : state.residual_history.back();
  std::vector<OdeSolution> r = solve_offset_odes(spec, K, u_bar_fn, grid);
  auto mean_field = [&](double t, const Mat& xb) -> Mat {
    return spec.A.eval(t) * xb + spec.B.eval(t) * u_bar_fn(t);
  };
  OdeSolution x_bar = rk4_forward(mean_field, spec.x0_mean, grid);
  state.u_bar.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) state.u_bar[k] = u_bar.eval(grid.node(k)).col(0);
  state.r.clear();
  for (int i = 0; i < N; ++i) state.r.push_back(r[i].to_schedule(grid));
  state.x_bar = x_bar.to_schedule(grid);
  return state;
}

}  // namespace lqteam
