#pragma once

#include <optional>
#include <utility>

#include "lqteam/filters.hpp"
#include "lqteam/fixed_point.hpp"
#include "lqteam/model.hpp"
#include "lqteam/report.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/strategy.hpp"

namespace lqteam {

class SpecInvalid : public std::runtime_error {
 public:
  explicit SpecInvalid(const std::string& what) : std::runtime_error("invalid spec: " + what) {}
};

struct TeamSolution {
  DecentralizedStrategy strategy;
  SolverReport report;
};

namespace detail {

inline void require_valid(const ValidationOutcome& outcome) {
  if (!outcome.pass()) throw SpecInvalid(outcome.summary());
}

// Tabulates the per-DM affine laws
//   u^i = -R_ii^{-1} [ (B^{(i),*} K^i + E^{[i]}) xhat^i
//                      + B^{(i),*} r^i + m^i + sum_{j!=i} R_ij ubar^j ]
// into gain/offset schedules acting on the DM's own filter state.
inline DecentralizedStrategy tabulate_strategy(const LqTeamSpec& spec,
                                               const std::vector<MatrixSchedule>& K,
                                               const FixedPointState& fp, const TimeGrid& grid) {
  const int N = spec.num_dms();
  DecentralizedStrategy s;
  s.grid = grid;
  s.gains.resize(N);
  s.offsets.resize(N);
  s.mean_control = fp.u_bar;
  for (int i = 0; i < N; ++i) {
    s.gains[i].resize(grid.num_nodes());
    s.offsets[i].resize(grid.num_nodes());
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      const Mat Bi = spec.control_block(i, k);
      const Mat Rii = spec.cost_R_block(i, i, k);
      const auto solver = Rii.llt();
      Mat gain_num = Bi.transpose() * K[i].at(k) + spec.cost_E_row(i, k);
      Vec off_num = Bi.transpose() * fp.r[i].at(k).col(0) + spec.cost_m_block(i, k);
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        off_num += spec.cost_R_block(i, j, k) *
                   fp.u_bar[k].segment(spec.dims.control_offset(j), spec.dims.control[j]);
      }
      s.gains[i][k] = -solver.solve(gain_num);
      s.offsets[i][k] = -solver.solve(off_num);
    }
  }
  return s;
}

}  // namespace detail

struct TeamSolverOptions {
  FixedPointOptions fixed_point;
};

// N-subsystem linear-quadratic team solution: per-DM Riccati equations, the
// backward offsets, the mean-field fixed point, and the per-DM filter
// covariances, assembled into tabulated decision laws.
inline TeamSolution solve_lq_team_n(const LqTeamSpec& spec, const TimeGrid& grid,
                                    const TeamSolverOptions& opts = {}) {
  detail::require_valid(validate_spec(spec));
  const int N = spec.num_dms();

  TeamSolution out;
  SolverReport& rep = out.report;
  rep.scenario = "lq_team";
  rep.fixed_point_tolerance = opts.fixed_point.tolerance;

  // Per-DM Riccati solves (independent).
  std::vector<MatrixSchedule> K(N);
  for (int i = 0; i < N; ++i) {
    std::optional<MatrixSchedule> cross;
    if (spec.has_E()) {
      std::vector<Mat> rows(grid.num_nodes());
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) rows[k] = spec.cost_E_row(i, k);
      cross = MatrixSchedule::tabulated(grid, std::move(rows));
    }
    MatrixSchedule Bi;
    {
      std::vector<Mat> cols(grid.num_nodes());
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) cols[k] = spec.control_block(i, k);
      Bi = MatrixSchedule::tabulated(grid, std::move(cols));
    }
    MatrixSchedule Rii;
    {
      std::vector<Mat> blocks(grid.num_nodes());
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) blocks[k] = spec.cost_R_block(i, i, k);
      Rii = MatrixSchedule::tabulated(grid, std::move(blocks));
    }
    RiccatiSolution sol = solve_riccati(spec.A, Bi, Rii, spec.H, spec.M_T, grid, cross);
    rep.max_symmetry_residual = std::max(rep.max_symmetry_residual, sol.max_symmetry_residual);
    rep.min_riccati_eigenvalue =
        i == 0 ? sol.min_eigenvalue : std::min(rep.min_riccati_eigenvalue, sol.min_eigenvalue);
    K[i] = std::move(sol.K);
  }
  rep.riccati = K;
  rep.riccati_terminal_residual = 0.0;  // terminal value assigned exactly

  // Mean-field fixed point.
  FixedPointState fp = mean_field_fixed_point(spec, K, grid, opts.fixed_point);
  rep.picard_iterations = fp.iterations;
  rep.fixed_point_residual = fp.residual;
  rep.residual_history = fp.residual_history;
  if (!fp.converged) rep.status = "non-converged";
  rep.offsets = fp.r;
  rep.mean_state = fp.x_bar;
  rep.mean_control = fp.u_bar;
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    rep.max_coupling_condition = std::max(
        rep.max_coupling_condition, condition_number(detail::coupling_matrix(spec, grid.node(k))));
  }

  // Filter covariances under the moment closure.
  rep.filter_cov.resize(N);
  for (int i = 0; i < N; ++i) rep.filter_cov[i] = kalman_covariance(spec, i, grid).to_schedule(grid);

  out.strategy = detail::tabulate_strategy(spec, K, fp, grid);
  return out;
}

// Two-subsystem solution; the N-DM solver reduces to it bit-exactly at N = 2.
inline TeamSolution solve_lq_team(const LqTeamSpec& spec, const TimeGrid& grid,
                                  const TeamSolverOptions& opts = {}) {
  if (spec.num_dms() > 2)
    throw SpecInvalid("solve_lq_team handles N <= 2; use solve_lq_team_n");
  return solve_lq_team_n(spec, grid, opts);
}

// Distributed filtering team (all B blocks zero): decision laws
//   u^i = -R_ii^{-1} ( m^i + E^{[i]} xhat^i + sum_{j!=i} R_ij ubar^j )
// with Kalman-Bucy filters and the mean system R ubar + E xbar + m = 0,
// xbardot = A xbar.
inline TeamSolution solve_filtering_team(const LqTeamSpec& spec, const TimeGrid& grid) {
  detail::require_valid(validate_spec(spec));
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    if (spec.B.at(k).cwiseAbs().maxCoeff() != 0.0)
      throw SpecInvalid("solve_filtering_team requires all B blocks zero");
    if (spec.B.is_constant()) break;
  }
  const int N = spec.num_dms();

  TeamSolution out;
  SolverReport& rep = out.report;
  rep.scenario = "filtering";

  OdeSolution x_bar = rk4_forward(
      [&](double t, const Mat& xb) -> Mat { return spec.A.eval(t) * xb; }, spec.x0_mean, grid);

  std::vector<Vec> u_bar(grid.num_nodes());
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    const Mat R = spec.R.at(k);
    const Vec rhs = spec.E_or_zero(k) * x_bar.value[k].col(0) + spec.m_or_zero(k);
    u_bar[k] = -R.llt().solve(rhs);
  }

  DecentralizedStrategy s;
  s.grid = grid;
  s.gains.resize(N);
  s.offsets.resize(N);
  s.mean_control = u_bar;
  for (int i = 0; i < N; ++i) {
    s.gains[i].resize(grid.num_nodes());
    s.offsets[i].resize(grid.num_nodes());
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      const Mat Rii = spec.cost_R_block(i, i, k);
      const auto solver = Rii.llt();
      Vec off = spec.cost_m_block(i, k);
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        off += spec.cost_R_block(i, j, k) *
               u_bar[k].segment(spec.dims.control_offset(j), spec.dims.control[j]);
      }
      s.gains[i][k] = -solver.solve(spec.cost_E_row(i, k));
      s.offsets[i][k] = -solver.solve(off);
    }
  }
  out.strategy = std::move(s);

  rep.mean_state = x_bar.to_schedule(grid);
  rep.mean_control = u_bar;
  rep.filter_cov.resize(N);
  for (int i = 0; i < N; ++i) rep.filter_cov[i] = kalman_covariance(spec, i, grid).to_schedule(grid);
  return out;
}

// Static broadcast channel team: mean controls from the node equation
// Lambda(t) ubar = M(t) + K(t) and per-receiver laws acting on the channel
// filters. The adjoint term is absent (the state is a static random vector).
inline TeamSolution solve_broadcast_team(const BroadcastSpec& spec, const TimeGrid& grid) {
  detail::require_valid(validate_spec(spec));
  const int N = spec.num_dms();
  const int d = spec.d();

  TeamSolution out;
  SolverReport& rep = out.report;
  rep.scenario = "broadcast";

  std::vector<Vec> u_bar(grid.num_nodes());
  double max_cond = 0.0;
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    Mat lambda = Mat::Identity(d, d);
    Vec rhs = Vec::Zero(d);
    for (int i = 0; i < N; ++i) {
      const int oi = spec.control_offset(i);
      const int di = spec.control_dims[i];
      const auto solver = spec.cost_R_block(i, i, k).llt();
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        lambda.block(oi, spec.control_offset(j), di, spec.control_dims[j]) =
            solver.solve(spec.cost_R_block(i, j, k));
      }
      rhs.segment(oi, di) =
          -solver.solve(Vec(spec.cost_E_row(i, k) * spec.theta_mean + spec.cost_m_block(i, k)));
    }
    const double cond = condition_number(lambda);
    max_cond = std::max(max_cond, cond);
    if (!std::isfinite(cond) || cond > 1e12) throw FixedPointSingular(k, cond);
    u_bar[k] = lambda.partialPivLu().solve(rhs);
  }
  rep.max_coupling_condition = max_cond;

  DecentralizedStrategy s;
  s.grid = grid;
  s.gains.resize(N);
  s.offsets.resize(N);
  s.mean_control = u_bar;
  for (int i = 0; i < N; ++i) {
    s.gains[i].resize(grid.num_nodes());
    s.offsets[i].resize(grid.num_nodes());
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      const auto solver = spec.cost_R_block(i, i, k).llt();
      Vec off = spec.cost_m_block(i, k);
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        off += spec.cost_R_block(i, j, k) *
               u_bar[k].segment(spec.control_offset(j), spec.control_dims[j]);
      }
      s.gains[i][k] = -solver.solve(spec.cost_E_row(i, k));
      s.offsets[i][k] = -solver.solve(off);
    }
  }
  out.strategy = std::move(s);

  rep.filter_cov.resize(N);
  for (int i = 0; i < N; ++i) {
    if (spec.has_feedback(i)) continue;  // covariance is path-dependent
    rep.filter_cov[i] = static_channel_covariance(spec, i, grid).to_schedule(grid);
  }
  return out;
}

// Centralized single-DM LQG reference, assembled only from the Riccati solve
// and the Kalman-Bucy covariance: u = -R^{-1} B* K xhat. Serves as an
// independent oracle for the N = 1 reduction of the team solver.
inline TeamSolution oracle_lqg(const LqTeamSpec& spec, const TimeGrid& grid) {
  detail::require_valid(validate_spec(spec));
  if (spec.num_dms() != 1) throw SpecInvalid("oracle_lqg requires a single decision maker");

  RiccatiSolution K = solve_riccati(spec.A, spec.B, spec.R, spec.H, spec.M_T, grid);

  TeamSolution out;
  out.report.scenario = "oracle_lqg";
  out.report.riccati = {K.K};
  out.report.max_symmetry_residual = K.max_symmetry_residual;
  out.report.min_riccati_eigenvalue = K.min_eigenvalue;
  out.report.filter_cov = {kalman_covariance(spec, 0, grid).to_schedule(grid)};

  DecentralizedStrategy s;
  s.grid = grid;
  s.gains.resize(1);
  s.offsets.resize(1);
  s.gains[0].resize(grid.num_nodes());
  s.offsets[0].resize(grid.num_nodes());
  s.mean_control.assign(grid.num_nodes(), Vec::Zero(spec.dims.d()));
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    const Mat R = spec.R.at(k);
    s.gains[0][k] = -R.llt().solve(Mat(spec.B.at(k).transpose() * K.K.at(k)));
    s.offsets[0][k] = Vec::Zero(spec.dims.d());
  }
  out.strategy = std::move(s);
  return out;
}

}  // namespace lqteam
