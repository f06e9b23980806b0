#pragma once

#include <optional>
#include <vector>

#include "lqteam/integrators.hpp"
#include "lqteam/model.hpp"
#include "lqteam/strategy.hpp"

namespace lqteam {

// Realized per-DM filter output along one observation path.
struct FilterEntry {
  std::vector<Vec> xhat;        // [node]
  std::vector<Mat> P;           // [node], sym PSD
  std::vector<Vec> innovation;  // [node], dy - C xhat dt per step (slot K zero)
};

struct FilterBank {
  std::vector<FilterEntry> dm;
};

// Deterministic filter parameters consumed by the simulator: covariance and
// gain schedules per DM, plus the cross-DM mean-control schedule entering the
// team filter drift.
struct FilterBankParams {
  std::vector<std::vector<Mat>> P;     // [dm][node]
  std::vector<std::vector<Mat>> gain;  // [dm][node], L_i = P C^{[i],*} D^{-1}
  std::vector<Vec> u_bar;              // [node], stacked d (may be empty => zero)
};

class NumericalDegeneracy : public std::runtime_error {
 public:
  NumericalDegeneracy(const std::string& what, std::size_t node)
      : std::runtime_error(what + " at grid node " + std::to_string(node)), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

namespace detail {

inline void check_psd_path(const std::vector<Mat>& P, const char* what) {
  for (std::size_t k = 0; k < P.size(); ++k) {
    const double scale = 1.0 + P[k].cwiseAbs().maxCoeff();
    if (min_eigenvalue(P[k]) < -1e-9 * scale)
      throw NumericalDegeneracy(std::string(what) + ": covariance lost positive semidefiniteness",
                                k);
  }
}

}  // namespace detail

// Kalman-Bucy covariance for DM i observing its own subsystem block:
//   Pdot = A P + P A* - P C^{[i],*} D_ii^{-1} C^{[i]} P + G G*,  P(0) = P0,
// solved by RK4 with per-step symmetrization.
inline OdeSolution kalman_covariance(const LqTeamSpec& spec, int dm, const TimeGrid& grid) {
  const int off = spec.dims.state_offset(dm);
  const int ni = spec.dims.state[dm];
  auto field = [&](double t, const Mat& P) -> Mat {
    const Mat a = spec.A.eval(t);
    const Mat g = spec.G.eval(t);
    const Mat c = spec.C[dm].eval(t);  // k_i x n_i
    const Mat d = spec.D[dm].eval(t);
    // C^{[i]} P picks the DM's state rows of P.
    const Mat cp = c * P.middleRows(off, ni);         // k_i x n
    const Mat quad = cp.transpose() * d.llt().solve(cp);  // n x n
    return symmetrize(a * P + P * a.transpose() - quad + g * g.transpose());
  };
  OdeSolution sol = rk4_forward(field, symmetrize(spec.x0_cov), grid);
  for (auto& p : sol.value) p = symmetrize(p);
  return sol;
}

// Static-parameter channel covariance (message theta constant):
//   Pdot = -P C* D^{-1} C P,  P(0) = P0.   Used when C is y-independent.
inline OdeSolution static_channel_covariance(const BroadcastSpec& spec, int dm,
                                             const TimeGrid& grid) {
  auto field = [&](double t, const Mat& P) -> Mat {
    const Mat c = spec.C[dm].eval(t);
    const Mat d = spec.D[dm].eval(t);
    const Mat cp = c * P;
    return symmetrize(-(cp.transpose() * d.llt().solve(cp)));
  };
  OdeSolution sol = rk4_forward(field, symmetrize(spec.theta_cov), grid);
  for (auto& p : sol.value) p = symmetrize(p);
  return sol;
}

// Conditional-mean estimator of theta for receiver dm given one observation
// path on the grid:
//   dxhat = P C* D^{-1} (dy - C xhat dt),  xhat(0) = theta_mean.
// With a feedback-dependent channel the covariance is propagated with the
// path's C(t, y(t)) samples by the explicit (left-point) rule.
inline FilterEntry static_channel_filter(const BroadcastSpec& spec, int dm,
                                         const std::vector<Vec>& y_path, const TimeGrid& grid) {
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  FilterEntry out;
  out.xhat.resize(K + 1);
  out.P.resize(K + 1);
  out.innovation.assign(K + 1, Vec::Zero(spec.obs_dims[dm]));
  out.xhat[0] = spec.theta_mean;

  const bool feedback = spec.has_feedback(dm);
  if (!feedback) {
    OdeSolution cov = static_channel_covariance(spec, dm, grid);
    out.P = std::move(cov.value);
  } else {
    out.P[0] = symmetrize(spec.theta_cov);
  }

  for (std::size_t k = 0; k < K; ++k) {
    const double t = grid.node(k);
    const Mat c = spec.channel_gain(dm, t, y_path[k]);
    const Mat d = spec.D[dm].at(k);
    const Mat dinvc = d.llt().solve(c);
    if (feedback) {
      const Mat cp = c * out.P[k];
      out.P[k + 1] = symmetrize(out.P[k] - dt * cp.transpose() * d.llt().solve(cp));
    }
    const Vec dy = y_path[k + 1] - y_path[k];
    const Vec innov = dy - c * out.xhat[k] * dt;
    out.innovation[k] = innov;
    out.xhat[k + 1] = out.xhat[k] + out.P[k] * dinvc.transpose() * innov;
  }
  detail::check_psd_path(out.P, "static_channel_filter");
  return out;
}

// Kalman-Bucy filter for DM dm of an uncontrolled team spec (all B blocks
// zero), or one with a known deterministic input schedule t -> B(t) u(t):
//   dxhat = A xhat dt + (Bu)(t) dt + P C^{[i],*} D^{-1} (dy^i - C^{[i]} xhat dt).
inline FilterEntry kalman_bucy_filter(
    const LqTeamSpec& spec, int dm, const std::vector<Vec>& y_path, const TimeGrid& grid,
    const std::optional<std::vector<Vec>>& input_drift = std::nullopt) {
  if (!input_drift) {
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      if (spec.B.at(k).cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument(
            "kalman_bucy_filter: controlled dynamics need a known input schedule");
      if (spec.B.is_constant()) break;
    }
  }
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  FilterEntry out;
  out.xhat.resize(K + 1);
  out.innovation.assign(K + 1, Vec::Zero(spec.dims.observation[dm]));
  out.xhat[0] = spec.x0_mean;

  OdeSolution cov = kalman_covariance(spec, dm, grid);
  out.P = std::move(cov.value);
  detail::check_psd_path(out.P, "kalman_bucy_filter");

  for (std::size_t k = 0; k < K; ++k) {
    const Mat a = spec.A.at(k);
    const Mat c = spec.obs_row(dm, k);
    const Mat d = spec.D[dm].at(k);
    const Mat gain = out.P[k] * c.transpose() * d.llt().solve(Mat::Identity(d.rows(), d.cols()));
    const Vec dy = y_path[k + 1] - y_path[k];
    const Vec innov = dy - c * out.xhat[k] * dt;
    out.innovation[k] = innov;
    Vec drift = a * out.xhat[k] * dt;
    if (input_drift) drift += (*input_drift)[k] * dt;
    out.xhat[k + 1] = out.xhat[k] + drift + gain * innov;
  }
  return out;
}

// Team filter for DM dm under the declared moment closure: the conditional
// covariance term is replaced by the deterministic Riccati solution P^i, and
// the other DMs' actions enter through their mean schedules:
//   dxhat^i = A xhat^i dt + B^{(i)} u^i dt + sum_{j!=i} B^{(j)} ubar^j dt
//             + P^i C^{[i],*} D^{-1} (dy^i - C^{[i]} xhat^i dt),
// with u^i the DM's own realized control (a function of xhat^i).
inline FilterEntry team_coupled_filter(const LqTeamSpec& spec, const DecentralizedStrategy& strategy,
                                       int dm, const std::vector<Vec>& y_path,
                                       const TimeGrid& grid) {
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  const int N = spec.num_dms();
  FilterEntry out;
  out.xhat.resize(K + 1);
  out.innovation.assign(K + 1, Vec::Zero(spec.dims.observation[dm]));
  out.xhat[0] = spec.x0_mean;

  OdeSolution cov = kalman_covariance(spec, dm, grid);
  out.P = std::move(cov.value);
  detail::check_psd_path(out.P, "team_coupled_filter");

  for (std::size_t k = 0; k < K; ++k) {
    const Mat a = spec.A.at(k);
    const Mat c = spec.obs_row(dm, k);
    const Mat d = spec.D[dm].at(k);
    const Mat gain = out.P[k] * c.transpose() * d.llt().solve(Mat::Identity(d.rows(), d.cols()));
    const Vec dy = y_path[k + 1] - y_path[k];
    const Vec innov = dy - c * out.xhat[k] * dt;
    out.innovation[k] = innov;

    Vec drift = a * out.xhat[k];
    const Vec ui = strategy.control(dm, k, out.xhat[k]);
    drift += spec.control_block(dm, k) * ui;
    for (int j = 0; j < N; ++j) {
      if (j == dm) continue;
      const Vec ubar_j = strategy.mean_control[k].segment(spec.dims.control_offset(j),
                                                          spec.dims.control[j]);
      drift += spec.control_block(j, k) * ubar_j;
    }
    out.xhat[k + 1] = out.xhat[k] + drift * dt + gain * innov;
  }
  return out;
}

// Deterministic filter parameters for the team simulator (moment closure).
inline FilterBankParams make_team_filter_params(const LqTeamSpec& spec,
                                                const DecentralizedStrategy* strategy,
                                                const TimeGrid& grid) {
  const int N = spec.num_dms();
  FilterBankParams params;
  params.P.resize(N);
  params.gain.resize(N);
  for (int i = 0; i < N; ++i) {
    OdeSolution cov = kalman_covariance(spec, i, grid);
    params.P[i] = std::move(cov.value);
    params.gain[i].resize(grid.num_nodes());
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      const Mat c = spec.obs_row(i, k);
      const Mat d = spec.D[i].at(k);
      params.gain[i][k] = params.P[i][k] * c.transpose() *
                          d.llt().solve(Mat::Identity(d.rows(), d.cols()));
    }
  }
  if (strategy != nullptr) params.u_bar = strategy->mean_control;
  return params;
}

}  // namespace lqteam
