#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqteam/model.hpp"
#include "lqteam/report.hpp"
#include "lqteam/strategy.hpp"
#include "lqteam/trajectory.hpp"

namespace lqteam {

namespace detail {

// Shortest round-trip formatting, deterministic across runs.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Trajectory CSV: t, x_1..x_n, then per DM y^i_*, xhat^i_*, u^i_*. A non-empty
// path_id prepends a path_id column (long format for multi-path files).
inline std::string trajectory_csv_header(const Trajectory& traj, bool with_path_id) {
  std::string h;
  if (with_path_id) h += "path_id,";
  h += "t";
  const int n = static_cast<int>(traj.x.front().size());
  for (int i = 0; i < n; ++i) h += ",x_" + std::to_string(i + 1);
  for (int dm = 0; dm < traj.num_dms(); ++dm) {
    const std::string tag = std::to_string(dm + 1);
    for (int i = 0; i < traj.y[dm].front().size(); ++i)
      h += ",y" + tag + "_" + std::to_string(i + 1);
    for (int i = 0; i < traj.xhat[dm].front().size(); ++i)
      h += ",xhat" + tag + "_" + std::to_string(i + 1);
    for (int i = 0; i < traj.u[dm].front().size(); ++i)
      h += ",u" + tag + "_" + std::to_string(i + 1);
  }
  return h;
}

inline void append_trajectory_csv(std::ostream& os, const Trajectory& traj, bool with_path_id) {
  for (std::size_t k = 0; k < traj.grid.num_nodes(); ++k) {
    if (with_path_id) os << traj.path_index << ",";
    os << detail::fmt(traj.grid.node(k));
    for (Eigen::Index i = 0; i < traj.x[k].size(); ++i) os << "," << detail::fmt(traj.x[k][i]);
    for (int dm = 0; dm < traj.num_dms(); ++dm) {
      for (Eigen::Index i = 0; i < traj.y[dm][k].size(); ++i)
        os << "," << detail::fmt(traj.y[dm][k][i]);
      for (Eigen::Index i = 0; i < traj.xhat[dm][k].size(); ++i)
        os << "," << detail::fmt(traj.xhat[dm][k][i]);
      for (Eigen::Index i = 0; i < traj.u[dm][k].size(); ++i)
        os << "," << detail::fmt(traj.u[dm][k][i]);
    }
    os << "\n";
  }
}

// Strategy CSV: t, vectorized gain (row-major) and offset per DM, then ubar.
inline void write_strategy_csv(std::ostream& os, const DecentralizedStrategy& s) {
  os << "t";
  for (int dm = 0; dm < s.num_dms(); ++dm) {
    const std::string tag = std::to_string(dm + 1);
    const Mat& g0 = s.gains[dm].front();
    for (Eigen::Index r = 0; r < g0.rows(); ++r)
      for (Eigen::Index c = 0; c < g0.cols(); ++c)
        os << ",gain" << tag << "_" << (r + 1) << "_" << (c + 1);
    for (Eigen::Index r = 0; r < s.offsets[dm].front().size(); ++r)
      os << ",offset" << tag << "_" << (r + 1);
  }
  for (Eigen::Index r = 0; r < s.mean_control.front().size(); ++r) os << ",ubar_" << (r + 1);
  os << "\n";
  for (std::size_t k = 0; k < s.grid.num_nodes(); ++k) {
    os << detail::fmt(s.grid.node(k));
    for (int dm = 0; dm < s.num_dms(); ++dm) {
      const Mat& g = s.gains[dm][k];
      for (Eigen::Index r = 0; r < g.rows(); ++r)
        for (Eigen::Index c = 0; c < g.cols(); ++c) os << "," << detail::fmt(g(r, c));
      const Vec& o = s.offsets[dm][k];
      for (Eigen::Index r = 0; r < o.size(); ++r) os << "," << detail::fmt(o[r]);
    }
    for (Eigen::Index r = 0; r < s.mean_control[k].size(); ++r)
      os << "," << detail::fmt(s.mean_control[k][r]);
    os << "\n";
  }
}

// Covariance CSV: t, vectorized lower triangle of P (column by column).
inline void write_covariance_csv(std::ostream& os, const MatrixSchedule& P, const TimeGrid& grid) {
  os << "t";
  const Eigen::Index n = P.at(0).rows();
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = c; r < n; ++r) os << ",P_" << (r + 1) << "_" << (c + 1);
  os << "\n";
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    os << detail::fmt(grid.node(k));
    const Mat& p = P.at(k);
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = c; r < n; ++r) os << "," << detail::fmt(p(r, c));
    os << "\n";
  }
}

inline nlohmann::json schedule_to_json(const MatrixSchedule& s, const TimeGrid& grid) {
  nlohmann::json out = nlohmann::json::array();
  if (s.empty() && !s.is_constant()) return out;
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    nlohmann::json m = nlohmann::json::array();
    const Mat& v = s.at(k);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < v.cols(); ++c) row.push_back(v(r, c));
      m.push_back(row);
    }
    out.push_back(m);
  }
  return out;
}

inline nlohmann::json report_to_json(const SolverReport& rep, const TimeGrid& grid) {
  nlohmann::json j;
  j["status"] = rep.status;
  j["scenario"] = rep.scenario;
  j["picard_iterations"] = rep.picard_iterations;
  j["fixed_point_residual"] = rep.fixed_point_residual;
  j["fixed_point_tolerance"] = rep.fixed_point_tolerance;
  j["residual_history"] = rep.residual_history;
  j["riccati_terminal_residual"] = rep.riccati_terminal_residual;
  j["max_symmetry_residual"] = rep.max_symmetry_residual;
  j["min_riccati_eigenvalue"] = rep.min_riccati_eigenvalue;
  j["max_coupling_condition"] = rep.max_coupling_condition;
  j["moment_closure"] = rep.moment_closure;
  j["notes"] = rep.notes;
  nlohmann::json ric = nlohmann::json::array();
  for (const auto& K : rep.riccati) ric.push_back(schedule_to_json(K, grid));
  j["riccati"] = ric;
  nlohmann::json offs = nlohmann::json::array();
  for (const auto& r : rep.offsets) offs.push_back(schedule_to_json(r, grid));
  j["offsets"] = offs;
  if (!rep.mean_state.empty() || rep.mean_state.is_constant())
    j["mean_state"] = schedule_to_json(rep.mean_state, grid);
  nlohmann::json ubar = nlohmann::json::array();
  for (const auto& u : rep.mean_control) {
    nlohmann::json v = nlohmann::json::array();
    for (Eigen::Index i = 0; i < u.size(); ++i) v.push_back(u[i]);
    ubar.push_back(v);
  }
  j["mean_control"] = ubar;
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& p : rep.filter_cov)
    cov.push_back((p.empty() && !p.is_constant()) ? nlohmann::json::array()
                                                  : schedule_to_json(p, grid));
  j["filter_covariance"] = cov;
  return j;
}

inline nlohmann::json verification_to_json(const VerificationReport& rep) {
  nlohmann::json j;
  j["battery_version"] = rep.battery_version;
  j["num_paths"] = rep.num_paths;
  j["base_cost"] = rep.base_cost;
  j["base_cost_se"] = rep.base_cost_se;
  j["all_pass"] = rep.all_pass;
  j["conditional_gradient_norm"] = rep.conditional_gradient_norm;
  j["adjoint_terminal_residual"] = rep.adjoint_terminal_residual;
  j["adjoint_ito_residual"] = rep.adjoint_ito_residual;
  j["q12_sigma_g_residual"] = rep.q12_sigma_g_residual;
  j["obs_adjoint_identically_zero"] = rep.obs_adjoint_identically_zero;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& p : rep.perturbations) {
    entries.push_back({{"dm", p.dm},
                       {"perturbation", p.name},
                       {"dJ", p.delta_j},
                       {"se", p.std_error},
                       {"pass", p.pass}});
  }
  j["perturbations"] = entries;
  return j;
}

// Solver schedules as one wide CSV: t, vectorized K^i, r^i, xbar, ubar.
inline void write_report_schedules_csv(std::ostream& os, const SolverReport& rep,
                                       const TimeGrid& grid) {
  os << "t";
  for (std::size_t i = 0; i < rep.riccati.size(); ++i) {
    const Mat& k0 = rep.riccati[i].at(0);
    for (Eigen::Index r = 0; r < k0.rows(); ++r)
      for (Eigen::Index c = 0; c < k0.cols(); ++c)
        os << ",K" << (i + 1) << "_" << (r + 1) << "_" << (c + 1);
  }
  for (std::size_t i = 0; i < rep.offsets.size(); ++i)
    for (Eigen::Index r = 0; r < rep.offsets[i].at(0).rows(); ++r)
      os << ",r" << (i + 1) << "_" << (r + 1);
  const bool has_xbar = rep.mean_state.is_constant() || !rep.mean_state.empty();
  if (has_xbar)
    for (Eigen::Index r = 0; r < rep.mean_state.at(0).rows(); ++r) os << ",xbar_" << (r + 1);
  if (!rep.mean_control.empty())
    for (Eigen::Index r = 0; r < rep.mean_control.front().size(); ++r) os << ",ubar_" << (r + 1);
  os << "\n";
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    os << detail::fmt(grid.node(k));
    for (const auto& K : rep.riccati) {
      const Mat& m = K.at(k);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << "," << detail::fmt(m(r, c));
    }
    for (const auto& rsched : rep.offsets) {
      const Mat& m = rsched.at(k);
      for (Eigen::Index r = 0; r < m.rows(); ++r) os << "," << detail::fmt(m(r, 0));
    }
    if (has_xbar) {
      const Mat& m = rep.mean_state.at(k);
      for (Eigen::Index r = 0; r < m.rows(); ++r) os << "," << detail::fmt(m(r, 0));
    }
    if (!rep.mean_control.empty())
      for (Eigen::Index r = 0; r < rep.mean_control[k].size(); ++r)
        os << "," << detail::fmt(rep.mean_control[k][r]);
    os << "\n";
  }
}

// Human-readable verification table: dm, perturbation, dJ, se, pass.
inline void write_verification_csv(std::ostream& os, const VerificationReport& rep) {
  os << "dm,perturbation,dJ,se,pass\n";
  for (const auto& p : rep.perturbations) {
    os << p.dm << "," << p.name << "," << detail::fmt(p.delta_j) << ","
       << detail::fmt(p.std_error) << "," << (p.pass ? "1" : "0") << "\n";
  }
}

}  // namespace lqteam
