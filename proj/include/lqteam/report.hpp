#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lqteam/linalg.hpp"
#include "lqteam/schedule.hpp"

namespace lqteam {

// Forward-backward fixed-point iterate for the mean-field system: mean
// controls, offsets, and mean state, plus the normalized defect of the
// stacked linear node equation.
struct FixedPointState {
  int iterations = 0;
  bool converged = false;
  std::vector<Vec> u_bar;                 // [node], d
  std::vector<MatrixSchedule> r;          // per DM, n x 1 schedules
  MatrixSchedule x_bar;                   // n x 1 schedule
  double residual = 0.0;                  // max-node normalized defect
  std::vector<double> residual_history;   // one entry per Picard sweep
};

// Solver outputs with residuals and diagnostics. When status is "converged"
// every reported residual is at or below its configured tolerance.
struct SolverReport {
  std::string status = "converged";
  std::string scenario;

  std::vector<MatrixSchedule> riccati;    // K^i per DM
  MatrixSchedule sigma;                   // common Lyapunov solution
  std::vector<MatrixSchedule> offsets;    // r^i per DM
  MatrixSchedule mean_state;              // x_bar
  std::vector<Vec> mean_control;          // u_bar per node

  std::vector<MatrixSchedule> filter_cov;  // P^i per DM

  int picard_iterations = 0;
  double fixed_point_residual = 0.0;
  double fixed_point_tolerance = 0.0;
  std::vector<double> residual_history;

  double riccati_terminal_residual = 0.0;  // ||K(T) - M_T||_max (assigned: 0)
  double max_symmetry_residual = 0.0;
  double min_riccati_eigenvalue = 0.0;
  double max_coupling_condition = 0.0;     // max over nodes of cond(Lambda)

  // Cross-DM conditional covariances in the team filters are replaced by the
  // deterministic Riccati covariance; exact in the uncontrolled regime.
  std::string moment_closure = "deterministic-riccati-covariance";

  std::vector<std::string> notes;
};

// One verification entry: a single-DM perturbation and its paired cost change.
struct PerturbationResult {
  int dm = 0;
  std::string name;
  double delta_j = 0.0;
  double std_error = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::string battery_version;
  double base_cost = 0.0;
  double base_cost_se = 0.0;
  std::size_t num_paths = 0;

  std::vector<PerturbationResult> perturbations;

  // Closed-form conditional gradient of the Hamiltonian at the solver output,
  // max over nodes, per DM (relative to coefficient scale).
  std::vector<double> conditional_gradient_norm;

  // Adjoint consistency diagnostics. The martingale intensities are
  // identified as q11 = q12 = Sigma G; the observation-block adjoint and its
  // intensities (zeta, q21, q22) are identically zero for this system class
  // and are asserted as such rather than computed.
  double adjoint_terminal_residual = 0.0;
  double adjoint_ito_residual = 0.0;
  double q12_sigma_g_residual = 0.0;
  bool obs_adjoint_identically_zero = true;

  bool all_pass = true;
};

}  // namespace lqteam
