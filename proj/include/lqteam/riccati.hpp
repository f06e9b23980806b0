#pragma once

#include <optional>

#include "lqteam/integrators.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/schedule.hpp"

namespace lqteam {

struct RiccatiSolution {
  MatrixSchedule K;   // with Hermite slopes
  Mat terminal;       // M_T, assigned exactly at t_K
  double max_symmetry_residual = 0.0;
  double min_eigenvalue = 0.0;
};

// Backward matrix Riccati equation
//   Kdot + A*K + K A - (K B + E*) R^{-1} (B* K + E) + H = 0,  K(T) = M_T,
// integrated by RK4 with per-step symmetrization. The cross term E is an
// optional extension (zero-default) used when the pay-off carries <u, Ex>;
// with E = 0 this is the plain team Riccati equation.
inline RiccatiSolution solve_riccati(const MatrixSchedule& A, const MatrixSchedule& B,
                                     const MatrixSchedule& R, const MatrixSchedule& H,
                                     const Mat& M_T, const TimeGrid& grid,
                                     const std::optional<MatrixSchedule>& E = std::nullopt) {
  auto field = [&](double t, const Mat& K) -> Mat {
    const Mat a = A.eval(t);
    const Mat b = B.eval(t);
    const Mat h = H.eval(t);
    Mat gain = K * b;  // K B + E*
    if (E) gain += E->eval(t).transpose();
    const Mat r = R.eval(t);
    const Mat quad = gain * r.llt().solve(gain.transpose());
    return -(a.transpose() * K + K * a + h - quad);
  };

  OdeSolution sol = rk4_backward(field, symmetrize(M_T), grid);

  RiccatiSolution out;
  out.terminal = M_T;
  for (std::size_t k = 0; k < sol.value.size(); ++k) {
    const Mat& K = sol.value[k];
    const double scale = 1.0 + K.cwiseAbs().maxCoeff();
    out.max_symmetry_residual =
        std::max(out.max_symmetry_residual, (K - K.transpose()).cwiseAbs().maxCoeff() / scale);
    sol.value[k] = symmetrize(K);
  }
  out.min_eigenvalue = min_eigenvalue(sol.value.front());
  for (const Mat& K : sol.value) out.min_eigenvalue = std::min(out.min_eigenvalue, min_eigenvalue(K));
  out.K = sol.to_schedule(grid);
  return out;
}

struct LyapunovSolution {
  MatrixSchedule sigma;  // Sigma(t)
  MatrixSchedule q11;    // Sigma(t) G(t), adjoint martingale intensity
};

// Backward Lyapunov equation (the Riccati equation with the quadratic term
// absent):  Sigmadot + A*Sigma + Sigma A + H = 0, Sigma(T) = M_T.
// Also exposes q11(t) = Sigma(t) G(t).
inline LyapunovSolution solve_sigma_lyapunov(const MatrixSchedule& A, const MatrixSchedule& H,
                                             const Mat& M_T, const TimeGrid& grid,
                                             const MatrixSchedule& G) {
  auto field = [&](double t, const Mat& S) -> Mat {
    const Mat a = A.eval(t);
    return -(a.transpose() * S + S * a + H.eval(t));
  };
  OdeSolution sol = rk4_backward(field, symmetrize(M_T), grid);
  for (auto& s : sol.value) s = symmetrize(s);

  LyapunovSolution out;
  std::vector<Mat> q(sol.value.size());
  for (std::size_t k = 0; k < sol.value.size(); ++k) q[k] = sol.value[k] * G.at(k);
  out.sigma = sol.to_schedule(grid);
  out.q11 = MatrixSchedule::tabulated(grid, std::move(q));
  return out;
}

}  // namespace lqteam
