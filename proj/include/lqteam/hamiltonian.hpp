#pragma once

#include "lqteam/linalg.hpp"
#include "lqteam/model.hpp"

namespace lqteam {

// Arguments of the Hamiltonian H = <f, psi> + tr(q11* sigma) + l. The
// observation-block adjoint and its intensities are identically zero for this
// system class and are not carried.
struct HamiltonianInput {
  double t = 0.0;
  Vec x;    // n
  Vec psi;  // n
  Mat q11;  // n x m
  Vec u;    // d
};

// LQ Hamiltonian: <Ax + Bu, psi> + tr(q11* G) + x'Hx/2 + u'Ru/2 + x'F + u'Ex + u'm.
inline double hamiltonian(const LqTeamSpec& spec, const HamiltonianInput& in) {
  const double t = in.t;
  const Mat A = spec.A.eval(t);
  const Mat B = spec.B.eval(t);
  const Mat G = spec.G.eval(t);
  const Mat H = spec.H.eval(t);
  const Mat R = spec.R.eval(t);
  const std::size_t k = spec.grid.floor_index(t);

  const Vec f = A * in.x + B * in.u;
  double value = f.dot(in.psi);
  value += (in.q11.transpose() * G).trace();
  value += 0.5 * in.x.dot(H * in.x) + 0.5 * in.u.dot(R * in.u);
  value += in.x.dot(spec.F_or_zero(k)) + in.u.dot(spec.E_or_zero(k) * in.x) +
           in.u.dot(spec.m_or_zero(k));
  return value;
}

// Generic evaluation for nonlinear-form problems: drift, diffusion, and
// running cost supplied as callables.
template <class Drift, class Diffusion, class RunningCost>
double hamiltonian_nf(Drift&& f, Diffusion&& sigma, RunningCost&& ell, const HamiltonianInput& in) {
  const Vec drift = f(in.t, in.x, in.u);
  const Mat diff = sigma(in.t, in.x);
  return drift.dot(in.psi) + (in.q11.transpose() * diff).trace() + ell(in.t, in.x, in.u);
}

// Per-DM gradient blocks of the LQ Hamiltonian in the decision variables:
//   block i = B^{(i),*} psi + R_ii u^i + sum_{j!=i} R_ij u^j + E^{[i]} x + m^i.
inline std::vector<Vec> hamiltonian_grad_u(const LqTeamSpec& spec, const HamiltonianInput& in) {
  const int N = spec.num_dms();
  const std::size_t k = spec.grid.floor_index(in.t);
  std::vector<Vec> out(N);
  for (int i = 0; i < N; ++i) {
    Vec g = spec.control_block_eval(i, in.t).transpose() * in.psi;
    for (int j = 0; j < N; ++j) {
      g += spec.cost_R_block_eval(i, j, in.t) *
           in.u.segment(spec.dims.control_offset(j), spec.dims.control[j]);
    }
    g += spec.cost_E_row_eval(i, in.t) * in.x + spec.cost_m_block(i, k);
    out[i] = g;
  }
  return out;
}

}  // namespace lqteam
