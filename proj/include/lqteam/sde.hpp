#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lqteam/filters.hpp"
#include "lqteam/model.hpp"
#include "lqteam/rng.hpp"
#include "lqteam/strategy.hpp"
#include "lqteam/trajectory.hpp"

namespace lqteam {

// Discrete-time affine representation of one Euler-Maruyama step of the
// closed-loop system. The chain state stacks the true state and, when a
// strategy is attached, every DM's filter state:
//   z_{k+1} = F_k z_k + g_k + N_k xi_k,   xi_k ~ Normal(0, dt I).
// Controls are affine in z, so running cost is a per-node quadratic in z.
// The same matrices drive path sampling and the exact mean/covariance
// recursion of the model (used by the moment-closure report).
struct SimChain {
  TimeGrid grid;
  int n = 0;       // state dim
  int N = 0;       // number of DMs
  int m = 0;       // state-noise dim
  int ktot = 0;    // total observation dim
  bool with_filters = false;

  std::vector<Mat> F;      // [K]
  std::vector<Vec> g;      // [K]
  std::vector<Mat> noise;  // [K], nz x (m + ktot)

  std::vector<Mat> u_of_z;   // [K+1], d x nz
  std::vector<Vec> u_const;  // [K+1], d

  // Running cost l(z) = z'Qc z / 2 + lc'z + cc at each node; terminal Qf.
  std::vector<Mat> Qc;
  std::vector<Vec> lc;
  std::vector<double> cc;
  Mat Qf;

  Vec z0_mean;
  Mat z0_noise;  // nz x n map applied to the initial-state draw

  int zdim() const { return with_filters ? n * (1 + N) : n; }
};

namespace detail {

inline Mat stack_control_map(const LqTeamSpec& spec, const DecentralizedStrategy& strategy,
                             std::size_t k, int nz) {
  const int n = spec.dims.n();
  Mat out = Mat::Zero(spec.dims.d(), nz);
  for (int i = 0; i < spec.num_dms(); ++i) {
    out.block(spec.dims.control_offset(i), n * (1 + i), spec.dims.control[i], n) =
        strategy.gains[i][k];
  }
  return out;
}

}  // namespace detail

// Builds the simulation chain. With a strategy, filter parameters must be
// supplied (controls are functions of filter states).
inline SimChain build_sim_chain(const LqTeamSpec& spec, const DecentralizedStrategy* strategy,
                                const FilterBankParams* filters, const TimeGrid& grid) {
  if (strategy != nullptr && filters == nullptr)
    throw std::invalid_argument("build_sim_chain: a strategy requires a filter bank");
  if (spec.A.rows() != spec.dims.n() || spec.A.cols() != spec.dims.n() ||
      spec.B.rows() != spec.dims.n() || spec.B.cols() != spec.dims.d() ||
      spec.G.rows() != spec.dims.n() || spec.G.cols() != spec.dims.m() ||
      static_cast<int>(spec.C.size()) != spec.num_dms() ||
      static_cast<int>(spec.D.size()) != spec.num_dms())
    throw std::invalid_argument("build_sim_chain: dimension mismatch");
  if (strategy != nullptr &&
      (strategy->num_dms() != spec.num_dms() ||
       strategy->gains[0][0].cols() != spec.dims.n() ||
       strategy->mean_control.size() != grid.num_nodes()))
    throw std::invalid_argument("build_sim_chain: strategy dimension mismatch");

  SimChain chain;
  chain.grid = grid;
  chain.n = spec.dims.n();
  chain.N = spec.num_dms();
  chain.m = spec.dims.m();
  chain.ktot = spec.dims.k();
  chain.with_filters = strategy != nullptr;

  const int n = chain.n;
  const int N = chain.N;
  const int d = spec.dims.d();
  const int nz = chain.zdim();
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();

  const Mat Sx = Mat::Identity(n, nz);  // x selector (x occupies leading rows)

  chain.F.resize(K);
  chain.g.resize(K);
  chain.noise.resize(K);
  chain.u_of_z.resize(K + 1);
  chain.u_const.resize(K + 1);
  chain.Qc.resize(K);
  chain.lc.resize(K);
  chain.cc.resize(K);

  for (std::size_t k = 0; k <= K; ++k) {
    if (strategy != nullptr) {
      chain.u_of_z[k] = detail::stack_control_map(spec, *strategy, k, nz);
      Vec uc(d);
      for (int i = 0; i < N; ++i)
        uc.segment(spec.dims.control_offset(i), spec.dims.control[i]) = strategy->offsets[i][k];
      chain.u_const[k] = uc;
    } else {
      chain.u_of_z[k] = Mat::Zero(d, nz);
      chain.u_const[k] = Vec::Zero(d);
    }
  }

  for (std::size_t k = 0; k < K; ++k) {
    const Mat A = spec.A.at(k);
    const Mat B = spec.B.at(k);
    const Mat G = spec.G.at(k);
    const Mat& Gam = chain.u_of_z[k];
    const Vec& gam = chain.u_const[k];

    Mat F = Mat::Zero(nz, nz);
    Vec g = Vec::Zero(nz);
    Mat Nmap = Mat::Zero(nz, chain.m + chain.ktot);

    // True state row: x + (A x + B u) dt + G dW.
    F.topRows(n) = dt * (B * Gam);
    F.topLeftCorner(n, n) += Mat::Identity(n, n) + dt * A;
    g.head(n) = dt * (B * gam);
    Nmap.topLeftCorner(n, chain.m) = G;

    if (chain.with_filters) {
      for (int i = 0; i < N; ++i) {
        const int row = n * (1 + i);
        const Mat Ci = spec.obs_row(i, k);                      // k_i x n
        const Mat& Li = filters->gain[i][k];                    // n x k_i
        const Mat Bi = spec.control_block(i, k);                // n x d_i
        const Mat GamI = strategy->gains[i][k];                 // d_i x n
        const Vec gamI = strategy->offsets[i][k];

        // xhat^i row: xhat + (A xhat + B^{(i)} u^i + cross means) dt
        //             + L_i (dy^i - C^{[i]} xhat dt).
        F.block(row, 0, n, n) = dt * (Li * Ci);
        F.block(row, row, n, n) =
            Mat::Identity(n, n) + dt * (A + Bi * GamI - Li * Ci);
        Vec cross = Vec::Zero(n);
        if (!filters->u_bar.empty()) {
          for (int j = 0; j < N; ++j) {
            if (j == i) continue;
            cross += spec.control_block(j, k) *
                     filters->u_bar[k].segment(spec.dims.control_offset(j), spec.dims.control[j]);
          }
        }
        g.segment(row, n) = dt * (Bi * gamI + cross);

        const Mat Dhalf = psd_sqrt(spec.D[i].at(k));
        Nmap.block(row, chain.m + spec.dims.obs_offset(i), n, spec.dims.observation[i]) =
            Li * Dhalf;
      }
    }

    chain.F[k] = F;
    chain.g[k] = g;
    chain.noise[k] = Nmap;

    // Running cost in z at the left node.
    const Mat H = spec.H.at(k);
    const Mat R = spec.R.at(k);
    const Mat E = spec.E_or_zero(k);
    const Vec mlin = spec.m_or_zero(k);
    const Vec Flin = spec.F_or_zero(k);

    Mat Q = Mat::Zero(nz, nz);
    Q.topLeftCorner(n, n) = H;
    Q += Gam.transpose() * R * Gam;
    const Mat cross = Gam.transpose() * E * Sx;
    Q += cross + cross.transpose();
    chain.Qc[k] = Q;
    chain.lc[k] = Gam.transpose() * (R * gam + mlin) + Sx.transpose() * (Flin + E.transpose() * gam);
    chain.cc[k] = 0.5 * gam.dot(R * gam) + gam.dot(mlin);
  }

  chain.Qf = Mat::Zero(nz, nz);
  chain.Qf.topLeftCorner(n, n) = spec.M_T;

  chain.z0_mean = Vec::Zero(nz);
  chain.z0_mean.head(n) = spec.x0_mean;
  if (chain.with_filters)
    for (int i = 0; i < N; ++i) chain.z0_mean.segment(n * (1 + i), n) = spec.x0_mean;
  chain.z0_noise = Mat::Zero(nz, n);
  chain.z0_noise.topLeftCorner(n, n) = psd_sqrt(spec.x0_cov);

  return chain;
}

namespace detail {

inline Vec chain_draw(const SimChain& chain, const CounterRng& rng, std::uint64_t path,
                      std::uint32_t node, const LqTeamSpec& spec, bool disable_noise) {
  Vec xi = Vec::Zero(chain.m + chain.ktot);
  if (disable_noise) return xi;
  xi.head(chain.m) = rng.normal_vector(path, node, NoiseChannel::state(), chain.m);
  for (int i = 0; i < chain.N; ++i) {
    xi.segment(chain.m + spec.dims.obs_offset(i), spec.dims.observation[i]) =
        rng.normal_vector(path, node, NoiseChannel::observation(i), spec.dims.observation[i]);
  }
  return xi;
}

}  // namespace detail

// Cost of one sample path (left-rule quadrature plus terminal cost).
inline double simulate_path_cost(const SimChain& chain, const LqTeamSpec& spec,
                                 const CounterRng& rng, std::uint64_t path,
                                 bool disable_noise = false) {
  const std::size_t K = chain.grid.num_steps();
  const double dt = chain.grid.dt();
  const double sdt = std::sqrt(dt);

  Vec z = chain.z0_mean;
  if (!disable_noise) {
    z += chain.z0_noise * rng.normal_vector(path, 0, NoiseChannel::initial_state(), chain.n);
  }
  double cost = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    cost += (0.5 * z.dot(chain.Qc[k] * z) + chain.lc[k].dot(z) + chain.cc[k]) * dt;
    const Vec xi = detail::chain_draw(chain, rng, path, static_cast<std::uint32_t>(k), spec,
                                      disable_noise);
    z = chain.F[k] * z + chain.g[k] + chain.noise[k] * (sdt * xi);
  }
  cost += 0.5 * z.dot(chain.Qf * z);
  return cost;
}

// One sample path with everything recorded. Deterministic given
// (seed, path_index, grid, spec, strategy).
inline Trajectory simulate_trajectory(const SimChain& chain, const LqTeamSpec& spec,
                                      const CounterRng& rng, std::uint64_t path,
                                      bool disable_noise = false) {
  const std::size_t K = chain.grid.num_steps();
  const double dt = chain.grid.dt();
  const double sdt = std::sqrt(dt);
  const int n = chain.n;
  const int N = chain.N;

  Trajectory traj;
  traj.grid = chain.grid;
  traj.seed = rng.seed();
  traj.path_index = path;
  traj.x.resize(K + 1);
  traj.dW.assign(K + 1, Vec::Zero(chain.m));
  traj.y.resize(N);
  traj.xhat.resize(N);
  traj.u.resize(N);
  traj.dB.resize(N);
  traj.innovation.resize(N);
  for (int i = 0; i < N; ++i) {
    traj.y[i].assign(K + 1, Vec::Zero(spec.dims.observation[i]));
    traj.dB[i].assign(K + 1, Vec::Zero(spec.dims.observation[i]));
    traj.innovation[i].assign(K + 1, Vec::Zero(spec.dims.observation[i]));
    traj.xhat[i].resize(K + 1);
    traj.u[i].resize(K + 1);
  }

  Vec z = chain.z0_mean;
  if (!disable_noise) {
    z += chain.z0_noise * rng.normal_vector(path, 0, NoiseChannel::initial_state(), n);
  }

  auto record = [&](std::size_t k, const Vec& zk) {
    traj.x[k] = zk.head(n);
    const Vec u = chain.u_of_z[k] * zk + chain.u_const[k];
    for (int i = 0; i < N; ++i) {
      traj.xhat[i][k] =
          chain.with_filters ? Vec(zk.segment(n * (1 + i), n)) : Vec(Vec::Zero(n));
      traj.u[i][k] = u.segment(spec.dims.control_offset(i), spec.dims.control[i]);
    }
  };

  record(0, z);
  for (std::size_t k = 0; k < K; ++k) {
    const Vec xi = detail::chain_draw(chain, rng, path, static_cast<std::uint32_t>(k), spec,
                                      disable_noise);
    traj.dW[k] = sdt * xi.head(chain.m);
    for (int i = 0; i < N; ++i) {
      const Vec dBi = sdt * xi.segment(chain.m + spec.dims.obs_offset(i), spec.dims.observation[i]);
      traj.dB[i][k] = dBi;
      const Mat Ci = spec.obs_row(i, k);
      const Mat Dhalf = psd_sqrt(spec.D[i].at(k));
      const Vec dy = Ci * z.head(n) * dt + Dhalf * dBi;
      traj.y[i][k + 1] = traj.y[i][k] + dy;
      if (chain.with_filters)
        traj.innovation[i][k] = dy - Ci * z.segment(n * (1 + i), n) * dt;
      else
        traj.innovation[i][k] = dy;
    }
    z = chain.F[k] * z + chain.g[k] + chain.noise[k] * (sdt * xi);
    record(k + 1, z);
  }
  return traj;
}

// Euler-Maruyama sample path of the team system. The left-point (Ito) rule is
// used throughout; Gaussian increments come from the counter-based generator.
inline Trajectory euler_maruyama(const LqTeamSpec& spec, const DecentralizedStrategy* strategy,
                                 const FilterBankParams* filters, const TimeGrid& grid,
                                 std::uint64_t seed, std::uint64_t path_index = 0,
                                 bool disable_noise = false) {
  const SimChain chain = build_sim_chain(spec, strategy, filters, grid);
  return simulate_trajectory(chain, spec, CounterRng(seed), path_index, disable_noise);
}

// Exact mean/covariance recursion of the chain (the law of the simulated
// process, including its time discretization) and the implied expected cost.
struct ChainMoments {
  std::vector<Vec> mean;  // [node]
  std::vector<Mat> cov;   // [node]
  double expected_cost = 0.0;
};

inline ChainMoments chain_moments(const SimChain& chain, const Mat& x0_cov) {
  const std::size_t K = chain.grid.num_steps();
  const double dt = chain.grid.dt();
  ChainMoments out;
  out.mean.resize(K + 1);
  out.cov.resize(K + 1);
  out.mean[0] = chain.z0_mean;
  const int nz = chain.zdim();
  Mat S0 = Mat::Zero(nz, nz);
  S0.topLeftCorner(chain.n, chain.n) = x0_cov;
  out.cov[0] = S0;
  double cost = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const Vec& mz = out.mean[k];
    const Mat& S = out.cov[k];
    cost += (0.5 * (chain.Qc[k].cwiseProduct(S).sum() + mz.dot(chain.Qc[k] * mz)) +
             chain.lc[k].dot(mz) + chain.cc[k]) *
            dt;
    out.mean[k + 1] = chain.F[k] * mz + chain.g[k];
    out.cov[k + 1] = symmetrize(chain.F[k] * S * chain.F[k].transpose() +
                                dt * chain.noise[k] * chain.noise[k].transpose());
  }
  cost += 0.5 * (chain.Qf.cwiseProduct(out.cov[K]).sum() + out.mean[K].dot(chain.Qf * out.mean[K]));
  out.expected_cost = cost;
  return out;
}

// ---------------------------------------------------------------------------
// Broadcast channel simulation (static Gaussian message).
// ---------------------------------------------------------------------------

struct BroadcastPath {
  Vec theta;
  std::vector<std::vector<Vec>> y;     // [dm][node]
  std::vector<std::vector<Vec>> xhat;  // [dm][node]
  std::vector<std::vector<Vec>> u;     // [dm][node]
  double cost = 0.0;
};

// Simulates one path of the broadcast system under an affine strategy in the
// receivers' filter states. Covariance schedules are deterministic when the
// channel gain is y-independent and are propagated per path otherwise.
inline BroadcastPath simulate_broadcast_path(
    const BroadcastSpec& spec, const DecentralizedStrategy& strategy,
    const std::vector<std::vector<Mat>>& cov_schedules, const CounterRng& rng, std::uint64_t path,
    bool record = true, bool disable_noise = false) {
  const TimeGrid& grid = spec.grid;
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  const double sdt = std::sqrt(dt);
  const int N = spec.num_dms();
  const int n = spec.message_dim;

  BroadcastPath out;
  Vec theta = spec.theta_mean;
  if (!disable_noise)
    theta += psd_sqrt(spec.theta_cov) *
             rng.normal_vector(path, 0, NoiseChannel::initial_state(), n);
  out.theta = theta;

  std::vector<Vec> y(N), xhat(N);
  std::vector<Mat> P(N);
  const bool any_feedback = [&] {
    for (int i = 0; i < N; ++i)
      if (spec.has_feedback(i)) return true;
    return false;
  }();
  for (int i = 0; i < N; ++i) {
    y[i] = Vec::Zero(spec.obs_dims[i]);
    xhat[i] = spec.theta_mean;
    P[i] = symmetrize(spec.theta_cov);
  }
  if (record) {
    out.y.assign(N, {});
    out.xhat.assign(N, {});
    out.u.assign(N, {});
    for (int i = 0; i < N; ++i) {
      out.y[i].reserve(K + 1);
      out.xhat[i].reserve(K + 1);
      out.u[i].reserve(K + 1);
    }
  }

  double cost = 0.0;
  Vec u(spec.d());
  for (std::size_t k = 0; k <= K; ++k) {
    for (int i = 0; i < N; ++i)
      u.segment(spec.control_offset(i), spec.control_dims[i]) = strategy.control(i, k, xhat[i]);
    if (record) {
      for (int i = 0; i < N; ++i) {
        out.y[i].push_back(y[i]);
        out.xhat[i].push_back(xhat[i]);
        out.u[i].push_back(u.segment(spec.control_offset(i), spec.control_dims[i]));
      }
    }
    if (k == K) break;

    const double t = grid.node(k);
    const Mat R = spec.R.at(k);
    const Mat H = spec.H.at(k);
    cost += (0.5 * u.dot(R * u) + 0.5 * theta.dot(H * theta) + theta.dot(spec.F_or_zero(k)) +
             u.dot(spec.E_or_zero(k) * theta) + u.dot(spec.m_or_zero(k))) *
            dt;

    for (int i = 0; i < N; ++i) {
      const Mat c = spec.channel_gain(i, t, y[i]);
      const Mat d = spec.D[i].at(k);
      const Mat dhalf = psd_sqrt(d);
      Vec dB = Vec::Zero(spec.obs_dims[i]);
      if (!disable_noise)
        dB = sdt * rng.normal_vector(path, static_cast<std::uint32_t>(k),
                                     NoiseChannel::observation(i), spec.obs_dims[i]);
      const Vec dy = c * theta * dt + dhalf * dB;
      const Vec innov = dy - c * xhat[i] * dt;
      const Mat& Pk = any_feedback && spec.has_feedback(i) ? P[i] : cov_schedules[i][k];
      xhat[i] += Pk * c.transpose() * d.llt().solve(innov);
      if (spec.has_feedback(i)) {
        const Mat cp = c * P[i];
        P[i] = symmetrize(P[i] - dt * cp.transpose() * d.llt().solve(cp));
      }
      y[i] += dy;
    }
  }
  out.cost = cost;
  return out;
}

}  // namespace lqteam
