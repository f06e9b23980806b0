#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <future>
#include <mutex>
#include <string>
#include <vector>

#include "lqteam/hamiltonian.hpp"
#include "lqteam/report.hpp"
#include "lqteam/riccati.hpp"
#include "lqteam/sde.hpp"
#include "lqteam/solvers.hpp"
#include "lqteam/version.hpp"

namespace lqteam {

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t num_paths = 0;
};

namespace detail {

// Monte Carlo reduction over paths in fixed chunks, so results are
// independent of the number of workers.
inline constexpr std::size_t kChunkPaths = 256;

template <class PathFn>
void mc_foreach(std::uint64_t num_paths, PathFn&& body, int threads) {
  const std::size_t chunks = (num_paths + kChunkPaths - 1) / kChunkPaths;
  auto run_chunk = [&](std::size_t c) {
    const std::uint64_t begin = c * kChunkPaths;
    const std::uint64_t end = std::min<std::uint64_t>(begin + kChunkPaths, num_paths);
    for (std::uint64_t p = begin; p < end; ++p) body(p);
  };
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::size_t next = 0;
  std::mutex mu;
  std::vector<std::future<void>> pool;
  const int nw = std::min<int>(threads, static_cast<int>(chunks));
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (;;) {
        std::size_t c;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= chunks) return;
          c = next++;
        }
        run_chunk(c);
      }
    }));
  }
  for (auto& f : pool) f.get();
}

// Mean and standard error of per-path values, accumulated in fixed chunk
// order (independent of the worker count).
inline CostEstimate reduce_values(const std::vector<double>& values) {
  CostEstimate out;
  out.num_paths = values.size();
  double sum = 0.0, sumsq = 0.0;
  for (double v : values) {
    sum += v;
    sumsq += v * v;
  }
  const double P = static_cast<double>(values.size());
  out.mean = sum / P;
  const double var = std::max(0.0, (sumsq - sum * sum / P) / std::max(1.0, P - 1.0));
  out.std_error = std::sqrt(var / P);
  return out;
}

template <class PathFn>
CostEstimate mc_reduce(std::uint64_t num_paths, PathFn&& value_of_path, int threads) {
  const std::size_t chunks = (num_paths + kChunkPaths - 1) / kChunkPaths;
  std::vector<std::array<double, 2>> partial(chunks, {0.0, 0.0});

  auto run_chunk = [&](std::size_t c) {
    const std::uint64_t begin = c * kChunkPaths;
    const std::uint64_t end = std::min<std::uint64_t>(begin + kChunkPaths, num_paths);
    double s = 0.0, s2 = 0.0;
    for (std::uint64_t p = begin; p < end; ++p) {
      const double v = value_of_path(p);
      s += v;
      s2 += v * v;
    }
    partial[c] = {s, s2};
  };

  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::size_t next = 0;
    std::vector<std::future<void>> pool;
    auto worker = [&run_chunk](std::size_t* counter, std::size_t total, std::mutex* mu) {
      for (;;) {
        std::size_t c;
        {
          std::lock_guard<std::mutex> lock(*mu);
          if (*counter >= total) return;
          c = (*counter)++;
        }
        run_chunk(c);
      }
    };
    std::mutex mu;
    const int nw = std::min<int>(threads, static_cast<int>(chunks));
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w)
      pool.push_back(std::async(std::launch::async, worker, &next, chunks, &mu));
    for (auto& f : pool) f.get();
  }

  double sum = 0.0, sumsq = 0.0;
  for (const auto& pc : partial) {
    sum += pc[0];
    sumsq += pc[1];
  }
  CostEstimate out;
  out.num_paths = num_paths;
  const double P = static_cast<double>(num_paths);
  out.mean = sum / P;
  const double var = std::max(0.0, (sumsq - sum * sum / P) / std::max(1.0, P - 1.0));
  out.std_error = std::sqrt(var / P);
  return out;
}

}  // namespace detail

// Monte Carlo estimate of J = E{ int l dt + phi(x(T)) } under a strategy,
// left-rule quadrature over the grid.
inline CostEstimate estimate_cost(const LqTeamSpec& spec, const DecentralizedStrategy& strategy,
                                  const TimeGrid& grid, std::uint64_t num_paths,
                                  std::uint64_t seed, int threads = 1) {
  const FilterBankParams params = make_team_filter_params(spec, &strategy, grid);
  const SimChain chain = build_sim_chain(spec, &strategy, &params, grid);
  const CounterRng rng(seed);
  return detail::mc_reduce(
      num_paths, [&](std::uint64_t p) { return simulate_path_cost(chain, spec, rng, p); }, threads);
}

inline CostEstimate estimate_cost_uncontrolled(const LqTeamSpec& spec, const TimeGrid& grid,
                                               std::uint64_t num_paths, std::uint64_t seed,
                                               int threads = 1) {
  const SimChain chain = build_sim_chain(spec, nullptr, nullptr, grid);
  const CounterRng rng(seed);
  return detail::mc_reduce(
      num_paths, [&](std::uint64_t p) { return simulate_path_cost(chain, spec, rng, p); }, threads);
}

inline CostEstimate estimate_cost(const BroadcastSpec& spec, const DecentralizedStrategy& strategy,
                                  std::uint64_t num_paths, std::uint64_t seed, int threads = 1) {
  const int N = spec.num_dms();
  std::vector<std::vector<Mat>> cov(N);
  for (int i = 0; i < N; ++i) {
    if (spec.has_feedback(i)) continue;
    cov[i] = static_channel_covariance(spec, i, spec.grid).value;
  }
  const CounterRng rng(seed);
  return detail::mc_reduce(
      num_paths,
      [&](std::uint64_t p) {
        return simulate_broadcast_path(spec, strategy, cov, rng, p, /*record=*/false).cost;
      },
      threads);
}

// Paired cost difference J(perturbed) - J(base) under common random numbers.
inline CostEstimate estimate_cost_difference(const LqTeamSpec& spec,
                                             const DecentralizedStrategy& base,
                                             const DecentralizedStrategy& perturbed,
                                             const TimeGrid& grid, std::uint64_t num_paths,
                                             std::uint64_t seed, int threads = 1) {
  const FilterBankParams params = make_team_filter_params(spec, &base, grid);
  const SimChain chain_base = build_sim_chain(spec, &base, &params, grid);
  const SimChain chain_pert = build_sim_chain(spec, &perturbed, &params, grid);
  const CounterRng rng(seed);
  return detail::mc_reduce(
      num_paths,
      [&](std::uint64_t p) {
        return simulate_path_cost(chain_pert, spec, rng, p) -
               simulate_path_cost(chain_base, spec, rng, p);
      },
      threads);
}

// ---------------------------------------------------------------------------
// Person-by-person perturbation battery (fixed and versioned).
// ---------------------------------------------------------------------------

struct Perturbation {
  int dm = 0;
  std::string name;
  std::function<DecentralizedStrategy(const DecentralizedStrategy&)> apply;
};

// Battery pbp-battery-v1: per DM, gain scaling by 0.9 / 1.1, offset shifts of
// +-0.1 (1 + sup-norm of the DM's offsets), and gain spikes (x1.25) on the
// windows [0.2T, 0.3T] and [0.6T, 0.7T] of the DM's own filter-state feedback.
// Every entry modifies exactly one DM's law and preserves adaptedness.
inline std::vector<Perturbation> perturbation_battery(const DecentralizedStrategy& strategy) {
  const int N = strategy.num_dms();
  const TimeGrid& grid = strategy.grid;
  std::vector<Perturbation> out;

  auto scale_gain = [](int dm, double factor) {
    return [dm, factor](const DecentralizedStrategy& s) {
      DecentralizedStrategy p = s;
      for (auto& g : p.gains[dm]) g *= factor;
      return p;
    };
  };
  auto shift_offset = [](int dm, double shift) {
    return [dm, shift](const DecentralizedStrategy& s) {
      DecentralizedStrategy p = s;
      for (auto& o : p.offsets[dm]) o.array() += shift;
      return p;
    };
  };
  auto spike_gain = [&grid](int dm, double lo_frac, double hi_frac) {
    return [dm, lo_frac, hi_frac, &grid](const DecentralizedStrategy& s) {
      DecentralizedStrategy p = s;
      const double T = grid.horizon();
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
        const double t = grid.node(k);
        if (t >= lo_frac * T && t <= hi_frac * T) p.gains[dm][k] *= 1.25;
      }
      return p;
    };
  };

  for (int i = 0; i < N; ++i) {
    double off_sup = 0.0;
    for (const auto& o : strategy.offsets[i])
      off_sup = std::max(off_sup, o.size() ? o.cwiseAbs().maxCoeff() : 0.0);
    const double shift = 0.1 * (1.0 + off_sup);
    const std::string tag = "dm" + std::to_string(i) + "_";
    out.push_back({i, tag + "gain_up_10pct", scale_gain(i, 1.1)});
    out.push_back({i, tag + "gain_down_10pct", scale_gain(i, 0.9)});
    out.push_back({i, tag + "offset_plus", shift_offset(i, shift)});
    out.push_back({i, tag + "offset_minus", shift_offset(i, -shift)});
    out.push_back({i, tag + "gain_spike_early", spike_gain(i, 0.2, 0.3)});
    out.push_back({i, tag + "gain_spike_late", spike_gain(i, 0.6, 0.7)});
  }
  return out;
}

// Closed-form conditional gradient of the Hamiltonian at the solver output.
// The affine structure reduces E{H_{u^i} | G^i} to
//   (B^{(i),*} K^i + E^{[i]} + R_ii Gamma_i) xhat^i
//   + B^{(i),*} r^i + m^i + sum_{j!=i} R_ij ubar^j + R_ii gamma_i;
// both the matrix coefficient and the offset must vanish at every node. The
// returned value is the max-node norm of the two pieces, relative to the
// coefficient scale.
inline std::vector<double> conditional_gradient_norms(const LqTeamSpec& spec,
                                                      const DecentralizedStrategy& strategy,
                                                      const SolverReport& report,
                                                      const TimeGrid& grid) {
  const int N = spec.num_dms();
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
      const Mat Bi = spec.control_block(i, k);
      const Mat Rii = spec.cost_R_block(i, i, k);
      Mat gain_term = spec.cost_E_row(i, k) + Rii * strategy.gains[i][k];
      if (!report.riccati.empty()) gain_term += Bi.transpose() * report.riccati[i].at(k);
      Vec off_term = spec.cost_m_block(i, k) + Rii * strategy.offsets[i][k];
      if (!report.offsets.empty()) off_term += Bi.transpose() * report.offsets[i].at(k).col(0);
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        off_term += spec.cost_R_block(i, j, k) *
                    strategy.mean_control[k].segment(spec.dims.control_offset(j),
                                                     spec.dims.control[j]);
      }
      const double scale = 1.0 + Bi.norm() + Rii.norm() + spec.cost_E_row(i, k).norm();
      out[i] = std::max(out[i], (gain_term.norm() + off_term.norm()) / scale);
    }
  }
  return out;
}

// Person-by-person verification: for each battery entry, the paired Monte
// Carlo estimate of dJ = J(u^{i,pert}, u^{-i,o}) - J(u^o) must satisfy
// dJ >= -4 SE. The identity perturbation yields exactly zero by common random
// numbers. Closed-form conditional gradients are reported alongside.
inline VerificationReport verify_person_by_person(
    const LqTeamSpec& spec, const DecentralizedStrategy& strategy, const SolverReport& report,
    const std::vector<Perturbation>& battery, const TimeGrid& grid, std::uint64_t num_paths,
    std::uint64_t seed, int threads = 1) {
  if (num_paths < 100)
    throw std::invalid_argument("verify_person_by_person: standard errors need >= 100 paths");
  VerificationReport out;
  out.battery_version = kBatteryVersion;
  out.num_paths = num_paths;

  // Base path costs are computed once and shared by every paired difference
  // (common random numbers: identical draws per path index).
  const FilterBankParams params = make_team_filter_params(spec, &strategy, grid);
  const SimChain chain_base = build_sim_chain(spec, &strategy, &params, grid);
  const CounterRng rng(seed);
  std::vector<double> base_costs(num_paths);
  detail::mc_foreach(
      num_paths,
      [&](std::uint64_t p) { base_costs[p] = simulate_path_cost(chain_base, spec, rng, p); },
      threads);
  const CostEstimate base = detail::reduce_values(base_costs);
  out.base_cost = base.mean;
  out.base_cost_se = base.std_error;

  std::vector<double> diffs(num_paths);
  for (const auto& pert : battery) {
    const DecentralizedStrategy perturbed = pert.apply(strategy);
    // Admissibility: exactly one DM's law may change, and the filter
    // parameterization (mean-control schedule) must stay fixed.
    for (int i = 0; i < strategy.num_dms(); ++i) {
      if (i == pert.dm) continue;
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
        if (perturbed.gains[i][k] != strategy.gains[i][k] ||
            perturbed.offsets[i][k] != strategy.offsets[i][k])
          throw std::invalid_argument("verify_person_by_person: perturbation '" + pert.name +
                                      "' modifies DM " + std::to_string(i) +
                                      ", not only DM " + std::to_string(pert.dm));
      }
    }
    for (std::size_t k = 0; k < grid.num_nodes(); ++k)
      if (perturbed.mean_control[k] != strategy.mean_control[k])
        throw std::invalid_argument("verify_person_by_person: perturbation '" + pert.name +
                                    "' alters the filter mean-control schedule");
    const SimChain chain_pert = build_sim_chain(spec, &perturbed, &params, grid);
    detail::mc_foreach(
        num_paths,
        [&](std::uint64_t p) {
          diffs[p] = simulate_path_cost(chain_pert, spec, rng, p) - base_costs[p];
        },
        threads);
    const CostEstimate diff = detail::reduce_values(diffs);
    PerturbationResult res;
    res.dm = pert.dm;
    res.name = pert.name;
    res.delta_j = diff.mean;
    res.std_error = diff.std_error;
    res.pass = diff.mean >= -4.0 * diff.std_error;
    out.all_pass = out.all_pass && res.pass;
    out.perturbations.push_back(res);
  }

  out.conditional_gradient_norm = conditional_gradient_norms(spec, strategy, report, grid);
  return out;
}

// ---------------------------------------------------------------------------
// Adjoint consistency.
// ---------------------------------------------------------------------------

struct AdjointCheck {
  double terminal_residual = 0.0;  // |psi(T) - M_T x(T)|
  double max_ito_residual = 0.0;   // drift defect of Sigma x + beta
  std::vector<Vec> psi;            // reconstructed adjoint along the path
  std::vector<Vec> beta;
};

// Reconstructs psi(t) = Sigma(t) x(t) + beta(t) along a realized path, with
// beta integrated backward from beta(T) = 0 through the drift
//   betadot = -A* beta - Sigma B u - F - E* u
// (martingale term dropped; valid in conditional mean, exact on noiseless
// paths). Verifies the terminal identity and the Ito drift defect
//   dpsi/dt + A* psi + H x + F + E* u = 0
// with a centered difference in time.
inline AdjointCheck adjoint_consistency_check(const LqTeamSpec& spec,
                                              const LyapunovSolution& sigma,
                                              const Trajectory& traj) {
  const TimeGrid& grid = traj.grid;
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  const int n = spec.dims.n();
  const int d = spec.dims.d();

  // Realized joint control per node.
  std::vector<Vec> u(K + 1, Vec::Zero(d));
  for (std::size_t k = 0; k <= K; ++k)
    for (int i = 0; i < spec.num_dms(); ++i)
      u[k].segment(spec.dims.control_offset(i), spec.dims.control[i]) = traj.u[i][k];

  auto u_eval = [&](double t) -> Vec {
    const std::size_t k = grid.floor_index(t);
    const double theta = (t - grid.node(k)) / dt;
    if (theta <= 0.0) return u[k];
    if (theta >= 1.0 || k + 1 > K) return u[std::min(k + 1, K)];
    return (1.0 - theta) * u[k] + theta * u[k + 1];
  };

  auto field = [&](double t, const Mat& b) -> Mat {
    const Mat A = spec.A.eval(t);
    const Vec ut = u_eval(t);
    Vec forcing = sigma.sigma.eval(t) * spec.B.eval(t) * ut;
    const std::size_t k = grid.floor_index(t);
    forcing += spec.F_or_zero(k) + spec.E_or_zero(k).transpose() * ut;
    return -(A.transpose() * b.col(0) + forcing);
  };
  OdeSolution beta = rk4_backward(field, Mat::Zero(n, 1), grid);

  AdjointCheck out;
  out.psi.resize(K + 1);
  out.beta.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    out.beta[k] = beta.value[k].col(0);
    out.psi[k] = sigma.sigma.at(k) * traj.x[k] + out.beta[k];
  }
  out.terminal_residual = (out.psi[K] - spec.M_T * traj.x[K]).norm();

  for (std::size_t k = 1; k < K; ++k) {
    const Vec dpsi = (out.psi[k + 1] - out.psi[k - 1]) / (2.0 * dt);
    Vec defect = dpsi + spec.A.at(k).transpose() * out.psi[k] + spec.H.at(k) * traj.x[k];
    defect += spec.F_or_zero(k) + spec.E_or_zero(k).transpose() * u[k];
    out.max_ito_residual = std::max(out.max_ito_residual, defect.norm());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateaux derivative by finite differences with common random numbers.
// ---------------------------------------------------------------------------

struct StrategyDirection {
  // Additive deltas per DM; empty entries mean zero.
  std::vector<std::vector<Mat>> gain_delta;
  std::vector<std::vector<Vec>> offset_delta;
};

inline DecentralizedStrategy apply_direction(const DecentralizedStrategy& base,
                                             const StrategyDirection& dir, double eps) {
  DecentralizedStrategy out = base;
  for (int i = 0; i < base.num_dms(); ++i) {
    if (i < static_cast<int>(dir.gain_delta.size()) && !dir.gain_delta[i].empty())
      for (std::size_t k = 0; k < out.gains[i].size(); ++k)
        out.gains[i][k] += eps * dir.gain_delta[i][k];
    if (i < static_cast<int>(dir.offset_delta.size()) && !dir.offset_delta[i].empty())
      for (std::size_t k = 0; k < out.offsets[i].size(); ++k)
        out.offsets[i][k] += eps * dir.offset_delta[i][k];
  }
  return out;
}

struct GateauxEstimate {
  double derivative = 0.0;  // extrapolated to eps -> 0
  double std_error = 0.0;   // paired SE of the smallest-eps quotient
  std::vector<double> quotients;
};

// (J(u + eps delta) - J(u)) / eps with common random numbers, extrapolated
// linearly over the supplied eps sequence. Steps below 1e-8 are rejected
// (differencing noise).
inline GateauxEstimate gateaux_fd(const LqTeamSpec& spec, const DecentralizedStrategy& strategy,
                                  const StrategyDirection& direction,
                                  const std::vector<double>& eps_sequence, const TimeGrid& grid,
                                  std::uint64_t num_paths, std::uint64_t seed, int threads = 1) {
  if (eps_sequence.empty()) throw std::invalid_argument("gateaux_fd: empty eps sequence");
  for (double e : eps_sequence)
    if (e < 1e-8) throw std::invalid_argument("gateaux_fd: eps below 1e-8 rejected");

  GateauxEstimate out;
  double min_eps = eps_sequence.front();
  for (double eps : eps_sequence) {
    const DecentralizedStrategy pert = apply_direction(strategy, direction, eps);
    const CostEstimate diff =
        estimate_cost_difference(spec, strategy, pert, grid, num_paths, seed, threads);
    out.quotients.push_back(diff.mean / eps);
    if (eps <= min_eps) {
      min_eps = eps;
      out.std_error = diff.std_error / eps;
    }
  }
  if (eps_sequence.size() == 1) {
    out.derivative = out.quotients.front();
    return out;
  }
  // Least-squares line through (eps, quotient); intercept is the estimate.
  double se = 0.0, sq = 0.0, see = 0.0, seq = 0.0;
  const double P = static_cast<double>(eps_sequence.size());
  for (std::size_t i = 0; i < eps_sequence.size(); ++i) {
    se += eps_sequence[i];
    sq += out.quotients[i];
    see += eps_sequence[i] * eps_sequence[i];
    seq += eps_sequence[i] * out.quotients[i];
  }
  const double denom = P * see - se * se;
  if (std::abs(denom) < 1e-300) {
    out.derivative = sq / P;
  } else {
    const double slope = (P * seq - se * sq) / denom;
    out.derivative = (sq - slope * se) / P;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Moment-closure cost report.
// ---------------------------------------------------------------------------

struct ClosureGap {
  double mc_cost = 0.0;
  double mc_se = 0.0;
  double model_cost = 0.0;  // exact under the closure model (same time grid)
  double gap = 0.0;         // mc_cost - model_cost
  bool exact_regime = false;  // true when all B blocks vanish
};

// Quantifies the cost of the team-filter moment closure: the Monte Carlo cost
// of the solved strategy against the cost predicted by the closure model
// itself (exact mean/covariance recursion of the simulated chain). In the
// uncontrolled regime the closure is exact and the gap is statistical only.
inline ClosureGap closure_cost_report(const LqTeamSpec& spec, const DecentralizedStrategy& strategy,
                                      const TimeGrid& grid, std::uint64_t num_paths,
                                      std::uint64_t seed, int threads = 1) {
  const FilterBankParams params = make_team_filter_params(spec, &strategy, grid);
  const SimChain chain = build_sim_chain(spec, &strategy, &params, grid);
  const CounterRng rng(seed);
  const CostEstimate mc = detail::mc_reduce(
      num_paths, [&](std::uint64_t p) { return simulate_path_cost(chain, spec, rng, p); }, threads);
  const ChainMoments moments = chain_moments(chain, spec.x0_cov);

  ClosureGap out;
  out.mc_cost = mc.mean;
  out.mc_se = mc.std_error;
  out.model_cost = moments.expected_cost;
  out.gap = mc.mean - moments.expected_cost;
  bool all_b_zero = true;
  for (std::size_t k = 0; k < grid.num_nodes() && all_b_zero; ++k) {
    if (spec.B.at(k).cwiseAbs().maxCoeff() != 0.0) all_b_zero = false;
    if (spec.B.is_constant()) break;
  }
  out.exact_regime = all_b_zero;
  return out;
}

}  // namespace lqteam
