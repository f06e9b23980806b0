#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "lqteam/verification.hpp"
#include "test_helpers.hpp"

using namespace lqteam;

TEST_CASE("estimate_cost: zero weights give exactly zero") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::scalar_spec(-0.5, 1, 1, 1, 1, 0, 1, 0, 0.4, 0.6, grid);
  spec.H = MatrixSchedule::constant(Mat::Zero(1, 1));
  spec.M_T = Mat::Zero(1, 1);
  spec.R = MatrixSchedule::constant(Mat::Constant(1, 1, 1.0));  // weight on u, but u = 0
  auto zero = DecentralizedStrategy::zero(grid, spec.dims.control, 1);
  const FilterBankParams params = make_team_filter_params(spec, &zero, grid);
  const CostEstimate est = estimate_cost(spec, zero, grid, 500, 7);
  REQUIRE(est.mean == 0.0);
  REQUIRE(est.std_error == 0.0);
}

TEST_CASE("estimate_cost: constant deterministic path") {
  // A=0, G=0, B=0, H=I, M_T=0, x0 fixed: J = T |x0|^2 / 2 exactly (left rule
  // on a constant integrand).
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::scalar_spec(0, 0, 0, 1, 1, 1, 1, 0, 1.3, 0.0, grid);
  auto zero = DecentralizedStrategy::zero(grid, spec.dims.control, 1);
  const CostEstimate est = estimate_cost(spec, zero, grid, 10, 7);
  REQUIRE(est.mean == Catch::Approx(0.5 * 1.3 * 1.3).margin(1e-12));
}

TEST_CASE("estimate_cost: broadcast second-moment identity") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::scalar_broadcast(1.0, 1.0, 0.8, 1.0, 0.2, grid);
  spec.H = MatrixSchedule::constant(Mat::Constant(1, 1, 1.5));
  spec.theta_mean = Vec::Constant(1, 0.4);
  auto zero = DecentralizedStrategy::zero(grid, spec.control_dims, 1);
  const CostEstimate est = estimate_cost(spec, zero, 10000, 11);
  const double expect =
      0.5 * 1.5 * (spec.theta_cov(0, 0) + spec.theta_mean(0) * spec.theta_mean(0));
  REQUIRE(std::abs(est.mean - expect) <= 4.0 * est.std_error);
}

TEST_CASE("estimate_cost is reduction-order independent of thread count") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  const CostEstimate a = estimate_cost(spec, sol.strategy, grid, 2000, 42, 1);
  const CostEstimate b = estimate_cost(spec, sol.strategy, grid, 2000, 42, 2);
  REQUIRE(a.mean == b.mean);
  REQUIRE(a.std_error == b.std_error);
}

TEST_CASE("identity perturbation has exactly zero cost change") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  const CostEstimate diff =
      estimate_cost_difference(spec, sol.strategy, sol.strategy, grid, 500, 3);
  REQUIRE(diff.mean == 0.0);
  REQUIRE(diff.std_error == 0.0);
}

TEST_CASE("zero-noise homogeneous case: offset perturbations raise cost deterministically") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.0, 1, 1, 1, 1, 0.4, 0.6, 0.0,
                                   0.0, grid);
  auto sol = solve_lq_team(spec, grid);
  auto battery = perturbation_battery(sol.strategy);
  for (const auto& pert : battery) {
    if (pert.name.find("offset") == std::string::npos) continue;
    const CostEstimate diff =
        estimate_cost_difference(spec, sol.strategy, pert.apply(sol.strategy), grid, 4, 3);
    REQUIRE(diff.mean > 0.0);
    REQUIRE(diff.std_error == 0.0);  // noiseless runs are all identical
  }
}

TEST_CASE("scalar LQG: 1.1x gain beats the brute-force bound from below") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::scalar_spec(-0.3, 1.0, 0.6, 1.0, 0.8, 1.0, 1.0, 0.5, 0.5, 0.7, grid);
  auto sol = solve_lq_team(spec, grid);

  // Brute-force oracle over constant gain scalings via the model-exact
  // moment recursion of the simulated chain.
  auto model_cost = [&](double scale) {
    DecentralizedStrategy s = sol.strategy;
    for (auto& g : s.gains[0]) g *= scale;
    const FilterBankParams params = make_team_filter_params(spec, &s, grid);
    const SimChain chain = build_sim_chain(spec, &s, &params, grid);
    return chain_moments(chain, spec.x0_cov).expected_cost;
  };
  double best = std::numeric_limits<double>::infinity();
  for (double s = 0.5; s <= 1.5001; s += 0.05) best = std::min(best, model_cost(s));
  const double bound = model_cost(1.1) - best;
  REQUIRE(bound > 0.0);

  const CostEstimate diff = estimate_cost_difference(
      spec, sol.strategy,
      [&] {
        DecentralizedStrategy s = sol.strategy;
        for (auto& g : s.gains[0]) g *= 1.1;
        return s;
      }(),
      grid, 20000, 17);
  REQUIRE(diff.mean > 0.0);
  REQUIRE(diff.mean >= bound - 4.0 * diff.std_error);
}

TEST_CASE("verify_person_by_person: full battery passes at the solver output") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  auto battery = perturbation_battery(sol.strategy);
  REQUIRE(battery.size() == 12);
  auto rep = verify_person_by_person(spec, sol.strategy, sol.report, battery, grid, 4000, 33);
  REQUIRE(rep.all_pass);
  REQUIRE(rep.battery_version == std::string("pbp-battery-v1"));
  for (const auto& e : rep.perturbations) REQUIRE(e.delta_j >= -4.0 * e.std_error);
  // Stationarity of the closed-form conditional gradient.
  for (double g : rep.conditional_gradient_norm) REQUIRE(g <= 1e-6);
}

TEST_CASE("cross-DM perturbations are rejected at entry") {
  TimeGrid grid(1.0, 0.1);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  std::vector<Perturbation> bad;
  bad.push_back({0, "touches_both_dms", [](const DecentralizedStrategy& s) {
                   DecentralizedStrategy p = s;
                   for (auto& g : p.gains[0]) g *= 1.1;
                   for (auto& g : p.gains[1]) g *= 1.1;
                   return p;
                 }});
  REQUIRE_THROWS_AS(
      verify_person_by_person(spec, sol.strategy, sol.report, bad, grid, 200, 3),
      std::invalid_argument);
}

TEST_CASE("standard errors require at least 100 paths") {
  TimeGrid grid(1.0, 0.1);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  REQUIRE_THROWS_AS(verify_person_by_person(spec, sol.strategy, sol.report,
                                            perturbation_battery(sol.strategy), grid, 50, 3),
                    std::invalid_argument);
}

TEST_CASE("stationarity holds for the filtering solver too") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.3, -0.7, 0.1, 0.2, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0.25, 0.3, 0.4,
                                   0.8, grid);
  Mat E(2, 2);
  E << 1.0, 0.2, -0.4, 0.7;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 0.15));
  auto sol = solve_filtering_team(spec, grid);
  const auto norms = conditional_gradient_norms(spec, sol.strategy, sol.report, grid);
  for (double g : norms) REQUIRE(g <= 1e-6);
}

TEST_CASE("adjoint consistency: deterministic run") {
  TimeGrid grid(1.0, 0.005);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.0, 1, 1, 1, 1, 0.4, 0.6, 0.9,
                                   0.0, grid);
  auto sol = solve_lq_team(spec, grid);
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, grid);
  // Noise disabled: G = 0 and the observation increments are switched off.
  auto traj = euler_maruyama(spec, &sol.strategy, &params, grid, 1, 0, /*disable_noise=*/true);
  auto sigma = solve_sigma_lyapunov(spec.A, spec.H, spec.M_T, grid, spec.G);
  auto check = adjoint_consistency_check(spec, sigma, traj);
  REQUIRE(check.terminal_residual <= 1e-8);
  REQUIRE(check.max_ito_residual <= 10.0 * grid.dt());
  // q11 = Sigma G identity holds by construction.
  for (std::size_t k = 0; k <= grid.num_steps(); ++k)
    REQUIRE((sigma.q11.at(k) - sigma.sigma.at(k) * spec.G.at(k)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint consistency: zero weights give the zero adjoint exactly") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 0, 1, 0.4, 0.0, 0.9,
                                   0.3, grid);
  auto sol = solve_lq_team(spec, grid);
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, grid);
  auto traj = euler_maruyama(spec, &sol.strategy, &params, grid, 4, 0);
  auto sigma = solve_sigma_lyapunov(spec.A, spec.H, spec.M_T, grid, spec.G);
  auto check = adjoint_consistency_check(spec, sigma, traj);
  REQUIRE(check.terminal_residual == 0.0);
  REQUIRE(check.max_ito_residual == 0.0);
}

TEST_CASE("adjoint beta matches dense quadrature of the backward integral") {
  // Scalar constant-coefficient case: beta(t) = int_t^T Phi*(s,t) Sigma B u ds
  // with u the realized (deterministic, noise-free) control path.
  TimeGrid grid(1.0, 1e-3);
  auto spec = testing::scalar_spec(-0.5, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.4, 0.8, 0.0, grid);
  auto sol = solve_lq_team(spec, grid);
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, grid);
  auto traj = euler_maruyama(spec, &sol.strategy, &params, grid, 1, 0, true);
  auto sigma = solve_sigma_lyapunov(spec.A, spec.H, spec.M_T, grid, spec.G);
  auto check = adjoint_consistency_check(spec, sigma, traj);

  TransitionFamily phi = TransitionFamily::of_schedule(spec.A, grid);
  const std::size_t K = grid.num_steps();
  const double dt = grid.dt();
  Mat phis = Mat::Identity(1, 1);
  double acc = 0.0;
  auto integrand = [&](std::size_t s, const Mat& ph) {
    return ph(0, 0) * sigma.sigma.at(s)(0, 0) * spec.B.at(s)(0, 0) * traj.u[0][s](0);
  };
  for (std::size_t s = 0; s < K; ++s) {
    const double f0 = integrand(s, phis);
    phis = phi.step(s) * phis;
    const double f1 = integrand(s + 1, phis);
    acc += 0.5 * dt * (f0 + f1);
  }
  REQUIRE(std::abs(check.beta[0](0) - acc) < 1e-6);
}

TEST_CASE("gateaux_fd: zero direction gives exactly zero") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::scalar_spec(-0.3, 1.0, 0.6, 1.0, 0.8, 1.0, 1.0, 0.5, 0.5, 0.7, grid);
  auto sol = solve_lq_team(spec, grid);
  StrategyDirection dir;  // empty deltas mean zero
  auto est = gateaux_fd(spec, sol.strategy, dir, {1e-2, 1e-3}, grid, 200, 9);
  REQUIRE(est.derivative == 0.0);
  REQUIRE(est.std_error == 0.0);
}

TEST_CASE("gateaux_fd rejects steps below 1e-8") {
  TimeGrid grid(1.0, 0.1);
  auto spec = testing::scalar_spec(-0.3, 1.0, 0.6, 1.0, 0.8, 1.0, 1.0, 0.5, 0.5, 0.7, grid);
  auto sol = solve_lq_team(spec, grid);
  StrategyDirection dir;
  REQUIRE_THROWS_AS(gateaux_fd(spec, sol.strategy, dir, {1e-9}, grid, 10, 9),
                    std::invalid_argument);
}

TEST_CASE("gateaux_fd: descent direction from a suboptimal strategy is negative") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::scalar_spec(-0.3, 1.0, 0.6, 1.0, 0.8, 1.0, 1.0, 0.5, 0.5, 0.7, grid);
  auto sol = solve_lq_team(spec, grid);

  DecentralizedStrategy bad = sol.strategy;
  for (auto& g : bad.gains[0]) g *= 1.5;

  // Direction from the suboptimal strategy toward the solver output.
  StrategyDirection dir;
  dir.gain_delta.resize(1);
  dir.offset_delta.resize(1);
  dir.gain_delta[0].resize(grid.num_nodes());
  for (std::size_t k = 0; k < grid.num_nodes(); ++k)
    dir.gain_delta[0][k] = sol.strategy.gains[0][k] - bad.gains[0][k];

  auto est = gateaux_fd(spec, bad, dir, {0.02, 0.01}, grid, 20000, 13);
  REQUIRE(est.derivative < -4.0 * est.std_error);

  // Two-sided test at the optimum: both one-sided derivatives >= -4 SE.
  auto fwd = gateaux_fd(spec, sol.strategy, dir, {0.02, 0.01}, grid, 20000, 13);
  StrategyDirection neg = dir;
  for (auto& g : neg.gain_delta[0]) g *= -1.0;
  auto bwd = gateaux_fd(spec, sol.strategy, neg, {0.02, 0.01}, grid, 20000, 13);
  REQUIRE(fwd.derivative >= -4.0 * fwd.std_error);
  REQUIRE(bwd.derivative >= -4.0 * bwd.std_error);
}

TEST_CASE("convexity witness along a strategy segment") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  DecentralizedStrategy other = sol.strategy;
  for (auto& g : other.gains[0]) g *= 1.4;
  for (auto& o : other.offsets[1]) o.array() += 0.3;

  StrategyDirection dir;
  dir.gain_delta.resize(2);
  dir.offset_delta.resize(2);
  dir.gain_delta[0].resize(grid.num_nodes());
  dir.offset_delta[1].resize(grid.num_nodes());
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    dir.gain_delta[0][k] = other.gains[0][k] - sol.strategy.gains[0][k];
    dir.offset_delta[1][k] = other.offsets[1][k] - sol.strategy.offsets[1][k];
  }

  std::vector<double> J;
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto st = apply_direction(sol.strategy, dir, s);
    J.push_back(estimate_cost(spec, st, grid, 4000, 21).mean);
  }
  // Midpoint convexity with Monte Carlo slack (common random numbers).
  const CostEstimate ref = estimate_cost(spec, sol.strategy, grid, 4000, 21);
  for (int i = 1; i <= 3; ++i)
    REQUIRE(J[i] <= 0.5 * (J[i - 1] + J[i + 1]) + 4.0 * ref.std_error);
}

TEST_CASE("closure gap vanishes statistically in the uncontrolled regime") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.3, -0.7, 0.1, 0.2, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0.25, 0.3, 0.4,
                                   0.8, grid);
  Mat E(2, 2);
  E << 1.0, 0.2, -0.4, 0.7;
  spec.E = MatrixSchedule::constant(E);
  auto sol = solve_filtering_team(spec, grid);
  const ClosureGap gap = closure_cost_report(spec, sol.strategy, grid, 10000, 77);
  REQUIRE(gap.exact_regime);
  REQUIRE(std::abs(gap.gap) <= 4.0 * gap.mc_se);
}
