#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "lqteam/solvers.hpp"
#include "lqteam/verification.hpp"
#include "test_helpers.hpp"

using namespace lqteam;

TEST_CASE("broadcast: block-diagonal R decouples the laws") {
  TimeGrid grid(1.0, 0.1);
  auto spec = testing::scalar_broadcast(1.0, 1.0, 1.0, 2.0, 0.0, grid);
  Mat E(2, 1);
  E << 0.5, -1.0;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 0.3));
  spec.theta_mean = Vec::Constant(1, 0.4);
  auto sol = solve_broadcast_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE(sol.strategy.gains[0][k](0, 0) == Catch::Approx(-0.25).margin(1e-12));
    REQUIRE(sol.strategy.gains[1][k](0, 0) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(sol.strategy.offsets[0][k](0) == Catch::Approx(-0.15).margin(1e-12));
    REQUIRE(sol.strategy.offsets[1][k](0) == Catch::Approx(-0.15).margin(1e-12));
  }
}

TEST_CASE("broadcast: coupled mean controls solve the 2x2 node equation") {
  TimeGrid grid(1.0, 0.1);
  auto spec = testing::scalar_broadcast(1.0, 1.0, 1.0, 1.0, 0.5, grid);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 1.0));
  auto sol = solve_broadcast_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE(sol.strategy.mean_control[k](0) == Catch::Approx(-2.0 / 3.0).margin(1e-9));
    REQUIRE(sol.strategy.mean_control[k](1) == Catch::Approx(-2.0 / 3.0).margin(1e-9));
  }
}

TEST_CASE("broadcast: C = 0 gives a deterministic strategy matching Gaussian moments") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::scalar_broadcast(0.0, 1.0, 0.7, 1.0, 0.3, grid);
  Mat H = Mat::Constant(1, 1, 2.0);
  spec.H = MatrixSchedule::constant(H);
  Mat E(2, 1);
  E << 1.0, -0.5;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 0.2));
  spec.theta_mean = Vec::Constant(1, 0.6);
  auto sol = solve_broadcast_team(spec, grid);

  // With C = 0 the filters stay at the prior mean, so u is deterministic.
  const CostEstimate mc = estimate_cost(spec, sol.strategy, 10000, 99);

  // Deterministic quadrature of the pay-off with theta-moments.
  double expect = 0.0;
  const double dt = grid.dt();
  for (std::size_t k = 0; k < grid.num_steps(); ++k) {
    Vec u(2);
    for (int i = 0; i < 2; ++i)
      u.segment(spec.control_offset(i), 1) = sol.strategy.control(i, k, spec.theta_mean);
    const Mat R = spec.R.at(k);
    const double theta2 = spec.theta_cov(0, 0) + spec.theta_mean(0) * spec.theta_mean(0);
    expect += (0.5 * u.dot(R * u) + 0.5 * H(0, 0) * theta2 + u.dot(E * spec.theta_mean) +
               u.dot(spec.m_or_zero(k))) *
              dt;
  }
  REQUIRE(std::abs(mc.mean - expect) <= 4.0 * mc.std_error + 1e-12);
}

TEST_CASE("single-DM reduction reproduces the centralized LQG oracle") {
  TimeGrid grid(1.0, 0.005);
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  LqTeamSpec spec;
  spec.dims.state = {2};
  spec.dims.control = {1};
  spec.dims.observation = {1};
  spec.dims.noise = {2};
  spec.grid = grid;
  Mat A(2, 2), X(2, 2), MTs(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      A(i, j) = unif(gen);
      X(i, j) = unif(gen);
      MTs(i, j) = unif(gen);
    }
  Mat B(2, 1);
  B << 1.0, 0.4;
  spec.A = MatrixSchedule::constant(A);
  spec.B = MatrixSchedule::constant(B);
  spec.G = MatrixSchedule::constant(0.3 * Mat::Identity(2, 2));
  spec.C = {MatrixSchedule::constant(Mat(Mat::Ones(1, 2)))};
  spec.D = {MatrixSchedule::constant(Mat::Identity(1, 1))};
  spec.H = MatrixSchedule::constant(Mat(X * X.transpose()));
  spec.R = MatrixSchedule::constant(Mat::Constant(1, 1, 0.8));
  spec.M_T = MTs * MTs.transpose();
  spec.x0_mean = Vec::Zero(2);
  spec.x0_cov = 0.5 * Mat::Identity(2, 2);

  auto team = solve_lq_team(spec, grid);
  auto oracle = oracle_lqg(spec, grid);
  double worst = 0.0;
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    worst = std::max(worst,
                     (team.strategy.gains[0][k] - oracle.strategy.gains[0][k]).cwiseAbs().maxCoeff());
    REQUIRE(team.strategy.offsets[0][k].cwiseAbs().maxCoeff() < 1e-10);
  }
  REQUIRE(worst <= 1e-8);
}

TEST_CASE("zero noise from the origin: everything stays at zero") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.0, 1, 1, 1, 1, 0.4, 0.6, 0.0,
                                   0.0, grid);
  auto sol = solve_lq_team(spec, grid);
  const CostEstimate mc = estimate_cost(spec, sol.strategy, grid, 100, 5);
  REQUIRE(mc.mean == 0.0);
  REQUIRE(mc.std_error == 0.0);
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, grid);
  auto traj = euler_maruyama(spec, &sol.strategy, &params, grid, 3, 0);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE(traj.x[k].cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(traj.u[0][k].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("identical decoupled subsystems give permutation-conjugate gains") {
  TimeGrid grid(1.0, 0.01);
  auto spec = testing::two_dm_spec(-0.5, -0.5, 0, 0, 1.0, 1.0, 0.5, 1, 1, 1, 1, 0.0, 0.5, 0.3, 0.6,
                                   grid);
  auto sol = solve_lq_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    const Mat& g1 = sol.strategy.gains[0][k];
    const Mat& g2 = sol.strategy.gains[1][k];
    REQUIRE(std::abs(g1(0, 0) - g2(0, 1)) <= 1e-9);
    REQUIRE(std::abs(g1(0, 1) - g2(0, 0)) <= 1e-9);
    REQUIRE(std::abs(sol.strategy.offsets[0][k](0) - sol.strategy.offsets[1][k](0)) <= 1e-9);
  }
}

TEST_CASE("filtering team: identity weights give u = -xhat") {
  TimeGrid grid(1.0, 0.05);
  auto spec = testing::two_dm_spec(-0.3, -0.7, 0.1, 0.2, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0, 0, 0.4, 0.8,
                                   grid);
  spec.E = MatrixSchedule::constant(Mat::Identity(2, 2));
  auto sol = solve_filtering_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE((sol.strategy.gains[0][k] + Mat::Identity(1, 2).row(0)).cwiseAbs().maxCoeff() <
            1e-12);
    // ubar = -xbar
    REQUIRE((sol.strategy.mean_control[k] + sol.report.mean_state.at(k).col(0)).cwiseAbs().maxCoeff() <
            1e-12);
    REQUIRE(sol.strategy.offsets[0][k].cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("filtering team: constant mean flow with A = 0") {
  TimeGrid grid(1.0, 0.05);
  auto spec = testing::two_dm_spec(0, 0, 0, 0, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0.3, 0, 0.5, 0.8, grid);
  Mat E(2, 2);
  E << 1.0, 0.2, -0.4, 0.7;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 0.25));
  auto sol = solve_filtering_team(spec, grid);
  const Vec expect = -spec.R.at(0).llt().solve(Vec(E * spec.x0_mean + spec.m_or_zero(0)));
  for (std::size_t k = 0; k <= grid.num_steps(); ++k)
    REQUIRE((sol.strategy.mean_control[k] - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("filtering team: constructed cancellation m = -E xbar0") {
  TimeGrid grid(1.0, 0.05);
  auto spec = testing::two_dm_spec(0, 0, 0, 0, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0.3, 0, 0.5, 0.8, grid);
  Mat E(2, 2);
  E << 1.0, 0.2, -0.4, 0.7;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat(-E * spec.x0_mean));
  auto sol = solve_filtering_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k)
    REQUIRE(sol.strategy.mean_control[k].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve_lq_team at N = 2 equals solve_lq_team_n bit for bit") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto a = solve_lq_team(spec, grid);
  auto b = solve_lq_team_n(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE(a.strategy.gains[0][k] == b.strategy.gains[0][k]);
    REQUIRE(a.strategy.offsets[1][k] == b.strategy.offsets[1][k]);
    REQUIRE(a.strategy.mean_control[k] == b.strategy.mean_control[k]);
  }
}

namespace {

LqTeamSpec three_dm_spec(double coupling, double x0, const TimeGrid& grid) {
  LqTeamSpec spec;
  spec.dims.state = {1, 1, 1};
  spec.dims.control = {1, 1, 1};
  spec.dims.observation = {1, 1, 1};
  spec.dims.noise = {1, 1, 1};
  spec.grid = grid;
  Mat A = -0.5 * Mat::Identity(3, 3);
  // Symmetric ring coupling in the dynamics.
  A(0, 1) = A(1, 2) = A(2, 0) = coupling;
  Mat R = Mat::Identity(3, 3);
  R(0, 1) = R(1, 0) = R(1, 2) = R(2, 1) = R(0, 2) = R(2, 0) = 0.2 * (coupling != 0.0 ? 1.0 : 0.0);
  spec.A = MatrixSchedule::constant(A);
  spec.B = MatrixSchedule::constant(Mat(Mat::Identity(3, 3)));
  spec.G = MatrixSchedule::constant(Mat(0.5 * Mat::Identity(3, 3)));
  for (int i = 0; i < 3; ++i) {
    spec.C.push_back(MatrixSchedule::constant(Mat::Identity(1, 1)));
    spec.D.push_back(MatrixSchedule::constant(Mat::Identity(1, 1)));
  }
  spec.H = MatrixSchedule::constant(Mat(Mat::Identity(3, 3)));
  spec.R = MatrixSchedule::constant(R);
  spec.M_T = 0.5 * Mat::Identity(3, 3);
  spec.x0_mean = Vec::Constant(3, x0);
  spec.x0_cov = 0.4 * Mat::Identity(3, 3);
  return spec;
}

}  // namespace

TEST_CASE("N = 3 fully decoupled equals three single-DM LQG solutions") {
  TimeGrid grid(1.0, 0.01);
  auto spec = three_dm_spec(0.0, 0.6, grid);
  auto sol = solve_lq_team_n(spec, grid);

  auto scalar = testing::scalar_spec(-0.5, 1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 0.5, 0.6, 0.4, grid);
  auto oracle = oracle_lqg(scalar, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    for (int i = 0; i < 3; ++i) {
      // Own-block gain matches the scalar LQG gain; cross entries vanish.
      REQUIRE(sol.strategy.gains[i][k](0, i) ==
              Catch::Approx(oracle.strategy.gains[0][k](0, 0)).margin(1e-9));
      for (int j = 0; j < 3; ++j)
        if (j != i) REQUIRE(std::abs(sol.strategy.gains[i][k](0, j)) < 1e-9);
    }
  }
}

TEST_CASE("N = 3 symmetric ring: gains invariant under cyclic relabeling") {
  TimeGrid grid(1.0, 0.02);
  auto spec = three_dm_spec(0.3, 0.5, grid);
  auto sol = solve_lq_team_n(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    const auto& g = sol.strategy.gains;
    // Cyclic shift sigma(i) = i+1 mod 3: gain entries satisfy
    // g[i](0, j) = g[sigma(i)](0, sigma(j)).
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        REQUIRE(std::abs(g[i][k](0, j) - g[(i + 1) % 3][k](0, (j + 1) % 3)) <= 1e-9);
    REQUIRE(std::abs(sol.strategy.mean_control[k](0) - sol.strategy.mean_control[k](1)) <= 1e-9);
  }
}

TEST_CASE("consistency: lq team with B = 0 and linear terms equals the filtering solver") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.3, -0.7, 0.1, 0.2, 0, 0, 0.6, 1.0, 0.9, 1, 1, 0.25, 0.3, 0.4,
                                   0.8, grid);
  Mat E(2, 2);
  E << 1.0, 0.2, -0.4, 0.7;
  spec.E = MatrixSchedule::constant(E);
  spec.lin_m = MatrixSchedule::constant(Mat::Constant(2, 1, 0.15));
  auto lq = solve_lq_team(spec, grid);
  auto filt = solve_filtering_team(spec, grid);
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    REQUIRE((lq.strategy.gains[0][k] - filt.strategy.gains[0][k]).cwiseAbs().maxCoeff() <= 1e-8);
    REQUIRE((lq.strategy.gains[1][k] - filt.strategy.gains[1][k]).cwiseAbs().maxCoeff() <= 1e-8);
    REQUIRE((lq.strategy.offsets[0][k] - filt.strategy.offsets[0][k]).cwiseAbs().maxCoeff() <=
            1e-8);
    REQUIRE((lq.strategy.mean_control[k] - filt.strategy.mean_control[k]).cwiseAbs().maxCoeff() <=
            1e-8);
  }
}

TEST_CASE("mean path satisfies the centralized optimality system exactly") {
  // The per-DM representations K^i xbar + r^i must reconstruct one and the
  // same adjoint psi (backward-integrated along the mean path), and the
  // stacked stationarity B* psi + R ubar = 0 must hold at every node. This
  // validates the offset equations and the fixed point against the plain
  // two-point boundary value formulation.
  TimeGrid grid(1.0, 1e-3);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1.5, 1, 0.3, 0.6,
                                   0.9, 0.6, grid);
  TeamSolverOptions opts;
  opts.fixed_point.tolerance = 1e-12;
  auto sol = solve_lq_team(spec, grid, opts);
  const auto& rep = sol.report;

  const Mat A = spec.A.at(0);
  const Mat B = spec.B.at(0);
  const Mat H = spec.H.at(0);
  const Mat R = spec.R.at(0);
  auto psi = rk4_backward(
      [&](double t, const Mat& p) -> Mat {
        return -(A.transpose() * p.col(0) + H * rep.mean_state.eval(t).col(0));
      },
      Mat(spec.M_T * rep.mean_state.at(grid.num_steps()).col(0)), grid);

  double worst_rep = 0.0, worst_stat = 0.0;
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    const Vec p = psi.value[k].col(0);
    const Vec xb = rep.mean_state.at(k).col(0);
    for (int i = 0; i < 2; ++i) {
      const Vec recon = rep.riccati[i].at(k) * xb + rep.offsets[i].at(k).col(0);
      worst_rep = std::max(worst_rep, (p - recon).cwiseAbs().maxCoeff());
    }
    worst_stat =
        std::max(worst_stat, (B.transpose() * p + R * rep.mean_control[k]).cwiseAbs().maxCoeff());
  }
  REQUIRE(worst_rep <= 1e-9);
  REQUIRE(worst_stat <= 1e-9);
}

TEST_CASE("mean-path stationarity holds with linear cost terms present") {
  // Same check with E, m, F nonzero and B coupled: the adjoint gains the
  // -F - E* ubar drift and the stationarity gains E xbar + m.
  TimeGrid grid(1.0, 1e-3);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.9, 0.5, 1, 1, 1.5, 1, 0.3, 0.6,
                                   0.9, 0.4, grid);
  Mat Ecost(2, 2);
  Ecost << 0.4, -0.2, 0.1, 0.5;
  spec.E = MatrixSchedule::constant(Ecost);
  spec.lin_m = MatrixSchedule::constant((Mat(2, 1) << 0.2, -0.3).finished());
  spec.lin_F = MatrixSchedule::constant((Mat(2, 1) << -0.1, 0.25).finished());

  TeamSolverOptions opts;
  opts.fixed_point.tolerance = 1e-12;
  auto sol = solve_lq_team(spec, grid, opts);
  const auto& rep = sol.report;

  const Mat A = spec.A.at(0);
  const Mat B = spec.B.at(0);
  const Mat H = spec.H.at(0);
  const Mat R = spec.R.at(0);
  std::vector<Mat> ubm(grid.num_nodes());
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) ubm[k] = rep.mean_control[k];
  auto u_sched = MatrixSchedule::tabulated(grid, ubm, detail::fd_slopes(ubm, grid.dt()));
  auto psi = rk4_backward(
      [&](double t, const Mat& p) -> Mat {
        return -(A.transpose() * p.col(0) + H * rep.mean_state.eval(t).col(0) +
                 spec.lin_F.eval(t).col(0) + Ecost.transpose() * u_sched.eval(t).col(0));
      },
      Mat(spec.M_T * rep.mean_state.at(grid.num_steps()).col(0)), grid);

  double worst = 0.0;
  for (std::size_t k = 0; k <= grid.num_steps(); ++k) {
    const Vec stat = B.transpose() * psi.value[k].col(0) + R * rep.mean_control[k] +
                     Ecost * rep.mean_state.at(k).col(0) + spec.lin_m.at(k).col(0);
    worst = std::max(worst, stat.cwiseAbs().maxCoeff());
  }
  REQUIRE(worst <= 1e-9);
}

TEST_CASE("zero-noise team solution coincides with the centralized LQR solution") {
  // With no state noise and a deterministic start every DM reconstructs the
  // state exactly, so the decentralization constraint is not binding and the
  // team solution must reproduce the centralized full-information optimum.
  TimeGrid grid(1.0, 1e-3);
  LqTeamSpec spec;
  spec.dims.state = {1, 1};
  spec.dims.control = {1, 1};
  spec.dims.observation = {1, 1};
  spec.dims.noise = {1, 1};
  spec.grid = grid;
  Mat A(2, 2), B(2, 2), H(2, 2), R(2, 2), MT(2, 2);
  A << -0.4, 0.3, 0.2, -0.6;
  B << 1.0, 0.3, 0.2, 0.9;
  H << 1.5, 0.2, 0.2, 1.0;
  R << 1.0, 0.3, 0.3, 1.0;
  MT << 0.6, 0.1, 0.1, 0.4;
  spec.A = MatrixSchedule::constant(A);
  spec.B = MatrixSchedule::constant(B);
  spec.G = MatrixSchedule::constant(Mat::Zero(2, 2));
  spec.C = {MatrixSchedule::constant(Mat::Identity(1, 1)),
            MatrixSchedule::constant(Mat::Identity(1, 1))};
  spec.D = {MatrixSchedule::constant(Mat::Identity(1, 1)),
            MatrixSchedule::constant(Mat::Identity(1, 1))};
  spec.H = MatrixSchedule::constant(H);
  spec.R = MatrixSchedule::constant(R);
  spec.M_T = MT;
  spec.x0_mean = (Vec(2) << 1.0, -0.7).finished();
  spec.x0_cov = Mat::Zero(2, 2);

  TeamSolverOptions opts;
  opts.fixed_point.tolerance = 1e-12;
  auto team = solve_lq_team(spec, grid, opts);
  const FilterBankParams tparams = make_team_filter_params(spec, &team.strategy, grid);
  auto team_traj = euler_maruyama(spec, &team.strategy, &tparams, grid, 1, 0, true);

  // Centralized reference: full-B/full-R Riccati, u = -R^{-1} B* K x, with the
  // matching closed-loop mean schedule for the filter cross-drift.
  auto Kc = solve_riccati(spec.A, spec.B, spec.R, spec.H, spec.M_T, grid);
  DecentralizedStrategy cen = DecentralizedStrategy::zero(grid, spec.dims.control, 2);
  auto xbar_cen = rk4_forward(
      [&](double t, const Mat& xb) -> Mat {
        const Mat full = -R.llt().solve(Mat(B.transpose() * Kc.K.eval(t)));
        return (A + B * full) * xb;
      },
      spec.x0_mean, grid);
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    const Mat full = -R.llt().solve(Mat(B.transpose() * Kc.K.at(k)));
    cen.gains[0][k] = full.row(0);
    cen.gains[1][k] = full.row(1);
    cen.mean_control[k] = full * xbar_cen.value[k].col(0);
  }
  const FilterBankParams cparams = make_team_filter_params(spec, &cen, grid);
  auto cen_traj = euler_maruyama(spec, &cen, &cparams, grid, 1, 0, true);

  double worst_u = 0.0;
  for (std::size_t k = 0; k <= grid.num_steps(); ++k)
    for (int i = 0; i < 2; ++i)
      worst_u = std::max(worst_u,
                         (team_traj.u[i][k] - cen_traj.u[i][k]).cwiseAbs().maxCoeff());
  REQUIRE(worst_u <= 1e-3);

  const CostEstimate jt = estimate_cost(spec, team.strategy, grid, 1, 1);
  const CostEstimate jc = estimate_cost(spec, cen, grid, 1, 1);
  REQUIRE(std::abs(jt.mean - jc.mean) <= 1e-6);
}

TEST_CASE("solver reports carry residuals and the closure note") {
  TimeGrid grid(1.0, 0.02);
  auto spec = testing::two_dm_spec(-0.4, -0.6, 0.3, 0.2, 1.0, 0.7, 0.5, 1, 1, 1, 1, 0.4, 0.6, 0.8,
                                   0.6, grid);
  auto sol = solve_lq_team(spec, grid);
  REQUIRE(sol.report.status == "converged");
  REQUIRE(sol.report.fixed_point_residual <= sol.report.fixed_point_tolerance);
  REQUIRE(sol.report.max_symmetry_residual <= 1e-8);
  REQUIRE(sol.report.moment_closure == "deterministic-riccati-covariance");
  REQUIRE(sol.report.picard_iterations >= 1);
  REQUIRE(sol.report.max_coupling_condition >= 1.0);
}
