// Batch front end: parse a scenario config, dispatch solvers / simulators /
// verifiers, and write all artifacts under --out. Exit codes: 0 success,
// 2 invalid config, 3 solver non-convergence or numerical failure,
// 4 verification failure.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lqteam/lqteam.hpp"

namespace fs = std::filesystem;
using namespace lqteam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerification = 4;

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::uint64_t paths = 10000;
  double dt_override = 0.0;
  std::string format = "csv";
  double tol = 1e-8;
  int threads = 1;
  bool per_path_files = false;
  std::uint64_t sim_paths = 1;
};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

void write_manifest(const CliOptions& opts, const std::string& subcommand, const TimeGrid& grid,
                    std::uint64_t config_hash) {
  Json m;
  m["subcommand"] = subcommand;
  m["config_hash"] = config_hash;
  m["seed"] = opts.seed;
  m["grid"] = {{"T", grid.horizon()}, {"dt", grid.dt()}, {"num_steps", grid.num_steps()}};
  m["versions"] = {{"lqteam", kVersion}, {"battery", kBatteryVersion}};
  write_text(fs::path(opts.out_dir) / "manifest.json", m.dump(2) + "\n");
}

void write_diagnostic(const CliOptions& opts, const std::string& kind, const std::string& detail) {
  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);
  Json d;
  d["error"] = kind;
  d["detail"] = detail;
  write_text(fs::path(opts.out_dir) / "diagnostics.json", d.dump(2) + "\n");
}

TimeGrid effective_grid(const Json& cfg, const CliOptions& opts) {
  TimeGrid grid = parse_grid(cfg);
  if (opts.dt_override > 0.0) grid = TimeGrid(grid.horizon(), opts.dt_override);
  return grid;
}

// Broadcast stationarity: with a static state the adjoint vanishes, so the
// conditional gradient is R_ii Gamma_i + E^{[i]} on the filter state and
// R_ii gamma_i + m^i + sum_j R_ij ubar^j in the offset.
std::vector<double> broadcast_gradient_norms(const BroadcastSpec& spec,
                                             const DecentralizedStrategy& s) {
  const int N = spec.num_dms();
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < spec.grid.num_nodes(); ++k) {
      const Mat Rii = spec.cost_R_block(i, i, k);
      const Mat gain_term = spec.cost_E_row(i, k) + Rii * s.gains[i][k];
      Vec off_term = spec.cost_m_block(i, k) + Rii * s.offsets[i][k];
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        off_term += spec.cost_R_block(i, j, k) *
                    s.mean_control[k].segment(spec.control_offset(j), spec.control_dims[j]);
      }
      const double scale = 1.0 + Rii.norm() + spec.cost_E_row(i, k).norm();
      out[i] = std::max(out[i], (gain_term.norm() + off_term.norm()) / scale);
    }
  }
  return out;
}

CostEstimate broadcast_cost_difference(const BroadcastSpec& spec,
                                       const DecentralizedStrategy& base,
                                       const DecentralizedStrategy& pert, std::uint64_t paths,
                                       std::uint64_t seed, int threads) {
  const int N = spec.num_dms();
  std::vector<std::vector<Mat>> cov(N);
  for (int i = 0; i < N; ++i)
    if (!spec.has_feedback(i)) cov[i] = static_channel_covariance(spec, i, spec.grid).value;
  const CounterRng rng(seed);
  return detail::mc_reduce(
      paths,
      [&](std::uint64_t p) {
        return simulate_broadcast_path(spec, pert, cov, rng, p, false).cost -
               simulate_broadcast_path(spec, base, cov, rng, p, false).cost;
      },
      threads);
}

void write_strategy_outputs(const CliOptions& opts, const DecentralizedStrategy& strategy,
                            const SolverReport& report, const TimeGrid& grid) {
  if (opts.format == "json") {
    Json s;
    s["mean_control"] = Json::array();
    for (const auto& u : strategy.mean_control) s["mean_control"].push_back(config::dump_vector(u));
    s["gains"] = Json::array();
    s["offsets"] = Json::array();
    for (int i = 0; i < strategy.num_dms(); ++i) {
      Json g = Json::array(), o = Json::array();
      for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
        g.push_back(config::dump_matrix(strategy.gains[i][k]));
        o.push_back(config::dump_vector(strategy.offsets[i][k]));
      }
      s["gains"].push_back(g);
      s["offsets"].push_back(o);
    }
    write_text(fs::path(opts.out_dir) / "strategy.json", s.dump() + "\n");
  } else {
    std::ofstream os(fs::path(opts.out_dir) / "strategy.csv", std::ios::binary);
    write_strategy_csv(os, strategy);
  }
  write_text(fs::path(opts.out_dir) / "report.json", report_to_json(report, grid).dump(2) + "\n");
  if (!report.riccati.empty() || !report.mean_control.empty()) {
    std::ofstream os(fs::path(opts.out_dir) / "schedules.csv", std::ios::binary);
    write_report_schedules_csv(os, report, grid);
  }
  for (std::size_t i = 0; i < report.filter_cov.size(); ++i) {
    if (report.filter_cov[i].empty() && !report.filter_cov[i].is_constant()) continue;
    std::ofstream os(fs::path(opts.out_dir) / ("covariance_dm" + std::to_string(i + 1) + ".csv"),
                     std::ios::binary);
    write_covariance_csv(os, report.filter_cov[i], grid);
  }
}

LqTeamSpec load_team_spec(const Json& cfg, const CliOptions& opts, const char* subcommand) {
  LqTeamSpec spec = parse_lq_team_spec(cfg);
  spec.grid = effective_grid(cfg, opts);
  const auto outcome = validate_spec(spec);
  if (!outcome.pass()) throw SpecInvalid(outcome.summary());
  (void)subcommand;
  return spec;
}

BroadcastSpec load_broadcast_spec(const Json& cfg, const CliOptions& opts) {
  BroadcastSpec spec = parse_broadcast_spec(cfg);
  spec.grid = effective_grid(cfg, opts);
  const auto outcome = validate_spec(spec);
  if (!outcome.pass()) throw SpecInvalid(outcome.summary());
  return spec;
}

Trajectory broadcast_to_trajectory(const BroadcastSpec& spec, const BroadcastPath& path,
                                   std::uint64_t seed, std::uint64_t index) {
  Trajectory traj;
  traj.grid = spec.grid;
  traj.seed = seed;
  traj.path_index = index;
  const std::size_t nodes = spec.grid.num_nodes();
  traj.x.assign(nodes, path.theta);
  traj.y = path.y;
  traj.xhat = path.xhat;
  traj.u = path.u;
  traj.dW.assign(nodes, Vec::Zero(0));
  traj.dB.assign(spec.num_dms(), std::vector<Vec>(nodes, Vec::Zero(0)));
  traj.innovation = traj.dB;
  return traj;
}

int run_solve(const CliOptions& opts, const Json& cfg, const std::string& scenario) {
  const TimeGrid grid = effective_grid(cfg, opts);
  if (scenario == "broadcast") {
    const BroadcastSpec spec = load_broadcast_spec(cfg, opts);
    auto sol = solve_broadcast_team(spec, spec.grid);
    write_strategy_outputs(opts, sol.strategy, sol.report, spec.grid);
    return kExitOk;
  }
  if (scenario == "filtering") {
    const LqTeamSpec spec = load_team_spec(cfg, opts, "solve-filtering");
    auto sol = solve_filtering_team(spec, spec.grid);
    write_strategy_outputs(opts, sol.strategy, sol.report, spec.grid);
    return kExitOk;
  }
  const LqTeamSpec spec = load_team_spec(cfg, opts, "solve-lq-team");
  TeamSolverOptions sopts;
  sopts.fixed_point.tolerance = opts.tol;
  auto sol = solve_lq_team_n(spec, spec.grid, sopts);
  write_strategy_outputs(opts, sol.strategy, sol.report, spec.grid);
  if (sol.report.status != "converged") {
    write_diagnostic(opts, "solver non-convergence",
                     "fixed point residual " + std::to_string(sol.report.fixed_point_residual) +
                         " after " + std::to_string(sol.report.picard_iterations) + " iterations");
    return kExitSolver;
  }
  return kExitOk;
}

int run_simulate(const CliOptions& opts, const Json& cfg, const std::string& scenario) {
  const std::uint64_t paths = opts.sim_paths;
  if (scenario == "broadcast") {
    const BroadcastSpec spec = load_broadcast_spec(cfg, opts);
    auto sol = solve_broadcast_team(spec, spec.grid);
    const int N = spec.num_dms();
    std::vector<std::vector<Mat>> cov(N);
    for (int i = 0; i < N; ++i)
      if (!spec.has_feedback(i)) cov[i] = static_channel_covariance(spec, i, spec.grid).value;
    const CounterRng rng(opts.seed);
    std::ofstream os;
    for (std::uint64_t p = 0; p < paths; ++p) {
      auto bp = simulate_broadcast_path(spec, sol.strategy, cov, rng, p);
      const Trajectory traj = broadcast_to_trajectory(spec, bp, opts.seed, p);
      if (opts.per_path_files) {
        std::ofstream one(fs::path(opts.out_dir) / ("trajectory_" + std::to_string(p) + ".csv"),
                          std::ios::binary);
        one << trajectory_csv_header(traj, false) << "\n";
        append_trajectory_csv(one, traj, false);
      } else {
        if (p == 0) {
          os.open(fs::path(opts.out_dir) / "trajectories.csv", std::ios::binary);
          os << trajectory_csv_header(traj, true) << "\n";
        }
        append_trajectory_csv(os, traj, true);
      }
    }
    return kExitOk;
  }

  const LqTeamSpec spec = load_team_spec(cfg, opts, "simulate");
  TeamSolverOptions sopts;
  sopts.fixed_point.tolerance = opts.tol;
  TeamSolution sol = (scenario == "filtering") ? solve_filtering_team(spec, spec.grid)
                                               : solve_lq_team_n(spec, spec.grid, sopts);
  if (sol.report.status != "converged") {
    write_diagnostic(opts, "solver non-convergence", "fixed point did not converge");
    return kExitSolver;
  }
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, spec.grid);
  const SimChain chain = build_sim_chain(spec, &sol.strategy, &params, spec.grid);
  const CounterRng rng(opts.seed);
  std::ofstream os;
  for (std::uint64_t p = 0; p < paths; ++p) {
    const Trajectory traj = simulate_trajectory(chain, spec, rng, p);
    if (opts.per_path_files) {
      std::ofstream one(fs::path(opts.out_dir) / ("trajectory_" + std::to_string(p) + ".csv"),
                        std::ios::binary);
      one << trajectory_csv_header(traj, false) << "\n";
      append_trajectory_csv(one, traj, false);
    } else {
      if (p == 0) {
        os.open(fs::path(opts.out_dir) / "trajectories.csv", std::ios::binary);
        os << trajectory_csv_header(traj, true) << "\n";
      }
      append_trajectory_csv(os, traj, true);
    }
  }
  return kExitOk;
}

int run_verify(const CliOptions& opts, const Json& cfg, const std::string& scenario) {
  if (scenario == "broadcast") {
    const BroadcastSpec spec = load_broadcast_spec(cfg, opts);
    auto sol = solve_broadcast_team(spec, spec.grid);
    VerificationReport rep;
    rep.battery_version = kBatteryVersion;
    rep.num_paths = opts.paths;
    const CostEstimate base = estimate_cost(spec, sol.strategy, opts.paths, opts.seed,
                                            opts.threads);
    rep.base_cost = base.mean;
    rep.base_cost_se = base.std_error;
    for (const auto& pert : perturbation_battery(sol.strategy)) {
      const CostEstimate diff = broadcast_cost_difference(
          spec, sol.strategy, pert.apply(sol.strategy), opts.paths, opts.seed, opts.threads);
      PerturbationResult res;
      res.dm = pert.dm;
      res.name = pert.name;
      res.delta_j = diff.mean;
      res.std_error = diff.std_error;
      res.pass = diff.mean >= -4.0 * diff.std_error;
      rep.all_pass = rep.all_pass && res.pass;
      rep.perturbations.push_back(res);
    }
    rep.conditional_gradient_norm = broadcast_gradient_norms(spec, sol.strategy);
    for (double g : rep.conditional_gradient_norm) rep.all_pass = rep.all_pass && g <= 1e-6;

    write_text(fs::path(opts.out_dir) / "verification.json",
               verification_to_json(rep).dump(2) + "\n");
    std::ofstream os(fs::path(opts.out_dir) / "verification.csv", std::ios::binary);
    write_verification_csv(os, rep);
    return rep.all_pass ? kExitOk : kExitVerification;
  }

  const LqTeamSpec spec = load_team_spec(cfg, opts, "verify");
  TeamSolverOptions sopts;
  sopts.fixed_point.tolerance = opts.tol;
  TeamSolution sol = (scenario == "filtering") ? solve_filtering_team(spec, spec.grid)
                                               : solve_lq_team_n(spec, spec.grid, sopts);
  if (sol.report.status != "converged" && scenario != "filtering") {
    write_diagnostic(opts, "solver non-convergence", "fixed point did not converge");
    return kExitSolver;
  }
  auto battery = perturbation_battery(sol.strategy);
  VerificationReport rep = verify_person_by_person(spec, sol.strategy, sol.report, battery,
                                                   spec.grid, opts.paths, opts.seed, opts.threads);
  for (double g : rep.conditional_gradient_norm) rep.all_pass = rep.all_pass && g <= 1e-6;

  // Adjoint consistency on the noise-free conditional-mean path.
  const FilterBankParams params = make_team_filter_params(spec, &sol.strategy, spec.grid);
  auto traj = euler_maruyama(spec, &sol.strategy, &params, spec.grid, opts.seed, 0, true);
  auto sigma = solve_sigma_lyapunov(spec.A, spec.H, spec.M_T, spec.grid, spec.G);
  auto adj = adjoint_consistency_check(spec, sigma, traj);
  rep.adjoint_terminal_residual = adj.terminal_residual;
  rep.adjoint_ito_residual = adj.max_ito_residual;
  for (std::size_t k = 0; k < spec.grid.num_nodes(); ++k)
    rep.q12_sigma_g_residual = std::max(
        rep.q12_sigma_g_residual,
        (sigma.q11.at(k) - sigma.sigma.at(k) * spec.G.at(k)).cwiseAbs().maxCoeff());
  rep.all_pass = rep.all_pass && adj.terminal_residual <= 1e-8 &&
                 adj.max_ito_residual <= 10.0 * spec.grid.dt() &&
                 rep.q12_sigma_g_residual == 0.0;

  write_text(fs::path(opts.out_dir) / "verification.json",
             verification_to_json(rep).dump(2) + "\n");
  std::ofstream os(fs::path(opts.out_dir) / "verification.csv", std::ios::binary);
  write_verification_csv(os, rep);
  return rep.all_pass ? kExitOk : kExitVerification;
}

int run_oracle(const CliOptions& opts, const Json& cfg) {
  const LqTeamSpec spec = load_team_spec(cfg, opts, "oracle-lqg");
  auto sol = oracle_lqg(spec, spec.grid);
  write_strategy_outputs(opts, sol.strategy, sol.report, spec.grid);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized LQ team solver and verifier"};
  app.require_subcommand(1);

  CliOptions opts;
  const std::vector<std::string> names = {"solve-broadcast", "solve-lq-team", "solve-filtering",
                                          "simulate", "verify", "oracle-lqg"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path)->required();
    sub->add_option("--out", opts.out_dir)->required();
    sub->add_option("--seed", opts.seed);
    sub->add_option("--paths", opts.paths);
    sub->add_option("--dt", opts.dt_override);
    sub->add_option("--format", opts.format)->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--tol", opts.tol);
    sub->add_option("--threads", opts.threads);
    sub->add_option("--sim-paths", opts.sim_paths);
    sub->add_flag("--per-path-files", opts.per_path_files);
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  std::string config_text;
  Json cfg;
  std::string scenario;
  try {
    config_text = read_file(opts.config_path);
    cfg = Json::parse(config_text);
    scenario = config_scenario(cfg);
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);

    // The scenario is a config field; subcommands must match it.
    if ((sub == "solve-broadcast" && scenario != "broadcast") ||
        (sub == "solve-lq-team" && scenario != "lq_team") ||
        (sub == "solve-filtering" && scenario != "filtering") ||
        (sub == "oracle-lqg" && scenario != "lq_team")) {
      throw ConfigError("scenario '" + scenario + "' does not match subcommand " + sub);
    }

    const TimeGrid grid = effective_grid(cfg, opts);
    write_manifest(opts, sub, grid, fnv1a(config_text));

    int code = kExitOk;
    if (sub == "solve-broadcast" || sub == "solve-lq-team" || sub == "solve-filtering")
      code = run_solve(opts, cfg, scenario);
    else if (sub == "simulate")
      code = run_simulate(opts, cfg, scenario);
    else if (sub == "verify")
      code = run_verify(opts, cfg, scenario);
    else if (sub == "oracle-lqg")
      code = run_oracle(opts, cfg);
    return code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "config invalid", e.what());
    return kExitConfig;
  } catch (const SpecInvalid& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "config invalid", e.what());
    return kExitConfig;
  } catch (const Json::exception& e) {
    std::cerr << "config: " << e.what() << "\n";
    write_diagnostic(opts, "config invalid", e.what());
    return kExitConfig;
  } catch (const FixedPointSingular& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "solver failure", e.what());
    return kExitSolver;
  } catch (const IntegrationBlowup& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "solver failure", e.what());
    return kExitSolver;
  } catch (const NumericalDegeneracy& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "solver failure", e.what());
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "config invalid", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    write_diagnostic(opts, "solver failure", e.what());
    return kExitSolver;
  }
}
