#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "lqteam/model.hpp"

namespace lqteam {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error("config: " + what) {}
};

namespace config {

// Matrix encoding: a scalar is 1x1, a flat array is a column vector, a
// 2-level nested array is a row-major constant matrix, and a 3-level array is
// a per-node tabulated schedule.
inline Mat parse_matrix(const Json& j, const char* name) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(name) + ": expected matrix");
  if (j.front().is_number()) {
    Mat out(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return out;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(std::string(name) + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return out;
}

inline bool is_tabulated(const Json& j) {
  return j.is_array() && !j.empty() && j.front().is_array() && !j.front().empty() &&
         j.front().front().is_array();
}

inline MatrixSchedule parse_schedule(const Json& j, const TimeGrid& grid, const char* name) {
  if (is_tabulated(j)) {
    if (j.size() != grid.num_nodes())
      throw ConfigError(std::string(name) + ": tabulated schedule needs one sample per node");
    std::vector<Mat> values;
    values.reserve(j.size());
    for (const auto& node : j) values.push_back(parse_matrix(node, name));
    return MatrixSchedule::tabulated(grid, std::move(values));
  }
  return MatrixSchedule::constant(parse_matrix(j, name));
}

inline Json dump_matrix(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json dump_vector(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Json dump_schedule(const MatrixSchedule& s, const TimeGrid& grid) {
  if (s.is_constant()) return dump_matrix(s.at(0));
  Json out = Json::array();
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) out.push_back(dump_matrix(s.at(k)));
  return out;
}

inline std::vector<int> parse_int_list(const Json& j, const char* name) {
  if (!j.is_array()) throw ConfigError(std::string(name) + ": expected list");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

}  // namespace config

inline TimeGrid parse_grid(const Json& j) {
  if (!j.contains("grid")) throw ConfigError("missing grid");
  const auto& g = j.at("grid");
  return TimeGrid(g.at("T").get<double>(), g.at("dt").get<double>());
}

inline std::string config_scenario(const Json& j) {
  if (!j.contains("scenario")) throw ConfigError("missing scenario field");
  return j.at("scenario").get<std::string>();
}

inline LqTeamSpec parse_lq_team_spec(const Json& j) {
  LqTeamSpec spec;
  spec.grid = parse_grid(j);
  const auto& blocks = j.at("blocks");
  spec.dims.state = config::parse_int_list(blocks.at("state"), "blocks.state");
  spec.dims.control = config::parse_int_list(blocks.at("control"), "blocks.control");
  spec.dims.observation = config::parse_int_list(blocks.at("observation"), "blocks.observation");
  spec.dims.noise = config::parse_int_list(blocks.at("noise"), "blocks.noise");

  const auto& dyn = j.at("dynamics");
  spec.A = config::parse_schedule(dyn.at("A"), spec.grid, "A");
  spec.B = config::parse_schedule(dyn.at("B"), spec.grid, "B");
  spec.G = config::parse_schedule(dyn.at("G"), spec.grid, "G");

  const auto& obs = j.at("observations");
  for (const auto& c : obs.at("C")) spec.C.push_back(config::parse_schedule(c, spec.grid, "C"));
  for (const auto& d : obs.at("D")) spec.D.push_back(config::parse_schedule(d, spec.grid, "D"));

  const auto& cost = j.at("cost");
  spec.H = config::parse_schedule(cost.at("H"), spec.grid, "H");
  spec.R = config::parse_schedule(cost.at("R"), spec.grid, "R");
  spec.M_T = config::parse_matrix(cost.at("M_T"), "M_T");
  if (cost.contains("E")) spec.E = config::parse_schedule(cost.at("E"), spec.grid, "E");
  if (cost.contains("m")) spec.lin_m = config::parse_schedule(cost.at("m"), spec.grid, "m");
  if (cost.contains("F")) spec.lin_F = config::parse_schedule(cost.at("F"), spec.grid, "F");

  const auto& init = j.at("init");
  spec.x0_mean = config::parse_matrix(init.at("mean"), "init.mean").col(0);
  spec.x0_cov = config::parse_matrix(init.at("cov"), "init.cov");
  return spec;
}

inline BroadcastSpec parse_broadcast_spec(const Json& j) {
  BroadcastSpec spec;
  spec.grid = parse_grid(j);
  spec.message_dim = j.at("message_dim").get<int>();
  const auto& blocks = j.at("blocks");
  spec.control_dims = config::parse_int_list(blocks.at("control"), "blocks.control");
  spec.obs_dims = config::parse_int_list(blocks.at("observation"), "blocks.observation");

  const auto& obs = j.at("observations");
  for (const auto& c : obs.at("C")) spec.C.push_back(config::parse_schedule(c, spec.grid, "C"));
  for (const auto& d : obs.at("D")) spec.D.push_back(config::parse_schedule(d, spec.grid, "D"));

  const auto& cost = j.at("cost");
  spec.H = config::parse_schedule(cost.at("H"), spec.grid, "H");
  spec.R = config::parse_schedule(cost.at("R"), spec.grid, "R");
  if (cost.contains("E")) spec.E = config::parse_schedule(cost.at("E"), spec.grid, "E");
  if (cost.contains("m")) spec.lin_m = config::parse_schedule(cost.at("m"), spec.grid, "m");
  if (cost.contains("F")) spec.lin_F = config::parse_schedule(cost.at("F"), spec.grid, "F");

  const auto& init = j.at("init");
  spec.theta_mean = config::parse_matrix(init.at("mean"), "init.mean").col(0);
  spec.theta_cov = config::parse_matrix(init.at("cov"), "init.cov");
  return spec;
}

inline Json to_json(const LqTeamSpec& spec, const std::string& scenario = "lq_team") {
  Json j;
  j["scenario"] = scenario;
  j["grid"] = {{"T", spec.grid.horizon()}, {"dt", spec.grid.dt()}};
  j["blocks"] = {{"state", spec.dims.state},
                 {"control", spec.dims.control},
                 {"observation", spec.dims.observation},
                 {"noise", spec.dims.noise}};
  j["dynamics"] = {{"A", config::dump_schedule(spec.A, spec.grid)},
                   {"B", config::dump_schedule(spec.B, spec.grid)},
                   {"G", config::dump_schedule(spec.G, spec.grid)}};
  Json cs = Json::array(), ds = Json::array();
  for (const auto& c : spec.C) cs.push_back(config::dump_schedule(c, spec.grid));
  for (const auto& d : spec.D) ds.push_back(config::dump_schedule(d, spec.grid));
  j["observations"] = {{"C", cs}, {"D", ds}};
  j["cost"] = {{"H", config::dump_schedule(spec.H, spec.grid)},
               {"R", config::dump_schedule(spec.R, spec.grid)},
               {"M_T", config::dump_matrix(spec.M_T)}};
  if (spec.has_E()) j["cost"]["E"] = config::dump_schedule(spec.E, spec.grid);
  if (spec.has_m()) j["cost"]["m"] = config::dump_schedule(spec.lin_m, spec.grid);
  if (spec.has_F()) j["cost"]["F"] = config::dump_schedule(spec.lin_F, spec.grid);
  j["init"] = {{"mean", config::dump_vector(spec.x0_mean)},
               {"cov", config::dump_matrix(spec.x0_cov)}};
  return j;
}

inline Json to_json(const BroadcastSpec& spec) {
  Json j;
  j["scenario"] = "broadcast";
  j["grid"] = {{"T", spec.grid.horizon()}, {"dt", spec.grid.dt()}};
  j["message_dim"] = spec.message_dim;
  j["blocks"] = {{"control", spec.control_dims}, {"observation", spec.obs_dims}};
  Json cs = Json::array(), ds = Json::array();
  for (const auto& c : spec.C) cs.push_back(config::dump_schedule(c, spec.grid));
  for (const auto& d : spec.D) ds.push_back(config::dump_schedule(d, spec.grid));
  j["observations"] = {{"C", cs}, {"D", ds}};
  j["cost"] = {{"H", config::dump_schedule(spec.H, spec.grid)},
               {"R", config::dump_schedule(spec.R, spec.grid)}};
  if (spec.has_E()) j["cost"]["E"] = config::dump_schedule(spec.E, spec.grid);
  if (spec.has_m()) j["cost"]["m"] = config::dump_schedule(spec.lin_m, spec.grid);
  if (spec.has_F()) j["cost"]["F"] = config::dump_schedule(spec.lin_F, spec.grid);
  j["init"] = {{"mean", config::dump_vector(spec.theta_mean)},
               {"cov", config::dump_matrix(spec.theta_cov)}};
  return j;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Json j;
  in >> j;
  return j;
}

}  // namespace lqteam
