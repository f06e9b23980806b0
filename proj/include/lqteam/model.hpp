#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "lqteam/grid.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/schedule.hpp"

namespace lqteam {

// Per-decision-maker block sizes. Totals are the dimensions of the stacked
// state, control, observation and state-noise vectors.
struct BlockDims {
  std::vector<int> state;        // n_i
  std::vector<int> control;      // d_i
  std::vector<int> observation;  // k_i
  std::vector<int> noise;        // m_i

  int num_dms() const { return static_cast<int>(state.size()); }
  int n() const { return std::accumulate(state.begin(), state.end(), 0); }
  int d() const { return std::accumulate(control.begin(), control.end(), 0); }
  int k() const { return std::accumulate(observation.begin(), observation.end(), 0); }
  int m() const { return std::accumulate(noise.begin(), noise.end(), 0); }

  int state_offset(int i) const { return std::accumulate(state.begin(), state.begin() + i, 0); }
  int control_offset(int i) const { return std::accumulate(control.begin(), control.begin() + i, 0); }
  int obs_offset(int i) const {
    return std::accumulate(observation.begin(), observation.begin() + i, 0);
  }
  int noise_offset(int i) const { return std::accumulate(noise.begin(), noise.begin() + i, 0); }
};

// Linear-quadratic team problem: coupled linear subsystem dynamics, per-DM
// noisy observation channels on the DM's own subsystem block, and a shared
// quadratic pay-off with optional linear terms.
//
//   dx   = A x dt + B u dt + G dW
//   dy^i = C_ii x^i dt + D_ii^{1/2} dB^i,   y^i(0) = 0
//   J    = E{ int ( x'Hx/2 + u'Ru/2 + x'F + u'Ex + u'm ) dt + x(T)'M_T x(T)/2 }
struct LqTeamSpec {
  BlockDims dims;
  TimeGrid grid;

  MatrixSchedule A;    // n x n
  MatrixSchedule B;    // n x d
  MatrixSchedule G;    // n x m
  std::vector<MatrixSchedule> C;  // per DM, k_i x n_i (own subsystem block)
  std::vector<MatrixSchedule> D;  // per DM, k_i x k_i noise intensity (SPD)

  MatrixSchedule H;    // n x n sym PSD
  MatrixSchedule R;    // d x d sym PD (blocks R_ij)
  Mat M_T;             // n x n sym PSD
  MatrixSchedule E;    // d x n, optional (empty => 0)
  VectorSchedule lin_m;  // d, optional
  VectorSchedule lin_F;  // n, optional

  Vec x0_mean;  // n
  Mat x0_cov;   // n x n sym PSD

  int num_dms() const { return dims.num_dms(); }

  // Control column block B^{(i)} (n x d_i) at node k.
  Mat control_block(int i, std::size_t k) const {
    return B.at(k).middleCols(dims.control_offset(i), dims.control[i]);
  }
  Mat control_block_eval(int i, double t) const {
    return B.eval(t).middleCols(dims.control_offset(i), dims.control[i]);
  }

  // Full-state observation row C^{[i]} = [0 ... C_ii ... 0] (k_i x n) at node k.
  Mat obs_row(int i, std::size_t k) const {
    Mat out = Mat::Zero(dims.observation[i], dims.n());
    out.middleCols(dims.state_offset(i), dims.state[i]) = C[i].at(k);
    return out;
  }

  Mat cost_R_block(int i, int j, std::size_t k) const {
    return R.at(k).block(dims.control_offset(i), dims.control_offset(j), dims.control[i],
                         dims.control[j]);
  }
  Mat cost_R_block_eval(int i, int j, double t) const {
    return R.eval(t).block(dims.control_offset(i), dims.control_offset(j), dims.control[i],
                           dims.control[j]);
  }

  // E^{[i]} block row (d_i x n); zero when E is absent.
  Mat cost_E_row(int i, std::size_t k) const {
    if (E.empty() && !E.is_constant()) return Mat::Zero(dims.control[i], dims.n());
    return E.at(k).middleRows(dims.control_offset(i), dims.control[i]);
  }
  Mat cost_E_row_eval(int i, double t) const {
    if (E.empty() && !E.is_constant()) return Mat::Zero(dims.control[i], dims.n());
    return E.eval(t).middleRows(dims.control_offset(i), dims.control[i]);
  }

  Vec cost_m_block(int i, std::size_t k) const {
    if (lin_m.empty() && !lin_m.is_constant()) return Vec::Zero(dims.control[i]);
    return lin_m.at(k).col(0).segment(dims.control_offset(i), dims.control[i]);
  }

  bool has_E() const { return E.is_constant() || !E.empty(); }
  bool has_m() const { return lin_m.is_constant() || !lin_m.empty(); }
  bool has_F() const { return lin_F.is_constant() || !lin_F.empty(); }

  Mat E_or_zero(std::size_t k) const {
    return has_E() ? E.at(k) : Mat::Zero(dims.d(), dims.n());
  }
  Vec m_or_zero(std::size_t k) const {
    return has_m() ? Vec(lin_m.at(k).col(0)) : Vec(Vec::Zero(dims.d()));
  }
  Vec F_or_zero(std::size_t k) const {
    return has_F() ? Vec(lin_F.at(k).col(0)) : Vec(Vec::Zero(dims.n()));
  }
};

// Static-parameter Gaussian broadcast channel problem (one transmitter, N
// receivers). The message theta is a Gaussian random vector; receiver i sees
//   dy^i = C_ii(t, y^i) theta dt + D_ii^{1/2} dB^i.
// Channel gain C_ii may optionally depend on the receiver's own observation
// (feedback variant), supplied as a callable with a declared Lipschitz bound.
struct BroadcastSpec {
  int message_dim = 0;            // n
  std::vector<int> obs_dims;      // k_i per receiver
  std::vector<int> control_dims;  // d_i per receiver
  TimeGrid grid;

  std::vector<MatrixSchedule> C;  // per receiver, k_i x n
  std::vector<MatrixSchedule> D;  // per receiver, k_i x k_i SPD

  // Feedback variant: when set for receiver i, the channel gain is
  // C_feedback[i](t, y^i) and C[i] is ignored in simulation/filtering.
  std::vector<std::function<Mat(double, const Vec&)>> C_feedback;
  double feedback_lipschitz_bound = 0.0;  // user-declared, not verified

  MatrixSchedule R;    // d x d sym PD
  MatrixSchedule H;    // n x n sym PSD
  MatrixSchedule E;    // d x n, optional
  VectorSchedule lin_m;  // d, optional
  VectorSchedule lin_F;  // n, optional

  Vec theta_mean;  // n
  Mat theta_cov;   // n x n sym PSD

  int num_dms() const { return static_cast<int>(obs_dims.size()); }
  int d() const { return std::accumulate(control_dims.begin(), control_dims.end(), 0); }
  int k() const { return std::accumulate(obs_dims.begin(), obs_dims.end(), 0); }
  int control_offset(int i) const {
    return std::accumulate(control_dims.begin(), control_dims.begin() + i, 0);
  }

  bool has_feedback(int i) const {
    return i < static_cast<int>(C_feedback.size()) && static_cast<bool>(C_feedback[i]);
  }
  Mat channel_gain(int i, double t, const Vec& y) const {
    return has_feedback(i) ? C_feedback[i](t, y) : C[i].eval(t);
  }

  Mat cost_R_block(int i, int j, std::size_t k) const {
    return R.at(k).block(control_offset(i), control_offset(j), control_dims[i], control_dims[j]);
  }
  Mat cost_E_row(int i, std::size_t k) const {
    if (E.empty() && !E.is_constant()) return Mat::Zero(control_dims[i], message_dim);
    return E.at(k).middleRows(control_offset(i), control_dims[i]);
  }
  Vec cost_m_block(int i, std::size_t k) const {
    if (lin_m.empty() && !lin_m.is_constant()) return Vec::Zero(control_dims[i]);
    return lin_m.at(k).col(0).segment(control_offset(i), control_dims[i]);
  }
  bool has_E() const { return E.is_constant() || !E.empty(); }
  bool has_m() const { return lin_m.is_constant() || !lin_m.empty(); }
  bool has_F() const { return lin_F.is_constant() || !lin_F.empty(); }
  Mat E_or_zero(std::size_t k) const {
    return has_E() ? E.at(k) : Mat::Zero(d(), message_dim);
  }
  Vec m_or_zero(std::size_t k) const { return has_m() ? Vec(lin_m.at(k).col(0)) : Vec(Vec::Zero(d())); }
  Vec F_or_zero(std::size_t k) const {
    return has_F() ? Vec(lin_F.at(k).col(0)) : Vec(Vec::Zero(message_dim));
  }
};

// Diagnostic validation result; never throws.
struct ValidationOutcome {
  std::vector<std::string> violations;
  bool pass() const { return violations.empty(); }
  std::string summary() const {
    if (pass()) return "pass";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) os << "; ";
      os << violations[i];
    }
    return os.str();
  }
};

namespace detail {

inline void check_schedule_dims(std::vector<std::string>& out, const MatrixSchedule& s,
                                Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (s.empty() && !s.is_constant()) {
    out.push_back(std::string(name) + " missing");
    return;
  }
  if (s.rows() != rows || s.cols() != cols) {
    std::ostringstream os;
    os << name << " has shape " << s.rows() << "x" << s.cols() << ", expected " << rows << "x"
       << cols;
    out.push_back(os.str());
  }
}

template <class Check>
inline void check_nodes(std::vector<std::string>& out, const MatrixSchedule& s,
                        const TimeGrid& grid, const char* name, Check&& check) {
  if (s.empty() && !s.is_constant()) return;
  const std::size_t last = s.is_constant() ? 0 : grid.num_steps();
  for (std::size_t k = 0; k <= last; ++k) {
    std::string why = check(s.at(k));
    if (!why.empty()) {
      std::ostringstream os;
      os << name << " " << why << " at node " << k;
      out.push_back(os.str());
      return;
    }
  }
}

inline std::string not_pd(const Mat& x) {
  if (!is_symmetric(x)) return "not symmetric";
  if (!(min_eigenvalue(x) > 0.0)) return "not positive definite";
  return {};
}

inline std::string not_psd(const Mat& x) {
  if (!is_symmetric(x)) return "not symmetric";
  if (min_eigenvalue(x) < -1e-9) return "not positive semidefinite";
  return {};
}

}  // namespace detail

inline ValidationOutcome validate_spec(const LqTeamSpec& spec) {
  ValidationOutcome out;
  auto& v = out.violations;
  const int N = spec.num_dms();
  if (N <= 0) {
    v.push_back("spec has no decision makers");
    return out;
  }
  if (spec.grid.num_steps() == 0) v.push_back("grid missing");
  const int n = spec.dims.n();
  const int d = spec.dims.d();
  const int m = spec.dims.m();

  detail::check_schedule_dims(v, spec.A, n, n, "A");
  detail::check_schedule_dims(v, spec.B, n, d, "B");
  detail::check_schedule_dims(v, spec.G, n, m, "G");
  detail::check_schedule_dims(v, spec.H, n, n, "H");
  detail::check_schedule_dims(v, spec.R, d, d, "R");
  if (static_cast<int>(spec.C.size()) != N) v.push_back("C needs one block per DM");
  if (static_cast<int>(spec.D.size()) != N) v.push_back("D needs one block per DM");
  for (int i = 0; i < N && i < static_cast<int>(spec.C.size()); ++i) {
    detail::check_schedule_dims(v, spec.C[i], spec.dims.observation[i], spec.dims.state[i],
                                ("C[" + std::to_string(i) + "]").c_str());
  }
  for (int i = 0; i < N && i < static_cast<int>(spec.D.size()); ++i) {
    const std::string name = "D[" + std::to_string(i) + "]";
    detail::check_schedule_dims(v, spec.D[i], spec.dims.observation[i], spec.dims.observation[i],
                                name.c_str());
    detail::check_nodes(v, spec.D[i], spec.grid, name.c_str(), detail::not_pd);
  }
  if (spec.M_T.rows() != n || spec.M_T.cols() != n) v.push_back("M_T dimension mismatch");
  if (spec.x0_mean.size() != n) v.push_back("initial mean dimension mismatch");
  if (spec.x0_cov.rows() != n || spec.x0_cov.cols() != n) v.push_back("P0 dimension mismatch");
  if (spec.has_E()) detail::check_schedule_dims(v, spec.E, d, n, "E");
  if (spec.has_m()) detail::check_schedule_dims(v, spec.lin_m, d, 1, "m");
  if (spec.has_F()) detail::check_schedule_dims(v, spec.lin_F, n, 1, "F");
  if (!v.empty()) return out;

  detail::check_nodes(v, spec.R, spec.grid, "R", detail::not_pd);
  detail::check_nodes(v, spec.H, spec.grid, "H", detail::not_psd);
  {
    std::string why = detail::not_psd(spec.M_T);
    if (!why.empty()) v.push_back("M_T " + why);
    why = detail::not_psd(spec.x0_cov);
    if (!why.empty()) v.push_back("P0 " + why);
  }
  return out;
}

inline ValidationOutcome validate_spec(const BroadcastSpec& spec) {
  ValidationOutcome out;
  auto& v = out.violations;
  const int N = spec.num_dms();
  if (N <= 0) {
    v.push_back("spec has no receivers");
    return out;
  }
  if (spec.grid.num_steps() == 0) v.push_back("grid missing");
  const int n = spec.message_dim;
  const int d = spec.d();
  if (static_cast<int>(spec.control_dims.size()) != N) v.push_back("control_dims per receiver");

  detail::check_schedule_dims(v, spec.R, d, d, "R");
  detail::check_schedule_dims(v, spec.H, n, n, "H");
  if (static_cast<int>(spec.C.size()) != N && spec.C_feedback.empty())
    v.push_back("C needs one block per receiver");
  for (int i = 0; i < N && i < static_cast<int>(spec.C.size()); ++i) {
    if (spec.has_feedback(i)) continue;
    detail::check_schedule_dims(v, spec.C[i], spec.obs_dims[i], n,
                                ("C[" + std::to_string(i) + "]").c_str());
  }
  if (static_cast<int>(spec.D.size()) != N) v.push_back("D needs one block per receiver");
  for (int i = 0; i < N && i < static_cast<int>(spec.D.size()); ++i) {
    const std::string name = "D[" + std::to_string(i) + "]";
    detail::check_schedule_dims(v, spec.D[i], spec.obs_dims[i], spec.obs_dims[i], name.c_str());
    detail::check_nodes(v, spec.D[i], spec.grid, name.c_str(), detail::not_pd);
  }
  if (spec.theta_mean.size() != n) v.push_back("prior mean dimension mismatch");
  if (spec.theta_cov.rows() != n || spec.theta_cov.cols() != n) v.push_back("P0 dimension mismatch");
  if (spec.has_E()) detail::check_schedule_dims(v, spec.E, d, n, "E");
  if (spec.has_m()) detail::check_schedule_dims(v, spec.lin_m, d, 1, "m");
  if (spec.has_F()) detail::check_schedule_dims(v, spec.lin_F, n, 1, "F");
  if (!v.empty()) return out;

  detail::check_nodes(v, spec.R, spec.grid, "R", detail::not_pd);
  detail::check_nodes(v, spec.H, spec.grid, "H", detail::not_psd);
  {
    std::string why = detail::not_psd(spec.theta_cov);
    if (!why.empty()) v.push_back("P0 " + why);
  }
  return out;
}

}  // namespace lqteam
