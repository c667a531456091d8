#pragma once
// Extended periodic motion concept: nonlinear modes of damped systems.
//
// Damping is balanced by a negative mass-proportional term -xi M, which makes
// the autonomous motion periodic. Unknowns are (X, omega, xi); the modal
// amplitude q fixes the first-harmonic mass norm and R X1c = 0 fixes the phase.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/continuation.hpp"
#include "hbtk/hbm.hpp"

namespace hbtk {

inline double damping_factor(double xi, double omega) {
  detail::require(omega > 0.0, "damping_factor: omega must be positive");
  return xi / (2.0 * omega);
}

struct EpmcPoint {
  double q = 0.0;
  double omega = 0.0;
  double xi = 0.0;
  double zeta = 0.0;
  HarmonicSet X;  // static block carries the offsets
  double residual_norm = 0.0;
};

struct Backbone {
  std::vector<EpmcPoint> points;
  HarmonicBasis basis;
  int mode = 0;  // 1 = lowest linear mode
  Eigen::RowVectorXd phase_row;
  bool truncated = false;
  std::string message;
  int iterations = 0;
  int factorizations = 0;
};

struct EpmcEvaluation {
  Eigen::VectorXd residual;
  Eigen::MatrixXd d_u;     // w.r.t. (X, omega, xi)
  Eigen::VectorXd d_logq;  // w.r.t. log10(q)
  double cycle_mismatch = 0.0;
};

/// Residual rows: HBM rows with (C - xi M) and omega and no harmonic forcing,
/// the phase row R X1c and the amplitude row X1c' M X1c + X1s' M X1s - q^2.
inline EpmcEvaluation epmc_residual(const HbmProblem& problem, const HarmonicSet& X, double omega,
                                    double xi, double q, const Eigen::RowVectorXd& R,
                                    bool with_jacobian = true) {
  const HarmonicBasis& basis = problem.basis();
  detail::require(basis.contains(1), "EPMC requires harmonic 1 in the basis");
  detail::require(X.basis == basis, "epmc_residual: X does not conform to the problem basis");
  detail::require(R.size() == basis.num_dof(), "epmc_residual: phase row has wrong length");
  const SystemModel& m = problem.model();
  const Eigen::Index n = basis.num_dof();
  const Eigen::Index nx = basis.size();

  EpmcEvaluation ev;
  ev.residual = Eigen::VectorXd::Zero(nx + 2);
  const AftResult nl = problem.nonlinear_force(X, with_jacobian);
  ev.cycle_mismatch = nl.cycle_mismatch;
  Eigen::MatrixXd Jx;
  Eigen::VectorXd dw;
  if (with_jacobian) {
    Jx = nl.jacobian;
    dw = Eigen::VectorXd::Zero(nx);
  }
  const Eigen::MatrixXd D = m.C - xi * m.M;
  auto r = ev.residual.head(nx);
  r = nl.force;
  detail::add_linear_terms(basis, m.M, D, m.K, omega, X.coefficients, r, with_jacobian ? &Jx : nullptr,
                           with_jacobian ? &dw : nullptr);
  r.segment(basis.cos_offset(0), n) -= m.F_ext0;

  const Eigen::VectorXd MXc = m.M * X.cos(1);
  const Eigen::VectorXd MXs = m.M * X.sin(1);
  ev.residual[nx] = R.dot(X.cos(1));
  ev.residual[nx + 1] = X.cos(1).dot(MXc) + X.sin(1).dot(MXs) - q * q;

  if (!with_jacobian) return ev;
  ev.d_u = Eigen::MatrixXd::Zero(nx + 2, nx + 2);
  ev.d_u.topLeftCorner(nx, nx) = Jx;
  ev.d_u.col(nx).head(nx) = dw;
  ev.d_u.col(nx + 1).head(nx) = detail::damping_term(basis, -m.M, omega, X.coefficients);
  ev.d_u.block(nx, basis.cos_offset(1), 1, n) = R;
  ev.d_u.block(nx + 1, basis.cos_offset(1), 1, n) = 2.0 * MXc.transpose();
  ev.d_u.block(nx + 1, basis.sin_offset(1), 1, n) = 2.0 * MXs.transpose();
  ev.d_logq = Eigen::VectorXd::Zero(nx + 2);
  ev.d_logq[nx + 1] = -2.0 * q * q * std::log(10.0);
  return ev;
}

struct EpmcOptions {
  ContinuationOptions continuation = default_continuation();
  SolverOptions solver;
  /// Phase DOF; -1 selects the largest linear mode component.
  int phase_dof = -1;
  Linearization seed_state = Linearization::stuck;

  static ContinuationOptions default_continuation() {
    ContinuationOptions c;
    c.initial_step = 0.02;
    c.min_step = 1e-7;
    c.max_step = 0.1;
    c.max_points = 4000;
    c.lambda_scale = 1.0;
    return c;
  }
};

/// Largest modal amplitude at which the linear mode keeps every slider stuck.
inline double stuck_modal_amplitude(const SystemModel& model, const Eigen::VectorXd& psi) {
  double limit = std::numeric_limits<double>::infinity();
  for (const auto& s : model.slots) {
    const auto* iwan = std::get_if<IwanElement>(&s.element);
    if (!iwan) continue;
    const double local = std::abs(s.q_row.dot(psi));
    if (local > 0.0) limit = std::min(limit, iwan->breakpoints().front() / local);
  }
  return limit;
}

/// Backbone of linear mode `mode` (1-based) over q in [q_range.first, q_range.second].
///
/// Continuation runs in log10(q) from a linear seed. If the lower bound is not
/// in the all-stuck regime the seed is placed lower and points below the
/// requested range are discarded.
inline Backbone epmc_backbone(const HbmProblem& problem, int mode, std::pair<double, double> q_range,
                              const EpmcOptions& opts = {}) {
  const SystemModel& m = problem.model();
  const HarmonicBasis& basis = problem.basis();
  detail::require(basis.contains(1), "EPMC requires harmonic 1 in the basis");
  detail::require(mode >= 1 && mode <= m.num_dof(), "EPMC mode index out of range");
  detail::require(q_range.first > 0.0 && q_range.second > q_range.first, "EPMC q range must satisfy 0 < lo < hi");

  const LinearModes lm = linear_modes(m, opts.seed_state);
  const Eigen::VectorXd psi = lm.shapes.col(mode - 1);
  const double w_lin = lm.omega[mode - 1];
  int r_dof = opts.phase_dof;
  if (r_dof < 0) psi.cwiseAbs().maxCoeff(&r_dof);
  detail::require(r_dof < m.num_dof(), "EPMC phase DOF out of range");
  const Eigen::RowVectorXd R = unit_row(m.num_dof(), r_dof);

  const double q_seed = std::min(q_range.first, 0.5 * stuck_modal_amplitude(m, psi));
  HarmonicSet X0(basis);
  X0.cos(0) = problem.x_static();
  X0.sin(1) = q_seed * psi;
  const Eigen::Index nx = basis.size();
  Eigen::VectorXd u0(nx + 2);
  u0.head(nx) = X0.coefficients;
  u0[nx] = w_lin;
  u0[nx + 1] = psi.dot(m.C * psi);

  auto fn = [&](const Eigen::VectorXd& u, double logq, Eigen::VectorXd& r, Eigen::MatrixXd* Ju,
                Eigen::VectorXd* Jl) {
    const HarmonicSet X(basis, u.head(nx));
    EpmcEvaluation ev = epmc_residual(problem, X, u[nx], u[nx + 1], std::pow(10.0, logq), R, Ju || Jl);
    r = ev.residual;
    if (Ju) *Ju = ev.d_u;
    if (Jl) *Jl = ev.d_logq;
  };

  ContinuationOptions co = opts.continuation;
  co.scale_groups.assign(nx + 2, 0);
  co.scale_groups[nx] = 1;
  co.scale_groups[nx + 1] = 2;
  co.direction = 1;
  const SolutionBranch br = continue_branch(fn, u0, std::log10(q_seed),
                                            {std::log10(q_seed), std::log10(q_range.second)}, co, opts.solver);

  Backbone bb;
  bb.basis = basis;
  bb.mode = mode;
  bb.phase_row = R;
  bb.truncated = br.truncated;
  bb.message = br.message;
  bb.iterations = br.total_iterations;
  bb.factorizations = br.total_factorizations;
  const double log_lo = std::log10(q_range.first);
  for (const auto& p : br.points) {
    if (p.lambda < log_lo - 1e-12) continue;
    EpmcPoint e;
    e.q = std::pow(10.0, p.lambda);
    if (!bb.points.empty() && e.q <= bb.points.back().q) {
      bb.truncated = true;
      bb.message = "modal amplitude stopped increasing (fold in q)";
      break;
    }
    e.X = HarmonicSet(basis, p.u.head(nx));
    e.omega = p.u[nx];
    e.xi = p.u[nx + 1];
    e.zeta = damping_factor(e.xi, e.omega);
    e.residual_norm = p.residual_norm;
    bb.points.push_back(std::move(e));
  }
  return bb;
}

}  // namespace hbtk
