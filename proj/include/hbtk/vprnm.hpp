#pragma once
// Superharmonic resonance tracking.
//
// The n-th harmonic of the nonlinear force produced by the motion below
// harmonic n (the broadband excitation) drives the superharmonic resonance.
// Phase resonance is imposed by requiring the n-th harmonic response to be
// orthogonal to that excitation, optionally after projecting both onto one
// linear mode shape.

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/aft.hpp"
#include "hbtk/continuation.hpp"
#include "hbtk/hbm.hpp"
#include "hbtk/model.hpp"

namespace hbtk {

struct BroadbandForce {
  Eigen::VectorXd c;  // cosine, N
  Eigen::VectorXd s;  // sine, N
  Eigen::MatrixXd d_X;  // [d c; d s] w.r.t. X coefficients (2N x size), if requested
};

namespace detail {

inline void check_superharmonic(const HarmonicBasis& basis, int n) {
  require(n >= 2, "superharmonic index must be at least 2");
  require(basis.contains(n), "harmonic " + std::to_string(n) + " is not in the basis");
}

inline AftResult aft_subset(const HbmProblem& problem, const HarmonicSet& X, std::span<const int> subset,
                            bool with_jacobian) {
  if (subset.empty()) return problem.nonlinear_force(X, with_jacobian);
  std::vector<ElementSlot> slots;
  std::vector<double> xs;
  for (int i : subset) {
    require(i >= 0 && i < int(problem.model().slots.size()), "slot index out of range");
    slots.push_back(problem.model().slots[i]);
    xs.push_back(problem.x_static_local()[i]);
  }
  return aft_force(slots, X, problem.table(), xs, with_jacobian);
}

}  // namespace detail

/// F_broad: minus the n-th harmonic of T f_nl(Q x_{0:n-1}), where x_{0:n-1}
/// keeps only harmonics below n. `subset` restricts the slots (empty = all).
inline BroadbandForce broadband_excitation(const HbmProblem& problem, const HarmonicSet& X, int n,
                                           bool with_jacobian = false, std::span<const int> subset = {}) {
  detail::check_superharmonic(X.basis, n);
  const HarmonicSet low = filter_harmonics(X, [n](int h) { return h < n; });
  const AftResult nl = detail::aft_subset(problem, low, subset, with_jacobian);
  const HarmonicBasis& b = X.basis;
  const Eigen::Index N = b.num_dof();
  BroadbandForce out;
  out.c = -nl.force.segment(b.cos_offset(n), N);
  out.s = -nl.force.segment(b.sin_offset(n), N);
  if (with_jacobian) {
    out.d_X.resize(2 * N, b.size());
    out.d_X.topRows(N) = -nl.jacobian.middleRows(b.cos_offset(n), N);
    out.d_X.bottomRows(N) = -nl.jacobian.middleRows(b.sin_offset(n), N);
    for (int h : b.harmonics()) {
      if (h < n) continue;
      out.d_X.middleCols(b.cos_offset(h), N).setZero();
      out.d_X.middleCols(b.sin_offset(h), N).setZero();
    }
  }
  return out;
}

/// Superposition violation at harmonic k:
///   -T F_k{ f(Q x) - f(Q x_n) - f(Q x_{0:n-1}) }
/// with x_n the n-th harmonic alone. Diagnostic only.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> superposition_error_force(const HbmProblem& problem,
                                                                             const HarmonicSet& X, int n,
                                                                             int k) {
  detail::check_superharmonic(X.basis, n);
  detail::require(k >= 1 && X.basis.contains(k), "harmonic k is not in the basis");
  const HarmonicSet low = filter_harmonics(X, [n](int h) { return h < n; });
  const HarmonicSet only_n = filter_harmonics(X, [n](int h) { return h == n; });
  const Eigen::VectorXd diff = problem.nonlinear_force(X, false).force -
                               problem.nonlinear_force(only_n, false).force -
                               problem.nonlinear_force(low, false).force;
  const Eigen::Index N = X.num_dof();
  return {-diff.segment(X.basis.cos_offset(k), N), -diff.segment(X.basis.sin_offset(k), N)};
}

struct NormalizedDot {
  double value = 0.0;
  Eigen::VectorXd d_a;
  Eigen::VectorXd d_b;
  bool degenerate = false;
};

namespace detail {

inline NormalizedDot normalized_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double a_floor,
                                    double b_floor) {
  NormalizedDot out;
  const double na = a.norm(), nb = b.norm();
  if (!(na > a_floor) || !(nb > b_floor)) {
    out.degenerate = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
    out.d_a = Eigen::VectorXd::Zero(a.size());
    out.d_b = Eigen::VectorXd::Zero(b.size());
    return out;
  }
  out.value = a.dot(b) / (na * nb);
  out.d_a = b / (na * nb) - out.value * a / (na * na);
  out.d_b = a / (na * nb) - out.value * b / (nb * nb);
  return out;
}

inline Eigen::VectorXd stack(const Eigen::VectorXd& c, const Eigen::VectorXd& s) {
  Eigen::VectorXd v(c.size() + s.size());
  v << c, s;
  return v;
}

/// Modal projections used by the filtered constraint.
struct ModalPair {
  Eigen::Vector2d q;    // psi' M [X_nc X_ns]
  Eigen::Vector2d eta;  // psi' [F_nc F_ns]
};

inline ModalPair modal_pair(const HarmonicSet& X, const Eigen::VectorXd& Fc, const Eigen::VectorXd& Fs,
                            const Eigen::VectorXd& psi, const Eigen::MatrixXd& M, int n) {
  const Eigen::VectorXd Mpsi = M * psi;
  return {Eigen::Vector2d(Mpsi.dot(X.cos(n)), Mpsi.dot(X.sin(n))),
          Eigen::Vector2d(psi.dot(Fc), psi.dot(Fs))};
}

// zero-norm thresholds relative to the unprojected operands
inline double modal_floor(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2, const Eigen::VectorXd& w) {
  return 1e-12 * std::hypot(v1.norm(), v2.norm()) * w.norm();
}

}  // namespace detail

/// Normalized inner product of (F_nc, F_ns) with (X_nc, X_ns).
inline double vprnm_constraint(const HarmonicSet& X, const Eigen::VectorXd& Fc, const Eigen::VectorXd& Fs, int n) {
  detail::check_superharmonic(X.basis, n);
  const NormalizedDot d =
      detail::normalized_dot(detail::stack(Fc, Fs), detail::stack(X.cos(n), X.sin(n)), 0.0, 0.0);
  if (d.degenerate)
    throw InvalidArgument("VPRNM constraint: zero broadband force or zero harmonic-" + std::to_string(n) +
                          " response");
  return d.value;
}

/// Constraint after projection onto psi: q = psi' M [X_nc X_ns], eta = psi' [F_nc F_ns].
inline double vprnm_constraint_modal(const HarmonicSet& X, const Eigen::VectorXd& Fc, const Eigen::VectorXd& Fs,
                                     const Eigen::VectorXd& psi, const Eigen::MatrixXd& M, int n) {
  detail::check_superharmonic(X.basis, n);
  const detail::ModalPair mp = detail::modal_pair(X, Fc, Fs, psi, M, n);
  const NormalizedDot d = detail::normalized_dot(mp.eta, mp.q, detail::modal_floor(Fc, Fs, psi),
                                                 detail::modal_floor(X.cos(n), X.sin(n), M * psi));
  if (d.degenerate)
    throw InvalidArgument("modal VPRNM constraint: no modal excitation or response of the filter mode at harmonic " +
                          std::to_string(n));
  return d.value;
}

enum class VprnmFilter { basic, modal };
enum class VprnmVariable { force, amplitude };

struct VprnmOptions {
  ContinuationOptions continuation = FrcOptions::default_continuation();
  SolverOptions solver;
  VprnmFilter filter = VprnmFilter::modal;
  /// Linearization for the filter shape and for the initial guess.
  Linearization filter_state = Linearization::stuck;
  int fundamental_mode = 1;
  /// Superharmonically resonant mode (1-based); 0 picks the frequency ratio nearest n.
  int super_mode = 0;
  /// Controlled row and derivative order (amplitude continuation and reporting).
  Eigen::RowVectorXd R1;
  int k = 0;
};

struct VprnmPoint {
  HarmonicSet X;
  double omega = 0.0;
  ForcingState forcing;
  double A1 = 0.0;  // |R1 first harmonic| * Omega^k
  int n = 0;
  double constraint_value = 0.0;
  Eigen::VectorXd F_broad_c, F_broad_s;
  double residual_norm = 0.0;
};

struct VprnmBackbone {
  std::vector<VprnmPoint> points;
  int n = 0;
  VprnmVariable variable = VprnmVariable::force;
  VprnmFilter filter = VprnmFilter::modal;
  Eigen::VectorXd psi;  // filter shape (also stored for the basic filter)
  Linearization filter_state = Linearization::stuck;
  int super_mode = 0;
  Eigen::RowVectorXd R1;
  int k = 0;
  bool truncated = false;
  std::string message;
  int iterations = 0;
  int factorizations = 0;
};

/// Mode (1-based) whose linear frequency ratio to the fundamental is nearest n.
inline int select_superharmonic_mode(const SystemModel& model, int fundamental_mode, int n,
                                     Linearization state = Linearization::stuck) {
  const LinearModes lm = linear_modes(model, state);
  detail::require(fundamental_mode >= 1 && fundamental_mode <= model.num_dof(), "fundamental mode out of range");
  const double w1 = lm.omega[fundamental_mode - 1];
  int best = 0;
  double err = std::numeric_limits<double>::infinity();
  for (int j = 0; j < model.num_dof(); ++j) {
    if (j == fundamental_mode - 1) continue;
    const double e = std::abs(lm.omega[j] / w1 - n);
    if (e < err) {
      err = e;
      best = j + 1;
    }
  }
  return best;
}

namespace detail {

struct VprnmSystem {
  const HbmProblem& problem;
  int n;
  VprnmVariable variable;
  VprnmFilter filter;
  Eigen::VectorXd psi;
  Eigen::RowVectorXd R1;
  int k;

  Eigen::Index nx() const { return problem.basis().size(); }
  Eigen::Index nu() const { return nx() + (variable == VprnmVariable::force ? 1 : 3); }

  ControlSpec control(double lambda) const {
    ControlSpec c;
    if (variable == VprnmVariable::amplitude) {
      c.mode = ControlMode::AmplitudePhase;
      c.R1 = R1;
      c.A1 = lambda;
      c.k = k;
    }
    return c;
  }
  ForcingState forcing(const Eigen::VectorXd& u, double lambda) const {
    if (variable == VprnmVariable::force) return {lambda, 0.0};
    return {u[nx() + 1], u[nx() + 2]};
  }

  NormalizedDot constraint(const HarmonicSet& X, const BroadbandForce& F) const {
    if (filter == VprnmFilter::basic)
      return normalized_dot(stack(F.c, F.s), stack(X.cos(n), X.sin(n)), 0.0, 0.0);
    const Eigen::MatrixXd& M = problem.model().M;
    const ModalPair mp = modal_pair(X, F.c, F.s, psi, M, n);
    const Eigen::VectorXd Mpsi = M * psi;
    NormalizedDot dm = normalized_dot(mp.eta, mp.q, modal_floor(F.c, F.s, psi),
                                      modal_floor(X.cos(n), X.sin(n), Mpsi));
    // chain to (F stack, X_n stack)
    NormalizedDot d;
    d.value = dm.value;
    d.degenerate = dm.degenerate;
    d.d_a = stack(dm.d_a[0] * psi, dm.d_a[1] * psi);
    d.d_b = stack(dm.d_b[0] * Mpsi, dm.d_b[1] * Mpsi);
    return d;
  }

  void operator()(const Eigen::VectorXd& u, double lambda, Eigen::VectorXd& r, Eigen::MatrixXd* Ju,
                  Eigen::VectorXd* Jl) const {
    const bool jac = Ju || Jl;
    const HarmonicBasis& b = problem.basis();
    const Eigen::Index N = b.num_dof();
    const HarmonicSet X(b, u.head(nx()));
    const double omega = u[nx()];
    const ControlSpec c = control(lambda);
    const HbmEvaluation ev = hbm_residual(problem, X, omega, forcing(u, lambda), c, jac);
    const BroadbandForce F = broadband_excitation(problem, X, n, jac);
    const NormalizedDot d = constraint(X, F);
    const Eigen::Index nr = ev.residual.size();
    r.resize(nr + 1);
    r.head(nr) = ev.residual;
    r[nr] = d.value;
    if (Ju) {
      Ju->setZero(nr + 1, nu());
      Ju->topLeftCorner(nr, nx()) = ev.d_X;
      Ju->col(nx()).head(nr) = ev.d_omega;
      if (variable == VprnmVariable::amplitude) {
        Ju->col(nx() + 1).head(nr) = ev.d_fc;
        Ju->col(nx() + 2).head(nr) = ev.d_fs;
      }
      Eigen::RowVectorXd g = d.d_a.transpose() * F.d_X;
      g.segment(b.cos_offset(n), N) += d.d_b.head(N).transpose();
      g.segment(b.sin_offset(n), N) += d.d_b.tail(N).transpose();
      Ju->row(nr).head(nx()) = g;
    }
    if (Jl) {
      Jl->setZero(nr + 1);
      Jl->head(nr) = variable == VprnmVariable::force ? ev.d_fc : ev.d_A1;
    }
  }

  VprnmPoint point(const Eigen::VectorXd& u, double lambda) const {
    VprnmPoint p;
    const HarmonicBasis& b = problem.basis();
    p.X = HarmonicSet(b, u.head(nx()));
    p.omega = u[nx()];
    p.forcing = forcing(u, lambda);
    p.n = n;
    const Eigen::RowVectorXd row = R1.size() ? R1 : unit_row(b.num_dof(), 0);
    p.A1 = std::hypot(row.dot(p.X.cos(1)), row.dot(p.X.sin(1))) * std::pow(p.omega, k);
    const BroadbandForce F = broadband_excitation(problem, p.X, n, false);
    p.F_broad_c = F.c;
    p.F_broad_s = F.s;
    p.constraint_value = constraint(p.X, F).value;
    Eigen::VectorXd r;
    (*this)(u, lambda, r, nullptr, nullptr);
    p.residual_norm = r.norm();
    return p;
  }
};

}  // namespace detail

/// Superharmonic resonance backbone over `range` of the continuation variable
/// (f_mag_c for VprnmVariable::force, A1 for VprnmVariable::amplitude).
///
/// The start point is the linear first-harmonic response at Omega = omega_j / n
/// plus the linear n-th harmonic response to the broadband force it produces,
/// refined by Newton with backtracking.
inline VprnmBackbone vprnm_backbone(const HbmProblem& problem, int n, VprnmVariable variable,
                                    std::pair<double, double> range, const VprnmOptions& opts = {}) {
  const SystemModel& m = problem.model();
  const HarmonicBasis& b = problem.basis();
  detail::check_superharmonic(b, n);
  detail::require(b.contains(1), "VPRNM requires harmonic 1 in the basis");
  for (int h = 0; h < n; ++h)
    detail::require(b.contains(h), "VPRNM requires every harmonic below n in the basis");
  detail::require(variable == VprnmVariable::force || opts.R1.size() == m.num_dof(),
                  "amplitude continuation needs a control row R1");

  VprnmBackbone out;
  out.n = n;
  out.variable = variable;
  out.filter = opts.filter;
  out.filter_state = opts.filter_state;
  out.R1 = opts.R1.size() ? opts.R1 : unit_row(m.num_dof(), 0);
  out.k = opts.k;
  out.super_mode = opts.super_mode > 0 ? opts.super_mode
                                       : select_superharmonic_mode(m, opts.fundamental_mode, n, opts.filter_state);
  detail::require(out.super_mode >= 1 && out.super_mode <= m.num_dof(), "superharmonic mode out of range");
  const LinearModes lm = linear_modes(m, opts.filter_state);
  out.psi = lm.shapes.col(out.super_mode - 1);

  detail::VprnmSystem sys{problem, n, variable, opts.filter, out.psi, out.R1, opts.k};
  const double lambda0 = range.first;
  const double omega0 = lm.omega[out.super_mode - 1] / n;

  // initial guess
  ControlSpec c0 = sys.control(lambda0);
  const auto lin = linear_guess(problem, c0, omega0, {lambda0, 0.0}, opts.filter_state);
  HarmonicSet X = lin.first;
  const BroadbandForce F = broadband_excitation(problem, X, n, false);
  {
    const Eigen::MatrixXcd D = dynamic_stiffness(m, n * omega0, opts.filter_state);
    Eigen::VectorXcd Fhat(m.num_dof());
    Fhat.real() = F.c;
    Fhat.imag() = -F.s;
    const Eigen::VectorXcd Z = D.partialPivLu().solve(Fhat);
    X.cos(n) = Z.real();
    X.sin(n) = -Z.imag();
  }
  Eigen::VectorXd u0(sys.nu());
  u0.head(sys.nx()) = X.coefficients;
  u0[sys.nx()] = omega0;
  if (variable == VprnmVariable::amplitude) {
    u0[sys.nx() + 1] = lin.second.f_mag_c;
    u0[sys.nx() + 2] = lin.second.f_mag_s;
  }
  {
    const NormalizedDot d = sys.constraint(X, F);
    if (d.degenerate) {
      throw InvalidArgument(
          std::string("VPRNM start: zero ") +
          (opts.filter == VprnmFilter::modal ? "modal broadband excitation of the filter mode"
                                             : "broadband excitation or superharmonic response") +
          "; the superharmonic resonance is not excited");
    }
  }

  SolverOptions start_opts = opts.solver;
  start_opts.line_search = true;
  auto start_fn = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    sys(u, lambda0, r, J, nullptr);
  };
  const SolveResult start = newton_solve(start_fn, u0, start_opts);
  out.iterations += start.iterations;
  out.factorizations += start.factorizations;
  if (!start.converged()) {
    out.truncated = true;
    out.message = std::string("start point did not converge (") + to_string(start.status) + ")" +
                  (opts.filter == VprnmFilter::basic ? "; consider the modal filter" : "");
    return out;
  }

  ContinuationOptions co = opts.continuation;
  co.scale_groups.assign(sys.nu(), 0);
  co.scale_groups[sys.nx()] = 1;
  if (variable == VprnmVariable::amplitude) co.scale_groups[sys.nx() + 1] = co.scale_groups[sys.nx() + 2] = 2;
  co.direction = range.second >= range.first ? 1 : -1;
  const SolutionBranch br = continue_branch(sys, start.x, lambda0, range, co, opts.solver);
  out.iterations += br.total_iterations;
  out.factorizations += br.total_factorizations;
  out.truncated = br.truncated;
  out.message = br.message;
  if (br.truncated && opts.filter == VprnmFilter::basic) out.message += "; consider the modal filter";
  for (const auto& p : br.points) out.points.push_back(sys.point(p.u, p.lambda));
  return out;
}

struct ExcitationShare {
  std::complex<double> eta;  // eta_c + i eta_s
  double magnitude = 0.0;
  double phase = 0.0;  // atan2(eta_s, eta_c)
  bool empty = false;
};

/// Modal broadband excitation psi' F_broad from the selected slots only.
inline ExcitationShare excitation_decomposition(const HbmProblem& problem, const HarmonicSet& X, int n,
                                                std::span<const int> subset, const Eigen::VectorXd& psi) {
  ExcitationShare out;
  if (subset.empty()) {
    out.empty = true;
    return out;
  }
  const BroadbandForce F = broadband_excitation(problem, X, n, false, subset);
  out.eta = {psi.dot(F.c), psi.dot(F.s)};
  out.magnitude = std::abs(out.eta);
  out.phase = std::atan2(out.eta.imag(), out.eta.real());
  return out;
}

}  // namespace hbtk
