#pragma once
// Harmonic balance residuals and frequency-response continuation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/aft.hpp"
#include "hbtk/continuation.hpp"
#include "hbtk/harmonics.hpp"
#include "hbtk/model.hpp"
#include "hbtk/solvers.hpp"

namespace hbtk {

struct ForcingState {
  double f_mag_c = 0.0;
  double f_mag_s = 0.0;
  double magnitude() const { return std::hypot(f_mag_c, f_mag_s); }
};

enum class ControlMode { ConstantForce, AmplitudeOnly, AmplitudePhase };

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::ConstantForce: return "constant_force";
    case ControlMode::AmplitudeOnly: return "amplitude";
    case ControlMode::AmplitudePhase: return "amplitude_phase";
  }
  return "unknown";
}

struct ControlSpec {
  ControlMode mode = ControlMode::ConstantForce;
  Eigen::RowVectorXd R1;  // extraction row for the controlled first harmonic
  double A1 = 0.0;
  int k = 0;  // 0 displacement, 1 velocity, 2 acceleration

  /// Extra residual rows (and freed force scalars) this control adds.
  int num_rows() const {
    return mode == ControlMode::ConstantForce ? 0 : mode == ControlMode::AmplitudeOnly ? 1 : 2;
  }

  void validate(const HarmonicBasis& basis) const {
    if (mode == ControlMode::ConstantForce) return;
    detail::require(basis.contains(1), "amplitude control requires harmonic 1 in the basis");
    detail::require(R1.size() == basis.num_dof(), "control row R1 has wrong length");
    detail::require(R1.squaredNorm() > 0.0, "control row R1 is zero");
    detail::require(k >= 0 && k <= 2, "control derivative order must be 0, 1 or 2");
  }
};

/// Model plus run-wide discretization: basis, time grid and prestress state.
class HbmProblem {
 public:
  HbmProblem(SystemModel model, HarmonicBasis basis, int n_time, const PrestressOptions& prestress = {})
      : model_(std::move(model)), basis_(std::move(basis)), table_(basis_, n_time) {
    model_.validate();
    detail::require(basis_.num_dof() == model_.num_dof(), "basis DOF count differs from model");
    detail::require(basis_.has_static(), "HBM basis must include harmonic 0");
    x_static_ = prestress_solve(model_, prestress);
    x_static_local_ = local_static(model_, x_static_);
  }

  const SystemModel& model() const { return model_; }
  const HarmonicBasis& basis() const { return basis_; }
  const FourierTable& table() const { return table_; }
  int n_time() const { return table_.n_time(); }
  const Eigen::VectorXd& x_static() const { return x_static_; }
  const std::vector<double>& x_static_local() const { return x_static_local_; }

  /// Same model and prestress on another basis.
  HbmProblem with_basis(HarmonicBasis basis) const {
    HbmProblem out = *this;
    out.basis_ = std::move(basis);
    out.table_ = FourierTable(out.basis_, table_.n_time());
    return out;
  }

  AftResult nonlinear_force(const HarmonicSet& X, bool with_jacobian = true) const {
    return aft_force(model_.slots, X, table_, x_static_local_, with_jacobian);
  }

 private:
  SystemModel model_;
  HarmonicBasis basis_;
  FourierTable table_;
  Eigen::VectorXd x_static_;
  std::vector<double> x_static_local_;
};

namespace detail {

/// Adds (K - h^2 W^2 M) X and the h W D coupling to r, optionally with the
/// Jacobian blocks and d/dW.
inline void add_linear_terms(const HarmonicBasis& basis, const Eigen::MatrixXd& M,
                             const Eigen::MatrixXd& D, const Eigen::MatrixXd& K, double w,
                             const Eigen::VectorXd& X, Eigen::Ref<Eigen::VectorXd> r,
                             Eigen::MatrixXd* J, Eigen::VectorXd* d_w) {
  const Eigen::Index n = basis.num_dof();
  for (int h : basis.harmonics()) {
    const Eigen::Index c = basis.cos_offset(h);
    if (h == 0) {
      r.segment(c, n) += K * X.segment(c, n);
      if (J) J->block(c, c, n, n) += K;
      continue;
    }
    const Eigen::Index s = basis.sin_offset(h);
    const Eigen::MatrixXd A = K - double(h) * h * w * w * M;
    const Eigen::MatrixXd B = double(h) * w * D;
    const auto xc = X.segment(c, n);
    const auto xs = X.segment(s, n);
    r.segment(c, n) += A * xc + B * xs;
    r.segment(s, n) += A * xs - B * xc;
    if (J) {
      J->block(c, c, n, n) += A;
      J->block(c, s, n, n) += B;
      J->block(s, s, n, n) += A;
      J->block(s, c, n, n) -= B;
    }
    if (d_w) {
      d_w->segment(c, n) += -2.0 * h * h * w * (M * xc) + h * (D * xs);
      d_w->segment(s, n) += -2.0 * h * h * w * (M * xs) - h * (D * xc);
    }
  }
}

/// Only the damping coupling h W D of add_linear_terms (used for d/dxi in EPMC).
inline Eigen::VectorXd damping_term(const HarmonicBasis& basis, const Eigen::MatrixXd& D, double w,
                                    const Eigen::VectorXd& X) {
  const Eigen::Index n = basis.num_dof();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.size());
  for (int h : basis.harmonics()) {
    if (h == 0) continue;
    const Eigen::Index c = basis.cos_offset(h), s = basis.sin_offset(h);
    out.segment(c, n) = h * w * (D * X.segment(s, n));
    out.segment(s, n) = -h * w * (D * X.segment(c, n));
  }
  return out;
}

}  // namespace detail

struct HbmEvaluation {
  Eigen::VectorXd residual;  // HBM rows, then control rows
  Eigen::MatrixXd d_X;
  Eigen::VectorXd d_omega;
  Eigen::VectorXd d_fc;
  Eigen::VectorXd d_fs;
  Eigen::VectorXd d_A1;
  double cycle_mismatch = 0.0;
};

/// Harmonic balance rows for static, cosine and sine blocks, plus the control rows.
///
/// With amplitude control the constraint rows are
///   amplitude only:  W^(2k) [(R1 X1c)^2 + (R1 X1s)^2] - A1^2
///   amplitude+phase: W^k R1 X1c - A1  and  W^k R1 X1s
inline HbmEvaluation hbm_residual(const HbmProblem& problem, const HarmonicSet& X, double omega,
                                  const ForcingState& forcing, const ControlSpec& control,
                                  bool with_jacobian = true) {
  const HarmonicBasis& basis = problem.basis();
  detail::require(X.basis == basis, "hbm_residual: X does not conform to the problem basis");
  control.validate(basis);
  const SystemModel& m = problem.model();
  const Eigen::Index n = basis.num_dof();
  const Eigen::Index nx = basis.size();
  const int nc = control.num_rows();

  HbmEvaluation ev;
  ev.residual = Eigen::VectorXd::Zero(nx + nc);
  if (with_jacobian) {
    ev.d_X = Eigen::MatrixXd::Zero(nx + nc, nx);
    ev.d_omega = Eigen::VectorXd::Zero(nx + nc);
    ev.d_fc = Eigen::VectorXd::Zero(nx + nc);
    ev.d_fs = Eigen::VectorXd::Zero(nx + nc);
    ev.d_A1 = Eigen::VectorXd::Zero(nx + nc);
  }

  const AftResult nl = problem.nonlinear_force(X, with_jacobian);
  ev.cycle_mismatch = nl.cycle_mismatch;
  auto r = ev.residual.head(nx);
  r = nl.force;
  Eigen::MatrixXd Jx;
  Eigen::VectorXd dw;
  if (with_jacobian) {
    Jx = nl.jacobian;
    dw = Eigen::VectorXd::Zero(nx);
  }
  detail::add_linear_terms(basis, m.M, m.C, m.K, omega, X.coefficients, r,
                           with_jacobian ? &Jx : nullptr, with_jacobian ? &dw : nullptr);
  r.segment(basis.cos_offset(0), n) -= m.F_ext0;
  if (basis.contains(1)) {
    r.segment(basis.cos_offset(1), n) -= forcing.f_mag_c * m.F_ext;
    r.segment(basis.sin_offset(1), n) -= forcing.f_mag_s * m.F_ext;
    if (with_jacobian) {
      ev.d_fc.segment(basis.cos_offset(1), n) = -m.F_ext;
      ev.d_fs.segment(basis.sin_offset(1), n) = -m.F_ext;
    }
  }
  if (with_jacobian) {
    ev.d_X.topRows(nx) = Jx;
    ev.d_omega.head(nx) = dw;
  }

  if (nc == 0) return ev;
  const double p = std::pow(omega, control.k);
  const double dp = control.k == 0 ? 0.0 : control.k * std::pow(omega, control.k - 1);
  const double ac = control.R1.dot(X.cos(1));
  const double as = control.R1.dot(X.sin(1));
  if (control.mode == ControlMode::AmplitudeOnly) {
    ev.residual[nx] = p * p * (ac * ac + as * as) - control.A1 * control.A1;
    if (with_jacobian) {
      ev.d_X.block(nx, basis.cos_offset(1), 1, n) = 2.0 * p * p * ac * control.R1;
      ev.d_X.block(nx, basis.sin_offset(1), 1, n) = 2.0 * p * p * as * control.R1;
      ev.d_omega[nx] = 2.0 * p * dp * (ac * ac + as * as);
      ev.d_A1[nx] = -2.0 * control.A1;
    }
  } else {
    ev.residual[nx] = p * ac - control.A1;
    ev.residual[nx + 1] = p * as;
    if (with_jacobian) {
      ev.d_X.block(nx, basis.cos_offset(1), 1, n) = p * control.R1;
      ev.d_X.block(nx + 1, basis.sin_offset(1), 1, n) = p * control.R1;
      ev.d_omega[nx] = dp * ac;
      ev.d_omega[nx + 1] = dp * as;
      ev.d_A1[nx] = -1.0;
    }
  }
  return ev;
}

/// Harmonic set from complex first-harmonic amplitude Z (x = Re(Z e^{i W t})) on top of x_static.
inline HarmonicSet first_harmonic_guess(const HbmProblem& problem, const Eigen::VectorXcd& Z) {
  HarmonicSet X(problem.basis());
  X.cos(0) = problem.x_static();
  if (problem.basis().contains(1)) {
    X.cos(1) = Z.real();
    X.sin(1) = -Z.imag();
  }
  return X;
}

struct FrcPoint {
  HarmonicSet X;
  double omega = 0.0;
  ForcingState forcing;
  double A1 = 0.0;               // controlled amplitude (0 under constant force)
  double residual_norm = 0.0;    // full residual including control rows
  double control_residual = 0.0;  // max |control row|
  double cycle_mismatch = 0.0;
};

struct FrcBranch {
  std::vector<FrcPoint> points;
  bool truncated = false;
  std::string message;
  HarmonicSet initial_guess;
  ForcingState initial_forcing;
  int iterations = 0;
  int factorizations = 0;
};

struct FrcOptions {
  ContinuationOptions continuation = default_continuation();
  SolverOptions solver;
  Linearization guess_state = Linearization::stuck;
  /// Seed failed amplitude-controlled starts by continuing in A1 at fixed Omega.
  bool amplitude_seeding = true;

  static ContinuationOptions default_continuation() {
    ContinuationOptions c;
    c.initial_step = 0.01;
    c.min_step = 1e-7;
    c.max_step = 0.05;
    c.max_points = 4000;
    return c;
  }
};

namespace detail {

/// Unknown vector u = (X, freed force scalars); continuation parameter is Omega or A1.
struct FrcSystem {
  const HbmProblem& problem;
  ControlSpec control;
  ForcingState fixed_forcing;
  bool lambda_is_amplitude = false;
  double fixed_omega = 0.0;

  Eigen::Index nx() const { return problem.basis().size(); }
  Eigen::Index nu() const { return nx() + control.num_rows(); }

  Eigen::VectorXd pack(const HarmonicSet& X, const ForcingState& f) const {
    Eigen::VectorXd u(nu());
    u.head(nx()) = X.coefficients;
    if (control.num_rows() >= 1) u[nx()] = f.f_mag_c;
    if (control.num_rows() == 2) u[nx() + 1] = f.f_mag_s;
    return u;
  }
  HarmonicSet unpack_X(const Eigen::VectorXd& u) const {
    return HarmonicSet(problem.basis(), u.head(nx()));
  }
  ForcingState unpack_forcing(const Eigen::VectorXd& u) const {
    ForcingState f = fixed_forcing;
    if (control.num_rows() >= 1) f.f_mag_c = u[nx()];
    if (control.num_rows() == 2) f.f_mag_s = u[nx() + 1];
    else if (control.num_rows() == 1) f.f_mag_s = 0.0;
    return f;
  }
  double omega_of(double lambda) const { return lambda_is_amplitude ? fixed_omega : lambda; }

  void operator()(const Eigen::VectorXd& u, double lambda, Eigen::VectorXd& r, Eigen::MatrixXd* Ju,
                  Eigen::VectorXd* Jl) const {
    ControlSpec c = control;
    if (lambda_is_amplitude) c.A1 = lambda;
    const bool jac = Ju || Jl;
    HbmEvaluation ev = hbm_residual(problem, unpack_X(u), omega_of(lambda), unpack_forcing(u), c, jac);
    r = ev.residual;
    if (Ju) {
      Ju->resize(nu(), nu());
      Ju->leftCols(nx()) = ev.d_X;
      if (control.num_rows() >= 1) Ju->col(nx()) = ev.d_fc;
      if (control.num_rows() == 2) Ju->col(nx() + 1) = ev.d_fs;
    }
    if (Jl) *Jl = lambda_is_amplitude ? ev.d_A1 : ev.d_omega;
  }

  FrcPoint point(const Eigen::VectorXd& u, double lambda) const {
    FrcPoint p;
    p.X = unpack_X(u);
    p.omega = omega_of(lambda);
    p.forcing = unpack_forcing(u);
    ControlSpec c = control;
    if (lambda_is_amplitude) c.A1 = lambda;
    p.A1 = c.mode == ControlMode::ConstantForce ? 0.0 : c.A1;
    HbmEvaluation ev = hbm_residual(problem, p.X, p.omega, p.forcing, c, false);
    p.residual_norm = ev.residual.norm();
    p.cycle_mismatch = ev.cycle_mismatch;
    if (c.num_rows() > 0) p.control_residual = ev.residual.tail(c.num_rows()).cwiseAbs().maxCoeff();
    return p;
  }

  std::vector<int> scale_groups() const {
    std::vector<int> g(nu(), 0);
    for (Eigen::Index i = nx(); i < nu(); ++i) g[i] = 1;
    return g;
  }
};

}  // namespace detail

/// Linear initial guess at Omega satisfying the active control (stuck or chosen state).
///
/// Returns the guess and the forcing it implies. Throws if R1 sits at a node of
/// the linear response (control row degenerate).
inline std::pair<HarmonicSet, ForcingState> linear_guess(const HbmProblem& problem,
                                                         const ControlSpec& control, double omega,
                                                         const ForcingState& forcing,
                                                         Linearization state = Linearization::stuck) {
  const Eigen::VectorXcd HF = linear_frf(problem.model(), omega, state);
  if (control.mode == ControlMode::ConstantForce) {
    const std::complex<double> fhat(forcing.f_mag_c, -forcing.f_mag_s);
    return {first_harmonic_guess(problem, HF * fhat), forcing};
  }
  const std::complex<double> r1hf = (control.R1.cast<std::complex<double>>() * HF)(0, 0);
  const double p = std::pow(omega, control.k);
  if (std::abs(r1hf) <= 1e-10 * control.R1.norm() * HF.norm())
    throw InvalidArgument("control row R1 sits at a node of the linear response at Omega = " +
                          std::to_string(omega));
  ForcingState f;
  if (control.mode == ControlMode::AmplitudePhase) {
    const std::complex<double> fhat = control.A1 / (p * r1hf);
    f.f_mag_c = fhat.real();
    f.f_mag_s = -fhat.imag();
    return {first_harmonic_guess(problem, HF * fhat), f};
  }
  f.f_mag_c = control.A1 / (p * std::abs(r1hf));
  return {first_harmonic_guess(problem, HF * f.f_mag_c), f};
}

namespace detail {

inline FrcBranch collect(const FrcSystem& sys, const SolutionBranch& br) {
  FrcBranch out;
  out.truncated = br.truncated;
  out.message = br.message;
  out.iterations = br.total_iterations;
  out.factorizations = br.total_factorizations;
  out.points.reserve(br.points.size());
  for (const auto& bp : br.points) out.points.push_back(sys.point(bp.u, bp.lambda));
  return out;
}

/// Largest amplitude at which the linear guess keeps every friction slider stuck.
inline double stuck_amplitude_limit(const HbmProblem& problem, const ControlSpec& control, double omega) {
  const SystemModel& m = problem.model();
  const Eigen::VectorXcd HF = linear_frf(m, omega, Linearization::stuck);
  const double r1 = std::abs((control.R1.cast<std::complex<double>>() * HF)(0, 0)) * std::pow(omega, control.k);
  double limit = std::numeric_limits<double>::infinity();
  for (const auto& s : m.slots) {
    const auto* iwan = std::get_if<IwanElement>(&s.element);
    if (!iwan) continue;
    const double local = std::abs((s.q_row.cast<std::complex<double>>() * HF)(0, 0));
    if (local > 0.0) limit = std::min(limit, iwan->breakpoints().front() * r1 / local);
  }
  return limit;
}

}  // namespace detail

/// Continuation in A1 at fixed Omega between a_range.first and a_range.second.
inline FrcBranch amplitude_init_branch(const HbmProblem& problem, ControlSpec control, double omega,
                                       std::pair<double, double> a_range, const FrcOptions& opts = {},
                                       std::optional<std::pair<HarmonicSet, ForcingState>> start = {}) {
  detail::require(control.mode != ControlMode::ConstantForce,
                  "amplitude_init_branch needs an amplitude control mode");
  control.A1 = a_range.first;
  control.validate(problem.basis());
  detail::FrcSystem sys{problem, control, ForcingState{}, true, omega};
  auto guess = start ? *start : linear_guess(problem, control, omega, ForcingState{}, opts.guess_state);
  ContinuationOptions co = opts.continuation;
  co.scale_groups = sys.scale_groups();
  co.direction = a_range.second >= a_range.first ? 1 : -1;
  co.lambda_scale = std::max(std::abs(a_range.first), std::abs(a_range.second));
  co.max_step = std::max(co.max_step, 0.2);
  SolverOptions so = opts.solver;
  so.line_search = true;
  const SolutionBranch br =
      continue_branch(sys, sys.pack(guess.first, guess.second), a_range.first, a_range, co, so);
  FrcBranch out = detail::collect(sys, br);
  out.initial_guess = guess.first;
  out.initial_forcing = guess.second;
  return out;
}

/// Frequency response branch from omega_range.first towards omega_range.second.
///
/// ConstantForce uses `forcing`; amplitude modes free f_mag_c (and f_mag_s)
/// and hold control.A1. The start point comes from the linear response; for
/// amplitude control a failed start is re-seeded by continuing in A1 at the
/// start frequency from a level where every slider sticks.
inline FrcBranch frc(const HbmProblem& problem, const ControlSpec& control, const ForcingState& forcing,
                     std::pair<double, double> omega_range, const FrcOptions& opts = {}) {
  control.validate(problem.basis());
  detail::require(omega_range.first > 0.0 && omega_range.second > 0.0, "frc: frequencies must be positive");
  const double w0 = omega_range.first;
  detail::FrcSystem sys{problem, control, forcing, false, 0.0};
  const auto guess = linear_guess(problem, control, w0, forcing, opts.guess_state);

  ContinuationOptions co = opts.continuation;
  co.scale_groups = sys.scale_groups();
  co.direction = omega_range.second >= omega_range.first ? 1 : -1;
  SolverOptions start_opts = opts.solver;
  start_opts.line_search = true;

  Eigen::VectorXd u0 = sys.pack(guess.first, guess.second);
  auto start_fn = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    sys(u, w0, r, J, nullptr);
  };
  SolveResult start = newton_solve(start_fn, u0, start_opts);
  FrcBranch seeded;
  if (!start.converged() && control.mode != ControlMode::ConstantForce && opts.amplitude_seeding) {
    const double a_low = std::min(control.A1, 0.5 * detail::stuck_amplitude_limit(problem, control, w0));
    ControlSpec low = control;
    low.A1 = a_low;
    FrcBranch init = amplitude_init_branch(problem, control, w0, {a_low, control.A1}, opts,
                                           linear_guess(problem, low, w0, forcing, opts.guess_state));
    if (!init.points.empty() && std::abs(init.points.back().A1 - control.A1) <= 1e-12 * std::abs(control.A1)) {
      start = newton_solve(start_fn, sys.pack(init.points.back().X, init.points.back().forcing), start_opts);
    }
    seeded = std::move(init);
  }
  if (!start.converged()) {
    FrcBranch out;
    out.truncated = true;
    out.message = std::string("start point at Omega = ") + std::to_string(w0) +
                  " did not converge (" + to_string(start.status) + ")" +
                  (seeded.message.empty() ? "" : "; amplitude seeding: " + seeded.message);
    out.initial_guess = guess.first;
    out.initial_forcing = guess.second;
    return out;
  }
  const SolutionBranch br = continue_branch(sys, start.x, w0, omega_range, co, opts.solver);
  FrcBranch out = detail::collect(sys, br);
  out.iterations += start.iterations + seeded.iterations;
  out.factorizations += start.factorizations + seeded.factorizations;
  out.initial_guess = guess.first;
  out.initial_forcing = guess.second;
  return out;
}

}  // namespace hbtk
