#pragma once
// Structural model container and its linear-algebra utilities.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/elements.hpp"
#include "hbtk/error.hpp"
#include "hbtk/solvers.hpp"

namespace hbtk {

/// M x'' + C x' + K x + T f_nl(Q x) = F_ext0 + F_ext f(t)
struct SystemModel {
  Eigen::MatrixXd M, C, K;
  std::vector<ElementSlot> slots;
  Eigen::VectorXd F_ext;
  Eigen::VectorXd F_ext0;
  std::vector<std::string> labels;
  std::string name;

  int num_dof() const { return static_cast<int>(M.rows()); }

  void validate() const {
    const Eigen::Index n = M.rows();
    if (n == 0) throw InvalidArgument("model '" + name + "': empty mass matrix");
    auto square = [&](const Eigen::MatrixXd& A, const char* what) {
      if (A.rows() != n || A.cols() != n)
        throw InvalidArgument("model '" + name + "': " + what + " is not " + std::to_string(n) +
                              "x" + std::to_string(n));
    };
    square(M, "M");
    square(C, "C");
    square(K, "K");
    if (F_ext.size() != n) throw InvalidArgument("model '" + name + "': F_ext has wrong length");
    if (F_ext0.size() != n) throw InvalidArgument("model '" + name + "': F_ext0 has wrong length");
    if (!labels.empty() && Eigen::Index(labels.size()) != n)
      throw InvalidArgument("model '" + name + "': label count differs from DOF count");
    const double mscale = M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * mscale)
      throw InvalidArgument("model '" + name + "': M is not symmetric");
    const double kscale = std::max(K.cwiseAbs().maxCoeff(), 1e-300);
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * kscale)
      throw InvalidArgument("model '" + name + "': K is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
      throw InvalidArgument("model '" + name + "': M is not positive definite");
    for (const auto& s : slots) s.validate(static_cast<int>(n));
  }
};

/// Extraction row selecting one DOF.
inline Eigen::RowVectorXd unit_row(int num_dof, int dof) {
  detail::require(dof >= 0 && dof < num_dof, "DOF index out of range");
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(num_dof);
  r[dof] = 1.0;
  return r;
}

/// Stiffness state used when linearizing the nonlinear elements.
enum class Linearization { stuck, free, half };

inline const char* to_string(Linearization l) {
  switch (l) {
    case Linearization::stuck: return "stuck";
    case Linearization::free: return "free";
    case Linearization::half: return "half";
  }
  return "unknown";
}

/// K plus each element's stuck stiffness scaled by the state fraction
/// (1 stuck, 0.5 half, 0 free). Linear springs always contribute fully.
inline Eigen::MatrixXd linearized_stiffness(const SystemModel& model, Linearization state) {
  Eigen::MatrixXd K = model.K;
  const double fraction = state == Linearization::stuck ? 1.0 : state == Linearization::half ? 0.5 : 0.0;
  for (const auto& s : model.slots) {
    const double k = stuck_stiffness(s.element) * (is_friction(s.element) ? fraction : 1.0);
    K += k * s.t_col * s.q_row;
  }
  return K;
}

struct PrestressOptions {
  /// Hold friction forces at zero during the static solve; otherwise load the
  /// elements monotonically along their virgin curves.
  bool zero_friction_forces = true;
  SolverOptions solver;
};

/// Static displacement under F_ext0.
inline Eigen::VectorXd prestress_solve(const SystemModel& model, const PrestressOptions& opts = {}) {
  model.validate();
  const int n = model.num_dof();
  if (opts.zero_friction_forces) {
    Eigen::MatrixXd K = model.K;
    for (const auto& s : model.slots)
      if (!is_friction(s.element)) K += stuck_stiffness(s.element) * s.t_col * s.q_row;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
    if (!(lu.rcond() > 1e-14)) {
      if (model.F_ext0.isZero(0.0)) return Eigen::VectorXd::Zero(n);
      throw SingularMatrix("prestress: static stiffness is singular");
    }
    return lu.solve(model.F_ext0);
  }
  auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r = model.K * x - model.F_ext0;
    if (J) *J = model.K;
    for (const auto& s : model.slots) {
      const double xl = s.q_row.dot(x);
      double f = 0.0, k = 0.0;
      std::visit(
          [&](const auto& e) {
            f = e.virgin_force(xl);
            k = e.virgin_stiffness(xl);
          },
          s.element);
      r += f * s.t_col;
      if (J) *J += k * s.t_col * s.q_row;
    }
  };
  SolverOptions so = opts.solver;
  so.line_search = true;
  const Eigen::MatrixXd Ks = linearized_stiffness(model, Linearization::stuck);
  SolveResult res = newton_solve(fn, Ks.partialPivLu().solve(model.F_ext0), so);
  if (!res.converged())
    throw SolverFailure(std::string("prestress: Newton did not converge (") + to_string(res.status) + ")");
  return res.x;
}

/// Per-slot local static displacement Q x_s.
inline std::vector<double> local_static(const SystemModel& model, const Eigen::VectorXd& x_static) {
  std::vector<double> out;
  out.reserve(model.slots.size());
  for (const auto& s : model.slots) out.push_back(s.q_row.dot(x_static));
  return out;
}

/// Dynamic stiffness K_eff - Omega^2 M + i Omega C.
inline Eigen::MatrixXcd dynamic_stiffness(const SystemModel& model, double omega, Linearization state) {
  const Eigen::MatrixXd K = linearized_stiffness(model, state);
  Eigen::MatrixXcd D(K.rows(), K.cols());
  D.real() = K - omega * omega * model.M;
  D.imag() = omega * model.C;
  return D;
}

/// Complex receptance times a force shape: H(Omega) F.
inline Eigen::VectorXcd linear_response(const SystemModel& model, double omega, Linearization state,
                                        const Eigen::VectorXd& force) {
  const Eigen::MatrixXcd D = dynamic_stiffness(model, omega, state);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(D);
  if (!(lu.rcond() > 1e-13))
    throw SingularMatrix("dynamic stiffness is singular at Omega = " + std::to_string(omega));
  return lu.solve(force.cast<std::complex<double>>());
}

/// H(Omega) F_ext.
inline Eigen::VectorXcd linear_frf(const SystemModel& model, double omega,
                                   Linearization state = Linearization::stuck) {
  return linear_response(model, omega, state, model.F_ext);
}

struct LinearModes {
  Eigen::VectorXd omega;   // rad/s, ascending
  Eigen::MatrixXd shapes;  // mass-normalized columns
  Eigen::VectorXd zeta;    // psi^T C psi / (2 omega)
};

/// Undamped modes of (K_eff, M). Each shape is signed so its largest entry is positive.
inline LinearModes linear_modes(const SystemModel& model, Linearization state = Linearization::stuck) {
  const Eigen::MatrixXd K = linearized_stiffness(model, state);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, model.M);
  if (es.info() != Eigen::Success) throw SingularMatrix("modal eigensolve failed");
  LinearModes out;
  const Eigen::Index n = K.rows();
  out.omega.resize(n);
  out.zeta.resize(n);
  out.shapes = es.eigenvectors();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = es.eigenvalues()[i];
    out.omega[i] = lam > 0.0 ? std::sqrt(lam) : 0.0;
    Eigen::Index imax;
    out.shapes.col(i).cwiseAbs().maxCoeff(&imax);
    if (out.shapes(imax, i) < 0.0) out.shapes.col(i) *= -1.0;
    const Eigen::VectorXd psi = out.shapes.col(i);
    out.zeta[i] = out.omega[i] > 0.0 ? psi.dot(model.C * psi) / (2.0 * out.omega[i]) : 0.0;
  }
  return out;
}

}  // namespace hbtk
