#pragma once
// Alternating frequency-time evaluation of hysteretic element forces.
//
// Each slot's local displacement series is marched through two identical
// cycles starting from the static point with zero slider force; the second
// cycle is transformed back to harmonics and distributed with T. The
// Jacobian is the exact derivative of that discrete recursion: a stuck
// slider's force is x_j - x_anchor (+/- phi), where anchor is the step at
// which it last slipped, so its derivative is Gamma_j - Gamma_anchor.

#include <algorithm>
#include <cmath>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/elements.hpp"
#include "hbtk/error.hpp"
#include "hbtk/harmonics.hpp"

namespace hbtk {

struct LocalAft {
  Eigen::VectorXd force;     // local coefficients (local_size)
  Eigen::MatrixXd jacobian;  // local_size x local_size, d force / d local displacement coeffs
  double cycle_mismatch = 0.0;
};

struct AftResult {
  Eigen::VectorXd force;     // global coefficients, T applied
  Eigen::MatrixXd jacobian;  // d force / d X (empty if not requested)
  double cycle_mismatch = 0.0;
  bool settled = true;
};

namespace detail {

inline LocalAft local_aft(const IwanElement& iwan, const Eigen::VectorXd& series,
                          const FourierTable& table, double x_static, bool with_jacobian) {
  const int nt = table.n_time();
  const int nc = table.basis().local_size();
  const auto& phi = iwan.breakpoints();
  const auto& w = iwan.weights();
  const int ns = static_cast<int>(phi.size());
  const Eigen::MatrixXd& gamma = table.synthesis();

  std::vector<double> fs(ns, 0.0);
  std::vector<int> anchor(ns, -1);
  std::vector<char> stuck(ns, 1);

  double x_prev = x_static;
  for (int j = 0; j < nt; ++j) {
    const double dx = series[j] - x_prev;
    for (int k = 0; k < ns; ++k) {
      const double s = dx + fs[k];
      if (std::abs(s) < phi[k]) {
        fs[k] = s;
        stuck[k] = 1;
      } else {
        fs[k] = std::copysign(phi[k], s);
        stuck[k] = 0;
        anchor[k] = j;
      }
    }
    x_prev = series[j];
  }
  const std::vector<double> fs_first = fs;

  double stuck_weight = 0.0;
  Eigen::VectorXd anchor_sum = Eigen::VectorXd::Zero(nc);
  for (int k = 0; k < ns; ++k) {
    if (!stuck[k]) continue;
    stuck_weight += w[k];
    if (anchor[k] >= 0) anchor_sum += w[k] * gamma.row(anchor[k]).transpose();
  }

  Eigen::VectorXd f(nt);
  Eigen::MatrixXd dfdc;
  if (with_jacobian) dfdc.resize(nt, nc);
  for (int j = 0; j < nt; ++j) {
    const double dx = series[j] - x_prev;
    double total = 0.0;
    for (int k = 0; k < ns; ++k) {
      const double s = dx + fs[k];
      if (std::abs(s) < phi[k]) {
        if (!stuck[k]) {
          stuck[k] = 1;
          if (with_jacobian) {
            stuck_weight += w[k];
            anchor_sum += w[k] * gamma.row(anchor[k]).transpose();
          }
        }
        fs[k] = s;
      } else {
        if (stuck[k]) {
          stuck[k] = 0;
          if (with_jacobian) {
            stuck_weight -= w[k];
            if (anchor[k] >= 0) anchor_sum -= w[k] * gamma.row(anchor[k]).transpose();
          }
        }
        anchor[k] = j;
        fs[k] = std::copysign(phi[k], s);
      }
      total += w[k] * fs[k];
    }
    f[j] = total;
    if (with_jacobian) dfdc.row(j) = stuck_weight * gamma.row(j) - anchor_sum.transpose();
    x_prev = series[j];
  }

  LocalAft out;
  double mismatch = 0.0;
  for (int k = 0; k < ns; ++k) mismatch = std::max(mismatch, std::abs(fs[k] - fs_first[k]));
  out.cycle_mismatch = mismatch;
  out.force = table.analysis() * f;
  if (with_jacobian) out.jacobian = table.analysis() * dfdc;
  return out;
}

inline LocalAft local_aft(const LinearSpring& spring, const Eigen::VectorXd& series,
                          const FourierTable& table, double, bool with_jacobian) {
  LocalAft out;
  out.force = table.analysis() * (spring.stiffness() * series);
  if (with_jacobian) {
    const int nc = table.basis().local_size();
    out.jacobian = spring.stiffness() * Eigen::MatrixXd::Identity(nc, nc);
  }
  return out;
}

}  // namespace detail

/// Local AFT of one element for local displacement coefficients.
inline LocalAft local_aft(const Element& element, const Eigen::VectorXd& local_coefficients,
                          const FourierTable& table, double x_static, bool with_jacobian = true) {
  const Eigen::VectorXd series = table.synthesis() * local_coefficients;
  return std::visit(
      [&](const auto& e) { return detail::local_aft(e, series, table, x_static, with_jacobian); },
      element);
}

/// Nonlinear force harmonics T F{f_nl(Q x)} and their Jacobian with respect to X.
///
/// x_static_local holds each slot's initial slider displacement (empty = zeros).
inline AftResult aft_force(std::span<const ElementSlot> slots, const HarmonicSet& X,
                           const FourierTable& table, std::span<const double> x_static_local = {},
                           bool with_jacobian = true, double settle_tolerance = 1e-9) {
  detail::require(X.basis == table.basis(), "aft_force: Fourier table built for another basis");
  detail::require(x_static_local.empty() || x_static_local.size() == slots.size(),
                  "aft_force: one static displacement per slot required");
  const int n = X.num_dof();
  const int nc = X.basis.local_size();

  AftResult out;
  out.force = Eigen::VectorXd::Zero(X.basis.size());
  if (with_jacobian) out.jacobian = Eigen::MatrixXd::Zero(X.basis.size(), X.basis.size());

  for (std::size_t s = 0; s < slots.size(); ++s) {
    const ElementSlot& slot = slots[s];
    slot.validate(n);
    const double xs = x_static_local.empty() ? 0.0 : x_static_local[s];
    const Eigen::VectorXd local = project_local(X, slot.q_row);
    const LocalAft la = local_aft(slot.element, local, table, xs, with_jacobian);

    double scale = 1.0;
    if (const auto* iwan = std::get_if<IwanElement>(&slot.element)) scale = std::max(1.0, iwan->phi_max());
    out.cycle_mismatch = std::max(out.cycle_mismatch, la.cycle_mismatch / scale);

    for (int l = 0; l < nc; ++l) out.force.segment(Eigen::Index(l) * n, n) += la.force[l] * slot.t_col;
    if (!with_jacobian) continue;
    const Eigen::MatrixXd tq = slot.t_col * slot.q_row;
    for (int l = 0; l < nc; ++l)
      for (int m = 0; m < nc; ++m) {
        const double v = la.jacobian(l, m);
        if (v != 0.0) out.jacobian.block(Eigen::Index(l) * n, Eigen::Index(m) * n, n, n) += v * tq;
      }
  }
  out.settled = out.cycle_mismatch <= settle_tolerance;
  return out;
}

inline AftResult aft_force(std::span<const ElementSlot> slots, const HarmonicSet& X, int n_time,
                           std::span<const double> x_static_local = {}, bool with_jacobian = true) {
  FourierTable table(X.basis, n_time);
  return aft_force(slots, X, table, x_static_local, with_jacobian);
}

}  // namespace hbtk
