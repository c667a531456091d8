#pragma once
// Benchmark model builders.

#include <string>

#include <Eigen/Dense>

#include "hbtk/elements.hpp"
#include "hbtk/model.hpp"

namespace hbtk {

enum class ThreeDofVariant { SR, NoSR };

/// Three-DOF chain with one Iwan element between DOFs 2 and 3.
///
/// The target modal basis is fixed through Phi and Lambda; half of the Iwan
/// stiffness is removed from K so the half-stuck system has the target
/// frequencies. The NoSR variant swaps the second and third shapes so the
/// 3 rad/s mode has equal motion at DOFs 2 and 3 and never strains the joint.
struct ThreeDofSpec {
  ThreeDofVariant variant = ThreeDofVariant::SR;
  Eigen::Vector3d frequencies{1.0, 3.0, 7.5};
  double mass_damping = 0.01;
  double k_t = 0.6;
  double F_s = 10.0;
  double chi = -0.5;
  double beta = 0.0;
  int n_sliders = 100;
  int forced_dof = 0;
};

inline Eigen::Matrix3d three_dof_shapes(ThreeDofVariant variant) {
  const Eigen::Vector3d phi1(1.0, 2.0, 3.0);
  const Eigen::Vector3d phia(2.0, 1.0, -1.0);
  const Eigen::Vector3d phib(-2.0, 1.0, 1.0);
  Eigen::Matrix3d Phi;
  Phi.col(0) = phi1;
  Phi.col(1) = variant == ThreeDofVariant::SR ? phia : phib;
  Phi.col(2) = variant == ThreeDofVariant::SR ? phib : phia;
  return Phi;
}

inline SystemModel build_3dof(const ThreeDofSpec& spec = {}) {
  const Eigen::Matrix3d Phi = three_dof_shapes(spec.variant);
  const Eigen::Matrix3d Pinv = Phi.inverse();
  const Eigen::Vector3d lambda = spec.frequencies.array().square();

  SystemModel m;
  m.name = spec.variant == ThreeDofVariant::SR ? "3dof-sr" : "3dof-nosr";
  m.M = Pinv.transpose() * Pinv;
  const Eigen::Matrix3d K_tuned = Pinv.transpose() * lambda.asDiagonal() * Pinv;

  ElementSlot slot;
  slot.element = build_iwan(spec.k_t, spec.F_s, spec.chi, spec.beta, spec.n_sliders);
  slot.q_row = Eigen::RowVector3d(0.0, 1.0, -1.0);
  slot.t_col = slot.q_row.transpose();
  slot.label = "iwan";

  m.K = K_tuned - 0.5 * spec.k_t * slot.t_col * slot.q_row;
  // symmetrize away roundoff from the inverse products
  m.M = 0.5 * (m.M + m.M.transpose());
  m.K = 0.5 * (m.K + m.K.transpose());
  m.C = spec.mass_damping * m.M;
  m.F_ext = Eigen::Vector3d::Zero();
  m.F_ext[spec.forced_dof] = 1.0;
  m.F_ext0 = Eigen::Vector3d::Zero();
  m.slots.push_back(std::move(slot));
  m.labels = {"x1", "x2", "x3"};
  return m;
}

}  // namespace hbtk
