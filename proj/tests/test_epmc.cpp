#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace hbtk;
using hbtk::test::Gen;

TEST(Epmc, DampingFactor) {
  EXPECT_EQ(damping_factor(0.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(damping_factor(0.02, 1.0), 0.01);
  EXPECT_THROW(damping_factor(0.1, 0.0), InvalidArgument);
}

TEST(EpmcResidual, LinearModeIsFixedPoint) {
  SystemModel m = build_3dof();
  m.slots.clear();
  const HbmProblem p(m, HarmonicBasis({0, 1, 2}, 3), 64);
  const LinearModes lm = linear_modes(m);
  for (int mode = 0; mode < 3; ++mode) {
    const double q = 7.0;
    HarmonicSet X(p.basis());
    X.sin(1) = q * lm.shapes.col(mode);
    const double xi = 2.0 * lm.zeta[mode] * lm.omega[mode];
    const EpmcEvaluation ev = epmc_residual(p, X, lm.omega[mode], xi, q, unit_row(3, 0), false);
    EXPECT_LT(ev.residual.cwiseAbs().maxCoeff(), 1e-9) << "mode " << mode + 1;
  }
}

TEST(EpmcResidual, UndampedConservativeBlocksDecouple) {
  SystemModel m = test::linear_chain();
  m.C.setZero();
  ElementSlot s;
  s.element = LinearSpring(1.5);
  s.q_row = Eigen::RowVector3d(1.0, 0.0, -1.0);
  s.t_col = s.q_row.transpose();
  m.slots.push_back(s);
  const HbmProblem p(m, HarmonicBasis({0, 1, 3}, 3), 64);
  Gen g(61);
  HarmonicSet X(p.basis());
  X.sin(1) = g.vector(3);
  X.sin(3) = g.vector(3);
  const EpmcEvaluation ev = epmc_residual(p, X, 1.1, 0.0, 1.0, unit_row(3, 0), false);
  EXPECT_LT(ev.residual.segment(p.basis().cos_offset(1), 3).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(ev.residual.segment(p.basis().cos_offset(3), 3).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EpmcResidual, RequiresHarmonicOne) {
  const HbmProblem p(build_3dof(), HarmonicBasis({0, 2}, 3), 64);
  EXPECT_THROW(epmc_residual(p, HarmonicSet(p.basis()), 1.0, 0.0, 1.0, unit_row(3, 0)), InvalidArgument);
  EXPECT_THROW(epmc_backbone(p, 1, {0.1, 1.0}), InvalidArgument);
}

TEST(EpmcResidualProperty, JacobianMatchesFiniteDifferences) {
  const HbmProblem p(build_3dof(), HarmonicBasis({0, 1, 2, 3}, 3), 1024);
  Gen g(62);
  for (int trial = 0; trial < 20; ++trial) {
    HarmonicSet X(p.basis());
    X.coefficients = g.vector(p.basis().size(), 2.0);
    X.sin(1) += g.uniform(10.0, 60.0) * Eigen::Vector3d(0.3, 0.9, -0.7);
    const double W = g.uniform(0.7, 3.5), xi = g.uniform(0.0, 0.1), logq = g.uniform(-1.0, 2.0);
    const Eigen::RowVectorXd R = unit_row(3, g.integer(0, 2));
    const EpmcEvaluation ev = epmc_residual(p, X, W, xi, std::pow(10.0, logq), R);
    const Eigen::Index nx = p.basis().size();
    Eigen::VectorXd u(nx + 3);
    u << X.coefficients, W, xi, logq;
    auto res = [&](const Eigen::VectorXd& v) {
      return epmc_residual(p, HarmonicSet(p.basis(), v.head(nx)), v[nx], v[nx + 1], std::pow(10.0, v[nx + 2]), R, false)
          .residual;
    };
    Eigen::MatrixXd J(nx + 2, nx + 3);
    J << ev.d_u, ev.d_logq;
    EXPECT_LT(test::rel_diff(J, test::fd_jacobian(res, u, 1e-7)), 1e-5) << "trial " << trial;
  }
}

TEST(EpmcBackbone, LinearModelReproducesModalDamping) {
  // Rayleigh damping keeps the modes real, so every backbone point is the linear mode.
  const SystemModel m = test::linear_chain();
  const HbmProblem p(m, HarmonicBasis({0, 1}, 3), 16);
  const LinearModes lm = linear_modes(m);
  for (int mode = 1; mode <= 3; ++mode) {
    const Backbone bb = epmc_backbone(p, mode, {0.1, 10.0});
    ASSERT_FALSE(bb.truncated) << bb.message;
    for (const auto& pt : bb.points) {
      EXPECT_NEAR(pt.omega, lm.omega[mode - 1], 1e-8);
      EXPECT_NEAR(pt.zeta, lm.zeta[mode - 1], 1e-8);
    }
  }
}

class EpmcIwan : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const SystemModel m = build_3dof();
    problem = new HbmProblem(m, HarmonicBasis({0, 1, 2}, 3), 1024);
    backbone = new Backbone(epmc_backbone(*problem, 1, {1e-2, 1e3}));
  }
  static void TearDownTestSuite() {
    delete backbone;
    delete problem;
  }
  static HbmProblem* problem;
  static Backbone* backbone;
};
HbmProblem* EpmcIwan::problem = nullptr;
Backbone* EpmcIwan::backbone = nullptr;

TEST_F(EpmcIwan, ConstraintsHoldAtEveryPoint) {
  ASSERT_FALSE(backbone->truncated) << backbone->message;
  const Eigen::MatrixXd& M = problem->model().M;
  for (const auto& pt : backbone->points) {
    const double norm = pt.X.cos(1).dot(M * pt.X.cos(1)) + pt.X.sin(1).dot(M * pt.X.sin(1));
    // both rows are solved to the default absolute tolerance
    const double tol = SolverOptions{}.abs_tol;
    EXPECT_NEAR(norm, pt.q * pt.q, tol + 1e-8 * pt.q * pt.q);
    EXPECT_LT(std::abs(backbone->phase_row.dot(pt.X.cos(1))), tol + 1e-8 * pt.q);
    EXPECT_LT(pt.residual_norm, 1e-6 * std::max(1.0, pt.q));
  }
}

TEST_F(EpmcIwan, LowAmplitudeLimitIsStuckMode) {
  const LinearModes lm = linear_modes(problem->model(), Linearization::stuck);
  const EpmcPoint& first = backbone->points.front();
  EXPECT_NEAR(first.omega, lm.omega[0], 1e-3 * lm.omega[0]);
  EXPECT_NEAR(first.zeta, lm.zeta[0], 1e-3 * lm.zeta[0]);
}

TEST_F(EpmcIwan, FundamentalBackboneIsMonotone) {
  for (std::size_t i = 1; i < backbone->points.size(); ++i) {
    EXPECT_GT(backbone->points[i].q, backbone->points[i - 1].q);
    EXPECT_LE(backbone->points[i].omega, backbone->points[i - 1].omega + 1e-12) << "point " << i;
  }
  EXPECT_NEAR(backbone->points.back().q, 1e3, 1e-9 * 1e3);
}
