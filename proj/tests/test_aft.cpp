#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace hbtk;
using hbtk::test::Gen;

namespace {

struct AftFixture {
  SystemModel model = build_3dof();
  HarmonicBasis basis{{0, 1, 2, 3}, 3};
  FourierTable table{basis, 1024};
};

/// Random state whose element motion is large enough to slip many sliders.
HarmonicSet generic_state(Gen& g, const HarmonicBasis& b) {
  HarmonicSet X(b);
  X.coefficients = g.vector(b.size(), 2.0);
  X.cos(1) += g.uniform(5.0, 30.0) * Eigen::Vector3d(0.3, -0.8, 1.0);
  X.sin(1) += g.uniform(-20.0, 20.0) * Eigen::Vector3d(0.5, 0.2, -0.9);
  return X;
}

}  // namespace

TEST(AftOracle, IwanMatchesLongMarch) {
  Gen g(31);
  const HarmonicBasis b({0, 1, 2, 3}, 1);
  const int nt = 1 << 14;
  const FourierTable table(b, nt);
  for (int trial = 0; trial < 5; ++trial) {
    const IwanElement e = build_iwan(0.6, 10.0, -0.5, g.uniform(0.0, 0.5), 100);
    Eigen::VectorXd local = g.vector(b.local_size(), 5.0);
    local[b.local_cos(1)] = g.uniform(10.0, 50.0);
    const double xs = g.uniform(-2.0, 2.0);
    const Eigen::VectorXd oracle = test::long_march(e, b, local, xs, nt, 20);
    const LocalAft la = local_aft(Element(e), local, table, xs, false);
    const double rel = (la.force - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff();
    EXPECT_LT(rel, 1e-6) << "trial " << trial;
  }
}

TEST(Aft, ZeroMotionGivesStuckStiffness) {
  AftFixture f;
  const HarmonicSet X(f.basis);
  const AftResult r = aft_force(f.model.slots, X, f.table);
  EXPECT_EQ(r.force.cwiseAbs().maxCoeff(), 0.0);
  const auto& s = f.model.slots[0];
  const Eigen::MatrixXd tq = 0.6 * s.t_col * s.q_row;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(f.basis.size(), f.basis.size());
  for (int l = 0; l < f.basis.local_size(); ++l) expected.block(3 * l, 3 * l, 3, 3) = tq;
  EXPECT_LT((r.jacobian - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Aft, LinearSpringIsExact) {
  Gen g(32);
  SystemModel m = test::linear_chain();
  ElementSlot s;
  s.element = LinearSpring(2.5);
  s.q_row = Eigen::RowVector3d(1.0, -1.0, 0.0);
  s.t_col = s.q_row.transpose();
  m.slots.push_back(s);
  const HarmonicBasis b({0, 1, 2, 5}, 3);
  const HarmonicSet X = g.harmonic_set(b);
  const AftResult r = aft_force(m.slots, X, 32);
  Eigen::VectorXd expected(b.size());
  for (int l = 0; l < b.local_size(); ++l)
    expected.segment(3 * l, 3) = 2.5 * s.t_col * s.q_row * X.coefficients.segment(3 * l, 3);
  EXPECT_LT((r.force - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AftProperty, JacobianMatchesFiniteDifferences) {
  AftFixture f;
  Gen g(33);
  for (int trial = 0; trial < 20; ++trial) {
    const HarmonicSet X = generic_state(g, f.basis);
    const AftResult r = aft_force(f.model.slots, X, f.table);
    auto force = [&](const Eigen::VectorXd& c) {
      return aft_force(f.model.slots, HarmonicSet(f.basis, c), f.table, {}, false).force;
    };
    const Eigen::MatrixXd fd = test::fd_jacobian(force, X.coefficients, 1e-7);
    EXPECT_LT(test::rel_diff(r.jacobian, fd), 1e-5) << "trial " << trial;
  }
}

TEST(AftProperty, OddUnderSignFlip) {
  AftFixture f;
  Gen g(34);
  for (int trial = 0; trial < 20; ++trial) {
    const HarmonicSet X = generic_state(g, f.basis);
    HarmonicSet Y = X;
    Y.coefficients = -X.coefficients;
    const AftResult a = aft_force(f.model.slots, X, f.table, {}, false);
    const AftResult b = aft_force(f.model.slots, Y, f.table, {}, false);
    EXPECT_LT((a.force + b.force).cwiseAbs().maxCoeff(), 1e-12 * a.force.cwiseAbs().maxCoeff());
  }
}

TEST(AftProperty, SettlesInOneCycle) {
  AftFixture f;
  Gen g(35);
  for (int trial = 0; trial < 20; ++trial) {
    const AftResult r = aft_force(f.model.slots, generic_state(g, f.basis), f.table, {}, false);
    EXPECT_TRUE(r.settled);
    EXPECT_LT(r.cycle_mismatch, 1e-12);
  }
}

TEST(AftProperty, LinearElementIgnoresTimeGrid) {
  Gen g(36);
  std::vector<ElementSlot> slots(1);
  slots[0].element = LinearSpring(0.6);
  slots[0].q_row = Eigen::RowVector3d(0.0, 1.0, -1.0);
  slots[0].t_col = slots[0].q_row.transpose();
  const HarmonicBasis b({0, 1, 2, 3}, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const HarmonicSet X = generic_state(g, b);
    const Eigen::VectorXd a = aft_force(slots, X, 1024, {}, false).force;
    const Eigen::VectorXd c = aft_force(slots, X, 2048, {}, false).force;
    EXPECT_LT((a - c).cwiseAbs().maxCoeff(), 1e-12 * a.cwiseAbs().maxCoeff());
  }
}

TEST(AftProperty, IwanConvergesUnderTimeGridRefinement) {
  // Slider saturation puts slope breaks in the force history, so doubling N_t
  // changes the harmonics by ~1e-7..1e-6 relative at 1024 and ~1e-8 at 2^13.
  AftFixture f;
  Gen g(37);
  for (int trial = 0; trial < 5; ++trial) {
    const HarmonicSet X = generic_state(g, f.basis);
    auto force = [&](int nt) { return aft_force(f.model.slots, X, nt, {}, false).force; };
    const Eigen::VectorXd ref = force(1 << 15);
    const double scale = ref.cwiseAbs().maxCoeff();
    const double coarse = (force(1 << 10) - force(1 << 11)).cwiseAbs().maxCoeff() / scale;
    const double fine = (force(1 << 13) - force(1 << 14)).cwiseAbs().maxCoeff() / scale;
    EXPECT_LT(coarse, 1e-5) << "trial " << trial;
    EXPECT_LT(fine, 1e-7) << "trial " << trial;
    EXPECT_LT((force(1 << 14) - ref).cwiseAbs().maxCoeff() / scale, 1e-7) << "trial " << trial;
  }
}

TEST(Aft, RejectsForeignTable) {
  AftFixture f;
  const HarmonicSet X(HarmonicBasis({0, 1}, 3));
  EXPECT_THROW(aft_force(f.model.slots, X, f.table), InvalidArgument);
}
