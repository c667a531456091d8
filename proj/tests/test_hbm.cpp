#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "support.hpp"

using namespace hbtk;
using hbtk::test::Gen;

namespace {

HbmProblem linear_problem(std::vector<int> harmonics = {0, 1, 2, 3}) {
  return HbmProblem(test::linear_chain(), HarmonicBasis(std::move(harmonics), 3), 64);
}

HbmProblem iwan_problem(std::vector<int> harmonics = {0, 1, 2, 3}) {
  return HbmProblem(build_3dof(), HarmonicBasis(std::move(harmonics), 3), 1024);
}

/// Oracle: first harmonic x = Re(H(W) F f e^{iWt}) with f = f_c - i f_s.
HarmonicSet analytic_frf(const HbmProblem& p, double W, ForcingState f) {
  const Eigen::VectorXcd Z = linear_frf(p.model(), W) * std::complex<double>(f.f_mag_c, -f.f_mag_s);
  HarmonicSet X(p.basis());
  X.cos(1) = Z.real();
  X.sin(1) = -Z.imag();
  return X;
}

ControlSpec amplitude_control(ControlMode mode, double A1, int dof = 0, int k = 0) {
  ControlSpec c;
  c.mode = mode;
  c.R1 = unit_row(3, dof);
  c.A1 = A1;
  c.k = k;
  return c;
}

/// State with slipping sliders: first-harmonic joint motion of 10..40.
HarmonicSet generic_state(Gen& g, const HarmonicBasis& b) {
  HarmonicSet X(b);
  X.coefficients = g.vector(b.size(), 2.0);
  X.cos(1) += g.uniform(10.0, 40.0) * Eigen::Vector3d(0.2, -0.6, 0.7);
  X.sin(1) += g.uniform(-30.0, 30.0) * Eigen::Vector3d(0.4, 0.3, -0.8);
  return X;
}

}  // namespace

TEST(HbmResidual, LinearFrfIsExactSolution) {
  const HbmProblem p = linear_problem();
  for (double W : {0.3, 0.9, 1.7, 2.5}) {
    const ForcingState f{0.7, -0.4};
    const HbmEvaluation ev = hbm_residual(p, analytic_frf(p, W, f), W, f, {}, false);
    EXPECT_LT(ev.residual.cwiseAbs().maxCoeff(), 1e-10) << "W=" << W;
  }
}

TEST(HbmResidual, StaticLimit) {
  const HbmProblem p = linear_problem();
  HarmonicSet X(p.basis());
  X.cos(1) = p.model().K.partialPivLu().solve(p.model().F_ext) * 2.0;
  const HbmEvaluation ev = hbm_residual(p, X, 0.0, {2.0, 0.0}, {}, false);
  EXPECT_LT(ev.residual.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HbmResidual, RequiresHarmonicOneForControl) {
  const HbmProblem p(test::linear_chain(), HarmonicBasis({0, 2}, 3), 16);
  const ControlSpec c = amplitude_control(ControlMode::AmplitudeOnly, 1.0);
  EXPECT_THROW(hbm_residual(p, HarmonicSet(p.basis()), 1.0, {}, c), InvalidArgument);
  EXPECT_THROW(frc(p, c, {}, {0.5, 1.0}), InvalidArgument);
}

TEST(HbmResidualProperty, JacobiansMatchFiniteDifferences) {
  const HbmProblem p = iwan_problem();
  Gen g(51);
  const ControlMode modes[] = {ControlMode::ConstantForce, ControlMode::AmplitudeOnly, ControlMode::AmplitudePhase};
  for (int trial = 0; trial < 20; ++trial) {
    const ControlSpec c = amplitude_control(modes[trial % 3], g.uniform(5.0, 40.0), g.integer(0, 2), g.integer(0, 2));
    const HarmonicSet X = generic_state(g, p.basis());
    const double W = g.uniform(0.5, 2.0);
    const ForcingState f{g.uniform(-3.0, 3.0), g.uniform(-3.0, 3.0)};
    const HbmEvaluation ev = hbm_residual(p, X, W, f, c);

    // unknowns (X, W, f_c, f_s, A1)
    const Eigen::Index nx = p.basis().size();
    Eigen::VectorXd u(nx + 4);
    u << X.coefficients, W, f.f_mag_c, f.f_mag_s, c.A1;
    auto res = [&](const Eigen::VectorXd& v) {
      ControlSpec cc = c;
      cc.A1 = v[nx + 3];
      return hbm_residual(p, HarmonicSet(p.basis(), v.head(nx)), v[nx], {v[nx + 1], v[nx + 2]}, cc, false).residual;
    };
    const Eigen::MatrixXd fd = test::fd_jacobian(res, u, 1e-7);
    Eigen::MatrixXd J(ev.residual.size(), nx + 4);
    J << ev.d_X, ev.d_omega, ev.d_fc, ev.d_fs, ev.d_A1;
    EXPECT_LT(test::rel_diff(J, fd), 1e-5) << "trial " << trial << " mode " << to_string(c.mode);
  }
}

TEST(Frc, LinearConstantForceMatchesFrf) {
  const HbmProblem p = linear_problem();
  const ForcingState f{1.3, 0.0};
  const FrcBranch br = frc(p, {}, f, {0.4, 2.6});
  ASSERT_FALSE(br.truncated) << br.message;
  EXPECT_DOUBLE_EQ(br.points.back().omega, 2.6);
  for (const auto& pt : br.points) {
    const HarmonicSet oracle = analytic_frf(p, pt.omega, f);
    EXPECT_LT((pt.X.coefficients - oracle.coefficients).cwiseAbs().maxCoeff(),
              1e-8 * std::max(1.0, oracle.coefficients.cwiseAbs().maxCoeff()))
        << "W=" << pt.omega;
  }
}

TEST(Frc, LinearAmplitudeControlMatchesFrf) {
  const HbmProblem p = linear_problem();
  for (int k : {0, 1, 2}) {
    const ControlSpec c = amplitude_control(ControlMode::AmplitudeOnly, 0.8, 2, k);
    const FrcBranch br = frc(p, c, {}, {0.5, 2.0});
    ASSERT_FALSE(br.truncated) << br.message;
    for (const auto& pt : br.points) {
      const std::complex<double> r1hf = linear_frf(p.model(), pt.omega)[2];
      const double oracle = 0.8 / (std::pow(pt.omega, k) * std::abs(r1hf));
      EXPECT_NEAR(pt.forcing.f_mag_c, oracle, 1e-8 * oracle) << "k=" << k << " W=" << pt.omega;
      EXPECT_EQ(pt.forcing.f_mag_s, 0.0);
    }
  }
}

TEST(Frc, LinearBranchIsHomogeneousInAmplitude) {
  const HbmProblem p = linear_problem();
  const FrcBranch a = frc(p, amplitude_control(ControlMode::AmplitudePhase, 1.0), {}, {0.6, 1.4});
  const FrcBranch b = frc(p, amplitude_control(ControlMode::AmplitudePhase, 2.5), {}, {0.6, 1.4});
  ASSERT_FALSE(a.truncated || b.truncated);
  const FrcPoint& pa = a.points.back();
  const FrcPoint& pb = b.points.back();
  EXPECT_LT((pb.X.coefficients - 2.5 * pa.X.coefficients).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(pb.forcing.f_mag_c, 2.5 * pa.forcing.f_mag_c, 1e-9);
  EXPECT_NEAR(pb.forcing.f_mag_s, 2.5 * pa.forcing.f_mag_s, 1e-9);
}

TEST(Frc, DegenerateControlRowIsReported) {
  SystemModel m = test::linear_chain();
  m.K = Eigen::Vector3d(2.0, 3.0, 1.0).asDiagonal();
  m.C = 0.01 * m.M;
  m.F_ext = Eigen::Vector3d(1.0, 0.0, 0.0);
  const HbmProblem p(m, HarmonicBasis({0, 1}, 3), 16);
  try {
    frc(p, amplitude_control(ControlMode::AmplitudeOnly, 1.0, 1), {}, {0.5, 1.0});
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos) << e.what();
  }
}

TEST(Frc, AmplitudePhaseRowsHoldOnNonlinearBranch) {
  const HbmProblem p = iwan_problem();
  const ControlSpec c = amplitude_control(ControlMode::AmplitudePhase, 20.0);
  const FrcBranch br = frc(p, c, {}, {0.85, 1.15});
  ASSERT_FALSE(br.truncated) << br.message;
  const double tol = 1e-8;
  for (const auto& pt : br.points) {
    EXPECT_LT(std::abs(pt.X.cos(1)[0] - 20.0), tol * 20.0);
    EXPECT_LT(std::abs(pt.X.sin(1)[0]), tol * 20.0);
    EXPECT_LT(pt.residual_norm, 1e-7);
  }
}

TEST(Frc, NewtonAtFixedFrequencyMatchesBranch) {
  const HbmProblem p = iwan_problem();
  const ForcingState f{2.0, 0.0};
  const FrcBranch br = frc(p, {}, f, {0.5, 0.7});
  ASSERT_FALSE(br.truncated) << br.message;
  const double W = 0.7;
  const auto guess = linear_guess(p, {}, W, f);
  auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    const HbmEvaluation ev = hbm_residual(p, HarmonicSet(p.basis(), x), W, f, {}, J != nullptr);
    r = ev.residual;
    if (J) *J = ev.d_X;
  };
  SolverOptions o;
  o.abs_tol = 1e-12;
  o.line_search = true;
  const SolveResult sr = newton_solve(fn, guess.first.coefficients, o);
  ASSERT_TRUE(sr.converged());
  EXPECT_LT((sr.x - br.points.back().X.coefficients).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FrcProperty, ForceSignFlipIsHalfPeriodShift) {
  const HbmProblem p = iwan_problem();
  Gen g(52);
  for (int trial = 0; trial < 6; ++trial) {
    const double W = g.uniform(0.6, 1.4);
    const ForcingState f{g.uniform(0.5, 4.0), g.uniform(-1.0, 1.0)};
    auto solve = [&](ForcingState ff) {
      auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        const HbmEvaluation ev = hbm_residual(p, HarmonicSet(p.basis(), x), W, ff, {}, J != nullptr);
        r = ev.residual;
        if (J) *J = ev.d_X;
      };
      SolverOptions o;
      o.abs_tol = 1e-11;
      o.line_search = true;
      o.max_iter = 100;
      return newton_solve(fn, linear_guess(p, {}, W, ff, Linearization::half).first.coefficients, o);
    };
    const SolveResult a = solve(f);
    const SolveResult b = solve({-f.f_mag_c, -f.f_mag_s});
    ASSERT_TRUE(a.converged() && b.converged()) << "trial " << trial;
    const HarmonicSet Xa(p.basis(), a.x), Xb(p.basis(), b.x);
    for (int h : p.basis().harmonics()) {
      const double s = h % 2 ? -1.0 : 1.0;
      EXPECT_LT((Xb.cos(h) - s * Xa.cos(h)).cwiseAbs().maxCoeff(), 1e-8) << "h=" << h;
      if (h) {
        EXPECT_LT((Xb.sin(h) - s * Xa.sin(h)).cwiseAbs().maxCoeff(), 1e-8) << "h=" << h;
      }
    }
  }
}

TEST(FrcProperty, HarmonicsWithoutResponseDoNotChangeSolution) {
  // Without preload the Iwan force is half-wave symmetric, so even harmonics stay
  // zero and adding them leaves the odd-harmonic solution unchanged.
  const HbmProblem small = iwan_problem({0, 1, 3});
  const HbmProblem big = iwan_problem({0, 1, 2, 3, 4});
  const ControlSpec c = amplitude_control(ControlMode::AmplitudeOnly, 30.0);
  const FrcBranch a = frc(small, c, {}, {0.9, 1.1});
  const FrcBranch b = frc(big, c, {}, {0.9, 1.1});
  ASSERT_FALSE(a.truncated || b.truncated);
  const FrcPoint& pa = a.points.back();
  const FrcPoint& pb = b.points.back();
  EXPECT_LT((change_basis(pb.X, small.basis()).coefficients - pa.X.coefficients).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(pb.X.cos(2).norm() + pb.X.sin(2).norm() + pb.X.cos(4).norm() + pb.X.sin(4).norm(), 1e-8);
  EXPECT_NEAR(pb.forcing.f_mag_c, pa.forcing.f_mag_c, 1e-8);
}

TEST(Frc, StartFailureCarriesLinearGuess) {
  const HbmProblem p = iwan_problem();
  FrcOptions o;
  o.solver.max_iter = 1;
  o.amplitude_seeding = false;
  const FrcBranch br = frc(p, amplitude_control(ControlMode::AmplitudeOnly, 60.0), {}, {1.0, 1.1}, o);
  EXPECT_TRUE(br.truncated);
  EXPECT_TRUE(br.points.empty());
  EXPECT_EQ(br.initial_guess.coefficients.size(), p.basis().size());
  EXPECT_GT(br.initial_forcing.f_mag_c, 0.0);
}
