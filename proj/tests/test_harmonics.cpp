#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace hbtk;
using hbtk::test::Gen;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(HarmonicBasis, LayoutOffsets) {
  const HarmonicBasis b({0, 1, 3}, 2);
  EXPECT_EQ(b.local_size(), 5);
  EXPECT_EQ(b.size(), 10);
  EXPECT_EQ(b.cos_offset(0), 0);
  EXPECT_EQ(b.cos_offset(1), 2);
  EXPECT_EQ(b.sin_offset(1), 4);
  EXPECT_EQ(b.cos_offset(3), 6);
  EXPECT_EQ(b.sin_offset(3), 8);
  EXPECT_EQ(b.index_of(2), -1);
  EXPECT_THROW(b.local_sin(0), InvalidArgument);
  EXPECT_THROW(b.local_cos(2), InvalidArgument);
}

TEST(HarmonicBasis, RejectsBadLists) {
  EXPECT_THROW(HarmonicBasis({1, 1}, 1), InvalidArgument);
  EXPECT_THROW(HarmonicBasis({2, 1}, 1), InvalidArgument);
  EXPECT_THROW(HarmonicBasis({-1, 1}, 1), InvalidArgument);
  EXPECT_THROW(HarmonicBasis({}, 1), InvalidArgument);
  EXPECT_THROW(HarmonicBasis({0}, 0), InvalidArgument);
}

TEST(TimeSamples, RejectsAliasingAndNonPowerOfTwo) {
  const HarmonicBasis b({0, 1, 2, 3}, 1);
  EXPECT_THROW(check_time_samples(8, b), InvalidArgument);
  EXPECT_THROW(check_time_samples(24, b), InvalidArgument);
  EXPECT_NO_THROW(check_time_samples(16, b));
  EXPECT_THROW(FourierTable(b, 12), InvalidArgument);
}

TEST(TimeSeries, ConstantTerm) {
  HarmonicSet X(HarmonicBasis({0}, 1));
  X.cos(0)[0] = 5.0;
  const Eigen::MatrixXd s = time_series_from_harmonics(X, 1.0, 16);
  EXPECT_TRUE((s.array() == 5.0).all());
}

TEST(TimeSeries, DerivativeOfCosine) {
  HarmonicSet X(HarmonicBasis({0, 1}, 1));
  X.cos(1)[0] = 1.0;
  const double W = 2.0;
  const int nt = 32;
  const Eigen::MatrixXd s = time_series_from_harmonics(X, W, nt, 1);
  for (int j = 0; j < nt; ++j) {
    const double t = 2.0 * kPi * j / (W * nt);
    EXPECT_NEAR(s(j, 0), -2.0 * std::sin(W * t), 1e-14);
  }
}

TEST(TimeSeries, AnalysisOfSimpleSeries) {
  const HarmonicBasis b({0, 1, 2, 3}, 1);
  const int nt = 64;
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(nt, 1, 3.0);
  HarmonicSet X = harmonics_from_time_series(c, b);
  EXPECT_NEAR(X.cos(0)[0], 3.0, 1e-15);
  EXPECT_LT(X.coefficients.tail(b.size() - 1).cwiseAbs().maxCoeff(), 1e-14);

  for (int j = 0; j < nt; ++j) c(j, 0) = std::cos(2.0 * kPi * j / nt);
  X = harmonics_from_time_series(c, b);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(b.size());
  expected[b.cos_offset(1)] = 1.0;
  EXPECT_LT((X.coefficients - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TimeSeries, ClippedSineMatchesQuadrature) {
  // Flat-topped sine: min(max(sin theta, -c), c). The discrete analysis is the
  // rectangle rule on the same grid, so the oracle sums the Fourier integrands
  // independently with long double accumulation and explicit trig per sample.
  const double clip = 0.6;
  const int nt = 256;
  const HarmonicBasis b({0, 1, 2, 3, 4, 5, 6, 7}, 1);
  Eigen::MatrixXd s(nt, 1);
  for (int j = 0; j < nt; ++j) s(j, 0) = std::clamp(std::sin(2.0 * kPi * j / nt), -clip, clip);
  const HarmonicSet X = harmonics_from_time_series(s, b);

  for (int h : b.harmonics()) {
    long double ac = 0.0L, as = 0.0L;
    for (int j = 0; j < nt; ++j) {
      const long double th = 2.0L * std::numbers::pi_v<long double> * j / nt;
      const long double v = std::clamp(std::sin(th), static_cast<long double>(-clip), static_cast<long double>(clip));
      ac += v * std::cos(h * th);
      as += v * std::sin(h * th);
    }
    const double scale = h == 0 ? 1.0 / nt : 2.0 / nt;
    EXPECT_NEAR(X.cos(h)[0], static_cast<double>(ac * scale), 1e-10) << "h=" << h;
    if (h > 0) {
      EXPECT_NEAR(X.sin(h)[0], static_cast<double>(as * scale), 1e-10) << "h=" << h;
    }
    if (h > 0 && h % 2 == 1) {
      EXPECT_GT(std::abs(X.sin(h)[0]), 1e-4) << "odd harmonic " << h << " should be present";
    }
    if (h % 2 == 0) {
      EXPECT_NEAR(X.amplitude(h, 0), 0.0, 1e-12);
    }
  }
}

TEST(TimeSeries, ClippedSineContinuousIntegral) {
  // With a fine grid the sine coefficient of harmonic 1 approaches the closed form
  // (2/pi) [a - sin(2a)/2] + (4c/pi) cos(a), a = asin(c), for the clipped sine.
  const double c = 0.6;
  const double a = std::asin(c);
  const double b1 = (2.0 / kPi) * (a - 0.5 * std::sin(2.0 * a)) + (4.0 * c / kPi) * std::cos(a);
  const int nt = 1 << 16;
  Eigen::MatrixXd s(nt, 1);
  for (int j = 0; j < nt; ++j) s(j, 0) = std::clamp(std::sin(2.0 * kPi * j / nt), -c, c);
  const HarmonicSet X = harmonics_from_time_series(s, HarmonicBasis({0, 1}, 1));
  EXPECT_NEAR(X.sin(1)[0], b1, 1e-7);
}

TEST(TimeSeriesProperty, RoundTripIsIdentity) {
  Gen g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const HarmonicBasis b(g.harmonics(g.integer(1, 9), g.uniform(0, 1) < 0.7), g.integer(1, 4));
    int nt = 4;
    while (nt < 4 * b.max_harmonic() + 2) nt *= 2;
    nt <<= g.integer(0, 3);
    const HarmonicSet X = g.harmonic_set(b, 3.0);
    const Eigen::MatrixXd s = time_series_from_harmonics(X, g.uniform(0.1, 5.0), nt);
    const HarmonicSet Y = harmonics_from_time_series(s, b);
    EXPECT_LT((X.coefficients - Y.coefficients).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
  }
}

TEST(TimeSeriesProperty, Parseval) {
  Gen g(12);
  for (int trial = 0; trial < 50; ++trial) {
    const HarmonicBasis b(g.harmonics(g.integer(1, 8), true), g.integer(1, 3));
    const HarmonicSet X = g.harmonic_set(b, 2.0);
    const Eigen::MatrixXd s = time_series_from_harmonics(X, 1.3, 64);
    for (int d = 0; d < b.num_dof(); ++d) {
      double expected = X.cos(0)[d] * X.cos(0)[d];
      for (int h : b.harmonics())
        if (h > 0) expected += 0.5 * (X.cos(h)[d] * X.cos(h)[d] + X.sin(h)[d] * X.sin(h)[d]);
      EXPECT_NEAR(s.col(d).squaredNorm() / s.rows(), expected, 1e-10);
    }
  }
}

TEST(TimeSeriesProperty, DerivativeSwapsCosineAndSine) {
  Gen g(13);
  for (int trial = 0; trial < 30; ++trial) {
    const HarmonicBasis b(g.harmonics(g.integer(1, 6), true), g.integer(1, 3));
    const HarmonicSet X = g.harmonic_set(b);
    const double W = g.uniform(0.2, 4.0);
    const HarmonicSet V = harmonics_from_time_series(time_series_from_harmonics(X, W, 64, 1), b);
    for (int h : b.harmonics()) {
      if (h == 0) {
        EXPECT_LT(V.cos(0).cwiseAbs().maxCoeff(), 1e-12);
        continue;
      }
      EXPECT_LT((V.cos(h) - h * W * X.sin(h)).cwiseAbs().maxCoeff(), 1e-11);
      EXPECT_LT((V.sin(h) + h * W * X.cos(h)).cwiseAbs().maxCoeff(), 1e-11);
    }
  }
}

TEST(RotatePhase, IsATimeShift) {
  Gen g(14);
  const HarmonicBasis b({0, 1, 2, 3}, 2);
  const HarmonicSet X = g.harmonic_set(b);
  const int nt = 64, shift = 5;
  const double phi = 2.0 * kPi * shift / nt;
  const Eigen::MatrixXd s = time_series_from_harmonics(X, 1.0, nt);
  const Eigen::MatrixXd r = time_series_from_harmonics(rotate_phase(X, phi), 1.0, nt);
  for (int j = 0; j < nt; ++j)
    EXPECT_LT((r.row((j + shift) % nt) - s.row(j)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RotatePhaseProperty, PreservesAmplitudes) {
  Gen g(15);
  for (int trial = 0; trial < 40; ++trial) {
    const HarmonicBasis b(g.harmonics(8, true), 3);
    const HarmonicSet X = g.harmonic_set(b, 10.0);
    const HarmonicSet Y = rotate_phase(X, g.uniform(-10, 10));
    for (int h : b.harmonics())
      for (int d = 0; d < 3; ++d) EXPECT_NEAR(X.amplitude(h, d), Y.amplitude(h, d), 1e-12 * 10.0);
  }
}

TEST(ChangeBasis, DropsAndZeroFills) {
  HarmonicSet X(HarmonicBasis({0, 1, 2}, 1));
  X.coefficients << 1, 2, 3, 4, 5;
  const HarmonicSet Y = change_basis(X, HarmonicBasis({0, 1, 3}, 1));
  EXPECT_EQ(Y.cos(0)[0], 1.0);
  EXPECT_EQ(Y.cos(1)[0], 2.0);
  EXPECT_EQ(Y.sin(1)[0], 3.0);
  EXPECT_EQ(Y.amplitude(3, 0), 0.0);
}
