#pragma once
// Shared helpers: seeded generators and finite-difference Jacobians.
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "hbtk/hbtk.hpp"

namespace hbtk::test {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Eigen::VectorXd vector(Eigen::Index n, double scale = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(-scale, scale);
    return v;
  }

  /// Strictly increasing harmonic list drawn from [0, h_max]; always keeps 1.
  std::vector<int> harmonics(int h_max, bool with_static) {
    std::vector<int> out;
    if (with_static) out.push_back(0);
    for (int h = 1; h <= h_max; ++h)
      if (h == 1 || uniform(0.0, 1.0) < 0.6) out.push_back(h);
    return out;
  }

  HarmonicSet harmonic_set(const HarmonicBasis& b, double scale = 1.0) {
    return HarmonicSet(b, vector(b.size(), scale));
  }

 private:
  std::mt19937_64 rng_;
};

/// Central differences of r(x); column j perturbs x_j by h * max(1, |x_j|).
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& r,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd r0 = r(x);
  Eigen::MatrixXd J(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    J.col(j) = (r(xp) - r(xm)) / (2.0 * step);
  }
  return J;
}

/// max |A - B| / max(|B|_max, floor)
inline double rel_diff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double floor = 1e-12) {
  return (A - B).cwiseAbs().maxCoeff() / std::max(B.cwiseAbs().maxCoeff(), floor);
}

/// Linear 3-DOF chain used as an analytic oracle (no nonlinear elements).
inline SystemModel linear_chain() {
  SystemModel m;
  m.name = "linear-chain";
  m.M = Eigen::Vector3d(1.0, 2.0, 1.5).asDiagonal();
  m.K.resize(3, 3);
  m.K << 3.0, -1.0, 0.0, -1.0, 2.5, -1.5, 0.0, -1.5, 1.5;
  m.C = 0.02 * m.M + 0.01 * m.K;
  m.F_ext = Eigen::Vector3d(1.0, 0.0, 0.5);
  m.F_ext0 = Eigen::Vector3d::Zero();
  m.labels = {"a", "b", "c"};
  return m;
}

/// Marches the element through many cycles with its own stepper and projects the
/// last cycle onto the basis with explicit trigonometric sums.
inline Eigen::VectorXd long_march(IwanElement e, const HarmonicBasis& b, const Eigen::VectorXd& local,
                                  double x_static, int nt, int cycles) {
  auto x_at = [&](int j) {
    const double th = 2.0 * std::numbers::pi * j / nt;
    double x = 0.0;
    for (int h : b.harmonics()) {
      if (h == 0) {
        x += local[b.local_cos(0)];
        continue;
      }
      x += local[b.local_cos(h)] * std::cos(h * th) + local[b.local_sin(h)] * std::sin(h * th);
    }
    return x;
  };
  e.init_history(x_static);
  for (int c = 0; c < cycles - 1; ++c)
    for (int j = 0; j < nt; ++j) e.step(x_at(j));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(b.local_size());
  for (int j = 0; j < nt; ++j) {
    const double f = e.step(x_at(j));
    const double th = 2.0 * std::numbers::pi * j / nt;
    for (int h : b.harmonics()) {
      if (h == 0) {
        out[b.local_cos(0)] += f / nt;
        continue;
      }
      out[b.local_cos(h)] += 2.0 * f * std::cos(h * th) / nt;
      out[b.local_sin(h)] += 2.0 * f * std::sin(h * th) / nt;
    }
  }
  return out;
}

}  // namespace hbtk::test
