#pragma once
// Pseudo-arclength continuation of R(u, lambda) = 0.
//
// An augmented residual function is any callable
//   void fn(const Eigen::VectorXd& u, double lambda, Eigen::VectorXd& r,
//           Eigen::MatrixXd* dr_du, Eigen::VectorXd* dr_dlambda)
// with r.size() == u.size().

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/error.hpp"
#include "hbtk/solvers.hpp"

namespace hbtk {

template <class F>
concept AugmentedResidualFunction =
    std::invocable<F&, const Eigen::VectorXd&, double, Eigen::VectorXd&, Eigen::MatrixXd*,
                   Eigen::VectorXd*>;

struct ContinuationOptions {
  double initial_step = 0.05;
  double min_step = 1e-6;
  double max_step = 0.5;
  int target_corrector_iters = 4;
  /// Fixed scale per (u, lambda) component; empty selects automatic scaling.
  Eigen::VectorXd unknown_scaling;
  /// Group id per u component for automatic scaling (empty: one group).
  std::vector<int> scale_groups;
  double scale_floor = 1e-8;
  /// Fixed lambda scale under automatic scaling; 0 scales by |lambda|.
  double lambda_scale = 0.0;
  int direction = 1;
  int max_points = 2000;
  /// Corrections longer than this multiple of the step are rejected.
  double max_correction_ratio = 2.0;

  void validate(Eigen::Index n_u) const {
    detail::require(min_step > 0.0 && min_step <= initial_step && initial_step <= max_step,
                    "continuation steps must satisfy 0 < min <= initial <= max");
    detail::require(target_corrector_iters >= 1, "target corrector iterations must be >= 1");
    detail::require(direction == 1 || direction == -1, "continuation direction must be +1 or -1");
    detail::require(max_points >= 1, "max_points must be positive");
    detail::require(scale_floor > 0.0, "scale floor must be positive");
    detail::require(lambda_scale >= 0.0, "lambda scale must be non-negative");
    detail::require(unknown_scaling.size() == 0 || unknown_scaling.size() == n_u + 1,
                    "unknown_scaling must have one entry per unknown plus lambda");
    detail::require(unknown_scaling.size() == 0 || (unknown_scaling.array() > 0.0).all(),
                    "unknown_scaling entries must be positive");
    detail::require(scale_groups.empty() || Eigen::Index(scale_groups.size()) == n_u,
                    "scale_groups must have one entry per unknown");
  }
};

struct BranchPoint {
  Eigen::VectorXd u;
  double lambda = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  double step = 0.0;             // scaled arclength used to reach this point
  double correction_norm = 0.0;  // scaled |w - w_predicted|
  double orthogonality = 0.0;    // |t . (w - w_predicted)|
};

struct SolutionBranch {
  std::vector<BranchPoint> points;
  bool truncated = false;
  std::string message;
  int total_iterations = 0;
  int total_factorizations = 0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

namespace detail {

inline Eigen::VectorXd auto_scaling(const Eigen::VectorXd& u, double lambda,
                                    const ContinuationOptions& o) {
  const Eigen::Index n = u.size();
  Eigen::VectorXd s(n + 1);
  if (o.scale_groups.empty()) {
    s.head(n).setConstant(std::max(n > 0 ? u.cwiseAbs().maxCoeff() : 0.0, o.scale_floor));
  } else {
    std::vector<std::pair<int, double>> group_max;
    auto slot = [&](int g) -> double& {
      for (auto& p : group_max)
        if (p.first == g) return p.second;
      group_max.emplace_back(g, 0.0);
      return group_max.back().second;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      double& m = slot(o.scale_groups[i]);
      m = std::max(m, std::abs(u[i]));
    }
    for (Eigen::Index i = 0; i < n; ++i) s[i] = std::max(slot(o.scale_groups[i]), o.scale_floor);
  }
  s[n] = o.lambda_scale > 0.0 ? o.lambda_scale : std::max(std::abs(lambda), o.scale_floor);
  return s;
}

}  // namespace detail

/// Traces a solution branch from (u0, lambda0) until lambda leaves [lo, hi].
///
/// Inner products use w = z / s with z = (u, lambda). The predictor follows the
/// unit tangent of the bordered Jacobian, and the corrector solves R = 0 on the
/// hyperplane through the predicted point orthogonal to that tangent. A step
/// that would leave the range is replaced by a fixed-lambda solve at the bound.
template <AugmentedResidualFunction F>
SolutionBranch continue_branch(F&& fn, const Eigen::VectorXd& u0, double lambda0,
                               std::pair<double, double> lambda_range,
                               const ContinuationOptions& copts, const SolverOptions& sopts) {
  const Eigen::Index n = u0.size();
  copts.validate(n);
  sopts.validate();
  const double lo = std::min(lambda_range.first, lambda_range.second);
  const double hi = std::max(lambda_range.first, lambda_range.second);
  detail::require(lambda0 >= lo && lambda0 <= hi, "continuation start lies outside its range");

  SolutionBranch branch;
  Eigen::VectorXd r(n);
  Eigen::MatrixXd Ju(n, n);
  Eigen::VectorXd Jl(n);

  auto fixed_lambda_solve = [&](const Eigen::VectorXd& guess, double lambda) {
    auto sub = [&](const Eigen::VectorXd& u, Eigen::VectorXd& rr, Eigen::MatrixXd* J) {
      fn(u, lambda, rr, J, nullptr);
    };
    return detail::quasi_newton(sub, guess, sopts, sopts.jacobian_refresh_period);
  };

  {
    SolveResult start = fixed_lambda_solve(u0, lambda0);
    branch.total_iterations += start.iterations;
    branch.total_factorizations += start.factorizations;
    if (!start.converged()) {
      branch.truncated = true;
      branch.message = std::string("start point did not converge (") + to_string(start.status) +
                       ", residual " + std::to_string(start.residual_norm) + ")";
      return branch;
    }
    BranchPoint p;
    p.u = start.x;
    p.lambda = lambda0;
    p.residual_norm = start.residual_norm;
    p.iterations = start.iterations;
    branch.points.push_back(std::move(p));
  }

  const bool auto_scale = copts.unknown_scaling.size() == 0;
  auto scaling_at = [&](const BranchPoint& p) {
    return auto_scale ? detail::auto_scaling(p.u, p.lambda, copts) : Eigen::VectorXd(copts.unknown_scaling);
  };

  // bordered tangent at the last point, in scaled coordinates
  auto tangent_at = [&](const BranchPoint& p, const Eigen::VectorXd& s,
                        const Eigen::VectorXd& t_prev) -> Eigen::VectorXd {
    fn(p.u, p.lambda, r, &Ju, &Jl);
    Eigen::MatrixXd B(n + 1, n + 1);
    B.topLeftCorner(n, n) = Ju * s.head(n).asDiagonal();
    B.topRightCorner(n, 1) = Jl * s[n];
    B.bottomRows(1) = t_prev.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs[n] = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    Eigen::VectorXd t = lu.solve(rhs);
    if (!t.allFinite() || t.norm() == 0.0) return Eigen::VectorXd();
    t.normalize();
    if (t.dot(t_prev) < 0.0) t = -t;
    return t;
  };

  Eigen::VectorXd s = scaling_at(branch.points.back());
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n + 1);
  t[n] = copts.direction;
  {
    Eigen::VectorXd t0 = tangent_at(branch.points.back(), s, t);
    if (t0.size() == 0) {
      branch.truncated = true;
      branch.message = "singular bordered Jacobian at start point";
      return branch;
    }
    t = t0;
  }

  double h = copts.initial_step;
  while (Eigen::Index(branch.points.size()) < copts.max_points) {
    const BranchPoint& last = branch.points.back();
    Eigen::VectorXd w_last(n + 1);
    w_last.head(n) = last.u.cwiseQuotient(s.head(n));
    w_last[n] = last.lambda / s[n];

    const Eigen::VectorXd w_pred = w_last + h * t;
    auto aug = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd* J) {
      const Eigen::VectorXd u = w.head(n).cwiseProduct(s.head(n));
      const double lambda = w[n] * s[n];
      Eigen::VectorXd rr(n);
      g.resize(n + 1);
      if (J) {
        Eigen::MatrixXd ju(n, n);
        Eigen::VectorXd jl(n);
        fn(u, lambda, rr, &ju, &jl);
        J->resize(n + 1, n + 1);
        J->topLeftCorner(n, n) = ju * s.head(n).asDiagonal();
        J->topRightCorner(n, 1) = jl * s[n];
        J->bottomRows(1) = t.transpose();
      } else {
        fn(u, lambda, rr, nullptr, nullptr);
      }
      g.head(n) = rr;
      g[n] = t.dot(w - w_pred);
    };
    SolveResult cr = detail::quasi_newton(aug, w_pred, sopts, sopts.jacobian_refresh_period);
    branch.total_iterations += cr.iterations;
    branch.total_factorizations += cr.factorizations;
    const double corr = (cr.x - w_pred).norm();
    const bool ok = cr.converged() && corr <= copts.max_correction_ratio * h;
    if (!ok) {
      h *= 0.5;
      if (h < copts.min_step) {
        branch.truncated = true;
        branch.message = std::string("step fell below min_step (last corrector status: ") +
                         to_string(cr.status) + ")";
        return branch;
      }
      continue;
    }

    BranchPoint p;
    p.u = cr.x.head(n).cwiseProduct(s.head(n));
    p.lambda = cr.x[n] * s[n];
    p.iterations = cr.iterations;
    p.step = h;
    p.correction_norm = corr;
    p.orthogonality = std::abs(t.dot(cr.x - w_pred));

    if (p.lambda > hi || p.lambda < lo) {
      const double bound = p.lambda > hi ? hi : lo;
      const double frac = (bound - last.lambda) / (p.lambda - last.lambda);
      const Eigen::VectorXd guess = last.u + frac * (p.u - last.u);
      SolveResult end = fixed_lambda_solve(guess, bound);
      branch.total_iterations += end.iterations;
      branch.total_factorizations += end.factorizations;
      if (end.converged()) {
        BranchPoint e;
        e.u = end.x;
        e.lambda = bound;
        e.residual_norm = end.residual_norm;
        e.iterations = end.iterations;
        e.step = h * frac;
        branch.points.push_back(std::move(e));
        branch.message = "reached range bound";
      } else {
        branch.message = "left range; boundary solve did not converge";
      }
      return branch;
    }

    branch.points.push_back(std::move(p));

    const Eigen::VectorXd s_new = scaling_at(branch.points.back());
    Eigen::VectorXd t_phys = t.cwiseProduct(s);
    Eigen::VectorXd t_guess = t_phys.cwiseQuotient(s_new);
    t_guess.normalize();
    s = s_new;
    Eigen::VectorXd t_new = tangent_at(branch.points.back(), s, t_guess);
    branch.points.back().residual_norm = r.norm();
    if (t_new.size() == 0) {
      branch.truncated = true;
      branch.message = "singular bordered Jacobian";
      return branch;
    }
    t = t_new;

    const double ratio = double(copts.target_corrector_iters) / std::max(cr.iterations, 1);
    h = std::clamp(h * std::clamp(ratio, 0.5, 2.0), copts.min_step, copts.max_step);
  }
  branch.truncated = true;
  branch.message = "max_points reached";
  return branch;
}

}  // namespace hbtk
