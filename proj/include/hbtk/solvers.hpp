#pragma once
// Root finding for square nonlinear systems.
//
// A residual function is any callable
//   void fn(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J)
// that fills r and, when J is non-null, the Jacobian dr/dx.

#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/error.hpp"

namespace hbtk {

template <class F>
concept ResidualFunction =
    std::invocable<F&, const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd*>;

struct SolverOptions {
  double abs_tol = 1e-9;
  double rel_tol = 1e-12;
  int max_iter = 30;
  bool line_search = false;
  double backtrack_factor = 0.5;
  int max_backtracks = 8;
  /// Iterations between full Jacobian factorizations; 1 is plain Newton.
  int jacobian_refresh_period = 1;

  static SolverOptions bfgs() {
    SolverOptions o;
    o.jacobian_refresh_period = 2;
    return o;
  }

  void validate() const {
    detail::require(abs_tol > 0.0 && rel_tol > 0.0, "solver tolerances must be positive");
    detail::require(max_iter >= 1, "solver max_iter must be at least 1");
    detail::require(jacobian_refresh_period >= 1, "jacobian refresh period must be at least 1");
    detail::require(backtrack_factor > 0.0 && backtrack_factor < 1.0,
                    "backtrack factor must lie in (0, 1)");
    detail::require(max_backtracks >= 0, "max_backtracks must be non-negative");
  }
};

enum class SolveStatus { converged, max_iterations, singular_jacobian, non_finite };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::singular_jacobian: return "singular_jacobian";
    case SolveStatus::non_finite: return "non_finite";
  }
  return "unknown";
}

struct SolveResult {
  Eigen::VectorXd x;  // solution, or best iterate on failure
  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;
  int factorizations = 0;
  int evaluations = 0;
  double residual_norm = std::numeric_limits<double>::infinity();
  double initial_norm = std::numeric_limits<double>::infinity();

  bool converged() const { return status == SolveStatus::converged; }
};

namespace detail {

inline bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

/// Newton iteration whose Jacobian is refreshed every `period` iterations; the
/// iterations in between apply BFGS inverse updates on top of the last
/// factorization (two-loop recursion with the factored Jacobian as H0).
template <class F>
SolveResult quasi_newton(F& fn, Eigen::VectorXd x, const SolverOptions& opts, int period) {
  opts.validate();
  SolveResult res;
  const Eigen::Index n = x.size();
  Eigen::VectorXd r(n);
  Eigen::MatrixXd J(n, n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;

  fn(x, r, &J);
  ++res.evaluations;
  bool have_jacobian = true;
  if (!all_finite(r)) {
    res.x = x;
    res.status = SolveStatus::non_finite;
    return res;
  }
  double norm = r.norm();
  res.initial_norm = norm;
  Eigen::VectorXd best_x = x;
  double best_norm = norm;
  const double tol = std::max(opts.abs_tol, 0.0);
  auto done = [&](double nr) { return nr <= tol || nr <= opts.rel_tol * res.initial_norm; };

  bool force_refresh = false;
  int since_refresh = 0;
  for (int iter = 0;; ++iter) {
    if (done(norm)) {
      res.x = x;
      res.status = SolveStatus::converged;
      res.residual_norm = norm;
      return res;
    }
    if (iter >= opts.max_iter) break;
    res.iterations = iter + 1;

    const bool refresh = force_refresh || since_refresh % period == 0;
    if (refresh) {
      if (!have_jacobian) {
        fn(x, r, &J);
        ++res.evaluations;
      }
      lu.compute(J);
      ++res.factorizations;
      if (!(lu.rcond() > std::numeric_limits<double>::epsilon())) {
        res.x = best_x;
        res.status = SolveStatus::singular_jacobian;
        res.residual_norm = best_norm;
        return res;
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      since_refresh = 0;
      force_refresh = false;
    }

    // direction = -H r
    Eigen::VectorXd q = r;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    Eigen::VectorXd dir = lu.solve(q);
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += s_hist[i] * (alpha[i] - beta);
    }
    dir = -dir;
    if (!all_finite(dir)) {
      res.x = best_x;
      res.status = SolveStatus::singular_jacobian;
      res.residual_norm = best_norm;
      return res;
    }

    ++since_refresh;
    const bool next_refresh = since_refresh % period == 0;
    double step = 1.0;
    Eigen::VectorXd x_trial = x + dir;
    Eigen::VectorXd r_trial(n);
    fn(x_trial, r_trial, next_refresh ? &J : nullptr);
    ++res.evaluations;
    have_jacobian = next_refresh;
    double trial_norm = all_finite(r_trial) ? r_trial.norm() : std::numeric_limits<double>::infinity();
    if (opts.line_search) {
      for (int b = 0; b < opts.max_backtracks && !(trial_norm < norm); ++b) {
        step *= opts.backtrack_factor;
        x_trial = x + step * dir;
        fn(x_trial, r_trial, nullptr);
        ++res.evaluations;
        have_jacobian = false;
        trial_norm = all_finite(r_trial) ? r_trial.norm() : std::numeric_limits<double>::infinity();
      }
    }
    if (!std::isfinite(trial_norm)) {
      res.x = best_x;
      res.status = SolveStatus::non_finite;
      res.residual_norm = best_norm;
      return res;
    }

    Eigen::VectorXd s = x_trial - x;
    Eigen::VectorXd y = r_trial - r;
    const double ys = y.dot(s);
    if (!next_refresh) {
      if (std::abs(ys) > 1e-14 * y.norm() * s.norm() && ys != 0.0) {
        s_hist.push_back(std::move(s));
        y_hist.push_back(std::move(y));
        rho_hist.push_back(1.0 / ys);
      } else {
        force_refresh = true;
      }
    }
    x = std::move(x_trial);
    r = r_trial;
    norm = trial_norm;
    if (norm < best_norm) {
      best_norm = norm;
      best_x = x;
    }
  }
  res.x = best_x;
  res.status = SolveStatus::max_iterations;
  res.residual_norm = best_norm;
  return res;
}

}  // namespace detail

/// Full Newton-Raphson (Jacobian factored every iteration), optional backtracking.
template <ResidualFunction F>
SolveResult newton_solve(F&& fn, Eigen::VectorXd x0, const SolverOptions& opts = {}) {
  return detail::quasi_newton(fn, std::move(x0), opts, 1);
}

/// Quasi-Newton: full Jacobian every `jacobian_refresh_period` iterations,
/// BFGS rank-two inverse updates in between.
template <ResidualFunction F>
SolveResult bfgs_solve(F&& fn, Eigen::VectorXd x0, const SolverOptions& opts = SolverOptions::bfgs()) {
  return detail::quasi_newton(fn, std::move(x0), opts, opts.jacobian_refresh_period);
}

}  // namespace hbtk
