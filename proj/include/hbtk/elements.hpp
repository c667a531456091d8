#pragma once
// Hysteretic force elements acting on one local displacement.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/error.hpp"

namespace hbtk {

/// Memory of a slider array: previous local displacement and per-slider force.
///
/// Slider "forces" carry displacement units (they are clipped to the slip
/// displacement phi_k); the element weights turn them into Newtons.
struct SliderHistory {
  double x_prev = 0.0;
  std::vector<double> slider_force;
};

/// Four-parameter Iwan element discretized into parallel Jenkins sliders.
///
/// The slip-displacement density is
///   rho(phi) = F_s (chi+1) / (phi_max^(chi+2) c) phi^chi + F_s beta / (phi_max c) delta(phi - phi_max)
/// with c = beta + (chi+1)/(chi+2) and phi_max = F_s (1+beta) / (k_t c).
/// The continuum part is split into n uniform intervals of (0, phi_max]; each
/// slider sits at the interval midpoint and carries the exact integral of rho
/// over its interval. The Dirac part becomes one extra slider at phi_max.
class IwanElement {
 public:
  IwanElement() = default;

  IwanElement(double k_t, double F_s, double chi, double beta, int n_sliders)
      : k_t_(k_t), F_s_(F_s), chi_(chi), beta_(beta), n_sliders_(n_sliders) {
    detail::require(k_t > 0.0, "Iwan: k_t must be positive");
    detail::require(F_s > 0.0, "Iwan: F_s must be positive");
    detail::require(chi > -1.0, "Iwan: chi must exceed -1 (non-integrable slider distribution)");
    detail::require(beta >= 0.0, "Iwan: beta must be non-negative");
    detail::require(n_sliders >= 1, "Iwan: need at least one slider");

    const double c = beta + (chi + 1.0) / (chi + 2.0);
    phi_max_ = F_s * (1.0 + beta) / (k_t * c);
    // integral of the continuum density from 0 to phi: A phi^(chi+1)
    const double A = F_s / (std::pow(phi_max_, chi + 2.0) * c);
    const double width = phi_max_ / n_sliders;
    breakpoints_.reserve(n_sliders + 1);
    weights_.reserve(n_sliders + 1);
    for (int k = 0; k < n_sliders; ++k) {
      const double lo = k * width;
      const double hi = (k + 1) * width;
      breakpoints_.push_back(0.5 * (lo + hi));
      weights_.push_back(A * (std::pow(hi, chi + 1.0) - std::pow(lo, chi + 1.0)));
    }
    if (beta > 0.0) {
      breakpoints_.push_back(phi_max_);
      weights_.push_back(F_s * beta / (phi_max_ * c));
    }
  }

  double k_t() const { return k_t_; }
  double F_s() const { return F_s_; }
  double chi() const { return chi_; }
  double beta() const { return beta_; }
  int n_sliders() const { return n_sliders_; }
  double phi_max() const { return phi_max_; }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Tangent stiffness with every slider stuck (sum of weights; equals k_t).
  double stuck_stiffness() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }
  /// Force once every slider slips in the positive direction.
  double saturation_force() const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) s += weights_[k] * breakpoints_[k];
    return s;
  }
  /// Force on a virgin (zero-history) element loaded monotonically to x.
  double virgin_force(double x) const {
    double f = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k)
      f += weights_[k] * std::clamp(x, -breakpoints_[k], breakpoints_[k]);
    return f;
  }
  double virgin_stiffness(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k)
      if (std::abs(x) < breakpoints_[k]) s += weights_[k];
    return s;
  }

  const std::optional<SliderHistory>& history() const { return history_; }

  /// All sliders at x_static with zero force.
  void init_history(double x_static) {
    history_ = SliderHistory{x_static, std::vector<double>(weights_.size(), 0.0)};
  }

  /// Advances every slider to displacement x and returns the total force.
  double step(double x) {
    if (!history_) throw InvalidArgument("Iwan: history not initialized");
    double f = 0.0;
    auto& fs = history_->slider_force;
    const double dx = x - history_->x_prev;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      const double stuck = dx + fs[k];
      const double phi = breakpoints_[k];
      fs[k] = (std::abs(stuck) < phi) ? stuck : std::copysign(phi, stuck);
      f += weights_[k] * fs[k];
    }
    history_->x_prev = x;
    return f;
  }

 private:
  double k_t_ = 0.0, F_s_ = 0.0, chi_ = 0.0, beta_ = 0.0;
  int n_sliders_ = 0;
  double phi_max_ = 0.0;
  std::vector<double> breakpoints_;
  std::vector<double> weights_;
  std::optional<SliderHistory> history_;
};

/// Linear spring, mostly used as an oracle for the AFT machinery.
class LinearSpring {
 public:
  LinearSpring() = default;
  explicit LinearSpring(double k) : k_(k) {}

  double stiffness() const { return k_; }
  double stuck_stiffness() const { return k_; }
  double virgin_force(double x) const { return k_ * x; }
  double virgin_stiffness(double) const { return k_; }
  void init_history(double) {}
  double step(double x) const { return k_ * x; }

 private:
  double k_ = 0.0;
};

using Element = std::variant<IwanElement, LinearSpring>;

inline IwanElement build_iwan(double k_t, double F_s, double chi, double beta, int n_sliders) {
  return IwanElement(k_t, F_s, chi, beta, n_sliders);
}

inline Element init_history(Element element, double x_static) {
  std::visit([&](auto& e) { e.init_history(x_static); }, element);
  return element;
}

inline double local_force_step(Element& element, double x) {
  return std::visit([&](auto& e) { return e.step(x); }, element);
}

inline double stuck_stiffness(const Element& element) {
  return std::visit([](const auto& e) { return e.stuck_stiffness(); }, element);
}

inline bool is_friction(const Element& element) {
  return std::holds_alternative<IwanElement>(element);
}

/// A nonlinear element together with its Q row and T column.
struct ElementSlot {
  Element element;
  Eigen::RowVectorXd q_row;  // 1 x N: local displacement = q_row * x
  Eigen::VectorXd t_col;     // N x 1: global force = t_col * f
  std::string label;

  void validate(int num_dof) const {
    if (q_row.size() != num_dof || t_col.size() != num_dof)
      throw InvalidArgument("element slot '" + label + "': Q/T size differs from model DOF count");
  }
};

}  // namespace hbtk
