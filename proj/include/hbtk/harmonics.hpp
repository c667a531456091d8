#pragma once
// Truncated Fourier representation of multi-DOF periodic motion.
//
// Coefficient layout (shared by residuals, Jacobians and file output):
//
//   [ X_0 (all DOF) | X_h1c (all DOF) | X_h1s (all DOF) | X_h2c | X_h2s | ... ]
//
// over the listed harmonics. A per-DOF ("local") coefficient vector uses the
// same ordering with one entry per block, so global index = local * N + dof.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/error.hpp"

namespace hbtk {

class HarmonicBasis {
 public:
  HarmonicBasis() = default;

  HarmonicBasis(std::vector<int> harmonics, int num_dof)
      : harmonics_(std::move(harmonics)), num_dof_(num_dof) {
    detail::require(num_dof_ > 0, "HarmonicBasis: num_dof must be positive");
    detail::require(!harmonics_.empty(), "HarmonicBasis: empty harmonic list");
    for (std::size_t i = 0; i < harmonics_.size(); ++i) {
      detail::require(harmonics_[i] >= 0, "HarmonicBasis: negative harmonic");
      if (i > 0)
        detail::require(harmonics_[i] > harmonics_[i - 1],
                        "HarmonicBasis: harmonics must be strictly increasing");
    }
    local_offset_.reserve(harmonics_.size());
    int offset = 0;
    for (int h : harmonics_) {
      local_offset_.push_back(offset);
      offset += (h == 0) ? 1 : 2;
    }
    local_size_ = offset;
  }

  const std::vector<int>& harmonics() const { return harmonics_; }
  int num_dof() const { return num_dof_; }
  int num_harmonics() const { return static_cast<int>(harmonics_.size()); }
  int max_harmonic() const { return harmonics_.empty() ? 0 : harmonics_.back(); }
  bool has_static() const { return !harmonics_.empty() && harmonics_.front() == 0; }

  /// Position of harmonic h in the list, or -1.
  int index_of(int h) const {
    auto it = std::lower_bound(harmonics_.begin(), harmonics_.end(), h);
    if (it == harmonics_.end() || *it != h) return -1;
    return static_cast<int>(it - harmonics_.begin());
  }
  bool contains(int h) const { return index_of(h) >= 0; }

  /// Coefficients per scalar signal (1 for harmonic 0, 2 otherwise).
  int local_size() const { return local_size_; }
  Eigen::Index size() const { return Eigen::Index(local_size_) * num_dof_; }

  /// Local index of the cosine (or static) coefficient of harmonic h.
  int local_cos(int h) const { return local_offset_[checked_index(h)]; }
  /// Local index of the sine coefficient of harmonic h (h > 0).
  int local_sin(int h) const {
    detail::require(h > 0, "HarmonicBasis: harmonic 0 has no sine term");
    return local_offset_[checked_index(h)] + 1;
  }
  Eigen::Index cos_offset(int h) const { return Eigen::Index(local_cos(h)) * num_dof_; }
  Eigen::Index sin_offset(int h) const { return Eigen::Index(local_sin(h)) * num_dof_; }

  /// Harmonic number associated with each local coefficient.
  std::vector<int> local_harmonic_numbers() const {
    std::vector<int> out;
    out.reserve(local_size_);
    for (int h : harmonics_) {
      out.push_back(h);
      if (h != 0) out.push_back(h);
    }
    return out;
  }

  bool operator==(const HarmonicBasis& other) const {
    return harmonics_ == other.harmonics_ && num_dof_ == other.num_dof_;
  }

 private:
  int checked_index(int h) const {
    int i = index_of(h);
    if (i < 0)
      throw InvalidArgument("HarmonicBasis: harmonic " + std::to_string(h) + " not in basis");
    return i;
  }

  std::vector<int> harmonics_;
  std::vector<int> local_offset_;
  int num_dof_ = 0;
  int local_size_ = 0;
};

/// Stacked Fourier coefficients conforming to a HarmonicBasis.
struct HarmonicSet {
  HarmonicBasis basis;
  Eigen::VectorXd coefficients;

  HarmonicSet() = default;
  explicit HarmonicSet(HarmonicBasis b)
      : basis(std::move(b)), coefficients(Eigen::VectorXd::Zero(basis.size())) {}
  HarmonicSet(HarmonicBasis b, Eigen::VectorXd c) : basis(std::move(b)), coefficients(std::move(c)) {
    detail::require(coefficients.size() == basis.size(),
                    "HarmonicSet: coefficient vector does not conform to basis");
  }

  int num_dof() const { return basis.num_dof(); }

  auto cos(int h) { return coefficients.segment(basis.cos_offset(h), basis.num_dof()); }
  auto cos(int h) const { return coefficients.segment(basis.cos_offset(h), basis.num_dof()); }
  auto sin(int h) { return coefficients.segment(basis.sin_offset(h), basis.num_dof()); }
  auto sin(int h) const { return coefficients.segment(basis.sin_offset(h), basis.num_dof()); }

  /// X_n for one DOF (X_0 itself for h = 0; zero if h is not in the basis).
  double amplitude(int h, int dof) const {
    if (!basis.contains(h)) return 0.0;
    if (h == 0) return std::abs(cos(0)[dof]);
    return std::hypot(cos(h)[dof], sin(h)[dof]);
  }
  /// phi_n in x = X_n cos(n Omega t - phi_n).
  double phase(int h, int dof) const {
    if (!basis.contains(h) || h == 0) return 0.0;
    return std::atan2(sin(h)[dof], cos(h)[dof]);
  }
  /// Cosine/sine of harmonic h extracted along a row vector (e.g. R_1 X_hc).
  double project_cos(int h, const Eigen::RowVectorXd& row) const { return row.dot(cos(h)); }
  double project_sin(int h, const Eigen::RowVectorXd& row) const { return row.dot(sin(h)); }
};

/// Rotates harmonic h of every DOF by h*phi:
///   [Xc'; Xs'] = [cos(h phi) -sin(h phi); sin(h phi) cos(h phi)] [Xc; Xs]
/// which corresponds to a time delay phi/Omega. The static block is untouched.
inline HarmonicSet rotate_phase(const HarmonicSet& X, double phi) {
  HarmonicSet out = X;
  for (int h : X.basis.harmonics()) {
    if (h == 0) continue;
    const double c = std::cos(h * phi), s = std::sin(h * phi);
    out.cos(h) = c * X.cos(h) - s * X.sin(h);
    out.sin(h) = s * X.cos(h) + c * X.sin(h);
  }
  return out;
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Validates a time-sample count for a basis: power of two, at least 4H+2.
inline void check_time_samples(int n_time, const HarmonicBasis& basis) {
  if (!is_power_of_two(n_time))
    throw InvalidArgument("time sample count " + std::to_string(n_time) + " is not a power of two");
  if (n_time < 4 * basis.max_harmonic() + 2)
    throw InvalidArgument("time sample count " + std::to_string(n_time) +
                          " aliases harmonic " + std::to_string(basis.max_harmonic()));
}

/// Precomputed synthesis / analysis matrices for one basis and sample count.
///
/// Samples sit at theta_j = 2 pi j / N_t (t_j = theta_j / Omega). Synthesis maps a
/// local coefficient vector to samples; analysis is the correlation-sum inverse
/// (mean for harmonic 0, 2/N_t sums for cosine and sine).
class FourierTable {
 public:
  FourierTable() = default;
  FourierTable(const HarmonicBasis& basis, int n_time) : basis_(basis), n_time_(n_time) {
    check_time_samples(n_time, basis);
    const int nc = basis.local_size();
    synthesis_.resize(n_time, nc);
    analysis_.resize(nc, n_time);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int j = 0; j < n_time; ++j) {
      for (int h : basis.harmonics()) {
        const int c = basis.local_cos(h);
        if (h == 0) {
          synthesis_(j, c) = 1.0;
          analysis_(c, j) = 1.0 / n_time;
          continue;
        }
        // integer argument reduction keeps the table exact-periodic
        const double angle = two_pi * ((static_cast<long long>(h) * j) % n_time) / n_time;
        const double ca = std::cos(angle), sa = std::sin(angle);
        synthesis_(j, c) = ca;
        synthesis_(j, c + 1) = sa;
        analysis_(c, j) = 2.0 * ca / n_time;
        analysis_(c + 1, j) = 2.0 * sa / n_time;
      }
    }
  }

  const HarmonicBasis& basis() const { return basis_; }
  int n_time() const { return n_time_; }
  /// N_t x local_size
  const Eigen::MatrixXd& synthesis() const { return synthesis_; }
  /// local_size x N_t
  const Eigen::MatrixXd& analysis() const { return analysis_; }

  /// Synthesis matrix for the k-th time derivative at fundamental frequency omega.
  Eigen::MatrixXd synthesis_derivative(double omega, int k) const {
    detail::require(k >= 0 && k <= 2, "derivative order must be 0, 1 or 2");
    if (k == 0) return synthesis_;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(synthesis_.rows(), synthesis_.cols());
    for (int h : basis_.harmonics()) {
      if (h == 0) continue;
      const int c = basis_.local_cos(h);
      const double w = h * omega;
      if (k == 1) {
        // d/dt [a cos + b sin] = -w a sin + w b cos
        out.col(c) = -w * synthesis_.col(c + 1);
        out.col(c + 1) = w * synthesis_.col(c);
      } else {
        out.col(c) = -w * w * synthesis_.col(c);
        out.col(c + 1) = -w * w * synthesis_.col(c + 1);
      }
    }
    return out;
  }

 private:
  HarmonicBasis basis_;
  int n_time_ = 0;
  Eigen::MatrixXd synthesis_;
  Eigen::MatrixXd analysis_;
};

/// Global coefficients viewed as a local_size x num_dof matrix (row = local index).
inline Eigen::MatrixXd coefficients_by_dof(const HarmonicSet& X) {
  const int n = X.num_dof();
  const int nc = X.basis.local_size();
  return Eigen::Map<const Eigen::MatrixXd>(X.coefficients.data(), n, nc).transpose();
}

/// Samples of the k-th time derivative of x(t); row j is t_j = 2 pi j / (Omega N_t).
inline Eigen::MatrixXd time_series_from_harmonics(const HarmonicSet& X, double omega, int n_time,
                                                  int k = 0) {
  FourierTable table(X.basis, n_time);
  return table.synthesis_derivative(omega, k) * coefficients_by_dof(X);
}

/// Inverse of time_series_from_harmonics for band-limited, one-period series.
inline HarmonicSet harmonics_from_time_series(const Eigen::MatrixXd& series,
                                              const HarmonicBasis& basis) {
  detail::require(series.cols() == basis.num_dof(),
                  "harmonics_from_time_series: column count differs from num_dof");
  FourierTable table(basis, static_cast<int>(series.rows()));
  Eigen::MatrixXd local = table.analysis() * series;  // local_size x N
  Eigen::MatrixXd transposed = local.transpose();     // N x local_size, column-major
  return HarmonicSet(basis, Eigen::Map<const Eigen::VectorXd>(transposed.data(), basis.size()));
}

/// Local (per-signal) coefficients of the row-projected motion Q x.
inline Eigen::VectorXd project_local(const HarmonicSet& X, const Eigen::RowVectorXd& q_row) {
  const int n = X.num_dof();
  const int nc = X.basis.local_size();
  Eigen::Map<const Eigen::MatrixXd> by_dof(X.coefficients.data(), n, nc);
  return (q_row * by_dof).transpose();
}

/// Copy of X keeping only harmonics for which keep(h) is true.
template <class Predicate>
HarmonicSet filter_harmonics(const HarmonicSet& X, Predicate keep) {
  HarmonicSet out(X.basis);
  for (int h : X.basis.harmonics()) {
    if (!keep(h)) continue;
    out.cos(h) = X.cos(h);
    if (h != 0) out.sin(h) = X.sin(h);
  }
  return out;
}

/// Re-expresses X on another basis; harmonics missing from the target are dropped,
/// harmonics missing from the source are zero.
inline HarmonicSet change_basis(const HarmonicSet& X, const HarmonicBasis& target) {
  detail::require(target.num_dof() == X.num_dof(), "change_basis: num_dof mismatch");
  HarmonicSet out(target);
  for (int h : target.harmonics()) {
    if (!X.basis.contains(h)) continue;
    out.cos(h) = X.cos(h);
    if (h != 0) out.sin(h) = X.sin(h);
  }
  return out;
}

}  // namespace hbtk
