#pragma once
// Reduced-order models assembled from EPMC backbones and one VPRNM point.
//
// Single-mode ROMs (constant force with phase, constant amplitude) and the
// superharmonic VPRNM ROM. Evaluation is interpolation, rotation and algebra
// only; nothing here runs a nonlinear solve.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbtk/epmc.hpp"
#include "hbtk/vprnm.hpp"

namespace hbtk {

/// First-harmonic mode shape in complex, mass-normalized form.
struct ComplexMode {
  Eigen::VectorXcd psi;  // (X1c - i X1s) / q
  double q = 0.0;
  double omega = 0.0;
  double zeta = 0.0;

  /// Modal force psi^H F.
  std::complex<double> modal_force(const Eigen::VectorXcd& F) const { return psi.dot(F); }
  double p2() const { return omega * omega - 2.0 * omega * omega * zeta * zeta; }
};

inline ComplexMode complex_mode(const EpmcPoint& p) {
  detail::require(p.q > 0.0, "complex_mode: modal amplitude must be positive");
  ComplexMode m;
  m.psi.resize(p.X.num_dof());
  m.psi.real() = p.X.cos(1) / p.q;
  m.psi.imag() = -p.X.sin(1) / p.q;
  m.q = p.q;
  m.omega = p.omega;
  m.zeta = p.zeta;
  return m;
}

/// Complex forcing shape f_c F - i f_s F.
inline Eigen::VectorXcd complex_forcing(const Eigen::VectorXd& F, const ForcingState& f) {
  Eigen::VectorXcd out(F.size());
  out.real() = f.f_mag_c * F;
  out.imag() = -f.f_mag_s * F;
  return out;
}

namespace detail {

/// Segment index i and weight t such that s = (1-t) v[i] + t v[i+1].
/// The first bracketing segment wins; a value equal to a sample returns t = 0
/// (or t = 1 for the final sample) so the sample is reproduced exactly.
inline std::optional<std::pair<std::size_t, double>> bracket(const std::vector<double>& v, double s) {
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) {
    if (v[0] == s) return std::make_pair(std::size_t{0}, 0.0);
    return std::nullopt;
  }
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i] == s) return std::make_pair(i, 0.0);
    const double lo = std::min(v[i], v[i + 1]), hi = std::max(v[i], v[i + 1]);
    if (s > lo && s < hi) return std::make_pair(i, (s - v[i]) / (v[i + 1] - v[i]));
  }
  if (v.back() == s) return std::make_pair(v.size() - 2, 1.0);
  return std::nullopt;
}

inline double lerp(double a, double b, double t) { return (1.0 - t) * a + t * b; }

inline Eigen::VectorXd lerp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  return (1.0 - t) * a + t * b;
}

inline EpmcPoint lerp(const EpmcPoint& a, const EpmcPoint& b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  EpmcPoint p;
  p.q = lerp(a.q, b.q, t);
  p.omega = lerp(a.omega, b.omega, t);
  p.xi = lerp(a.xi, b.xi, t);
  p.zeta = lerp(a.zeta, b.zeta, t);
  p.X = HarmonicSet(a.X.basis, lerp(a.X.coefficients, b.X.coefficients, t));
  p.residual_norm = std::max(a.residual_norm, b.residual_norm);
  return p;
}

inline VprnmPoint lerp(const VprnmPoint& a, const VprnmPoint& b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  VprnmPoint p;
  p.X = HarmonicSet(a.X.basis, lerp(a.X.coefficients, b.X.coefficients, t));
  p.omega = lerp(a.omega, b.omega, t);
  p.forcing.f_mag_c = lerp(a.forcing.f_mag_c, b.forcing.f_mag_c, t);
  p.forcing.f_mag_s = lerp(a.forcing.f_mag_s, b.forcing.f_mag_s, t);
  p.A1 = lerp(a.A1, b.A1, t);
  p.n = a.n;
  p.constraint_value = lerp(a.constraint_value, b.constraint_value, t);
  if (a.F_broad_c.size() == b.F_broad_c.size()) {
    p.F_broad_c = lerp(a.F_broad_c, b.F_broad_c, t);
    p.F_broad_s = lerp(a.F_broad_s, b.F_broad_s, t);
  }
  p.residual_norm = std::max(a.residual_norm, b.residual_norm);
  return p;
}

inline double row_amplitude(const HarmonicSet& X, int h, const Eigen::RowVectorXd& row) {
  if (!X.basis.contains(h)) return 0.0;
  return std::hypot(X.project_cos(h, row), X.project_sin(h, row));
}

inline double row_phase(const HarmonicSet& X, int h, const Eigen::RowVectorXd& row) {
  return std::atan2(X.project_sin(h, row), X.project_cos(h, row));
}

inline std::string range_text(const std::vector<double>& v) {
  if (v.empty()) return "[empty]";
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return "[" + std::to_string(*lo) + ", " + std::to_string(*hi) + "]";
}

/// Backbone point whose scalar measure equals s.
template <class Measure>
EpmcPoint interpolate_backbone(const std::vector<EpmcPoint>& pts, double s, Measure measure,
                               const std::string& what) {
  std::vector<double> v;
  v.reserve(pts.size());
  for (const auto& p : pts) v.push_back(measure(p));
  const auto b = bracket(v, s);
  if (!b)
    throw InvalidArgument(what + ": value " + std::to_string(s) + " outside backbone range " + range_text(v));
  if (v.size() == 1) return pts[0];
  return lerp(pts[b->first], pts[b->first + 1], b->second);
}

/// Squared-frequency roots of the single-mode amplitude equation; empty if none is real and positive.
inline std::vector<double> forcing_frequencies(double q, double omega, double zeta, double modal_force_abs) {
  const double w2 = omega * omega;
  const double p2 = w2 - 2.0 * w2 * zeta * zeta;
  const double disc = p2 * p2 - w2 * w2 + modal_force_abs * modal_force_abs / (q * q);
  std::vector<double> out;
  if (!(disc >= 0.0)) return out;
  const double r = std::sqrt(disc);
  for (double w2 : {p2 - r, p2 + r})
    if (w2 > 0.0) out.push_back(std::sqrt(w2));
  if (out.size() == 2 && out[0] == out[1]) out.pop_back();
  return out;
}

/// Phase lag of the modal response behind the force.
inline double response_phase(double omega, double zeta, std::complex<double> modal_force, double Omega) {
  const std::complex<double> D(omega * omega - Omega * Omega, 2.0 * Omega * zeta * omega);
  return std::arg(std::conj(modal_force) * D);
}

}  // namespace detail

struct RomFrcPoint {
  double q = 0.0;
  double omega = 0.0;
  double phi = 0.0;
  int root = 0;  // -1 lower, +1 upper
  HarmonicSet X;
};

struct ConstantForceFrc {
  std::vector<RomFrcPoint> points;  // per q: lower root, then upper root
  std::vector<double> unreachable_q;
};

namespace detail {

inline void append_roots(const EpmcPoint& p, std::complex<double> modal_force, ConstantForceFrc& out,
                         double extra_phase = 0.0) {
  const std::vector<double> roots = forcing_frequencies(p.q, p.omega, p.zeta, std::abs(modal_force));
  if (roots.empty()) {
    out.unreachable_q.push_back(p.q);
    return;
  }
  for (std::size_t i = 0; i < roots.size(); ++i) {
    RomFrcPoint r;
    r.q = p.q;
    r.omega = roots[i];
    r.root = (roots.size() == 1) ? 0 : (i == 0 ? -1 : 1);
    r.phi = response_phase(p.omega, p.zeta, modal_force, r.omega);
    r.X = rotate_phase(p.X, r.phi + extra_phase);
    out.points.push_back(std::move(r));
  }
}

inline EpmcPoint backbone_at_q(const std::vector<EpmcPoint>& pts, double q) {
  return interpolate_backbone(pts, q, [](const EpmcPoint& p) { return p.q; }, "EPMC backbone (q)");
}

}  // namespace detail

/// Constant-force response of one nonlinear mode at the requested modal amplitudes.
inline ConstantForceFrc epmc_frc_constant_force(const Backbone& backbone, const Eigen::VectorXcd& F,
                                                const std::vector<double>& q_list) {
  detail::require(!backbone.points.empty(), "epmc_frc_constant_force: empty backbone");
  detail::require(F.size() == backbone.basis.num_dof(), "epmc_frc_constant_force: force has wrong length");
  ConstantForceFrc out;
  for (double q : q_list) {
    const EpmcPoint p = detail::backbone_at_q(backbone.points, q);
    detail::append_roots(p, complex_mode(p).modal_force(F), out);
  }
  return out;
}

/// Forcing magnitude that holds the R1 first-harmonic amplitude (times Omega^k) at A1.
///
/// f = q sqrt(Omega^4 - 2 Omega^2 p2 + omega^4) / |psi^H F|, with (q, omega, zeta, psi)
/// interpolated on the backbone.
inline std::vector<double> epmc_force_constant_amplitude(const Backbone& backbone, const Eigen::VectorXd& F,
                                                         double A1, const Eigen::RowVectorXd& R1, int k,
                                                         const std::vector<double>& omega_list) {
  detail::require(!backbone.points.empty(), "epmc_force_constant_amplitude: empty backbone");
  detail::require(A1 > 0.0, "epmc_force_constant_amplitude: A1 must be positive");
  detail::require(k >= 0, "epmc_force_constant_amplitude: derivative order must be non-negative");
  detail::require(F.size() == backbone.basis.num_dof() && R1.size() == F.size(),
                  "epmc_force_constant_amplitude: vector length mismatch");
  auto measure = [&](const EpmcPoint& p) { return detail::row_amplitude(p.X, 1, R1); };
  const std::string what = "EPMC backbone (mode " + std::to_string(backbone.mode) + ") amplitude";
  std::optional<EpmcPoint> fixed;
  if (k == 0) fixed = detail::interpolate_backbone(backbone.points, A1, measure, what);

  std::vector<double> out;
  out.reserve(omega_list.size());
  for (double W : omega_list) {
    detail::require(W > 0.0, "epmc_force_constant_amplitude: frequencies must be positive");
    const EpmcPoint p = fixed ? *fixed : detail::interpolate_backbone(backbone.points, A1 / std::pow(W, k), measure, what);
    const ComplexMode m = complex_mode(p);
    const double pf = std::abs(m.modal_force(F.cast<std::complex<double>>()));
    if (!(pf > 0.0)) throw InvalidArgument("epmc_force_constant_amplitude: forcing does not excite the mode");
    const double W2 = W * W;
    out.push_back(m.q * std::sqrt(std::max(0.0, W2 * W2 - 2.0 * W2 * m.p2() + std::pow(m.omega, 4))) / pf);
  }
  return out;
}

struct RomOptions {
  bool apply_force_correction = false;
  /// Extra linearly interpolated samples inserted between neighbouring super-backbone points.
  int upsample = 0;
};

struct RomBundle {
  double A_rom = 0.0;
  int n = 0;
  Eigen::RowVectorXd R1, Rn;
  Eigen::VectorXd F_ext;
  RomOptions options;

  VprnmPoint vprnm;       // interpolated at A_rom
  double f_mag_vprnm = 0.0;

  EpmcPoint super_point;  // unscaled interpolated superharmonic EPMC point
  double modal_force_super = 0.0;  // |psi_S^H F_S|
  double omega_scale = 1.0;        // n Omega_VPRNM / omega_S
  std::vector<EpmcPoint> super_backbone;  // rescaled, includes super_point
  double super_phase = 0.0;               // rotation applied to the superharmonic sub-solution

  EpmcPoint fund_point;     // interpolated at A_rom, unrotated
  HarmonicSet fund_rotated; // matched to the VPRNM first-harmonic phase
  double fund_phase = 0.0;
  double fund_modal_force = 0.0;  // |psi_F^H F_ext|

  HarmonicBasis output_basis;
  int super_mode = 0;
  int fund_mode = 0;
};

namespace detail {

inline std::vector<EpmcPoint> upsample_points(const std::vector<EpmcPoint>& pts, int extra) {
  if (extra <= 0 || pts.size() < 2) return pts;
  std::vector<EpmcPoint> out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    out.push_back(pts[i]);
    for (int j = 1; j <= extra; ++j) out.push_back(lerp(pts[i], pts[i + 1], double(j) / (extra + 1)));
  }
  out.push_back(pts.back());
  return out;
}

inline double fund_force(const RomBundle& b, double W) {
  const double w = b.fund_point.omega, z = b.fund_point.zeta;
  const double p2 = w * w - 2.0 * w * w * z * z;
  const double W2 = W * W;
  return b.fund_point.q * std::sqrt(std::max(0.0, W2 * W2 - 2.0 * W2 * p2 + std::pow(w, 4))) / b.fund_modal_force;
}

}  // namespace detail

/// Builds the superharmonic VPRNM ROM at first-harmonic amplitude A_rom.
inline RomBundle vprnm_rom_build(const Backbone& fund, const Backbone& super, const VprnmBackbone& vprnm,
                                 double A_rom, const Eigen::RowVectorXd& R1, const Eigen::RowVectorXd& Rn, int n,
                                 const Eigen::VectorXd& F_ext, const RomOptions& options = {}) {
  detail::require(n >= 2, "vprnm_rom_build: superharmonic order must be at least 2");
  detail::require(A_rom > 0.0, "vprnm_rom_build: A_rom must be positive");
  detail::require(!fund.points.empty(), "vprnm_rom_build: fundamental backbone is empty");
  detail::require(!super.points.empty(), "vprnm_rom_build: superharmonic backbone is empty");
  detail::require(!vprnm.points.empty(), "vprnm_rom_build: VPRNM backbone is empty");
  detail::require(vprnm.k == 0, "vprnm_rom_build: only displacement amplitude control (k = 0) is supported");
  detail::require(!fund.basis.contains(n),
                  "vprnm_rom_build: fundamental backbone must not contain harmonic " + std::to_string(n));
  detail::require(vprnm.points.front().X.basis.contains(n), "vprnm_rom_build: VPRNM basis lacks harmonic n");
  const int N = fund.basis.num_dof();
  detail::require(super.basis.num_dof() == N && R1.size() == N && Rn.size() == N && F_ext.size() == N,
                  "vprnm_rom_build: dimension mismatch");
  detail::require(options.upsample >= 0, "vprnm_rom_build: upsample must be non-negative");

  RomBundle b;
  b.A_rom = A_rom;
  b.n = n;
  b.R1 = R1;
  b.Rn = Rn;
  b.F_ext = F_ext;
  b.options = options;
  b.fund_mode = fund.mode;
  b.super_mode = super.mode;

  // VPRNM point at the controlled amplitude
  {
    std::vector<double> a;
    for (const auto& p : vprnm.points) a.push_back(detail::row_amplitude(p.X, 1, R1));
    const auto br = detail::bracket(a, A_rom);
    if (!br)
      throw InvalidArgument("vprnm_rom_build: A_rom " + std::to_string(A_rom) + " outside VPRNM backbone range " +
                            detail::range_text(a));
    b.vprnm = a.size() == 1 ? vprnm.points[0] : detail::lerp(vprnm.points[br->first], vprnm.points[br->first + 1], br->second);
    b.f_mag_vprnm = b.vprnm.forcing.magnitude();
  }
  const double W_V = b.vprnm.omega;

  // superharmonic EPMC point matching the VPRNM harmonic-n amplitude
  const double An = detail::row_amplitude(b.vprnm.X, n, Rn);
  if (!(An > 0.0)) throw InvalidArgument("vprnm_rom_build: VPRNM harmonic-n amplitude is zero at the R_n row");
  auto super_measure = [&](const EpmcPoint& p) { return detail::row_amplitude(p.X, 1, Rn); };
  b.super_point = detail::interpolate_backbone(super.points, An, super_measure,
                                               "superharmonic EPMC backbone (mode " + std::to_string(super.mode) + ")");
  const double wS = b.super_point.omega;
  b.omega_scale = n * W_V / wS;
  b.modal_force_super = 2.0 * b.super_point.q * std::pow(n * W_V, 2) * b.super_point.zeta;

  std::vector<EpmcPoint> pts = super.points;
  auto pos = std::lower_bound(pts.begin(), pts.end(), b.super_point.q,
                              [](const EpmcPoint& p, double q) { return p.q < q; });
  if (pos == pts.end() || pos->q != b.super_point.q) pts.insert(pos, b.super_point);
  pts = detail::upsample_points(pts, options.upsample);
  for (auto& p : pts) p.omega *= b.omega_scale;
  b.super_backbone = std::move(pts);

  // phase of the superharmonic ROM at Omega_S = n Omega_VPRNM, measured at q_S
  {
    EpmcPoint ps = b.super_point;
    ps.omega *= b.omega_scale;
    const double phi = detail::response_phase(ps.omega, ps.zeta, b.modal_force_super, n * W_V);
    const HarmonicSet Xs = rotate_phase(ps.X, phi);
    b.super_phase = detail::row_phase(b.vprnm.X, n, Rn) - detail::row_phase(Xs, 1, Rn);
  }

  // fundamental EPMC point at A_rom, rotated to the VPRNM first-harmonic phase
  auto fund_measure = [&](const EpmcPoint& p) { return detail::row_amplitude(p.X, 1, R1); };
  b.fund_point = detail::interpolate_backbone(fund.points, A_rom, fund_measure,
                                              "fundamental EPMC backbone (mode " + std::to_string(fund.mode) + ")");
  b.fund_phase = detail::row_phase(b.vprnm.X, 1, R1) - detail::row_phase(b.fund_point.X, 1, R1);
  b.fund_rotated = rotate_phase(b.fund_point.X, b.fund_phase);
  b.fund_modal_force = std::abs(complex_mode(b.fund_point).modal_force(F_ext.cast<std::complex<double>>()));
  if (!(b.fund_modal_force > 0.0)) throw InvalidArgument("vprnm_rom_build: F_ext does not excite the fundamental mode");

  std::vector<int> hs = fund.basis.harmonics();
  if (!fund.basis.has_static()) hs.push_back(0);
  for (int h : super.basis.harmonics())
    if (h > 0) hs.push_back(h * n);
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  b.output_basis = HarmonicBasis(hs, N);
  return b;
}

struct RomResponse {
  double omega = 0.0;
  HarmonicSet X;
  double f_mag = 0.0;
  double q_super = 0.0;
  bool has_super = false;
};

/// Superharmonic sub-solution of a bundle as one curve over Omega_S: lower roots
/// by increasing q followed by upper roots by decreasing q.
inline std::vector<RomFrcPoint> vprnm_rom_super_curve(const RomBundle& b) {
  ConstantForceFrc frc;
  frc.points.reserve(2 * b.super_backbone.size());
  for (const auto& p : b.super_backbone) detail::append_roots(p, b.modal_force_super, frc, b.super_phase);
  std::vector<RomFrcPoint> lower, upper;
  for (auto& p : frc.points) (p.root > 0 ? upper : lower).push_back(std::move(p));
  std::vector<RomFrcPoint> curve = std::move(lower);
  for (auto it = upper.rbegin(); it != upper.rend(); ++it) curve.push_back(std::move(*it));
  return curve;
}

/// Evaluates the VPRNM ROM at forcing frequencies Omega. Where the curve folds over
/// n Omega the branch with the largest modal amplitude is returned.
inline std::vector<RomResponse> vprnm_rom_evaluate(const RomBundle& b, const std::vector<double>& omega_list) {
  detail::require(b.n >= 2 && b.output_basis.num_dof() > 0, "vprnm_rom_evaluate: bundle is not built");
  const std::vector<RomFrcPoint> curve = vprnm_rom_super_curve(b);
  double q_max = 0.0;
  for (const auto& p : curve) q_max = std::max(q_max, p.q);
  const double dF = b.f_mag_vprnm - detail::fund_force(b, b.vprnm.omega);

  HarmonicSet base(b.output_basis);
  base.cos(0) = b.vprnm.X.cos(0);
  for (int h : b.fund_rotated.basis.harmonics()) {
    if (h == 0) continue;
    base.cos(h) = b.fund_rotated.cos(h);
    base.sin(h) = b.fund_rotated.sin(h);
  }
  // (source offset, destination offset) per super-solution coefficient block
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  if (!curve.empty()) {
    const HarmonicBasis& sb = curve.front().X.basis;
    for (int h : sb.harmonics()) {
      if (h == 0) continue;
      blocks.emplace_back(sb.cos_offset(h), b.output_basis.cos_offset(h * b.n));
      blocks.emplace_back(sb.sin_offset(h), b.output_basis.sin_offset(h * b.n));
    }
  }
  const Eigen::Index N = b.output_basis.num_dof();

  std::vector<RomResponse> out;
  out.reserve(omega_list.size());
  for (double W : omega_list) {
    detail::require(W > 0.0, "vprnm_rom_evaluate: frequencies must be positive");
    RomResponse r;
    r.omega = W;
    r.X = base;

    const double WS = b.n * W;
    int best = -1;
    double best_t = 0.0, best_q = -1.0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
      const double a = curve[i].omega, c = curve[i + 1].omega;
      if (WS < std::min(a, c) || WS > std::max(a, c)) continue;
      const double t = (a == c) ? 0.0 : (WS - a) / (c - a);
      const double q = detail::lerp(curve[i].q, curve[i + 1].q, t);
      if (q > best_q) {
        best = int(i);
        best_t = t;
        best_q = q;
      }
    }
    if (best >= 0) {
      const Eigen::VectorXd& c0 = curve[best].X.coefficients;
      const Eigen::VectorXd& c1 = curve[best + 1].X.coefficients;
      for (const auto& [src, dst] : blocks)
        r.X.coefficients.segment(dst, N) +=
            (1.0 - best_t) * c0.segment(src, N) + best_t * c1.segment(src, N);
      r.q_super = best_q;
      r.has_super = true;
    }
    r.f_mag = detail::fund_force(b, W);
    if (b.options.apply_force_correction && q_max > 0.0) r.f_mag += dF * r.q_super / q_max;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hbtk
