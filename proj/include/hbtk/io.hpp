#pragma once
// Model files, result tables and ROM bundle files.
//
// Model and bundle files are JSON with a "format_version" field. Doubles are
// written in shortest round-trip form, so save followed by load is bit-exact.
// Result tables are comma-separated with a single header row.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hbtk/epmc.hpp"
#include "hbtk/hbm.hpp"
#include "hbtk/model.hpp"
#include "hbtk/rom.hpp"
#include "hbtk/vprnm.hpp"

namespace hbtk {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kBundleFormatVersion = 1;

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing required field '" + key + "'");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ParseError(where + ": expected an integer");
  return j.get<int>();
}

inline json to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Eigen::MatrixXd& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    std::vector<double> r(A.cols());
    for (Eigen::Index k = 0; k < A.cols(); ++k) r[k] = A(i, k);
    rows.push_back(r);
  }
  return rows;
}

inline Eigen::VectorXd vector_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[Eigen::Index(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ParseError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd A(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string wi = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != cols) throw ParseError(wi + ": ragged matrix row");
    for (std::size_t k = 0; k < cols; ++k) A(Eigen::Index(i), Eigen::Index(k)) = number(j[i][k], wi);
  }
  return A;
}

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ParseError(where + ": unknown field '" + it.key() + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << text;
  if (!out) throw Error(path + ": write failed");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// model files

inline json model_to_json(const SystemModel& m) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["name"] = m.name;
  j["labels"] = m.labels;
  j["M"] = detail::to_json(m.M);
  j["C"] = detail::to_json(m.C);
  j["K"] = detail::to_json(m.K);
  j["F_ext"] = detail::to_json(m.F_ext);
  j["F_ext0"] = detail::to_json(m.F_ext0);
  json elems = json::array();
  for (const auto& s : m.slots) {
    json e;
    e["label"] = s.label;
    e["q_row"] = detail::to_json(Eigen::VectorXd(s.q_row.transpose()));
    e["t_col"] = detail::to_json(s.t_col);
    if (const auto* iw = std::get_if<IwanElement>(&s.element)) {
      e["type"] = "iwan";
      e["k_t"] = iw->k_t();
      e["F_s"] = iw->F_s();
      e["chi"] = iw->chi();
      e["beta"] = iw->beta();
      e["n_sliders"] = iw->n_sliders();
    } else {
      e["type"] = "spring";
      e["k"] = std::get<LinearSpring>(s.element).stiffness();
    }
    elems.push_back(e);
  }
  j["elements"] = elems;
  return j;
}

inline SystemModel model_from_json(const json& j, const std::string& source = "model") {
  using namespace detail;
  reject_unknown(j, {"format_version", "name", "labels", "M", "C", "K", "F_ext", "F_ext0", "elements"}, source);
  const int version = integer(field(j, "format_version", source), source + ".format_version");
  if (version != kModelFormatVersion)
    throw ParseError(source + ": unsupported format_version " + std::to_string(version));
  SystemModel m;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError(source + ".name: expected a string");
    m.name = j["name"].get<std::string>();
  }
  m.M = matrix_from(field(j, "M", source), source + ".M");
  m.C = matrix_from(field(j, "C", source), source + ".C");
  m.K = matrix_from(field(j, "K", source), source + ".K");
  m.F_ext = vector_from(field(j, "F_ext", source), source + ".F_ext");
  m.F_ext0 = j.contains("F_ext0") ? vector_from(j["F_ext0"], source + ".F_ext0") : Eigen::VectorXd::Zero(m.M.rows());
  if (j.contains("labels")) {
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw ParseError(source + ".labels: expected strings");
      m.labels.push_back(l.get<std::string>());
    }
  }
  const json& elems = field(j, "elements", source);
  if (!elems.is_array()) throw ParseError(source + ".elements: expected an array");
  for (std::size_t i = 0; i < elems.size(); ++i) {
    const std::string w = source + ".elements[" + std::to_string(i) + "]";
    const json& e = elems[i];
    const json& type = field(e, "type", w);
    if (!type.is_string()) throw ParseError(w + ".type: expected a string");
    ElementSlot s;
    if (e.contains("label")) s.label = e["label"].get<std::string>();
    s.q_row = vector_from(field(e, "q_row", w), w + ".q_row").transpose();
    s.t_col = vector_from(field(e, "t_col", w), w + ".t_col");
    try {
      if (type == "iwan") {
        reject_unknown(e, {"type", "label", "q_row", "t_col", "k_t", "F_s", "chi", "beta", "n_sliders"}, w);
        s.element = IwanElement(number(field(e, "k_t", w), w + ".k_t"), number(field(e, "F_s", w), w + ".F_s"),
                                number(field(e, "chi", w), w + ".chi"), number(field(e, "beta", w), w + ".beta"),
                                integer(field(e, "n_sliders", w), w + ".n_sliders"));
      } else if (type == "spring") {
        reject_unknown(e, {"type", "label", "q_row", "t_col", "k"}, w);
        s.element = LinearSpring(number(field(e, "k", w), w + ".k"));
      } else {
        throw ParseError(w + ".type: unknown element type '" + type.get<std::string>() + "'");
      }
    } catch (const InvalidArgument& ex) {
      throw ParseError(w + ": " + ex.what());
    }
    m.slots.push_back(std::move(s));
  }
  try {
    m.validate();
  } catch (const InvalidArgument& ex) {
    throw ParseError(source + ": " + ex.what());
  }
  return m;
}

inline void save_model(const SystemModel& m, const std::string& path) {
  detail::write_text_file(path, model_to_json(m).dump(2) + "\n");
}

inline SystemModel load_model(const std::string& path) { return model_from_json(detail::read_json_file(path), path); }

// ---------------------------------------------------------------------------
// harmonic sets and ROM bundles

inline json harmonic_set_to_json(const HarmonicSet& X) {
  return {{"harmonics", X.basis.harmonics()}, {"num_dof", X.num_dof()},
          {"coefficients", detail::to_json(X.coefficients)}};
}

inline HarmonicSet harmonic_set_from_json(const json& j, const std::string& where) {
  using namespace detail;
  std::vector<int> hs;
  const json& h = field(j, "harmonics", where);
  if (!h.is_array()) throw ParseError(where + ".harmonics: expected an array");
  for (const auto& x : h) hs.push_back(integer(x, where + ".harmonics"));
  try {
    HarmonicBasis b(hs, integer(field(j, "num_dof", where), where + ".num_dof"));
    return HarmonicSet(b, vector_from(field(j, "coefficients", where), where + ".coefficients"));
  } catch (const InvalidArgument& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline json epmc_point_to_json(const EpmcPoint& p) {
  return {{"q", p.q}, {"omega", p.omega}, {"xi", p.xi}, {"zeta", p.zeta},
          {"residual_norm", p.residual_norm}, {"X", harmonic_set_to_json(p.X)}};
}

inline EpmcPoint epmc_point_from_json(const json& j, const std::string& w) {
  using namespace detail;
  EpmcPoint p;
  p.q = number(field(j, "q", w), w + ".q");
  p.omega = number(field(j, "omega", w), w + ".omega");
  p.xi = number(field(j, "xi", w), w + ".xi");
  p.zeta = number(field(j, "zeta", w), w + ".zeta");
  p.residual_norm = number(field(j, "residual_norm", w), w + ".residual_norm");
  p.X = harmonic_set_from_json(field(j, "X", w), w + ".X");
  return p;
}

inline json rom_bundle_to_json(const RomBundle& b) {
  json j;
  j["format_version"] = kBundleFormatVersion;
  j["A_rom"] = b.A_rom;
  j["n"] = b.n;
  j["R1"] = detail::to_json(Eigen::VectorXd(b.R1.transpose()));
  j["Rn"] = detail::to_json(Eigen::VectorXd(b.Rn.transpose()));
  j["F_ext"] = detail::to_json(b.F_ext);
  j["apply_force_correction"] = b.options.apply_force_correction;
  j["upsample"] = b.options.upsample;
  j["vprnm"] = {{"X", harmonic_set_to_json(b.vprnm.X)},
                {"omega", b.vprnm.omega},
                {"f_mag_c", b.vprnm.forcing.f_mag_c},
                {"f_mag_s", b.vprnm.forcing.f_mag_s},
                {"A1", b.vprnm.A1}};
  j["f_mag_vprnm"] = b.f_mag_vprnm;
  j["super_point"] = epmc_point_to_json(b.super_point);
  j["modal_force_super"] = b.modal_force_super;
  j["omega_scale"] = b.omega_scale;
  json sb = json::array();
  for (const auto& p : b.super_backbone) sb.push_back(epmc_point_to_json(p));
  j["super_backbone"] = sb;
  j["super_phase"] = b.super_phase;
  j["fund_point"] = epmc_point_to_json(b.fund_point);
  j["fund_rotated"] = harmonic_set_to_json(b.fund_rotated);
  j["fund_phase"] = b.fund_phase;
  j["fund_modal_force"] = b.fund_modal_force;
  j["output_harmonics"] = b.output_basis.harmonics();
  j["fund_mode"] = b.fund_mode;
  j["super_mode"] = b.super_mode;
  return j;
}

inline RomBundle rom_bundle_from_json(const json& j, const std::string& source = "bundle") {
  using namespace detail;
  const int version = integer(field(j, "format_version", source), source + ".format_version");
  if (version != kBundleFormatVersion)
    throw ParseError(source + ": unsupported format_version " + std::to_string(version));
  RomBundle b;
  auto num = [&](const char* k) { return number(field(j, k, source), source + "." + k); };
  b.A_rom = num("A_rom");
  b.n = integer(field(j, "n", source), source + ".n");
  b.R1 = vector_from(field(j, "R1", source), source + ".R1").transpose();
  b.Rn = vector_from(field(j, "Rn", source), source + ".Rn").transpose();
  b.F_ext = vector_from(field(j, "F_ext", source), source + ".F_ext");
  const json& corr = field(j, "apply_force_correction", source);
  if (!corr.is_boolean()) throw ParseError(source + ".apply_force_correction: expected a boolean");
  b.options.apply_force_correction = corr.get<bool>();
  b.options.upsample = integer(field(j, "upsample", source), source + ".upsample");
  const json& v = field(j, "vprnm", source);
  b.vprnm.X = harmonic_set_from_json(field(v, "X", source + ".vprnm"), source + ".vprnm.X");
  b.vprnm.omega = number(field(v, "omega", source + ".vprnm"), source + ".vprnm.omega");
  b.vprnm.forcing.f_mag_c = number(field(v, "f_mag_c", source + ".vprnm"), source + ".vprnm.f_mag_c");
  b.vprnm.forcing.f_mag_s = number(field(v, "f_mag_s", source + ".vprnm"), source + ".vprnm.f_mag_s");
  b.vprnm.A1 = number(field(v, "A1", source + ".vprnm"), source + ".vprnm.A1");
  b.vprnm.n = b.n;
  b.f_mag_vprnm = num("f_mag_vprnm");
  b.super_point = epmc_point_from_json(field(j, "super_point", source), source + ".super_point");
  b.modal_force_super = num("modal_force_super");
  b.omega_scale = num("omega_scale");
  const json& sb = field(j, "super_backbone", source);
  if (!sb.is_array() || sb.empty()) throw ParseError(source + ".super_backbone: expected a non-empty array");
  for (std::size_t i = 0; i < sb.size(); ++i)
    b.super_backbone.push_back(epmc_point_from_json(sb[i], source + ".super_backbone[" + std::to_string(i) + "]"));
  b.super_phase = num("super_phase");
  b.fund_point = epmc_point_from_json(field(j, "fund_point", source), source + ".fund_point");
  b.fund_rotated = harmonic_set_from_json(field(j, "fund_rotated", source), source + ".fund_rotated");
  b.fund_phase = num("fund_phase");
  b.fund_modal_force = num("fund_modal_force");
  std::vector<int> hs;
  for (const auto& h : field(j, "output_harmonics", source)) hs.push_back(integer(h, source + ".output_harmonics"));
  b.fund_mode = integer(field(j, "fund_mode", source), source + ".fund_mode");
  b.super_mode = integer(field(j, "super_mode", source), source + ".super_mode");
  try {
    b.output_basis = HarmonicBasis(hs, int(b.F_ext.size()));
  } catch (const InvalidArgument& e) {
    throw ParseError(source + ".output_harmonics: " + e.what());
  }
  return b;
}

inline void save_rom_bundle(const RomBundle& b, const std::string& path) {
  detail::write_text_file(path, rom_bundle_to_json(b).dump(2) + "\n");
}

inline RomBundle load_rom_bundle(const std::string& path) {
  return rom_bundle_from_json(detail::read_json_file(path), path);
}

// ---------------------------------------------------------------------------
// result tables

/// Columnar result: one header entry per column, one row per branch point.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    return os.str();
  }

  void write(const std::string& path) const { detail::write_text_file(path, to_csv()); }
};

namespace detail {

inline std::string dof_label(const std::vector<std::string>& labels, int d) {
  return d < int(labels.size()) ? labels[d] : "x" + std::to_string(d + 1);
}

/// Column names for per-DOF, per-harmonic amplitude and phase.
inline void harmonic_header(const HarmonicBasis& b, const std::vector<std::string>& labels,
                            std::vector<std::string>& header) {
  for (int d = 0; d < b.num_dof(); ++d)
    for (int h : b.harmonics()) {
      const std::string base = dof_label(labels, d) + "_H" + std::to_string(h);
      if (h == 0) {
        header.push_back(base);
      } else {
        header.push_back(base + "_amp");
        header.push_back(base + "_phase");
      }
    }
}

inline void harmonic_values(const HarmonicSet& X, std::vector<double>& row) {
  for (int d = 0; d < X.num_dof(); ++d)
    for (int h : X.basis.harmonics()) {
      if (h == 0) {
        row.push_back(X.cos(0)[d]);
      } else {
        row.push_back(X.amplitude(h, d));
        row.push_back(X.phase(h, d));
      }
    }
}

}  // namespace detail

inline Table frc_table(const FrcBranch& br, const HarmonicBasis& basis, const std::vector<std::string>& labels = {}) {
  Table t;
  t.header = {"omega", "f_mag_c", "f_mag_s", "A1", "residual_norm", "control_residual", "cycle_mismatch"};
  detail::harmonic_header(basis, labels, t.header);
  for (const auto& p : br.points) {
    std::vector<double> r = {p.omega, p.forcing.f_mag_c, p.forcing.f_mag_s, p.A1,
                             p.residual_norm, p.control_residual, p.cycle_mismatch};
    detail::harmonic_values(p.X, r);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline Table backbone_table(const Backbone& bb, const std::vector<std::string>& labels = {}) {
  Table t;
  t.header = {"q", "omega", "xi", "zeta", "residual_norm"};
  detail::harmonic_header(bb.basis, labels, t.header);
  for (const auto& p : bb.points) {
    std::vector<double> r = {p.q, p.omega, p.xi, p.zeta, p.residual_norm};
    detail::harmonic_values(p.X, r);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline Table vprnm_table(const VprnmBackbone& bb, const std::vector<std::string>& labels = {}) {
  Table t;
  t.header = {"omega", "f_mag_c", "f_mag_s", "A1", "constraint", "residual_norm"};
  if (bb.points.empty()) return t;
  detail::harmonic_header(bb.points.front().X.basis, labels, t.header);
  for (const auto& p : bb.points) {
    std::vector<double> r = {p.omega, p.forcing.f_mag_c, p.forcing.f_mag_s, p.A1, p.constraint_value, p.residual_norm};
    detail::harmonic_values(p.X, r);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline Table rom_table(const std::vector<RomResponse>& resp, const HarmonicBasis& basis,
                       const std::vector<std::string>& labels = {}) {
  Table t;
  t.header = {"omega", "f_mag", "q_super", "has_super"};
  detail::harmonic_header(basis, labels, t.header);
  for (const auto& p : resp) {
    std::vector<double> r = {p.omega, p.f_mag, p.q_super, p.has_super ? 1.0 : 0.0};
    detail::harmonic_values(p.X, r);
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace hbtk
