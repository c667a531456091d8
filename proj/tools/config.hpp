#pragma once
// Run configuration for the hbtk driver: parsing and validation only.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbtk/hbtk.hpp"

namespace hbtk::cli {

enum class JobKind { frc, epmc, vprnm, rom_build, rom_eval, decompose };

inline const char* to_string(JobKind k) {
  switch (k) {
    case JobKind::frc: return "frc";
    case JobKind::epmc: return "epmc";
    case JobKind::vprnm: return "vprnm";
    case JobKind::rom_build: return "rom-build";
    case JobKind::rom_eval: return "rom-eval";
    case JobKind::decompose: return "decompose";
  }
  return "unknown";
}

struct Discretization {
  std::vector<int> harmonics;
  int n_time = 1024;
};

struct BackboneSpec {
  Discretization disc;
  int mode = 1;
  std::pair<double, double> q_range{1e-2, 1e3};
  EpmcOptions options;
};

struct VprnmSpec {
  Discretization disc;
  int n = 3;
  VprnmVariable variable = VprnmVariable::force;
  std::pair<double, double> range{0.4, 60.0};
  int R1_dof = 0;
  VprnmOptions options;
};

struct RomBuildSpec {
  BackboneSpec fund, super;
  VprnmSpec vprnm;
  int n = 3;
  std::vector<double> A_rom;
  int R1_dof = 0, Rn_dof = 0;
  RomOptions options;
};

struct FrcSpec {
  Discretization disc;
  ControlSpec control;
  int control_dof = 0;
  ForcingState forcing;
  std::pair<double, double> omega_range{0.8, 1.3};
  FrcOptions options;
};

struct JobSpec {
  JobKind kind = JobKind::frc;
  std::string name;
  json echo;
  FrcSpec frc;
  BackboneSpec epmc;
  VprnmSpec vprnm;
  RomBuildSpec rom;
  std::vector<std::string> bundle_paths;  // rom-eval from files
  bool rom_from_files = false;
  std::pair<double, double> eval_range{0.8, 1.3};
  int n_omega = 401;
  int decompose_n = 3;
  int decompose_mode = 0;  // 0: mode nearest n times the fundamental
  std::map<std::string, std::vector<int>> subsets;
};

struct RunConfig {
  std::string model_ref;  // builtin name or path
  std::filesystem::path base_dir;
  std::filesystem::path output_dir;
  unsigned seed = 0;
  std::vector<JobSpec> jobs;
};

inline bool is_builtin_model(const std::string& ref) { return ref == "3dof-sr" || ref == "3dof-nosr"; }

inline SystemModel resolve_model(const RunConfig& cfg) {
  if (cfg.model_ref == "3dof-sr") return build_3dof();
  if (cfg.model_ref == "3dof-nosr") return build_3dof({.variant = ThreeDofVariant::NoSR});
  std::filesystem::path p(cfg.model_ref);
  if (p.is_relative()) p = cfg.base_dir / p;
  return load_model(p.string());
}

namespace parse {

using detail::field;
using detail::integer;
using detail::number;
using detail::reject_unknown;

inline std::pair<double, double> range(const json& j, const std::string& w) {
  if (!j.is_array() || j.size() != 2) throw ParseError(w + ": expected [lo, hi]");
  std::pair<double, double> r{number(j[0], w), number(j[1], w)};
  if (!(r.first < r.second)) throw ParseError(w + ": lower bound must be below upper bound");
  return r;
}

inline std::vector<int> int_list(const json& j, const std::string& w) {
  if (!j.is_array() || j.empty()) throw ParseError(w + ": expected a non-empty integer array");
  std::vector<int> out;
  for (const auto& x : j) out.push_back(integer(x, w));
  return out;
}

inline std::vector<double> number_list(const json& j, const std::string& w) {
  if (!j.is_array() || j.empty()) throw ParseError(w + ": expected a non-empty number array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, w));
  return out;
}

inline std::string string(const json& j, const std::string& w) {
  if (!j.is_string()) throw ParseError(w + ": expected a string");
  return j.get<std::string>();
}

inline Discretization discretization(const json& j, const std::string& w, std::vector<int> default_h) {
  Discretization d;
  d.harmonics = j.contains("harmonics") ? int_list(j["harmonics"], w + ".harmonics") : std::move(default_h);
  if (j.contains("n_time")) d.n_time = integer(j["n_time"], w + ".n_time");
  return d;
}

inline void solver(const json& j, SolverOptions& o, const std::string& w) {
  reject_unknown(j, {"abs_tol", "rel_tol", "max_iter", "line_search", "jacobian_refresh_period"}, w);
  if (j.contains("abs_tol")) o.abs_tol = number(j["abs_tol"], w + ".abs_tol");
  if (j.contains("rel_tol")) o.rel_tol = number(j["rel_tol"], w + ".rel_tol");
  if (j.contains("max_iter")) o.max_iter = integer(j["max_iter"], w + ".max_iter");
  if (j.contains("line_search")) {
    if (!j["line_search"].is_boolean()) throw ParseError(w + ".line_search: expected a boolean");
    o.line_search = j["line_search"].get<bool>();
  }
  if (j.contains("jacobian_refresh_period"))
    o.jacobian_refresh_period = integer(j["jacobian_refresh_period"], w + ".jacobian_refresh_period");
  try {
    o.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(w + ": " + e.what());
  }
}

inline void continuation(const json& j, ContinuationOptions& o, const std::string& w) {
  reject_unknown(j, {"initial_step", "min_step", "max_step", "max_points", "target_corrector_iters"}, w);
  if (j.contains("initial_step")) o.initial_step = number(j["initial_step"], w + ".initial_step");
  if (j.contains("min_step")) o.min_step = number(j["min_step"], w + ".min_step");
  if (j.contains("max_step")) o.max_step = number(j["max_step"], w + ".max_step");
  if (j.contains("max_points")) o.max_points = integer(j["max_points"], w + ".max_points");
  if (j.contains("target_corrector_iters"))
    o.target_corrector_iters = integer(j["target_corrector_iters"], w + ".target_corrector_iters");
  try {
    o.validate(1);
  } catch (const InvalidArgument& e) {
    throw ParseError(w + ": " + e.what());
  }
}

inline Linearization linearization(const json& j, const std::string& w) {
  const std::string s = string(j, w);
  if (s == "stuck") return Linearization::stuck;
  if (s == "free") return Linearization::free;
  if (s == "half") return Linearization::half;
  throw ParseError(w + ": expected stuck, free or half");
}

inline void numerics(const json& j, ContinuationOptions& c, SolverOptions& s, const std::string& w) {
  if (j.contains("continuation")) continuation(j["continuation"], c, w + ".continuation");
  if (j.contains("solver")) solver(j["solver"], s, w + ".solver");
}

inline BackboneSpec backbone(const json& j, const std::string& w, int default_mode, std::vector<int> default_h) {
  reject_unknown(j, {"name", "kind", "harmonics", "n_time", "mode", "q_range", "phase_dof", "continuation", "solver"}, w);
  BackboneSpec b;
  b.disc = discretization(j, w, std::move(default_h));
  b.mode = j.contains("mode") ? integer(j["mode"], w + ".mode") : default_mode;
  if (j.contains("q_range")) b.q_range = range(j["q_range"], w + ".q_range");
  if (!(b.q_range.first > 0.0)) throw ParseError(w + ".q_range: bounds must be positive");
  if (j.contains("phase_dof")) b.options.phase_dof = integer(j["phase_dof"], w + ".phase_dof");
  numerics(j, b.options.continuation, b.options.solver, w);
  return b;
}

inline VprnmSpec vprnm(const json& j, const std::string& w) {
  reject_unknown(j, {"name", "kind", "harmonics", "n_time", "n", "variable", "range", "filter", "R1_dof",
                     "fundamental_mode", "super_mode", "continuation", "solver"},
                 w);
  VprnmSpec v;
  v.disc = discretization(j, w, {0, 1, 2, 3});
  if (j.contains("n")) v.n = integer(j["n"], w + ".n");
  if (j.contains("variable")) {
    const std::string s = string(j["variable"], w + ".variable");
    if (s == "force") v.variable = VprnmVariable::force;
    else if (s == "amplitude") v.variable = VprnmVariable::amplitude;
    else throw ParseError(w + ".variable: expected force or amplitude");
  }
  if (j.contains("range")) v.range = range(j["range"], w + ".range");
  if (j.contains("filter")) {
    const std::string s = string(j["filter"], w + ".filter");
    if (s == "modal") v.options.filter = VprnmFilter::modal;
    else if (s == "basic") v.options.filter = VprnmFilter::basic;
    else throw ParseError(w + ".filter: expected modal or basic");
  }
  if (j.contains("R1_dof")) v.R1_dof = integer(j["R1_dof"], w + ".R1_dof");
  if (j.contains("fundamental_mode")) v.options.fundamental_mode = integer(j["fundamental_mode"], w + ".fundamental_mode");
  if (j.contains("super_mode")) v.options.super_mode = integer(j["super_mode"], w + ".super_mode");
  numerics(j, v.options.continuation, v.options.solver, w);
  return v;
}

inline int dof_of(const json& j, const char* key, const std::string& w) {
  return j.contains(key) ? integer(j[key], w + "." + key) : 0;
}

inline RomBuildSpec rom_build(const json& j, const std::string& w) {
  reject_unknown(j, {"name", "kind", "fund", "super", "vprnm", "n", "A_rom", "R1_dof", "Rn_dof", "force_correction",
                     "upsample", "bundles", "omega_range", "n_omega"},
                 w);
  RomBuildSpec r;
  r.fund = backbone(j.contains("fund") ? j["fund"] : json::object(), w + ".fund", 1, {0, 1, 2});
  r.super = backbone(j.contains("super") ? j["super"] : json::object(), w + ".super", 2, {0, 1, 2, 3});
  if (!j.contains("super") || !j["super"].contains("q_range")) r.super.q_range = {1e-3, 1e2};
  json vj = j.contains("vprnm") ? j["vprnm"] : json::object();
  r.vprnm = vprnm(vj, w + ".vprnm");
  if (!vj.contains("variable")) r.vprnm.variable = VprnmVariable::amplitude;
  if (!vj.contains("range")) r.vprnm.range = {5.0, 80.0};
  if (r.vprnm.variable != VprnmVariable::amplitude)
    throw ParseError(w + ".vprnm.variable: the ROM needs the amplitude-parameterized VPRNM backbone");
  if (j.contains("n")) r.n = integer(j["n"], w + ".n");
  r.vprnm.n = r.n;
  r.A_rom = number_list(field(j, "A_rom", w), w + ".A_rom");
  r.R1_dof = dof_of(j, "R1_dof", w);
  r.Rn_dof = dof_of(j, "Rn_dof", w);
  if (j.contains("force_correction")) {
    if (!j["force_correction"].is_boolean()) throw ParseError(w + ".force_correction: expected a boolean");
    r.options.apply_force_correction = j["force_correction"].get<bool>();
  }
  if (j.contains("upsample")) r.options.upsample = integer(j["upsample"], w + ".upsample");
  return r;
}

inline ControlSpec control(const json& j, const std::string& w) {
  reject_unknown(j, {"mode", "dof", "A1", "k"}, w);
  ControlSpec c;
  const std::string m = string(field(j, "mode", w), w + ".mode");
  if (m == "constant_force") c.mode = ControlMode::ConstantForce;
  else if (m == "amplitude") c.mode = ControlMode::AmplitudeOnly;
  else if (m == "amplitude_phase") c.mode = ControlMode::AmplitudePhase;
  else throw ParseError(w + ".mode: expected constant_force, amplitude or amplitude_phase");
  if (c.mode != ControlMode::ConstantForce) {
    c.A1 = number(field(j, "A1", w), w + ".A1");
    if (!(c.A1 > 0.0)) throw ParseError(w + ".A1: must be positive");
  }
  if (j.contains("k")) c.k = integer(j["k"], w + ".k");
  if (c.k < 0 || c.k > 2) throw ParseError(w + ".k: must be 0, 1 or 2");
  return c;
}

inline FrcSpec frc(const json& j, const std::string& w, const std::vector<std::string>& extra = {}) {
  std::vector<std::string> allowed = {"name", "kind", "harmonics", "n_time", "control", "forcing", "omega_range",
                                      "guess_state", "continuation", "solver"};
  allowed.insert(allowed.end(), extra.begin(), extra.end());
  reject_unknown(j, allowed, w);
  FrcSpec f;
  f.disc = discretization(j, w, {0, 1, 2, 3});
  const json& cj = field(j, "control", w);
  f.control = control(cj, w + ".control");
  if (cj.contains("dof")) f.control_dof = integer(cj["dof"], w + ".control.dof");
  if (j.contains("forcing")) {
    const json& fj = j["forcing"];
    reject_unknown(fj, {"f_mag_c", "f_mag_s"}, w + ".forcing");
    if (fj.contains("f_mag_c")) f.forcing.f_mag_c = number(fj["f_mag_c"], w + ".forcing.f_mag_c");
    if (fj.contains("f_mag_s")) f.forcing.f_mag_s = number(fj["f_mag_s"], w + ".forcing.f_mag_s");
  } else if (f.control.mode == ControlMode::ConstantForce) {
    throw ParseError(w + ": constant_force control needs a 'forcing' block");
  }
  f.omega_range = range(field(j, "omega_range", w), w + ".omega_range");
  if (!(f.omega_range.first > 0.0)) throw ParseError(w + ".omega_range: frequencies must be positive");
  if (j.contains("guess_state")) f.options.guess_state = linearization(j["guess_state"], w + ".guess_state");
  numerics(j, f.options.continuation, f.options.solver, w);
  return f;
}

inline void check_discretization(const Discretization& d, const std::string& w) {
  try {
    HarmonicBasis b(d.harmonics, 1);
    detail::require(b.has_static(), "harmonic list must include 0");
    check_time_samples(d.n_time, b);
  } catch (const InvalidArgument& e) {
    throw ParseError(w + ": " + e.what());
  }
}

inline void check_rom(const RomBuildSpec& r, const std::string& w) {
  check_discretization(r.fund.disc, w + ".fund");
  check_discretization(r.super.disc, w + ".super");
  check_discretization(r.vprnm.disc, w + ".vprnm");
  if (std::find(r.fund.disc.harmonics.begin(), r.fund.disc.harmonics.end(), r.n) != r.fund.disc.harmonics.end())
    throw ParseError(w + ".fund.harmonics: must not contain the superharmonic order n");
  for (double a : r.A_rom)
    if (!(a > 0.0)) throw ParseError(w + ".A_rom: levels must be positive");
}

inline JobSpec job(const json& j, std::size_t index) {
  const std::string w = "jobs[" + std::to_string(index) + "]";
  if (!j.is_object()) throw ParseError(w + ": expected an object");
  JobSpec s;
  s.echo = j;
  const std::string kind = string(field(j, "kind", w), w + ".kind");
  s.name = j.contains("name") ? string(j["name"], w + ".name") : kind + "_" + std::to_string(index);
  if (s.name.empty() || s.name.find('/') != std::string::npos) throw ParseError(w + ".name: invalid job name");
  if (kind == "frc") {
    s.kind = JobKind::frc;
    s.frc = frc(j, w);
    check_discretization(s.frc.disc, w);
  } else if (kind == "epmc") {
    s.kind = JobKind::epmc;
    s.epmc = backbone(j, w, 1, {0, 1, 2});
    check_discretization(s.epmc.disc, w);
  } else if (kind == "vprnm") {
    s.kind = JobKind::vprnm;
    s.vprnm = vprnm(j, w);
    check_discretization(s.vprnm.disc, w);
  } else if (kind == "rom-build") {
    s.kind = JobKind::rom_build;
    if (j.contains("bundles") || j.contains("omega_range") || j.contains("n_omega"))
      throw ParseError(w + ": rom-build does not take bundles, omega_range or n_omega");
    s.rom = rom_build(j, w);
    check_rom(s.rom, w);
  } else if (kind == "rom-eval") {
    s.kind = JobKind::rom_eval;
    if (j.contains("bundles")) {
      reject_unknown(j, {"name", "kind", "bundles", "omega_range", "n_omega"}, w);
      s.rom_from_files = true;
      const json& b = j["bundles"];
      if (!b.is_array() || b.empty()) throw ParseError(w + ".bundles: expected a non-empty array of paths");
      for (const auto& p : b) s.bundle_paths.push_back(string(p, w + ".bundles"));
    } else {
      s.rom = rom_build(j, w);
      check_rom(s.rom, w);
    }
    s.eval_range = range(field(j, "omega_range", w), w + ".omega_range");
    if (!(s.eval_range.first > 0.0)) throw ParseError(w + ".omega_range: frequencies must be positive");
    if (j.contains("n_omega")) s.n_omega = integer(j["n_omega"], w + ".n_omega");
    if (s.n_omega < 2) throw ParseError(w + ".n_omega: need at least 2 frequencies");
  } else if (kind == "decompose") {
    s.kind = JobKind::decompose;
    s.frc = frc(j, w, {"n", "mode", "subsets"});
    check_discretization(s.frc.disc, w);
    if (j.contains("n")) s.decompose_n = integer(j["n"], w + ".n");
    if (j.contains("mode")) s.decompose_mode = integer(j["mode"], w + ".mode");
    const json& sub = field(j, "subsets", w);
    if (!sub.is_object() || sub.empty()) throw ParseError(w + ".subsets: expected an object of named slot lists");
    for (auto it = sub.begin(); it != sub.end(); ++it) {
      std::vector<int> idx;
      if (!it.value().is_array()) throw ParseError(w + ".subsets." + it.key() + ": expected an integer array");
      for (const auto& x : it.value()) idx.push_back(integer(x, w + ".subsets." + it.key()));
      s.subsets[it.key()] = idx;
    }
  } else {
    throw ParseError(w + ".kind: unknown job kind '" + kind + "'");
  }
  return s;
}

}  // namespace parse

/// Parses and validates a configuration document. Paths resolve against base_dir.
inline RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  parse::reject_unknown(j, {"model", "output_dir", "seed", "jobs"}, "config");
  RunConfig c;
  c.base_dir = base_dir;
  c.model_ref = parse::string(parse::field(j, "model", "config"), "config.model");
  const std::string out = parse::string(parse::field(j, "output_dir", "config"), "config.output_dir");
  c.output_dir = std::filesystem::path(out).is_relative() ? base_dir / out : std::filesystem::path(out);
  if (j.contains("seed")) c.seed = unsigned(parse::integer(j["seed"], "config.seed"));
  const json& jobs = parse::field(j, "jobs", "config");
  if (!jobs.is_array() || jobs.empty()) throw ParseError("config.jobs: expected a non-empty array");
  for (std::size_t i = 0; i < jobs.size(); ++i) c.jobs.push_back(parse::job(jobs[i], i));
  std::vector<std::string> names;
  for (const auto& jb : c.jobs) {
    if (std::find(names.begin(), names.end(), jb.name) != names.end())
      throw ParseError("config.jobs: duplicate job name '" + jb.name + "'");
    names.push_back(jb.name);
  }
  return c;
}

/// Model-dependent checks (DOF indices, mode numbers) run before any output is written.
inline void check_against_model(const RunConfig& c, const SystemModel& m) {
  const int N = m.num_dof();
  auto dof = [&](int d, const std::string& w) {
    if (d < 0 || d >= N) throw ParseError(w + ": DOF index " + std::to_string(d) + " out of range");
  };
  auto mode = [&](int md, const std::string& w) {
    if (md < 1 || md > N) throw ParseError(w + ": mode " + std::to_string(md) + " out of range (1-based)");
  };
  for (const auto& j : c.jobs) {
    const std::string w = "job '" + j.name + "'";
    switch (j.kind) {
      case JobKind::epmc: mode(j.epmc.mode, w); break;
      case JobKind::frc: dof(j.frc.control_dof, w + " control.dof"); break;
      case JobKind::vprnm: dof(j.vprnm.R1_dof, w + " R1_dof"); break;
      case JobKind::rom_build:
      case JobKind::rom_eval:
        if (j.rom_from_files) break;
        mode(j.rom.fund.mode, w + " fund");
        mode(j.rom.super.mode, w + " super");
        dof(j.rom.R1_dof, w + " R1_dof");
        dof(j.rom.Rn_dof, w + " Rn_dof");
        break;
      case JobKind::decompose:
        dof(j.frc.control_dof, w + " control.dof");
        for (const auto& [name, idx] : j.subsets)
          for (int i : idx)
            if (i < 0 || i >= int(m.slots.size())) throw ParseError(w + ": subset '" + name + "' has a bad slot index");
        if (j.decompose_mode != 0) mode(j.decompose_mode, w);
        break;
      default: break;
    }
  }
}

}  // namespace hbtk::cli
