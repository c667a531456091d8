// hbtk command line driver.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <spdlog/spdlog.h>

#include "config.hpp"

namespace fs = std::filesystem;
using namespace hbtk;
using namespace hbtk::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitTruncated = 2;
constexpr int kExitInternal = 3;
constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string level_tag(double a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", a);
  return buf;
}

json solver_json(const SolverOptions& s) {
  return {{"abs_tol", s.abs_tol},
          {"rel_tol", s.rel_tol},
          {"max_iter", s.max_iter},
          {"line_search", s.line_search},
          {"jacobian_refresh_period", s.jacobian_refresh_period}};
}

json continuation_json(const ContinuationOptions& c) {
  return {{"initial_step", c.initial_step},
          {"min_step", c.min_step},
          {"max_step", c.max_step},
          {"max_points", c.max_points},
          {"target_corrector_iters", c.target_corrector_iters}};
}

struct JobContext {
  const RunConfig& cfg;
  const SystemModel& model;
  fs::path out;
};

struct JobResult {
  bool truncated = false;
  std::string message;
  json timings = json::object();
  json extra = json::object();
  std::size_t points = 0;
};

void write_meta(const JobContext& ctx, const JobSpec& job, const JobResult& r, const json& numerics) {
  json meta;
  meta["job"] = job.name;
  meta["kind"] = to_string(job.kind);
  meta["config"] = job.echo;
  meta["model"] = ctx.model.name;
  meta["hbtk_version"] = kVersion;
  meta["seed"] = ctx.cfg.seed;
  meta["numerics"] = numerics;
  meta["timings_s"] = r.timings;
  meta["status"] = r.truncated ? "truncated" : "ok";
  meta["message"] = r.message;
  meta["points"] = r.points;
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) meta[it.key()] = it.value();
  detail::write_text_file((ctx.out / (job.name + ".meta.json")).string(), meta.dump(2) + "\n");
}

Eigen::RowVectorXd row(const SystemModel& m, int dof) { return unit_row(m.num_dof(), dof); }

HbmProblem make_problem(const SystemModel& m, const Discretization& d, JobResult& r, const char* tag = "static") {
  const auto t0 = Clock::now();
  HbmProblem p(m, HarmonicBasis(d.harmonics, m.num_dof()), d.n_time);
  r.timings[tag] = r.timings.value(tag, 0.0) + seconds_since(t0);
  return p;
}

JobResult run_frc(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  const HbmProblem p = make_problem(ctx.model, job.frc.disc, r);
  ControlSpec c = job.frc.control;
  c.R1 = row(ctx.model, job.frc.control_dof);
  const auto t0 = Clock::now();
  const FrcBranch br = frc(p, c, job.frc.forcing, job.frc.omega_range, job.frc.options);
  r.timings["continuation"] = seconds_since(t0);
  frc_table(br, p.basis(), ctx.model.labels).write((ctx.out / (job.name + ".csv")).string());
  r.truncated = br.truncated;
  r.message = br.message;
  r.points = br.points.size();
  r.extra["iterations"] = br.iterations;
  r.extra["factorizations"] = br.factorizations;
  write_meta(ctx, job, r, {{"solver", solver_json(job.frc.options.solver)},
                           {"continuation", continuation_json(job.frc.options.continuation)}});
  return r;
}

Backbone compute_backbone(const SystemModel& m, const BackboneSpec& s, JobResult& r, const std::string& tag) {
  const HbmProblem p = make_problem(m, s.disc, r);
  const auto t0 = Clock::now();
  Backbone bb = epmc_backbone(p, s.mode, s.q_range, s.options);
  r.timings[tag] = seconds_since(t0);
  if (bb.truncated) {
    r.truncated = true;
    r.message += tag + ": " + bb.message + "; ";
  }
  return bb;
}

VprnmBackbone compute_vprnm(const SystemModel& m, const VprnmSpec& s, JobResult& r, const std::string& tag) {
  const HbmProblem p = make_problem(m, s.disc, r);
  VprnmOptions o = s.options;
  o.R1 = unit_row(m.num_dof(), s.R1_dof);
  const auto t0 = Clock::now();
  VprnmBackbone bb = vprnm_backbone(p, s.n, s.variable, s.range, o);
  r.timings[tag] = seconds_since(t0);
  if (bb.truncated) {
    r.truncated = true;
    r.message += tag + ": " + bb.message + "; ";
  }
  return bb;
}

JobResult run_epmc(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  const Backbone bb = compute_backbone(ctx.model, job.epmc, r, "continuation");
  backbone_table(bb, ctx.model.labels).write((ctx.out / (job.name + ".csv")).string());
  r.points = bb.points.size();
  r.extra["iterations"] = bb.iterations;
  r.extra["factorizations"] = bb.factorizations;
  write_meta(ctx, job, r, {{"solver", solver_json(job.epmc.options.solver)},
                           {"continuation", continuation_json(job.epmc.options.continuation)}});
  return r;
}

JobResult run_vprnm(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  const VprnmBackbone bb = compute_vprnm(ctx.model, job.vprnm, r, "continuation");
  vprnm_table(bb, ctx.model.labels).write((ctx.out / (job.name + ".csv")).string());
  r.points = bb.points.size();
  r.extra["super_mode"] = bb.super_mode;
  r.extra["iterations"] = bb.iterations;
  write_meta(ctx, job, r, {{"solver", solver_json(job.vprnm.options.solver)},
                           {"continuation", continuation_json(job.vprnm.options.continuation)}});
  return r;
}

std::vector<RomBundle> build_bundles(const JobContext& ctx, const JobSpec& job, JobResult& r, bool write_tables) {
  const RomBuildSpec& s = job.rom;
  const Backbone fund = compute_backbone(ctx.model, s.fund, r, "epmc_fund");
  const Backbone super = compute_backbone(ctx.model, s.super, r, "epmc_super");
  const VprnmBackbone vb = compute_vprnm(ctx.model, s.vprnm, r, "vprnm");
  if (write_tables) {
    backbone_table(fund, ctx.model.labels).write((ctx.out / (job.name + "_fund.csv")).string());
    backbone_table(super, ctx.model.labels).write((ctx.out / (job.name + "_super.csv")).string());
    vprnm_table(vb, ctx.model.labels).write((ctx.out / (job.name + "_vprnm.csv")).string());
  }
  const auto t0 = Clock::now();
  std::vector<RomBundle> out;
  for (double A : s.A_rom)
    out.push_back(vprnm_rom_build(fund, super, vb, A, row(ctx.model, s.R1_dof), row(ctx.model, s.Rn_dof), s.n,
                                  ctx.model.F_ext, s.options));
  r.timings["rom_build"] = seconds_since(t0);
  return out;
}

JobResult run_rom_build(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  const std::vector<RomBundle> bundles = build_bundles(ctx, job, r, true);
  json files = json::array();
  for (const auto& b : bundles) {
    const std::string f = job.name + "_A" + level_tag(b.A_rom) + ".bundle.json";
    save_rom_bundle(b, (ctx.out / f).string());
    files.push_back(f);
  }
  r.points = bundles.size();
  r.extra["bundles"] = files;
  write_meta(ctx, job, r, {{"fund_solver", solver_json(job.rom.fund.options.solver)}});
  return r;
}

std::vector<double> linspace(std::pair<double, double> range, int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = range.first + (range.second - range.first) * i / (n - 1);
  return w;
}

JobResult run_rom_eval(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  std::vector<RomBundle> bundles;
  if (job.rom_from_files) {
    for (const auto& p : job.bundle_paths) {
      fs::path path(p);
      if (path.is_relative()) path = ctx.cfg.base_dir / path;
      bundles.push_back(load_rom_bundle(path.string()));
    }
  } else {
    bundles = build_bundles(ctx, job, r, false);
  }
  const std::vector<double> W = linspace(job.eval_range, job.n_omega);
  const auto t0 = Clock::now();
  std::vector<std::vector<RomResponse>> results;
  for (const auto& b : bundles) results.push_back(vprnm_rom_evaluate(b, W));
  r.timings["rom_eval"] = seconds_since(t0);
  json files = json::array();
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const std::string f = job.name + "_A" + level_tag(bundles[i].A_rom) + ".csv";
    rom_table(results[i], bundles[i].output_basis, ctx.model.labels).write((ctx.out / f).string());
    files.push_back(f);
    r.points += results[i].size();
  }
  r.extra["files"] = files;
  write_meta(ctx, job, r, json::object());
  return r;
}

JobResult run_decompose(const JobContext& ctx, const JobSpec& job) {
  JobResult r;
  const HbmProblem p = make_problem(ctx.model, job.frc.disc, r);
  ControlSpec c = job.frc.control;
  c.R1 = row(ctx.model, job.frc.control_dof);
  auto t0 = Clock::now();
  const FrcBranch br = frc(p, c, job.frc.forcing, job.frc.omega_range, job.frc.options);
  r.timings["continuation"] = seconds_since(t0);
  const int mode = job.decompose_mode ? job.decompose_mode : select_superharmonic_mode(ctx.model, 1, job.decompose_n);
  const Eigen::VectorXd psi = linear_modes(ctx.model).shapes.col(mode - 1);

  t0 = Clock::now();
  Table t;
  t.header = {"omega", "f_mag_c", "f_mag_s"};
  for (const auto& [name, idx] : job.subsets) {
    t.header.push_back("eta_" + name + "_c");
    t.header.push_back("eta_" + name + "_s");
    t.header.push_back("eta_" + name + "_mag");
  }
  for (const auto& pt : br.points) {
    std::vector<double> row = {pt.omega, pt.forcing.f_mag_c, pt.forcing.f_mag_s};
    for (const auto& [name, idx] : job.subsets) {
      const ExcitationShare e = excitation_decomposition(p, pt.X, job.decompose_n, idx, psi);
      row.insert(row.end(), {e.eta.real(), e.eta.imag(), e.magnitude});
    }
    t.rows.push_back(std::move(row));
  }
  r.timings["decomposition"] = seconds_since(t0);
  t.write((ctx.out / (job.name + ".csv")).string());
  r.truncated = br.truncated;
  r.message = br.message;
  r.points = br.points.size();
  r.extra["mode"] = mode;
  write_meta(ctx, job, r, {{"solver", solver_json(job.frc.options.solver)}});
  return r;
}

int run_config(const std::string& path) {
  RunConfig cfg;
  SystemModel model;
  try {
    const json j = detail::read_json_file(path);
    cfg = parse_config(j, fs::absolute(path).parent_path());
    model = resolve_model(cfg);
    check_against_model(cfg, model);
  } catch (const Error& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  }
  fs::create_directories(cfg.output_dir);
  const JobContext ctx{cfg, model, cfg.output_dir};
  bool truncated = false;
  for (const auto& job : cfg.jobs) {
    spdlog::info("job '{}' ({})", job.name, to_string(job.kind));
    JobResult r;
    try {
      switch (job.kind) {
        case JobKind::frc: r = run_frc(ctx, job); break;
        case JobKind::epmc: r = run_epmc(ctx, job); break;
        case JobKind::vprnm: r = run_vprnm(ctx, job); break;
        case JobKind::rom_build: r = run_rom_build(ctx, job); break;
        case JobKind::rom_eval: r = run_rom_eval(ctx, job); break;
        case JobKind::decompose: r = run_decompose(ctx, job); break;
      }
    } catch (const ParseError& e) {
      spdlog::error("job '{}': {}", job.name, e.what());
      return kExitConfig;
    } catch (const InvalidArgument& e) {
      spdlog::error("job '{}': {}", job.name, e.what());
      return kExitConfig;
    } catch (const SolverFailure& e) {
      spdlog::error("job '{}': solver failure: {}", job.name, e.what());
      return kExitTruncated;
    } catch (const SingularMatrix& e) {
      spdlog::error("job '{}': solver failure: {}", job.name, e.what());
      return kExitTruncated;
    }
    spdlog::info("job '{}': {} points{}", job.name, r.points, r.truncated ? " (truncated: " + r.message + ")" : "");
    truncated = truncated || r.truncated;
  }
  return truncated ? kExitTruncated : kExitOk;
}

// ---------------------------------------------------------------------------
// reproduce-3dof

int reproduce_3dof(const fs::path& out) {
  fs::create_directories(out);
  const SystemModel m = build_3dof();
  const Eigen::RowVectorXd R = unit_row(3, 0);
  json timing;
  bool truncated = false;
  auto note = [&](bool t, const std::string& what, const std::string& msg) {
    if (t) {
      truncated = true;
      spdlog::warn("{} truncated: {}", what, msg);
    }
  };

  auto t0 = Clock::now();
  const HbmProblem p1(m, HarmonicBasis({0, 1, 2}, 3), 1024);
  const HbmProblem p3(m, HarmonicBasis({0, 1, 2, 3}, 3), 1024);
  timing["static"] = seconds_since(t0);

  t0 = Clock::now();
  const Backbone fund = epmc_backbone(p1, 1, {1e-2, 1e3});
  timing["epmc_mode1"] = seconds_since(t0);
  note(fund.truncated, "EPMC mode 1", fund.message);
  t0 = Clock::now();
  const Backbone super = epmc_backbone(p3, 2, {1e-3, 1e2});
  timing["epmc_mode2"] = seconds_since(t0);
  note(super.truncated, "EPMC mode 2", super.message);
  backbone_table(fund, m.labels).write((out / "epmc_mode1.csv").string());
  backbone_table(super, m.labels).write((out / "epmc_mode2.csv").string());
  spdlog::info("EPMC mode 1: omega {:.4f} -> {:.4f} rad/s", fund.points.front().omega, fund.points.back().omega);
  spdlog::info("EPMC mode 2: omega {:.4f} -> {:.4f} rad/s", super.points.front().omega, super.points.back().omega);

  VprnmOptions vo;
  vo.R1 = R;
  t0 = Clock::now();
  const VprnmBackbone vf = vprnm_backbone(p3, 3, VprnmVariable::force, {0.4, 60.0}, vo);
  timing["vprnm_force"] = seconds_since(t0);
  note(vf.truncated, "VPRNM (force)", vf.message);
  t0 = Clock::now();
  const VprnmBackbone va = vprnm_backbone(p3, 3, VprnmVariable::amplitude, {5.0, 80.0}, vo);
  timing["vprnm_amplitude"] = seconds_since(t0);
  note(va.truncated, "VPRNM (amplitude)", va.message);
  vprnm_table(vf, m.labels).write((out / "vprnm_force.csv").string());
  vprnm_table(va, m.labels).write((out / "vprnm_amplitude.csv").string());

  const std::vector<double> levels = {10, 20, 30, 40, 50, 70};
  const std::vector<double> W = linspace({0.8, 1.3}, 201);
  Table cmp;
  cmp.header = {"A1", "hbm_A3_peak", "rom_A3_peak", "rel_err", "hbm_omega_peak", "rom_omega_peak", "omega_vprnm"};
  double t_hbm = 0.0, t_rom_build = 0.0, t_rom_eval = 0.0;
  for (double A : levels) {
    ControlSpec c;
    c.mode = ControlMode::AmplitudeOnly;
    c.R1 = R;
    c.A1 = A;
    t0 = Clock::now();
    const FrcBranch br = frc(p3, c, {}, {0.8, 1.3});
    t_hbm += seconds_since(t0);
    note(br.truncated, "HBM FRC A1=" + level_tag(A), br.message);
    frc_table(br, p3.basis(), m.labels).write((out / ("hbm_A" + level_tag(A) + ".csv")).string());

    RomOptions ro;
    ro.apply_force_correction = true;
    t0 = Clock::now();
    const RomBundle b = vprnm_rom_build(fund, super, va, A, R, R, 3, m.F_ext, ro);
    t_rom_build += seconds_since(t0);
    t0 = Clock::now();
    const std::vector<RomResponse> rr = vprnm_rom_evaluate(b, W);
    t_rom_eval += seconds_since(t0);
    rom_table(rr, b.output_basis, m.labels).write((out / ("rom_A" + level_tag(A) + ".csv")).string());

    double hp = 0, hw = 0, rp = 0, rw = 0;
    for (const auto& p : br.points)
      if (p.X.amplitude(3, 0) > hp) hp = p.X.amplitude(3, 0), hw = p.omega;
    for (const auto& p : rr)
      if (p.X.amplitude(3, 0) > rp) rp = p.X.amplitude(3, 0), rw = p.omega;
    cmp.rows.push_back({A, hp, rp, (rp - hp) / hp, hw, rw, b.vprnm.omega});
  }
  cmp.write((out / "comparison.csv").string());
  timing["hbm_frc_total"] = t_hbm;
  timing["rom_build_total"] = t_rom_build;
  timing["rom_eval_total"] = t_rom_eval;
  timing["speedup_eval_vs_hbm"] = t_hbm / t_rom_eval;
  detail::write_text_file((out / "timing.json").string(), timing.dump(2) + "\n");

  std::printf("%6s %12s %12s %9s\n", "A1", "HBM A3 pk", "ROM A3 pk", "rel err");
  for (const auto& rw : cmp.rows) std::printf("%6g %12.5g %12.5g %+9.4f\n", rw[0], rw[1], rw[2], rw[3]);
  std::printf("HBM FRC total %.3f s, ROM eval total %.3g s, ratio %.0f\n", t_hbm, t_rom_eval, t_hbm / t_rom_eval);
  return truncated ? kExitTruncated : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonic balance toolkit driver"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config_path;
  auto* run = app.add_subcommand("run", "Execute the jobs of a configuration file");
  run->add_option("config", config_path, "Configuration file (JSON)")->required();

  std::string out_dir = "reproduce-3dof-out";
  auto* repro = app.add_subcommand("reproduce-3dof", "Run the three-DOF benchmark pipeline");
  repro->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run) return run_config(config_path);
    return reproduce_3dof(out_dir);
  } catch (const SolverFailure& e) {
    spdlog::error("solver failure: {}", e.what());
    return kExitTruncated;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
}
