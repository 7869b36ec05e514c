// Command-line front end: design (linearize + synthesize gains), simulate
// (closed-loop runs), phase-portrait (zero-dynamics level sets) and verify
// (built-in verification suite). All commands are driven by a single JSON
// config; flags override config keys one-to-one.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icpm/design.hpp"
#include "icpm/verification.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitUnstable = 4;
constexpr int kExitDiverged = 5;

struct FlagOverrides {
  std::optional<std::string> model;
  std::optional<double> gravity;
  std::vector<double> anchor;
  std::optional<double> energy;
  std::optional<double> section;
  std::optional<int> direction;
  std::optional<std::string> mode;
  std::optional<double> mu, eps3, lambda;
  std::optional<double> qw, rw, kp, kd;
  std::optional<double> eps1, eps2;
  bool central = false;
  std::optional<double> t_end, output_dt, divergence_bound;
  std::vector<double> x0;
  std::optional<double> rel_tol, abs_tol, max_step, quad_tol;
  std::optional<int> orbit_samples;
  std::optional<double> slope;
  std::vector<double> slopes;
  std::vector<double> pp_q2, pp_q2d;
  std::optional<std::string> out_dir;
  std::optional<unsigned long> seed;
};

void add_override_flags(CLI::App* cmd, FlagOverrides& f) {
  cmd->add_option("--model", f.model, "model name (cart-pendulum | tiptoebot)");
  cmd->add_option("--gravity,--g", f.gravity, "cart-pendulum gravity override");
  cmd->add_option("--anchor", f.anchor, "orbit anchor (q2 q2d)")->expected(2);
  cmd->add_option("--energy", f.energy, "orbit energy level c_d");
  cmd->add_option("--section", f.section, "section location q2*");
  cmd->add_option("--direction", f.direction, "section direction (+1 | -1)");
  cmd->add_option("--mode", f.mode, "impulse mode (jump | high-gain)");
  cmd->add_option("--mu", f.mu, "high-gain time-scale parameter");
  cmd->add_option("--eps3", f.eps3, "high-gain velocity stop tolerance");
  cmd->add_option("--lambda", f.lambda, "high-gain rate (scalar)");
  cmd->add_option("--qw", f.qw, "LQR state weight (scalar multiple of I)");
  cmd->add_option("--rw", f.rw, "LQR input weight (scalar multiple of I)");
  cmd->add_option("--kp", f.kp, "VHC proportional gain (scalar multiple of I)");
  cmd->add_option("--kd", f.kd, "VHC derivative gain (scalar multiple of I)");
  cmd->add_option("--eps1", f.eps1, "finite-difference step for A");
  cmd->add_option("--eps2", f.eps2, "finite-difference step for B");
  cmd->add_flag("--central", f.central, "central differences for the linearization");
  cmd->add_option("--t-end", f.t_end, "simulation horizon (s)");
  cmd->add_option("--x0", f.x0, "initial state, model joint order")->expected(-1);
  cmd->add_option("--output-dt", f.output_dt, "trajectory sampling step (s)");
  cmd->add_option("--divergence-bound", f.divergence_bound, "abort when ||e(k)|| exceeds this");
  cmd->add_option("--rel-tol", f.rel_tol, "integrator relative tolerance");
  cmd->add_option("--abs-tol", f.abs_tol, "integrator absolute tolerance");
  cmd->add_option("--max-step", f.max_step, "integrator maximum step (s)");
  cmd->add_option("--quad-tol", f.quad_tol, "reduction quadrature tolerance");
  cmd->add_option("--orbit-samples", f.orbit_samples, "orbit sampling density");
  cmd->add_option("--slope", f.slope, "cart-pendulum constraint slope");
  cmd->add_option("--slopes", f.slopes, "tiptoebot constraint slopes (a1 a2)")->expected(2);
  cmd->add_option("--pp-q2", f.pp_q2, "phase portrait q2 grid (min max count)")->expected(3);
  cmd->add_option("--pp-q2d", f.pp_q2d, "phase portrait q2d grid (min max count)")->expected(3);
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--seed", f.seed, "seed for randomized checks");
}

void apply_overrides(json& cfg, const FlagOverrides& f) {
  if (f.model) cfg["model"] = *f.model;
  if (f.gravity) cfg["params"]["gravity"] = *f.gravity;
  if (!f.anchor.empty()) cfg["orbit"] = {{"anchor", f.anchor}};
  if (f.energy) cfg["orbit"] = {{"energy", *f.energy}};
  if (f.section) cfg["section"]["q2_star"] = *f.section;
  if (f.direction) cfg["section"]["direction"] = *f.direction;
  if (f.mode) cfg["impulse"]["mode"] = *f.mode;
  if (f.mu) cfg["impulse"]["mu"] = *f.mu;
  if (f.eps3) cfg["impulse"]["eps3"] = *f.eps3;
  if (f.lambda) cfg["impulse"]["lambda"] = *f.lambda;
  if (f.qw) cfg["lqr"]["q_weight"] = *f.qw;
  if (f.rw) cfg["lqr"]["r_weight"] = *f.rw;
  if (f.kp) cfg["vhc"]["kp"] = *f.kp;
  if (f.kd) cfg["vhc"]["kd"] = *f.kd;
  if (f.eps1) cfg["linearization"]["eps1"] = *f.eps1;
  if (f.eps2) cfg["linearization"]["eps2"] = *f.eps2;
  if (f.central) cfg["linearization"]["central"] = true;
  if (f.t_end) cfg["simulation"]["t_end"] = *f.t_end;
  if (f.output_dt) cfg["simulation"]["output_dt"] = *f.output_dt;
  if (f.divergence_bound) cfg["simulation"]["divergence_bound"] = *f.divergence_bound;
  if (!f.x0.empty()) cfg["simulation"]["x0"] = f.x0;
  if (f.rel_tol) cfg["integrator"]["rel_tol"] = *f.rel_tol;
  if (f.abs_tol) cfg["integrator"]["abs_tol"] = *f.abs_tol;
  if (f.max_step) cfg["integrator"]["max_step"] = *f.max_step;
  if (f.quad_tol) cfg["reduction"]["quad_tol"] = *f.quad_tol;
  if (f.orbit_samples) cfg["reduction"]["orbit_samples"] = *f.orbit_samples;
  if (f.slope) cfg["vhc"]["slope"] = *f.slope;
  if (!f.slopes.empty()) cfg["vhc"]["slopes"] = f.slopes;
  if (!f.pp_q2.empty())
    cfg["phase_portrait"]["q2"] = {f.pp_q2[0], f.pp_q2[1], static_cast<int>(f.pp_q2[2])};
  if (!f.pp_q2d.empty())
    cfg["phase_portrait"]["q2d"] = {f.pp_q2d[0], f.pp_q2d[1], static_cast<int>(f.pp_q2d[2])};
  if (f.out_dir) cfg["output_dir"] = *f.out_dir;
  if (f.seed) cfg["seed"] = *f.seed;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) icpm::fail(icpm::ErrorCode::config_error, "cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    icpm::fail(icpm::ErrorCode::config_error, std::string("config parse error: ") + e.what());
  }
  return j;
}

void report_error(const icpm::Error& e) {
  json err{{"error", icpm::to_string(e.code())}, {"message", e.what()}};
  std::cerr << err.dump() << std::endl;
}

int exit_code_for(const icpm::Error& e) {
  switch (e.code()) {
    case icpm::ErrorCode::config_error: return kExitConfig;
    case icpm::ErrorCode::orbit_escape: return kExitDiverged;
    default: return kExitNumeric;
  }
}

std::vector<std::string> trajectory_columns(const icpm::ModelBundle& model) {
  std::vector<std::string> cols{"t"};
  for (const auto& nm : model.coordinate_names) cols.push_back(nm);
  for (const auto& nm : model.coordinate_names) cols.push_back("d" + nm);
  for (int i = 1; i < model.n(); ++i) cols.push_back("rho_" + std::to_string(i));
  cols.push_back("E");
  cols.push_back("event_flag");
  return cols;
}

void write_trajectory_csv(const fs::path& path, const icpm::Experiment& ex,
                          const icpm::HybridTrajectory& traj) {
  const auto& model = ex.model;
  icpm::CsvWriter csv(path);
  for (const auto& line :
       icpm::meta_lines(ex.cfg.hash(), ex.cfg.integrator.rel_tol, ex.cfg.integrator.abs_tol,
                        ex.sim.arc.event_value_tol))
    csv.comment(line);
  csv.comment("model: " + model.name);
  csv.header(trajectory_columns(model));
  const int n = model.n();
  for (const auto& s : traj.samples) {
    icpm::Vec x = s.x;
    x(n - 1) = icpm::wrap_angle(x(n - 1));  // passive angle wrapped at the boundary
    icpm::Vec nat = model.state_to_natural(x);
    std::vector<std::string> cells;
    cells.push_back(icpm::g17(s.t));
    for (int i = 0; i < 2 * n; ++i) cells.push_back(icpm::g17(nat(i)));
    for (int i = 0; i < n - 1; ++i) cells.push_back(icpm::g17(s.rho(i)));
    cells.push_back(icpm::g17(s.energy));
    cells.push_back(std::to_string(s.event_flag));
    csv.row(cells);
  }
}

void write_events_csv(const fs::path& path, const icpm::Experiment& ex,
                      const icpm::HybridTrajectory& traj) {
  const int n = ex.model.n();
  icpm::CsvWriter csv(path);
  for (const auto& line :
       icpm::meta_lines(ex.cfg.hash(), ex.cfg.integrator.rel_tol, ex.cfg.integrator.abs_tol,
                        ex.sim.arc.event_value_tol))
    csv.comment(line);
  csv.comment("section-state ordering: active positions, active velocities, passive velocity");
  std::vector<std::string> cols{"k", "t"};
  for (int i = 1; i <= 2 * n - 1; ++i) cols.push_back("zm_" + std::to_string(i));
  for (int i = 1; i <= 2 * n - 1; ++i) cols.push_back("zp_" + std::to_string(i));
  for (int i = 1; i <= n - 1; ++i) cols.push_back("impulse_" + std::to_string(i));
  cols.insert(cols.end(), {"mode", "clamped", "burst_duration"});
  csv.header(cols);
  for (const auto& ev : traj.events) {
    std::vector<std::string> cells{std::to_string(ev.k), icpm::g17(ev.t)};
    for (int i = 0; i < 2 * n - 1; ++i) cells.push_back(icpm::g17(ev.z_minus(i)));
    for (int i = 0; i < 2 * n - 1; ++i) cells.push_back(icpm::g17(ev.z_plus(i)));
    for (int i = 0; i < n - 1; ++i) cells.push_back(icpm::g17(ev.impulse(i)));
    cells.push_back(ev.mode == icpm::ImpulseMode::jump ? "jump" : "high-gain");
    cells.push_back(ev.clamped ? "1" : "0");
    cells.push_back(icpm::g17(ev.burst_duration));
    csv.row(cells);
  }
}

int cmd_design(const json& raw_cfg) {
  icpm::ExperimentConfig cfg = icpm::parse_config(raw_cfg);
  icpm::Experiment ex = icpm::build_experiment(cfg);
  icpm::DesignOutput out =
      icpm::run_design(ex.model, ex.reduced, ex.orbit, ex.q_weight, ex.r_weight, ex.lin);

  fs::create_directories(cfg.output_dir);
  const fs::path report_path = fs::path(cfg.output_dir) / "design_report.json";
  icpm::write_json_file(report_path, icpm::design_report_json(out, cfg));

  std::cout << "model: " << ex.model.name << "\n"
            << "z_star: " << out.z_star.transpose() << "\n"
            << "spectral radius open loop:   "
            << out.lin.floquet_multipliers.cwiseAbs().maxCoeff() << "\n"
            << "spectral radius closed loop: " << out.closed_loop.spectral_radius << "\n"
            << "report: " << report_path.string() << std::endl;
  return out.closed_loop.stable ? kExitOk : kExitUnstable;
}

int cmd_simulate(const json& raw_cfg, const std::string& design_path) {
  icpm::ExperimentConfig cfg = icpm::parse_config(raw_cfg);
  icpm::Experiment ex = icpm::build_experiment(cfg);
  if (!ex.x0_internal)
    icpm::fail(icpm::ErrorCode::config_error, "simulate requires simulation.x0");

  icpm::Vec z_star;
  icpm::Mat gain;
  if (!design_path.empty()) {
    std::ifstream in(design_path);
    if (!in) icpm::fail(icpm::ErrorCode::config_error, "cannot read design report " + design_path);
    json j;
    in >> j;
    icpm::DesignArtifacts art = icpm::parse_design_report(j);
    z_star = art.z_star;
    gain = art.K;
  } else {
    icpm::DesignOutput out =
        icpm::run_design(ex.model, ex.reduced, ex.orbit, ex.q_weight, ex.r_weight, ex.lin);
    z_star = out.z_star;
    gain = out.dare.K;
  }

  fs::create_directories(cfg.output_dir);
  icpm::HybridTrajectory traj;
  std::optional<icpm::Error> sim_error;
  try {
    icpm::simulate_closed_loop(ex.model.system, ex.model.vhc, ex.model.section, gain, z_star,
                               *ex.x0_internal, cfg.t_end, ex.impulse, ex.simulate_options(),
                               traj);
  } catch (const icpm::Error& e) {
    sim_error = e;  // outputs below still carry the partial trajectory
  }

  write_trajectory_csv(fs::path(cfg.output_dir) / "trajectory.csv", ex, traj);
  write_events_csv(fs::path(cfg.output_dir) / "events.csv", ex, traj);

  icpm::OrbitSampler sampler(ex.reduced, ex.model.vhc, ex.model.n(), ex.orbit, ex.orbit_samples);
  json summary;
  summary["meta"] = icpm::meta_json(cfg.hash(), cfg.integrator.rel_tol, cfg.integrator.abs_tol,
                                    ex.sim.arc.event_value_tol);
  summary["model"] = ex.model.name;
  summary["diverged"] = traj.diverged;
  summary["t_final"] = traj.t_final;
  json e_norms = json::array();
  for (const auto& c : traj.crossings)
    e_norms.push_back(json::array({c.k, (c.z - z_star).norm()}));
  summary["e_norms"] = e_norms;
  json dist = json::array();
  double convergence_time = -1.0;
  constexpr double kConvergenceThreshold = 0.05;
  std::vector<std::pair<double, double>> dseries;
  for (const auto& s : traj.samples)
    if (s.event_flag == icpm::kSamplePlain) dseries.emplace_back(s.t, sampler.distance(s.x));
  for (auto it = dseries.rbegin(); it != dseries.rend(); ++it) {
    if (it->second < kConvergenceThreshold) convergence_time = it->first;
    else break;
  }
  for (const auto& [t, d] : dseries) dist.push_back(json::array({t, d}));
  summary["dist_to_orbit"] = dist;
  summary["convergence_time"] = convergence_time;
  if (sim_error) summary["error"] = {{"code", icpm::to_string(sim_error->code())},
                                     {"message", sim_error->what()}};
  icpm::write_json_file(fs::path(cfg.output_dir) / "summary.json", summary);

  if (sim_error) {
    report_error(*sim_error);
    return exit_code_for(*sim_error);
  }
  std::cout << "simulated " << traj.t_final << " s, " << traj.events.size() << " impulses, "
            << "outputs in " << cfg.output_dir << std::endl;
  return kExitOk;
}

int cmd_phase_portrait(const json& raw_cfg) {
  icpm::ExperimentConfig cfg = icpm::parse_config(raw_cfg);
  icpm::Experiment ex = icpm::build_experiment(cfg);

  double q2_min = ex.model.reduced_domain_lo, q2_max = ex.model.reduced_domain_hi;
  int q2_count = 101;
  double q2d_min = -4.0, q2d_max = 4.0;
  int q2d_count = 101;
  if (!cfg.phase_portrait.is_null()) {
    if (cfg.phase_portrait.contains("q2")) {
      q2_min = cfg.phase_portrait["q2"][0].get<double>();
      q2_max = cfg.phase_portrait["q2"][1].get<double>();
      q2_count = cfg.phase_portrait["q2"][2].get<int>();
    }
    if (cfg.phase_portrait.contains("q2d")) {
      q2d_min = cfg.phase_portrait["q2d"][0].get<double>();
      q2d_max = cfg.phase_portrait["q2d"][1].get<double>();
      q2d_count = cfg.phase_portrait["q2d"][2].get<int>();
    }
  }

  fs::create_directories(cfg.output_dir);
  {
    icpm::CsvWriter csv(fs::path(cfg.output_dir) / "portrait.csv");
    for (const auto& line :
         icpm::meta_lines(cfg.hash(), cfg.integrator.rel_tol, cfg.integrator.abs_tol,
                          ex.sim.arc.event_value_tol))
      csv.comment(line);
    csv.comment("model: " + ex.model.name);
    csv.comment("c_d: " + icpm::g17(ex.orbit.c_d));
    csv.comment("P_min: " + icpm::g17(ex.reduced.pmin()) +
                " P_max: " + icpm::g17(ex.reduced.pmax()));
    csv.header({"q2", "q2d", "E"});
    for (int i = 0; i < q2_count; ++i) {
      const double q2 =
          (q2_count == 1) ? q2_min : q2_min + (q2_max - q2_min) * i / (q2_count - 1);
      for (int j = 0; j < q2d_count; ++j) {
        const double q2d =
            (q2d_count == 1) ? q2d_min : q2d_min + (q2d_max - q2d_min) * j / (q2d_count - 1);
        csv.row(std::vector<double>{q2, q2d, ex.reduced.energy(q2, q2d)});
      }
    }
  }
  {
    icpm::CsvWriter csv(fs::path(cfg.output_dir) / "reduced_tables.csv");
    for (const auto& line :
         icpm::meta_lines(cfg.hash(), cfg.integrator.rel_tol, cfg.integrator.abs_tol,
                          ex.sim.arc.event_value_tol))
      csv.comment(line);
    csv.comment("model: " + ex.model.name);
    csv.header({"q2", "M", "P"});
    for (double x : ex.reduced.nodes())
      csv.row(std::vector<double>{x, ex.reduced.mass(x), ex.reduced.potential(x)});
  }
  std::cout << "portrait written to " << cfg.output_dir << std::endl;
  return kExitOk;
}

int cmd_verify(const json& raw_cfg) {
  icpm::ExperimentConfig cfg = icpm::parse_config(raw_cfg);
  std::vector<icpm::verification::CriterionResult> results =
      icpm::verification::run_all(static_cast<unsigned>(cfg.seed));

  fs::create_directories(cfg.output_dir);
  json report;
  report["meta"] = icpm::meta_json(cfg.hash(), cfg.integrator.rel_tol, cfg.integrator.abs_tol,
                                   1e-10);
  json items = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << " " << r.name << " — " << r.detail
              << std::endl;
    items.push_back(
        {{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    all_pass = all_pass && r.pass;
  }
  report["criteria"] = items;
  report["all_pass"] = all_pass;
  icpm::write_json_file(fs::path(cfg.output_dir) / "verify_report.json", report);
  std::cout << (all_pass ? "all criteria passed" : "some criteria FAILED") << std::endl;
  return all_pass ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbital stabilization toolkit: virtual constraints + impulse-controlled return maps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string design_path;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);

  FlagOverrides fd, fs_, fp, fv;
  CLI::App* design = app.add_subcommand("design", "linearize the return map and synthesize gains");
  add_override_flags(design, fd);
  CLI::App* simulate = app.add_subcommand("simulate", "run the closed loop and export data");
  add_override_flags(simulate, fs_);
  simulate->add_option("--design", design_path, "design report with z_star and K");
  CLI::App* portrait = app.add_subcommand("phase-portrait", "zero-dynamics level-set data");
  add_override_flags(portrait, fp);
  CLI::App* verify = app.add_subcommand("verify", "run the built-in verification suite");
  add_override_flags(verify, fv);

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = load_config(config_path);
    if (design->parsed()) {
      apply_overrides(cfg, fd);
      return cmd_design(cfg);
    }
    if (simulate->parsed()) {
      apply_overrides(cfg, fs_);
      return cmd_simulate(cfg, design_path);
    }
    if (portrait->parsed()) {
      apply_overrides(cfg, fp);
      return cmd_phase_portrait(cfg);
    }
    if (verify->parsed()) {
      apply_overrides(cfg, fv);
      return cmd_verify(cfg);
    }
  } catch (const icpm::Error& e) {
    report_error(e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    json err{{"error", "unexpected"}, {"message", e.what()}};
    std::cerr << err.dump() << std::endl;
    return kExitNumeric;
  }
  return kExitOk;
}
