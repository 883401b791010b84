// Command-line front end: model validation, single motion solves, bi-level
// co-design studies, rollout audits, and plot-ready exports.
//
// Exit codes: 0 = success, 1 = domain failure (invalid model, infeasible or
// diverged solve, failed audit, fruitless study), 2 = usage error or a
// malformed input file handed to export/report/rollout.
//
// Every invocation that reaches a command body ends by printing a one-line
// JSON summary as the last line on stdout.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beltopt/codesign.hpp"
#include "beltopt/model.hpp"
#include "beltopt/ocp.hpp"
#include "beltopt/solver.hpp"

namespace {

using namespace beltopt;

int finish(const nlohmann::ordered_json& summary, int code) {
  std::cout << summary.dump() << "\n";
  return code;
}

Vec4 parse_gears(const std::string& text) {
  std::vector<double> vals;
  std::istringstream is(text);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    try {
      size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--gears", "'" + cell + "' is not a number");
    }
  }
  if (vals.size() != 4) {
    throw CLI::ValidationError("--gears", "expected g1,g2,g3,g4 (got " +
                                              std::to_string(vals.size()) + " values)");
  }
  return Vec4(vals[0], vals[1], vals[2], vals[3]);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::vector<double> max_motor_torques(const Trajectory& traj, const TransmissionSpec& trans) {
  VecX peak = VecX::Zero(4);
  for (int k = 0; k < traj.controls.rows(); ++k) {
    VecX motor = traj.controls.row(k);
    if (traj.space == Space::joint) motor = trans.G_inv_T * motor;
    peak = peak.cwiseMax(motor.cwiseAbs());
  }
  return {peak[0], peak[1], peak[2], peak[3]};
}

// --- model-validate ---------------------------------------------------------

int run_model_validate(const std::string& model_path) {
  nlohmann::ordered_json summary;
  summary["model"] = model_path;
  try {
    const ModelFile mf = load_model(model_path);
    double mass = 0.0;
    for (const auto& link : mf.robot.links) mass += link.mass;
    std::cout << "model OK: " << mf.robot.n_joints() << " joints, total link mass " << mass
              << " kg, gear ratios [" << mf.transmission.gear_ratios.transpose() << "]\n";
    summary["valid"] = true;
    summary["n_joints"] = mf.robot.n_joints();
    summary["diagnostics"] = nlohmann::ordered_json::array();
    return finish(summary, 0);
  } catch (const ValidationError& e) {
    summary["valid"] = false;
    auto diags = nlohmann::ordered_json::array();
    for (const auto& d : e.diagnostics) {
      std::cout << "invalid: " << d.field << ": " << d.message << "\n";
      diags.push_back({{"field", d.field}, {"message", d.message}});
    }
    summary["diagnostics"] = diags;
    return finish(summary, 1);
  } catch (const ParseError& e) {
    std::cout << "unreadable model: " << e.what() << "\n";
    summary["valid"] = false;
    summary["error"] = e.what();
    return finish(summary, 1);
  }
}

// --- motion -------------------------------------------------------------

struct MotionOpts {
  std::string model = "models/arm4.json";
  std::string space = "joint";
  double payload = 0.0;
  std::string gears;
  double T = -1.0;
  int N = -1;
  std::string integrator;
  std::string out = "trajectory.json";
  std::string csv;
  SolverConfig solver;
};

int run_motion(const MotionOpts& o) {
  const Vec4 gears = o.gears.empty() ? Vec4(Vec4::Zero()) : parse_gears(o.gears);
  nlohmann::ordered_json summary;
  try {
    const ModelFile mf = load_model(o.model);
    const TransmissionSpec trans =
        o.gears.empty() ? mf.transmission
                        : TransmissionSpec::from_gear_ratios(gears, mf.transmission.bounds_lo,
                                                             mf.transmission.bounds_hi);
    const RobotModel robot = mf.robot.with_payload(o.payload);
    OcProblemSpec spec = default_ocp_spec(space_from_string(o.space));
    if (o.T > 0.0) spec.T = o.T;
    if (o.N > 0) spec.N = o.N;
    if (!o.integrator.empty()) {
      spec.integrator = o.integrator == "rk4" ? Integrator::rk4 : Integrator::semi_implicit_euler;
    }

    const Nlp nlp(robot, trans, spec);
    const SolveResult r = solve(nlp, initial_guess(robot, trans, spec), o.solver);
    const RolloutReport audit = verify_by_rollout(robot, trans, spec, r);

    std::cout << "status: " << to_string(r.status) << "\n";
    std::cout << "cost: " << r.objective << "\n";
    const std::vector<double> peaks = max_motor_torques(r.trajectory, trans);
    auto util = nlohmann::ordered_json::array();
    for (int i = 0; i < 4; ++i) {
      const double cap = robot.tau_u_max[i];
      const double ratio = peaks[i] / cap;
      std::ostringstream line;
      line.setf(std::ios::fixed);
      line.precision(3);
      line << "motor " << (i + 1) << " peak torque " << peaks[i] << " of " << cap << " Nm ("
           << ratio * 100.0 << "% utilization)";
      std::cout << line.str() << "\n";
      util.push_back(ratio);
    }

    const std::string csv_path =
        o.csv.empty() ? std::filesystem::path(o.out).replace_extension(".csv").string() : o.csv;
    nlohmann::ordered_json traj_file = trajectory_to_json(r.trajectory, spec);
    traj_file["solve"] = solve_result_to_json(r);
    traj_file["rollout"] = rollout_report_to_json(audit);
    write_text_file(o.out, traj_file.dump(2) + "\n");
    write_text_file(csv_path, trajectory_to_csv(r.trajectory));
    std::cout << "trajectory written to " << o.out << " and " << csv_path << "\n";

    summary = solve_result_to_json(r);
    summary["rollout"] = rollout_report_to_json(audit);
    summary["max_motor_torque"] = peaks;
    summary["utilization"] = util;
    summary["trajectory"] = o.out;
    summary["csv"] = csv_path;
    return finish(summary, r.converged() ? 0 : 1);
  } catch (const CLI::ParseError&) {
    throw;  // usage problems keep their exit-2 path
  } catch (const std::exception& e) {
    std::cout << "motion failed: " << e.what() << "\n";
    summary["status"] = "error";
    summary["error"] = e.what();
    return finish(summary, 1);
  }
}

// --- codesign -----------------------------------------------------------

struct CodesignOpts {
  std::string model = "models/arm4.json";
  std::string preset = "desk";
  std::vector<std::string> spaces;
  std::vector<double> payloads;
  bool payloads_set = false;
  int seeds = -1;
  int pop = -1;
  int gens = -1;
  double sigma0 = -1.0;
  int jobs = 0;
  std::string out = "codesign_report.json";
  std::string logs_dir = "codesign_logs";
  bool table = false;
  SolverConfig solver;
};

int run_codesign(const CodesignOpts& o) {
  nlohmann::ordered_json summary;
  try {
    const ModelFile mf = load_model(o.model);
    StudySpec study =
        o.preset == "full" ? full_study_spec(mf, o.model) : desk_study_spec(mf, o.model);
    if (!o.spaces.empty()) {
      study.spaces.clear();
      for (const auto& s : o.spaces) study.spaces.push_back(space_from_string(s));
    }
    if (o.payloads_set) study.payloads = o.payloads;
    if (o.seeds > 0) study.seeds = o.seeds;
    if (o.pop > 0) study.cmaes.lambda = o.pop;
    if (o.gens > 0) study.cmaes.generations = o.gens;
    if (o.sigma0 > 0.0) study.cmaes.sigma0 = o.sigma0;
    study.jobs = o.jobs;
    study.solver = o.solver;

    const CodesignReport report = run_study(mf, study);
    write_text_file(o.out, report_to_json(report).dump(2) + "\n");

    std::filesystem::create_directories(o.logs_dir);
    std::vector<std::string> log_paths;
    for (const auto& cell : report.cells) {
      for (const auto& run : cell.seed_runs) {
        std::ostringstream name;
        name << "log_" << to_string(cell.space) << "_payload" << cell.payload << "_seed"
             << run.seed << ".csv";
        const std::string path = (std::filesystem::path(o.logs_dir) / name.str()).string();
        write_text_file(path, generation_log_csv(run.history));
        log_paths.push_back(path);
      }
    }

    if (o.table) std::cout << render_table(report);
    std::cout << "report written to " << o.out << " (" << log_paths.size()
              << " generation logs in " << o.logs_dir << ")\n";

    bool any_feasible = false;
    auto cells = nlohmann::ordered_json::array();
    for (const auto& cell : report.cells) {
      any_feasible = any_feasible || cell.after.feasible;
      nlohmann::ordered_json cj;
      cj["space"] = to_string(cell.space);
      cj["payload"] = cell.payload;
      cj["after"] = candidate_to_json(cell.after);
      cells.push_back(std::move(cj));
    }
    summary["report"] = o.out;
    summary["logs_dir"] = o.logs_dir;
    summary["cells"] = cells;
    summary["all_infeasible"] = !any_feasible;
    return finish(summary, any_feasible ? 0 : 1);
  } catch (const CLI::ParseError&) {
    throw;
  } catch (const std::exception& e) {
    std::cout << "codesign failed: " << e.what() << "\n";
    summary["status"] = "error";
    summary["error"] = e.what();
    return finish(summary, 1);
  }
}

// --- rollout ------------------------------------------------------------

struct RolloutOpts {
  std::string model = "models/arm4.json";
  std::string traj;
  double payload = 0.0;
  std::string gears;
  double tol_deviation = 1e-3;
  double tol_bounds = 1e-6;
};

int run_rollout(const RolloutOpts& o) {
  const Vec4 gears = o.gears.empty() ? Vec4(Vec4::Zero()) : parse_gears(o.gears);
  nlohmann::ordered_json summary;

  // the trajectory file is an input contract: malformed content is exit 2
  Trajectory traj;
  OcProblemSpec spec;
  try {
    const nlohmann::json j = read_json_file(o.traj);
    if (!j.contains("problem")) throw ParseError("'" + o.traj + "' lacks the problem echo");
    spec = ocp_spec_from_json(j.at("problem"));
    traj = trajectory_from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "rollout: " << e.what() << "\n";
    return 2;
  }

  try {
    const ModelFile mf = load_model(o.model);
    const TransmissionSpec trans =
        o.gears.empty() ? mf.transmission
                        : TransmissionSpec::from_gear_ratios(gears, mf.transmission.bounds_lo,
                                                             mf.transmission.bounds_hi);
    const RobotModel robot = mf.robot.with_payload(o.payload);
    const RolloutReport report = verify_by_rollout(robot, trans, spec, traj);
    const bool ok = report.max_state_deviation <= o.tol_deviation &&
                    report.max_bound_violation <= o.tol_bounds;
    std::cout << "max state deviation: " << report.max_state_deviation << "\n";
    std::cout << "max bound violation: " << report.max_bound_violation << "\n";
    std::cout << "terminal error:      " << report.terminal_error << "\n";
    std::cout << (ok ? "rollout audit passed" : "rollout audit FAILED") << "\n";
    summary = rollout_report_to_json(report);
    summary["ok"] = ok;
    return finish(summary, ok ? 0 : 1);
  } catch (const std::exception& e) {
    std::cout << "rollout failed: " << e.what() << "\n";
    summary["status"] = "error";
    summary["error"] = e.what();
    return finish(summary, 1);
  }
}

// --- export ---------------------------------------------------------------

struct ExportOpts {
  std::string traj;
  std::string format = "csv";
  std::string out;
};

int run_export(const ExportOpts& o) {
  nlohmann::ordered_json summary;
  try {
    const nlohmann::json j = read_json_file(o.traj);
    const Trajectory traj = trajectory_from_json(j);
    std::string text;
    if (o.format == "csv") {
      text = trajectory_to_csv(traj);
    } else {
      if (!j.contains("problem")) throw ParseError("'" + o.traj + "' lacks the problem echo");
      text = trajectory_to_json(traj, ocp_spec_from_json(j.at("problem"))).dump(2) + "\n";
    }
    if (o.out == "-") {
      std::cout << text;
    } else {
      write_text_file(o.out, text);
      std::cout << "wrote " << o.out << "\n";
    }
    summary["format"] = o.format;
    summary["nodes"] = traj.nodes();
    summary["out"] = o.out;
    return finish(summary, 0);
  } catch (const ParseError& e) {
    std::cerr << "export: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "export: malformed trajectory file: " << e.what() << "\n";
    return 2;
  }
}

// --- report ---------------------------------------------------------------

struct ReportOpts {
  std::string in;
  bool table = false;
};

int run_report(const ReportOpts& o) {
  nlohmann::ordered_json summary;
  CodesignReport report;
  try {
    report = report_from_json(read_json_file(o.in));
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << "\n";
    return 2;
  }
  if (o.table) std::cout << render_table(report);
  auto cells = nlohmann::ordered_json::array();
  for (const auto& cell : report.cells) {
    nlohmann::ordered_json cj;
    cj["space"] = to_string(cell.space);
    cj["payload"] = cell.payload;
    cj["before"] = candidate_to_json(cell.before);
    cj["after"] = candidate_to_json(cell.after);
    cells.push_back(std::move(cj));
  }
  summary["model"] = report.model_path;
  summary["cells"] = cells;
  return finish(summary, 0);
}

void add_solver_flags(CLI::App* cmd, SolverConfig& cfg) {
  cmd->add_option("--max-outer", cfg.max_outer_iters, "outer iteration budget");
  cmd->add_option("--max-inner", cfg.max_inner_iters, "inner iteration budget per round");
  cmd->add_option("--tol-con", cfg.tol_constraint, "equality violation tolerance");
  cmd->add_option("--tol-stat", cfg.tol_stationarity, "projected-gradient tolerance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-design toolkit for a belt-driven 4-DOF manipulator"};
  app.require_subcommand(1);
  int rc = 0;

  // model-validate
  std::string mv_model = "models/arm4.json";
  auto* mv = app.add_subcommand("model-validate", "parse and validate a model file");
  mv->add_option("--model", mv_model, "model JSON file");
  mv->callback([&] { rc = run_model_validate(mv_model); });

  // motion
  MotionOpts mo;
  auto* motion = app.add_subcommand("motion", "solve one point-to-point motion");
  motion->add_option("--model", mo.model, "model JSON file");
  motion->add_option("--space", mo.space, "problem space")
      ->check(CLI::IsMember({"joint", "actuation"}));
  motion->add_option("--payload", mo.payload, "payload mass, kg")
      ->check(CLI::NonNegativeNumber);
  motion->add_option("--gears", mo.gears, "override gear ratios g1,g2,g3,g4");
  motion->add_option("--T", mo.T, "horizon length, s");
  motion->add_option("--N", mo.N, "number of steps");
  motion->add_option("--integrator", mo.integrator, "integration scheme")
      ->check(CLI::IsMember({"semi_implicit_euler", "rk4"}));
  motion->add_option("--out", mo.out, "trajectory JSON output path");
  motion->add_option("--csv", mo.csv, "trajectory CSV output path");
  add_solver_flags(motion, mo.solver);
  motion->callback([&] { rc = run_motion(mo); });

  // codesign
  CodesignOpts co;
  auto* codesign = app.add_subcommand("codesign", "run the bi-level gear-ratio study");
  codesign->add_option("--model", co.model, "model JSON file");
  codesign->add_option("--preset", co.preset, "study scale")
      ->check(CLI::IsMember({"desk", "full"}));
  codesign->add_option("--space", co.spaces, "spaces to study (repeatable)")
      ->check(CLI::IsMember({"joint", "actuation"}));
  codesign->add_option("--payloads", co.payloads, "payload masses, kg")
      ->delimiter(',')
      ->each([&co](const std::string&) { co.payloads_set = true; });
  codesign->add_option("--seeds", co.seeds, "number of seeds (0..k-1)");
  codesign->add_option("--pop", co.pop, "population per generation");
  codesign->add_option("--gens", co.gens, "number of generations");
  codesign->add_option("--sigma0", co.sigma0, "initial step size");
  codesign->add_option("--jobs", co.jobs, "worker threads (0 = hardware)");
  codesign->add_option("--out", co.out, "report JSON output path");
  codesign->add_option("--logs-dir", co.logs_dir, "directory for generation logs");
  codesign->add_flag("--table", co.table, "print the summary table");
  add_solver_flags(codesign, co.solver);
  codesign->callback([&] { rc = run_codesign(co); });

  // rollout
  RolloutOpts ro;
  auto* rollout = app.add_subcommand("rollout", "re-simulate and audit a trajectory file");
  rollout->add_option("--model", ro.model, "model JSON file");
  rollout->add_option("--traj", ro.traj, "trajectory JSON file")->required();
  rollout->add_option("--payload", ro.payload, "payload mass, kg")
      ->check(CLI::NonNegativeNumber);
  rollout->add_option("--gears", ro.gears, "override gear ratios g1,g2,g3,g4");
  rollout->add_option("--tol-deviation", ro.tol_deviation, "max allowed state deviation");
  rollout->add_option("--tol-bounds", ro.tol_bounds, "max allowed bound violation");
  rollout->callback([&] { rc = run_rollout(ro); });

  // export
  ExportOpts eo;
  auto* exp = app.add_subcommand("export", "convert a trajectory file for plotting");
  exp->add_option("--traj", eo.traj, "trajectory JSON file")->required();
  exp->add_option("--format", eo.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  exp->add_option("--out", eo.out, "output path ('-' for stdout)")->required();
  exp->callback([&] { rc = run_export(eo); });

  // report
  ReportOpts rp;
  auto* report = app.add_subcommand("report", "render a study report");
  report->add_option("--in", rp.in, "report JSON file")->required();
  report->add_flag("--table", rp.table, "print the summary table");
  report->callback([&] { rc = run_report(rp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean; any usage problem is 2
  }
  return rc;
}
