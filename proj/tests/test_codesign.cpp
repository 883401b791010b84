#include <catch_amalgamated.hpp>

#include "beltopt/codesign.hpp"

using namespace beltopt;

namespace {

ModelFile load_default() { return load_model(std::string(BELTOPT_MODELS_DIR) + "/arm4.json"); }

// One actuation-space cell at zero payload, small enough for a unit test.
StudySpec micro_study(const ModelFile& mf) {
  StudySpec s = desk_study_spec(mf, "models/arm4.json");
  s.spaces = {Space::actuation};
  s.payloads = {0.0};
  s.seeds = 1;
  s.cmaes.lambda = 6;
  s.cmaes.generations = 2;
  s.jobs = 1;
  return s;
}

}  // namespace

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<std::atomic<int>> hits(257);
  for (auto& h : hits) h = 0;
  parallel_for(257, 4, [&](int i) { hits[i] += 1; });
  for (const auto& h : hits) REQUIRE(h == 1);
  parallel_for(3, 0, [&](int i) { hits[i] += 1; });  // jobs<=0 -> hardware default
  for (int i = 0; i < 3; ++i) REQUIRE(hits[i] == 2);
}

TEST_CASE("evaluate_design solves the original design") {
  const ModelFile mf = load_default();
  const OcProblemSpec ocp = default_ocp_spec();
  const SolverConfig solver;

  const EvalOutcome joint =
      evaluate_design(Vec4(6.0, 3.0, 1.0, 1.0), Space::joint, 0.0, mf, ocp, solver);
  REQUIRE(joint.feasible);
  REQUIRE(joint.cost > 0.0);
  REQUIRE(std::isfinite(joint.cost));

  const EvalOutcome act =
      evaluate_design(Vec4(6.0, 3.0, 1.0, 1.0), Space::actuation, 0.0, mf, ocp, solver);
  REQUIRE(act.feasible);
  REQUIRE(act.cost < joint.cost);  // motor-torque effort term is smaller by construction
}

TEST_CASE("joint space cannot hold any payload, actuation space can") {
  const ModelFile mf = load_default();
  const OcProblemSpec ocp = default_ocp_spec();
  const SolverConfig solver;

  const EvalOutcome joint =
      evaluate_design(Vec4(6.0, 3.0, 1.0, 1.0), Space::joint, 0.25, mf, ocp, solver);
  REQUIRE(!joint.feasible);

  const EvalOutcome act =
      evaluate_design(Vec4(6.0, 3.0, 1.0, 1.0), Space::actuation, 0.25, mf, ocp, solver);
  REQUIRE(act.feasible);
}

TEST_CASE("wrist torque is pinned at zero in joint space, live in actuation space") {
  const ModelFile mf = load_default();
  const OcProblemSpec ocp = default_ocp_spec();
  const SolverConfig solver;
  const Vec4 g(6.0, 3.0, 1.0, 1.0);

  const EvalOutcome joint = evaluate_design(g, Space::joint, 0.0, mf, ocp, solver);
  REQUIRE(joint.feasible);
  REQUIRE(joint.result.trajectory.controls.col(3).cwiseAbs().maxCoeff() == 0.0);

  const EvalOutcome act = evaluate_design(g, Space::actuation, 0.25, mf, ocp, solver);
  REQUIRE(act.feasible);
  double max_wrist = 0.0;
  for (int k = 0; k < act.result.trajectory.controls.rows(); ++k) {
    const VecX tau = mf.transmission.G.transpose() * VecX(act.result.trajectory.controls.row(k));
    max_wrist = std::max(max_wrist, std::abs(tau[3]));
  }
  REQUIRE(max_wrist > 0.01);  // the differential pair holds the loaded wrist
}

TEST_CASE("failure modes fold into infeasibility") {
  const ModelFile mf = load_default();
  const OcProblemSpec ocp = default_ocp_spec();
  const SolverConfig solver;
  // non-positive ratio -> transmission rejects the design
  const EvalOutcome bad =
      evaluate_design(Vec4(6.0, 3.0, 1.0, -1.0), Space::actuation, 0.0, mf, ocp, solver);
  REQUIRE(!bad.feasible);
  REQUIRE(bad.cost == std::numeric_limits<double>::infinity());
}

TEST_CASE("study specification validation") {
  const ModelFile mf = load_default();
  StudySpec s = micro_study(mf);
  s.seeds = 0;
  REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
  s = micro_study(mf);
  s.payloads = {-1.0};
  REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
  s = micro_study(mf);
  s.spaces = {};
  REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("seed run bookkeeping") {
  const ModelFile mf = load_default();
  const StudySpec s = micro_study(mf);
  const SeedRun run = run_codesign_seed(0, Space::actuation, 0.0, mf, s);

  REQUIRE(run.evaluations == 12);
  REQUIRE(run.history.size() == 12);
  REQUIRE(run.best_per_generation.size() == 2);
  for (int i = 0; i < 12; ++i) {
    REQUIRE(run.history[i].eval_index == i);
    REQUIRE(run.history[i].generation == i / 6);
    REQUIRE(std::isfinite(run.history[i].fitness));
  }
  // best-so-far envelope is non-increasing
  REQUIRE(run.best_per_generation[1] <= run.best_per_generation[0]);
  // every fitness is either a true cost or the exact penalty
  for (const auto& row : run.history) {
    if (!row.feasible) REQUIRE(row.fitness == s.cmaes.penalty_value);
    else REQUIRE(row.fitness < s.cmaes.penalty_value);
  }
  REQUIRE(run.best.fitness <= run.history.front().fitness);
}

TEST_CASE("micro study aggregates and reproduces bitwise") {
  const ModelFile mf = load_default();
  const StudySpec s = micro_study(mf);
  const CodesignReport a = run_study(mf, s);
  REQUIRE(a.cells.size() == 1);
  const CellResult& cell = a.cells[0];
  REQUIRE(cell.space == Space::actuation);
  REQUIRE(cell.before.feasible);  // the original design solves this cell
  REQUIRE(cell.after.feasible);
  REQUIRE(cell.after.fitness <= cell.before.fitness);  // original design is a candidate
  REQUIRE(design_within_bounds(cell.after.gear_ratios, Vec4(mf.transmission.bounds_lo),
                               Vec4(mf.transmission.bounds_hi)));
  REQUIRE(design_ordering_ok(cell.after.gear_ratios));

  // rerun: byte-identical report, independent of the job count
  const CodesignReport b = run_study(mf, s);
  StudySpec s4 = s;
  s4.jobs = 4;
  const CodesignReport c = run_study(mf, s4);
  const std::string da = report_to_json(a).dump(2);
  REQUIRE(da == report_to_json(b).dump(2));
  REQUIRE(da == report_to_json(c).dump(2));
}

TEST_CASE("generation log format") {
  std::vector<GenerationLogRow> rows(2);
  rows[0].generation = 0;
  rows[0].eval_index = 0;
  rows[0].gear_ratios = Vec4(6.0, 3.0, 1.0, 1.0);
  rows[0].fitness = 2.5;
  rows[0].feasible = true;
  rows[1].generation = 0;
  rows[1].eval_index = 1;
  rows[1].gear_ratios = Vec4(3.0, 5.0, 1.0, 1.0);
  rows[1].fitness = 1e6;
  rows[1].feasible = false;

  const std::string csv = generation_log_csv(rows);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "generation,eval_index,g1,g2,g3,g4,fitness,feasible");
  std::getline(is, line);
  REQUIRE(line == "0,0,6,3,1,1,2.5,1");
  std::getline(is, line);
  REQUIRE(line == "0,1,3,5,1,1,1000000,0");
  REQUIRE(!std::getline(is, line));
}

TEST_CASE("summary table renders feasible and infeasible rows") {
  CodesignReport report;
  report.model_path = "models/arm4.json";
  CellResult ok;
  ok.space = Space::actuation;
  ok.payload = 0.0;
  ok.before.gear_ratios = Vec4(6.0, 3.0, 1.0, 1.0);
  ok.before.fitness = 2.7;
  ok.before.feasible = true;
  ok.after.gear_ratios = Vec4(7.5, 3.25, 1.5, 2.0);
  ok.after.fitness = 2.5;
  ok.after.feasible = true;
  CellResult bad;
  bad.space = Space::joint;
  bad.payload = 1.0;
  bad.before.feasible = false;
  bad.after.feasible = false;
  report.cells = {ok, bad};

  const std::string table = render_table(report);
  REQUIRE(table.find("Payload") != std::string::npos);
  REQUIRE(table.find("Before") != std::string::npos);
  REQUIRE(table.find("After") != std::string::npos);
  REQUIRE(table.find("[6.00, 3.00, 1.00, 1.00]") != std::string::npos);
  REQUIRE(table.find("[7.50, 3.25, 1.50, 2.00]") != std::string::npos);
  REQUIRE(table.find("2.70") != std::string::npos);
  REQUIRE(table.find("2.50") != std::string::npos);
  REQUIRE(table.find("Joint") != std::string::npos);
  REQUIRE(table.find("Actuation") != std::string::npos);
  REQUIRE(table.find('-') != std::string::npos);

  // every line has the same column discipline: the infeasible row ends in "-"
  std::istringstream is(table);
  std::string line;
  bool joint_dash = false;
  while (std::getline(is, line)) {
    if (line.find("Joint") != std::string::npos && line.back() == '-') joint_dash = true;
  }
  REQUIRE(joint_dash);
}
