// codesign.hpp — bi-level study driver.
//
// Outer loop: CMA-ES over the four gear ratios. Inner loop: one trajectory
// solve per candidate. A study sweeps (space, payload, seed) cells, records
// per-seed generation histories, and aggregates a before/after table where
// "before" is the model file's original transmission and "after" is the best
// design seen across all evaluations of the cell (the original design
// included, so a fruitless search never reports a regression).
#pragma once

#include <atomic>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "beltopt/cmaes.hpp"
#include "beltopt/ocp.hpp"
#include "beltopt/solver.hpp"

namespace beltopt {

// Runs fn(0..count-1) on up to `jobs` threads; results must be written to
// pre-sized slots so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct StudySpec {
  std::string model_path;  // echoed into the report
  std::vector<Space> spaces = {Space::joint, Space::actuation};
  std::vector<double> payloads = {0.0, 1.0, 3.0};
  int seeds = 5;  // seed values 0..seeds-1
  CmaesConfig cmaes;
  SolverConfig solver;
  OcProblemSpec ocp;  // its space field is overridden per cell
  int jobs = 0;       // 0 = hardware concurrency

  void validate() const {
    if (seeds < 1) throw std::invalid_argument("study: seeds must be >= 1");
    for (double p : payloads) {
      if (p < 0.0) throw std::invalid_argument("study: payloads must be >= 0");
    }
    if (spaces.empty()) throw std::invalid_argument("study: at least one space required");
  }
};

// Desk-scale preset: small enough for CI, large enough to move the design.
inline StudySpec desk_study_spec(const ModelFile& mf, const std::string& model_path) {
  StudySpec s;
  s.model_path = model_path;
  s.payloads = {0.0, 1.0};
  s.seeds = 2;
  s.cmaes.lambda = 20;
  s.cmaes.generations = 10;
  s.cmaes.sigma0 = 0.3;
  s.cmaes.bounds_lo = mf.transmission.bounds_lo;
  s.cmaes.bounds_hi = mf.transmission.bounds_hi;
  s.cmaes.initial_mean = 0.5 * (mf.transmission.bounds_lo + mf.transmission.bounds_hi);
  s.ocp = default_ocp_spec();
  return s;
}

// Full-scale preset matching the reference study settings.
inline StudySpec full_study_spec(const ModelFile& mf, const std::string& model_path) {
  StudySpec s = desk_study_spec(mf, model_path);
  s.payloads = {0.0, 1.0, 3.0};
  s.seeds = 5;
  s.cmaes.lambda = 100;
  s.cmaes.generations = 30;
  return s;
}

struct EvalOutcome {
  double cost = std::numeric_limits<double>::infinity();
  bool feasible = false;
  SolveResult result;
};

// Inner evaluation of one design: rebuild the transmission (which rebuilds
// every space-dependent limit box inside the transcription), attach the
// payload, solve. All failure modes fold into feasible = false.
inline EvalOutcome evaluate_design(const Vec4& gear_ratios, Space space, double payload,
                                   const ModelFile& mf, const OcProblemSpec& ocp,
                                   const SolverConfig& solver_config) {
  EvalOutcome out;
  try {
    const TransmissionSpec trans = TransmissionSpec::from_gear_ratios(
        gear_ratios, mf.transmission.bounds_lo, mf.transmission.bounds_hi);
    const RobotModel model = mf.robot.with_payload(payload);
    OcProblemSpec spec = ocp;
    spec.space = space;
    const Nlp nlp(model, trans, spec);
    out.result = solve(nlp, initial_guess(model, trans, spec), solver_config);
    out.feasible = out.result.converged();
    if (out.feasible) out.cost = out.result.objective;
  } catch (const std::exception&) {
    out.feasible = false;
    out.result.status = SolveStatus::numerical_failure;
  }
  return out;
}

struct GenerationLogRow {
  int generation = 0;
  int eval_index = 0;  // running evaluation counter within the seed run
  Vec4 gear_ratios = Vec4::Zero();
  double fitness = 0.0;
  bool feasible = false;
};

inline std::string generation_log_csv(const std::vector<GenerationLogRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "generation,eval_index,g1,g2,g3,g4,fitness,feasible\n";
  for (const auto& r : rows) {
    os << r.generation << "," << r.eval_index;
    for (int i = 0; i < 4; ++i) os << "," << r.gear_ratios[i];
    os << "," << r.fitness << "," << (r.feasible ? 1 : 0) << "\n";
  }
  return os.str();
}

struct SeedRun {
  std::uint64_t seed = 0;
  DesignCandidate best;                    // best evaluated candidate of this run
  std::vector<double> best_per_generation; // non-increasing envelope
  std::vector<GenerationLogRow> history;
  int evaluations = 0;
};

struct CellResult {
  Space space = Space::joint;
  double payload = 0.0;
  DesignCandidate before;
  DesignCandidate after;
  std::vector<SeedRun> seed_runs;
};

struct CodesignReport {
  std::string model_path;
  StudySpec study;
  std::vector<CellResult> cells;
};

// One CMA-ES run; fitness evaluations within a generation may run in
// parallel, results land in index-addressed slots so the run is
// deterministic for a fixed seed regardless of the job count.
inline SeedRun run_codesign_seed(std::uint64_t seed, Space space, double payload,
                                 const ModelFile& mf, const StudySpec& study) {
  CmaesConfig cfg = study.cmaes;
  cfg.seed = seed;
  if (cfg.initial_mean.size() == 0) {
    cfg.initial_mean = 0.5 * (mf.transmission.bounds_lo + mf.transmission.bounds_hi);
  }
  if (cfg.bounds_lo.size() == 0) {
    cfg.bounds_lo = mf.transmission.bounds_lo;
    cfg.bounds_hi = mf.transmission.bounds_hi;
  }
  Cmaes es(cfg);

  SeedRun run;
  run.seed = seed;
  run.best.fitness = std::numeric_limits<double>::infinity();

  for (int gen = 0; gen < cfg.generations; ++gen) {
    const std::vector<VecX>& candidates = es.ask();
    std::vector<double> fitnesses(candidates.size());
    std::vector<EvalOutcome> outcomes(candidates.size());
    // plain chars: vector<bool> packs bits and is not safe for concurrent
    // per-index writes
    std::vector<char> penalized(candidates.size(), 0);

    parallel_for(static_cast<int>(candidates.size()), study.jobs, [&](int i) {
      const Vec4 g = candidates[i].head<4>();
      if (!design_within_bounds(g, cfg.bounds_lo, cfg.bounds_hi) || !design_ordering_ok(g)) {
        penalized[i] = 1;
        fitnesses[i] = cfg.penalty_value;
        return;
      }
      outcomes[i] = evaluate_design(g, space, payload, mf, study.ocp, study.solver);
      fitnesses[i] = outcomes[i].feasible ? outcomes[i].cost : cfg.penalty_value;
    });

    for (size_t i = 0; i < candidates.size(); ++i) {
      GenerationLogRow row;
      row.generation = gen;
      row.eval_index = run.evaluations++;
      row.gear_ratios = candidates[i].head<4>();
      row.fitness = fitnesses[i];
      row.feasible = !penalized[i] && outcomes[i].feasible;
      run.history.push_back(row);
      if (row.fitness < run.best.fitness ||
          (row.feasible && !run.best.feasible && row.fitness <= run.best.fitness)) {
        run.best.gear_ratios = row.gear_ratios;
        run.best.fitness = row.fitness;
        run.best.feasible = row.feasible;
        run.best.solve_status =
            penalized[i] ? "design_constraints_violated" : to_string(outcomes[i].result.status);
      }
    }
    es.tell(fitnesses);
    run.best_per_generation.push_back(run.best.fitness);
  }
  return run;
}

inline CodesignReport run_study(const ModelFile& mf, const StudySpec& study) {
  study.validate();
  CodesignReport report;
  report.model_path = study.model_path;
  report.study = study;

  for (Space space : study.spaces) {
    for (double payload : study.payloads) {
      CellResult cell;
      cell.space = space;
      cell.payload = payload;

      const Vec4 original = mf.transmission.gear_ratios;
      const EvalOutcome before =
          evaluate_design(original, space, payload, mf, study.ocp, study.solver);
      cell.before.gear_ratios = original;
      cell.before.fitness = before.feasible ? before.cost : study.cmaes.penalty_value;
      cell.before.feasible = before.feasible;
      cell.before.solve_status = to_string(before.result.status);

      cell.after = cell.before;  // the original design is always a candidate
      for (int s = 0; s < study.seeds; ++s) {
        SeedRun run = run_codesign_seed(static_cast<std::uint64_t>(s), space, payload, mf, study);
        if (run.best.feasible &&
            (!cell.after.feasible || run.best.fitness < cell.after.fitness)) {
          cell.after = run.best;
        }
        cell.seed_runs.push_back(std::move(run));
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::ordered_json candidate_to_json(const DesignCandidate& c) {
  nlohmann::ordered_json j;
  j["gear_ratios"] = {c.gear_ratios[0], c.gear_ratios[1], c.gear_ratios[2], c.gear_ratios[3]};
  j["fitness"] = c.fitness;
  j["feasible"] = c.feasible;
  j["solve_status"] = c.solve_status;
  return j;
}

inline DesignCandidate candidate_from_json(const nlohmann::json& j) {
  DesignCandidate c;
  const auto g = j.at("gear_ratios").get<std::vector<double>>();
  if (g.size() != 4) throw ParseError("candidate gear_ratios must have 4 entries");
  for (int i = 0; i < 4; ++i) c.gear_ratios[i] = g[i];
  c.fitness = j.at("fitness").get<double>();
  c.feasible = j.at("feasible").get<bool>();
  c.solve_status = j.at("solve_status").get<std::string>();
  return c;
}

inline nlohmann::ordered_json report_to_json(const CodesignReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model_path;
  nlohmann::ordered_json settings;
  settings["spaces"] = [&] {
    std::vector<std::string> v;
    for (Space s : report.study.spaces) v.push_back(to_string(s));
    return v;
  }();
  settings["payloads"] = report.study.payloads;
  settings["seeds"] = report.study.seeds;
  settings["cmaes"] = {{"lambda", report.study.cmaes.lambda},
                       {"generations", report.study.cmaes.generations},
                       {"sigma0", report.study.cmaes.sigma0},
                       {"penalty_value", report.study.cmaes.penalty_value}};
  settings["solver"] = {{"max_outer_iters", report.study.solver.max_outer_iters},
                        {"max_inner_iters", report.study.solver.max_inner_iters},
                        {"tol_constraint", report.study.solver.tol_constraint},
                        {"tol_stationarity", report.study.solver.tol_stationarity}};
  j["settings"] = settings;

  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : report.cells) {
    nlohmann::ordered_json cj;
    cj["space"] = to_string(cell.space);
    cj["payload"] = cell.payload;
    cj["before"] = candidate_to_json(cell.before);
    cj["after"] = candidate_to_json(cell.after);
    cj["seeds"] = nlohmann::ordered_json::array();
    for (const auto& run : cell.seed_runs) {
      nlohmann::ordered_json rj;
      rj["seed"] = run.seed;
      rj["best"] = candidate_to_json(run.best);
      rj["best_per_generation"] = run.best_per_generation;
      rj["evaluations"] = run.evaluations;
      rj["history"] = nlohmann::ordered_json::array();
      for (const auto& row : run.history) {
        rj["history"].push_back({row.generation, row.eval_index, row.gear_ratios[0],
                                 row.gear_ratios[1], row.gear_ratios[2], row.gear_ratios[3],
                                 row.fitness, row.feasible ? 1 : 0});
      }
      cj["seeds"].push_back(std::move(rj));
    }
    j["cells"].push_back(std::move(cj));
  }
  return j;
}

// Inverse of report_to_json over the fields the report file carries; study
// fields that are not echoed (initial mean, job count, ...) keep defaults.
inline CodesignReport report_from_json(const nlohmann::json& j) {
  CodesignReport report;
  report.model_path = j.at("model").get<std::string>();
  report.study.model_path = report.model_path;
  const auto& settings = j.at("settings");
  report.study.spaces.clear();
  for (const auto& s : settings.at("spaces")) {
    report.study.spaces.push_back(space_from_string(s.get<std::string>()));
  }
  report.study.payloads = settings.at("payloads").get<std::vector<double>>();
  report.study.seeds = settings.at("seeds").get<int>();
  const auto& cm = settings.at("cmaes");
  report.study.cmaes.lambda = cm.at("lambda").get<int>();
  report.study.cmaes.generations = cm.at("generations").get<int>();
  report.study.cmaes.sigma0 = cm.at("sigma0").get<double>();
  report.study.cmaes.penalty_value = cm.at("penalty_value").get<double>();
  const auto& sv = settings.at("solver");
  report.study.solver.max_outer_iters = sv.at("max_outer_iters").get<int>();
  report.study.solver.max_inner_iters = sv.at("max_inner_iters").get<int>();
  report.study.solver.tol_constraint = sv.at("tol_constraint").get<double>();
  report.study.solver.tol_stationarity = sv.at("tol_stationarity").get<double>();

  for (const auto& cj : j.at("cells")) {
    CellResult cell;
    cell.space = space_from_string(cj.at("space").get<std::string>());
    cell.payload = cj.at("payload").get<double>();
    cell.before = candidate_from_json(cj.at("before"));
    cell.after = candidate_from_json(cj.at("after"));
    for (const auto& rj : cj.at("seeds")) {
      SeedRun run;
      run.seed = rj.at("seed").get<std::uint64_t>();
      run.best = candidate_from_json(rj.at("best"));
      run.best_per_generation = rj.at("best_per_generation").get<std::vector<double>>();
      run.evaluations = rj.at("evaluations").get<int>();
      for (const auto& hj : rj.at("history")) {
        if (hj.size() != 8) throw ParseError("history rows must have 8 fields");
        GenerationLogRow row;
        row.generation = hj[0].get<int>();
        row.eval_index = hj[1].get<int>();
        for (int i = 0; i < 4; ++i) row.gear_ratios[i] = hj[2 + i].get<double>();
        row.fitness = hj[6].get<double>();
        row.feasible = hj[7].get<int>() != 0;
        run.history.push_back(std::move(row));
      }
      cell.seed_runs.push_back(std::move(run));
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

// Fixed-width summary table: Payload | Space | Before/After | Gear Ratios |
// Cost. Infeasible rows render as "-".
inline std::string render_table(const CodesignReport& report) {
  std::ostringstream os;
  auto gears_str = [](const Vec4& g) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << "[" << g[0] << ", " << g[1] << ", " << g[2]
      << ", " << g[3] << "]";
    return s.str();
  };
  auto cost_str = [](const DesignCandidate& c) {
    if (!c.feasible) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << c.fitness;
    return s.str();
  };
  os << std::left << std::setw(10) << "Payload" << std::setw(12) << "Space" << std::setw(8)
     << "Stage" << std::setw(28) << "Gear Ratios" << "Cost\n";
  os << std::string(66, '-') << "\n";
  for (const auto& cell : report.cells) {
    std::ostringstream pl;
    pl << cell.payload << " kg";
    const std::string space = cell.space == Space::joint ? "Joint" : "Actuation";
    os << std::left << std::setw(10) << pl.str() << std::setw(12) << space << std::setw(8)
       << "Before" << std::setw(28)
       << (cell.before.feasible ? gears_str(cell.before.gear_ratios) : "-")
       << cost_str(cell.before) << "\n";
    os << std::left << std::setw(10) << "" << std::setw(12) << "" << std::setw(8) << "After"
       << std::setw(28) << (cell.after.feasible ? gears_str(cell.after.gear_ratios) : "-")
       << cost_str(cell.after) << "\n";
  }
  return os.str();
}

}  // namespace beltopt
