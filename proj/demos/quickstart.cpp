// Quickstart tour of the library: load the default arm, inspect the
// transmission-mapped limit boxes, solve the point-to-point motion in both
// problem spaces, audit the result by open-loop rollout, and run a very
// small co-design study.
//
//   ./build/demos/quickstart [path/to/model.json]
#include <cstdio>

#include "beltopt/codesign.hpp"
#include "beltopt/model.hpp"
#include "beltopt/ocp.hpp"
#include "beltopt/solver.hpp"

using namespace beltopt;

int main(int argc, char** argv) {
  const std::string model_path = argc > 1 ? argv[1] : std::string(BELTOPT_MODELS_DIR) + "/arm4.json";
  const ModelFile mf = load_model(model_path);
  std::printf("loaded %s: %d joints, gear ratios [%g, %g, %g, %g]\n\n", model_path.c_str(),
              mf.robot.n_joints(), mf.transmission.gear_ratios[0], mf.transmission.gear_ratios[1],
              mf.transmission.gear_ratios[2], mf.transmission.gear_ratios[3]);

  // The motor boxes map into joint space as plain matrix-vector products.
  // Note the collapsed wrist rows: the differential pair cancels out.
  const JointLimitBoxes boxes =
      joint_limits_from_actuation(mf.transmission.G, mf.robot.tau_u_min, mf.robot.tau_u_max,
                                  mf.robot.qd_u_min, mf.robot.qd_u_max);
  std::printf("joint torque box    ");
  for (int i = 0; i < 4; ++i) std::printf(" [%7.3f, %6.3f]", boxes.tau_min[i], boxes.tau_max[i]);
  std::printf("\njoint velocity box  ");
  for (int i = 0; i < 4; ++i) std::printf(" [%7.3f, %6.3f]", boxes.qd_min[i], boxes.qd_max[i]);
  std::printf("\n\n");

  // The same rest-to-rest swing, posed in each space.
  for (Space space : {Space::joint, Space::actuation}) {
    const OcProblemSpec spec = default_ocp_spec(space);
    const SolveResult r = solve(mf.robot, mf.transmission, spec);
    const RolloutReport audit = verify_by_rollout(mf.robot, mf.transmission, spec, r);
    std::printf("%-9s space: %s, cost %.4f, %d inner iterations, rollout deviation %.2e\n",
                to_string(space).c_str(), to_string(r.status).c_str(), r.objective, r.iterations,
                audit.max_state_deviation);
  }

  // A deliberately tiny co-design study; see the codesign CLI subcommand for
  // the desk and full presets.
  StudySpec study = desk_study_spec(mf, model_path);
  study.spaces = {Space::actuation};
  study.payloads = {0.0};
  study.seeds = 1;
  study.cmaes.lambda = 8;
  study.cmaes.generations = 3;
  const CodesignReport report = run_study(mf, study);
  std::printf("\nmicro study (lambda 8, 3 generations):\n%s", render_table(report).c_str());
  return 0;
}
