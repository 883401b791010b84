#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(BELTOPT_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string last_line(const std::string& out) {
  std::string s = out;
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  const size_t pos = s.find_last_of('\n');
  return pos == std::string::npos ? s : s.substr(pos + 1);
}

nlohmann::json summary_of(const CmdResult& r) { return nlohmann::json::parse(last_line(r.out)); }

std::string models_dir() { return BELTOPT_MODELS_DIR; }

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / "beltopt_cli_test";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  return static_cast<int>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("model-validate accepts the default model") {
  const CmdResult r = run_cli("model-validate --model " + models_dir() + "/arm4.json");
  REQUIRE(r.exit_code == 0);
  const auto j = summary_of(r);
  REQUIRE(j.at("valid").get<bool>());
  REQUIRE(j.at("n_joints").get<int>() == 4);
}

TEST_CASE("model-validate reports diagnostics for a broken model") {
  const fs::path bad = temp_dir() / "bad_model.json";
  {
    nlohmann::json j = nlohmann::json::parse(slurp(models_dir() + "/arm4.json"));
    j["links"][1]["mass"] = -0.5;
    j["transmission"]["gear_ratios"] = {3.0, 5.0, 1.0, 1.0};  // violates g2 < g1
    std::ofstream(bad) << j.dump(2);
  }
  const CmdResult r = run_cli("model-validate --model " + bad.string());
  REQUIRE(r.exit_code == 1);
  const auto j = summary_of(r);
  REQUIRE(!j.at("valid").get<bool>());
  REQUIRE(j.at("diagnostics").size() >= 2);  // both violations reported at once
}

TEST_CASE("model-validate on a missing file is a domain failure") {
  const CmdResult r = run_cli("model-validate --model /nonexistent/nope.json");
  REQUIRE(r.exit_code == 1);
  REQUIRE(!summary_of(r).at("valid").get<bool>());
}

TEST_CASE("motion in actuation space converges and respects motor limits") {
  const fs::path out = temp_dir() / "act.json";
  const CmdResult r = run_cli("motion --model " + models_dir() +
                              "/arm4.json --space actuation --payload 0 --gears 6,3,1,1 --out " +
                              out.string());
  REQUIRE(r.exit_code == 0);
  const auto j = summary_of(r);
  REQUIRE(j.at("status").get<std::string>() == "converged");
  for (const auto& t : j.at("max_motor_torque")) {
    REQUIRE(t.get<double>() <= 1.7 + 1e-9);
  }
  REQUIRE(fs::exists(out));
  REQUIRE(fs::exists(temp_dir() / "act.csv"));
  REQUIRE(count_lines(slurp(temp_dir() / "act.csv")) == 52);  // header + 51 nodes
}

TEST_CASE("motion in joint space with payload is a domain failure") {
  const fs::path out = temp_dir() / "joint_p1.json";
  const CmdResult r = run_cli("motion --model " + models_dir() +
                              "/arm4.json --space joint --payload 1 --out " + out.string());
  REQUIRE(r.exit_code == 1);
  REQUIRE(summary_of(r).at("status").get<std::string>() == "infeasible");
}

TEST_CASE("usage errors exit with code 2") {
  REQUIRE(run_cli("motion --gears 6,3,1").exit_code == 2);
  REQUIRE(run_cli("motion --gears 6,3,1,x").exit_code == 2);
  REQUIRE(run_cli("motion --space sideways").exit_code == 2);
  REQUIRE(run_cli("no-such-command").exit_code == 2);
  REQUIRE(run_cli("export --format csv --out -").exit_code == 2);  // missing --traj
  REQUIRE(run_cli("--help").exit_code == 0);
}

TEST_CASE("rollout audits a solved trajectory") {
  const fs::path out = temp_dir() / "audit_me.json";
  REQUIRE(run_cli("motion --model " + models_dir() +
                  "/arm4.json --space actuation --payload 0 --out " + out.string())
              .exit_code == 0);

  const CmdResult ok = run_cli("rollout --model " + models_dir() + "/arm4.json --traj " +
                               out.string());
  REQUIRE(ok.exit_code == 0);
  REQUIRE(summary_of(ok).at("ok").get<bool>());

  // corrupt one claimed state: the re-simulation must notice
  nlohmann::json j = nlohmann::json::parse(slurp(out));
  j["states"][10][0] = j["states"][10][0].get<double>() + 0.01;
  const fs::path corrupted = temp_dir() / "audit_me_corrupted.json";
  std::ofstream(corrupted) << j.dump();
  const CmdResult bad = run_cli("rollout --model " + models_dir() + "/arm4.json --traj " +
                                corrupted.string());
  REQUIRE(bad.exit_code == 1);
  const auto bj = summary_of(bad);
  REQUIRE(!bj.at("ok").get<bool>());
  // The audit measures against a fresh re-simulation, which may differ from the
  // stored solution by up to the solver's own rollout-deviation bound (1e-5).
  REQUIRE(bj.at("max_state_deviation").get<double>() >= 0.01 - 1e-5);

  // malformed input files are usage-level failures
  REQUIRE(run_cli("rollout --model " + models_dir() + "/arm4.json --traj " + models_dir() +
                  "/arm4.json")
              .exit_code == 2);
  REQUIRE(run_cli("rollout --model " + models_dir() + "/arm4.json --traj /nonexistent.json")
              .exit_code == 2);
}

TEST_CASE("export converts a trajectory to CSV and back-checks JSON") {
  const fs::path out = temp_dir() / "to_export.json";
  REQUIRE(run_cli("motion --model " + models_dir() +
                  "/arm4.json --space actuation --payload 0 --out " + out.string())
              .exit_code == 0);

  const fs::path csv = temp_dir() / "exported.csv";
  const CmdResult r =
      run_cli("export --traj " + out.string() + " --format csv --out " + csv.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(summary_of(r).at("nodes").get<int>() == 51);
  REQUIRE(count_lines(slurp(csv)) == 52);

  const fs::path jout = temp_dir() / "exported.json";
  REQUIRE(run_cli("export --traj " + out.string() + " --format json --out " + jout.string())
              .exit_code == 0);
  const nlohmann::json a = nlohmann::json::parse(slurp(out));
  const nlohmann::json b = nlohmann::json::parse(slurp(jout));
  REQUIRE(a.at("states") == b.at("states"));
  REQUIRE(a.at("controls") == b.at("controls"));
  REQUIRE(a.at("problem") == b.at("problem"));

  // a model file is not a trajectory: schema mismatch
  REQUIRE(run_cli("export --traj " + models_dir() + "/arm4.json --format csv --out -")
              .exit_code == 2);
}

TEST_CASE("codesign micro study is reproducible across processes") {
  const fs::path rep1 = temp_dir() / "rep1.json";
  const fs::path rep2 = temp_dir() / "rep2.json";
  const fs::path logs = temp_dir() / "logs";
  const std::string base = "codesign --model " + models_dir() +
                           "/arm4.json --space actuation --payloads 0 --seeds 1 --pop 6 "
                           "--gens 2 --jobs 1 --logs-dir " +
                           logs.string();

  const CmdResult r1 = run_cli(base + " --out " + rep1.string() + " --table");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r1.out.find("Before") != std::string::npos);
  REQUIRE(r1.out.find("After") != std::string::npos);
  const auto j = summary_of(r1);
  REQUIRE(!j.at("all_infeasible").get<bool>());
  REQUIRE(j.at("cells").size() == 1);

  const CmdResult r2 = run_cli(base + " --out " + rep2.string());
  REQUIRE(r2.exit_code == 0);
  REQUIRE(slurp(rep1) == slurp(rep2));  // byte-identical reports

  const fs::path log = logs / "log_actuation_payload0_seed0.csv";
  REQUIRE(fs::exists(log));
  REQUIRE(count_lines(slurp(log)) == 13);  // header + 2 generations x 6 candidates

  // the report subcommand re-renders the stored table
  const CmdResult rep = run_cli("report --in " + rep1.string() + " --table");
  REQUIRE(rep.exit_code == 0);
  REQUIRE(rep.out.find("Gear Ratios") != std::string::npos);
  REQUIRE(summary_of(rep).at("cells").size() == 1);
}

TEST_CASE("codesign with only structurally infeasible cells fails loudly") {
  const fs::path rep = temp_dir() / "rep_infeasible.json";
  const CmdResult r = run_cli("codesign --model " + models_dir() +
                              "/arm4.json --space joint --payloads 1 --seeds 1 --pop 6 "
                              "--gens 1 --jobs 1 --logs-dir " +
                              (temp_dir() / "logs_inf").string() + " --out " + rep.string());
  REQUIRE(r.exit_code == 1);
  REQUIRE(summary_of(r).at("all_infeasible").get<bool>());
}

TEST_CASE("report rejects malformed input") {
  REQUIRE(run_cli("report --in /nonexistent.json").exit_code == 2);
  REQUIRE(run_cli("report --in " + models_dir() + "/arm4.json").exit_code == 2);
}
