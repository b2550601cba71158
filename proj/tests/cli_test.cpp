// Copyright 2026 the ztmesh authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end exercises of the installed command line, one process per call.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ztmesh/json_io.hpp"
#include "ztmesh/policy.hpp"

using namespace ztmesh;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(ZTMESH_CLI_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) {
    result.output.append(buf, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

struct Workspace {
  fs::path dir;

  Workspace() {
    dir = fs::path("cli_test_tmp");
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "workflow.json")
        << workflow_to_json(reference_workflow()).dump(2);
    std::ofstream(dir / "policy.json") << policy_to_json(reference_policy()).dump(2);
  }
  std::string file(const std::string& name) const {
    return (dir / name).string();
  }
};

}  // namespace

TEST_CASE("compile writes a policy and reports its size") {
  Workspace ws;
  const auto run = run_cli("compile --workflow " + ws.file("workflow.json") +
                           " --out " + ws.file("compiled.json"));
  CHECK(run.exit_code == 0);
  CHECK(run.output.find("8 permissions") != std::string::npos);
  CHECK(fs::exists(ws.file("compiled.json")));
  CHECK(fs::exists(ws.file("compiled.json") + ".manifest.json"));

  // Byte-identical on rerun.
  const auto first = slurp(ws.file("compiled.json"));
  CHECK(run_cli("compile --workflow " + ws.file("workflow.json") + " --out " +
                ws.file("compiled.json"))
            .exit_code == 0);
  CHECK(slurp(ws.file("compiled.json")) == first);
}

TEST_CASE("compile rejects broken inputs with exit 2") {
  Workspace ws;
  std::ofstream(ws.dir / "broken.json") << "{ not json";
  CHECK(run_cli("compile --workflow " + ws.file("broken.json") + " --out " +
                ws.file("x.json"))
            .exit_code == 2);

  std::ofstream(ws.dir / "cyclic.json") << R"({
    "owner": "O",
    "agents": [{"actor":"O","agent":"O"},{"actor":"a","agent":"A"},
               {"actor":"b","agent":"B"}],
    "edges": [{"src":"O","dst":"A"},{"src":"A","dst":"B"},{"src":"B","dst":"A"}]
  })";
  const auto run = run_cli("compile --workflow " + ws.file("cyclic.json") +
                           " --out " + ws.file("x.json"));
  CHECK(run.exit_code == 2);
  CHECK(run.output.find("cycle: A,B") != std::string::npos);
}

TEST_CASE("evaluate exit codes follow the decision") {
  Workspace ws;
  const auto allow = run_cli("evaluate --policy " + ws.file("policy.json") +
                             " --user owner --method POST --path /api/vfx-1");
  CHECK(allow.exit_code == 0);
  CHECK(allow.output.find("\"verdict\":\"allow\"") != std::string::npos);

  const auto deny = run_cli("evaluate --policy " + ws.file("policy.json") +
                            " --user owner --method GET --path /api/vfx-1");
  CHECK(deny.exit_code == 1);
  CHECK(deny.output.find("\"verdict\":\"deny\"") != std::string::npos);

  // Attribute overrides reach the decision.
  const auto via_tenure =
      run_cli("evaluate --policy " + ws.file("policy.json") +
              " --user vfx-2 --method POST --path /api/color --hour 3 "
              "--attr tenure=12");
  CHECK(via_tenure.exit_code == 0);
  const auto low_tenure =
      run_cli("evaluate --policy " + ws.file("policy.json") +
              " --user vfx-2 --method POST --path /api/color --hour 3 "
              "--attr tenure=2");
  CHECK(low_tenure.exit_code == 1);

  CHECK(run_cli("evaluate --user x --method GET --path /x").exit_code == 2);
  CHECK(run_cli("evaluate --policy " + ws.file("policy.json") +
                " --user x --method TRACE --path /x")
            .exit_code == 2);
  CHECK(run_cli("evaluate --policy " + ws.file("policy.json") +
                " --user x --method GET --path /x --hour 99")
            .exit_code == 2);
}

TEST_CASE("simulate and verify round trip") {
  Workspace ws;
  const auto sim = run_cli("simulate --workflow " + ws.file("workflow.json") +
                           " --policy " + ws.file("policy.json") +
                           " --sweep --out " + ws.file("caps.jsonl"));
  CHECK(sim.exit_code == 0);
  CHECK(fs::exists(ws.file("caps.jsonl")));
  CHECK(fs::exists(ws.file("caps.jsonl") + ".manifest.json"));

  const auto verify = run_cli("verify --policy " + ws.file("policy.json") +
                              " --captures " + ws.file("caps.jsonl") +
                              " --report " + ws.file("report.json"));
  CHECK(verify.exit_code == 0);
  CHECK(verify.output.find("compliant: 1176 checks") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(ws.file("report.json")));
  CHECK(report.at("verdict") == "compliant");
  CHECK(report.at("total_checks") == 1176);

  SUBCASE("identical seeds reproduce the capture file byte for byte") {
    CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                  " --policy " + ws.file("policy.json") +
                  " --sweep --seed 9 --out " + ws.file("a.jsonl"))
              .exit_code == 0);
    CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                  " --policy " + ws.file("policy.json") +
                  " --sweep --seed 9 --out " + ws.file("b.jsonl"))
              .exit_code == 0);
    CHECK(slurp(ws.file("a.jsonl")) == slurp(ws.file("b.jsonl")));
  }

  SUBCASE("faulted run fails verification with exit 1") {
    CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                  " --policy " + ws.file("policy.json") +
                  " --sweep --fault disable-policy:vfx-2 --out " +
                  ws.file("bad.jsonl"))
              .exit_code == 0);
    const auto manifest = nlohmann::json::parse(
        slurp(ws.file("bad.jsonl") + ".manifest.json"));
    CHECK(manifest.at("config").at("faults")[0] == "disable-policy:vfx-2");

    const auto bad = run_cli("verify --policy " + ws.file("policy.json") +
                             " --captures " + ws.file("bad.jsonl") +
                             " --report " + ws.file("bad_report.json"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("vfx-2") != std::string::npos);
  }

  SUBCASE("enforcement point and clock hour travel via the manifest") {
    CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                  " --policy " + ws.file("policy.json") +
                  " --sweep --enforcement destination --out " +
                  ws.file("dest.jsonl"))
              .exit_code == 0);
    CHECK(run_cli("verify --policy " + ws.file("policy.json") +
                  " --captures " + ws.file("dest.jsonl") + " --report " +
                  ws.file("dest_report.json"))
              .exit_code == 0);

    // At noon the off-hours rules deny different cells; expectations and
    // simulation stay in lockstep through the recorded hour.
    CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                  " --policy " + ws.file("policy.json") +
                  " --sweep --hour 12 --out " + ws.file("noon.jsonl"))
              .exit_code == 0);
    CHECK(run_cli("verify --policy " + ws.file("policy.json") +
                  " --captures " + ws.file("noon.jsonl") + " --report " +
                  ws.file("noon_report.json"))
              .exit_code == 0);
    // Mismatched hour must surface as violations.
    CHECK(run_cli("verify --policy " + ws.file("policy.json") +
                  " --captures " + ws.file("noon.jsonl") + " --hour 20" +
                  " --report " + ws.file("skew_report.json"))
              .exit_code == 1);
  }

  SUBCASE("truncated captures are an input error") {
    const auto full = slurp(ws.file("caps.jsonl"));
    std::ofstream(ws.dir / "cut.jsonl") << full.substr(0, full.size() / 2);
    // Manifest sits beside the original; the cut file has none, which is fine.
    const auto cut = run_cli("verify --policy " + ws.file("policy.json") +
                             " --captures " + ws.file("cut.jsonl") +
                             " --report " + ws.file("cut_report.json"));
    CHECK(cut.exit_code == 2);
  }
}

TEST_CASE("simulate can export the identity audit trail") {
  Workspace ws;
  CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                " --policy " + ws.file("policy.json") +
                " --sweep --identity-log " + ws.file("audit.jsonl") +
                " --out " + ws.file("c.jsonl"))
            .exit_code == 0);
  std::ifstream in(ws.file("audit.jsonl"));
  std::string line;
  int bootstraps = 0, issues = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("event") == "bootstrap") ++bootstraps;
    if (j.at("event") == "issue") ++issues;
    CHECK(j.contains("subject"));
    CHECK(j.contains("serial"));
    CHECK(j.contains("tick"));
  }
  CHECK(bootstraps == 5);  // one node per actor
  CHECK(issues == 7);      // one proxy identity per agent
}

TEST_CASE("scripted simulation") {
  Workspace ws;
  std::ofstream(ws.dir / "script.json") << R"({
    "requests": [
      {"src": "owner", "dst": "vfx-1", "method": "POST"},
      {"src": "owner", "dst": "color", "method": "POST"},
      {"src": "vfx-1", "dst": "vfx-2", "method": "POST", "path": "/api/vfx-2"}
    ]
  })";
  const auto run = run_cli("simulate --workflow " + ws.file("workflow.json") +
                           " --policy " + ws.file("policy.json") +
                           " --script " + ws.file("script.json") + " --out " +
                           ws.file("scripted.jsonl"));
  CHECK(run.exit_code == 0);
  int markers = 0;
  std::ifstream in(ws.file("scripted.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("\"marker\"") != std::string::npos) ++markers;
  }
  CHECK(markers == 3);

  CHECK(run_cli("simulate --workflow " + ws.file("workflow.json") +
                " --policy " + ws.file("policy.json") + " --sweep --script " +
                ws.file("script.json") + " --out " + ws.file("x.jsonl"))
            .exit_code == 2);
}

TEST_CASE("bench and stats pipeline") {
  Workspace ws;
  CHECK(run_cli("bench --kind startup --samples 0 --out " +
                ws.file("zero.csv"))
            .exit_code == 2);
  CHECK(run_cli("bench --kind weird --out " + ws.file("w.csv")).exit_code == 2);
  CHECK(run_cli("bench --kind startup --levels no-sidecar,banana --out " +
                ws.file("b.csv"))
            .exit_code == 2);

  const auto bench = run_cli("bench --kind startup --samples 4 --seed 5 --out " +
                             ws.file("startup.csv"));
  CHECK(bench.exit_code == 0);
  const auto ttest = run_cli("stats --kind ttest --in " +
                             ws.file("startup.csv") + " --out " +
                             ws.file("ttest.json"));
  CHECK(ttest.exit_code == 0);
  const auto report = nlohmann::json::parse(slurp(ws.file("ttest.json")));
  CHECK(report.at("result").at("df") == 2 * 4 * 7 - 2);

  std::ofstream(ws.dir / "flat.csv") << "label,value\na,1\na,2\nb,1\nb,2\n";
  const auto flat = run_cli("stats --kind ttest --in " + ws.file("flat.csv") +
                            " --out " + ws.file("flat.json"));
  CHECK(flat.exit_code == 0);
  const auto flat_report = nlohmann::json::parse(slurp(ws.file("flat.json")));
  CHECK(flat_report.at("result").at("t") == 0.0);

  const auto req = run_cli("bench --kind request --samples 2 --seed 5 --out " +
                           ws.file("req.csv"));
  CHECK(req.exit_code == 0);
  CHECK(run_cli("stats --kind anova --region intra --in " + ws.file("req.csv") +
                " --out " + ws.file("anova.json"))
            .exit_code == 0);
  CHECK(run_cli("stats --kind pairwise --region intra --in " +
                ws.file("req.csv") + " --out " + ws.file("pw.json"))
            .exit_code == 0);
}

TEST_CASE("full-scale bench defaults reproduce the reference shapes") {
  Workspace ws;
  // Startup at default sample counts: 130 deploys per pod per level.
  CHECK(run_cli("bench --kind startup --out " + ws.file("full_startup.csv"))
            .exit_code == 0);
  CHECK(run_cli("stats --kind ttest --in " + ws.file("full_startup.csv") +
                " --out " + ws.file("full_ttest.json"))
            .exit_code == 0);
  const auto ttest = nlohmann::json::parse(slurp(ws.file("full_ttest.json")));
  CHECK(ttest.at("result").at("df") == 1818);
  CHECK(std::abs(ttest.at("result").at("t").get<double>()) > 30);

  // Request durations over all five levels, 40 per communication.
  CHECK(run_cli("bench --kind request --out " + ws.file("full_req.csv"))
            .exit_code == 0);
  CHECK(run_cli("stats --kind anova --region intra --in " +
                ws.file("full_req.csv") + " --out " + ws.file("full_anova.json"))
            .exit_code == 0);
  const auto anova = nlohmann::json::parse(slurp(ws.file("full_anova.json")));
  CHECK(anova.at("result").at("df_between") == 4);
  CHECK(anova.at("result").at("df_within") == 795);
  CHECK(anova.at("result").at("p").get<double>() < 0.001);
}

TEST_CASE("stats rejects degenerate input with exit 2") {
  Workspace ws;
  std::ofstream(ws.dir / "deg.csv") << "label,value\na,2\na,2\nb,2\nb,2\n";
  CHECK(run_cli("stats --kind anova --in " + ws.file("deg.csv") + " --out " +
                ws.file("deg.json"))
            .exit_code == 2);
  std::ofstream(ws.dir / "three.csv")
      << "label,value\na,1\na,2\nb,1\nb,2\nc,3\nc,4\n";
  CHECK(run_cli("stats --kind ttest --in " + ws.file("three.csv") + " --out " +
                ws.file("t3.json"))
            .exit_code == 2);
}
