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

// Command-line front end: compile | evaluate | simulate | verify | bench |
// stats. Exit codes everywhere: 0 success / compliant / allow, 1
// domain-negative (deny, violations), 2 usage or input error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ztmesh/bench.hpp"
#include "ztmesh/harness.hpp"
#include "ztmesh/json_io.hpp"
#include "ztmesh/mesh.hpp"
#include "ztmesh/policy.hpp"
#include "ztmesh/stats.hpp"
#include "ztmesh/workflow.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ztmesh;

constexpr int kOk = 0;
constexpr int kDomainNegative = 1;
constexpr int kUsageError = 2;

// Wall-clock time appears in manifests only, never in any computation.
std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path& output_path, const std::string& subcommand,
                    json inputs, json config, std::uint64_t seed,
                    json outputs) {
  json manifest = {{"subcommand", subcommand}, {"inputs", std::move(inputs)},
                   {"config", std::move(config)}, {"seed", seed},
                   {"outputs", std::move(outputs)},
                   {"timestamp", timestamp_now()}};
  write_text_atomic(output_path.string() + ".manifest.json",
                    manifest.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> methods;
  std::istringstream iss(csv);
  std::string token;
  while (std::getline(iss, token, ',')) {
    auto m = parse_method(token);
    if (!m) throw std::runtime_error("unknown method: " + token);
    methods.push_back(*m);
  }
  if (methods.empty()) throw std::runtime_error("empty method list");
  return methods;
}

EnforcementPoint parse_enforcement(const std::string& token) {
  if (token == "source") return EnforcementPoint::kSource;
  if (token == "destination") return EnforcementPoint::kDestination;
  if (token == "both") return EnforcementPoint::kBoth;
  throw std::runtime_error("unknown enforcement point: " + token);
}

std::string enforcement_name(EnforcementPoint p) {
  switch (p) {
    case EnforcementPoint::kSource: return "source";
    case EnforcementPoint::kDestination: return "destination";
    case EnforcementPoint::kBoth: return "both";
  }
  return "source";
}

AttrValue parse_attr_value(const std::string& text) {
  if (!text.empty() &&
      text.find_first_not_of("0123456789", text[0] == '-' ? 1 : 0) ==
          std::string::npos &&
      text != "-") {
    return static_cast<std::int64_t>(std::stoll(text));
  }
  return text;
}

struct CompileArgs {
  std::string workflow_path;
  std::string out_path;
  std::string method = "POST";
  std::string path_template = kDefaultPathTemplate;
};

int cmd_compile(const CompileArgs& args) {
  WorkflowGraph graph = workflow_from_json(read_json_file(args.workflow_path));
  auto validation = validate_workflow(graph);
  if (!validation.ok()) {
    std::cerr << "workflow invalid:\n";
    for (const auto& d : validation.defects) std::cerr << "  defect: " << d << "\n";
    return kUsageError;
  }
  for (const auto& w : validation.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  auto method = parse_method(args.method);
  if (!method) {
    std::cerr << "unknown method: " << args.method << "\n";
    return kUsageError;
  }

  PolicyDocument policy =
      compile_from_workflow(graph, *method, args.path_template);
  write_text_atomic(args.out_path, policy_to_json(policy).dump(2) + "\n");
  write_manifest(args.out_path, "compile",
                 {{"workflow", args.workflow_path}},
                 {{"method", args.method}, {"path_template", args.path_template}},
                 0, {{"policy", args.out_path}});

  std::size_t permissions = 0;
  for (const auto& [_, perms] : policy.role_permissions) {
    permissions += perms.size();
  }
  std::cout << "wrote " << args.out_path << ": " << permissions
            << " permissions, " << policy.allow_rules.size()
            << " allow rules\n";
  return kOk;
}

struct EvaluateArgs {
  std::string policy_path;
  std::string user;
  std::string method = "GET";
  std::string path;
  std::vector<std::string> attrs;
  int hour = 8;
};

int cmd_evaluate(const EvaluateArgs& args) {
  PolicyDocument policy = policy_from_json(read_json_file(args.policy_path));
  auto method = parse_method(args.method);
  if (!method) {
    std::cerr << "unknown method: " << args.method << "\n";
    return kUsageError;
  }
  if (args.hour < 0 || args.hour > 23) {
    std::cerr << "hour must be within 0-23\n";
    return kUsageError;
  }
  RequestContext ctx;
  ctx.authorization_header = make_basic_credential(args.user);
  ctx.method = *method;
  ctx.path = normalize_path(args.path);
  ctx.clock_hour = args.hour;
  for (const auto& kv : args.attrs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "bad --attr, expected name=value: " << kv << "\n";
      return kUsageError;
    }
    ctx.extra_attributes[kv.substr(0, eq)] = parse_attr_value(kv.substr(eq + 1));
  }

  Decision decision = evaluate(policy, ctx);
  std::cout << decision_to_json(decision, ctx).dump() << "\n";
  return decision.verdict == Verdict::kAllow ? kOk : kDomainNegative;
}

struct SimulateArgs {
  std::string workflow_path;
  std::string policy_path;
  std::string out_path;
  std::string script_path;
  bool sweep = false;
  std::string methods = "GET,POST";
  std::string enforcement = "source";
  int hour = 8;
  bool no_policy_sidecar = false;
  bool allow_all = false;
  std::uint64_t seed = 0;
  std::vector<std::string> faults;
  std::string path_template = kDefaultPathTemplate;
  std::string identity_log_path;
};

Fault parse_fault(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::runtime_error("bad fault spec (want kind:target): " + spec);
  }
  const std::string kind = spec.substr(0, colon);
  const std::string target = spec.substr(colon + 1);
  auto comma = target.find(',');
  if (kind == "disable-policy") return DisablePolicySidecar{target};
  if (kind == "tamper") return TamperCertificate{target};
  if (comma == std::string::npos) {
    throw std::runtime_error("fault " + kind + " needs two agents: " + spec);
  }
  const std::string a = target.substr(0, comma);
  const std::string b = target.substr(comma + 1);
  if (kind == "plaintext") return PlaintextChannel{a, b};
  if (kind == "rogue") return RogueEdge{a, b};
  throw std::runtime_error("unknown fault kind: " + kind);
}

int cmd_simulate(const SimulateArgs& args) {
  if (args.sweep != args.script_path.empty()) {
    // Either both set or neither: exactly one driving mode is required.
    std::cerr << "exactly one of --sweep or --script is required\n";
    return kUsageError;
  }
  WorkflowGraph graph = workflow_from_json(read_json_file(args.workflow_path));
  PolicyDocument policy = policy_from_json(read_json_file(args.policy_path));

  SimConfig config;
  config.enforcement_point = parse_enforcement(args.enforcement);
  config.no_policy_sidecar = args.no_policy_sidecar;
  config.policy_allow_all = args.allow_all;
  config.clock_hour = args.hour;
  config.seed = args.seed;
  Mesh mesh(graph, policy, config);

  std::vector<Fault> faults;
  for (const auto& spec : args.faults) faults.push_back(parse_fault(spec));
  for (const auto& fault : faults) mesh.inject_fault(fault);

  const auto methods = parse_method_list(args.methods);
  if (args.sweep) {
    run_sweep(mesh, methods, args.path_template);
  } else {
    const json script = read_json_file(args.script_path);
    for (const auto& req : script.at("requests")) {
      const std::string src = req.at("src").get<std::string>();
      const std::string dst = req.at("dst").get<std::string>();
      auto method = parse_method(req.at("method").get<std::string>());
      if (!method) {
        throw std::runtime_error("bad method in script");
      }
      const std::string path =
          req.contains("path") ? req.at("path").get<std::string>()
                               : path_for_agent(args.path_template, dst);
      mesh.begin_case(src, dst, *method);
      try {
        mesh.send(src, dst, *method, path);
      } catch (const MeshError&) {
        // Observable failure; captured already.
      }
    }
  }

  std::ostringstream capture_text;
  write_capture_stream(capture_text, mesh.collect_captures());
  write_text_atomic(args.out_path, capture_text.str());

  if (!args.identity_log_path.empty()) {
    std::ostringstream audit_text;
    write_audit_log(audit_text, mesh.ca().audit_log());
    write_text_atomic(args.identity_log_path, audit_text.str());
  }

  json services = json::array();
  for (const auto& name : mesh.pod_names()) services.push_back(name);
  write_manifest(
      args.out_path, "simulate",
      {{"workflow", args.workflow_path}, {"policy", args.policy_path},
       {"script", args.sweep ? json(nullptr) : json(args.script_path)}},
      {{"sweep", args.sweep}, {"methods", args.methods},
       {"enforcement_point", args.enforcement}, {"clock_hour", args.hour},
       {"no_policy_sidecar", args.no_policy_sidecar},
       {"policy_allow_all", args.allow_all},
       {"path_template", args.path_template},
       {"faults", mesh.fault_manifest()}, {"services", services}},
      args.seed, {{"captures", args.out_path}});

  std::cout << "wrote " << args.out_path << ": "
            << mesh.collect_captures().size() << " capture events\n";
  return kOk;
}

struct VerifyArgs {
  std::string policy_path;
  std::string captures_path;
  std::string report_path;
  std::string enforcement;  // empty: manifest or default
  int hour = -1;            // -1: manifest or default
  std::string path_template;
};

int cmd_verify(const VerifyArgs& args) {
  PolicyDocument policy = policy_from_json(read_json_file(args.policy_path));
  std::ifstream captures_in(args.captures_path);
  if (!captures_in) {
    throw std::runtime_error("cannot open " + args.captures_path);
  }
  const auto events = read_capture_stream(captures_in);

  HarnessConfig config;
  config.enforcement = EnforcementPoint::kSource;
  config.clock_hour = 8;

  // The simulate manifest, when present, pins the sweep configuration;
  // explicit flags override it.
  const fs::path manifest_path = args.captures_path + ".manifest.json";
  std::set<std::string> services;
  if (fs::exists(manifest_path)) {
    const json manifest = read_json_file(manifest_path.string());
    const json& mconfig = manifest.at("config");
    config.enforcement =
        parse_enforcement(mconfig.value("enforcement_point", "source"));
    config.clock_hour = mconfig.value("clock_hour", 8);
    config.path_template = mconfig.value("path_template",
                                         std::string(kDefaultPathTemplate));
    for (const auto& s : mconfig.value("services", json::array())) {
      services.insert(s.get<std::string>());
    }
  }
  if (!args.enforcement.empty()) {
    config.enforcement = parse_enforcement(args.enforcement);
  }
  if (args.hour >= 0) config.clock_hour = args.hour;
  if (!args.path_template.empty()) config.path_template = args.path_template;

  std::set<Method> methods;
  for (const auto& event : events) {
    if (std::holds_alternative<CaseMarker>(event)) {
      const auto& m = std::get<CaseMarker>(event);
      services.insert(m.src);
      services.insert(m.dst);
      methods.insert(m.method);
    }
  }
  if (services.size() < 2 || methods.empty()) {
    std::cerr << "capture stream holds no usable sweep markers\n";
    return kUsageError;
  }
  config.services.assign(services.begin(), services.end());

  const auto cases = enumerate_cases(
      config.services, std::vector<Method>(methods.begin(), methods.end()));
  const auto expectations = sweep_expectations(cases, policy, config);
  VerificationReport report;
  try {
    report = verify(events, cases, expectations, config);
  } catch (const IncompleteRunError& e) {
    std::cerr << "incomplete run: " << e.what() << "\n";
    return kUsageError;
  }

  write_text_atomic(args.report_path, report_to_json(report).dump(2) + "\n");
  write_manifest(args.report_path, "verify",
                 {{"policy", args.policy_path},
                  {"captures", args.captures_path}},
                 {{"enforcement_point", enforcement_name(config.enforcement)},
                  {"clock_hour", config.clock_hour},
                  {"path_template", config.path_template}},
                 0, {{"report", args.report_path}});

  if (report.compliant()) {
    std::cout << "compliant: " << report.total_checks << " checks, 0 violations\n";
    return kOk;
  }
  std::cout << "violations: " << report.violations.size() << " of "
            << report.total_checks << " checks\n";
  for (std::size_t i = 0; i < report.violations.size() && i < 10; ++i) {
    const auto& v = report.violations[i];
    std::cout << "  " << v.comm.src << "->" << v.comm.dst << " "
              << method_name(v.comm.method) << " @ " << v.pod << "/"
              << interface_name(v.iface) << ": expected " << v.expected
              << ", observed " << v.observed << "\n";
  }
  return kDomainNegative;
}

struct BenchArgs {
  std::string kind;
  std::string levels;
  int samples = -1;
  std::uint64_t seed = 42;
  std::string out_path;
  std::string workflow_path;
};

int cmd_bench(const BenchArgs& args) {
  WorkflowGraph graph = args.workflow_path.empty()
                            ? reference_workflow()
                            : workflow_from_json(
                                  read_json_file(args.workflow_path));
  const bool startup = args.kind == "startup";
  if (!startup && args.kind != "request") {
    std::cerr << "bench kind must be startup or request\n";
    return kUsageError;
  }

  std::string levels_csv = args.levels;
  if (levels_csv.empty()) {
    levels_csv = startup ? "no-sidecar,minimal"
                         : "no-sidecar,all-allow,minimal,+100,+1000";
  }
  std::vector<PolicyLevel> levels;
  std::istringstream iss(levels_csv);
  std::string token;
  while (std::getline(iss, token, ',')) {
    auto level = parse_level(token);
    if (!level) {
      std::cerr << "unknown level: " << token << "\n";
      return kUsageError;
    }
    levels.push_back(*level);
  }
  if (args.samples != -1 && args.samples < 1) {
    std::cerr << "samples must be positive\n";
    return kUsageError;
  }
  const int samples = args.samples == -1 ? (startup ? 130 : 40) : args.samples;

  const auto rows = startup
                        ? startup_bench(graph, levels, samples, args.seed)
                        : request_bench(graph, levels, samples, args.seed);
  write_text_atomic(args.out_path,
                    bench_rows_to_csv(rows, startup ? "pod" : "region"));
  write_manifest(args.out_path, "bench",
                 {{"workflow", args.workflow_path.empty()
                                   ? json(nullptr)
                                   : json(args.workflow_path)}},
                 {{"kind", args.kind}, {"levels", levels_csv},
                  {"samples_per_cell", samples}},
                 args.seed, {{"csv", args.out_path}});
  std::cout << "wrote " << args.out_path << ": " << rows.size() << " rows\n";
  return kOk;
}

struct StatsArgs {
  std::string kind;
  std::string in_path;
  std::string out_path;
  std::string region;
  double alpha = 0.05;
};

int cmd_stats(const StatsArgs& args) {
  std::ifstream in(args.in_path);
  if (!in) throw std::runtime_error("cannot open " + args.in_path);
  const auto rows = stats::read_samples_csv(in);
  const auto groups = stats::group_by_label(rows, args.region);

  json out = {{"kind", args.kind}, {"region", args.region}};
  json group_list = json::array();
  for (const auto& g : groups) {
    const auto s = stats::describe(g);
    group_list.push_back(
        {{"label", g.label}, {"n", s.n}, {"mean", s.mean}, {"sd", s.sd}});
  }
  out["groups"] = group_list;

  if (args.kind == "ttest") {
    if (groups.size() != 2) {
      std::cerr << "ttest needs exactly two groups, got " << groups.size()
                << "\n";
      return kUsageError;
    }
    const auto r = stats::t_test(groups[0], groups[1]);
    out["result"] = {{"t", r.t}, {"df", r.df}, {"p", r.p},
                     {"cohen_d", r.cohen_d}};
  } else if (args.kind == "anova") {
    const auto r = stats::anova(groups);
    out["result"] = {{"F", r.F}, {"df_between", r.df_between},
                     {"df_within", r.df_within}, {"p", r.p},
                     {"eta_sq_partial", r.eta_sq_partial}};
  } else if (args.kind == "pairwise") {
    const auto results = stats::pairwise(groups, args.alpha);
    json list = json::array();
    for (const auto& r : results) {
      list.push_back({{"pair", {r.label_a, r.label_b}},
                      {"mean_diff", r.mean_diff}, {"t", r.t}, {"df", r.df},
                      {"p", r.p_unadjusted}, {"p_adjusted", r.p_adjusted},
                      {"significant", r.significant}});
    }
    out["result"] = list;
  } else {
    std::cerr << "stats kind must be ttest, anova or pairwise\n";
    return kUsageError;
  }

  write_text_atomic(args.out_path, out.dump(2) + "\n");
  write_manifest(args.out_path, "stats", {{"csv", args.in_path}},
                 {{"kind", args.kind}, {"region", args.region},
                  {"alpha", args.alpha}},
                 0, {{"report", args.out_path}});
  std::cout << "wrote " << args.out_path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-trust workflow mesh simulator and verifier"};
  app.require_subcommand(1);

  CompileArgs compile_args;
  auto* compile = app.add_subcommand(
      "compile", "transform a workflow DAG into a default-deny policy");
  compile->add_option("--workflow", compile_args.workflow_path)->required();
  compile->add_option("--out", compile_args.out_path)->required();
  compile->add_option("--method", compile_args.method, "permission verb");
  compile->add_option("--path-template", compile_args.path_template);

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand(
      "evaluate", "decide one request against a policy file");
  evaluate->add_option("--policy", eval_args.policy_path)->required();
  evaluate->add_option("--user", eval_args.user)->required();
  evaluate->add_option("--method", eval_args.method)->required();
  evaluate->add_option("--path", eval_args.path)->required();
  evaluate->add_option("--attr", eval_args.attrs, "name=value, repeatable");
  evaluate->add_option("--hour", eval_args.hour, "clock hour 0-23");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand(
      "simulate", "deploy the mesh and run a sweep or a scripted exchange");
  simulate->add_option("--workflow", sim_args.workflow_path)->required();
  simulate->add_option("--policy", sim_args.policy_path)->required();
  simulate->add_option("--out", sim_args.out_path)->required();
  simulate->add_flag("--sweep", sim_args.sweep, "run every (src,dst,method)");
  simulate->add_option("--script", sim_args.script_path, "scripted requests");
  simulate->add_option("--methods", sim_args.methods);
  simulate->add_option("--enforcement", sim_args.enforcement,
                       "source|destination|both");
  simulate->add_option("--hour", sim_args.hour);
  simulate->add_flag("--no-policy-sidecar", sim_args.no_policy_sidecar);
  simulate->add_flag("--allow-all", sim_args.allow_all);
  simulate->add_option("--seed", sim_args.seed);
  simulate->add_option("--fault", sim_args.faults,
                       "disable-policy:A | plaintext:A,B | rogue:S,D | "
                       "tamper:A (repeatable)");
  simulate->add_option("--path-template", sim_args.path_template);
  simulate->add_option("--identity-log", sim_args.identity_log_path,
                       "also write the CA audit trail as JSON-lines");

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand(
      "verify", "check a capture stream against policy expectations");
  verify_cmd->add_option("--policy", verify_args.policy_path)->required();
  verify_cmd->add_option("--captures", verify_args.captures_path)->required();
  verify_cmd->add_option("--report", verify_args.report_path)->required();
  verify_cmd->add_option("--enforcement", verify_args.enforcement);
  verify_cmd->add_option("--hour", verify_args.hour);
  verify_cmd->add_option("--path-template", verify_args.path_template);

  BenchArgs bench_args;
  auto* bench = app.add_subcommand(
      "bench", "overhead experiments: startup time or request duration");
  bench->add_option("--kind", bench_args.kind, "startup|request")->required();
  bench->add_option("--levels", bench_args.levels,
                    "no-sidecar,all-allow,minimal,+100,+1000");
  bench->add_option("--samples", bench_args.samples, "observations per cell");
  bench->add_option("--seed", bench_args.seed);
  bench->add_option("--out", bench_args.out_path)->required();
  bench->add_option("--workflow", bench_args.workflow_path,
                    "defaults to the built-in reference workflow");

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand(
      "stats", "t-test / ANOVA / pairwise analysis of a bench CSV");
  stats_cmd->add_option("--kind", stats_args.kind, "ttest|anova|pairwise")
      ->required();
  stats_cmd->add_option("--in", stats_args.in_path)->required();
  stats_cmd->add_option("--out", stats_args.out_path)->required();
  stats_cmd->add_option("--region", stats_args.region, "intra|inter filter");
  stats_cmd->add_option("--alpha", stats_args.alpha);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kUsageError;
  }

  try {
    if (compile->parsed()) return cmd_compile(compile_args);
    if (evaluate->parsed()) return cmd_evaluate(eval_args);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (stats_cmd->parsed()) return cmd_stats(stats_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
