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

#include "ztmesh/bench.hpp"

#include <sstream>
#include <stdexcept>

#include "splitmix.hpp"

namespace ztmesh {

std::string level_label(PolicyLevel level) {
  switch (level) {
    case PolicyLevel::kNoSidecar: return "no opa";
    case PolicyLevel::kAllAllow: return "all allow";
    case PolicyLevel::kMinimal: return "minimal";
    case PolicyLevel::kPlus100: return "+100";
    case PolicyLevel::kPlus1000: return "+1000";
  }
  return "minimal";
}

std::optional<PolicyLevel> parse_level(const std::string& token) {
  if (token == "no-sidecar") return PolicyLevel::kNoSidecar;
  if (token == "all-allow") return PolicyLevel::kAllAllow;
  if (token == "minimal") return PolicyLevel::kMinimal;
  if (token == "+100") return PolicyLevel::kPlus100;
  if (token == "+1000") return PolicyLevel::kPlus1000;
  return std::nullopt;
}

std::vector<PolicyLevel> all_levels() {
  return {PolicyLevel::kNoSidecar, PolicyLevel::kAllAllow,
          PolicyLevel::kMinimal, PolicyLevel::kPlus100, PolicyLevel::kPlus1000};
}

namespace {

struct LevelSetup {
  PolicyDocument policy;
  SimConfig config;
};

LevelSetup level_setup(PolicyLevel level, const WorkflowGraph& graph,
                       const SimConfig& base) {
  LevelSetup setup;
  setup.config = base;
  setup.policy = compile_from_workflow(graph);
  switch (level) {
    case PolicyLevel::kNoSidecar:
      setup.config.no_policy_sidecar = true;
      break;
    case PolicyLevel::kAllAllow:
      setup.config.policy_allow_all = true;
      break;
    case PolicyLevel::kMinimal:
      break;
    case PolicyLevel::kPlus100:
      setup.policy = inflate_policy(setup.policy, 100);
      break;
    case PolicyLevel::kPlus1000:
      setup.policy = inflate_policy(setup.policy, 1000);
      break;
  }
  return setup;
}

}  // namespace

std::vector<BenchRow> startup_bench(const WorkflowGraph& graph,
                                    const std::vector<PolicyLevel>& levels,
                                    int samples_per_cell, std::uint64_t seed,
                                    const SimConfig& base) {
  if (samples_per_cell < 1) {
    throw std::invalid_argument("samples_per_cell must be positive");
  }
  std::vector<BenchRow> rows;
  for (PolicyLevel level : levels) {
    LevelSetup setup = level_setup(level, graph, base);
    const std::string label = level_label(level);
    for (int i = 0; i < samples_per_cell; ++i) {
      setup.config.seed = detail::mix64(
          seed ^ (static_cast<std::uint64_t>(level) << 32) ^
          static_cast<std::uint64_t>(i));
      Mesh mesh(graph, setup.policy, setup.config);
      for (const auto& name : mesh.pod_names()) {
        rows.push_back({label, name, mesh.pod(name).startup_duration});
      }
    }
  }
  return rows;
}

std::vector<BenchRow> request_bench(const WorkflowGraph& graph,
                                    const std::vector<PolicyLevel>& levels,
                                    int samples_per_cell, std::uint64_t seed,
                                    const SimConfig& base) {
  if (samples_per_cell < 1) {
    throw std::invalid_argument("samples_per_cell must be positive");
  }
  std::vector<BenchRow> rows;
  for (PolicyLevel level : levels) {
    LevelSetup setup = level_setup(level, graph, base);
    setup.config.seed =
        detail::mix64(seed ^ (static_cast<std::uint64_t>(level) << 40));
    Mesh mesh(graph, setup.policy, setup.config);
    const std::string label = level_label(level);
    for (int i = 0; i < samples_per_cell; ++i) {
      for (const auto& edge : graph.edges) {
        auto response =
            mesh.send(edge.src, edge.dst, Method::kPost,
                      path_for_agent(kDefaultPathTemplate, edge.dst));
        if (response.status != 201) {
          throw std::runtime_error("bench request unexpectedly denied: " +
                                   edge.src + "->" + edge.dst);
        }
        const bool intra =
            region_of(graph, edge.src) == region_of(graph, edge.dst);
        rows.push_back({label, intra ? "intra" : "inter", response.duration});
      }
    }
  }
  return rows;
}

std::string bench_rows_to_csv(const std::vector<BenchRow>& rows,
                              const std::string& cell_column) {
  std::ostringstream oss;
  oss << "label," << cell_column << ",value\n";
  oss.precision(12);
  for (const auto& row : rows) {
    oss << row.label << "," << row.cell << "," << row.value << "\n";
  }
  return oss.str();
}

}  // namespace ztmesh
