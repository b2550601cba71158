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

#ifndef ZTMESH_BENCH_HPP_
#define ZTMESH_BENCH_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ztmesh/mesh.hpp"
#include "ztmesh/policy.hpp"
#include "ztmesh/workflow.hpp"

namespace ztmesh {

/// The five deployment levels of the overhead experiments: no policy
/// sidecar at all, a sidecar that allows everything by default, the minimal
/// policy enforcing the workflow, and the minimal policy padded with 100 or
/// 1000 rules that must all be evaluated.
enum class PolicyLevel : std::uint8_t {
  kNoSidecar,
  kAllAllow,
  kMinimal,
  kPlus100,
  kPlus1000,
};

/// CSV group label: "no opa", "all allow", "minimal", "+100", "+1000".
std::string level_label(PolicyLevel level);

/// CLI token: no-sidecar, all-allow, minimal, +100, +1000.
std::optional<PolicyLevel> parse_level(const std::string& token);

std::vector<PolicyLevel> all_levels();

/// One measurement. `cell` is the pod name for startup rows and
/// "intra"/"inter" for request rows.
struct BenchRow {
  std::string label;
  std::string cell;
  double value = 0;
};

/// Repeated deployments per level, recording each pod's PodScheduled->Ready
/// duration: samples_per_cell deployments x one row per pod.
std::vector<BenchRow> startup_bench(const WorkflowGraph& graph,
                                    const std::vector<PolicyLevel>& levels,
                                    int samples_per_cell, std::uint64_t seed,
                                    const SimConfig& base = {});

/// Per level: one deployment, then samples_per_cell timed POST round trips
/// over every workflow edge (the authorized communications), labeled
/// intra/inter from the pod region labels.
std::vector<BenchRow> request_bench(const WorkflowGraph& graph,
                                    const std::vector<PolicyLevel>& levels,
                                    int samples_per_cell, std::uint64_t seed,
                                    const SimConfig& base = {});

/// startup: label,pod,value; request: label,region,value.
std::string bench_rows_to_csv(const std::vector<BenchRow>& rows,
                              const std::string& cell_column);

}  // namespace ztmesh

#endif  // ZTMESH_BENCH_HPP_
