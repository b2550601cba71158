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

#ifndef ZTMESH_WORKFLOW_HPP_
#define ZTMESH_WORKFLOW_HPP_

#include <compare>
#include <map>
#include <string>
#include <vector>

namespace ztmesh {

/// One worker (human or automated service) acting for an actor. `actor` is
/// the organization name ("vfx"), `name` the agent's canonical name
/// ("vfx-2"). Single-agent actors typically use the same string for both.
struct AgentId {
  std::string actor;
  std::string name;

  auto operator<=>(const AgentId&) const = default;
};

struct WorkflowEdge {
  std::string src;  // agent names
  std::string dst;

  auto operator<=>(const WorkflowEdge&) const = default;
};

/// Owner-defined data flow: a DAG of agents. Edge order in `edges` is
/// whatever the author wrote; the canonical numbering comes from
/// number_edges(). Immutable by convention once validated.
struct WorkflowGraph {
  AgentId owner;
  std::vector<AgentId> agents;
  std::vector<WorkflowEdge> edges;
  std::map<std::string, std::string> metadata;
};

/// Defects are violated invariants (graph unusable); warnings are
/// suspicious but legal shapes (e.g. data never returns to the owner).
struct ValidationResult {
  std::vector<std::string> defects;
  std::vector<std::string> warnings;

  bool ok() const { return defects.empty(); }
};

struct NumberedEdge {
  int index;  // 1-based
  std::string src;
  std::string dst;

  auto operator<=>(const NumberedEdge&) const = default;
};

/// Checks every graph invariant: non-empty unique agent names, owner
/// membership, no self-loops or duplicate edges, acyclicity, and
/// reachability of every agent from the owner. The owner doubles as the
/// final data sink, so edges back into the owner are legal; only cycles
/// avoiding the owner are defects. Agents whose data cannot flow back to
/// the owner draw a warning, not a defect. Pure; defects are data.
ValidationResult validate_workflow(const WorkflowGraph& graph);

/// Deterministic canonical numbering 1..|E|: edges sorted by topological
/// rank of the source (longest path from the owner), then destination
/// name, then source name. Throws std::invalid_argument on invalid graphs.
std::vector<NumberedEdge> number_edges(const WorkflowGraph& graph);

/// All agents belonging to `actor`, sorted by name. Empty for unknown actors.
std::vector<AgentId> agents_of(const WorkflowGraph& graph,
                               const std::string& actor);

/// Longest-path-from-owner rank per agent name. Requires a valid graph.
std::map<std::string, int> topological_ranks(const WorkflowGraph& graph);

/// Region label for an agent: the metadata key "region.<agent>" wins;
/// otherwise agents of the hdr/sound actors sit in us-west2-b and everyone
/// else in us-central1-f, mirroring the two-region reference deployment.
std::string region_of(const WorkflowGraph& graph, const std::string& agent);

/// Agent names sorted lexicographically; the service universe for sweeps.
std::vector<std::string> agent_names(const WorkflowGraph& graph);

}  // namespace ztmesh

#endif  // ZTMESH_WORKFLOW_HPP_
