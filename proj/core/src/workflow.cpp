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

#include "ztmesh/workflow.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ztmesh {

namespace {

std::string join_sorted(std::set<std::string> names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ",";
    out += n;
  }
  return out;
}

// Adjacency over agent names, edges assumed endpoint-checked by the caller.
// With forward_only, edges into the owner are dropped: the owner is both
// instigator and final sink, so data-return edges close the loop by design
// and only cycles avoiding the owner count as defects.
std::map<std::string, std::vector<std::string>> adjacency(
    const WorkflowGraph& graph, bool forward_only = false) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& a : graph.agents) adj[a.name];
  for (const auto& e : graph.edges) {
    if (forward_only && e.dst == graph.owner.name) continue;
    if (adj.count(e.src) && adj.count(e.dst)) adj[e.src].push_back(e.dst);
  }
  return adj;
}

std::set<std::string> reachable_from(
    const std::map<std::string, std::vector<std::string>>& adj,
    const std::string& start) {
  std::set<std::string> seen;
  std::deque<std::string> queue;
  if (adj.count(start)) {
    seen.insert(start);
    queue.push_back(start);
  }
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (const auto& nxt : adj.at(cur)) {
      if (seen.insert(nxt).second) queue.push_back(nxt);
    }
  }
  return seen;
}

}  // namespace

ValidationResult validate_workflow(const WorkflowGraph& graph) {
  ValidationResult result;
  auto defect = [&](const std::string& msg) { result.defects.push_back(msg); };

  std::set<std::string> names;
  for (const auto& agent : graph.agents) {
    if (agent.name.empty()) defect("empty agent name");
    if (agent.actor.empty()) defect("empty actor name for agent: " + agent.name);
    if (!agent.name.empty() && !names.insert(agent.name).second) {
      defect("duplicate agent: " + agent.name);
    }
  }
  if (!names.count(graph.owner.name)) {
    defect("owner missing from agents: " + graph.owner.name);
  }

  std::set<std::pair<std::string, std::string>> seen_edges;
  for (const auto& e : graph.edges) {
    if (!names.count(e.src)) defect("unknown agent in edge: " + e.src + "->" + e.dst);
    if (!names.count(e.dst)) defect("unknown agent in edge: " + e.src + "->" + e.dst);
    if (e.src == e.dst) defect("self-loop: " + e.src);
    if (!seen_edges.insert({e.src, e.dst}).second) {
      defect("duplicate edge: " + e.src + "->" + e.dst);
    }
  }

  // Kahn's algorithm on the forward graph; whatever cannot be peeled off
  // sits on a cycle that does not pass through the owner.
  auto forward = adjacency(graph, /*forward_only=*/true);
  std::map<std::string, int> indeg;
  for (const auto& [node, _] : forward) indeg[node] = 0;
  for (const auto& [node, outs] : forward) {
    for (const auto& dst : outs) {
      if (dst != node) ++indeg[dst];
    }
  }
  std::deque<std::string> ready;
  for (const auto& [node, d] : indeg) {
    if (d == 0) ready.push_back(node);
  }
  std::size_t peeled = 0;
  while (!ready.empty()) {
    auto cur = ready.front();
    ready.pop_front();
    ++peeled;
    for (const auto& dst : forward.at(cur)) {
      if (dst != cur && --indeg[dst] == 0) ready.push_back(dst);
    }
  }
  if (peeled < forward.size()) {
    std::set<std::string> cyclic;
    for (const auto& [node, d] : indeg) {
      if (d > 0) cyclic.insert(node);
    }
    defect("cycle: " + join_sorted(cyclic));
  }

  auto adj = adjacency(graph);
  auto from_owner = reachable_from(adj, graph.owner.name);
  for (const auto& [node, _] : adj) {
    if (!from_owner.count(node)) defect("unreachable from owner: " + node);
  }

  // Reverse reachability: agents whose data can never return to the owner.
  std::map<std::string, std::vector<std::string>> radj;
  for (const auto& [node, _] : adj) radj[node];
  for (const auto& [node, outs] : adj) {
    for (const auto& dst : outs) radj[dst].push_back(node);
  }
  auto reaches_owner = reachable_from(radj, graph.owner.name);
  for (const auto& [node, _] : adj) {
    if (node != graph.owner.name && !reaches_owner.count(node)) {
      result.warnings.push_back("owner unreachable from: " + node);
    }
  }
  if (graph.edges.empty()) result.warnings.push_back("no contractor edges");

  return result;
}

std::map<std::string, int> topological_ranks(const WorkflowGraph& graph) {
  auto validation = validate_workflow(graph);
  if (!validation.ok()) {
    std::ostringstream oss;
    oss << "invalid workflow:";
    for (const auto& d : validation.defects) oss << " [" << d << "]";
    throw std::invalid_argument(oss.str());
  }

  // Longest path from the owner over the forward graph (return edges into
  // the owner do not advance rank).
  auto adj = adjacency(graph, /*forward_only=*/true);
  std::map<std::string, int> indeg;
  for (const auto& [node, _] : adj) indeg[node] = 0;
  for (const auto& [node, outs] : adj) {
    for (const auto& dst : outs) ++indeg[dst];
  }
  std::deque<std::string> ready;
  for (const auto& [node, d] : indeg) {
    if (d == 0) ready.push_back(node);
  }
  std::map<std::string, int> rank;
  for (const auto& [node, _] : adj) rank[node] = 0;
  while (!ready.empty()) {
    auto cur = ready.front();
    ready.pop_front();
    for (const auto& dst : adj.at(cur)) {
      rank[dst] = std::max(rank[dst], rank[cur] + 1);
      if (--indeg[dst] == 0) ready.push_back(dst);
    }
  }
  return rank;
}

std::vector<NumberedEdge> number_edges(const WorkflowGraph& graph) {
  auto rank = topological_ranks(graph);  // also rejects invalid graphs

  std::vector<WorkflowEdge> sorted = graph.edges;
  std::sort(sorted.begin(), sorted.end(),
            [&](const WorkflowEdge& a, const WorkflowEdge& b) {
              return std::tuple(rank.at(a.src), a.dst, a.src) <
                     std::tuple(rank.at(b.src), b.dst, b.src);
            });
  std::vector<NumberedEdge> numbered;
  numbered.reserve(sorted.size());
  int index = 1;
  for (const auto& e : sorted) numbered.push_back({index++, e.src, e.dst});
  return numbered;
}

std::vector<AgentId> agents_of(const WorkflowGraph& graph,
                               const std::string& actor) {
  std::vector<AgentId> out;
  for (const auto& a : graph.agents) {
    if (a.actor == actor) out.push_back(a);
  }
  std::sort(out.begin(), out.end(),
            [](const AgentId& a, const AgentId& b) { return a.name < b.name; });
  return out;
}

std::string region_of(const WorkflowGraph& graph, const std::string& agent) {
  auto it = graph.metadata.find("region." + agent);
  if (it != graph.metadata.end()) return it->second;
  for (const auto& a : graph.agents) {
    if (a.name == agent && (a.actor == "hdr" || a.actor == "sound")) {
      return "us-west2-b";
    }
  }
  return "us-central1-f";
}

std::vector<std::string> agent_names(const WorkflowGraph& graph) {
  std::vector<std::string> names;
  names.reserve(graph.agents.size());
  for (const auto& a : graph.agents) names.push_back(a.name);
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace ztmesh
