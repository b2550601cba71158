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

#ifndef ZTMESH_JSON_IO_HPP_
#define ZTMESH_JSON_IO_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ztmesh/harness.hpp"
#include "ztmesh/mesh.hpp"
#include "ztmesh/policy.hpp"
#include "ztmesh/workflow.hpp"

namespace ztmesh {

/// Workflow file schema:
///   {"owner": str, "agents": [{"actor": str, "agent": str}],
///    "edges": [{"src": str, "dst": str}], "metadata": {str: str}?}
/// Unknown fields are rejected; field order is irrelevant.
nlohmann::json workflow_to_json(const WorkflowGraph& graph);
WorkflowGraph workflow_from_json(const nlohmann::json& j);

/// Policy file mirrors PolicyDocument; "default_allow" must be false.
nlohmann::json policy_to_json(const PolicyDocument& policy);
PolicyDocument policy_from_json(const nlohmann::json& j);

/// Decision log line: {user, method, path, verdict, reason, rules_evaluated}.
nlohmann::json decision_to_json(const Decision& decision,
                                const RequestContext& ctx);

/// Capture log: JSON-lines, one event per line, markers discriminated by
/// "type".
std::string capture_event_to_json_line(const CaptureEvent& event);
CaptureEvent capture_event_from_json_line(const std::string& line);
void write_capture_stream(std::ostream& out,
                          const std::vector<CaptureEvent>& events);
std::vector<CaptureEvent> read_capture_stream(std::istream& in);

nlohmann::json report_to_json(const VerificationReport& report);

/// Identity audit log: JSON-lines of {event, subject, serial, tick}.
void write_audit_log(std::ostream& out, const std::vector<AuditEvent>& events);

/// Helpers shared by the file formats above.
std::string transport_name(Transport t);
std::string interface_name(InterfaceKind k);

}  // namespace ztmesh

#endif  // ZTMESH_JSON_IO_HPP_
