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

#include "ztmesh/json_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace ztmesh {

using nlohmann::json;

namespace {

void reject_unknown_fields(const json& j, const char* what,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) ok = true;
    }
    if (!ok) {
      throw std::invalid_argument(std::string("unknown field in ") + what +
                                  ": " + key);
    }
  }
}

Method require_method(const json& j, const char* what) {
  auto m = parse_method(j.get<std::string>());
  if (!m) {
    throw std::invalid_argument(std::string("bad method in ") + what + ": " +
                                j.get<std::string>());
  }
  return *m;
}

json attr_value_to_json(const AttrValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) {
    return std::get<std::int64_t>(v);
  }
  return std::get<std::string>(v);
}

AttrValue attr_value_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw std::invalid_argument("attribute values must be integers or strings");
}

}  // namespace

json workflow_to_json(const WorkflowGraph& graph) {
  json agents = json::array();
  for (const auto& a : graph.agents) {
    agents.push_back({{"actor", a.actor}, {"agent", a.name}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}});
  }
  json j = {{"owner", graph.owner.name}, {"agents", agents}, {"edges", edges}};
  if (!graph.metadata.empty()) j["metadata"] = graph.metadata;
  return j;
}

WorkflowGraph workflow_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("workflow must be an object");
  reject_unknown_fields(j, "workflow", {"owner", "agents", "edges", "metadata"});
  if (!j.contains("owner") || !j.contains("agents") || !j.contains("edges")) {
    throw std::invalid_argument("workflow needs owner, agents and edges");
  }

  WorkflowGraph graph;
  const std::string owner_name = j.at("owner").get<std::string>();
  for (const auto& a : j.at("agents")) {
    reject_unknown_fields(a, "agent", {"actor", "agent"});
    graph.agents.push_back(
        {a.at("actor").get<std::string>(), a.at("agent").get<std::string>()});
  }
  for (const auto& e : j.at("edges")) {
    reject_unknown_fields(e, "edge", {"src", "dst"});
    graph.edges.push_back(
        {e.at("src").get<std::string>(), e.at("dst").get<std::string>()});
  }
  graph.owner = {owner_name, owner_name};
  for (const auto& a : graph.agents) {
    if (a.name == owner_name) graph.owner = a;
  }
  if (j.contains("metadata")) {
    for (const auto& [k, v] : j.at("metadata").items()) {
      graph.metadata[k] = v.get<std::string>();
    }
  }
  return graph;
}

json policy_to_json(const PolicyDocument& policy) {
  json roles = json::object();
  for (const auto& [user, rs] : policy.user_roles) roles[user] = rs;
  json perms = json::object();
  for (const auto& [role, ps] : policy.role_permissions) {
    json list = json::array();
    for (const auto& p : ps) {
      list.push_back({{"method", method_name(p.method)}, {"path", p.path}});
    }
    perms[role] = std::move(list);
  }
  json attrs = json::object();
  for (const auto& [user, set] : policy.user_attributes) {
    json obj = json::object();
    for (const auto& [name, value] : set) obj[name] = attr_value_to_json(value);
    attrs[user] = std::move(obj);
  }
  json rules = json::array();
  for (const auto& rule : policy.allow_rules) {
    json r = {{"user", rule.user}, {"require_rbac", rule.require_rbac}};
    if (!rule.conditions.empty()) {
      json conds = json::array();
      for (const auto& c : rule.conditions) {
        conds.push_back({{"attr", c.attr},
                         {"cmp", comparator_name(c.cmp)},
                         {"value", attr_value_to_json(c.value)}});
      }
      r["conditions"] = std::move(conds);
    }
    if (rule.time_window) {
      r["time_window"] = {{"min_hour", rule.time_window->min_hour},
                          {"max_hour", rule.time_window->max_hour},
                          {"zone", rule.time_window->zone_label}};
    }
    rules.push_back(std::move(r));
  }
  return {{"default_allow", false},
          {"strict_time_conjunction", policy.strict_time_conjunction},
          {"user_roles", roles},
          {"role_permissions", perms},
          {"user_attributes", attrs},
          {"allow_rules", rules}};
}

PolicyDocument policy_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("policy must be an object");
  reject_unknown_fields(j, "policy",
                        {"default_allow", "strict_time_conjunction",
                         "user_roles", "role_permissions", "user_attributes",
                         "allow_rules"});
  if (j.contains("default_allow") && j.at("default_allow").get<bool>()) {
    throw std::invalid_argument("default decision is fixed to deny");
  }

  PolicyDocument policy;
  if (j.contains("strict_time_conjunction")) {
    policy.strict_time_conjunction = j.at("strict_time_conjunction").get<bool>();
  }
  if (j.contains("user_roles")) {
    for (const auto& [user, roles] : j.at("user_roles").items()) {
      policy.user_roles[user] = roles.get<std::vector<std::string>>();
    }
  }
  if (j.contains("role_permissions")) {
    for (const auto& [role, perms] : j.at("role_permissions").items()) {
      for (const auto& p : perms) {
        reject_unknown_fields(p, "permission", {"method", "path"});
        policy.role_permissions[role].push_back(
            {require_method(p.at("method"), "permission"),
             normalize_path(p.at("path").get<std::string>())});
      }
    }
  }
  if (j.contains("user_attributes")) {
    for (const auto& [user, attrs] : j.at("user_attributes").items()) {
      for (const auto& [name, value] : attrs.items()) {
        policy.user_attributes[user][name] = attr_value_from_json(value);
      }
    }
  }
  if (j.contains("allow_rules")) {
    for (const auto& r : j.at("allow_rules")) {
      reject_unknown_fields(r, "allow rule",
                            {"user", "require_rbac", "conditions",
                             "time_window"});
      AllowRule rule;
      rule.user = r.at("user").get<std::string>();
      if (r.contains("require_rbac")) {
        rule.require_rbac = r.at("require_rbac").get<bool>();
      }
      if (r.contains("conditions")) {
        for (const auto& c : r.at("conditions")) {
          reject_unknown_fields(c, "condition", {"attr", "cmp", "value"});
          auto cmp = parse_comparator(c.at("cmp").get<std::string>());
          if (!cmp) {
            throw std::invalid_argument("bad comparator: " +
                                        c.at("cmp").get<std::string>());
          }
          rule.conditions.push_back({c.at("attr").get<std::string>(), *cmp,
                                     attr_value_from_json(c.at("value"))});
        }
      }
      if (r.contains("time_window")) {
        const auto& w = r.at("time_window");
        reject_unknown_fields(w, "time window",
                              {"min_hour", "max_hour", "zone"});
        TimeWindow window;
        window.min_hour = w.at("min_hour").get<int>();
        window.max_hour = w.at("max_hour").get<int>();
        if (w.contains("zone")) window.zone_label = w.at("zone").get<std::string>();
        rule.time_window = window;
      }
      policy.allow_rules.push_back(std::move(rule));
    }
  }
  auto defects = validate_policy(policy);
  if (!defects.empty()) {
    std::string msg = "invalid policy:";
    for (const auto& d : defects) msg += " [" + d + "]";
    throw std::invalid_argument(msg);
  }
  return policy;
}

json decision_to_json(const Decision& decision, const RequestContext& ctx) {
  auto user = parse_credential(ctx.authorization_header);
  json j = {{"user", user ? json(*user) : json(nullptr)},
            {"method", method_name(ctx.method)},
            {"path", ctx.path},
            {"verdict", decision.verdict == Verdict::kAllow ? "allow" : "deny"},
            {"reason", decision.reason},
            {"rules_evaluated", decision.rules_evaluated}};
  return j;
}

std::string transport_name(Transport t) {
  return t == Transport::kMtls ? "mtls" : "plaintext_http";
}

std::string interface_name(InterfaceKind k) {
  return k == InterfaceKind::kExternal ? "external" : "loopback";
}

namespace {

Transport parse_transport(const std::string& s) {
  if (s == "mtls") return Transport::kMtls;
  if (s == "plaintext_http") return Transport::kPlaintextHttp;
  throw std::invalid_argument("bad transport: " + s);
}

InterfaceKind parse_interface(const std::string& s) {
  if (s == "external") return InterfaceKind::kExternal;
  if (s == "loopback") return InterfaceKind::kLoopback;
  throw std::invalid_argument("bad interface kind: " + s);
}

}  // namespace

std::string capture_event_to_json_line(const CaptureEvent& event) {
  json j;
  if (std::holds_alternative<CaseMarker>(event)) {
    const auto& m = std::get<CaseMarker>(event);
    j = {{"type", "marker"},
         {"src", m.src},
         {"dst", m.dst},
         {"method", method_name(m.method)},
         {"tick", m.tick}};
  } else {
    const auto& r = std::get<CaptureRecord>(event);
    j = {{"type", "capture"},
         {"pod", r.pod},
         {"iface", interface_name(r.iface)},
         {"src", r.src},
         {"dst", r.dst},
         {"transport", transport_name(r.transport)},
         {"tick", r.tick}};
    if (r.http) {
      json http = {{"method", method_name(r.http->method)},
                   {"path", r.http->path}};
      if (r.http->status) http["status"] = *r.http->status;
      j["http"] = std::move(http);
    }
  }
  return j.dump();
}

CaptureEvent capture_event_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  const std::string type = j.at("type").get<std::string>();
  if (type == "marker") {
    return CaseMarker{j.at("src").get<std::string>(),
                      j.at("dst").get<std::string>(),
                      require_method(j.at("method"), "marker"),
                      j.at("tick").get<Tick>()};
  }
  if (type != "capture") {
    throw std::invalid_argument("bad capture event type: " + type);
  }
  CaptureRecord r;
  r.pod = j.at("pod").get<std::string>();
  r.iface = parse_interface(j.at("iface").get<std::string>());
  r.src = j.at("src").get<std::string>();
  r.dst = j.at("dst").get<std::string>();
  r.transport = parse_transport(j.at("transport").get<std::string>());
  r.tick = j.at("tick").get<Tick>();
  if (j.contains("http")) {
    const auto& h = j.at("http");
    HttpInfo http;
    http.method = require_method(h.at("method"), "capture");
    http.path = h.at("path").get<std::string>();
    if (h.contains("status")) http.status = h.at("status").get<int>();
    r.http = std::move(http);
  }
  return r;
}

void write_capture_stream(std::ostream& out,
                          const std::vector<CaptureEvent>& events) {
  for (const auto& event : events) {
    out << capture_event_to_json_line(event) << '\n';
  }
}

std::vector<CaptureEvent> read_capture_stream(std::istream& in) {
  std::vector<CaptureEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(capture_event_from_json_line(line));
  }
  return events;
}

json report_to_json(const VerificationReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"src", v.comm.src},
                          {"dst", v.comm.dst},
                          {"method", method_name(v.comm.method)},
                          {"pod", v.pod},
                          {"iface", interface_name(v.iface)},
                          {"role", capture_role_name(v.role)},
                          {"expected", v.expected},
                          {"observed", v.observed}});
  }
  return {{"verdict", report.compliant() ? "compliant" : "violations"},
          {"total_checks", report.total_checks},
          {"passes", report.passes},
          {"violations", violations}};
}

void write_audit_log(std::ostream& out, const std::vector<AuditEvent>& events) {
  for (const auto& e : events) {
    out << json{{"event", e.event},
                {"subject", e.subject},
                {"serial", e.serial},
                {"tick", e.tick}}
               .dump()
        << '\n';
  }
}

}  // namespace ztmesh
