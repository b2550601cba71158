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

#include "ztmesh/policy.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>

namespace ztmesh {

std::string method_name(Method m) {
  switch (m) {
    case Method::kGet: return "GET";
    case Method::kPost: return "POST";
    case Method::kPut: return "PUT";
    case Method::kDelete: return "DELETE";
  }
  return "GET";
}

std::optional<Method> parse_method(const std::string& name) {
  if (name == "GET") return Method::kGet;
  if (name == "POST") return Method::kPost;
  if (name == "PUT") return Method::kPut;
  if (name == "DELETE") return Method::kDelete;
  return std::nullopt;
}

std::string normalize_path(const std::string& path) {
  if (path.empty() || path[0] != '/') {
    throw std::invalid_argument("path must begin with '/': " + path);
  }
  std::string out = path;
  while (out.size() > 1 && out.back() == '/') out.pop_back();
  return out;
}

bool TimeWindow::contains(int hour, bool strict_conjunction) const {
  if (strict_conjunction || min_hour <= max_hour) {
    return hour >= min_hour && hour <= max_hour;
  }
  return hour >= min_hour || hour <= max_hour;  // wrap-around
}

std::string comparator_name(Comparator c) {
  switch (c) {
    case Comparator::kLt: return "<";
    case Comparator::kLe: return "<=";
    case Comparator::kGt: return ">";
    case Comparator::kGe: return ">=";
    case Comparator::kEq: return "==";
  }
  return "==";
}

std::optional<Comparator> parse_comparator(const std::string& name) {
  if (name == "<") return Comparator::kLt;
  if (name == "<=") return Comparator::kLe;
  if (name == ">") return Comparator::kGt;
  if (name == ">=") return Comparator::kGe;
  if (name == "==") return Comparator::kEq;
  return std::nullopt;
}

std::vector<std::string> validate_policy(const PolicyDocument& policy) {
  std::vector<std::string> defects;
  for (std::size_t i = 0; i < policy.allow_rules.size(); ++i) {
    const auto& rule = policy.allow_rules[i];
    if (rule.user.empty()) {
      defects.push_back("rule " + std::to_string(i) + ": empty user selector");
    }
    if (!rule.require_rbac && rule.conditions.empty() && !rule.time_window) {
      defects.push_back("rule " + std::to_string(i) +
                        ": unconditional allow for " + rule.user);
    }
    for (const auto& cond : rule.conditions) {
      if (cond.attr.empty()) {
        defects.push_back("rule " + std::to_string(i) +
                          ": empty attribute name");
      }
    }
    if (rule.time_window) {
      const auto& w = *rule.time_window;
      if (w.min_hour < 0 || w.min_hour > 23 || w.max_hour < 0 ||
          w.max_hour > 23) {
        defects.push_back("rule " + std::to_string(i) +
                          ": hour bounds outside 0-23");
      }
    }
  }
  return defects;
}

namespace {

// Decodes both RFC 4648 alphabets (standard and url-safe), with optional
// padding. Returns nullopt on any character outside the alphabet.
std::optional<std::string> base64_decode(const std::string& in) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string data = in;
  while (!data.empty() && data.back() == '=') data.pop_back();
  if (data.size() % 4 == 1) return std::nullopt;

  std::string out;
  out.reserve(data.size() * 3 / 4);
  int buffer = 0;
  int bits = 0;
  for (char c : data) {
    int v = value_of(c);
    if (v < 0) return std::nullopt;
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

bool compare_values(const AttrValue& lhs, Comparator cmp,
                    const AttrValue& rhs) {
  if (lhs.index() != rhs.index()) return false;  // type mismatch never holds
  auto order = [&](auto a, auto b) {
    switch (cmp) {
      case Comparator::kLt: return a < b;
      case Comparator::kLe: return a <= b;
      case Comparator::kGt: return a > b;
      case Comparator::kGe: return a >= b;
      case Comparator::kEq: return a == b;
    }
    return false;
  };
  if (std::holds_alternative<std::int64_t>(lhs)) {
    return order(std::get<std::int64_t>(lhs), std::get<std::int64_t>(rhs));
  }
  return order(std::get<std::string>(lhs), std::get<std::string>(rhs));
}

bool rbac_match(const PolicyDocument& policy, const std::string& user,
                Method method, const std::string& path) {
  auto roles = policy.user_roles.find(user);
  if (roles == policy.user_roles.end()) return false;
  for (const auto& role : roles->second) {
    auto perms = policy.role_permissions.find(role);
    if (perms == policy.role_permissions.end()) continue;
    for (const auto& p : perms->second) {
      if (p.method == method && p.path == path) return true;
    }
  }
  return false;
}

// Full-body evaluation of one rule; intentionally no short-circuit ordering
// tricks beyond plain conjunction.
bool rule_matches(const PolicyDocument& policy, const AllowRule& rule,
                  const std::string& user, const RequestContext& ctx) {
  bool matched = rule.user == user;
  if (rule.require_rbac) {
    matched = rbac_match(policy, user, ctx.method, ctx.path) && matched;
  }
  for (const auto& cond : rule.conditions) {
    const AttrValue* value = nullptr;
    auto extra = ctx.extra_attributes.find(cond.attr);
    if (extra != ctx.extra_attributes.end()) {
      value = &extra->second;
    } else {
      auto attrs = policy.user_attributes.find(user);
      if (attrs != policy.user_attributes.end()) {
        auto it = attrs->second.find(cond.attr);
        if (it != attrs->second.end()) value = &it->second;
      }
    }
    matched = value != nullptr &&
              compare_values(*value, cond.cmp, cond.value) && matched;
  }
  if (rule.time_window) {
    matched = rule.time_window->contains(ctx.clock_hour,
                                         policy.strict_time_conjunction) &&
              matched;
  }
  return matched;
}

}  // namespace

std::optional<std::string> parse_credential(const std::string& header,
                                            std::string* error) {
  auto fail = [&](const char* why) -> std::optional<std::string> {
    if (error) *error = why;
    return std::nullopt;
  };
  auto space = header.find(' ');
  if (space == std::string::npos) return fail("no space-separated token");
  auto decoded = base64_decode(header.substr(space + 1));
  if (!decoded) return fail("invalid base64 credential");
  auto colon = decoded->find(':');
  if (colon == std::string::npos) return fail("no colon in credential");
  std::string user = decoded->substr(0, colon);
  if (user.empty()) return fail("empty user in credential");
  return user;
}

std::string make_basic_credential(const std::string& user,
                                  const std::string& secret) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const std::string plain = user + ":" + secret;
  std::string out = "Basic ";
  for (std::size_t i = 0; i < plain.size(); i += 3) {
    std::uint32_t chunk = 0;
    int have = 0;
    for (std::size_t j = i; j < i + 3; ++j) {
      chunk <<= 8;
      if (j < plain.size()) {
        chunk |= static_cast<unsigned char>(plain[j]);
        ++have;
      }
    }
    for (int j = 0; j < 4; ++j) {
      if (j <= have) {
        out.push_back(kAlphabet[(chunk >> (18 - 6 * j)) & 0x3F]);
      } else {
        out.push_back('=');
      }
    }
  }
  return out;
}

std::string path_for_agent(const std::string& path_template,
                           const std::string& agent) {
  std::string out = path_template;
  auto pos = out.find("{agent}");
  if (pos != std::string::npos) out.replace(pos, 7, agent);
  return normalize_path(out);
}

PolicyDocument compile_from_workflow(const WorkflowGraph& graph, Method method,
                                     const std::string& path_template) {
  auto numbered = number_edges(graph);  // throws on invalid graphs

  PolicyDocument policy;
  std::vector<std::string> source_order;
  for (const auto& edge : numbered) {
    if (!policy.user_roles.count(edge.src)) {
      policy.user_roles[edge.src] = {edge.src};  // identity = role
      source_order.push_back(edge.src);
    }
    policy.role_permissions[edge.src].push_back(
        {method, path_for_agent(path_template, edge.dst)});
  }
  for (const auto& src : source_order) {
    AllowRule rule;
    rule.user = src;
    rule.require_rbac = true;
    policy.allow_rules.push_back(std::move(rule));
  }
  return policy;
}

PolicyDocument attach_time_constraint(const PolicyDocument& policy,
                                      const std::string& user,
                                      const TimeWindow& window) {
  if (window.min_hour < 0 || window.min_hour > 23 || window.max_hour < 0 ||
      window.max_hour > 23) {
    throw std::invalid_argument("time window hours must be within 0-23");
  }
  PolicyDocument out = policy;
  bool found = false;
  for (auto& rule : out.allow_rules) {
    if (rule.user != user) continue;
    found = true;
    if (rule.time_window) {
      throw std::invalid_argument("rule for " + user +
                                  " is already time-constrained");
    }
    rule.time_window = window;
  }
  if (!found) {
    throw std::invalid_argument("unknown user in policy: " + user);
  }
  return out;
}

Decision evaluate(const PolicyDocument& policy, const RequestContext& ctx) {
  Decision decision;
  decision.rules_evaluated = static_cast<int>(policy.allow_rules.size());

  std::string parse_error;
  auto user = parse_credential(ctx.authorization_header, &parse_error);
  if (!user) {
    decision.reason = "unauthenticated: " + parse_error;
    return decision;
  }

  // Every rule body runs; the first match wins but later rules are still
  // ground through, like a policy engine evaluating every disjunct.
  for (std::size_t i = 0; i < policy.allow_rules.size(); ++i) {
    bool matched = rule_matches(policy, policy.allow_rules[i], *user, ctx);
    if (matched && !decision.matched_rule) {
      decision.matched_rule = static_cast<int>(i);
    }
  }
  if (decision.matched_rule) {
    decision.verdict = Verdict::kAllow;
    decision.reason = "allow rule #" + std::to_string(*decision.matched_rule);
  } else {
    decision.reason = "default deny: no allow rule matched for " + *user;
  }
  return decision;
}

PolicyDocument inflate_policy(const PolicyDocument& policy, int extra_rules) {
  if (extra_rules < 0) {
    throw std::invalid_argument("extra_rules must be non-negative");
  }
  PolicyDocument out = policy;
  out.allow_rules.reserve(out.allow_rules.size() + extra_rules);
  for (int i = 0; i < extra_rules; ++i) {
    AllowRule pad;
    pad.user = kPaddingIdentity;
    pad.conditions.push_back(
        {"__never__", Comparator::kEq, AttrValue{std::int64_t{1}}});
    out.allow_rules.push_back(std::move(pad));
  }
  return out;
}

WorkflowGraph reference_workflow() {
  WorkflowGraph graph;
  graph.owner = {"owner", "owner"};
  graph.agents = {{"owner", "owner"}, {"vfx", "vfx-1"}, {"vfx", "vfx-2"},
                  {"vfx", "vfx-3"},   {"color", "color"}, {"sound", "sound"},
                  {"hdr", "hdr"}};
  graph.edges = {{"owner", "vfx-1"}, {"vfx-1", "vfx-2"}, {"vfx-1", "vfx-3"},
                 {"vfx-2", "color"}, {"vfx-3", "sound"}, {"color", "hdr"},
                 {"sound", "owner"}, {"hdr", "owner"}};
  return graph;
}

PolicyDocument reference_policy() {
  PolicyDocument policy = compile_from_workflow(reference_workflow());
  policy.user_attributes = {
      {"owner", {{"tenure", std::int64_t{8}}}},
      {"vfx-1", {{"tenure", std::int64_t{3}}}},
      {"vfx-2", {{"tenure", std::int64_t{12}}}},
      {"vfx-3", {{"tenure", std::int64_t{7}}}},
      {"color", {{"tenure", std::int64_t{3}}}},
      {"sound", {{"tenure", std::int64_t{4}}}},
      {"hdr", {{"tenure", std::int64_t{5}}}},
  };

  const TimeWindow business{8, 17, "Europe/Paris"};
  const TimeWindow off_hours{17, 8, "Europe/Paris"};  // wrap-around
  const AttributeCondition senior{"tenure", Comparator::kGt,
                                  AttrValue{std::int64_t{10}}};

  // The compiler emitted one rbac rule per source. Rebuild the rule list as
  // the reference policy states it: owner and vfx-1 by rbac alone, vfx-2
  // and vfx-3 by tenure or business hours, color/sound off-hours, hdr
  // business hours.
  std::vector<AllowRule> rules;
  auto rbac_rule = [](const std::string& user) {
    AllowRule r;
    r.user = user;
    r.require_rbac = true;
    return r;
  };
  rules.push_back(rbac_rule("owner"));
  rules.push_back(rbac_rule("vfx-1"));
  for (const std::string user : {"vfx-2", "vfx-3"}) {
    AllowRule by_tenure = rbac_rule(user);
    by_tenure.conditions.push_back(senior);
    rules.push_back(by_tenure);
    AllowRule by_hours = rbac_rule(user);
    by_hours.time_window = business;
    rules.push_back(by_hours);
  }
  for (const std::string user : {"color", "sound"}) {
    AllowRule rule = rbac_rule(user);
    rule.time_window = off_hours;
    rules.push_back(rule);
  }
  {
    AllowRule rule = rbac_rule("hdr");
    rule.time_window = business;
    rules.push_back(rule);
  }
  policy.allow_rules = std::move(rules);
  return policy;
}

}  // namespace ztmesh
