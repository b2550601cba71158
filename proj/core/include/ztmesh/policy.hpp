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

#ifndef ZTMESH_POLICY_HPP_
#define ZTMESH_POLICY_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ztmesh/workflow.hpp"

namespace ztmesh {

enum class Method : std::uint8_t { kGet, kPost, kPut, kDelete };

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

/// Request paths are opaque strings, normalized to "no trailing slash
/// except root". Throws std::invalid_argument unless the path starts with '/'.
std::string normalize_path(const std::string& path);

using AttrValue = std::variant<std::int64_t, std::string>;
using AttributeSet = std::map<std::string, AttrValue>;

/// Hour-of-day window, inclusive bounds. min_hour > max_hour means the
/// wrap-around reading (hour >= min OR hour <= max), i.e. "outside business
/// hours". The strict-literal mode below turns that into the unsatisfiable
/// conjunction instead.
struct TimeWindow {
  int min_hour = 0;
  int max_hour = 23;
  std::string zone_label;

  bool contains(int hour, bool strict_conjunction = false) const;

  auto operator<=>(const TimeWindow&) const = default;
};

struct Permission {
  Method method = Method::kPost;
  std::string path;

  auto operator<=>(const Permission&) const = default;
};

enum class Comparator : std::uint8_t { kLt, kLe, kGt, kGe, kEq };

std::string comparator_name(Comparator c);
std::optional<Comparator> parse_comparator(const std::string& name);

struct AttributeCondition {
  std::string attr;
  Comparator cmp = Comparator::kEq;
  AttrValue value;

  auto operator<=>(const AttributeCondition&) const = default;
};

/// One disjunct of the policy. All pieces are conjunctive: the identity
/// selector, the RBAC lookup (when require_rbac), every attribute
/// condition, and the time window.
struct AllowRule {
  std::string user;
  bool require_rbac = false;
  std::vector<AttributeCondition> conditions;
  std::optional<TimeWindow> time_window;

  auto operator<=>(const AllowRule&) const = default;
};

/// Default-deny rule set. The default decision is deny and not
/// representable otherwise; loading a document claiming default-allow fails.
struct PolicyDocument {
  std::map<std::string, std::vector<std::string>> user_roles;
  std::map<std::string, std::vector<Permission>> role_permissions;
  std::map<std::string, AttributeSet> user_attributes;
  std::vector<AllowRule> allow_rules;
  // Evaluate wrap-around windows as the literal (unsatisfiable) conjunction.
  bool strict_time_conjunction = false;
};

/// Rejects rules that would be accidental allow-alls (no rbac, no
/// conditions, no window). Returns defect strings, empty when fine.
std::vector<std::string> validate_policy(const PolicyDocument& policy);

struct RequestContext {
  std::string authorization_header;
  Method method = Method::kGet;
  std::string path;
  int clock_hour = 0;  // injected, never read from the environment
  AttributeSet extra_attributes;
};

enum class Verdict : std::uint8_t { kAllow, kDeny };

struct Decision {
  Verdict verdict = Verdict::kDeny;
  std::optional<int> matched_rule;  // index into allow_rules when allowed
  std::string reason;
  int rules_evaluated = 0;
};

/// "Basic <base64(user:secret)>" -> user. Accepts both the url-safe and
/// standard base64 alphabets, padded or not. Returns nullopt on a malformed
/// header (no space, bad base64, no colon, empty user) and reports why
/// through `error` when given.
std::optional<std::string> parse_credential(const std::string& header,
                                            std::string* error = nullptr);

/// "Basic " + base64(user + ":" + secret). What the simulated services put
/// on the wire; parse_credential() is its inverse for the user part.
std::string make_basic_credential(const std::string& user,
                                  const std::string& secret = "pw");

/// Substitutes "{agent}" in the template; templates without the placeholder
/// are used verbatim (every destination then shares one opaque path).
std::string path_for_agent(const std::string& path_template,
                           const std::string& agent);

inline constexpr char kDefaultPathTemplate[] = "/api/{agent}";

/// Workflow -> default-deny policy, role-centric: each edge source becomes
/// its own role holding one permission per outgoing edge (in canonical edge
/// order), plus a single rbac-only allow rule per source identity.
/// Throws std::invalid_argument on invalid graphs.
PolicyDocument compile_from_workflow(
    const WorkflowGraph& graph, Method method = Method::kPost,
    const std::string& path_template = kDefaultPathTemplate);

/// Adds `window` to every allow rule of `user`; constraints only ever
/// shrink what the user may do. Throws std::invalid_argument when the user
/// has no rules or a rule is already time-constrained.
PolicyDocument attach_time_constraint(const PolicyDocument& policy,
                                      const std::string& user,
                                      const TimeWindow& window);

/// Decides a request. Every allow rule body is evaluated in full, with no
/// early exit, so the decision cost scales with policy size and
/// rules_evaluated always equals the rule count. All failures fold into
/// deny with a reason; this never throws on request data.
Decision evaluate(const PolicyDocument& policy, const RequestContext& ctx);

/// Reserved identity carried by padding rules; never emitted by the
/// compiler and never authorized (its condition cannot hold).
inline constexpr char kPaddingIdentity[] = "__padding__";

/// Appends `extra_rules` never-matching rules that evaluate() still has to
/// grind through; decisions for real identities are unchanged.
PolicyDocument inflate_policy(const PolicyDocument& policy, int extra_rules);

/// The reference movie-workflow deployment: seven agents, eight edges.
WorkflowGraph reference_workflow();

/// The full reference policy: the compiled RBAC skeleton of reference_workflow()
/// plus tenure attributes and per-identity time windows (vfx-2/vfx-3
/// alternatively by tenure > 10 or business hours 8-17; color/sound outside
/// business hours via the wrap-around window; hdr business hours).
PolicyDocument reference_policy();

}  // namespace ztmesh

#endif  // ZTMESH_POLICY_HPP_
