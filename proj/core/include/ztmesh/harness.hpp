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

#ifndef ZTMESH_HARNESS_HPP_
#define ZTMESH_HARNESS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ztmesh/mesh.hpp"
#include "ztmesh/policy.hpp"

namespace ztmesh {

struct CommunicationCase {
  std::string src;
  std::string dst;
  Method method = Method::kGet;

  auto operator<=>(const CommunicationCase&) const = default;
};

/// With N services and M request types there are N(N-1)M communications;
/// capturing each of them on two interfaces of every pod gives
/// N(N-1)M * 2N = 2(N^3 - N^2)M check slots.
std::uint64_t required_capture_count(int services, int methods);

/// All N(N-1)M cases, lexicographically ordered by (src, dst, method name),
/// never (x, x, *). Throws std::invalid_argument for fewer than two
/// services or an empty method list.
std::vector<CommunicationCase> enumerate_cases(
    const std::vector<std::string>& services,
    const std::vector<Method>& methods);

enum class CaptureRole : std::uint8_t {
  kSourceLoopback,
  kSourceExternal,
  kDestLoopback,
  kDestExternal,
  kBystanderLoopback,
  kBystanderExternal,
};

std::string capture_role_name(CaptureRole role);

/// Every pod plays exactly one of three roles per communication: source,
/// destination or bystander; crossed with its two interfaces.
CaptureRole classify(const std::string& pod, InterfaceKind iface,
                     const CommunicationCase& c);

/// Everything the expectation generator may consult besides the policy:
/// the service universe and the deployment knobs that change what traffic
/// is reachable. Never simulator state.
struct HarnessConfig {
  std::vector<std::string> services;
  EnforcementPoint enforcement = EnforcementPoint::kSource;
  int clock_hour = 8;
  AttributeSet extra_attributes;
  std::string path_template = kDefaultPathTemplate;
};

/// Structured predicate for one (case, pod, interface) slot.
struct Want {
  bool traffic = false;                  // presence/absence
  std::optional<Transport> transport;    // exact transport when present
  bool request = false;                  // plaintext request must be visible
  std::optional<int> status;             // plaintext response status
};

struct Expectation {
  CommunicationCase comm;
  std::string pod;
  InterfaceKind iface = InterfaceKind::kLoopback;
  CaptureRole role = CaptureRole::kBystanderLoopback;
  Want want;
};

/// The 2N expectations of one case, derived purely from the policy and the
/// harness config. Allowed traffic is visible in the clear on both
/// loopbacks and as mTLS on both externals; denied traffic ends at the
/// enforcing proxy (a lone 403 on the source loopback under source-side
/// enforcement). Bystanders always expect silence.
std::vector<Expectation> expected_behavior(const CommunicationCase& comm,
                                           const PolicyDocument& policy,
                                           const HarnessConfig& config);

/// expected_behavior over every case, flattened.
std::vector<Expectation> sweep_expectations(
    const std::vector<CommunicationCase>& cases, const PolicyDocument& policy,
    const HarnessConfig& config);

struct Violation {
  CommunicationCase comm;
  std::string pod;
  InterfaceKind iface = InterfaceKind::kLoopback;
  CaptureRole role = CaptureRole::kBystanderLoopback;
  std::string expected;
  std::string observed;
};

struct VerificationReport {
  std::uint64_t total_checks = 0;
  std::uint64_t passes = 0;
  std::vector<Violation> violations;
  bool compliant() const { return violations.empty() && complete; }
  bool complete = false;  // total_checks == required_capture_count
};

/// Capture stream does not contain a complete, unrepeated sweep.
class IncompleteRunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits the capture stream into per-case windows via the sweep markers
/// and checks every expectation slot against the records observed there.
/// Throws IncompleteRunError when markers are missing, repeated or records
/// precede the first marker.
VerificationReport verify(const std::vector<CaptureEvent>& events,
                          const std::vector<CommunicationCase>& cases,
                          const std::vector<Expectation>& expectations,
                          const HarnessConfig& config);

/// Drives a full sweep on a deployed mesh: every case in enumeration order,
/// one marker + send each. Channel and transport failures are part of the
/// observable outcome, not errors. Returns the case list.
std::vector<CommunicationCase> run_sweep(
    Mesh& mesh, const std::vector<Method>& methods,
    const std::string& path_template = kDefaultPathTemplate);

/// A matrix is only meaningful at a fixed context (hour, attributes);
/// Table-style policies constrain cells further by attributes.
struct MatrixContext {
  int clock_hour = 8;
  AttributeSet extra_attributes;
  std::string path_template = kDefaultPathTemplate;
  std::vector<Method> methods = {Method::kGet, Method::kPost};
};

struct AccessControlMatrix {
  std::vector<std::string> services;
  std::map<std::pair<std::string, std::string>, std::set<Method>> cells;

  const std::set<Method>* cell(const std::string& src,
                               const std::string& dst) const;
  std::size_t cell_count() const;

  bool operator==(const AccessControlMatrix&) const = default;
};

struct MatrixDiff {
  std::string src;
  std::string dst;
  Method method = Method::kGet;
  bool in_a = false;  // present in a but not b, or vice versa
};

/// Evaluates the policy for every (src, dst, method) triple at the given
/// context and fills the allowed cells. The diagonal stays empty.
AccessControlMatrix extract_matrix(const PolicyDocument& policy,
                                   const std::vector<std::string>& services,
                                   const MatrixContext& context = {});

std::vector<MatrixDiff> diff_matrix(const AccessControlMatrix& a,
                                    const AccessControlMatrix& b);

}  // namespace ztmesh

#endif  // ZTMESH_HARNESS_HPP_
