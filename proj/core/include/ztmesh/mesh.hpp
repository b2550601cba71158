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

#ifndef ZTMESH_MESH_HPP_
#define ZTMESH_MESH_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ztmesh/identity.hpp"
#include "ztmesh/policy.hpp"
#include "ztmesh/workflow.hpp"

namespace ztmesh {

enum class PodState : std::uint8_t { kScheduled, kReady, kTerminated };

enum class InterfaceKind : std::uint8_t { kLoopback, kExternal };

enum class Transport : std::uint8_t { kPlaintextHttp, kMtls };

enum class EnforcementPoint : std::uint8_t { kSource, kDestination, kBoth };

struct HttpInfo {
  Method method = Method::kGet;
  std::string path;
  std::optional<int> status;  // set on responses only

  auto operator<=>(const HttpInfo&) const = default;
};

/// One observation at a capture point: http payload is visible iff the
/// traffic was plaintext; endpoint identities are always visible (the
/// address-level metadata a sniffer sees even for encrypted flows).
struct CaptureRecord {
  std::string pod;
  InterfaceKind iface = InterfaceKind::kLoopback;
  std::string src;
  std::string dst;
  Transport transport = Transport::kPlaintextHttp;
  std::optional<HttpInfo> http;
  Tick tick = 0;

  auto operator<=>(const CaptureRecord&) const = default;
};

/// Sweep delimiter written into the capture stream so a verifier can tell
/// which records belong to which communication, and that a run completed.
struct CaseMarker {
  std::string src;
  std::string dst;
  Method method = Method::kGet;
  Tick tick = 0;

  auto operator<=>(const CaseMarker&) const = default;
};

using CaptureEvent = std::variant<CaseMarker, CaptureRecord>;

/// Normal-ish per-container init cost, truncated at zero.
struct StartupCost {
  double mean = 0;
  double sd = 0;
};

struct SimConfig {
  EnforcementPoint enforcement_point = EnforcementPoint::kSource;
  bool no_policy_sidecar = false;
  // Sidecar answers allow without consulting the document ("no rules,
  // default allow"); distinct from having no sidecar at all.
  bool policy_allow_all = false;
  int clock_hour = 8;
  std::uint64_t seed = 0;

  // Startup cost parameters, calibrated so a pod with the policy sidecar
  // starts ~33% slower than one without.
  StartupCost service_init{3.50, 0.60};
  StartupCost proxy_init{2.43, 0.64};
  StartupCost policy_init{1.94, 0.535};

  // Request duration parameters (seconds).
  double net_intra_mean = 4.9e-3;
  double net_inter_mean = 4.0e-2;
  double policy_query_base = 4.0e-4;   // fixed sidecar round trip
  double policy_per_rule = 8.0e-6;     // marginal cost per rule evaluated
  double duration_sd_frac = 0.20;      // noise sd as a fraction of the mean
};

struct Response {
  int status = 0;
  std::string body;
  double duration = 0;  // simulated seconds, evaluate-inclusive
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Destination pod terminated or otherwise unreachable; deliberately not an
/// HTTP 403.
class TransportError : public MeshError {
 public:
  using MeshError::MeshError;
};

/// mTLS handshake failed mutual verification; no plaintext crossed.
class ChannelError : public MeshError {
 public:
  using MeshError::MeshError;
};

class VolumeAuthorizationError : public MeshError {
 public:
  using MeshError::MeshError;
};

class VolumeDecryptionError : public MeshError {
 public:
  using MeshError::MeshError;
};

struct DisablePolicySidecar {
  std::string agent;
};
struct PlaintextChannel {
  std::string a;
  std::string b;
};
struct RogueEdge {
  std::string src;
  std::string dst;
};
struct TamperCertificate {
  std::string agent;
};
using Fault = std::variant<DisablePolicySidecar, PlaintextChannel, RogueEdge,
                           TamperCertificate>;

std::string fault_description(const Fault& fault);

struct Pod {
  AgentId agent;
  PodState state = PodState::kScheduled;
  bool has_policy_sidecar = true;
  std::string volume_key_id;
  std::string region;
  double startup_duration = 0;  // PodScheduled -> Ready, seconds
  IdentityBundle identity;

  /// service + proxy always, policy sidecar unless disabled, plus the
  /// capture sidecar the audit relies on.
  std::vector<std::string> containers() const {
    std::vector<std::string> out = {"service", "proxy"};
    if (has_policy_sidecar) out.push_back("policy_sidecar");
    out.push_back("capture");
    return out;
  }
};

struct SecureChannel {
  std::string pod_a;
  std::string pod_b;
  std::uint64_t session_id = 0;
  Transport transport = Transport::kMtls;
  std::pair<CertificateRecord, CertificateRecord> peer_certificates;
  Tick established_at = 0;
};

struct VolumeKey {
  std::uint64_t k0 = 0;
  std::uint64_t k1 = 0;
};

/// Volume sealing: keystream cipher plus a keyed 64-bit tag, giving
/// authenticated-encryption semantics (any ciphertext tamper fails to open).
/// Test-grade, like the identity MAC; not a security claim.
std::string seal_blob(const VolumeKey& key, const std::string& name,
                      const std::string& plaintext);
/// Throws VolumeDecryptionError on tag mismatch or truncation.
std::string open_blob(const VolumeKey& key, const std::string& name,
                      const std::string& blob);

/// Orchestrator-held key material, one fresh key per volume. Revoking a
/// key erases it; ciphertext becomes permanently undecryptable.
class KeyValueStore {
 public:
  std::string put(const std::string& hint, VolumeKey key);
  std::optional<VolumeKey> get(const std::string& key_id) const;
  void revoke(const std::string& key_id);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, VolumeKey> entries_;
};

struct EncryptedVolume {
  std::string owner_agent;
  std::string key_id;
  std::map<std::string, std::string> blobs;  // name -> ciphertext bytes
};

/// Deterministic, single-threaded simulation of the deployed mesh:
/// one pod per agent (service + proxy + optional policy sidecar), per-agent
/// encrypted volume, lazily established authenticated channels, and a full
/// capture stream over every loopback and external interface.
class Mesh {
 public:
  /// Brings up the whole deployment: volumes keyed from the kv-store, node
  /// bootstrap per actor, proxy identities via the node agent (no channel
  /// can exist before this), all pods Ready. Throws MeshError when
  /// validation or identity issuance fails.
  Mesh(const WorkflowGraph& graph, PolicyDocument policy, SimConfig config);

  /// Full data path of one request. Returns the response (allowed: 200 for
  /// GET, 201 otherwise; denied: 403). Throws TransportError / ChannelError
  /// for failures distinct from a policy deny, std::invalid_argument for a
  /// self-send.
  Response send(const std::string& src, const std::string& dst, Method method,
                const std::string& path, const std::string& body = "");

  void store_data(const std::string& agent, const std::string& name,
                  const std::string& plaintext);
  std::string load_data(const std::string& agent, const std::string& name);
  /// Ciphertext as stored; what an attacker with volume access sees.
  std::optional<std::string> raw_blob(const std::string& agent,
                                      const std::string& name) const;

  /// Terminates the pod, revokes its volume key, closes its channels.
  /// Idempotent; throws std::out_of_range for unknown agents.
  void destroy_pod(const std::string& agent);

  void inject_fault(const Fault& fault);
  const std::vector<std::string>& fault_manifest() const { return faults_; }

  /// Marks the beginning of one communication case in the capture stream.
  void begin_case(const std::string& src, const std::string& dst,
                  Method method);

  const std::vector<CaptureEvent>& collect_captures() const { return events_; }

  const Pod& pod(const std::string& agent) const;
  std::vector<std::string> pod_names() const;
  std::size_t channel_count() const { return channels_.size(); }
  const std::map<std::pair<std::string, std::string>, SecureChannel>&
  channels() const {
    return channels_;
  }
  const CertificateAuthority& ca() const { return ca_; }
  const KeyValueStore& key_store() const { return kv_; }
  const SimConfig& config() const { return config_; }
  const WorkflowGraph& graph() const { return graph_; }
  const PolicyDocument& policy() const { return policy_; }

  void set_clock_hour(int hour);
  int clock_hour() const { return config_.clock_hour; }

 private:
  struct PolicyAnswer {
    bool allow = false;
    int rules_evaluated = 0;
    bool queried_sidecar = false;
  };

  PolicyAnswer policy_check(const std::string& enforcer,
                            const std::string& requester,
                            const std::string& dst, Method method,
                            const std::string& path);
  SecureChannel* ensure_channel(Pod& src_pod, Pod& dst_pod);
  void capture(const std::string& pod, InterfaceKind iface,
               const std::string& src, const std::string& dst,
               Transport transport, std::optional<HttpInfo> http);
  double draw_duration(double mean);
  double draw_startup(const StartupCost& cost);
  Pod& pod_mut(const std::string& agent);

  WorkflowGraph graph_;
  PolicyDocument policy_;
  SimConfig config_;
  CertificateAuthority ca_;
  NodeAgent node_agent_;
  KeyValueStore kv_;
  std::map<std::string, Pod> pods_;
  std::map<std::string, EncryptedVolume> volumes_;
  std::map<std::pair<std::string, std::string>, SecureChannel> channels_;
  std::vector<CaptureEvent> events_;
  std::set<std::string> disabled_policy_;
  std::set<std::pair<std::string, std::string>> plaintext_pairs_;  // unordered
  std::set<std::pair<std::string, std::string>> rogue_edges_;      // ordered
  std::vector<std::string> faults_;
  std::mt19937_64 rng_;
  Tick tick_ = 0;
};

}  // namespace ztmesh

#endif  // ZTMESH_MESH_HPP_
