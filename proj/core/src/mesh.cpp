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

#include "ztmesh/mesh.hpp"

#include <algorithm>
#include <sstream>

#include "splitmix.hpp"

namespace ztmesh {

namespace {

using detail::mix64;

std::pair<std::string, std::string> unordered_pair(const std::string& a,
                                                   const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::uint64_t name_nonce(const std::string& name) {
  std::uint64_t h = 0x243F6A8885A308D3ULL;
  for (unsigned char c : name) h = mix64(h ^ c);
  return h;
}

}  // namespace

std::string seal_blob(const VolumeKey& key, const std::string& name,
                      const std::string& plaintext) {
  const std::uint64_t nonce = name_nonce(name);
  std::string out;
  out.reserve(plaintext.size() + 8);
  std::uint64_t state = mix64(key.k0 ^ nonce);
  for (std::size_t i = 0; i < plaintext.size(); ++i) {
    state = mix64(state);
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(plaintext[i]) ^ (state & 0xFF)));
  }
  std::uint64_t tag = mix64(key.k1 ^ nonce);
  for (unsigned char c : out) tag = mix64(tag ^ c);
  for (int i = 7; i >= 0; --i) {
    out.push_back(static_cast<char>((tag >> (8 * i)) & 0xFF));
  }
  return out;
}

std::string open_blob(const VolumeKey& key, const std::string& name,
                      const std::string& blob) {
  if (blob.size() < 8) throw VolumeDecryptionError("blob truncated");
  const std::uint64_t nonce = name_nonce(name);
  const std::string body = blob.substr(0, blob.size() - 8);
  std::uint64_t tag = mix64(key.k1 ^ nonce);
  for (unsigned char c : body) tag = mix64(tag ^ c);
  std::uint64_t stored = 0;
  for (std::size_t i = blob.size() - 8; i < blob.size(); ++i) {
    stored = (stored << 8) | static_cast<unsigned char>(blob[i]);
  }
  if (tag != stored) {
    throw VolumeDecryptionError("volume authentication failed");
  }
  std::string plain;
  plain.reserve(body.size());
  std::uint64_t state = mix64(key.k0 ^ nonce);
  for (char c : body) {
    state = mix64(state);
    plain.push_back(static_cast<char>(static_cast<unsigned char>(c) ^
                                      (state & 0xFF)));
  }
  return plain;
}

std::string fault_description(const Fault& fault) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DisablePolicySidecar>) {
          return "disable-policy:" + f.agent;
        } else if constexpr (std::is_same_v<T, PlaintextChannel>) {
          return "plaintext:" + f.a + "," + f.b;
        } else if constexpr (std::is_same_v<T, RogueEdge>) {
          return "rogue:" + f.src + "," + f.dst;
        } else {
          return "tamper:" + f.agent;
        }
      },
      fault);
}

std::string KeyValueStore::put(const std::string& hint, VolumeKey key) {
  std::string key_id = "vol-" + hint;
  entries_[key_id] = key;
  return key_id;
}

std::optional<VolumeKey> KeyValueStore::get(const std::string& key_id) const {
  auto it = entries_.find(key_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void KeyValueStore::revoke(const std::string& key_id) {
  entries_.erase(key_id);
}

Mesh::Mesh(const WorkflowGraph& graph, PolicyDocument policy, SimConfig config)
    : graph_(graph),
      policy_(std::move(policy)),
      config_(config),
      ca_(mix64(config.seed ^ 0x1D)),
      node_agent_(mix64(config.seed ^ 0x2E)),
      rng_(mix64(config.seed ^ 0x3F)) {
  auto validation = validate_workflow(graph_);
  if (!validation.ok()) {
    std::ostringstream oss;
    oss << "cannot deploy invalid workflow:";
    for (const auto& d : validation.defects) oss << " [" << d << "]";
    throw MeshError(oss.str());
  }
  if (config_.clock_hour < 0 || config_.clock_hour > 23) {
    throw MeshError("clock_hour outside 0-23");
  }

  const auto names = agent_names(graph_);
  std::set<std::string> name_set(names.begin(), names.end());
  for (const auto& [user, _] : policy_.user_roles) {
    if (!name_set.count(user)) {
      throw MeshError("policy identity is not a workflow agent: " + user);
    }
  }

  // Certificates must outlive any simulated run; rotation/expiry behaviour
  // lives in the identity module's own tests.
  ca_.set_certificate_lifetime(1ULL << 62);

  // Node TLS bootstrap, one node per actor (cluster).
  std::set<std::string> actors;
  for (const auto& a : graph_.agents) actors.insert(a.actor);
  for (const auto& actor : actors) {
    auto token = ca_.make_bootstrap_token("boot-" + actor, 1, ca_.now() + 1000);
    ca_.kubelet_bootstrap("node-" + actor, token);
  }

  // Volumes, identities and pods, in deterministic name order. Identities
  // are issued before anything can open a channel.
  for (const auto& agent : graph_.agents) {
    VolumeKey key{rng_(), rng_()};
    std::string key_id = kv_.put(agent.name, key);
    volumes_[agent.name] = EncryptedVolume{agent.name, key_id, {}};
  }
  for (const auto& name : names) {
    const AgentId* agent = nullptr;
    for (const auto& a : graph_.agents) {
      if (a.name == name) agent = &a;
    }
    Pod pod;
    pod.agent = *agent;
    pod.state = PodState::kScheduled;
    pod.has_policy_sidecar = !config_.no_policy_sidecar;
    pod.volume_key_id = volumes_.at(name).key_id;
    pod.region = region_of(graph_, name);

    auto jwt = ca_.make_auth_token(name, "ztmesh-ca", ca_.now() + 1000);
    pod.identity = node_agent_.request_identity(ca_, name, jwt);
    ca_.bind_service(name, name);

    pod.startup_duration = draw_startup(config_.service_init) +
                           draw_startup(config_.proxy_init);
    if (pod.has_policy_sidecar) {
      pod.startup_duration += draw_startup(config_.policy_init);
    }
    pod.state = PodState::kReady;
    pods_[name] = std::move(pod);
  }
}

double Mesh::draw_startup(const StartupCost& cost) {
  std::normal_distribution<double> dist(cost.mean, cost.sd);
  return std::max(0.0, dist(rng_));
}

double Mesh::draw_duration(double mean) {
  std::normal_distribution<double> dist(mean, config_.duration_sd_frac * mean);
  return std::max(1e-6, dist(rng_));
}

Pod& Mesh::pod_mut(const std::string& agent) {
  auto it = pods_.find(agent);
  if (it == pods_.end()) throw std::out_of_range("unknown agent: " + agent);
  return it->second;
}

const Pod& Mesh::pod(const std::string& agent) const {
  auto it = pods_.find(agent);
  if (it == pods_.end()) throw std::out_of_range("unknown agent: " + agent);
  return it->second;
}

std::vector<std::string> Mesh::pod_names() const {
  std::vector<std::string> names;
  names.reserve(pods_.size());
  for (const auto& [name, _] : pods_) names.push_back(name);
  return names;
}

void Mesh::set_clock_hour(int hour) {
  if (hour < 0 || hour > 23) throw std::invalid_argument("hour outside 0-23");
  config_.clock_hour = hour;
}

void Mesh::capture(const std::string& pod, InterfaceKind iface,
                   const std::string& src, const std::string& dst,
                   Transport transport, std::optional<HttpInfo> http) {
  // Ciphertext is opaque at the capture point.
  if (transport == Transport::kMtls) http.reset();
  events_.push_back(
      CaptureRecord{pod, iface, src, dst, transport, std::move(http), tick_++});
}

void Mesh::begin_case(const std::string& src, const std::string& dst,
                      Method method) {
  events_.push_back(CaseMarker{src, dst, method, tick_++});
}

Mesh::PolicyAnswer Mesh::policy_check(const std::string& enforcer,
                                      const std::string& requester,
                                      const std::string& dst, Method method,
                                      const std::string& path) {
  const Pod& pod = pods_.at(enforcer);
  // The rogue backdoor sits in the source proxy; an honest destination
  // proxy still consults its own sidecar.
  if (enforcer == requester && rogue_edges_.count({requester, dst})) {
    return {true, 0, false};
  }
  if (!pod.has_policy_sidecar || disabled_policy_.count(enforcer)) {
    return {true, 0, false};  // fail open: nothing to ask
  }
  if (config_.policy_allow_all) return {true, 0, true};

  RequestContext ctx;
  ctx.authorization_header = make_basic_credential(requester);
  ctx.method = method;
  ctx.path = path;
  ctx.clock_hour = config_.clock_hour;
  Decision decision = evaluate(policy_, ctx);
  return {decision.verdict == Verdict::kAllow, decision.rules_evaluated, true};
}

SecureChannel* Mesh::ensure_channel(Pod& src_pod, Pod& dst_pod) {
  auto key = unordered_pair(src_pod.agent.name, dst_pod.agent.name);
  auto it = channels_.find(key);
  if (it != channels_.end()) return &it->second;

  // Mutual verification, both directions, against CA and secure naming.
  auto src_ok = ca_.verify_cert(src_pod.identity.certificate, tick_,
                                src_pod.agent.name);
  auto dst_ok = ca_.verify_cert(dst_pod.identity.certificate, tick_,
                                dst_pod.agent.name);
  if (!src_ok.ok || !dst_ok.ok) {
    // The failed handshake is visible on both externals as opaque bytes.
    capture(src_pod.agent.name, InterfaceKind::kExternal, src_pod.agent.name,
            dst_pod.agent.name, Transport::kMtls, std::nullopt);
    capture(dst_pod.agent.name, InterfaceKind::kExternal, src_pod.agent.name,
            dst_pod.agent.name, Transport::kMtls, std::nullopt);
    throw ChannelError("mutual verification failed between " +
                       src_pod.agent.name + " and " + dst_pod.agent.name +
                       ": " + (src_ok.ok ? dst_ok.reason : src_ok.reason));
  }
  SecureChannel channel;
  channel.pod_a = key.first;
  channel.pod_b = key.second;
  channel.session_id = rng_();
  channel.transport = Transport::kMtls;
  // Certificates stored in pair order, not send direction.
  if (src_pod.agent.name == key.first) {
    channel.peer_certificates = {src_pod.identity.certificate,
                                 dst_pod.identity.certificate};
  } else {
    channel.peer_certificates = {dst_pod.identity.certificate,
                                 src_pod.identity.certificate};
  }
  channel.established_at = tick_;
  auto [pos, _] = channels_.emplace(key, std::move(channel));
  return &pos->second;
}

Response Mesh::send(const std::string& src, const std::string& dst,
                    Method method, const std::string& path,
                    const std::string& body) {
  if (src == dst) {
    throw std::invalid_argument("self-communication is forbidden: " + src);
  }
  Pod& src_pod = pod_mut(src);
  Pod& dst_pod = pod_mut(dst);
  if (src_pod.state != PodState::kReady) {
    throw TransportError("source pod not ready: " + src);
  }
  const std::string norm_path = normalize_path(path);
  const int ok_status = method == Method::kGet ? 200 : 201;

  // Service A emits the request in the clear on its own loopback.
  capture(src, InterfaceKind::kLoopback, src, dst, Transport::kPlaintextHttp,
          HttpInfo{method, norm_path, std::nullopt});

  double policy_cost = 0;
  const bool check_src =
      config_.enforcement_point != EnforcementPoint::kDestination;
  if (check_src) {
    auto answer = policy_check(src, src, dst, method, norm_path);
    if (answer.queried_sidecar) {
      policy_cost += config_.policy_query_base +
                     config_.policy_per_rule * answer.rules_evaluated;
    }
    if (!answer.allow) {
      // Nothing leaves the pod; the proxy answers 403 on the loopback.
      capture(src, InterfaceKind::kLoopback, src, dst,
              Transport::kPlaintextHttp, HttpInfo{method, norm_path, 403});
      return {403, "forbidden", draw_duration(policy_cost)};
    }
  }

  if (dst_pod.state != PodState::kReady) {
    throw TransportError("destination pod not ready: " + dst);
  }

  const bool plaintext_pair = plaintext_pairs_.count(unordered_pair(src, dst));
  Transport wire = Transport::kPlaintextHttp;
  if (!plaintext_pair) {
    ensure_channel(src_pod, dst_pod);  // throws ChannelError on failure
    wire = Transport::kMtls;
  }

  const HttpInfo request{method, norm_path, std::nullopt};
  capture(src, InterfaceKind::kExternal, src, dst, wire, request);
  capture(dst, InterfaceKind::kExternal, src, dst, wire, request);

  if (config_.enforcement_point != EnforcementPoint::kSource) {
    // Destination-side enforcement: the destination proxy asks its own
    // sidecar before anything reaches service B.
    auto answer = policy_check(dst, src, dst, method, norm_path);
    if (answer.queried_sidecar) {
      policy_cost += config_.policy_query_base +
                     config_.policy_per_rule * answer.rules_evaluated;
    }
    if (!answer.allow) {
      const HttpInfo denied{method, norm_path, 403};
      capture(dst, InterfaceKind::kExternal, src, dst, wire, denied);
      capture(src, InterfaceKind::kExternal, src, dst, wire, denied);
      capture(src, InterfaceKind::kLoopback, src, dst,
              Transport::kPlaintextHttp, denied);
      double net = src_pod.region == dst_pod.region ? config_.net_intra_mean
                                                    : config_.net_inter_mean;
      return {403, "forbidden", draw_duration(net + policy_cost)};
    }
  }

  // Proxy B hands the request to its service in the clear; the service
  // answers and the response retraces the path.
  capture(dst, InterfaceKind::kLoopback, src, dst, Transport::kPlaintextHttp,
          request);
  const HttpInfo response{method, norm_path, ok_status};
  capture(dst, InterfaceKind::kLoopback, src, dst, Transport::kPlaintextHttp,
          response);
  capture(dst, InterfaceKind::kExternal, src, dst, wire, response);
  capture(src, InterfaceKind::kExternal, src, dst, wire, response);
  capture(src, InterfaceKind::kLoopback, src, dst, Transport::kPlaintextHttp,
          response);

  double net = src_pod.region == dst_pod.region ? config_.net_intra_mean
                                                : config_.net_inter_mean;
  return {ok_status, body, draw_duration(net + policy_cost)};
}

void Mesh::store_data(const std::string& agent, const std::string& name,
                      const std::string& plaintext) {
  Pod& pod = pod_mut(agent);
  if (pod.state != PodState::kReady) {
    throw TransportError("pod not ready: " + agent);
  }
  auto key = kv_.get(pod.volume_key_id);
  if (!key) throw VolumeDecryptionError("volume key revoked for " + agent);
  volumes_.at(agent).blobs[name] = seal_blob(*key, name, plaintext);
}

std::string Mesh::load_data(const std::string& agent, const std::string& name) {
  Pod& pod = pod_mut(agent);
  auto& own = volumes_.at(agent);
  auto blob = own.blobs.find(name);
  if (blob == own.blobs.end()) {
    // An agent can only address its own volume; asking for a name that
    // lives in someone else's volume is a cross-agent access attempt.
    for (const auto& [other, volume] : volumes_) {
      if (other != agent && volume.blobs.count(name)) {
        throw VolumeAuthorizationError(agent + " may not read volume of " +
                                       other);
      }
    }
    throw std::out_of_range("no such blob: " + name);
  }
  auto key = kv_.get(pod.volume_key_id);
  if (!key) throw VolumeDecryptionError("volume key revoked for " + agent);
  return open_blob(*key, name, blob->second);
}

std::optional<std::string> Mesh::raw_blob(const std::string& agent,
                                          const std::string& name) const {
  auto vol = volumes_.find(agent);
  if (vol == volumes_.end()) return std::nullopt;
  auto it = vol->second.blobs.find(name);
  if (it == vol->second.blobs.end()) return std::nullopt;
  return it->second;
}

void Mesh::destroy_pod(const std::string& agent) {
  Pod& pod = pod_mut(agent);
  if (pod.state == PodState::kTerminated) return;  // idempotent
  pod.state = PodState::kTerminated;
  kv_.revoke(pod.volume_key_id);
  for (auto it = channels_.begin(); it != channels_.end();) {
    if (it->first.first == agent || it->first.second == agent) {
      it = channels_.erase(it);
    } else {
      ++it;
    }
  }
}

void Mesh::inject_fault(const Fault& fault) {
  auto require_pod = [this](const std::string& agent) {
    if (!pods_.count(agent)) {
      throw std::out_of_range("unknown fault target: " + agent);
    }
  };
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, DisablePolicySidecar>) {
          require_pod(f.agent);
          disabled_policy_.insert(f.agent);
        } else if constexpr (std::is_same_v<T, PlaintextChannel>) {
          require_pod(f.a);
          require_pod(f.b);
          plaintext_pairs_.insert(unordered_pair(f.a, f.b));
          channels_.erase(unordered_pair(f.a, f.b));
        } else if constexpr (std::is_same_v<T, RogueEdge>) {
          require_pod(f.src);
          require_pod(f.dst);
          rogue_edges_.insert({f.src, f.dst});
        } else {
          require_pod(f.agent);
          // Corrupt the stored certificate; future handshakes cannot verify.
          pods_.at(f.agent).identity.certificate.signature ^= 1;
          for (auto it = channels_.begin(); it != channels_.end();) {
            if (it->first.first == f.agent || it->first.second == f.agent) {
              it = channels_.erase(it);
            } else {
              ++it;
            }
          }
        }
      },
      fault);
  faults_.push_back(fault_description(fault));
}

}  // namespace ztmesh
