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

#ifndef ZTMESH_IDENTITY_HPP_
#define ZTMESH_IDENTITY_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ztmesh {

using Tick = std::uint64_t;

/// Keyed 64-bit MAC used as the simulation's signature primitive. Not a
/// security claim: it gives the bootstrap machinery real accept/reject
/// behaviour (any mutated field fails verification) without dragging a
/// crypto library into a simulator.
struct SignatureScheme {
  virtual ~SignatureScheme() = default;
  virtual std::uint64_t sign(std::uint64_t key,
                             const std::string& message) const = 0;
  virtual bool verify(std::uint64_t key, const std::string& message,
                      std::uint64_t signature) const {
    return sign(key, message) == signature;
  }
};

std::shared_ptr<const SignatureScheme> keyed_mac_scheme();

struct BootstrapToken {
  std::string token_id;
  std::uint64_t secret = 0;
  int usage_budget = 1;
  Tick expiry = 0;
};

/// Private key material never leaves the node agent / proxy boundary; the
/// CA only ever sees the fingerprint inside a CSR.
struct Keypair {
  std::uint64_t private_key = 0;
  std::uint64_t fingerprint = 0;
};

struct CertificateSigningRequest {
  std::string subject;
  std::uint64_t public_key_fingerprint = 0;
  std::uint64_t nonce = 0;
};

struct CertificateRecord {
  std::string subject;
  std::string issuer;
  std::uint64_t serial = 0;
  Tick not_before = 0;
  Tick not_after = 0;
  std::uint64_t public_key_fingerprint = 0;
  std::uint64_t signature = 0;

  auto operator<=>(const CertificateRecord&) const = default;
};

/// JWT-role bearer token authenticating proxy identity requests.
struct AuthToken {
  std::string subject;
  std::string audience;
  Tick expiry = 0;
  std::uint64_t signature = 0;
};

struct VerifyResult {
  bool ok = false;
  std::string reason;
};

struct IdentityBundle {
  Keypair keypair;
  CertificateRecord certificate;
};

struct AuditEvent {
  std::string event;  // bootstrap | issue | rotate | verify_fail
  std::string subject;
  std::uint64_t serial = 0;
  Tick tick = 0;
};

class IdentityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CA unreachable; the caller may retry and keeps its previous identity.
class CaUnavailableError : public IdentityError {
 public:
  using IdentityError::IdentityError;
};

/// Control plane of the mesh: node controller, certificate authority and
/// secure-naming source rolled into one serialized decision point.
/// Requests are processed strictly in submission order.
class CertificateAuthority {
 public:
  explicit CertificateAuthority(
      std::uint64_t seed = 0,
      std::shared_ptr<const SignatureScheme> scheme = keyed_mac_scheme());

  const std::string& name() const { return name_; }

  Tick now() const { return now_; }
  void advance_time(Tick delta) { now_ += delta; }

  /// Simulates control-plane outage; issuance fails until restored.
  void set_available(bool available) { available_ = available; }

  BootstrapToken make_bootstrap_token(const std::string& token_id,
                                      int usage_budget, Tick expiry);

  /// Node TLS bootstrap, the four-step machine: token authentication,
  /// limited credentials, CSR submission, approval + issuance. Decrements
  /// the token budget. Throws IdentityError on rejection at any step.
  CertificateRecord kubelet_bootstrap(const std::string& node_name,
                                      BootstrapToken& token);

  AuthToken make_auth_token(const std::string& subject,
                            const std::string& audience, Tick expiry);

  /// CSR signing path used by the node agent: authenticates the JWT, checks
  /// the CSR subject matches, signs. Throws on bad tokens or outage.
  CertificateRecord sign_csr(const CertificateSigningRequest& csr,
                             const AuthToken& jwt);

  /// Signature, validity window, revocation, and (when a service name is
  /// claimed) secure-naming consistency. Failure is a value, never a throw.
  VerifyResult verify_cert(
      const CertificateRecord& cert, Tick now,
      const std::optional<std::string>& claimed_service = std::nullopt) const;

  void revoke(std::uint64_t serial);
  bool is_revoked(std::uint64_t serial) const;

  /// Secure naming: identity -> service it is authorized to run. Derived
  /// from the orchestrator's authoritative state, one service per identity.
  void bind_service(const std::string& identity, const std::string& service);
  const std::map<std::string, std::string>& secure_naming() const {
    return naming_;
  }

  Tick certificate_lifetime() const { return certificate_lifetime_; }
  void set_certificate_lifetime(Tick lifetime) {
    certificate_lifetime_ = lifetime;
  }

  const std::vector<AuditEvent>& audit_log() const { return audit_; }

  /// Hook for tests that need an approval step other than auto-approve.
  using ApprovalHook = bool (*)(const CertificateSigningRequest&);
  void set_approval_hook(ApprovalHook hook) { approval_hook_ = hook; }

 private:
  friend class NodeAgent;

  CertificateRecord issue(const std::string& subject,
                          std::uint64_t fingerprint, const char* event);
  std::string cert_payload(const CertificateRecord& cert) const;
  void record(const char* event, const std::string& subject,
              std::uint64_t serial);

  std::string name_ = "ztmesh-ca";
  std::shared_ptr<const SignatureScheme> scheme_;
  std::uint64_t signing_key_;
  std::uint64_t token_key_;
  std::mt19937_64 rng_;
  Tick now_ = 0;
  bool available_ = true;
  std::uint64_t next_serial_ = 1;
  std::set<std::uint64_t> revoked_;
  std::map<std::string, std::string> naming_;
  Tick certificate_lifetime_ = 10'000;
  mutable std::vector<AuditEvent> audit_;  // verification failures audit too
  ApprovalHook approval_hook_ = nullptr;
};

/// Per-node helper that generates key material on behalf of proxies and
/// relays CSRs to the CA. The CA never sees private keys.
class NodeAgent {
 public:
  explicit NodeAgent(std::uint64_t seed = 1) : rng_(seed) {}

  /// Identity request on behalf of a proxy, authenticated by the JWT.
  /// Returns keypair + certificate; throws IdentityError / CaUnavailableError
  /// and leaves the proxy identity-less on failure.
  IdentityBundle request_identity(CertificateAuthority& ca,
                                  const std::string& proxy_subject,
                                  const AuthToken& jwt);

  /// Fresh keypair + certificate; the previous certificate is revoked for
  /// new handshakes once the new one is issued. On failure the old bundle
  /// stays valid and is returned unchanged inside the thrown error path.
  IdentityBundle rotate(CertificateAuthority& ca, const IdentityBundle& current,
                        const AuthToken& jwt);

 private:
  Keypair generate_keypair();

  std::mt19937_64 rng_;
};

/// JWT check used by the CA; exposed for tests.
bool verify_auth_token(const SignatureScheme& scheme, std::uint64_t key,
                       const AuthToken& token, Tick now);

}  // namespace ztmesh

#endif  // ZTMESH_IDENTITY_HPP_
