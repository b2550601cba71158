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

#include "ztmesh/identity.hpp"

#include <sstream>

#include "splitmix.hpp"

namespace ztmesh {

namespace {

using detail::mix64;

class KeyedMacScheme final : public SignatureScheme {
 public:
  std::uint64_t sign(std::uint64_t key,
                     const std::string& message) const override {
    std::uint64_t h = mix64(key ^ 0xA0761D6478BD642FULL);
    for (unsigned char c : message) h = mix64(h ^ c);
    return mix64(h ^ message.size() ^ key);
  }
};

}  // namespace

std::shared_ptr<const SignatureScheme> keyed_mac_scheme() {
  static const auto scheme = std::make_shared<const KeyedMacScheme>();
  return scheme;
}

CertificateAuthority::CertificateAuthority(
    std::uint64_t seed, std::shared_ptr<const SignatureScheme> scheme)
    : scheme_(std::move(scheme)), rng_(mix64(seed ^ 0xCA)) {
  signing_key_ = rng_();
  token_key_ = rng_();
}

BootstrapToken CertificateAuthority::make_bootstrap_token(
    const std::string& token_id, int usage_budget, Tick expiry) {
  BootstrapToken token;
  token.token_id = token_id;
  token.secret = scheme_->sign(token_key_, "bootstrap:" + token_id);
  token.usage_budget = usage_budget;
  token.expiry = expiry;
  return token;
}

std::string CertificateAuthority::cert_payload(
    const CertificateRecord& cert) const {
  std::ostringstream oss;
  oss << cert.subject << '|' << cert.issuer << '|' << cert.serial << '|'
      << cert.not_before << '|' << cert.not_after << '|'
      << cert.public_key_fingerprint;
  return oss.str();
}

void CertificateAuthority::record(const char* event, const std::string& subject,
                                  std::uint64_t serial) {
  audit_.push_back({event, subject, serial, now_});
}

CertificateRecord CertificateAuthority::issue(const std::string& subject,
                                              std::uint64_t fingerprint,
                                              const char* event) {
  CertificateRecord cert;
  cert.subject = subject;
  cert.issuer = name_;
  cert.serial = next_serial_++;
  cert.not_before = now_;
  cert.not_after = now_ + certificate_lifetime_;
  cert.public_key_fingerprint = fingerprint;
  cert.signature = scheme_->sign(signing_key_, cert_payload(cert));
  record(event, subject, cert.serial);
  return cert;
}

CertificateRecord CertificateAuthority::kubelet_bootstrap(
    const std::string& node_name, BootstrapToken& token) {
  if (!available_) throw CaUnavailableError("node controller unavailable");

  // Step 1: authenticate with the limited-usage token.
  if (token.usage_budget <= 0) {
    throw IdentityError("bootstrap token exhausted: " + token.token_id);
  }
  if (token.expiry <= now_) {
    throw IdentityError("bootstrap token expired: " + token.token_id);
  }
  if (token.secret != scheme_->sign(token_key_, "bootstrap:" + token.token_id)) {
    throw IdentityError("bootstrap token forged: " + token.token_id);
  }
  token.usage_budget -= 1;

  // Step 2: limited credentials, good only for submitting a CSR. The node
  // generates its keypair locally; here that is a fresh draw and the CSR
  // carries its fingerprint.
  const std::uint64_t private_key = rng_();
  const std::uint64_t fingerprint = mix64(private_key);

  // Step 3: CSR submission.
  CertificateSigningRequest csr{node_name, fingerprint, rng_()};
  if (csr.subject.empty()) throw IdentityError("empty CSR subject");
  if (approval_hook_ && !approval_hook_(csr)) {
    throw IdentityError("CSR approval refused for " + node_name);
  }

  // Step 4: approval and issuance.
  return issue(node_name, fingerprint, "bootstrap");
}

AuthToken CertificateAuthority::make_auth_token(const std::string& subject,
                                                const std::string& audience,
                                                Tick expiry) {
  AuthToken token;
  token.subject = subject;
  token.audience = audience;
  token.expiry = expiry;
  token.signature = scheme_->sign(
      token_key_, "jwt:" + subject + "|" + audience + "|" +
                      std::to_string(expiry));
  return token;
}

bool verify_auth_token(const SignatureScheme& scheme, std::uint64_t key,
                       const AuthToken& token, Tick now) {
  if (token.expiry <= now) return false;
  return scheme.verify(key,
                       "jwt:" + token.subject + "|" + token.audience + "|" +
                           std::to_string(token.expiry),
                       token.signature);
}

CertificateRecord CertificateAuthority::sign_csr(
    const CertificateSigningRequest& csr, const AuthToken& jwt) {
  if (!available_) throw CaUnavailableError("certificate authority unavailable");
  if (!verify_auth_token(*scheme_, token_key_, jwt, now_)) {
    throw IdentityError("identity request JWT rejected for " + csr.subject);
  }
  if (csr.subject.empty()) throw IdentityError("empty CSR subject");
  if (jwt.subject != csr.subject) {
    throw IdentityError("JWT subject does not match CSR subject");
  }
  if (approval_hook_ && !approval_hook_(csr)) {
    throw IdentityError("CSR approval refused for " + csr.subject);
  }
  return issue(csr.subject, csr.public_key_fingerprint, "issue");
}

VerifyResult CertificateAuthority::verify_cert(
    const CertificateRecord& cert, Tick now,
    const std::optional<std::string>& claimed_service) const {
  auto fail = [&](const std::string& reason) {
    audit_.push_back({"verify_fail", cert.subject, cert.serial, now});
    return VerifyResult{false, reason};
  };
  if (!scheme_->verify(signing_key_, cert_payload(cert), cert.signature)) {
    return fail("signature verification failed");
  }
  if (now < cert.not_before) return fail("certificate not yet valid");
  if (now >= cert.not_after) return fail("certificate expired");
  if (revoked_.count(cert.serial)) return fail("certificate revoked");
  if (claimed_service) {
    auto it = naming_.find(cert.subject);
    if (it == naming_.end() || it->second != *claimed_service) {
      return fail("secure naming mismatch for service " + *claimed_service);
    }
  }
  return {true, "ok"};
}

void CertificateAuthority::revoke(std::uint64_t serial) {
  revoked_.insert(serial);
}

bool CertificateAuthority::is_revoked(std::uint64_t serial) const {
  return revoked_.count(serial) != 0;
}

void CertificateAuthority::bind_service(const std::string& identity,
                                        const std::string& service) {
  naming_[identity] = service;
}

Keypair NodeAgent::generate_keypair() {
  Keypair kp;
  kp.private_key = rng_();
  kp.fingerprint = mix64(kp.private_key);
  return kp;
}

IdentityBundle NodeAgent::request_identity(CertificateAuthority& ca,
                                           const std::string& proxy_subject,
                                           const AuthToken& jwt) {
  // Step A: the proxy's identity request arrives with its JWT.
  // Step B: the node agent generates the key pair and CSR, forwards both.
  Keypair kp = generate_keypair();
  CertificateSigningRequest csr{proxy_subject, kp.fingerprint, rng_()};
  CertificateRecord cert = ca.sign_csr(csr, jwt);
  // Step C: key pair and signed certificate go back to the proxy.
  return {kp, cert};
}

IdentityBundle NodeAgent::rotate(CertificateAuthority& ca,
                                 const IdentityBundle& current,
                                 const AuthToken& jwt) {
  IdentityBundle fresh = request_identity(ca, current.certificate.subject, jwt);
  // Old certificate no longer accepted for new handshakes; sessions opened
  // under it keep running until closed.
  ca.revoke(current.certificate.serial);
  ca.record("rotate", fresh.certificate.subject, fresh.certificate.serial);
  return fresh;
}

}  // namespace ztmesh
