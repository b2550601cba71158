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

#include "ztmesh/harness.hpp"

#include <algorithm>
#include <sstream>

namespace ztmesh {

std::uint64_t required_capture_count(int services, int methods) {
  if (services < 2) throw std::invalid_argument("need at least two services");
  if (methods < 1) throw std::invalid_argument("need at least one method");
  const std::uint64_t n = services;
  const std::uint64_t m = methods;
  return 2 * (n * n * n - n * n) * m;
}

std::vector<CommunicationCase> enumerate_cases(
    const std::vector<std::string>& services,
    const std::vector<Method>& methods) {
  if (services.size() < 2) {
    throw std::invalid_argument("need at least two services");
  }
  if (methods.empty()) throw std::invalid_argument("need at least one method");

  std::vector<std::string> sorted_services = services;
  std::sort(sorted_services.begin(), sorted_services.end());
  sorted_services.erase(
      std::unique(sorted_services.begin(), sorted_services.end()),
      sorted_services.end());
  std::vector<Method> sorted_methods = methods;
  std::sort(sorted_methods.begin(), sorted_methods.end(),
            [](Method a, Method b) { return method_name(a) < method_name(b); });
  sorted_methods.erase(
      std::unique(sorted_methods.begin(), sorted_methods.end()),
      sorted_methods.end());

  std::vector<CommunicationCase> cases;
  cases.reserve(sorted_services.size() * (sorted_services.size() - 1) *
                sorted_methods.size());
  for (const auto& src : sorted_services) {
    for (const auto& dst : sorted_services) {
      if (src == dst) continue;
      for (Method m : sorted_methods) cases.push_back({src, dst, m});
    }
  }
  return cases;
}

std::string capture_role_name(CaptureRole role) {
  switch (role) {
    case CaptureRole::kSourceLoopback: return "source_loopback";
    case CaptureRole::kSourceExternal: return "source_external";
    case CaptureRole::kDestLoopback: return "dest_loopback";
    case CaptureRole::kDestExternal: return "dest_external";
    case CaptureRole::kBystanderLoopback: return "bystander_loopback";
    case CaptureRole::kBystanderExternal: return "bystander_external";
  }
  return "bystander_loopback";
}

CaptureRole classify(const std::string& pod, InterfaceKind iface,
                     const CommunicationCase& c) {
  const bool loopback = iface == InterfaceKind::kLoopback;
  if (pod == c.src) {
    return loopback ? CaptureRole::kSourceLoopback
                    : CaptureRole::kSourceExternal;
  }
  if (pod == c.dst) {
    return loopback ? CaptureRole::kDestLoopback : CaptureRole::kDestExternal;
  }
  return loopback ? CaptureRole::kBystanderLoopback
                  : CaptureRole::kBystanderExternal;
}

std::vector<Expectation> expected_behavior(const CommunicationCase& comm,
                                           const PolicyDocument& policy,
                                           const HarnessConfig& config) {
  RequestContext ctx;
  ctx.authorization_header = make_basic_credential(comm.src);
  ctx.method = comm.method;
  ctx.path = path_for_agent(config.path_template, comm.dst);
  ctx.clock_hour = config.clock_hour;
  ctx.extra_attributes = config.extra_attributes;
  const bool allowed = evaluate(policy, ctx).verdict == Verdict::kAllow;
  const int ok_status = comm.method == Method::kGet ? 200 : 201;

  std::vector<Expectation> out;
  out.reserve(config.services.size() * 2);
  for (const auto& pod : config.services) {
    for (InterfaceKind iface :
         {InterfaceKind::kLoopback, InterfaceKind::kExternal}) {
      Expectation e;
      e.comm = comm;
      e.pod = pod;
      e.iface = iface;
      e.role = classify(pod, iface, comm);
      Want want;  // default: absence
      if (allowed) {
        switch (e.role) {
          case CaptureRole::kSourceLoopback:
          case CaptureRole::kDestLoopback:
            want = {true, Transport::kPlaintextHttp, true, ok_status};
            break;
          case CaptureRole::kSourceExternal:
          case CaptureRole::kDestExternal:
            want = {true, Transport::kMtls, false, std::nullopt};
            break;
          default:
            break;
        }
      } else {
        // Denied traffic stops at the enforcing proxy. At the source that
        // means a 403 on the source loopback and silence everywhere else;
        // destination-side enforcement lets the encrypted request and the
        // 403 cross the externals but nothing reach the destination service.
        if (e.role == CaptureRole::kSourceLoopback) {
          want = {true, Transport::kPlaintextHttp, true, 403};
        } else if (config.enforcement == EnforcementPoint::kDestination &&
                   (e.role == CaptureRole::kSourceExternal ||
                    e.role == CaptureRole::kDestExternal)) {
          want = {true, Transport::kMtls, false, std::nullopt};
        }
      }
      e.want = want;
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<Expectation> sweep_expectations(
    const std::vector<CommunicationCase>& cases, const PolicyDocument& policy,
    const HarnessConfig& config) {
  std::vector<Expectation> out;
  out.reserve(cases.size() * config.services.size() * 2);
  for (const auto& comm : cases) {
    auto per_case = expected_behavior(comm, policy, config);
    out.insert(out.end(), per_case.begin(), per_case.end());
  }
  return out;
}

namespace {

std::string describe_want(const Want& want) {
  if (!want.traffic) return "absence";
  std::ostringstream oss;
  oss << "presence("
      << (want.transport == Transport::kMtls ? "mtls" : "plaintext_http");
  if (want.request) oss << ", request";
  if (want.status) oss << ", status " << *want.status;
  oss << ")";
  return oss.str();
}

std::string describe_records(const std::vector<const CaptureRecord*>& records) {
  if (records.empty()) return "absence";
  std::ostringstream oss;
  oss << records.size() << " record(s):";
  for (const auto* r : records) {
    oss << " [" << (r->transport == Transport::kMtls ? "mtls" : "plaintext");
    if (r->http) {
      oss << " " << method_name(r->http->method);
      if (r->http->status) oss << " -> " << *r->http->status;
    }
    oss << "]";
  }
  return oss.str();
}

}  // namespace

VerificationReport verify(const std::vector<CaptureEvent>& events,
                          const std::vector<CommunicationCase>& cases,
                          const std::vector<Expectation>& expectations,
                          const HarnessConfig& config) {
  // Partition the stream into case windows keyed by the sweep markers.
  std::map<CommunicationCase, std::vector<const CaptureRecord*>> windows;
  std::optional<CommunicationCase> current;
  for (const auto& event : events) {
    if (std::holds_alternative<CaseMarker>(event)) {
      const auto& m = std::get<CaseMarker>(event);
      CommunicationCase c{m.src, m.dst, m.method};
      if (windows.count(c)) {
        throw IncompleteRunError("sweep marker repeated for " + c.src + "->" +
                                 c.dst + " " + method_name(c.method));
      }
      current = c;
      windows[c];
    } else {
      if (!current) {
        throw IncompleteRunError("capture record before any sweep marker");
      }
      windows[*current].push_back(&std::get<CaptureRecord>(event));
    }
  }
  for (const auto& c : cases) {
    if (!windows.count(c)) {
      throw IncompleteRunError("sweep marker missing for " + c.src + "->" +
                               c.dst + " " + method_name(c.method));
    }
  }
  if (windows.size() != cases.size()) {
    throw IncompleteRunError("capture stream contains cases outside the sweep");
  }

  VerificationReport report;
  report.total_checks = expectations.size();
  std::set<Method> methods;
  for (const auto& c : cases) methods.insert(c.method);
  report.complete =
      !config.services.empty() &&
      report.total_checks ==
          required_capture_count(static_cast<int>(config.services.size()),
                                 static_cast<int>(methods.size()));

  for (const auto& e : expectations) {
    std::vector<const CaptureRecord*> records;
    for (const auto* r : windows.at(e.comm)) {
      if (r->pod == e.pod && r->iface == e.iface && r->src == e.comm.src &&
          r->dst == e.comm.dst) {
        records.push_back(r);
      }
    }

    bool pass;
    if (!e.want.traffic) {
      pass = records.empty();
    } else {
      bool transport_ok =
          !records.empty() &&
          std::all_of(records.begin(), records.end(), [&](const auto* r) {
            return !e.want.transport || r->transport == *e.want.transport;
          });
      bool request_ok =
          !e.want.request ||
          std::any_of(records.begin(), records.end(), [&](const auto* r) {
            return r->http && !r->http->status &&
                   r->http->method == e.comm.method;
          });
      bool status_ok =
          !e.want.status ||
          std::any_of(records.begin(), records.end(), [&](const auto* r) {
            return r->http && r->http->status &&
                   *r->http->status == *e.want.status;
          });
      pass = transport_ok && request_ok && status_ok;
    }
    if (pass) {
      ++report.passes;
    } else {
      report.violations.push_back({e.comm, e.pod, e.iface, e.role,
                                   describe_want(e.want),
                                   describe_records(records)});
    }
  }
  return report;
}

std::vector<CommunicationCase> run_sweep(Mesh& mesh,
                                         const std::vector<Method>& methods,
                                         const std::string& path_template) {
  auto cases = enumerate_cases(mesh.pod_names(), methods);
  for (const auto& c : cases) {
    mesh.begin_case(c.src, c.dst, c.method);
    try {
      mesh.send(c.src, c.dst, c.method,
                path_for_agent(path_template, c.dst));
    } catch (const MeshError&) {
      // Broken channels and dead pods are observations, not sweep failures.
    }
  }
  return cases;
}

const std::set<Method>* AccessControlMatrix::cell(const std::string& src,
                                                  const std::string& dst) const {
  auto it = cells.find({src, dst});
  if (it == cells.end() || it->second.empty()) return nullptr;
  return &it->second;
}

std::size_t AccessControlMatrix::cell_count() const {
  std::size_t n = 0;
  for (const auto& [_, methods] : cells) {
    if (!methods.empty()) ++n;
  }
  return n;
}

AccessControlMatrix extract_matrix(const PolicyDocument& policy,
                                   const std::vector<std::string>& services,
                                   const MatrixContext& context) {
  AccessControlMatrix matrix;
  matrix.services = services;
  std::sort(matrix.services.begin(), matrix.services.end());
  for (const auto& src : matrix.services) {
    for (const auto& dst : matrix.services) {
      if (src == dst) continue;  // diagonal stays empty
      for (Method m : context.methods) {
        RequestContext ctx;
        ctx.authorization_header = make_basic_credential(src);
        ctx.method = m;
        ctx.path = path_for_agent(context.path_template, dst);
        ctx.clock_hour = context.clock_hour;
        ctx.extra_attributes = context.extra_attributes;
        if (evaluate(policy, ctx).verdict == Verdict::kAllow) {
          matrix.cells[{src, dst}].insert(m);
        }
      }
    }
  }
  return matrix;
}

std::vector<MatrixDiff> diff_matrix(const AccessControlMatrix& a,
                                    const AccessControlMatrix& b) {
  std::vector<MatrixDiff> diffs;
  auto scan = [&](const AccessControlMatrix& lhs,
                  const AccessControlMatrix& rhs, bool in_a) {
    for (const auto& [key, methods] : lhs.cells) {
      for (Method m : methods) {
        auto it = rhs.cells.find(key);
        if (it == rhs.cells.end() || !it->second.count(m)) {
          diffs.push_back({key.first, key.second, m, in_a});
        }
      }
    }
  };
  scan(a, b, true);
  scan(b, a, false);
  return diffs;
}

}  // namespace ztmesh
