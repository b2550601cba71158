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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "support/oracles.hpp"
#include "ztmesh/json_io.hpp"
#include "ztmesh/mesh.hpp"
#include "ztmesh/policy.hpp"

using namespace ztmesh;

namespace {

Mesh make_reference_mesh(SimConfig config = {}) {
  return Mesh(reference_workflow(), reference_policy(), config);
}

std::vector<CaptureRecord> records_of(const Mesh& mesh) {
  std::vector<CaptureRecord> records;
  for (const auto& event : mesh.collect_captures()) {
    if (std::holds_alternative<CaptureRecord>(event)) {
      records.push_back(std::get<CaptureRecord>(event));
    }
  }
  return records;
}

}  // namespace

TEST_CASE("deploying the reference workflow") {
  auto mesh = make_reference_mesh();
  const auto names = mesh.pod_names();
  REQUIRE(names.size() == 7);
  int proxy_certs = 0;
  for (const auto& event : mesh.ca().audit_log()) {
    if (event.event == "issue") ++proxy_certs;
  }
  CHECK(proxy_certs == 7);
  CHECK(mesh.key_store().size() == 7);
  for (const auto& name : names) {
    const auto& pod = mesh.pod(name);
    CHECK(pod.state == PodState::kReady);
    CHECK(pod.has_policy_sidecar);
    CHECK(pod.containers() == std::vector<std::string>{"service", "proxy",
                                                       "policy_sidecar",
                                                       "capture"});
    CHECK(pod.startup_duration > 0);
    CHECK(mesh.ca().verify_cert(pod.identity.certificate, 0, name).ok);
  }
  CHECK(mesh.channel_count() == 0);      // nothing sent yet
  CHECK(mesh.collect_captures().empty());  // no traffic, no records
}

TEST_CASE("single-agent deployment") {
  WorkflowGraph g;
  g.owner = {"O", "O"};
  g.agents = {{"O", "O"}};
  Mesh mesh(g, compile_from_workflow(g), {});
  CHECK(mesh.pod_names() == std::vector<std::string>{"O"});
  CHECK(mesh.channel_count() == 0);
}

TEST_CASE("policy sidecar adds its startup share") {
  double with = 0;
  double without = 0;
  const int deploys = 40;
  for (int i = 0; i < deploys; ++i) {
    SimConfig config;
    config.seed = 100 + i;
    auto mesh = make_reference_mesh(config);
    config.no_policy_sidecar = true;
    Mesh bare(reference_workflow(), reference_policy(), config);
    for (const auto& name : mesh.pod_names()) {
      with += mesh.pod(name).startup_duration;
      without += bare.pod(name).startup_duration;
      CHECK_FALSE(bare.pod(name).has_policy_sidecar);
      CHECK(bare.pod(name).containers() ==
            std::vector<std::string>{"service", "proxy", "capture"});
    }
  }
  with /= deploys * 7;
  without /= deploys * 7;
  CHECK(with > without + 1.0);      // the sidecar init term
  CHECK(with == doctest::Approx(7.87).epsilon(0.05));
  CHECK(without == doctest::Approx(5.93).epsilon(0.05));
}

TEST_CASE("deploy aborts when identity issuance fails") {
  // An unsatisfiable policy identity set is caught up front.
  PolicyDocument bad = reference_policy();
  bad.user_roles["ghost"] = {"ghost"};
  CHECK_THROWS_AS(Mesh(reference_workflow(), bad, {}), MeshError);
}

TEST_CASE("allowed request walks the full data path") {
  auto mesh = make_reference_mesh();
  const auto response = mesh.send("owner", "vfx-1", Method::kPost,
                                  "/api/vfx-1", "frame-data");
  CHECK(response.status == 201);
  CHECK(response.body == "frame-data");
  CHECK(response.duration > 0);
  CHECK(mesh.channel_count() == 1);

  const auto records = records_of(mesh);
  REQUIRE(records.size() >= 4);
  std::set<std::pair<std::string, InterfaceKind>> points;
  for (const auto& r : records) {
    points.insert({r.pod, r.iface});
    CHECK(r.src == "owner");
    CHECK(r.dst == "vfx-1");
    if (r.iface == InterfaceKind::kExternal) {
      CHECK(r.transport == Transport::kMtls);
      CHECK_FALSE(r.http.has_value());
    } else {
      CHECK(r.transport == Transport::kPlaintextHttp);
      REQUIRE(r.http.has_value());
      CHECK(r.http->method == Method::kPost);
    }
  }
  CHECK(points.size() == 4);  // two loopbacks and two externals

  // Ticks are strictly increasing across the stream.
  for (std::size_t i = 1; i < records.size(); ++i) {
    CHECK(records[i].tick > records[i - 1].tick);
  }
}

TEST_CASE("allowed GET answers 200") {
  const auto graph = reference_workflow();
  Mesh mesh(graph, compile_from_workflow(graph, Method::kGet), {});
  CHECK(mesh.send("owner", "vfx-1", Method::kGet, "/api/vfx-1").status == 200);
}

TEST_CASE("denied request never leaves the pod") {
  auto mesh = make_reference_mesh();
  const auto response = mesh.send("owner", "color", Method::kPost, "/api/color");
  CHECK(response.status == 403);
  for (const auto& r : records_of(mesh)) {
    CHECK(r.pod == "owner");
    CHECK(r.iface == InterfaceKind::kLoopback);
  }
  CHECK(mesh.channel_count() == 0);
  const auto records = records_of(mesh);
  REQUIRE(records.size() == 2);
  CHECK_FALSE(records[0].http->status.has_value());
  CHECK(records[1].http->status == 403);
}

TEST_CASE("self-communication is a precondition violation") {
  auto mesh = make_reference_mesh();
  CHECK_THROWS_AS(mesh.send("owner", "owner", Method::kPost, "/api/owner"),
                  std::invalid_argument);
}

TEST_CASE("volume storage round trip and isolation") {
  auto mesh = make_reference_mesh();
  mesh.store_data("vfx-1", "frame", "plaintext-frame");
  CHECK(mesh.load_data("vfx-1", "frame") == "plaintext-frame");

  // Another agent addressing the same name is a cross-volume attempt.
  CHECK_THROWS_AS(mesh.load_data("vfx-2", "frame"), VolumeAuthorizationError);

  // Ciphertext at rest never equals (or contains) the plaintext.
  const auto blob = mesh.raw_blob("vfx-1", "frame");
  REQUIRE(blob.has_value());
  CHECK(*blob != "plaintext-frame");
  CHECK(blob->find("plaintext-frame") == std::string::npos);

  CHECK_THROWS_AS(mesh.load_data("vfx-1", "missing"), std::out_of_range);

  SUBCASE("empty plaintext still authenticates") {
    mesh.store_data("color", "empty", "");
    CHECK(mesh.load_data("color", "empty").empty());
  }
}

TEST_CASE("volume sealing is authenticated") {
  const VolumeKey key{0xDEAD, 0xBEEF};
  const std::string blob = seal_blob(key, "frame", "movie-bits");
  CHECK(open_blob(key, "frame", blob) == "movie-bits");

  std::mt19937_64 rng(97);
  for (int i = 0; i < 200; ++i) {
    auto corrupted = blob;
    corrupted[rng() % corrupted.size()] ^=
        static_cast<char>(1 << (rng() % 8));
    CHECK_THROWS_AS(open_blob(key, "frame", corrupted),
                    VolumeDecryptionError);
  }
  // Wrong key or wrong name (nonce) also fail authentication.
  CHECK_THROWS_AS(open_blob({0xDEAD, 0xBEE0}, "frame", blob),
                  VolumeDecryptionError);
  CHECK_THROWS_AS(open_blob(key, "other", blob), VolumeDecryptionError);
  CHECK_THROWS_AS(open_blob(key, "frame", "short"), VolumeDecryptionError);
}

TEST_CASE("pod destruction revokes everything") {
  auto mesh = make_reference_mesh();
  mesh.store_data("color", "notes", "grading");
  mesh.destroy_pod("color");

  CHECK(mesh.pod("color").state == PodState::kTerminated);
  CHECK_THROWS_AS(mesh.send("vfx-2", "color", Method::kPost, "/api/color"),
                  TransportError);
  CHECK_THROWS_AS(mesh.send("color", "hdr", Method::kPost, "/api/hdr"),
                  TransportError);
  CHECK_THROWS_AS(mesh.load_data("color", "notes"), VolumeDecryptionError);

  mesh.destroy_pod("color");  // idempotent
  CHECK(mesh.pod("color").state == PodState::kTerminated);
  CHECK_THROWS_AS(mesh.destroy_pod("nobody"), std::out_of_range);
}

TEST_CASE("destroying a pod closes its channels") {
  auto mesh = make_reference_mesh();
  CHECK(mesh.send("owner", "vfx-1", Method::kPost, "/api/vfx-1").status == 201);
  CHECK(mesh.channel_count() == 1);
  mesh.destroy_pod("vfx-1");
  CHECK(mesh.channel_count() == 0);
}

TEST_CASE("disable-policy fault lets everything out of that pod") {
  auto mesh = make_reference_mesh();
  mesh.inject_fault(DisablePolicySidecar{"vfx-2"});
  CHECK(mesh.fault_manifest() ==
        std::vector<std::string>{"disable-policy:vfx-2"});
  // A flow the policy denies now escapes.
  CHECK(mesh.send("vfx-2", "hdr", Method::kPost, "/api/hdr").status == 201);
  // Other sources still enforce.
  CHECK(mesh.send("vfx-3", "hdr", Method::kPost, "/api/hdr").status == 403);
}

TEST_CASE("plaintext-channel fault downgrades one pair") {
  auto mesh = make_reference_mesh();
  mesh.inject_fault(PlaintextChannel{"owner", "vfx-1"});
  CHECK(mesh.send("owner", "vfx-1", Method::kPost, "/api/vfx-1").status == 201);
  bool saw_external_plaintext = false;
  for (const auto& r : records_of(mesh)) {
    if (r.iface == InterfaceKind::kExternal) {
      CHECK(r.transport == Transport::kPlaintextHttp);
      REQUIRE(r.http.has_value());  // payload readable on the wire
      saw_external_plaintext = true;
    }
  }
  CHECK(saw_external_plaintext);
  // Unrelated pairs stay encrypted (request + response on both externals).
  CHECK(mesh.send("vfx-1", "vfx-2", Method::kPost, "/api/vfx-2").status == 201);
  int mtls_externals = 0;
  for (const auto& r : records_of(mesh)) {
    if (r.iface == InterfaceKind::kExternal && r.transport == Transport::kMtls) {
      CHECK(r.src == "vfx-1");
      CHECK(r.dst == "vfx-2");
      ++mtls_externals;
    }
  }
  CHECK(mtls_externals == 4);
}

TEST_CASE("rogue edge opens exactly one covert flow") {
  auto mesh = make_reference_mesh();
  mesh.inject_fault(RogueEdge{"color", "owner"});
  CHECK(mesh.send("color", "owner", Method::kPost, "/api/owner").status == 201);
  CHECK(mesh.send("color", "owner", Method::kGet, "/api/owner").status == 200);
  // Same source, other destination: still enforced.
  CHECK(mesh.send("color", "vfx-1", Method::kPost, "/api/vfx-1").status == 403);
}

TEST_CASE("tampered certificate breaks mutual verification") {
  auto mesh = make_reference_mesh();
  mesh.inject_fault(TamperCertificate{"hdr"});
  const auto check = mesh.ca().verify_cert(
      mesh.pod("hdr").identity.certificate, 10, "hdr");
  CHECK_FALSE(check.ok);
  CHECK(check.reason == "signature verification failed");

  CHECK_THROWS_AS(mesh.send("color", "hdr", Method::kPost, "/api/hdr"),
                  ChannelError);
  // The failed handshake left opaque bytes on both externals, no plaintext
  // crossed and nothing reached the destination service.
  int externals = 0;
  for (const auto& r : records_of(mesh)) {
    if (r.iface == InterfaceKind::kExternal) {
      CHECK(r.transport == Transport::kMtls);
      CHECK_FALSE(r.http.has_value());
      ++externals;
    } else {
      CHECK(r.pod == "color");  // only the source loopback request
    }
  }
  CHECK(externals == 2);

  CHECK_THROWS_AS(mesh.inject_fault(TamperCertificate{"ghost"}),
                  std::out_of_range);
}

TEST_CASE("encryption and containment invariants over random traffic") {
  std::mt19937_64 seed_rng(41);
  int checked_records = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const auto graph = oracles::random_workflow(seed_rng);
    const auto policy = compile_from_workflow(graph);
    SimConfig config;
    config.seed = seed_rng();
    Mesh mesh(graph, policy, config);
    const auto names = mesh.pod_names();
    std::mt19937_64 rng(seed_rng());

    for (int i = 0; i < 120; ++i) {
      const auto& src = names[rng() % names.size()];
      const auto& dst = names[rng() % names.size()];
      if (src == dst) continue;
      const Method m = rng() % 2 ? Method::kPost : Method::kGet;
      const auto decision_path = "/api/" + dst;
      const int status =
          mesh.send(src, dst, m, decision_path).status;
      const bool allowed =
          m == Method::kPost && oracles::edge_member(graph, src, dst);
      CHECK(status == (allowed ? 201 : 403));
    }
    for (const auto& r : records_of(mesh)) {
      ++checked_records;
      if (r.iface == InterfaceKind::kExternal) {
        CHECK(r.transport == Transport::kMtls);
        // Containment: traffic on the wire implies the policy allowed it.
        CHECK(oracles::edge_member(graph, r.src, r.dst));
      } else {
        CHECK(r.transport == Transport::kPlaintextHttp);
      }
      if (r.pod != r.src && r.pod != r.dst) {
        FAIL("bystander pod observed traffic: ", r.pod);
      }
    }
  }
  CHECK(checked_records > 1000);
}

TEST_CASE("channels only exist for verified identities") {
  std::mt19937_64 seed_rng(43);
  int channels_seen = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto graph = oracles::random_workflow(seed_rng);
    SimConfig config;
    config.seed = seed_rng();
    Mesh mesh(graph, compile_from_workflow(graph), config);
    std::mt19937_64 rng(seed_rng());
    const auto names = mesh.pod_names();
    for (int i = 0; i < 60; ++i) {
      const auto& src = names[rng() % names.size()];
      const auto& dst = names[rng() % names.size()];
      if (src == dst) continue;
      try {
        mesh.send(src, dst, Method::kPost, "/api/" + dst);
      } catch (const MeshError&) {
      }
    }
    for (const auto& [pair, channel] : mesh.channels()) {
      ++channels_seen;
      // Both peers verify against the CA and the secure-naming map at (and
      // after) establishment; issuance strictly precedes the channel.
      CHECK(mesh.ca()
                .verify_cert(channel.peer_certificates.first,
                             channel.established_at, pair.first)
                .ok);
      CHECK(mesh.ca()
                .verify_cert(channel.peer_certificates.second,
                             channel.established_at, pair.second)
                .ok);
      CHECK(channel.transport == Transport::kMtls);
    }
  }
  CHECK(channels_seen > 0);
}

TEST_CASE("identical seeds give byte-identical capture streams") {
  auto script = [](Mesh& mesh) {
    mesh.begin_case("owner", "vfx-1", Method::kPost);
    mesh.send("owner", "vfx-1", Method::kPost, "/api/vfx-1");
    mesh.begin_case("owner", "color", Method::kPost);
    mesh.send("owner", "color", Method::kPost, "/api/color");
    mesh.begin_case("vfx-1", "vfx-2", Method::kPost);
    mesh.send("vfx-1", "vfx-2", Method::kPost, "/api/vfx-2");
  };
  SimConfig config;
  config.seed = 77;
  auto a = make_reference_mesh(config);
  auto b = make_reference_mesh(config);
  script(a);
  script(b);
  std::ostringstream sa, sb;
  write_capture_stream(sa, a.collect_captures());
  write_capture_stream(sb, b.collect_captures());
  CHECK(sa.str() == sb.str());

  SimConfig other = config;
  other.seed = 78;
  auto c = make_reference_mesh(other);
  script(c);
  std::ostringstream sc;
  write_capture_stream(sc, c.collect_captures());
  CHECK(sa.str() == sc.str());  // captures carry no randomness, only timing does
}

TEST_CASE("independent meshes run on separate threads") {
  auto sweep_stream = [] {
    Mesh mesh(reference_workflow(), reference_policy(), {});
    for (const auto& src : mesh.pod_names()) {
      for (const auto& dst : mesh.pod_names()) {
        if (src == dst) continue;
        mesh.begin_case(src, dst, Method::kPost);
        mesh.send(src, dst, Method::kPost, "/api/" + dst);
      }
    }
    std::ostringstream out;
    write_capture_stream(out, mesh.collect_captures());
    return out.str();
  };
  const std::string serial = sweep_stream();
  std::string a, b;
  std::thread ta([&] { a = sweep_stream(); });
  std::thread tb([&] { b = sweep_stream(); });
  ta.join();
  tb.join();
  CHECK(a == serial);
  CHECK(b == serial);
}

TEST_CASE("clock hour drives time-window decisions") {
  auto mesh = make_reference_mesh();
  mesh.set_clock_hour(12);  // inside business hours: color may not push
  CHECK(mesh.send("color", "hdr", Method::kPost, "/api/hdr").status == 403);
  mesh.set_clock_hour(20);
  CHECK(mesh.send("color", "hdr", Method::kPost, "/api/hdr").status == 201);
  CHECK_THROWS_AS(mesh.set_clock_hour(24), std::invalid_argument);
}

TEST_CASE("capture stream serialization round trip") {
  auto mesh = make_reference_mesh();
  mesh.begin_case("owner", "vfx-1", Method::kPost);
  mesh.send("owner", "vfx-1", Method::kPost, "/api/vfx-1");
  std::ostringstream out;
  write_capture_stream(out, mesh.collect_captures());
  std::istringstream in(out.str());
  const auto parsed = read_capture_stream(in);
  REQUIRE(parsed.size() == mesh.collect_captures().size());
  std::ostringstream again;
  write_capture_stream(again, parsed);
  CHECK(again.str() == out.str());

  CHECK_THROWS(capture_event_from_json_line("{\"type\":\"mystery\"}"));
  CHECK_THROWS(capture_event_from_json_line("not json at all"));
  CHECK_THROWS(capture_event_from_json_line(
      R"({"type":"capture","pod":"a","iface":"wormhole","src":"a",)"
      R"("dst":"b","transport":"mtls","tick":1})"));
}
