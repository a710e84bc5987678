#include <gtest/gtest.h>

#include <thread>

#include "sto/service.hpp"
#include "support/generators.hpp"

using namespace sto;
using nlohmann::json;

namespace {

std::string upload_body(const Dataset& ds, const Manifest& m) {
  return json{{"csv", write_dataset_csv(ds)}, {"manifest", manifest_to_json(m)}}.dump();
}

std::string gender_upload() {
  auto d = testkit::mixture_dataset(31, 400, 2);
  for (auto& inst : d.dataset.instances) inst.attribute = *inst.attribute == "G0" ? "F" : "M";
  d.dataset.attribute_name = "gender";
  return upload_body(d.dataset, manifest_for(d.dataset));
}

std::string session_of(const HttpResponse& r) { return json::parse(r.body)["session"]; }

}  // namespace

TEST(Service, UploadHappyPath) {
  Service svc;
  const auto r = svc.create_session(
      json{{"csv", "id,score,label\n1,0.9,1\n2,0.2,0\n3,0.6,1\n"}, {"manifest", json::object()}}.dump());
  EXPECT_EQ(r.status, 201);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["instances"], 3);
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(svc.get_session(j["session"]).status, 200);
}

TEST(Service, UploadErrors) {
  Service svc;
  auto bad_score = svc.create_session(json{{"csv", "id,score,label\n1,0.9,1\n2,1.2,0\n"}}.dump());
  EXPECT_EQ(bad_score.status, 400);
  EXPECT_EQ(json::parse(bad_score.body)["row"], 2);
  EXPECT_EQ(json::parse(bad_score.body)["column"], "score");
  EXPECT_EQ(svc.create_session(json{{"csv", ""}}.dump()).status, 400);
  EXPECT_EQ(svc.create_session("not json").status, 422);
  EXPECT_EQ(svc.create_session(json{{"data", "x"}}.dump()).status, 400);
  EXPECT_EQ(svc.create_session(json{{"csv", "id,score,label\n1,0.5,1\n"}, {"manifest", {{"bogus", 1}}}}.dump()).status,
            422);
}

TEST(Service, SessionCap) {
  ServiceOptions opt;
  opt.session_cap = 2;
  Service svc(opt);
  const auto body = json{{"csv", "id,score,label\n1,0.9,1\n"}}.dump();
  EXPECT_EQ(svc.create_session(body).status, 201);
  EXPECT_EQ(svc.create_session(body).status, 201);
  EXPECT_EQ(svc.create_session(body).status, 429);
}

TEST(Service, PartitionAndStateErrors) {
  Service svc;
  EXPECT_EQ(svc.set_partition("nope", R"({"attribute": "gender"})").status, 404);
  const auto id = session_of(svc.create_session(gender_upload()));
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "0.5"}}).status, 409);
  EXPECT_EQ(svc.optimize(id, "{}").status, 409);
  EXPECT_EQ(svc.get_report(id).status, 404);
  EXPECT_EQ(svc.set_partition(id, R"({"attribute": "age"})").status, 422);

  const auto p = svc.set_partition(id, R"({"attribute": "gender"})");
  ASSERT_EQ(p.status, 200);
  const auto j = json::parse(p.body);
  EXPECT_TRUE(j["subgroups"].contains("F"));
  EXPECT_TRUE(j["subgroups"].contains("M"));
  EXPECT_EQ(j["version"], 2);
}

TEST(Service, SingleValueAttributeIs422) {
  Service svc;
  const auto id = session_of(svc.create_session(
      json{{"csv", "id,score,label,g\n1,0.9,1,X\n2,0.4,0,X\n"}, {"manifest", {{"attribute", "g"}}}}.dump()));
  EXPECT_EQ(svc.set_partition(id, R"({"attribute": "g"})").status, 422);
}

TEST(Service, ClusterPartitionReportsChosenK) {
  auto blobs = testkit::gaussian_blobs(3, 400, 4, 8.0);
  Service svc;
  const auto id = session_of(svc.create_session(upload_body(blobs.dataset, manifest_for(blobs.dataset))));
  const auto r = svc.set_partition(id, R"({"cluster": {"k": "auto", "range": [2, 10], "seed": 7}})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["chosen_k"], 4);
  EXPECT_EQ(j["subgroups"].size(), 4u);
  EXPECT_EQ(j["elbow"]["curve"].size(), 9u);
  EXPECT_EQ(svc.set_partition(id, R"({"cluster": {"k": "auto", "range": [3, 4]}})").status, 422);
}

TEST(Service, WhatIfConsistency) {
  Service svc;
  const auto id = session_of(svc.create_session(gender_upload()));
  ASSERT_EQ(svc.set_partition(id, R"({"attribute": "gender"})").status, 200);
  const auto opt = svc.optimize(id, R"({"tau_base": 0.5})");
  ASSERT_EQ(opt.status, 200);
  const auto report = json::parse(opt.body);

  const auto base = json::parse(svc.what_if(id, {{"thresholds", "0.5"}}).body);
  EXPECT_EQ(base["overall"]["value"], report["baseline"]["overall"]);
  for (const auto& [sub, v] : report["baseline"]["per_subgroup"].items())
    EXPECT_EQ(base["subgroups"][sub]["value"], v);
  EXPECT_EQ(base["dominant"], report["dominating"]["subgroup"]);

  std::string spec;
  for (const auto& [sub, tau] : report["assignment"]["per_subgroup"].items())
    spec += (spec.empty() ? "" : ",") + sub + ":" + csv::exact_decimal(tau.get<double>());
  const auto adj = json::parse(svc.what_if(id, {{"thresholds", spec}}).body);
  EXPECT_EQ(adj["overall"]["value"], report["adjusted"]["overall"]);
  for (const auto& [sub, v] : report["adjusted"]["per_subgroup"].items())
    EXPECT_EQ(adj["subgroups"][sub]["value"], v);
  for (const auto& [sub, v] : report["discrimination"]["after"].items())
    EXPECT_EQ(adj["discrimination"][sub], v);
}

TEST(Service, WhatIfRejectsBadThresholds) {
  Service svc;
  const auto id = session_of(svc.create_session(gender_upload()));
  svc.set_partition(id, R"({"attribute": "gender"})");
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "1.5"}}).status, 422);
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "F:0.5"}}).status, 422);
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "F:0.5,X:0.4"}}).status, 422);
  EXPECT_EQ(svc.what_if(id, {}).status, 422);
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "0.5"}, {"utility", "F1"}}).status, 422);
  EXPECT_EQ(svc.what_if(id, {{"thresholds", "0.5"}, {"dominant", "Z"}}).status, 422);
}

TEST(Service, OptimizeInvalidConfigIs422WithPath) {
  Service svc;
  const auto id = session_of(svc.create_session(gender_upload()));
  svc.set_partition(id, R"({"attribute": "gender"})");
  const auto r = svc.optimize(id, R"({"grid": {"uniform": 0.9}})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(json::parse(r.body)["path"], "$.grid.uniform");
  EXPECT_EQ(svc.optimize(id, "{bad").status, 422);
}

TEST(Service, UndefinedBaselineUtilityIs422) {
  Service svc;
  const auto id = session_of(svc.create_session(
      json{{"csv", "id,score,label,g\n1,0.9,1,A\n2,0.4,0,A\n3,0.8,1,B\n4,0.3,0,B\n"},
           {"manifest", {{"attribute", "g"}}}}
          .dump()));
  svc.set_partition(id, R"({"attribute": "g"})");
  const auto r = svc.optimize(id, R"({"tau_base": 0.95})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(json::parse(r.body)["kind"], "undefined_utility");
}

TEST(Service, ReportVersionAdvances) {
  Service svc;
  const auto id = session_of(svc.create_session(gender_upload()));
  svc.set_partition(id, R"({"attribute": "gender"})");
  const auto opt = svc.optimize(id, "");
  ASSERT_EQ(opt.status, 200);
  EXPECT_EQ(svc.get_report(id).body, opt.body);
  EXPECT_EQ(json::parse(svc.get_session(id).body)["version"], 3);
}

TEST(Service, ConcurrentReadersSeeConsistentSnapshots) {
  Service svc;
  const auto id = session_of(svc.create_session(gender_upload()));
  svc.set_partition(id, R"({"attribute": "gender"})");
  std::atomic<int> bad{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) {
        if (t == 0) {
          if (svc.optimize(id, i % 2 ? R"({"tau_base": 0.45})" : "{}").status != 200) ++bad;
        } else if (svc.what_if(id, {{"thresholds", "0.5"}}).status != 200) {
          ++bad;
        }
      }
    });
  for (auto& th : threads) th.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(ServiceHttp, EndToEndOverSocket) {
  Service svc;
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", gender_upload(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = session_of({created->status, created->body});

  EXPECT_EQ(client.Get("/sessions/zzz")->status, 404);
  EXPECT_EQ(client.Get("/sessions/" + id + "/whatif?thresholds=0.5")->status, 409);
  EXPECT_EQ(client.Post("/sessions/" + id + "/partition", R"({"attribute": "gender"})", "application/json")->status,
            200);
  auto wi = client.Get("/sessions/" + id + "/whatif?thresholds=F:0.55,M:0.5");
  EXPECT_EQ(wi->status, 200);
  EXPECT_EQ(json::parse(wi->body)["subgroups"]["F"]["tau"], 0.55);
  EXPECT_EQ(client.Get("/sessions/" + id + "/whatif?thresholds=2")->status, 422);
  auto opt = client.Post("/sessions/" + id + "/optimize", "{}", "application/json");
  EXPECT_EQ(opt->status, 200);
  EXPECT_EQ(opt->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(client.Get("/sessions/" + id + "/report")->body, opt->body);
  EXPECT_EQ(client.Post("/sessions", "{\"csv\": \"\"}", "application/json")->status, 400);

  server.stop();
  th.join();
}
