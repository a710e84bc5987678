#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"
#include "sto/config.hpp"
#include "sto/io.hpp"
#include "sto/optimizer.hpp"
#include "sto/pipeline.hpp"
#include "sto/report_io.hpp"

namespace sto {

struct ServiceOptions {
  std::size_t session_cap = 64;
  std::size_t max_rows = 1'000'000;
  std::size_t payload_cap = 256u << 20;
  // When set, every optimization report is also written here as <session>.json.
  std::filesystem::path report_dir;
};

struct HttpResponse {
  int status = 200;
  std::string body;
};

/// HTTP/JSON facade over the library.
///
///   POST /sessions                   {"csv": "...", "manifest": {...}}  -> 201
///   GET  /sessions/{id}
///   POST /sessions/{id}/partition    {"attribute": name} | {"cluster": {...}}
///   GET  /sessions/{id}/whatif?thresholds=0.5|A:0.5,B:0.6[&utility=PPV][&dominant=A]
///   POST /sessions/{id}/optimize     optimizer config JSON -> report JSON
///   GET  /sessions/{id}/report
///
/// Each session holds an immutable snapshot; partitioning or optimizing
/// publishes a new snapshot with a higher version, so readers never see a
/// half-updated state. Writers on one session are serialized.
class Service {
public:
  explicit Service(ServiceOptions options = {}) : options_(std::move(options)) {}

  HttpResponse create_session(std::string_view body) {
    return guard([&]() -> HttpResponse {
      const auto j = parse_body(body);
      if (!j.is_object() || !j.contains("csv") || !j["csv"].is_string())
        return error(400, "invalid_upload", "body must be {\"csv\": \"...\", \"manifest\": {...}}");
      Manifest manifest;
      if (j.contains("manifest")) manifest = manifest_from_json(j["manifest"], "$.manifest");
      for (const auto& [key, _] : j.items())
        if (key != "csv" && key != "manifest") return error(400, "invalid_upload", "unknown key '" + key + "'");

      Dataset ds;
      try {
        ds = load_dataset_text(j["csv"].get<std::string>(), manifest, {options_.max_rows});
      } catch (const ParseError& e) {
        nlohmann::json body = {{"error", e.what()}, {"kind", "parse_error"}, {"row", e.row()},
                               {"column", e.column()}};
        return {400, body.dump()};
      } catch (const Error& e) {
        return error(400, "invalid_upload", e.what());
      }

      std::lock_guard lock(sessions_mu_);
      if (sessions_.size() >= options_.session_cap)
        return error(429, "session_cap", "session cap of " + std::to_string(options_.session_cap) + " reached");
      const std::string id = "s" + std::to_string(++next_id_);
      auto session = std::make_shared<Session>();
      auto snap = std::make_shared<Snapshot>();
      snap->version = 1;
      snap->dataset = std::make_shared<const Dataset>(std::move(ds));
      session->snapshot = std::move(snap);
      const auto n = session->snapshot->dataset->size();
      sessions_.emplace(id, std::move(session));
      return {201, nlohmann::json{{"session", id}, {"instances", n}, {"version", 1}}.dump()};
    });
  }

  HttpResponse get_session(const std::string& id) const {
    return guard([&]() -> HttpResponse {
      auto session = find(id);
      if (!session) return not_found(id);
      const auto snap = session->current();
      nlohmann::json j = {{"session", id},
                          {"version", snap->version},
                          {"instances", snap->dataset->size()},
                          {"has_report", snap->report != nullptr}};
      if (snap->partition) j["partition"] = snap->partition_summary;
      return {200, j.dump()};
    });
  }

  HttpResponse set_partition(const std::string& id, std::string_view body) {
    return guard([&]() -> HttpResponse {
      auto session = find(id);
      if (!session) return not_found(id);
      const auto spec = partition_spec_from_json(parse_body(body), "$");
      std::lock_guard writer(session->write_mu);
      const auto prev = session->current();
      auto build = build_partition(*prev->dataset, spec);
      auto next = std::make_shared<Snapshot>();
      next->version = prev->version + 1;
      next->dataset = prev->dataset;
      next->partition_summary = partition_summary_json(build);
      next->partition = std::make_shared<const SubgroupPartition>(std::move(build.partition));
      next->index = std::make_shared<const PartitionIndex>(*next->dataset, *next->partition);
      auto j = next->partition_summary;
      j["version"] = next->version;
      session->publish(std::move(next));
      return {200, j.dump()};
    });
  }

  HttpResponse what_if(const std::string& id, const std::map<std::string, std::string>& query) const {
    return guard([&]() -> HttpResponse {
      auto session = find(id);
      if (!session) return not_found(id);
      const auto snap = session->current();
      if (!snap->partition) return error(409, "no_partition", "set a partition first");
      auto it = query.find("thresholds");
      if (it == query.end()) return error(422, "invalid_thresholds", "missing 'thresholds' parameter");
      UtilityKind kind = snap->report ? snap->report->config.utility : UtilityKind::ppv;
      if (auto u = query.find("utility"); u != query.end()) {
        auto parsed = parse_utility_kind(u->second);
        if (!parsed) return error(422, "invalid_utility", "unknown utility '" + u->second + "'");
        kind = *parsed;
      }
      std::optional<std::string> dominant;
      if (auto d = query.find("dominant"); d != query.end())
        dominant = d->second;
      else if (snap->report && snap->report->config.utility == kind)
        dominant = snap->report->dominating;
      const auto taus = parse_thresholds(it->second, *snap->partition);
      auto j = what_if_to_json(sto::what_if(*snap->index, *snap->partition, taus, kind, dominant));
      j["version"] = snap->version;
      return {200, j.dump()};
    });
  }

  HttpResponse optimize(const std::string& id, std::string_view body) {
    return guard([&]() -> HttpResponse {
      auto session = find(id);
      if (!session) return not_found(id);
      const auto config = optimizer_config_from_json(parse_body(body, true), "$");
      std::lock_guard writer(session->write_mu);
      const auto prev = session->current();
      if (!prev->partition) return error(409, "no_partition", "set a partition first");
      auto report = sto::optimize(*prev->dataset, *prev->partition, config);
      std::string text = report_json_string(report);
      if (!options_.report_dir.empty())
        detail::write_file(options_.report_dir / (id + ".json"), text);
      auto next = std::make_shared<Snapshot>(*prev);
      next->version = prev->version + 1;
      next->report = std::make_shared<const OptimizationReport>(std::move(report));
      session->publish(std::move(next));
      return {200, std::move(text)};
    });
  }

  HttpResponse get_report(const std::string& id) const {
    return guard([&]() -> HttpResponse {
      auto session = find(id);
      if (!session) return not_found(id);
      const auto snap = session->current();
      if (!snap->report) return error(404, "no_report", "no optimization has been run");
      return {200, report_json_string(*snap->report)};
    });
  }

  /// Registers the routes on an httplib server.
  void mount(httplib::Server& server) {
    server.set_payload_max_length(options_.payload_cap);
    auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, create_session(req.body));
    });
    server.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    server.Post(R"(/sessions/([^/]+)/partition)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, set_partition(req.matches[1], req.body));
                });
    server.Get(R"(/sessions/([^/]+)/whatif)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 std::map<std::string, std::string> q;
                 for (const auto& [k, v] : req.params) q[k] = v;
                 send(res, what_if(req.matches[1], q));
               });
    server.Post(R"(/sessions/([^/]+)/optimize)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, optimize(req.matches[1], req.body));
                });
    server.Get(R"(/sessions/([^/]+)/report)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, get_report(req.matches[1]));
               });
  }

private:
  struct Snapshot {
    std::uint64_t version = 0;
    std::shared_ptr<const Dataset> dataset;
    std::shared_ptr<const SubgroupPartition> partition;
    std::shared_ptr<const PartitionIndex> index;
    nlohmann::json partition_summary;
    std::shared_ptr<const OptimizationReport> report;
  };

  struct Session {
    std::mutex write_mu;
    mutable std::mutex snap_mu;
    std::shared_ptr<const Snapshot> snapshot;

    std::shared_ptr<const Snapshot> current() const {
      std::lock_guard lock(snap_mu);
      return snapshot;
    }
    void publish(std::shared_ptr<const Snapshot> next) {
      std::lock_guard lock(snap_mu);
      snapshot = std::move(next);
    }
  };

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  static HttpResponse error(int status, std::string_view kind, const std::string& message) {
    return {status, nlohmann::json{{"error", message}, {"kind", kind}}.dump()};
  }

  static HttpResponse not_found(const std::string& id) {
    return error(404, "unknown_session", "no session '" + id + "'");
  }

  static nlohmann::json parse_body(std::string_view body, bool allow_empty = false) {
    if (allow_empty && csv::trim(body).empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("$", std::string("body is not valid JSON: ") + e.what());
    }
  }

  // User errors map to 4xx; only genuine faults reach 500.
  template <typename F>
  static HttpResponse guard(F&& f) {
    try {
      return f();
    } catch (const ConfigError& e) {
      nlohmann::json j = {{"error", e.what()}, {"kind", "invalid_config"}, {"path", e.path()}};
      return {422, j.dump()};
    } catch (const UndefinedUtility& e) {
      return error(422, "undefined_utility", e.what());
    } catch (const PartitionError& e) {
      return error(422, "invalid_partition", e.what());
    } catch (const ClusteringError& e) {
      return error(422, "invalid_partition", e.what());
    } catch (const InvalidArgument& e) {
      return error(422, "invalid_argument", e.what());
    } catch (const EmptyInput& e) {
      return error(422, "empty_input", e.what());
    } catch (const std::exception& e) {
      return error(500, "internal", e.what());
    }
  }

  ServiceOptions options_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
};

}  // namespace sto
