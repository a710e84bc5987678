#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sto/config.hpp"
#include "sto/io.hpp"
#include "sto/optimizer.hpp"
#include "sto/pipeline.hpp"
#include "sto/report_io.hpp"
#include "sto/service.hpp"

namespace sto::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kUsageError = 2;

class UsageError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline std::atomic<bool>& stop_requested() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void on_signal(int) { stop_requested().store(true); }

inline UtilityKind utility_flag(const std::string& s) {
  auto u = parse_utility_kind(s);
  if (!u) throw UsageError("--utility must be PPV, NPV, TPR or ACCURACY");
  return *u;
}

inline std::pair<std::string, int> split_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects host:port");
  const auto port = csv::to_double(listen.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535 || *port != static_cast<int>(*port))
    throw UsageError("--listen port must be an integer in [0, 65535]");
  return {listen.substr(0, colon), static_cast<int>(*port)};
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

struct MetricsArgs {
  std::string input, manifest, group_by, partition_file, utility = "PPV";
  double tau = 0.5;
};

struct ClusterArgs {
  std::string input, manifest, k = "auto", k_range = "2..10", out = "partition.csv",
                               elbow = "elbow.csv";
  std::uint64_t seed = 0;
  std::size_t max_iter = 300, n_init = 10;
  double tol = 1e-6;
};

struct OptimizeArgs {
  std::string config;
};

struct WhatIfArgs {
  std::string input, manifest, group_by, partition_file, thresholds, utility = "PPV", dominant;
};

struct ServeArgs {
  std::string listen = "127.0.0.1:8080", report_dir;
  std::size_t session_cap = 64;
};

inline SubgroupPartition partition_for(const Dataset& ds, const std::string& group_by,
                                       const std::string& partition_file) {
  if (!partition_file.empty())
    return partition_from_assignment(
        ds, read_partition_csv(sto::detail::read_file(partition_file)), AttributeSource{"file"});
  if (group_by.empty()) throw UsageError("one of --group-by or --partition is required");
  return partition_by_attribute(ds, group_by);
}

inline int run_metrics(const MetricsArgs& a, std::ostream& out) {
  const auto kind = detail::utility_flag(a.utility);
  const auto ds = load_dataset(a.input, load_manifest(a.manifest));
  const auto part = partition_for(ds, a.group_by, a.partition_file);
  OptimizerConfig cfg;
  cfg.tau_base = a.tau;
  cfg.utility = kind;
  const auto base = baseline_report(ds, part, cfg);
  const auto& k = base.dominance.dominating_subgroup;
  const std::string u(to_string(kind));

  std::vector<std::vector<std::string>> rows{{"subgroup", "n", "tp", "fp", "tn", "fn", u, "D_" + k + ",i"}};
  auto row = [&](const std::string& name, const ConfusionCounts& c, double value, std::string d) {
    rows.push_back({name, std::to_string(c.total()), std::to_string(c.tp), std::to_string(c.fp),
                    std::to_string(c.tn), std::to_string(c.fn), detail::fmt("%.4f", value), std::move(d)});
  };
  for (const auto& id : base.subgroups) {
    const double v = base.utility.at(id);
    row(id == k ? id + " *" : id, base.counts.at(id), v,
        id == k ? "-" : detail::fmt("%.4f", discrimination_score(v, base.utility.at(k))));
  }
  row("overall", base.overall_counts, base.overall, "");
  out << "tau: " << detail::fmt("%.4f", a.tau) << "  utility: " << u << "\n";
  out << sto::detail::render_rows(rows);
  out << "dominating: " << k << (base.dominance.tie_broken ? " (tie broken)" : "") << "\n";
  return kOk;
}

inline int run_cluster(const ClusterArgs& a, std::ostream& out) {
  const auto ds = load_dataset(a.input, load_manifest(a.manifest));
  ClusterSpec cs;
  cs.seed = a.seed;
  cs.max_iter = a.max_iter;
  cs.tol = a.tol;
  cs.n_init = a.n_init;
  if (a.k != "auto") {
    const auto k = csv::to_double(a.k);
    if (!k || *k < 2 || *k != static_cast<double>(static_cast<std::size_t>(*k)))
      throw UsageError("--k must be 'auto' or an integer >= 2");
    cs.k = static_cast<std::size_t>(*k);
  }
  const auto dots = a.k_range.find("..");
  if (dots == std::string::npos) throw UsageError("--k-range expects A..B");
  const auto lo = csv::to_double(a.k_range.substr(0, dots));
  const auto hi = csv::to_double(a.k_range.substr(dots + 2));
  if (!lo || !hi || *lo < 2 || *hi < *lo + 2)
    throw UsageError("--k-range needs 2 <= A and at least 3 values (A..B with B >= A + 2)");
  cs.k_min = static_cast<std::size_t>(*lo);
  cs.k_max = static_cast<std::size_t>(*hi);

  const auto build = build_partition(ds, PartitionSpec{{}, cs});
  sto::detail::write_file(a.out, write_partition_csv(build.partition));
  if (build.elbow) sto::detail::write_file(a.elbow, write_elbow_csv(*build.elbow));
  for (const auto& w : build.warnings) out << "warning: " << w << "\n";
  if (build.elbow) {
    out << "k,inertia\n";
    for (const auto& [k, inertia] : build.elbow->inertia_by_k)
      out << k << "," << detail::fmt("%.6g", inertia) << (k == build.elbow->chosen_k ? "  <- elbow" : "") << "\n";
    out << "chosen_k=" << build.elbow->chosen_k << "\n";
  } else {
    out << "k=" << build.model->k << "\n";
  }
  for (std::size_t g = 0; g < build.partition.subgroup_count(); ++g)
    out << build.partition.subgroup_ids()[g] << ": " << build.partition.sizes()[g] << "\n";
  out << "partition written to " << a.out << "\n";
  return kOk;
}

/// One line per compared subgroup, then the verdict.
inline std::string optimize_summary(const OptimizationReport& r) {
  std::string s;
  for (const auto& [id, d] : r.discrimination_diff) {
    s += "subgroup " + id + ": tau " + detail::fmt("%.4f", r.config.tau_base) + " -> " +
         detail::fmt("%.4f", r.assignment.at(id)) + ", D_" + r.dominating + "," + id + " " +
         detail::fmt("%.4f", d.baseline) + " -> " + detail::fmt("%.4f", d.adjusted);
    if (d.pct)
      s += ", discrimination reduced by " + detail::fmt("%.1f", -*d.pct * 100.0) + "%";
    s += "\n";
  }
  s += "overall " + std::string(to_string(r.config.utility)) + " " +
       detail::fmt("%.4f", r.baseline_overall) + " -> " + detail::fmt("%.4f", r.adjusted_overall) + "\n";
  s += std::string("feasible: ") + (r.feasible() ? "yes" : "no") + "\n";
  return s;
}

inline int run_optimize(const OptimizeArgs& a, std::ostream& out) {
  RunConfig rc;
  try {
    rc = load_run_config(a.config);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  const auto ds = load_dataset(rc.dataset, rc.manifest, {rc.max_rows});
  const auto build = build_partition(ds, rc.partition);
  for (const auto& w : build.warnings) out << "warning: " << w << "\n";
  const auto report = optimize(ds, build.partition, rc.optimizer);
  if (!rc.report_json.empty()) write_report(report, rc.report_json, ReportFormat::json);
  if (!rc.report_table.empty()) write_report(report, rc.report_table, ReportFormat::table);
  if (!rc.partition_out.empty()) sto::detail::write_file(rc.partition_out, write_partition_csv(build.partition));
  out << render_report_table(report) << "\n" << optimize_summary(report);
  return kOk;
}

inline int run_whatif(const WhatIfArgs& a, std::ostream& out) {
  const auto kind = detail::utility_flag(a.utility);
  const auto ds = load_dataset(a.input, load_manifest(a.manifest));
  const auto part = partition_for(ds, a.group_by, a.partition_file);
  std::vector<double> taus;
  try {
    taus = parse_thresholds(a.thresholds, part);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const PartitionIndex index(ds, part);
  std::optional<std::string> dominant;
  if (!a.dominant.empty()) dominant = a.dominant;
  out << what_if_to_json(what_if(index, part, taus, kind, dominant)).dump(2) << "\n";
  return kOk;
}

inline int run_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  const auto [host, port] = detail::split_listen(a.listen);
  ServiceOptions opt;
  opt.session_cap = a.session_cap;
  opt.report_dir = a.report_dir;
  Service service(opt);
  httplib::Server server;
  service.mount(server);
  // httplib's default also sets SO_REUSEPORT, which lets a second server share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  if (!server.bind_to_port(host, port)) {
    err << "error: cannot bind " << a.listen << "\n";
    return kDataError;
  }
  detail::stop_requested().store(false);
  auto prev_int = std::signal(SIGINT, detail::on_signal);
  auto prev_term = std::signal(SIGTERM, detail::on_signal);
  std::thread watcher([&server] {
    while (!detail::stop_requested().load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  out << "listening on " << a.listen << std::endl;
  const bool ok = server.listen_after_bind();
  detail::stop_requested().store(true);
  watcher.join();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  out << "stopped" << std::endl;
  return ok || detail::stop_requested().load() ? kOk : kDataError;
}

/// Entry point shared by the `sto` binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Per-subgroup decision threshold optimizer", "sto"};
  app.require_subcommand(1);

  MetricsArgs m;
  auto* metrics = app.add_subcommand("metrics", "Baseline per-subgroup utilities at one threshold");
  metrics->add_option("--input", m.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--manifest", m.manifest, "Column-role manifest JSON")->required()->check(CLI::ExistingFile);
  metrics->add_option("--tau", m.tau, "Threshold")->check(CLI::Range(0.0, 1.0));
  metrics->add_option("--group-by", m.group_by, "Attribute column defining subgroups");
  metrics->add_option("--partition", m.partition_file, "Partition CSV (id,subgroup) instead of --group-by");
  metrics->add_option("--utility", m.utility, "PPV | NPV | TPR | ACCURACY");

  ClusterArgs c;
  auto* cluster = app.add_subcommand("cluster", "k-means subgroups with elbow-selected k");
  cluster->add_option("--input", c.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  cluster->add_option("--manifest", c.manifest, "Column-role manifest JSON")->required()->check(CLI::ExistingFile);
  cluster->add_option("--k", c.k, "'auto' or a cluster count >= 2");
  cluster->add_option("--k-range", c.k_range, "Elbow scan range A..B");
  cluster->add_option("--seed", c.seed, "RNG seed");
  cluster->add_option("--max-iter", c.max_iter, "Lloyd iteration cap")->check(CLI::PositiveNumber);
  cluster->add_option("--tol", c.tol, "Centroid shift tolerance")->check(CLI::NonNegativeNumber);
  cluster->add_option("--n-init", c.n_init, "k-means++ restarts")->check(CLI::PositiveNumber);
  cluster->add_option("--out", c.out, "Partition CSV output");
  cluster->add_option("--elbow", c.elbow, "Elbow curve CSV output");

  OptimizeArgs o;
  auto* opt = app.add_subcommand("optimize", "Run the threshold optimizer from a run config");
  opt->add_option("--config", o.config, "Run config JSON")->required()->check(CLI::ExistingFile);

  WhatIfArgs w;
  auto* whatif = app.add_subcommand("whatif", "Metrics at arbitrary per-subgroup thresholds");
  whatif->add_option("--input", w.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  whatif->add_option("--manifest", w.manifest, "Column-role manifest JSON")->required()->check(CLI::ExistingFile);
  whatif->add_option("--group-by", w.group_by, "Attribute column defining subgroups");
  whatif->add_option("--partition", w.partition_file, "Partition CSV (id,subgroup)");
  whatif->add_option("--thresholds", w.thresholds, "0.5 or A:0.5,B:0.65")->required();
  whatif->add_option("--utility", w.utility, "PPV | NPV | TPR | ACCURACY");
  whatif->add_option("--dominant", w.dominant, "Reference subgroup (default: argmax)");

  ServeArgs s;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service until interrupted");
  serve->add_option("--listen", s.listen, "host:port (default 127.0.0.1:8080)");
  serve->add_option("--session-cap", s.session_cap, "Maximum concurrent sessions")->check(CLI::PositiveNumber);
  serve->add_option("--report-dir", s.report_dir, "Also write optimization reports here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*metrics) return run_metrics(m, out);
    if (*cluster) return run_cluster(c, out);
    if (*opt) return run_optimize(o, out);
    if (*whatif) return run_whatif(w, out);
    if (*serve) return run_serve(s, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace sto::cli
