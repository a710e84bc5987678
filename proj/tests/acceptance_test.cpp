// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "sto/optimizer.hpp"
#include "sto/pipeline.hpp"
#include "sto/report_io.hpp"
#include "sto/service.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace sto;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::vector<std::size_t>> members_of(const SubgroupPartition& p) {
  std::vector<std::vector<std::size_t>> m(p.subgroup_count());
  for (std::size_t i = 0; i < p.instance_count(); ++i) m[p.subgroup_of(i)].push_back(i);
  return m;
}

double brute(const Dataset& ds, const std::vector<std::size_t>& members, double tau, UtilityKind kind) {
  return testkit::brute_utility(testkit::brute_counts(ds, members, tau), kind).value();
}

std::vector<double> grid_of(double step) {
  std::vector<double> g;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) g.push_back(i / static_cast<double>(n));
  return g;
}

// Independent recomputation of the three report constraints from raw counts.
std::vector<std::string> constraint_violations(const OptimizationReport& r, const Dataset& ds,
                                               const SubgroupPartition& p) {
  const auto members = members_of(p);
  const auto kind = r.config.utility;
  std::vector<std::string> bad;
  const std::size_t k = p.require_index(r.dominating);
  const double ref = brute(ds, members[k], r.assignment.at(r.dominating), kind);
  const double dom_base = brute(ds, members[k], r.config.tau_base, kind);
  for (std::size_t g = 0; g < p.subgroup_count(); ++g) {
    if (g == k) continue;
    const auto& id = p.subgroup_ids()[g];
    const double base = brute(ds, members[g], r.config.tau_base, kind);
    const double adj = brute(ds, members[g], r.assignment.at(id), kind);
    if (adj < base || adj > ref) bad.push_back("(a) " + id);
  }
  testkit::RawCounts pooled_base, pooled_adj;
  for (std::size_t g = 0; g < p.subgroup_count(); ++g) {
    const auto b = testkit::brute_counts(ds, members[g], r.config.tau_base);
    const auto a = testkit::brute_counts(ds, members[g], r.assignment.at(p.subgroup_ids()[g]));
    pooled_base.tp += b.tp, pooled_base.fp += b.fp, pooled_base.tn += b.tn, pooled_base.fn += b.fn;
    pooled_adj.tp += a.tp, pooled_adj.fp += a.fp, pooled_adj.tn += a.tn, pooled_adj.fn += a.fn;
  }
  if (*testkit::brute_utility(pooled_adj, kind) < *testkit::brute_utility(pooled_base, kind)) bad.push_back("(b)");
  if (ref < dom_base) bad.push_back("(c)");
  for (const auto& c : r.validation.checks)
    if (!c.passed) bad.push_back("validate:" + c.name);
  return bad;
}

struct OracleCase {
  testkit::GroupedData data;
  OptimizationReport report;
};

std::vector<OracleCase>& oracle_cases() {
  static std::vector<OracleCase> cases;
  return cases;
}

Outcome oracle_optimality() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0, combos = 0;
  std::string first;
  for (int seed = 0; seed < 200; ++seed) {
    auto d = testkit::mixture_dataset(50'000 + seed, 500, 2 + seed % 4);
    OptimizerConfig cfg;
    cfg.grid = GridSpec::uniform(0.05);
    auto r = optimize(d.dataset, d.partition, cfg);
    const auto o = testkit::oracle_optimize(d.dataset, d.partition, cfg, grid_of(0.05));
    combos += o.combinations;
    bool ok = o.found && r.dominating == d.partition.subgroup_ids()[o.dominant];
    const auto members = members_of(d.partition);
    if (ok) {
      const double ref = brute(d.dataset, members[o.dominant], o.taus[o.dominant], cfg.utility);
      for (std::size_t g = 0; g < o.taus.size(); ++g) {
        const auto& id = d.partition.subgroup_ids()[g];
        if (r.assignment.at(id) != o.taus[g]) ok = false;
        if (g == o.dominant) continue;
        const double gap = ref - brute(d.dataset, members[g], o.taus[g], cfg.utility);
        if (r.discrimination_after.at(id) != gap) ok = false;
      }
    }
    if (!ok && first.empty()) first = " first mismatch seed " + std::to_string(seed);
    mismatches += !ok;
    oracle_cases().push_back({std::move(d), std::move(r)});
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          std::to_string(200 - mismatches) + "/200 exact, " + std::to_string(combos) + " combinations enumerated, " +
              fmt("%.2f s", secs) + first};
}

Outcome constraint_suite() {
  std::size_t reports = 0, violations = 0;
  std::string first;
  for (const auto& c : oracle_cases()) {
    OptimizerConfig free_cfg;
    free_cfg.mode = DominantMode::free_dominant;
    for (const auto* r : {&c.report}) {
      const auto free_report = optimize(c.data.dataset, c.data.partition, free_cfg);
      for (const auto* rep : {r, &free_report}) {
        ++reports;
        const auto bad = constraint_violations(*rep, c.data.dataset, c.data.partition);
        violations += bad.size();
        if (!bad.empty() && first.empty()) first = " first: " + bad.front();
      }
    }
  }
  return {reports == 400 && violations == 0,
          std::to_string(reports) + " reports (fixed + free), " + std::to_string(violations) + " violations" + first};
}

Outcome planted_bias() {
  const auto t0 = Clock::now();
  int reduced = 0, oracle_agree = 0;
  double min_base = 1.0, min_red = 1.0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto d = testkit::planted_bias_dataset(90'000 + seed, 200'000);
    OptimizerConfig cfg;
    const auto r = optimize(d.dataset, d.partition, cfg);
    const double before = r.discrimination_before.at("B");
    const double after = r.discrimination_after.at("B");
    const auto o = testkit::oracle_optimize(d.dataset, d.partition, cfg, grid_of(0.05));
    const auto members = members_of(d.partition);
    const double oracle_after = brute(d.dataset, members[0], o.taus[0], cfg.utility) -
                                brute(d.dataset, members[1], o.taus[1], cfg.utility);
    const double oracle_before = brute(d.dataset, members[0], 0.5, cfg.utility) -
                                 brute(d.dataset, members[1], 0.5, cfg.utility);
    const bool agree = o.found && r.dominating == "A" && oracle_after == after && oracle_before == before;
    oracle_agree += agree;
    const double reduction = 1.0 - oracle_after / oracle_before;
    min_base = std::min(min_base, oracle_before);
    min_red = std::min(min_red, reduction);
    if (agree && oracle_before >= 0.08 && reduction >= 0.90) ++reduced;
  }
  const double secs = seconds_since(t0);
  return {reduced >= 95 && secs < 30.0,
          std::to_string(reduced) + "/100 seeds with D reduced >= 90% (oracle agrees on " +
              std::to_string(oracle_agree) + "), min baseline D " + fmt("%.4f", min_base) + ", min reduction " +
              fmt("%.1f%%", 100.0 * min_red) + ", " + fmt("%.2f s", secs)};
}

Outcome counter_example() {
  const auto ds = testkit::counter_example();
  const auto p = partition_by_attribute(ds, "g");
  const auto members = members_of(p);
  const auto ppv = [&](const std::map<std::string, double>& taus) {
    testkit::RawCounts c;
    for (std::size_t g = 0; g < p.subgroup_count(); ++g) {
      const auto x = testkit::brute_counts(ds, members[g], taus.at(p.subgroup_ids()[g]));
      c.tp += x.tp, c.fp += x.fp;
    }
    return *testkit::brute_utility(c, UtilityKind::ppv);
  };
  const std::map<std::string, double> base{{"B", 0.5}, {"C", 0.5}, {"K", 0.5}};
  const std::map<std::string, double> trap{{"B", 0.7}, {"C", 0.55}, {"K", 0.5}};
  bool every_up = true;
  for (std::size_t g = 0; g < p.subgroup_count(); ++g) {
    const auto& id = p.subgroup_ids()[g];
    if (id == "K") continue;
    every_up = every_up && brute(ds, members[g], trap.at(id), UtilityKind::ppv) >
                               brute(ds, members[g], base.at(id), UtilityKind::ppv);
  }
  const bool exists = every_up && ppv(trap) < ppv(base);
  const auto r = optimize(ds, p, {});
  const bool avoided = r.assignment.per_subgroup != trap && r.feasible() && ppv(r.assignment.per_subgroup) >= ppv(base);
  std::size_t pooled_fail = 0;
  for (const auto& c : oracle_cases())
    for (const auto& chk : c.report.validation.checks)
      if (chk.name == "pooled_non_decreasing" && !chk.passed) ++pooled_fail;
  return {exists && avoided && pooled_fail == 0,
          "pooled " + fmt("%.4f", ppv(base)) + " -> " + fmt("%.4f", ppv(trap)) + " under the trap assignment; chosen B=" +
              fmt("%.2f", r.assignment.at("B")) + " C=" + fmt("%.2f", r.assignment.at("C")) + " pooled " +
              fmt("%.4f", ppv(r.assignment.per_subgroup)) + "; check (b) failures on oracle reports: " +
              std::to_string(pooled_fail)};
}

Outcome reference_arithmetic() {
  OptimizationReport r;
  r.subgroups = {"female", "male"};
  r.baseline_utility = {{"female", 0.6836}, {"male", 0.7713}};
  r.baseline_overall = 0.7107;
  r.dominating = "male";
  r.assignment = {{{"female", 0.65}, {"male", 0.5}}, 0.5};
  r.adjusted_utility = {{"female", 0.7639}, {"male", 0.7713}};
  r.adjusted_overall = 0.7669;
  r.discrimination_before = {{"female", discrimination_score(0.6836, 0.7713)}};
  r.discrimination_after = {{"female", discrimination_score(0.7639, 0.7713)}};
  compute_differences(r);
  r.validation.checks = {{"subgroup_bounds", "female", true, ""},
                         {"pooled_non_decreasing", "", true, ""},
                         {"dominant_non_decreasing", "male", true, ""}};
  const double tol = 1e-4 + 1e-12;
  const double net_all = r.overall_diff.net, net_f = r.utility_diff.at("female").net,
               net_d = r.discrimination_diff.at("female").net, pct_all = *r.overall_diff.pct;
  const bool nets = std::abs(net_all - 0.0562) <= tol && std::abs(net_f - 0.0803) <= tol &&
                    std::abs(net_d - -0.0804) <= tol && std::abs(pct_all * 100.0 - 7.9) <= 0.05;
  const auto table = render_report_table(r);
  const bool rendered = table.find("+0.0562") != std::string::npos && table.find("+0.0803") != std::string::npos &&
                        table.find("+7.9%") != std::string::npos && table.find("+11.7%") != std::string::npos &&
                        table.find("note: % Diff. is Net Diff. divided by the baseline") != std::string::npos;
  return {nets && rendered, "net " + fmt("%+.4f", net_all) + " / " + fmt("%+.4f", net_f) + " / " +
                                fmt("%+.4f", net_d) + " (vs -0.0804, |diff| " + fmt("%.1e", std::abs(net_d + 0.0804)) +
                                "), overall " + fmt("%+.1f%%", pct_all * 100.0) + ", female " +
                                fmt("%+.1f%%", *r.utility_diff.at("female").pct * 100.0)};
}

// Labels each point with its nearest planted center: the best any clustering
// can do once Gaussian tails cross the midpoint between centers.
std::vector<std::size_t> bayes_labels(const testkit::Blobs& b, std::size_t k, double spacing) {
  std::vector<std::size_t> out;
  for (const auto& inst : b.dataset.instances) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < k; ++c) {
      const double cx = spacing * static_cast<double>(c % 2) + spacing * 2.0 * static_cast<double>(c / 4);
      const double cy = spacing * static_cast<double>((c / 2) % 2);
      const double d = std::pow(inst.features[0] - cx, 2) + std::pow(inst.features[1] - cy, 2);
      if (d < best_d) best_d = d, best = c;
    }
    out.push_back(best);
  }
  return out;
}

Outcome elbow() {
  const auto t0 = Clock::now();
  auto sweep = [](double spacing, int& k4, int& pure, int& bayes_pure) {
    k4 = pure = bayes_pure = 0;
    for (int seed = 0; seed < 20; ++seed) {
      const auto b = testkit::gaussian_blobs(7'000 + seed, 500, 4, spacing);
      ClusterSpec cs;
      cs.seed = static_cast<std::uint64_t>(seed);
      const auto build = build_partition(b.dataset, PartitionSpec{{}, cs});
      std::vector<std::size_t> pred(b.dataset.size());
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = build.partition.subgroup_of(i);
      const bool k_ok = build.elbow->chosen_k == 4;
      k4 += k_ok;
      pure += k_ok && testkit::cluster_purity(pred, b.truth) == 1.0;
      bayes_pure += k_ok && testkit::cluster_purity(pred, bayes_labels(b, 4, spacing)) == 1.0;
    }
  };
  int k4, pure, bayes;
  sweep(10.0, k4, pure, bayes);
  int k4_6, pure_6, bayes_6;
  sweep(6.0, k4_6, pure_6, bayes_6);
  const double secs = seconds_since(t0);
  return {pure == 20 && secs < 10.0,
          "10 sigma: k=4 on " + std::to_string(k4) + "/20, purity 1.0 on " + std::to_string(pure) +
              "/20; 6 sigma: k=4 on " + std::to_string(k4_6) + "/20, purity 1.0 on " + std::to_string(pure_6) +
              "/20 vs planted, " + std::to_string(bayes_6) + "/20 vs nearest center; " + fmt("%.2f s", secs)};
}

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

Outcome parity() {
  const fs::path samples = STO_SAMPLES_DIR;
  const fs::path tmp = fs::temp_directory_path() / "sto_acceptance_parity";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  std::string detail;
  bool ok = true;
  for (const char* name : {"gender_run.json", "blobs_run.json"}) {
    auto run = json::parse(detail::read_file(samples / name));
    run["dataset"] = (samples / run["dataset"].get<std::string>()).string();
    run["manifest"] = (samples / run["manifest"].get<std::string>()).string();
    std::string cli_a, cli_b;
    for (auto* out : {&cli_a, &cli_b}) {
      const auto report_path = tmp / (std::string(name) + (out == &cli_a ? ".a" : ".b"));
      run["output"] = {{"json", report_path.string()}};
      detail::write_file(tmp / "run.json", run.dump(2));
      const std::string cmd = shell_quote(STO_CLI_PATH) + " optimize --config " +
                              shell_quote((tmp / "run.json").string()) + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, std::string("cli failed on ") + name};
      *out = detail::read_file(report_path);
    }

    Service svc;
    const auto manifest = json::parse(detail::read_file(run["manifest"].get<std::string>()));
    const auto created = svc.create_session(
        json{{"csv", detail::read_file(run["dataset"].get<std::string>())}, {"manifest", manifest}}.dump());
    if (created.status != 201) return {false, "upload failed: " + created.body};
    const std::string id = json::parse(created.body)["session"];
    auto partition = run["partition"];
    if (partition.contains("cluster") && !partition["cluster"].contains("seed"))
      partition["cluster"]["seed"] = run.value("seed", 0);
    if (svc.set_partition(id, partition.dump()).status != 200) return {false, "partition failed"};
    const auto served = svc.optimize(id, run.value("optimizer", json::object()).dump());
    if (served.status != 200) return {false, "optimize failed: " + served.body};

    const bool same = cli_a == cli_b && cli_a == served.body;
    ok = ok && same;
    detail += std::string(name) + (same ? " identical (" : " DIFFERENT (") + std::to_string(cli_a.size()) + " bytes); ";
  }
  fs::remove_all(tmp);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle_optimality", oracle_optimality},
      {"constraint_suite", constraint_suite},
      {"planted_bias_reduction", planted_bias},
      {"additive_counter_example", counter_example},
      {"report_arithmetic_reference_values", reference_arithmetic},
      {"elbow_kmeans_blobs", elbow},
      {"cli_service_parity", parity},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << "  " << o.detail << std::endl;
  }
  std::cout << "SKIP home_credit_directional  manual check on user-supplied data, see README" << std::endl;
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
