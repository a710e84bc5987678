#include <gtest/gtest.h>

#include <filesystem>

#include "sto/optimizer.hpp"
#include "sto/report_io.hpp"
#include "support/generators.hpp"

using namespace sto;

namespace {

// Two-subgroup report from fixed 4-decimal utilities.
OptimizationReport gender_report() {
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
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < s.size()) {
    auto end = s.find('\n', start);
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

TEST(Differences, NetAndPercent) {
  const auto r = gender_report();
  EXPECT_NEAR(r.overall_diff.net, 0.0562, 1e-12);
  EXPECT_NEAR(*r.overall_diff.pct, 0.0562 / 0.7107, 1e-12);
  EXPECT_NEAR(r.utility_diff.at("female").net, 0.0803, 1e-12);
  EXPECT_NEAR(*r.utility_diff.at("female").pct, 0.0803 / 0.6836, 1e-12);
  EXPECT_EQ(r.utility_diff.at("male").net, 0.0);
  EXPECT_NEAR(r.discrimination_diff.at("female").net, -0.0803, 1e-12);
  EXPECT_FALSE(difference(0.0, 0.3).pct.has_value());
}

TEST(ReportTable, LayoutAndValues) {
  const auto text = render_report_table(gender_report());
  const auto ls = lines(text);
  ASSERT_GE(ls.size(), 8u);
  EXPECT_EQ(ls[0], "mode: fixed_dominant  utility: PPV  dominating: male");
  EXPECT_NE(ls[1].find("PPV_all"), std::string::npos);
  EXPECT_NE(ls[1].find("PPV_male*"), std::string::npos);
  EXPECT_EQ(ls[2].rfind("Baseline", 0), 0u);
  EXPECT_NE(ls[2].find("0.7107"), std::string::npos);
  EXPECT_EQ(ls[3].rfind("tau_adj,female", 0), 0u);
  EXPECT_NE(ls[3].find("0.6500"), std::string::npos);
  EXPECT_NE(ls[3].find("0.0877"), std::string::npos);
  EXPECT_NE(ls[3].find("-91.6%"), std::string::npos);
  EXPECT_EQ(ls[4].rfind("tau_adj,male", 0), 0u);
  EXPECT_EQ(ls[5].rfind("Adj. PPV", 0), 0u);
  EXPECT_NE(ls[5].find("0.7669"), std::string::npos);
  EXPECT_EQ(ls[6].rfind("Net Diff.", 0), 0u);
  EXPECT_NE(ls[6].find("+0.0562"), std::string::npos);
  EXPECT_NE(ls[6].find("+0.0803"), std::string::npos);
  EXPECT_NE(ls[6].find("+0.0000"), std::string::npos);
  EXPECT_EQ(ls[7].rfind("% Diff.", 0), 0u);
  EXPECT_NE(ls[7].find("+7.9%"), std::string::npos);
  EXPECT_NE(ls[7].find("+11.7%"), std::string::npos);
  EXPECT_NE(text.find("all 3 constraint checks passed"), std::string::npos);
  EXPECT_NE(text.find("Net Diff. divided by the baseline"), std::string::npos);
}

TEST(ReportTable, FailedChecksListed) {
  auto r = gender_report();
  r.validation.checks[1].passed = false;
  r.validation.checks[1].detail = "pooled adjusted 0.5 >= pooled baseline 0.7";
  const auto text = render_report_table(r);
  EXPECT_NE(text.find("1 of 3 constraint checks FAILED"), std::string::npos);
  EXPECT_NE(text.find("failed pooled_non_decreasing"), std::string::npos);
}

TEST(ReportJson, DeterministicAndRoundTrips) {
  const auto d = testkit::mixture_dataset(77, 500, 4);
  const auto r = optimize(d.dataset, d.partition, {});
  const auto a = report_json_string(r);
  const auto b = report_json_string(optimize(d.dataset, d.partition, {}));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.back(), '\n');
  const auto back = report_from_json(nlohmann::json::parse(a));
  EXPECT_EQ(back, r);
  EXPECT_EQ(report_json_string(back), a);
}

TEST(ReportJson, Shape) {
  const auto j = report_to_json(gender_report());
  EXPECT_EQ(j["schema_version"], "1.0");
  EXPECT_EQ(j["dominating"]["subgroup"], "male");
  EXPECT_EQ(j["assignment"]["per_subgroup"]["female"], 0.65);
  EXPECT_EQ(j["differences"]["per_subgroup"]["female"]["net"].get<double>(),
            gender_report().utility_diff.at("female").net);
  EXPECT_TRUE(j["validation"]["feasible"].get<bool>());
  EXPECT_EQ(j["config"]["grid"]["uniform"], 0.05);
}

TEST(ReportJson, PctNullWhenBaselineZero) {
  auto r = gender_report();
  r.discrimination_before["female"] = 0.0;
  r.discrimination_after["female"] = 0.0;
  compute_differences(r);
  const auto j = report_to_json(r);
  EXPECT_TRUE(j["differences"]["discrimination"]["female"]["pct"].is_null());
  EXPECT_NE(render_report_table(r).find("n/a"), std::string::npos);
}

TEST(ReportJson, RefusesUndefinedValues) {
  auto r = gender_report();
  r.adjusted_utility["female"] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(report_to_json(r), ReportError);
  EXPECT_THROW(render_report_table(r), ReportError);
  r = gender_report();
  r.adjusted_utility.erase("male");
  EXPECT_THROW(report_to_json(r), ReportError);
}

TEST(ReportJson, RejectsOtherMajorVersion) {
  auto j = report_to_json(gender_report());
  j["schema_version"] = "2.0";
  EXPECT_THROW(report_from_json(j), ReportError);
  j["schema_version"] = "1.3";
  EXPECT_NO_THROW(report_from_json(j));
  j.erase("adjusted");
  EXPECT_THROW(report_from_json(j), ReportError);
}

TEST(WriteReport, BothFormatsAndUnwritablePath) {
  const auto dir = std::filesystem::temp_directory_path() / "sto_report_test";
  std::filesystem::create_directories(dir);
  const auto r = gender_report();
  write_report(r, dir / "r.json", ReportFormat::json);
  write_report(r, dir / "r.txt", ReportFormat::table);
  EXPECT_EQ(detail::read_file(dir / "r.json"), report_json_string(r));
  EXPECT_EQ(detail::read_file(dir / "r.txt"), render_report_table(r));
  EXPECT_THROW(write_report(r, dir / "missing" / "r.json", ReportFormat::json), Error);
  std::filesystem::remove_all(dir);
}
