#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cohort_support.hpp"
#include "test_support.hpp"

namespace volseg::cohort {
namespace {

namespace fs = std::filesystem;

class CohortFixture : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testing::temp_dir("cohort"); }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  fs::path dir_;
};

TEST_F(CohortFixture, TwoCaseSummaryRow) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_));
  const auto ev = evaluate_cohort(m, "A");
  const auto& all = ev.row(kAllLabel);
  EXPECT_NEAR(all.dsc->mean, 0.70, 1e-12);
  EXPECT_NEAR(all.dsc->sd, 0.1414213562, 1e-9);
  EXPECT_EQ(all.n_included, 2u);
  EXPECT_NEAR(ev.row("Chronic Pancreatitis").dsc->mean, 0.8, 1e-12);
  EXPECT_NEAR(ev.row("Normal").dsc->mean, 0.6, 1e-12);
  EXPECT_FALSE(ev.row("Acute Pancreatitis").dsc.has_value());

  std::ostringstream csv;
  write_summary_csv(csv, ev);
  std::istringstream lines(csv.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header,
            "Group,DSC (SD),Precision (SD),Accuracy (SD),Jaccard (SD),Recall (SD),HD95 (SD),n_included,n_failed,"
            "n_excluded");
  EXPECT_EQ(first.substr(0, 16), "ALL,0.70 (0.14),");
}

TEST_F(CohortFixture, IdenticalPredictionsArePerfect) {
  const auto ev = evaluate_cohort(load_manifest(testing::write_cohort_fixture(dir_)), "B");
  EXPECT_EQ(ev.row(kAllLabel).dsc->mean, 1.0);
  EXPECT_EQ(ev.row(kAllLabel).dsc->sd, 0.0);
  EXPECT_EQ(ev.row(kAllLabel).hd95->mean, 0.0);
}

TEST_F(CohortFixture, FailedCaseCountsAsZeroAndSkipsHd95) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_, {.with_failure = true}));
  const auto ev = evaluate_cohort(m, "A");
  const auto& all = ev.row(kAllLabel);
  EXPECT_EQ(all.n_failed, 1u);
  EXPECT_EQ(all.n_included, 2u);
  EXPECT_EQ(all.dsc->n, 3u);
  EXPECT_NEAR(all.dsc->mean, (0.8 + 0.6 + 0.0) / 3, 1e-12);
  EXPECT_EQ(all.hd95->n, 2u);
  const auto& ap = ev.row("Acute Pancreatitis");
  EXPECT_EQ(ap.dsc->mean, 0.0);
  EXPECT_FALSE(ap.hd95.has_value());

  std::ostringstream cases;
  write_cases_csv(cases, ev);
  EXPECT_NE(cases.str().find("c3,AcutePancreatitis,failed,0,"), std::string::npos) << cases.str();
}

TEST_F(CohortFixture, ExcludedCasesAreReportedNotEvaluated) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_, {.with_excluded = true}));
  const auto ev = evaluate_cohort(m, "A");
  EXPECT_NEAR(ev.row(kAllLabel).dsc->mean, 0.70, 1e-12);
  EXPECT_EQ(ev.row(kAllLabel).n_excluded, 1u);
  EXPECT_EQ(ev.row("Normal").n_excluded, 1u);
  ASSERT_EQ(ev.excluded.size(), 1u);
  EXPECT_EQ(ev.excluded[0].reason, "motion");
  std::ostringstream cases;
  write_cases_csv(cases, ev);
  std::size_t lines = 0;
  for (char ch : cases.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 4u);  // header + 3 cases
}

TEST_F(CohortFixture, BenchmarkAllRowEqualsEvaluation) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_, {.with_failure = true}));
  const auto rows = benchmark(m, {"A", "B"});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].model, "B");
  const auto ev = evaluate_cohort(m, "A");
  const auto& all = ev.row(kAllLabel);
  EXPECT_EQ(rows[1].dsc->mean, all.dsc->mean);
  EXPECT_EQ(rows[1].dsc->sd, all.dsc->sd);
  EXPECT_EQ(rows[1].jaccard->mean, all.jaccard->mean);
  EXPECT_EQ(rows[1].hd95->mean, all.hd95->mean);
  EXPECT_EQ(rows[1].n_failed, all.n_failed);
  EXPECT_THROW(benchmark(m, {"A"}), InvalidArgument);
  EXPECT_THROW(evaluate_cohort(m, "C"), MissingPrediction);
}

TEST_F(CohortFixture, PredictorFallback) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_));
  const Predictor empty = [](const CohortCase&) { return testing::run_mask(0, 0); };
  const Predictor same = [](const CohortCase& c) { return nifti::read_mask_file(c.reference_path); };
  const auto rows = benchmark(m, {"net", "empty"}, &same);
  EXPECT_EQ(rows[0].dsc->mean, 1.0);
  const auto ev = evaluate_cohort(m, "zero", &empty);
  EXPECT_EQ(ev.row(kAllLabel).n_failed, 2u);
  EXPECT_EQ(ev.row(kAllLabel).dsc->mean, 0.0);
  EXPECT_FALSE(ev.row(kAllLabel).hd95.has_value());
}

TEST(Summary, PermutationInvariant) {
  testing::Rng rng(8);
  std::vector<CaseResult> cases;
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 12; ++i) {
    MetricsRecord r;
    r.dsc = u(rng);
    r.hd95_mm = 10 * u(rng);
    cases.push_back({"k" + std::to_string(i), kAllGroups[static_cast<std::size_t>(i) % 3], r});
  }
  const auto a = summarize_cohort("m", cases, {});
  std::shuffle(cases.begin(), cases.end(), rng);
  const auto b = summarize_cohort("m", cases, {});
  EXPECT_EQ(evaluation_json(a).dump(), evaluation_json(b).dump());
}

TEST(Summary, OneCaseModels) {
  const LabelMask ref = testing::run_mask(0, 5);
  const auto a = summarize_cohort("A", {{"x", Group::kNormal, evaluate_pair(SegmentationPair(ref, ref))}}, {});
  const auto b = summarize_cohort(
      "B", {{"x", Group::kNormal, evaluate_pair(SegmentationPair(testing::run_mask(0, 0), ref))}}, {});
  EXPECT_EQ(a.row(kAllLabel).dsc->mean, 1.0);
  EXPECT_EQ(a.row(kAllLabel).dsc->sd, 0.0);
  EXPECT_EQ(b.row(kAllLabel).dsc->mean, 0.0);
  EXPECT_EQ(b.row(kAllLabel).n_failed, 1u);
  std::ostringstream csv;
  write_benchmark_csv(csv, {benchmark_row(a), benchmark_row(b)});
  EXPECT_NE(csv.str().find("A,1.00 (0.00),1.00 (0.00),0.00 (0.00),1,0"), std::string::npos) << csv.str();
  EXPECT_NE(csv.str().find("B,0.00 (0.00),0.00 (0.00),NA,0,1"), std::string::npos) << csv.str();
}

TEST(Volumetry, ThreePointFit) {
  const auto r = volume_report_from_points("m", {{"a", Group::kNormal, 10, 10},
                                                 {"b", Group::kNormal, 20, 19},
                                                 {"c", Group::kChronicPancreatitis, 30, 31}});
  const auto& all = r.fit("ALL");
  ASSERT_TRUE(all.fit);
  EXPECT_NEAR(all.fit->slope, 1.05, 1e-12);
  EXPECT_NEAR(all.fit->intercept, -1.0, 1e-12);
  EXPECT_NEAR(all.fit->r_squared, 210.0 * 210.0 / (200.0 * 222.0), 1e-12);
  EXPECT_TRUE(r.fit("Normal").fit);
  EXPECT_FALSE(r.fit("Diseased").fit);
  EXPECT_NE(r.fit("Diseased").error.find("TooFewPoints"), std::string::npos);
}

TEST_F(CohortFixture, VolumeReportAndExclusions) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_, {.with_excluded = true}));
  const auto r = volume_report(m, "A", {"c2"});
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.points[0].case_id, "c1");
  EXPECT_DOUBLE_EQ(r.points[0].manual_ml, 0.005);
  EXPECT_EQ(r.excluded, (std::vector<std::string>{"c2", "c4"}));
  EXPECT_THROW(volume_report(m, "A", {"nope"}), InvalidArgument);

  const auto ev = evaluate_cohort(m, "A");
  write_report(dir_ / "report", ev, &r);
  for (const char* f : {"summary.csv", "cases.csv", "cases.jsonl", "summary.json", "scatter.csv", "regression.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "report" / f)) << f;
  }
  std::ifstream js(dir_ / "report" / "summary.json");
  const auto j = nlohmann::json::parse(js);
  EXPECT_EQ(j["rows"][0]["group"], "ALL");
  EXPECT_EQ(j["volumes"]["excluded"].size(), 2u);

  std::ifstream cl(dir_ / "report" / "cases.jsonl");
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(cl, line);) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0]["case_id"], "c1");
  EXPECT_EQ(lines[2]["case_id"], "c4");
  EXPECT_EQ(lines[2]["reason"], "motion");
}

TEST_F(CohortFixture, ManifestSchemaErrors) {
  const std::string header = R"({"format":"volseg-cohort","version":1})" "\n";
  const std::string ok = R"({"case_id":"a","group":"Normal","image_path":"i.nii","reference_path":"r.nii"})" "\n";
  const LoadOptions no_files{.verify_files = false};
  EXPECT_NO_THROW(load_manifest(write("ok.jsonl", header + ok), no_files));
  try {
    load_manifest(write("m.jsonl", header + R"({"case_id":"a","group":"Normal","image_path":"i.nii"})" "\n"),
                  no_files);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("m.jsonl:2: field 'reference_path'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_manifest(write("g.jsonl", header + R"({"case_id":"a","group":"Sick","image_path":"i","reference_path":"r"})" "\n"), no_files),
               SchemaError);
  EXPECT_THROW(load_manifest(write("h.jsonl", ok), no_files), SchemaError);
  EXPECT_THROW(load_manifest(write("e.jsonl", header), no_files), SchemaError);
  EXPECT_THROW(load_manifest(write("d.jsonl", header + ok + ok), no_files), DuplicateCaseId);
  EXPECT_THROW(load_manifest(write("f.jsonl", header + ok)), MissingFile);
  EXPECT_THROW(load_manifest(dir_ / "absent.jsonl"), MissingFile);
}

TEST_F(CohortFixture, CsvImportMatchesJsonl) {
  testing::write_cohort_fixture(dir_);
  const auto csv = write("cohort.csv",
                         "case_id,group,sex,age_years,image_path,reference_path,pred:A,qc_status\n"
                         "c1,CP,M,12.5,img.nii,ref.nii,a1.nii,included\n"
                         "c2,Normal,F,9,img.nii,ref.nii,a2.nii,\n");
  const auto m = load_manifest(csv);
  EXPECT_EQ(m.cases[0].sex, 'M');
  EXPECT_EQ(m.cases[0].age_years, 12.5);
  EXPECT_NEAR(evaluate_cohort(m, "A").row(kAllLabel).dsc->mean, 0.70, 1e-12);
  EXPECT_THROW(load_manifest(write("bad.csv", "case_id,group\n")), SchemaError);
  EXPECT_THROW(load_manifest(write("bad2.csv", "case_id,group,image_path,reference_path,age_years\n"
                                                "c1,CP,img.nii,ref.nii,old\n")),
               SchemaError);
}

TEST_F(CohortFixture, SaveManifestRoundTrip) {
  const auto m = load_manifest(testing::write_cohort_fixture(dir_, {.with_excluded = true}));
  save_manifest(m, dir_ / "copy.jsonl");
  const auto back = load_manifest(dir_ / "copy.jsonl");
  ASSERT_EQ(back.cases.size(), m.cases.size());
  for (std::size_t i = 0; i < m.cases.size(); ++i) {
    EXPECT_EQ(case_to_json(back.cases[i]), case_to_json(m.cases[i]));
  }
}

TEST_F(CohortFixture, EightyFourCaseManifestCounts) {
  // 84 cases: 42 Normal, 23 AP, 19 CP.
  std::string text = R"({"format":"volseg-cohort","version":1})" "\n";
  for (int i = 0; i < 84; ++i) {
    const char* g = i < 42 ? "Normal" : i < 65 ? "AcutePancreatitis" : "ChronicPancreatitis";
    text += R"({"case_id":"p)" + std::to_string(i) + R"(","group":")" + g +
            R"(","image_path":"i.nii","reference_path":"r.nii","sex":")" + (i % 2 ? "M" : "F") +
            R"(","age_years":)" + std::to_string(3 + i % 15) + "}\n";
  }
  const auto m = load_manifest(write("big.jsonl", text), {.verify_files = false});
  EXPECT_EQ(m.cases.size(), 84u);
  EXPECT_EQ(m.count(Group::kNormal), 42u);
  EXPECT_EQ(m.count(Group::kAcutePancreatitis), 23u);
  EXPECT_EQ(m.count(Group::kChronicPancreatitis), 19u);
}

}  // namespace
}  // namespace volseg::cohort
