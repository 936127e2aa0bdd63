#include "pathbench/corpus.hpp"
#include "pathbench/error.hpp"
#include "pathbench/synthetic.hpp"
#include "pathbench/table.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

using namespace pathbench;
using pbtest::make_record;

namespace {

Table reports_table(std::initializer_list<std::pair<std::string, std::string>> rows) {
  Table t;
  t.header = {"patient_filename", "text"};
  for (const auto& [id, text] : rows) t.rows.push_back({id, text});
  return t;
}

Table clinical_table(std::initializer_list<std::vector<std::string>> rows) {
  Table t;
  t.header = {"bcr_patient_barcode", "type", "ajcc_pathologic_tumor_stage", "DSS", "DSS.time",
              "age_at_initial_pathologic_diagnosis", "race", "gender"};
  for (const auto& r : rows) t.rows.push_back(r);
  return t;
}

std::vector<std::string> clin(const std::string& id, const std::string& type = "LUAD",
                              const std::string& stage = "Stage IIB", const std::string& dss = "1",
                              const std::string& time = "730") {
  return {id, type, stage, dss, time, "61", "WHITE", "FEMALE"};
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Precondition;
}

}  // namespace

// ---- tables -----------------------------------------------------------------

TEST(DelimitedTables, QuotedFieldsAndCrlf) {
  const auto t = parse_delimited("\xEF\xBB\xBFid,text\r\nA,\"x, \"\"quoted\"\"\nnext line\"\r\nB,plain\r\n", ',');
  ASSERT_EQ(t.header, (std::vector<std::string>{"id", "text"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x, \"quoted\"\nnext line");
  EXPECT_EQ(t.rows[1][1], "plain");
}

TEST(DelimitedTables, FieldCountMismatchIsSchemaError) {
  EXPECT_EQ(kind_of([] { parse_delimited("a\tb\n1\t2\t3\n", '\t'); }), ErrorKind::Schema);
}

TEST(DelimitedTables, MissingColumnNamesIt) {
  const auto t = parse_delimited("a,b\n1,2\n", ',');
  try {
    t.column("text");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
    EXPECT_NE(std::string(e.what()).find("'text'"), std::string::npos);
  }
}

// ---- ingest -----------------------------------------------------------------

TEST(LoadCorpus, SingletonJoin) {
  const auto out = load_corpus(reports_table({{"TCGA-AA-0001.X", "report A"}}), clinical_table({clin("TCGA-AA-0001")}),
                               CurationConfig::tcga_defaults());
  ASSERT_EQ(out.records.size(), 1u);
  const auto& r = out.records[0];
  EXPECT_EQ(r.sample_id, "TCGA-AA-0001");
  EXPECT_EQ(r.cancer_type.label(), "Lung adenocarcinoma");
  EXPECT_EQ(r.stage, AjccStage::II);
  EXPECT_EQ(r.stage_raw, "Stage IIB");
  EXPECT_DOUBLE_EQ(*r.dss_time_years, 730.0 / 365.25);
  EXPECT_EQ(r.dss_event, true);
  EXPECT_EQ(r.age_at_diagnosis, 61.0);
  EXPECT_FALSE(r.split);
}

TEST(LoadCorpus, SetIntersectionDropsAreLogged) {
  const auto out = load_corpus(reports_table({{"TCGA-AA-000A", "a"}, {"TCGA-AA-000B", "b"}}),
                               clinical_table({clin("TCGA-AA-000B"), clin("TCGA-AA-000C")}),
                               CurationConfig::tcga_defaults());
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].sample_id, "TCGA-AA-000B");
  EXPECT_EQ(out.report.reports_unmatched, (std::vector<std::string>{"TCGA-AA-000A"}));
  EXPECT_EQ(out.report.clinical_unmatched, (std::vector<std::string>{"TCGA-AA-000C"}));
  // Bookkeeping: kept + dropped accounts for every input row.
  EXPECT_EQ(out.records.size() + out.report.reports_unmatched.size() + out.report.rejected_count(),
            out.report.report_rows);
  EXPECT_EQ(out.records.size() + out.report.clinical_unmatched.size() + out.report.rejected_count(),
            out.report.clinical_rows);
  const auto j = out.report.to_json();
  EXPECT_EQ(j["reports_unmatched"], 1);
  EXPECT_EQ(j["clinical_unmatched"], 1);
}

TEST(LoadCorpus, MissingRequiredColumnIsSchemaError) {
  auto clinical = clinical_table({clin("TCGA-AA-0001")});
  clinical.header[1] = "cancer";
  try {
    load_corpus(reports_table({{"TCGA-AA-0001", "r"}}), clinical, CurationConfig::tcga_defaults());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
    EXPECT_NE(std::string(e.what()).find("type"), std::string::npos);
  }
}

TEST(LoadCorpus, DuplicateBarcodeIsIntegrityError) {
  EXPECT_EQ(kind_of([] {
              load_corpus(reports_table({{"TCGA-AA-0001", "a"}, {"TCGA-AA-0001", "b"}}),
                          clinical_table({clin("TCGA-AA-0001")}), CurationConfig::tcga_defaults());
            }),
            ErrorKind::Integrity);
  EXPECT_EQ(kind_of([] {
              load_corpus(reports_table({{"TCGA-AA-0001", "a"}}),
                          clinical_table({clin("TCGA-AA-0001"), clin("TCGA-AA-0001")}),
                          CurationConfig::tcga_defaults());
            }),
            ErrorKind::Integrity);
}

TEST(LoadCorpus, NormalizesAndRejects) {
  const auto out = load_corpus(
      reports_table({{"TCGA-AA-0001", "a"}, {"TCGA-AA-0002", "  "}, {"TCGA-AA-0003", "c"}, {"TCGA-AA-0004", "d"}}),
      clinical_table({clin("TCGA-AA-0001", "STAD", "Stage X", "#N/A", "#N/A"), clin("TCGA-AA-0002"),
                      clin("TCGA-AA-0003", "NOPE"), clin("TCGA-AA-0004", "Stomach adenocarcinoma", "[Not Available]",
                                                          "0", "100")}),
      CurationConfig::tcga_defaults());
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(out.records[0].stage_raw, "Stage X");
  EXPECT_FALSE(out.records[0].stage);
  EXPECT_FALSE(out.records[0].dss_time_years);
  EXPECT_FALSE(out.records[1].stage_raw);
  EXPECT_EQ(out.records[1].dss_event, false);
  EXPECT_EQ(out.report.rejected.at("empty_report"), (std::vector<std::string>{"TCGA-AA-0002"}));
  EXPECT_EQ(out.report.rejected.at("unknown_cancer_type"), (std::vector<std::string>{"TCGA-AA-0003"}));
  validate_corpus(out.records);
}

TEST(LoadCorpus, CustomColumnMappingFromConfig) {
  pbtest::TempDir dir;
  {
    std::ofstream(dir / "r.csv") << "id;body\nP1;hello\n";
    std::ofstream(dir / "c.csv") << "id;kind;days;dead\nP1;Thymoma;365.25;1\n";
  }
  const auto cfg = CurationConfig::from_json(
      nlohmann::json::parse(R"({"reports": {"path": "r.csv", "delimiter": ";", "columns": {"barcode": "id", "text": "body"}},
           "clinical": {"path": "c.csv", "delimiter": ";",
                        "columns": {"barcode": "id", "cancer_type": "kind", "dss_time": "days", "dss_event": "dead",
                                    "stage": null, "age": null, "race": null, "gender": null}},
           "barcode_length": null})"),
      dir.path());
  const auto out = load_corpus(cfg);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].report_text, "hello");
  EXPECT_DOUBLE_EQ(*out.records[0].dss_time_years, 1.0);
}

// ---- stages -----------------------------------------------------------------

TEST(NormalizeStage, Examples) {
  EXPECT_EQ(normalize_stage("Stage IIB"), AjccStage::II);
  EXPECT_EQ(normalize_stage("Stage IV"), AjccStage::IV);
  EXPECT_EQ(normalize_stage("Stage X"), std::nullopt);
  EXPECT_EQ(normalize_stage("I/II NOS"), std::nullopt);
  EXPECT_EQ(normalize_stage("Stage 0"), std::nullopt);
  EXPECT_EQ(normalize_stage("stage iiia"), AjccStage::III);
  EXPECT_EQ(normalize_stage("IIIC"), AjccStage::III);
  EXPECT_EQ(normalize_stage("Stage IA1"), AjccStage::I);
  EXPECT_EQ(normalize_stage(" Stage IIa "), AjccStage::II);
  EXPECT_EQ(normalize_stage("Stage IIII"), std::nullopt);
  EXPECT_EQ(normalize_stage("Stage IVD"), std::nullopt);
  EXPECT_EQ(normalize_stage(""), std::nullopt);
  EXPECT_EQ(normalize_stage("[Not Available]"), std::nullopt);
}

TEST(NormalizeStage, IdempotentOnRenderings) {
  for (auto s : kAllStages) {
    EXPECT_EQ(normalize_stage(stage_label(s)), s);
    EXPECT_EQ(normalize_stage(roman(s)), s);
  }
}

// ---- corpus file ------------------------------------------------------------

TEST(CorpusFile, JsonLinesRoundTrip) {
  pbtest::TempDir dir;
  auto records = synthetic_records(50, 3);
  records[0].split = Split::Val;
  write_corpus(dir / "c.jsonl", records);
  EXPECT_EQ(read_corpus(dir / "c.jsonl"), records);
}

TEST(CorpusFile, InvariantViolationsAreIntegrityErrors) {
  auto a = make_record("A", 0, "x");
  auto b = make_record("A", 1, "y");
  EXPECT_EQ(kind_of([&] { validate_corpus(std::vector{a, b}); }), ErrorKind::Integrity);
  auto c = make_record("C", 0, "x");
  c.stage = AjccStage::II;
  EXPECT_EQ(kind_of([&] { validate_corpus(std::vector{c}); }), ErrorKind::Integrity);
  c.stage_raw = "Stage III";
  EXPECT_EQ(kind_of([&] { validate_corpus(std::vector{c}); }), ErrorKind::Integrity);
  auto d = make_record("D", 0, "x");
  d.dss_event = true;
  EXPECT_EQ(kind_of([&] { validate_corpus(std::vector{d}); }), ErrorKind::Integrity);
}

// ---- stats ------------------------------------------------------------------

TEST(CohortStats, CountsAndMeans) {
  std::vector<PathologyRecord> rs;
  for (int i = 0; i < 4; ++i) {
    auto r = make_record("S" + std::to_string(i), 25, "x");
    if (i < 3) {
      r.dss_time_years = i + 1.0;
      r.dss_event = i == 0;
    }
    if (i % 2 == 0) {
      r.stage_raw = "Stage I";
      r.stage = AjccStage::I;
    }
    rs.push_back(r);
  }
  const auto stats = cohort_stats(rs);
  const auto& s = stats.at(CancerType::at(25));
  EXPECT_EQ(s.record_count, 4u);
  EXPECT_EQ(s.dss_count, 3u);
  EXPECT_EQ(s.event_count, 1u);
  EXPECT_DOUBLE_EQ(*s.mean_dss_years, 2.0);
  EXPECT_EQ(s.stage_counts.at(AjccStage::I), 2u);
  EXPECT_EQ(stats.size(), 1u);
}

// ---- splits -----------------------------------------------------------------

TEST(Apportion, LargestRemainder) {
  const std::array<double, 3> r{0.8, 0.1, 0.1};
  EXPECT_EQ(apportion(100, r), (std::vector<std::size_t>{80, 10, 10}));
  EXPECT_EQ(apportion(10, r), (std::vector<std::size_t>{8, 1, 1}));
  // 0.8*7 = 5.6, 0.7, 0.7: remainders .6 .7 .7 -> val and test take the two extras.
  EXPECT_EQ(apportion(7, r), (std::vector<std::size_t>{5, 1, 1}));
  EXPECT_EQ(apportion(3, r), (std::vector<std::size_t>{3, 0, 0}));
  for (std::size_t n = 0; n < 300; ++n) {
    const auto c = apportion(n, r);
    ASSERT_EQ(c[0] + c[1] + c[2], n);
    for (std::size_t i = 0; i < 3; ++i) ASSERT_LT(std::abs(static_cast<double>(c[i]) - r[i] * n), 1.0);
  }
}

TEST(StratifiedSplit, HundredRecordsOfOneType) {
  std::vector<PathologyRecord> rs;
  for (int i = 0; i < 100; ++i) rs.push_back(make_record("P" + std::to_string(1000 + i), 3, "r", std::nullopt));
  const auto a = stratified_split(rs, {}, kDefaultSplitSeed);
  std::map<Split, int> counts;
  for (const auto& [_, s] : a.by_sample) ++counts[s];
  EXPECT_EQ(counts[Split::Train], 80);
  EXPECT_EQ(counts[Split::Val], 10);
  EXPECT_EQ(counts[Split::Test], 10);
  EXPECT_TRUE(a.warnings.empty());
}

TEST(StratifiedSplit, DeterministicAndSeedSensitive) {
  const auto rs = synthetic_records(400, 9);
  const auto a = stratified_split(rs, {}, 11);
  const auto b = stratified_split(rs, {}, 11);
  const auto c = stratified_split(rs, {}, 12);
  EXPECT_EQ(a.by_sample, b.by_sample);
  EXPECT_NE(a.by_sample, c.by_sample);
  // Input order does not matter.
  auto reversed = rs;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(stratified_split(reversed, {}, 11).by_sample, a.by_sample);
}

TEST(StratifiedSplit, TinyTypesGoToTrainWithWarning) {
  std::vector<PathologyRecord> rs{make_record("A", 0, "r"), make_record("B", 0, "r"), make_record("C", 1, "r")};
  const auto a = stratified_split(rs, {}, 1);
  for (const auto& [_, s] : a.by_sample) EXPECT_EQ(s, Split::Train);
  EXPECT_EQ(a.warnings.size(), 2u);
}

TEST(StratifiedSplit, PartitionAndPerTypeDeviation) {
  const auto rs = synthetic_records(1000, 5);
  auto copy = rs;
  const auto a = stratified_split(rs, {}, kDefaultSplitSeed);
  apply_split(copy, a);
  std::map<CancerType, std::map<Split, double>> counts;
  std::map<CancerType, double> totals;
  for (const auto& r : copy) {
    ASSERT_TRUE(r.split);
    counts[r.cancer_type][*r.split] += 1;
    totals[r.cancer_type] += 1;
  }
  EXPECT_EQ(a.by_sample.size(), rs.size());
  for (const auto& [type, n] : totals) {
    EXPECT_LE(std::abs(counts[type][Split::Train] - 0.8 * n), 1.0);
    EXPECT_LE(std::abs(counts[type][Split::Val] - 0.1 * n), 1.0);
    EXPECT_LE(std::abs(counts[type][Split::Test] - 0.1 * n), 1.0);
  }
}

TEST(StratifiedSplit, RatiosMustSumToOne) { EXPECT_THROW(stratified_split({}, {0.5, 0.3, 0.3}, 1), Error); }

// ---- prognosis --------------------------------------------------------------

TEST(MeanDss, ArithmeticMeanOverTrain) {
  std::vector<PathologyRecord> rs;
  for (int i = 1; i <= 3; ++i) {
    auto r = make_record("T" + std::to_string(i), 25, "x");
    r.dss_time_years = i;
    r.dss_event = i == 2;
    rs.push_back(r);
  }
  auto test_rec = make_record("Z", 25, "x", Split::Test);
  test_rec.dss_time_years = 100.0;
  test_rec.dss_event = true;
  rs.push_back(test_rec);
  EXPECT_DOUBLE_EQ(*mean_dss(rs, CancerType::at(25)), 2.0);
  EXPECT_DOUBLE_EQ(*mean_dss(rs, CancerType::at(25), MeanPolicy::EventsOnly), 2.0);
  EXPECT_FALSE(mean_dss(rs, CancerType::at(3)));
  EXPECT_EQ(mean_dss_by_type(rs).size(), 1u);
}

TEST(MeanDss, CensoredAndUncensoredAlike) {
  auto a = make_record("A", 7, "x");
  a.dss_time_years = 2.0;
  a.dss_event = true;
  auto b = make_record("B", 7, "x");
  b.dss_time_years = 2.0;
  b.dss_event = false;
  EXPECT_DOUBLE_EQ(*mean_dss(std::vector{a, b}, CancerType::at(7)), 2.0);
}

TEST(PrognosisLabel, Examples) {
  auto r = make_record("A", 0, "x");
  r.dss_time_years = 3.0;
  r.dss_event = true;
  EXPECT_EQ(prognosis_label(r, 1.54).value, true);
  r.dss_time_years = 0.5;
  EXPECT_EQ(prognosis_label(r, 1.54).value, false);
  r.dss_event = false;
  const auto l = prognosis_label(r, 1.54);
  EXPECT_FALSE(l.value);
  EXPECT_EQ(l.reason, LabelReason::CensoredBeforeThreshold);
  r.dss_event.reset();
  EXPECT_EQ(prognosis_label(r, 1.54).reason, LabelReason::MissingSurvival);
  // Exactly at the mean counts as "not past it".
  r.dss_time_years = 1.54;
  r.dss_event = true;
  EXPECT_EQ(prognosis_label(r, 1.54).value, false);
}

TEST(PrognosisLabel, LabelsAgreeWithThresholdOnSyntheticCohort) {
  auto rs = synthetic_records(600, 2);
  apply_split(rs, stratified_split(rs, {}, 3));
  const auto means = mean_dss_by_type(rs);
  for (const auto& r : rs) {
    const auto m = means.find(r.cancer_type);
    if (m == means.end()) continue;
    const auto l = prognosis_label(r, m->second);
    if (l.value == true) EXPECT_GT(*r.dss_time_years, m->second);
    if (l.value == false) {
      EXPECT_LE(*r.dss_time_years, m->second);
      EXPECT_EQ(r.dss_event, true);
    }
  }
}

TEST(MeanPolicies, Parse) {
  EXPECT_EQ(parse_mean_policy("all_times"), MeanPolicy::AllTimes);
  EXPECT_EQ(parse_mean_policy("events_only"), MeanPolicy::EventsOnly);
  EXPECT_FALSE(parse_mean_policy("median"));
}
