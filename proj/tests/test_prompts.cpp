#include "pathbench/error.hpp"
#include "pathbench/prompts.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace pathbench;
using pbtest::make_record;

namespace {

std::string golden(const std::string& name) {
  return pbtest::slurp(std::filesystem::path(PATHBENCH_GOLDEN_DIR) / name);
}

PathologyRecord golden_record() {
  auto r = make_record("TCGA-BR-0001", 0, golden("report.txt"), Split::Test);
  r.cancer_type = *CancerType::parse("Stomach adenocarcinoma");
  r.stage_raw = "Stage IIIA";
  r.stage = AjccStage::III;
  r.dss_time_years = 3.0;
  r.dss_event = false;
  return r;
}

ShotSet golden_shots() {
  ShotSet s;
  for (int i = 1; i <= 8; ++i) {
    s.exemplars.push_back({"SHOT-" + std::to_string(i),
                           "Summary " + std::to_string(i) + ": gastric adenocarcinoma, node status " +
                               (i % 2 == 1 ? "negative." : "positive."),
                           1.54, i % 2 == 1});
  }
  return s;
}

int count(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

template <class T>
const T& as(const BuildResult& r) {
  return std::get<T>(r);
}

/// Train records of one type with alternating long and short follow-up.
std::vector<PathologyRecord> shot_pool(int n, SummaryIndex& summaries) {
  std::vector<PathologyRecord> rs;
  for (int i = 0; i < n; ++i) {
    auto r = make_record("P" + std::to_string(100 + i), 4, "report " + std::to_string(i));
    r.dss_time_years = i % 2 == 0 ? 5.0 : 0.5;
    r.dss_event = true;
    summaries[r.sample_id] = "summary of P" + std::to_string(100 + i);
    rs.push_back(r);
  }
  return rs;
}

}  // namespace

TEST(GoldenPrompts, TypeIdentification) {
  const auto b = build_type_prompt(golden_record());
  EXPECT_EQ(b.system, golden("type_system.txt"));
  EXPECT_EQ(b.user, golden("type_user.txt"));
  EXPECT_EQ(b.gold, Answer(*CancerType::parse("Stomach adenocarcinoma")));
}

TEST(GoldenPrompts, Staging) {
  const auto b = as<PromptBundle>(build_stage_prompt(golden_record()));
  EXPECT_EQ(b.system, golden("staging_system.txt"));
  EXPECT_EQ(b.user, golden("staging_user.txt"));
  EXPECT_EQ(b.gold, Answer(AjccStage::III));
}

TEST(GoldenPrompts, Prognosis) {
  const auto b = as<PromptBundle>(build_prognosis_prompt(golden_record(), 1.54, golden_shots()));
  EXPECT_EQ(b.system, golden("prognosis_system.txt"));
  EXPECT_EQ(b.user, golden("prognosis_user.txt"));
  EXPECT_EQ(b.gold, Answer(true));
  EXPECT_EQ(b.shot_ids.size(), 8u);
}

TEST(TypePrompt, ListsEveryLabelAndDemandsJson) {
  const auto b = build_type_prompt(golden_record());
  EXPECT_NE(b.system.find("You will only output it as a JSON Object"), std::string::npos);
  for (auto l : kCancerTypeLabels) EXPECT_NE(b.system.find("'" + std::string(l) + "'"), std::string::npos) << l;
  auto other = make_record("X", 9, "different report");
  EXPECT_EQ(build_type_prompt(other).system, b.system);
  EXPECT_NE(build_type_prompt(other).user, b.user);
}

TEST(StagePrompt, FourOptionsAndSkipsMissingStage) {
  const auto b = as<PromptBundle>(build_stage_prompt(golden_record()));
  for (const char* o : {"(A) Stage I\n", "(B) Stage II\n", "(C) Stage III\n", "(D) Stage IV"}) {
    EXPECT_NE(b.user.find(o), std::string::npos) << o;
  }
  EXPECT_EQ(count(b.user, "\n\n("), 4);
  auto r = golden_record();
  r.stage.reset();
  const auto s = build_stage_prompt(r);
  ASSERT_TRUE(std::holds_alternative<Skipped>(s));
  EXPECT_EQ(as<Skipped>(s).reason, SkipReason::MissingStage);
}

TEST(PrognosisPrompt, MeanFormattingAndExemplarBalance) {
  auto shots = golden_shots();
  for (auto& e : shots.exemplars) e.mean_dss_years = 2.0;
  const auto b = as<PromptBundle>(build_prognosis_prompt(golden_record(), 2.0, shots));
  EXPECT_NE(b.user.find("survive after 2.00 years"), std::string::npos);
  EXPECT_EQ(count(b.system, R"(Answer: {"Survival": "True"})"), 4);
  EXPECT_EQ(count(b.system, R"(Answer: {"Survival": "False"})"), 4);
  EXPECT_EQ(b.mean_dss_years, 2.0);
  EXPECT_EQ(format_mean_time(1.5449), "1.54");
}

TEST(PrognosisPrompt, SkipsIndeterminateOverlapAndBadShots) {
  auto r = golden_record();
  r.dss_time_years = 0.5;
  r.dss_event = false;
  auto s = build_prognosis_prompt(r, 1.54, golden_shots());
  ASSERT_TRUE(std::holds_alternative<Skipped>(s));
  EXPECT_EQ(as<Skipped>(s).reason, SkipReason::IndeterminateLabel);

  auto shots = golden_shots();
  shots.exemplars[0].sample_id = golden_record().sample_id;
  s = build_prognosis_prompt(golden_record(), 1.54, shots);
  ASSERT_TRUE(std::holds_alternative<Skipped>(s));
  EXPECT_EQ(as<Skipped>(s).reason, SkipReason::ShotOverlap);

  shots = golden_shots();
  shots.exemplars.pop_back();
  s = build_prognosis_prompt(golden_record(), 1.54, shots);
  ASSERT_TRUE(std::holds_alternative<Skipped>(s));
  EXPECT_EQ(as<Skipped>(s).reason, SkipReason::NoShotSet);
  EXPECT_FALSE(shots.problems().empty());
  EXPECT_TRUE(golden_shots().problems().empty());
}

TEST(SelectShots, FourAndFourAlternatingAndDeterministic) {
  SummaryIndex summaries;
  const auto rs = shot_pool(20, summaries);
  const auto type = CancerType::at(4);
  const auto a = select_shots(rs, type, 5, 1.54, summaries);
  const auto b = select_shots(rs, type, 5, 1.54, summaries);
  ASSERT_TRUE(a.problems().empty());
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(a.exemplars[i].sample_id, b.exemplars[i].sample_id);
    EXPECT_EQ(a.exemplars[i].label, i % 2 == 0);
    EXPECT_EQ(a.exemplars[i].summary, summaries.at(a.exemplars[i].sample_id));
    EXPECT_DOUBLE_EQ(a.exemplars[i].mean_dss_years, 1.54);
  }
  bool any_differs = false;
  for (std::uint64_t seed = 6; seed < 12 && !any_differs; ++seed) {
    const auto c = select_shots(rs, type, seed, 1.54, summaries);
    for (std::size_t i = 0; i < 8; ++i) any_differs |= c.exemplars[i].sample_id != a.exemplars[i].sample_id;
  }
  EXPECT_TRUE(any_differs);
}

TEST(SelectShots, OnlyTrainRecordsWithSummaries) {
  SummaryIndex summaries;
  auto rs = shot_pool(20, summaries);
  rs[0].split = Split::Test;
  summaries.erase(rs[2].sample_id);
  const auto s = select_shots(rs, CancerType::at(4), 1, 1.54, summaries);
  EXPECT_FALSE(s.contains(rs[0].sample_id));
  EXPECT_FALSE(s.contains(rs[2].sample_id));
}

TEST(SelectShots, ShortClassIsPreconditionError) {
  SummaryIndex summaries;
  auto rs = shot_pool(8, summaries);
  rs[0].dss_time_years = 0.2;  // leaves three positives
  try {
    select_shots(rs, CancerType::at(4), 1, 1.54, summaries);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
    EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
  }
}

TEST(SummaryPrompt, BoundedAndFaithful) {
  const auto b = build_summary_prompt(golden_record(), 120);
  EXPECT_EQ(b.task, Task::Summarize);
  EXPECT_NE(b.system.find("120 words"), std::string::npos);
  EXPECT_NE(b.system.find("Do not add, infer, or invent"), std::string::npos);
  EXPECT_NE(b.user.find(golden("report.txt")), std::string::npos);
  auto empty = golden_record();
  empty.report_text.clear();
  try {
    build_summary_prompt(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
}

TEST(TunedPrompts, NoScaffoldNoExemplars) {
  const auto r = golden_record();
  const auto staging = as<PromptBundle>(build_tuned_prompt(Task::Staging, r, std::nullopt));
  EXPECT_EQ(staging.mode, PromptMode::Tuned);
  EXPECT_EQ(staging.system.find("step by step"), std::string::npos);
  EXPECT_EQ(staging.user, golden("staging_user.txt"));

  const auto prog = as<PromptBundle>(build_tuned_prompt(Task::Prognosis, r, 1.54));
  EXPECT_NE(prog.user.find("1.54"), std::string::npos);
  EXPECT_EQ(prog.system.find("Answer:"), std::string::npos);
  EXPECT_TRUE(prog.shot_ids.empty());
  const auto no_mean = build_tuned_prompt(Task::Prognosis, r, std::nullopt);
  EXPECT_EQ(as<Skipped>(no_mean).reason, SkipReason::MissingMean);

  const auto type = as<PromptBundle>(build_tuned_prompt(Task::TypeId, r, std::nullopt));
  EXPECT_EQ(type.system, build_type_prompt(r).system);
  EXPECT_EQ(type.user, build_type_prompt(r).user);
  EXPECT_THROW(build_tuned_prompt(Task::Summarize, r, std::nullopt), Error);
}

TEST(PromptBuilders, InputIsNotMutated) {
  const auto before = golden_record();
  auto r = before;
  build_type_prompt(r);
  build_stage_prompt(r);
  build_prognosis_prompt(r, 1.54, golden_shots());
  build_summary_prompt(r);
  EXPECT_EQ(r, before);
}

TEST(PromptBundles, JsonCarriesGoldLabel) {
  const auto j = as<PromptBundle>(build_stage_prompt(golden_record())).to_json();
  EXPECT_EQ(j["gold"], "Stage III");
  EXPECT_EQ(j["task"], "staging");
  EXPECT_EQ(j["mode"], "standard");
  EXPECT_EQ(parse_mode("TUNED"), PromptMode::Tuned);
}
