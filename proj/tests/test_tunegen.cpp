#include "pathbench/error.hpp"
#include "pathbench/extract.hpp"
#include "pathbench/tunegen.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <set>

using namespace pathbench;
using nlohmann::json;
using pbtest::make_record;

namespace {

constexpr std::string_view kStageOptions = "(A) Stage I\n\n(B) Stage II\n\n(C) Stage III\n\n(D) Stage IV";

std::vector<PathologyRecord> labelled_records(int n) {
  std::vector<PathologyRecord> rs;
  for (int i = 0; i < n; ++i) {
    auto r = make_record("TCGA-XX-" + std::to_string(1000 + i), static_cast<std::size_t>(i % 4),
                         "Report " + std::to_string(i) + ": \"quoted\" {braces} and\nnewlines.",
                         i % 5 == 4 ? Split::Val : Split::Train);
    r.stage = static_cast<AjccStage>(1 + i % 4);
    r.stage_raw = stage_label(*r.stage);
    r.dss_time_years = i % 2 == 0 ? 4.0 : 0.5;
    r.dss_event = true;
    rs.push_back(r);
  }
  return rs;
}

std::map<CancerType, double> means_for(const std::vector<PathologyRecord>& rs) {
  std::map<CancerType, double> m;
  for (const auto& r : rs) m[r.cancer_type] = 2.0;
  return m;
}

VariantSet offline_variants(std::size_t n) {
  VariantSet vs;
  for (auto t : {Task::TypeId, Task::Staging, Task::Prognosis}) vs[t] = paraphrase_templates(t, n, {}, 1);
  return vs;
}

std::string between(const std::string& s, const std::string& a, const std::string& b) {
  const auto i = s.find(a) + a.size();
  return s.substr(i, s.find(b, i) - i);
}

}  // namespace

TEST(Variants, OriginalsAndFixturesValidate) {
  for (auto t : {Task::TypeId, Task::Staging, Task::Prognosis}) {
    EXPECT_TRUE(validate_variant(original_variant(t)).empty()) << task_name(t);
    const auto fx = fixture_variants(t);
    EXPECT_EQ(fx.size(), 3u);
    for (const auto& v : fx) {
      EXPECT_TRUE(validate_variant(v).empty()) << v.system;
      EXPECT_EQ(v.provenance, Provenance::Paraphrased);
    }
  }
  EXPECT_THROW(original_variant(Task::Summarize), Error);
}

TEST(Variants, SingleVariantIsTheOriginal) {
  const auto vs = paraphrase_templates(Task::Staging, 1, {}, 3);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].provenance, Provenance::Original);
  EXPECT_EQ(vs[0].system, original_variant(Task::Staging).system);
}

TEST(Variants, OfflineFixturesCoverFourButNotFive) {
  for (auto t : {Task::TypeId, Task::Staging, Task::Prognosis}) {
    const auto vs = paraphrase_templates(t, 4, {}, 3);
    ASSERT_EQ(vs.size(), 4u);
    std::set<std::string> systems;
    for (const auto& v : vs) systems.insert(v.system);
    EXPECT_EQ(systems.size(), 4u);
    try {
      paraphrase_templates(t, 5, {}, 3);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Precondition);
      EXPECT_NE(std::string(e.what()).find("4 of 5"), std::string::npos);
    }
  }
}

TEST(Variants, ValidationRejectsBrokenTemplates) {
  auto v = original_variant(Task::Staging);
  v.user_template = "What stage? {{REPORT}}\n\n(A) Stage I\n\n(B) Stage II";
  EXPECT_FALSE(validate_variant(v).empty());

  v = original_variant(Task::Staging);
  v.user_template += " {{REPORT}}";
  EXPECT_FALSE(validate_variant(v).empty());

  v = original_variant(Task::TypeId);
  v.system = "Pick a diagnosis. Reply in JSON.";
  EXPECT_FALSE(validate_variant(v).empty());

  v = original_variant(Task::Prognosis);
  v.user_template = "Will the patient survive? {{REPORT}}\n\n(A) True\n\n(B) False";
  EXPECT_FALSE(validate_variant(v).empty());

  v = original_variant(Task::Prognosis);
  v.system += "\n\nAnswer: {\"Survival\": \"True\"}";
  EXPECT_FALSE(validate_variant(v).empty());

  v = original_variant(Task::TypeId);
  v.user_template += " {{SECRET}}";
  EXPECT_FALSE(validate_variant(v).empty());
}

TEST(Variants, LiveGenerationKeepsOptionsAndRegeneratesRejects) {
  std::atomic<int> calls{0};
  pbtest::StubServer server([&](const pbtest::StubRequest& r) {
    const int k = ++calls;
    const auto prompt = json::parse(r.body)["messages"][1]["content"].get<std::string>();
    const auto system = between(prompt, "System prompt:\n", "\n\nUser prompt:\n");
    const auto user = prompt.substr(prompt.find("User prompt:\n") + 13);
    json out;
    out["system"] = "Rephrased (" + std::to_string(k) + "). " + system;
    // Every third generation drops the report placeholder and must be rejected.
    out["user"] = k % 3 == 0 ? std::string("What stage is it?") : "Rewritten: " + user;
    return pbtest::StubReply{200, pbtest::chat_body("Sure:\n```json\n" + out.dump() + "\n```"), {}, 0};
  });
  pbtest::TempDir dir;
  Gateway gw({dir / "cache", std::nullopt, 2});
  auto ep = ModelEndpoint::from_json(json{{"name", "paraphraser"}, {"base_url", server.base_url()}});
  const auto vs = paraphrase_templates(Task::Staging, 5, {&gw, &ep, 3}, 11);
  ASSERT_EQ(vs.size(), 5u);
  std::set<std::string> systems;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    systems.insert(vs[i].system);
    EXPECT_TRUE(validate_variant(vs[i]).empty());
    EXPECT_NE(vs[i].user_template.find(kStageOptions), std::string::npos);
    if (i > 0) {
      EXPECT_EQ(vs[i].provenance, Provenance::Paraphrased);
      EXPECT_EQ(vs[i].generator_model, "paraphraser");
    }
  }
  EXPECT_EQ(systems.size(), 5u);
  EXPECT_EQ(calls.load(), 5);  // four accepted plus one reject at call 3

  // Cached: a second build issues no requests.
  const auto again = paraphrase_templates(Task::Staging, 5, {&gw, &ep, 3}, 11);
  EXPECT_EQ(calls.load(), 5);
  for (std::size_t i = 0; i < vs.size(); ++i) EXPECT_EQ(again[i].system, vs[i].system);
}

TEST(Variants, LiveGenerationGivesUpAfterRepeatedRejects) {
  pbtest::StubServer server([](const pbtest::StubRequest&) {
    return pbtest::StubReply{200, pbtest::chat_body("I cannot help with that."), {}, 0};
  });
  Gateway gw({std::nullopt, std::nullopt, 1});
  auto ep = ModelEndpoint::from_json(json{{"name", "p"}, {"base_url", server.base_url()}});
  try {
    paraphrase_templates(Task::TypeId, 2, {&gw, &ep, 2}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
    EXPECT_NE(std::string(e.what()).find("no {system, user} object"), std::string::npos);
  }
  EXPECT_EQ(server.requests(), 2);
}

TEST(Pairs, OnePerRecordPerTask) {
  const auto rs = labelled_records(10);
  const auto out = generate_pairs(rs, offline_variants(4), means_for(rs), 5);
  ASSERT_EQ(out.examples.size(), 30u);
  EXPECT_TRUE(out.skipped.empty());
  for (const auto& e : out.examples) {
    const auto& r = *std::find_if(rs.begin(), rs.end(), [&](const auto& x) { return x.sample_id == e.sample_id; });
    EXPECT_NE(e.user.find(r.report_text), std::string::npos);
    EXPECT_EQ(e.split, *r.split);
    const auto outcome = extract_answer(e.assistant, e.task);
    ASSERT_TRUE(is_extracted(outcome));
    const auto& got = std::get<Extracted>(outcome).label;
    if (e.task == Task::TypeId) EXPECT_EQ(got, Answer(r.cancer_type));
    if (e.task == Task::Staging) EXPECT_EQ(got, Answer(*r.stage));
    if (e.task == Task::Prognosis) EXPECT_EQ(got, Answer(*r.dss_time_years > 2.0));
    EXPECT_EQ(e.system.find("{{"), std::string::npos);
    EXPECT_EQ(e.user.find("{{"), std::string::npos);
  }
}

TEST(Pairs, VariantChoiceIsSeededAndSpread) {
  const auto rs = labelled_records(40);
  const auto vs = offline_variants(4);
  const auto a = generate_pairs(rs, vs, means_for(rs), 5);
  EXPECT_EQ(a.examples, generate_pairs(rs, vs, means_for(rs), 5).examples);
  std::set<std::string> systems;
  for (const auto& e : a.examples) {
    if (e.task == Task::Staging) systems.insert(e.system);
  }
  EXPECT_GT(systems.size(), 1u);
}

TEST(Pairs, SkipsAreCounted) {
  auto rs = labelled_records(3);
  rs[0].stage.reset();
  rs[0].stage_raw.reset();
  rs[1].dss_time_years = 0.5;
  rs[1].dss_event = false;
  auto means = means_for(rs);
  means.erase(rs[2].cancer_type);
  const auto out = generate_pairs(rs, offline_variants(1), means, 1);
  EXPECT_EQ(out.skipped.at("staging:missing_stage"), 1u);
  EXPECT_EQ(out.skipped.at("prognosis:censored_before_threshold"), 1u);
  EXPECT_EQ(out.skipped.at("prognosis:missing_mean"), 1u);
}

TEST(Pairs, TestRecordsAreRejected) {
  auto rs = labelled_records(3);
  rs[1].split = Split::Test;
  EXPECT_THROW(generate_pairs(rs, offline_variants(1), means_for(rs), 1), Error);
  rs[1].split.reset();
  EXPECT_THROW(generate_pairs(rs, offline_variants(1), means_for(rs), 1), Error);
}

TEST(ChatFiles, RoundTripAndDeterminism) {
  pbtest::TempDir dir;
  const auto rs = labelled_records(12);
  const auto pairs = generate_pairs(rs, offline_variants(4), means_for(rs), 2).examples;
  emit_chat_file(pairs, dir / "train.jsonl", 9);
  const auto first = pbtest::slurp(dir / "train.jsonl");
  emit_chat_file(pairs, dir / "train.jsonl", 9);
  EXPECT_EQ(pbtest::slurp(dir / "train.jsonl"), first);
  auto back = read_chat_file(dir / "train.jsonl");
  ASSERT_EQ(back.size(), pairs.size());
  auto sorted = [](std::vector<TuningExample> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return std::tie(a.sample_id, a.task) < std::tie(b.sample_id, b.task);
    });
    return v;
  };
  EXPECT_EQ(sorted(back), sorted(pairs));

  std::istringstream lines(first);
  std::string line;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    ASSERT_EQ(j.size(), 1u);
    ASSERT_EQ(j["messages"].size(), 3u);
    EXPECT_EQ(j["messages"][2]["role"], "assistant");
  }
}

TEST(ChatFiles, StageAnswerLine) {
  TuningExample e{Task::Staging, "S", Split::Train, "sys", "usr", canonical_answer_json(Task::Staging, AjccStage::III)};
  EXPECT_EQ(chat_line(e),
            R"({"messages":[{"role":"system","content":"sys"},{"role":"user","content":"usr"},)"
            R"({"role":"assistant","content":"{\"stage\": \"Stage III\"}"}]})");
}

TEST(ChatFiles, UnwritableDestinationIsIoError) {
  pbtest::TempDir dir;
  std::ofstream(dir / "blocker") << "x";
  try {
    emit_chat_file({}, dir / "blocker" / "train.jsonl", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(ChatFiles, MalformedLineIsSchemaError) {
  pbtest::TempDir dir;
  std::ofstream(dir / "bad.jsonl") << R"({"messages":[{"role":"user","content":"x"}]})" << "\n";
  std::ofstream(dir / "bad.jsonl.index.jsonl") << R"({"sample_id":"S","task":"type","split":"Train"})" << "\n";
  try {
    read_chat_file(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
  }
}
