#include "pathbench/prompts.hpp"

#include "pathbench/error.hpp"
#include "pathbench/rng.hpp"
#include "pathbench/templates.hpp"
#include "pathbench/text.hpp"

#include <algorithm>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view mode_name(PromptMode mode) { return mode == PromptMode::Standard ? "standard" : "tuned"; }

std::optional<PromptMode> parse_mode(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "standard") return PromptMode::Standard;
  if (n == "tuned") return PromptMode::Tuned;
  return std::nullopt;
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::MissingStage: return "missing_stage";
    case SkipReason::IndeterminateLabel: return "indeterminate_label";
    case SkipReason::MissingMean: return "missing_mean";
    case SkipReason::NoShotSet: return "no_shot_set";
    case SkipReason::ShotOverlap: return "shot_overlap";
  }
  return "?";
}

ordered_json PromptBundle::to_json() const {
  ordered_json j;
  j["task"] = task_name(task);
  j["mode"] = mode_name(mode);
  j["sample_id"] = sample_id;
  j["system"] = system;
  j["user"] = user;
  j["gold"] = gold ? json(answer_label(*gold)) : json(nullptr);
  j["mean_dss_years"] = mean_dss_years ? json(*mean_dss_years) : json(nullptr);
  j["shot_ids"] = shot_ids;
  return j;
}

std::vector<std::string> ShotSet::problems() const {
  std::vector<std::string> out;
  if (exemplars.size() != kSize) {
    out.push_back("expected 8 exemplars, got " + std::to_string(exemplars.size()));
  }
  const auto positives = std::count_if(exemplars.begin(), exemplars.end(), [](const auto& e) { return e.label; });
  const auto negatives = static_cast<std::ptrdiff_t>(exemplars.size()) - positives;
  if (positives != 4 || negatives != 4) {
    out.push_back("expected 4 positive and 4 negative exemplars, got " + std::to_string(positives) + " and " +
                  std::to_string(negatives));
  }
  for (const auto& e : exemplars) {
    if (e.summary.empty()) out.push_back("exemplar " + e.sample_id + " has an empty summary");
  }
  return out;
}

bool ShotSet::contains(std::string_view sample_id) const {
  return std::any_of(exemplars.begin(), exemplars.end(), [&](const auto& e) { return e.sample_id == sample_id; });
}

std::string format_mean_time(double years) { return text::fixed2(years); }

namespace {

void require_report(const PathologyRecord& record) {
  if (record.report_text.empty()) {
    throw Error(ErrorKind::Precondition, "empty report text for " + record.sample_id);
  }
}

PromptBundle base_bundle(Task task, PromptMode mode, const PathologyRecord& record) {
  PromptBundle b;
  b.task = task;
  b.mode = mode;
  b.sample_id = record.sample_id;
  return b;
}

}  // namespace

PromptBundle build_type_prompt(const PathologyRecord& record) {
  require_report(record);
  auto b = base_bundle(Task::TypeId, PromptMode::Standard, record);
  b.system = templates::render(templates::get("type_system.txt"), {{"OPTIONS", templates::cancer_type_options()}});
  b.user = templates::render(templates::get("type_user.txt"), {{"REPORT", record.report_text}});
  b.gold = record.cancer_type;
  return b;
}

BuildResult build_stage_prompt(const PathologyRecord& record) {
  require_report(record);
  if (!record.stage) return Skipped{SkipReason::MissingStage, record.sample_id};
  auto b = base_bundle(Task::Staging, PromptMode::Standard, record);
  b.system = std::string(templates::get("staging_system.txt"));
  b.user = templates::render(templates::get("staging_user.txt"), {{"REPORT", record.report_text}});
  b.gold = *record.stage;
  return b;
}

BuildResult build_prognosis_prompt(const PathologyRecord& record, double mean_years, const ShotSet& shots) {
  require_report(record);
  const auto label = prognosis_label(record, mean_years);
  if (!label.value) return Skipped{SkipReason::IndeterminateLabel, std::string(to_string(label.reason))};
  if (auto problems = shots.problems(); !problems.empty()) return Skipped{SkipReason::NoShotSet, problems.front()};
  if (shots.contains(record.sample_id)) return Skipped{SkipReason::ShotOverlap, record.sample_id};

  const auto mean_text = format_mean_time(mean_years);
  const auto example_tpl = templates::get("prognosis_example.txt");
  std::string examples;
  auto b = base_bundle(Task::Prognosis, PromptMode::Standard, record);
  for (const auto& e : shots.exemplars) {
    if (!examples.empty()) examples += "\n\n";
    examples += templates::render(example_tpl, {{"MEAN_TIME", format_mean_time(e.mean_dss_years)},
                                                {"SUMMARY", e.summary},
                                                {"ANSWER", canonical_answer_json(Task::Prognosis, e.label)}});
    b.shot_ids.push_back(e.sample_id);
  }
  b.system = templates::render(templates::get("prognosis_system.txt"), {{"EXAMPLES", examples}});
  b.user = templates::render(templates::get("prognosis_user.txt"),
                             {{"MEAN_TIME", mean_text}, {"REPORT", record.report_text}});
  b.gold = *label.value;
  b.mean_dss_years = mean_years;
  return b;
}

PromptBundle build_summary_prompt(const PathologyRecord& record, int max_words) {
  require_report(record);
  if (max_words <= 0) throw Error(ErrorKind::Precondition, "summary word budget must be positive");
  auto b = base_bundle(Task::Summarize, PromptMode::Standard, record);
  const templates::Values values{{"MAX_WORDS", std::to_string(max_words)}, {"REPORT", record.report_text}};
  b.system = templates::render(templates::get("summary_system.txt"), values);
  b.user = templates::render(templates::get("summary_user.txt"), values);
  return b;
}

BuildResult build_tuned_prompt(Task task, const PathologyRecord& record, std::optional<double> mean_years) {
  require_report(record);
  switch (task) {
    case Task::TypeId: {
      auto b = build_type_prompt(record);
      b.mode = PromptMode::Tuned;
      return b;
    }
    case Task::Staging: {
      if (!record.stage) return Skipped{SkipReason::MissingStage, record.sample_id};
      auto b = base_bundle(task, PromptMode::Tuned, record);
      b.system = std::string(templates::get("staging_tuned_system.txt"));
      b.user = templates::render(templates::get("staging_user.txt"), {{"REPORT", record.report_text}});
      b.gold = *record.stage;
      return b;
    }
    case Task::Prognosis: {
      if (!mean_years) return Skipped{SkipReason::MissingMean, std::string(record.cancer_type.label())};
      const auto label = prognosis_label(record, *mean_years);
      if (!label.value) return Skipped{SkipReason::IndeterminateLabel, std::string(to_string(label.reason))};
      auto b = base_bundle(task, PromptMode::Tuned, record);
      const templates::Values values{{"MEAN_TIME", format_mean_time(*mean_years)}, {"REPORT", record.report_text}};
      b.system = templates::render(templates::get("prognosis_tuned_system.txt"), values);
      b.user = templates::render(templates::get("prognosis_user.txt"), values);
      b.gold = *label.value;
      b.mean_dss_years = mean_years;
      return b;
    }
    case Task::Summarize: break;
  }
  throw Error(ErrorKind::Precondition, "no tuned prompt for the summarize task");
}

ShotSet select_shots(std::span<const PathologyRecord> records, CancerType type, std::uint64_t seed,
                     double mean_years, const SummaryIndex& summaries) {
  std::vector<const PathologyRecord*> positives;
  std::vector<const PathologyRecord*> negatives;
  for (const auto& r : records) {
    if (r.cancer_type != type || r.split != Split::Train) continue;
    auto s = summaries.find(r.sample_id);
    if (s == summaries.end() || s->second.empty()) continue;
    const auto label = prognosis_label(r, mean_years);
    if (!label.value) continue;
    (*label.value ? positives : negatives).push_back(&r);
  }
  const auto by_id = [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; };
  std::sort(positives.begin(), positives.end(), by_id);
  std::sort(negatives.begin(), negatives.end(), by_id);
  const std::string type_label(type.label());
  if (positives.size() < 4) {
    throw Error(ErrorKind::Precondition, "insufficient positive exemplars for " + type_label + " (" +
                                             std::to_string(positives.size()) + " available)");
  }
  if (negatives.size() < 4) {
    throw Error(ErrorKind::Precondition, "insufficient negative exemplars for " + type_label + " (" +
                                             std::to_string(negatives.size()) + " available)");
  }

  SeededStream rng(seed, {"select_shots", type.label()});
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  auto draw = [&rng](std::vector<const PathologyRecord*>& pool, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
  };
  draw(positives, 4);
  draw(negatives, 4);

  ShotSet shots;
  auto add = [&](const PathologyRecord* r, bool label) {
    shots.exemplars.push_back({r->sample_id, summaries.find(r->sample_id)->second, mean_years, label});
  };
  // Alternate true/false.
  for (std::size_t i = 0; i < 4; ++i) {
    add(positives[i], true);
    add(negatives[i], false);
  }
  return shots;
}

}  // namespace pathbench
