#pragma once

#include "pathbench/corpus.hpp"
#include "pathbench/labels.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace pathbench {

enum class PromptMode { Standard, Tuned };

std::string_view mode_name(PromptMode mode);
std::optional<PromptMode> parse_mode(std::string_view name);

struct PromptBundle {
  Task task = Task::TypeId;
  PromptMode mode = PromptMode::Standard;
  std::string system;
  std::string user;
  std::string sample_id;
  std::optional<Answer> gold;
  std::optional<double> mean_dss_years;
  std::vector<std::string> shot_ids;

  nlohmann::ordered_json to_json() const;
};

enum class SkipReason { MissingStage, IndeterminateLabel, MissingMean, NoShotSet, ShotOverlap };

std::string_view to_string(SkipReason reason);

struct Skipped {
  SkipReason reason;
  std::string detail;
};

using BuildResult = std::variant<PromptBundle, Skipped>;

struct Exemplar {
  std::string sample_id;
  std::string summary;
  double mean_dss_years = 0.0;
  bool label = false;
};

/// Eight summarized exemplars, four of each prognosis class.
struct ShotSet {
  static constexpr std::size_t kSize = 8;
  std::vector<Exemplar> exemplars;

  /// Empty when valid; otherwise one message per violation.
  std::vector<std::string> problems() const;
  bool contains(std::string_view sample_id) const;
};

/// sample_id -> summary text.
using SummaryIndex = std::map<std::string, std::string, std::less<>>;

inline constexpr int kDefaultSummaryWords = 200;

std::string format_mean_time(double years);

PromptBundle build_type_prompt(const PathologyRecord& record);
BuildResult build_stage_prompt(const PathologyRecord& record);
BuildResult build_prognosis_prompt(const PathologyRecord& record, double mean_years, const ShotSet& shots);
PromptBundle build_summary_prompt(const PathologyRecord& record, int max_words = kDefaultSummaryWords);
/// Zero-shot prompts for instruction-tuned models: no reasoning scaffold, no
/// exemplars. Prognosis requires the mean.
BuildResult build_tuned_prompt(Task task, const PathologyRecord& record, std::optional<double> mean_years);

/// Seeded 4+4 draw from Train records of the type that have a determinate
/// label and a summary. Throws a precondition error naming the short class.
ShotSet select_shots(std::span<const PathologyRecord> records, CancerType type, std::uint64_t seed,
                     double mean_years, const SummaryIndex& summaries);

}  // namespace pathbench
