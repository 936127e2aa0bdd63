#pragma once

#include "pathbench/corpus.hpp"
#include "pathbench/gateway.hpp"
#include "pathbench/labels.hpp"
#include "pathbench/prompts.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pathbench {

struct TunegenConfig {
  std::size_t n_variants = 1;
  std::uint64_t seed = 7;
  std::optional<std::string> generator;  // endpoint name; unset: fixture variants
};

/// Declarative pipeline configuration. Secrets stay in the environment; an
/// endpoint only names the variable that holds its key.
struct EvalConfig {
  std::optional<nlohmann::json> curation;  // raw curation block, see CurationConfig
  std::optional<std::filesystem::path> corpus;
  std::filesystem::path base_dir;          // relative paths resolve against this
  SplitRatios split_ratios;
  std::uint64_t split_seed = kDefaultSplitSeed;
  MeanPolicy mean_policy = MeanPolicy::AllTimes;
  std::vector<ModelEndpoint> endpoints;
  std::optional<std::string> summarizer;
  int n_runs = 5;
  std::vector<Task> tasks{Task::TypeId, Task::Staging, Task::Prognosis};
  PromptMode prompt_mode = PromptMode::Standard;
  std::size_t concurrency = 8;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path output_dir = "runs";
  std::uint64_t shot_seed = 1;
  int summary_max_words = kDefaultSummaryWords;
  TunegenConfig tunegen;

  /// n_runs >= 1, ratios sum to 1, tasks scored and unique, endpoint names unique.
  void validate() const;
  /// Also requires at least one endpoint.
  void validate_for_evaluation() const;

  CurationConfig curation_config() const;
  const ModelEndpoint& endpoint(std::string_view name) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  nlohmann::ordered_json to_json() const;
  static EvalConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static EvalConfig load(const std::filesystem::path& path);
};

/// sha256 of the effective configuration.
std::string config_hash(const EvalConfig& config);

}  // namespace pathbench
