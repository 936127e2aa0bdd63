#pragma once

#include "pathbench/config.hpp"
#include "pathbench/corpus.hpp"
#include "pathbench/gateway.hpp"
#include "pathbench/metrics.hpp"
#include "pathbench/prompts.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pathbench {

/// Per-invocation record: config hash, seeds, version, counts and output
/// hashes. Written last, to <run_dir>/manifest.json.
class RunManifest {
 public:
  RunManifest(std::string subcommand, const EvalConfig& config, std::vector<std::string> args);

  void add_input(const std::filesystem::path& path);
  nlohmann::ordered_json& counts() { return counts_; }
  nlohmann::ordered_json& seeds() { return seeds_; }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Hashes every file under run_dir except the manifest itself.
  void write(const std::filesystem::path& run_dir) const;

 private:
  std::string subcommand_;
  nlohmann::ordered_json config_;
  std::string config_hash_;
  std::vector<std::string> args_;
  std::string started_at_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json counts_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds_ = nlohmann::ordered_json::object();
  std::vector<std::string> warnings_;
};

std::string_view library_version();

/// <output_dir>/<subcommand>-<UTC timestamp>[-k], created.
std::filesystem::path make_run_dir(const std::filesystem::path& output_dir, std::string_view subcommand);

/// Reads a curated corpus. Records without a split are assigned one with the
/// configured ratios and seed.
std::vector<PathologyRecord> load_split_corpus(const EvalConfig& config, const std::filesystem::path& path,
                                               RunManifest& manifest);

// ---- shots ----------------------------------------------------------------

/// Draws each type's 4+4 exemplars, then summarizes only those eight reports.
/// Types that cannot supply a full set are skipped with a warning.
std::map<CancerType, ShotSet> summarize_shots(std::span<const PathologyRecord> records,
                                              const std::map<CancerType, double>& means, const EvalConfig& config,
                                              Gateway& gateway, const ModelEndpoint& summarizer,
                                              RunManifest& manifest);
void write_shots(const std::filesystem::path& path, const std::map<CancerType, ShotSet>& shots);
std::map<CancerType, ShotSet> read_shots(const std::filesystem::path& path);

// ---- prompts --------------------------------------------------------------

struct PromptSet {
  std::vector<PromptBundle> bundles;    // task order, then sample_id
  std::map<std::string, std::size_t> skipped;  // "<task>:<reason>" -> count
};

/// Test-split prompts for every configured task.
PromptSet build_prompt_set(std::span<const PathologyRecord> records, const EvalConfig& config,
                           const std::map<CancerType, double>& means, const std::map<CancerType, ShotSet>& shots);

// ---- evaluate -------------------------------------------------------------

struct InstanceOutcome {
  std::string endpoint;
  Task task = Task::TypeId;
  int run_index = 0;
  std::string sample_id;
  std::string cancer_type;
  std::string gold;
  std::optional<std::string> predicted;
  nlohmann::ordered_json extraction;
  std::string prompt_hash;
};

struct EvaluationResult {
  std::vector<InstanceOutcome> outcomes;
  std::size_t cache_hits = 0;
  std::size_t completions = 0;
};

/// Dispatch, extract and score every (endpoint, task, run, instance). Writes
/// completions.jsonl, outcomes.jsonl and metrics/<endpoint>/<task>/run_<k>.json.
EvaluationResult evaluate(const PromptSet& prompts, std::span<const PathologyRecord> records,
                          const EvalConfig& config, std::span<const ModelEndpoint> endpoints, Gateway& gateway,
                          const std::filesystem::path& run_dir);

/// Aggregates an evaluate run directory into report/<endpoint>/<task>/ and
/// report/summary.csv under out_dir. Returns the number of (endpoint, task)
/// groups reported.
std::size_t report(const std::filesystem::path& eval_dir, const std::filesystem::path& out_dir);

// ---- survival -------------------------------------------------------------

/// km/<code>.csv per cancer type, km/summary.csv and km/dss_distribution.csv.
void km_tables(std::span<const PathologyRecord> records, MeanPolicy policy, const std::filesystem::path& out_dir);

// ---- tuning data ----------------------------------------------------------

struct TunegenResult {
  std::size_t train_examples = 0;
  std::size_t val_examples = 0;
};

/// tunegen/{train,val}.jsonl with index sidecars, variants.json and
/// manifest.json. Test-split records are filtered out before generation.
TunegenResult tunegen(std::span<const PathologyRecord> records, const EvalConfig& config, Gateway* gateway,
                      const std::filesystem::path& run_dir, RunManifest& manifest);

/// Filesystem-safe form of an endpoint name.
std::string path_component(std::string_view name);

}  // namespace pathbench
