#pragma once

#include "pathbench/corpus.hpp"
#include "pathbench/gateway.hpp"
#include "pathbench/labels.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pathbench {

enum class Provenance { Original, Paraphrased };

std::string_view to_string(Provenance p);

/// Instruction wording for one task. Placeholders: {{REPORT}} in the user
/// template, {{OPTIONS}} (type) and {{MEAN_TIME}} (prognosis).
struct TemplateVariant {
  Task task = Task::TypeId;
  std::string system;
  std::string user_template;
  Provenance provenance = Provenance::Original;
  std::optional<std::string> generator_model;

  nlohmann::ordered_json to_json() const;
};

/// The zero-shot (tuned-mode) templates every variant paraphrases.
TemplateVariant original_variant(Task task);
/// Pre-validated paraphrases shipped for offline builds.
std::vector<TemplateVariant> fixture_variants(Task task);

/// Empty when the variant keeps placeholders, option lists and answer shapes.
std::vector<std::string> validate_variant(const TemplateVariant& variant);

struct ParaphraseSource {
  Gateway* gateway = nullptr;          // null: offline, use fixtures
  const ModelEndpoint* endpoint = nullptr;
  int max_attempts_per_variant = 3;
};

/// Returns n variants, the first always the Original. Throws when n valid
/// variants cannot be produced, listing the rejects.
std::vector<TemplateVariant> paraphrase_templates(Task task, std::size_t n_variants, const ParaphraseSource& source,
                                                  std::uint64_t seed);

/// Renders a variant into concrete (system, user) strings.
std::pair<std::string, std::string> render_variant(const TemplateVariant& variant, const PathologyRecord& record,
                                                   std::optional<double> mean_years);

struct TuningExample {
  Task task = Task::TypeId;
  std::string sample_id;
  Split split = Split::Train;
  std::string system;
  std::string user;
  std::string assistant;

  friend bool operator==(const TuningExample&, const TuningExample&) = default;
};

using VariantSet = std::map<Task, std::vector<TemplateVariant>>;

struct GeneratedPairs {
  std::vector<TuningExample> examples;
  std::map<std::string, std::size_t> skipped;  // reason -> count
};

/// One example per record per applicable task. Test-split records are never
/// used; a Test record in the input is an integrity error.
GeneratedPairs generate_pairs(std::span<const PathologyRecord> records, const VariantSet& variants,
                              const std::map<CancerType, double>& means, std::uint64_t seed);

/// Writes shuffled chat JSON-lines plus a sidecar "<dest>.index.jsonl" with
/// (sample_id, task, split) per line in the same order.
void emit_chat_file(std::span<const TuningExample> examples, const std::filesystem::path& destination,
                    std::uint64_t seed);
/// Reads both files back into examples.
std::vector<TuningExample> read_chat_file(const std::filesystem::path& path);

std::string chat_line(const TuningExample& example);

}  // namespace pathbench
