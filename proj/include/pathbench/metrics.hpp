#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pathbench {

/// Predicted column that absorbs every extraction failure.
inline constexpr std::string_view kInvalidLabel = "INVALID";

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  /// predicted == nullopt (or a label outside the set) lands in INVALID.
  void add(std::string_view gold, const std::optional<std::string>& predicted, std::size_t n = 1);

  const std::vector<std::string>& labels() const { return labels_; }
  /// Column labels: the label set followed by INVALID.
  std::vector<std::string> columns() const;
  std::size_t count(std::size_t gold, std::size_t predicted_column) const;
  std::size_t count(std::string_view gold, std::string_view predicted) const;
  std::size_t row_sum(std::size_t gold) const;
  std::size_t column_sum(std::size_t predicted_column) const;
  std::size_t invalid_column() const { return labels_.size(); }
  std::size_t total() const;
  std::size_t diagonal() const;
  std::optional<std::size_t> index_of(std::string_view label) const;

  nlohmann::ordered_json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
  /// Tidy rows: gold,predicted,count (every cell, zeros included).
  std::string to_csv() const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;  // row-major, labels x (labels + 1)
};

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ScoredInstance {
  std::string gold;
  std::optional<std::string> predicted;  // nullopt: extraction failure
};

struct RunMetrics {
  int run_index = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, ClassStats> per_class;
  ConfusionMatrix confusion{{}};

  nlohmann::ordered_json to_json() const;
  static RunMetrics from_json(const nlohmann::json& j);
};

/// Accuracy counts failures as wrong. Macro F1 averages classes with gold
/// support > 0; a supported class with no correct prediction scores 0.
RunMetrics score_run(std::span<const ScoredInstance> outcomes, std::span<const std::string> labelset,
                     int run_index = 0);

struct AggregateMetrics {
  std::size_t n_runs = 0;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  double sd_accuracy = 0.0;
  double sd_macro_f1 = 0.0;
  double ci95_accuracy = 0.0;  // half-widths
  double ci95_macro_f1 = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// Two-sided 95% Student-t critical value.
double t_critical_95(std::size_t degrees_of_freedom);

AggregateMetrics aggregate(std::span<const RunMetrics> runs);

struct ConfusionPair {
  std::string gold;
  std::string predicted;
  std::size_t count = 0;
  double rate = 0.0;  // share of the gold row
};

struct ErrorAnalysis {
  std::map<std::string, double> rates;  // gold -> 1 - diag/row
  std::vector<ConfusionPair> top_pairs;

  std::string rates_csv() const;
  std::string pairs_csv() const;
};

ErrorAnalysis error_rates(const ConfusionMatrix& confusion, std::size_t top_k = 10);

std::string csv_field(std::string_view value);

}  // namespace pathbench
