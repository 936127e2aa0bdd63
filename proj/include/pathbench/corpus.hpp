#pragma once

#include "pathbench/labels.hpp"
#include "pathbench/table.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pathbench {

enum class Split { Train, Val, Test };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct PathologyRecord {
  std::string sample_id;
  CancerType cancer_type = CancerType::at(0);
  std::string report_text;
  std::optional<std::string> stage_raw;
  std::optional<AjccStage> stage;
  std::optional<double> dss_time_years;
  std::optional<bool> dss_event;  // true: disease-specific death observed
  std::optional<double> age_at_diagnosis;
  std::optional<std::string> race;
  std::optional<std::string> gender;
  std::optional<Split> split;

  friend bool operator==(const PathologyRecord&, const PathologyRecord&) = default;
};

nlohmann::ordered_json to_json(const PathologyRecord& record);
PathologyRecord record_from_json(const nlohmann::json& j);

void write_corpus(const std::filesystem::path& path, std::span<const PathologyRecord> records);
std::vector<PathologyRecord> read_corpus(const std::filesystem::path& path);

/// Checks the record-level invariants and sample_id uniqueness. Throws an
/// integrity error describing the first violation.
void validate_corpus(std::span<const PathologyRecord> records);

// ---- ingest -----------------------------------------------------------------

/// One source table and the mapping from logical field names to its headers.
struct TableSpec {
  std::filesystem::path path;
  char delimiter = ',';
  std::map<std::string, std::string> columns;
};

struct CurationConfig {
  TableSpec reports;   // logical fields: barcode, text
  TableSpec clinical;  // barcode, cancer_type, stage, dss_event, dss_time, age, race, gender
  /// DSS times are divided by this to obtain years (365.25 for day-valued tables).
  double dss_time_divisor = 365.25;
  /// Truncate barcodes to this many characters before joining (12 = patient level).
  std::optional<std::size_t> barcode_length;

  static CurationConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  /// Default column names of the public TCGA report and clinical tables.
  static CurationConfig tcga_defaults();
};

struct IngestReport {
  std::size_t report_rows = 0;
  std::size_t clinical_rows = 0;
  std::size_t records = 0;
  std::vector<std::string> reports_unmatched;
  std::vector<std::string> clinical_unmatched;
  std::map<std::string, std::vector<std::string>> rejected;  // reason -> barcodes
  std::map<std::string, std::size_t> warnings;               // reason -> count

  std::size_t rejected_count() const;
  nlohmann::ordered_json to_json() const;
};

struct CorpusLoad {
  std::vector<PathologyRecord> records;  // sorted by sample_id
  IngestReport report;
};

CorpusLoad load_corpus(const Table& reports, const Table& clinical, const CurationConfig& config);
CorpusLoad load_corpus(const CurationConfig& config);

/// Collapses sub-stages ("Stage IIB" -> II). Returns nullopt for anything
/// outside the four stage groups (X, 0, NOS composites, free text).
std::optional<AjccStage> normalize_stage(std::string_view stage_raw);

// ---- cohort statistics --------------------------------------------------------

struct CohortStats {
  std::size_t record_count = 0;
  std::size_t dss_count = 0;
  std::size_t event_count = 0;
  std::optional<double> mean_dss_years;
  std::map<AjccStage, std::size_t> stage_counts;
};

std::map<CancerType, CohortStats> cohort_stats(std::span<const PathologyRecord> records);
nlohmann::ordered_json to_json(const std::map<CancerType, CohortStats>& stats);

// ---- splits -------------------------------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void validate() const;
};

inline constexpr std::uint64_t kDefaultSplitSeed = 20250226;

struct SplitAssignment {
  std::map<std::string, Split> by_sample;
  std::vector<std::string> warnings;
};

/// Per cancer type: shuffle the type's sample ids with a seed-derived stream,
/// then cut Train/Val/Test sizes by largest-remainder apportionment.
SplitAssignment stratified_split(std::span<const PathologyRecord> records, SplitRatios ratios,
                                 std::uint64_t seed);
void apply_split(std::span<PathologyRecord> records, const SplitAssignment& assignment);

/// Largest-remainder apportionment of n items over the given ratios.
std::vector<std::size_t> apportion(std::size_t n, std::span<const double> ratios);

// ---- prognosis ----------------------------------------------------------------

enum class MeanPolicy { AllTimes, EventsOnly };

std::optional<MeanPolicy> parse_mean_policy(std::string_view name);

/// Mean DSS time over Train-split records of the type that have a time.
std::optional<double> mean_dss(std::span<const PathologyRecord> records, CancerType type,
                               MeanPolicy policy = MeanPolicy::AllTimes);
std::map<CancerType, double> mean_dss_by_type(std::span<const PathologyRecord> records,
                                              MeanPolicy policy = MeanPolicy::AllTimes);

enum class LabelReason { Determinate, MissingSurvival, CensoredBeforeThreshold };

std::string_view to_string(LabelReason reason);

struct PrognosisLabel {
  std::optional<bool> value;  // true: survived past the mean
  LabelReason reason = LabelReason::Determinate;
};

PrognosisLabel prognosis_label(const PathologyRecord& record, double mean_years);

}  // namespace pathbench
