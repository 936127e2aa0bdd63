#include "pathbench/corpus.hpp"

#include "pathbench/error.hpp"
#include "pathbench/rng.hpp"
#include "pathbench/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "Train";
    case Split::Val: return "Val";
    case Split::Test: return "Test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "train") return Split::Train;
  if (n == "val" || n == "validation") return Split::Val;
  if (n == "test") return Split::Test;
  return std::nullopt;
}

// ---- serialization ----------------------------------------------------------

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

ordered_json to_json(const PathologyRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["cancer_type"] = r.cancer_type.label();
  j["report_text"] = r.report_text;
  j["stage_raw"] = opt(r.stage_raw);
  j["stage"] = r.stage ? json(stage_label(*r.stage)) : json(nullptr);
  j["dss_time_years"] = opt(r.dss_time_years);
  j["dss_event"] = opt(r.dss_event);
  j["age_at_diagnosis"] = opt(r.age_at_diagnosis);
  j["race"] = opt(r.race);
  j["gender"] = opt(r.gender);
  j["split"] = r.split ? json(split_name(*r.split)) : json(nullptr);
  return j;
}

PathologyRecord record_from_json(const json& j) {
  PathologyRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    const auto type = CancerType::parse(j.at("cancer_type").get<std::string>());
    if (!type) throw Error(ErrorKind::Schema, "unknown cancer_type for " + r.sample_id);
    r.cancer_type = *type;
    r.report_text = j.at("report_text").get<std::string>();
    r.stage_raw = get_opt<std::string>(j, "stage_raw");
    if (auto s = get_opt<std::string>(j, "stage")) {
      r.stage = normalize_stage(*s);
      if (!r.stage) throw Error(ErrorKind::Schema, "invalid stage '" + *s + "' for " + r.sample_id);
    }
    r.dss_time_years = get_opt<double>(j, "dss_time_years");
    r.dss_event = get_opt<bool>(j, "dss_event");
    r.age_at_diagnosis = get_opt<double>(j, "age_at_diagnosis");
    r.race = get_opt<std::string>(j, "race");
    r.gender = get_opt<std::string>(j, "gender");
    if (auto s = get_opt<std::string>(j, "split")) {
      r.split = parse_split(*s);
      if (!r.split) throw Error(ErrorKind::Schema, "invalid split '" + *s + "' for " + r.sample_id);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("corpus record: ") + e.what());
  }
  return r;
}

void write_corpus(const std::filesystem::path& path, std::span<const PathologyRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  text::write_file_atomic(path, out);
}

std::vector<PathologyRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open corpus " + path.string());
  std::vector<PathologyRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    records.push_back(record_from_json(j));
  }
  validate_corpus(records);
  return records;
}

void validate_corpus(std::span<const PathologyRecord> records) {
  std::set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.sample_id).second) {
      throw Error(ErrorKind::Integrity, "duplicate sample_id " + r.sample_id);
    }
    if (r.report_text.empty()) throw Error(ErrorKind::Integrity, "empty report_text for " + r.sample_id);
    if (r.stage && (!r.stage_raw || normalize_stage(*r.stage_raw) != r.stage)) {
      throw Error(ErrorKind::Integrity, "stage inconsistent with stage_raw for " + r.sample_id);
    }
    if (r.dss_event && !r.dss_time_years) {
      throw Error(ErrorKind::Integrity, "dss_event without dss_time_years for " + r.sample_id);
    }
    if (r.dss_time_years && !(*r.dss_time_years >= 0.0)) {
      throw Error(ErrorKind::Integrity, "negative dss_time_years for " + r.sample_id);
    }
  }
}

// ---- ingest -----------------------------------------------------------------

namespace {

TableSpec table_spec_from_json(const json& j, const std::filesystem::path& base_dir,
                               std::map<std::string, std::string> defaults) {
  TableSpec spec;
  spec.columns = std::move(defaults);
  if (auto it = j.find("path"); it != j.end()) {
    std::filesystem::path p = it->get<std::string>();
    spec.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  }
  if (auto it = j.find("delimiter"); it != j.end()) {
    const auto d = it->get<std::string>();
    if (d == "\\t" || d == "tab") {
      spec.delimiter = '\t';
    } else if (d.size() == 1) {
      spec.delimiter = d[0];
    } else {
      throw Error(ErrorKind::Config, "delimiter must be a single character, got '" + d + "'");
    }
  }
  if (auto it = j.find("columns"); it != j.end()) {
    for (const auto& [k, v] : it->items()) {
      if (v.is_null()) {
        spec.columns.erase(k);
      } else {
        spec.columns[k] = v.get<std::string>();
      }
    }
  }
  return spec;
}

bool is_missing(std::string_view v) {
  v = text::trim(v);
  if (v.empty()) return true;
  if (v.front() == '[' && v.back() == ']') return true;  // "[Not Available]" and friends
  const auto l = text::to_lower(v);
  return l == "na" || l == "n/a" || l == "#n/a" || l == "nan" || l == "null" || l == "none" || l == "'--";
}

std::optional<double> parse_number(std::string_view v) {
  v = text::trim(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) return std::nullopt;
  return out;
}

std::optional<bool> parse_event(std::string_view v) {
  const auto l = text::to_lower(text::trim(v));
  if (l == "1" || l == "1.0" || l == "true" || l == "yes") return true;
  if (l == "0" || l == "0.0" || l == "false" || l == "no") return false;
  return std::nullopt;
}

struct ColumnView {
  const Table& table;
  std::map<std::string, std::size_t> index;

  ColumnView(const Table& t, const TableSpec& spec, std::initializer_list<const char*> required) : table(t) {
    for (const char* field : required) {
      auto it = spec.columns.find(field);
      if (it == spec.columns.end()) {
        throw Error(ErrorKind::Config, std::string("no column mapping for required field '") + field + "'");
      }
    }
    for (const auto& [field, header] : spec.columns) index[field] = t.column(header);
  }

  std::optional<std::string_view> get(const std::vector<std::string>& row, const std::string& field) const {
    auto it = index.find(field);
    if (it == index.end()) return std::nullopt;
    std::string_view v = row[it->second];
    if (is_missing(v)) return std::nullopt;
    return text::trim(v);
  }
};

std::string normalize_barcode(std::string_view raw, const CurationConfig& cfg) {
  auto b = std::string(text::trim(raw));
  if (cfg.barcode_length && b.size() > *cfg.barcode_length) b.resize(*cfg.barcode_length);
  return b;
}

}  // namespace

CurationConfig CurationConfig::tcga_defaults() {
  CurationConfig cfg;
  cfg.reports.columns = {{"barcode", "patient_filename"}, {"text", "text"}};
  cfg.clinical.delimiter = '\t';
  cfg.clinical.columns = {{"barcode", "bcr_patient_barcode"},
                          {"cancer_type", "type"},
                          {"stage", "ajcc_pathologic_tumor_stage"},
                          {"dss_event", "DSS"},
                          {"dss_time", "DSS.time"},
                          {"age", "age_at_initial_pathologic_diagnosis"},
                          {"race", "race"},
                          {"gender", "gender"}};
  cfg.barcode_length = 12;
  return cfg;
}

CurationConfig CurationConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  const auto defaults = tcga_defaults();
  CurationConfig cfg;
  try {
    cfg.reports = table_spec_from_json(j.value("reports", json::object()), base_dir, defaults.reports.columns);
    cfg.clinical = table_spec_from_json(j.value("clinical", json::object()), base_dir, defaults.clinical.columns);
    if (!j.contains("clinical") || !j["clinical"].contains("delimiter")) cfg.clinical.delimiter = '\t';
    cfg.dss_time_divisor = j.value("dss_time_divisor", 365.25);
    if (auto it = j.find("barcode_length"); it == j.end()) {
      cfg.barcode_length = defaults.barcode_length;
    } else if (!it->is_null()) {
      cfg.barcode_length = it->get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("curation config: ") + e.what());
  }
  if (!(cfg.dss_time_divisor > 0)) throw Error(ErrorKind::Config, "dss_time_divisor must be positive");
  return cfg;
}

std::size_t IngestReport::rejected_count() const {
  std::size_t n = 0;
  for (const auto& [_, ids] : rejected) n += ids.size();
  return n;
}

ordered_json IngestReport::to_json() const {
  ordered_json j;
  j["report_rows"] = report_rows;
  j["clinical_rows"] = clinical_rows;
  j["records"] = records;
  j["reports_unmatched"] = reports_unmatched.size();
  j["clinical_unmatched"] = clinical_unmatched.size();
  j["rejected"] = rejected_count();
  ordered_json reasons = ordered_json::object();
  for (const auto& [reason, ids] : rejected) reasons[reason] = ids;
  j["rejected_by_reason"] = reasons;
  j["warnings"] = warnings;
  j["dropped_ids"] = {{"reports_only", reports_unmatched}, {"clinical_only", clinical_unmatched}};
  return j;
}

CorpusLoad load_corpus(const Table& reports, const Table& clinical, const CurationConfig& config) {
  const ColumnView rep(reports, config.reports, {"barcode", "text"});
  const ColumnView cli(clinical, config.clinical, {"barcode", "cancer_type"});

  CorpusLoad out;
  auto& report = out.report;
  report.report_rows = reports.rows.size();
  report.clinical_rows = clinical.rows.size();

  std::unordered_map<std::string, std::size_t> report_by_id;
  for (std::size_t i = 0; i < reports.rows.size(); ++i) {
    const auto id = normalize_barcode(reports.rows[i][rep.index.at("barcode")], config);
    if (id.empty()) throw Error(ErrorKind::Integrity, "empty barcode in reports row " + std::to_string(i + 1));
    if (!report_by_id.emplace(id, i).second) {
      throw Error(ErrorKind::Integrity, "duplicate barcode " + id + " in reports table");
    }
  }
  std::unordered_map<std::string, std::size_t> clinical_by_id;
  for (std::size_t i = 0; i < clinical.rows.size(); ++i) {
    const auto id = normalize_barcode(clinical.rows[i][cli.index.at("barcode")], config);
    if (id.empty()) throw Error(ErrorKind::Integrity, "empty barcode in clinical row " + std::to_string(i + 1));
    if (!clinical_by_id.emplace(id, i).second) {
      throw Error(ErrorKind::Integrity, "duplicate barcode " + id + " in clinical table");
    }
  }

  for (const auto& [id, _] : report_by_id) {
    if (!clinical_by_id.contains(id)) report.reports_unmatched.push_back(id);
  }
  for (const auto& [id, _] : clinical_by_id) {
    if (!report_by_id.contains(id)) report.clinical_unmatched.push_back(id);
  }
  std::sort(report.reports_unmatched.begin(), report.reports_unmatched.end());
  std::sort(report.clinical_unmatched.begin(), report.clinical_unmatched.end());

  for (const auto& [id, ri] : report_by_id) {
    auto cit = clinical_by_id.find(id);
    if (cit == clinical_by_id.end()) continue;
    const auto& rrow = reports.rows[ri];
    const auto& crow = clinical.rows[cit->second];

    PathologyRecord r;
    r.sample_id = id;
    r.report_text = rrow[rep.index.at("text")];
    if (text::trim(r.report_text).empty()) {
      report.rejected["empty_report"].push_back(id);
      continue;
    }
    const auto type_raw = cli.get(crow, "cancer_type");
    std::optional<CancerType> type;
    if (type_raw) {
      type = CancerType::parse(*type_raw);
      if (!type) type = CancerType::from_tcga_code(*type_raw);
    }
    if (!type) {
      report.rejected["unknown_cancer_type"].push_back(id);
      continue;
    }
    r.cancer_type = *type;

    if (auto s = cli.get(crow, "stage")) {
      r.stage_raw = std::string(*s);
      r.stage = normalize_stage(*s);
      if (!r.stage) ++report.warnings["stage_outside_groups"];
    }
    if (auto t = cli.get(crow, "dss_time")) {
      auto v = parse_number(*t);
      if (!v || *v < 0) {
        ++report.warnings["unparseable_dss_time"];
      } else {
        r.dss_time_years = *v / config.dss_time_divisor;
      }
    }
    if (auto e = cli.get(crow, "dss_event")) {
      auto v = parse_event(*e);
      if (!v) {
        ++report.warnings["unparseable_dss_event"];
      } else if (!r.dss_time_years) {
        ++report.warnings["dss_event_without_time"];
      } else {
        r.dss_event = *v;
      }
    }
    if (auto a = cli.get(crow, "age")) {
      if (auto v = parse_number(*a)) {
        r.age_at_diagnosis = *v;
      } else {
        ++report.warnings["unparseable_age"];
      }
    }
    if (auto v = cli.get(crow, "race")) r.race = std::string(*v);
    if (auto v = cli.get(crow, "gender")) r.gender = std::string(*v);
    out.records.push_back(std::move(r));
  }
  for (auto& [_, ids] : report.rejected) std::sort(ids.begin(), ids.end());
  std::sort(out.records.begin(), out.records.end(),
            [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  report.records = out.records.size();
  return out;
}

CorpusLoad load_corpus(const CurationConfig& config) {
  const auto reports = read_delimited(config.reports.path, config.reports.delimiter);
  const auto clinical = read_delimited(config.clinical.path, config.clinical.delimiter);
  return load_corpus(reports, clinical, config);
}

std::optional<AjccStage> normalize_stage(std::string_view stage_raw) {
  auto s = text::trim(stage_raw);
  if (text::starts_with_icase(s, "stage")) {
    s.remove_prefix(5);
    s = text::trim(s);
  }
  const auto u = text::to_upper(s);
  std::size_t i = 0;
  while (i < u.size() && (u[i] == 'I' || u[i] == 'V')) ++i;
  const std::string_view numeral(u.data(), i);
  std::string_view rest(u.data() + i, u.size() - i);
  if (!rest.empty()) {
    // One sub-stage letter, optionally followed by a single digit (IIIC1).
    if (rest[0] != 'A' && rest[0] != 'B' && rest[0] != 'C') return std::nullopt;
    rest.remove_prefix(1);
    if (!rest.empty() && (rest[0] == '1' || rest[0] == '2')) rest.remove_prefix(1);
    if (!rest.empty()) return std::nullopt;
  }
  if (numeral == "I") return AjccStage::I;
  if (numeral == "II") return AjccStage::II;
  if (numeral == "III") return AjccStage::III;
  if (numeral == "IV") return AjccStage::IV;
  return std::nullopt;
}

// ---- cohort statistics --------------------------------------------------------

std::map<CancerType, CohortStats> cohort_stats(std::span<const PathologyRecord> records) {
  std::map<CancerType, CohortStats> out;
  std::map<CancerType, double> sums;
  for (const auto& r : records) {
    auto& s = out[r.cancer_type];
    ++s.record_count;
    if (r.stage) ++s.stage_counts[*r.stage];
    if (r.dss_time_years) {
      ++s.dss_count;
      sums[r.cancer_type] += *r.dss_time_years;
    }
    if (r.dss_event.value_or(false)) ++s.event_count;
  }
  for (auto& [type, s] : out) {
    if (s.dss_count > 0) s.mean_dss_years = sums[type] / static_cast<double>(s.dss_count);
  }
  return out;
}

ordered_json to_json(const std::map<CancerType, CohortStats>& stats) {
  ordered_json j = ordered_json::object();
  for (const auto& [type, s] : stats) {
    ordered_json e;
    e["record_count"] = s.record_count;
    e["dss_count"] = s.dss_count;
    e["event_count"] = s.event_count;
    e["mean_dss_years"] = s.mean_dss_years ? json(*s.mean_dss_years) : json(nullptr);
    ordered_json stages = ordered_json::object();
    for (auto st : kAllStages) {
      auto it = s.stage_counts.find(st);
      stages[stage_label(st)] = it == s.stage_counts.end() ? 0 : it->second;
    }
    e["stage_counts"] = stages;
    j[std::string(type.label())] = e;
  }
  return j;
}

// ---- splits -------------------------------------------------------------------

void SplitRatios::validate() const {
  if (train < 0 || val < 0 || test < 0) throw Error(ErrorKind::Config, "split ratios must be nonnegative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw Error(ErrorKind::Config, "split ratios must sum to 1");
}

std::vector<std::size_t> apportion(std::size_t n, std::span<const double> ratios) {
  std::vector<std::size_t> counts(ratios.size());
  std::vector<double> frac(ratios.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double quota = static_cast<double>(n) * ratios[i];
    const double fl = std::floor(quota + 1e-9);
    counts[i] = static_cast<std::size_t>(fl);
    frac[i] = std::max(0.0, quota - fl);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(ratios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

SplitAssignment stratified_split(std::span<const PathologyRecord> records, SplitRatios ratios,
                                 std::uint64_t seed) {
  ratios.validate();
  std::map<CancerType, std::vector<std::string>> by_type;
  for (const auto& r : records) by_type[r.cancer_type].push_back(r.sample_id);

  SplitAssignment out;
  const std::array<double, 3> weights{ratios.train, ratios.val, ratios.test};
  for (auto& [type, ids] : by_type) {
    std::sort(ids.begin(), ids.end());
    if (ids.size() < 3) {
      out.warnings.push_back(std::string(type.label()) + ": " + std::to_string(ids.size()) +
                             " record(s), all assigned to Train");
      for (const auto& id : ids) out.by_sample[id] = Split::Train;
      continue;
    }
    SeededStream rng(seed, {"stratified_split", type.label()});
    seeded_shuffle(ids, rng);
    const auto counts = apportion(ids.size(), weights);
    std::size_t k = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      for (std::size_t c = 0; c < counts[s]; ++c) out.by_sample[ids[k++]] = static_cast<Split>(s);
    }
  }
  return out;
}

void apply_split(std::span<PathologyRecord> records, const SplitAssignment& assignment) {
  for (auto& r : records) {
    auto it = assignment.by_sample.find(r.sample_id);
    if (it == assignment.by_sample.end()) {
      throw Error(ErrorKind::Integrity, "no split assigned to " + r.sample_id);
    }
    r.split = it->second;
  }
}

// ---- prognosis ----------------------------------------------------------------

std::optional<MeanPolicy> parse_mean_policy(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "all_times" || n == "all") return MeanPolicy::AllTimes;
  if (n == "events_only" || n == "events") return MeanPolicy::EventsOnly;
  return std::nullopt;
}

std::optional<double> mean_dss(std::span<const PathologyRecord> records, CancerType type, MeanPolicy policy) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.cancer_type != type || r.split != Split::Train || !r.dss_time_years) continue;
    if (policy == MeanPolicy::EventsOnly && !r.dss_event.value_or(false)) continue;
    sum += *r.dss_time_years;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::map<CancerType, double> mean_dss_by_type(std::span<const PathologyRecord> records, MeanPolicy policy) {
  std::set<CancerType> types;
  for (const auto& r : records) types.insert(r.cancer_type);
  std::map<CancerType, double> out;
  for (auto t : types) {
    if (auto m = mean_dss(records, t, policy)) out.emplace(t, *m);
  }
  return out;
}

std::string_view to_string(LabelReason reason) {
  switch (reason) {
    case LabelReason::Determinate: return "determinate";
    case LabelReason::MissingSurvival: return "missing_survival";
    case LabelReason::CensoredBeforeThreshold: return "censored_before_threshold";
  }
  return "?";
}

PrognosisLabel prognosis_label(const PathologyRecord& record, double mean_years) {
  if (!record.dss_time_years || !record.dss_event) return {std::nullopt, LabelReason::MissingSurvival};
  if (*record.dss_time_years > mean_years) return {true, LabelReason::Determinate};
  if (*record.dss_event) return {false, LabelReason::Determinate};
  return {std::nullopt, LabelReason::CensoredBeforeThreshold};
}

}  // namespace pathbench
