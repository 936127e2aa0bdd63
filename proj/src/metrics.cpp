#include "pathbench/metrics.hpp"

#include "pathbench/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---- confusion ----------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * (labels_.size() + 1), 0) {
  for (const auto& l : labels_) {
    if (l == kInvalidLabel) throw Error(ErrorKind::Precondition, "INVALID is a reserved label");
  }
}

std::optional<std::size_t> ConfusionMatrix::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

void ConfusionMatrix::add(std::string_view gold, const std::optional<std::string>& predicted, std::size_t n) {
  const auto g = index_of(gold);
  if (!g) throw Error(ErrorKind::Precondition, "gold label '" + std::string(gold) + "' outside the label set");
  std::size_t p = invalid_column();
  if (predicted) {
    if (auto idx = index_of(*predicted)) p = *idx;
  }
  counts_[*g * (labels_.size() + 1) + p] += n;
}

std::vector<std::string> ConfusionMatrix::columns() const {
  auto cols = labels_;
  cols.emplace_back(kInvalidLabel);
  return cols;
}

std::size_t ConfusionMatrix::count(std::size_t gold, std::size_t predicted_column) const {
  return counts_.at(gold * (labels_.size() + 1) + predicted_column);
}

std::size_t ConfusionMatrix::count(std::string_view gold, std::string_view predicted) const {
  const auto g = index_of(gold);
  if (!g) return 0;
  if (predicted == kInvalidLabel) return count(*g, invalid_column());
  const auto p = index_of(predicted);
  return p ? count(*g, *p) : 0;
}

std::size_t ConfusionMatrix::row_sum(std::size_t gold) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p <= labels_.size(); ++p) s += count(gold, p);
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted_column) const {
  std::size_t s = 0;
  for (std::size_t g = 0; g < labels_.size(); ++g) s += count(g, predicted_column);
  return s;
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::diagonal() const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) s += count(i, i);
  return s;
}

ordered_json ConfusionMatrix::to_json() const {
  ordered_json j;
  j["labels"] = labels_;
  j["columns"] = columns();
  ordered_json rows = ordered_json::array();
  for (std::size_t g = 0; g < labels_.size(); ++g) {
    ordered_json row = ordered_json::array();
    for (std::size_t p = 0; p <= labels_.size(); ++p) row.push_back(count(g, p));
    rows.push_back(row);
  }
  j["counts"] = rows;
  return j;
}

ConfusionMatrix ConfusionMatrix::from_json(const json& j) {
  ConfusionMatrix m(j.at("labels").get<std::vector<std::string>>());
  const auto& rows = j.at("counts");
  if (rows.size() != m.labels_.size()) throw Error(ErrorKind::Schema, "confusion matrix row count mismatch");
  for (std::size_t g = 0; g < rows.size(); ++g) {
    if (rows[g].size() != m.labels_.size() + 1) throw Error(ErrorKind::Schema, "confusion matrix column count mismatch");
    for (std::size_t p = 0; p < rows[g].size(); ++p) {
      m.counts_[g * (m.labels_.size() + 1) + p] = rows[g][p].get<std::size_t>();
    }
  }
  return m;
}

std::string ConfusionMatrix::to_csv() const {
  std::string out = "gold,predicted,count\n";
  const auto cols = columns();
  for (std::size_t g = 0; g < labels_.size(); ++g) {
    for (std::size_t p = 0; p < cols.size(); ++p) {
      out += csv_field(labels_[g]) + "," + csv_field(cols[p]) + "," + std::to_string(count(g, p)) + "\n";
    }
  }
  return out;
}

// ---- per-run scoring ----------------------------------------------------------

RunMetrics score_run(std::span<const ScoredInstance> outcomes, std::span<const std::string> labelset, int run_index) {
  if (outcomes.empty()) throw Error(ErrorKind::Precondition, "score_run needs at least one instance");
  RunMetrics m;
  m.run_index = run_index;
  m.n = outcomes.size();
  m.confusion = ConfusionMatrix(std::vector<std::string>(labelset.begin(), labelset.end()));
  for (const auto& o : outcomes) m.confusion.add(o.gold, o.predicted);

  m.accuracy = static_cast<double>(m.confusion.diagonal()) / static_cast<double>(m.n);
  double f1_sum = 0.0;
  std::size_t f1_classes = 0;
  for (std::size_t c = 0; c < labelset.size(); ++c) {
    const auto tp = m.confusion.count(c, c);
    const auto support = m.confusion.row_sum(c);
    const auto predicted = m.confusion.column_sum(c);
    ClassStats s;
    s.support = support;
    s.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (support > 0) {
      f1_sum += s.f1;
      ++f1_classes;
    }
    if (support > 0 || predicted > 0) m.per_class[labelset[c]] = s;
  }
  m.macro_f1 = f1_classes > 0 ? f1_sum / static_cast<double>(f1_classes) : 0.0;
  return m;
}

ordered_json RunMetrics::to_json() const {
  ordered_json j;
  j["run_index"] = run_index;
  j["n"] = n;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  ordered_json pc = ordered_json::object();
  for (const auto& label : confusion.labels()) {
    auto it = per_class.find(label);
    if (it == per_class.end()) continue;
    const auto& s = it->second;
    pc[label] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  j["per_class"] = pc;
  j["confusion"] = confusion.to_json();
  return j;
}

RunMetrics RunMetrics::from_json(const json& j) {
  RunMetrics m;
  m.run_index = j.at("run_index").get<int>();
  m.n = j.at("n").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& [label, s] : j.at("per_class").items()) {
    m.per_class[label] = {s.at("precision").get<double>(), s.at("recall").get<double>(), s.at("f1").get<double>(),
                          s.at("support").get<std::size_t>()};
  }
  m.confusion = ConfusionMatrix::from_json(j.at("confusion"));
  return m;
}

// ---- aggregation --------------------------------------------------------------

double t_critical_95(std::size_t degrees_of_freedom) {
  if (degrees_of_freedom == 0) throw Error(ErrorKind::Precondition, "t quantile needs df >= 1");
  const boost::math::students_t dist(static_cast<double>(degrees_of_freedom));
  return boost::math::quantile(boost::math::complement(dist, 0.025));
}

namespace {
struct MeanSd {
  double mean;
  double sd;
};

MeanSd mean_sd(const std::vector<double>& xs) {
  // Summed in sorted order, so the result is permutation-invariant.
  auto sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  std::vector<double> sq;
  sq.reserve(sorted.size());
  for (double x : sorted) sq.push_back((x - mean) * (x - mean));
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / (n - 1.0);
  return {mean, std::sqrt(var)};
}
}  // namespace

AggregateMetrics aggregate(std::span<const RunMetrics> runs) {
  if (runs.size() < 2) throw Error(ErrorKind::Precondition, "aggregate needs at least 2 runs for a confidence interval");
  std::vector<double> acc;
  std::vector<double> f1;
  for (const auto& r : runs) {
    acc.push_back(r.accuracy);
    f1.push_back(r.macro_f1);
  }
  const auto a = mean_sd(acc);
  const auto f = mean_sd(f1);
  const double t = t_critical_95(runs.size() - 1);
  const double root_n = std::sqrt(static_cast<double>(runs.size()));
  AggregateMetrics out;
  out.n_runs = runs.size();
  out.mean_accuracy = a.mean;
  out.mean_macro_f1 = f.mean;
  out.sd_accuracy = a.sd;
  out.sd_macro_f1 = f.sd;
  out.ci95_accuracy = t * a.sd / root_n;
  out.ci95_macro_f1 = t * f.sd / root_n;
  return out;
}

ordered_json AggregateMetrics::to_json() const {
  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };
  ordered_json j;
  j["n_runs"] = n_runs;
  j["mean_accuracy"] = mean_accuracy;
  j["ci95_accuracy"] = ci95_accuracy;
  j["accuracy_interval"] = {clamp01(mean_accuracy - ci95_accuracy), clamp01(mean_accuracy + ci95_accuracy)};
  j["sd_accuracy"] = sd_accuracy;
  j["mean_macro_f1"] = mean_macro_f1;
  j["ci95_macro_f1"] = ci95_macro_f1;
  j["macro_f1_interval"] = {clamp01(mean_macro_f1 - ci95_macro_f1), clamp01(mean_macro_f1 + ci95_macro_f1)};
  j["sd_macro_f1"] = sd_macro_f1;
  return j;
}

// ---- error analysis -----------------------------------------------------------

ErrorAnalysis error_rates(const ConfusionMatrix& confusion, std::size_t top_k) {
  ErrorAnalysis out;
  const auto cols = confusion.columns();
  const auto& labels = confusion.labels();
  for (std::size_t g = 0; g < labels.size(); ++g) {
    const auto row = confusion.row_sum(g);
    if (row == 0) continue;
    out.rates[labels[g]] = 1.0 - static_cast<double>(confusion.count(g, g)) / static_cast<double>(row);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (p == g || confusion.count(g, p) == 0) continue;
      out.top_pairs.push_back({labels[g], cols[p], confusion.count(g, p),
                               static_cast<double>(confusion.count(g, p)) / static_cast<double>(row)});
    }
  }
  std::sort(out.top_pairs.begin(), out.top_pairs.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.gold != b.gold) return a.gold < b.gold;
    return a.predicted < b.predicted;
  });
  if (out.top_pairs.size() > top_k) out.top_pairs.resize(top_k);
  return out;
}

std::string ErrorAnalysis::rates_csv() const {
  std::string out = "gold,error_rate\n";
  for (const auto& [label, rate] : rates) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", rate);
    out += csv_field(label) + "," + buf + "\n";
  }
  return out;
}

std::string ErrorAnalysis::pairs_csv() const {
  std::string out = "gold,predicted,count,rate\n";
  for (const auto& p : top_pairs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", p.rate);
    out += csv_field(p.gold) + "," + csv_field(p.predicted) + "," + std::to_string(p.count) + "," + buf + "\n";
  }
  return out;
}

}  // namespace pathbench
