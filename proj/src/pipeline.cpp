#include "pathbench/pipeline.hpp"

#include "pathbench/error.hpp"
#include "pathbench/extract.hpp"
#include "pathbench/km.hpp"
#include "pathbench/text.hpp"
#include "pathbench/tunegen.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#ifndef PATHBENCH_VERSION
#define PATHBENCH_VERSION "0.0.0"
#endif

namespace pathbench {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now(const char* format) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

// Shortest round-trip decimal form.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. After a failure no
// new indices are claimed; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      if (failed.load()) return;
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

std::string jsonl(const std::vector<ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace

std::string_view library_version() { return PATHBENCH_VERSION; }

std::string path_component(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

// ---- manifest -------------------------------------------------------------

RunManifest::RunManifest(std::string subcommand, const EvalConfig& config, std::vector<std::string> args)
    : subcommand_(std::move(subcommand)),
      config_(config.to_json()),
      config_hash_(config_hash(config)),
      args_(std::move(args)),
      started_at_(utc_now("%Y-%m-%dT%H:%M:%SZ")) {
  seeds_["split_seed"] = config.split_seed;
  seeds_["shot_seed"] = config.shot_seed;
  seeds_["tunegen_seed"] = config.tunegen.seed;
}

void RunManifest::add_input(const fs::path& path) {
  inputs_[path.generic_string()] = text::sha256_hex(text::read_file(path));
}

void RunManifest::write(const fs::path& run_dir) const {
  ordered_json j;
  j["tool"] = "pathbench";
  j["version"] = library_version();
  j["subcommand"] = subcommand_;
  j["args"] = args_;
  j["started_at"] = started_at_;
  j["finished_at"] = utc_now("%Y-%m-%dT%H:%M:%SZ");
  j["config_sha256"] = config_hash_;
  j["config"] = config_;
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  j["counts"] = counts_;
  j["warnings"] = warnings_;
  std::vector<fs::path> files;
  if (fs::exists(run_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
      if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), run_dir));
    }
  }
  std::sort(files.begin(), files.end());
  ordered_json outputs = ordered_json::object();
  for (const auto& rel : files) {
    if (rel == "manifest.json") continue;
    outputs[rel.generic_string()] = text::sha256_hex(text::read_file(run_dir / rel));
  }
  j["outputs"] = outputs;
  text::write_file_atomic(run_dir / "manifest.json", j.dump(2) + "\n");
}

fs::path make_run_dir(const fs::path& output_dir, std::string_view subcommand) {
  const auto stamp = std::string(subcommand) + "-" + utc_now("%Y%m%dT%H%M%SZ");
  fs::create_directories(output_dir);
  for (int k = 1;; ++k) {
    const auto dir = output_dir / (k == 1 ? stamp : stamp + "-" + std::to_string(k));
    if (fs::create_directory(dir)) return dir;
  }
}

std::vector<PathologyRecord> load_split_corpus(const EvalConfig& config, const fs::path& path,
                                               RunManifest& manifest) {
  auto records = read_corpus(path);
  manifest.add_input(path);
  const bool all_split = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.split.has_value(); });
  if (!all_split) {
    const auto assignment = stratified_split(records, config.split_ratios, config.split_seed);
    apply_split(records, assignment);
    for (const auto& w : assignment.warnings) manifest.warn(w);
    manifest.warn("corpus had unsplit records; assigned splits with the configured seed");
  }
  return records;
}

// ---- shots ----------------------------------------------------------------

std::map<CancerType, ShotSet> summarize_shots(std::span<const PathologyRecord> records,
                                              const std::map<CancerType, double>& means, const EvalConfig& config,
                                              Gateway& gateway, const ModelEndpoint& summarizer,
                                              RunManifest& manifest) {
  std::map<std::string, const PathologyRecord*, std::less<>> by_id;
  SummaryIndex pending;
  for (const auto& r : records) {
    by_id[r.sample_id] = &r;
    if (r.split == Split::Train) pending[r.sample_id] = "pending";
  }

  std::map<CancerType, ShotSet> shots;
  for (const auto& [type, mean] : means) {
    try {
      shots[type] = select_shots(records, type, config.shot_seed, mean, pending);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Precondition) throw;
      manifest.warn(std::string("no shot set: ") + e.what());
    }
  }

  std::vector<Exemplar*> todo;
  for (auto& [_, set] : shots) {
    for (auto& e : set.exemplars) todo.push_back(&e);
  }
  parallel_for(todo.size(), config.concurrency, [&](std::size_t i) {
    auto& ex = *todo[i];
    const auto& rec = *by_id.at(ex.sample_id);
    const auto bundle = build_summary_prompt(rec, config.summary_max_words);
    auto request = CompletionRequest::chat(bundle.system, bundle.user, summarizer.params, 0);
    request.oracle = OracleHint{Task::Summarize, rec.sample_id, std::nullopt, rec.report_text, config.summary_max_words};
    const auto completion = gateway.cached_complete(summarizer, request);
    ex.summary = std::string(text::trim(completion.text));
    if (ex.summary.empty()) {
      throw Error(ErrorKind::Protocol, "summarizer returned an empty summary for " + rec.sample_id);
    }
  });
  manifest.counts()["shot_sets"] = shots.size();
  manifest.counts()["summaries"] = todo.size();
  return shots;
}

void write_shots(const fs::path& path, const std::map<CancerType, ShotSet>& shots) {
  ordered_json j = ordered_json::object();
  for (const auto& [type, set] : shots) {
    ordered_json list = ordered_json::array();
    for (const auto& e : set.exemplars) {
      list.push_back({{"sample_id", e.sample_id},
                      {"label", e.label},
                      {"mean_dss_years", e.mean_dss_years},
                      {"summary", e.summary}});
    }
    j[std::string(type.label())] = list;
  }
  text::write_file_atomic(path, j.dump(2) + "\n");
}

std::map<CancerType, ShotSet> read_shots(const fs::path& path) {
  std::map<CancerType, ShotSet> out;
  try {
    const auto j = json::parse(text::read_file(path));
    for (const auto& [label, list] : j.items()) {
      const auto type = CancerType::parse(label);
      if (!type) throw Error(ErrorKind::Schema, "shots file names unknown cancer type '" + label + "'");
      ShotSet set;
      for (const auto& e : list) {
        set.exemplars.push_back({e.at("sample_id").get<std::string>(), e.at("summary").get<std::string>(),
                                 e.at("mean_dss_years").get<double>(), e.at("label").get<bool>()});
      }
      if (auto problems = set.problems(); !problems.empty()) {
        throw Error(ErrorKind::Schema, "shot set for " + label + ": " + problems.front());
      }
      out[*type] = std::move(set);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, path.string() + ": " + e.what());
  }
  return out;
}

// ---- prompts --------------------------------------------------------------

PromptSet build_prompt_set(std::span<const PathologyRecord> records, const EvalConfig& config,
                           const std::map<CancerType, double>& means, const std::map<CancerType, ShotSet>& shots) {
  std::vector<const PathologyRecord*> test;
  for (const auto& r : records) {
    if (r.split == Split::Test) test.push_back(&r);
  }
  std::sort(test.begin(), test.end(), [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });

  PromptSet out;
  const ShotSet no_shots;
  for (auto task : config.tasks) {
    for (const auto* r : test) {
      const auto m = means.find(r->cancer_type);
      const std::optional<double> mean = m == means.end() ? std::nullopt : std::optional(m->second);
      BuildResult result;
      if (config.prompt_mode == PromptMode::Tuned) {
        result = build_tuned_prompt(task, *r, mean);
      } else if (task == Task::TypeId) {
        result = build_type_prompt(*r);
      } else if (task == Task::Staging) {
        result = build_stage_prompt(*r);
      } else if (!mean) {
        result = Skipped{SkipReason::MissingMean, std::string(r->cancer_type.label())};
      } else {
        const auto s = shots.find(r->cancer_type);
        result = build_prognosis_prompt(*r, *mean, s == shots.end() ? no_shots : s->second);
      }
      if (auto* b = std::get_if<PromptBundle>(&result)) {
        out.bundles.push_back(std::move(*b));
      } else {
        ++out.skipped[std::string(task_name(task)) + ":" + std::string(to_string(std::get<Skipped>(result).reason))];
      }
    }
  }
  return out;
}

// ---- evaluate -------------------------------------------------------------

EvaluationResult evaluate(const PromptSet& prompts, std::span<const PathologyRecord> records,
                          const EvalConfig& config, std::span<const ModelEndpoint> endpoints, Gateway& gateway,
                          const fs::path& run_dir) {
  std::map<std::string, std::string, std::less<>> type_of;
  for (const auto& r : records) type_of[r.sample_id] = std::string(r.cancer_type.label());

  struct Job {
    std::size_t endpoint;
    std::size_t bundle;
    int run;
  };
  std::vector<Job> jobs;
  for (std::size_t e = 0; e < endpoints.size(); ++e) {
    for (auto task : config.tasks) {
      for (int run = 0; run < config.n_runs; ++run) {
        for (std::size_t b = 0; b < prompts.bundles.size(); ++b) {
          if (prompts.bundles[b].task == task) jobs.push_back({e, b, run});
        }
      }
    }
  }

  std::vector<InstanceOutcome> outcomes(jobs.size());
  std::vector<ordered_json> completions(jobs.size());
  std::atomic<std::size_t> hits{0};
  parallel_for(jobs.size(), config.concurrency, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& ep = endpoints[job.endpoint];
    const auto& bundle = prompts.bundles[job.bundle];
    auto request = CompletionRequest::chat(bundle.system, bundle.user, ep.params, job.run);
    request.oracle = OracleHint{bundle.task, bundle.sample_id, bundle.gold, {}, config.summary_max_words};
    const auto completion = gateway.cached_complete(ep, request);
    if (completion.from_cache) ++hits;
    const auto extraction = extract_answer(completion.text, bundle.task);

    auto& o = outcomes[i];
    o.endpoint = ep.name;
    o.task = bundle.task;
    o.run_index = job.run;
    o.sample_id = bundle.sample_id;
    o.cancer_type = type_of.at(bundle.sample_id);
    o.gold = answer_label(*bundle.gold);
    if (const auto* x = std::get_if<Extracted>(&extraction)) o.predicted = answer_label(x->label);
    o.extraction = to_json(extraction);
    o.prompt_hash = request.prompt_hash();

    ordered_json c;
    c["endpoint"] = ep.name;
    c["task"] = task_name(bundle.task);
    c["run"] = job.run;
    c["sample_id"] = bundle.sample_id;
    c["prompt_hash"] = o.prompt_hash;
    c["text"] = completion.text;
    c["input_tokens"] = completion.input_tokens ? json(*completion.input_tokens) : json(nullptr);
    c["output_tokens"] = completion.output_tokens ? json(*completion.output_tokens) : json(nullptr);
    c["from_cache"] = completion.from_cache;
    c["attempts"] = completion.attempts;
    completions[i] = std::move(c);
  });

  std::vector<ordered_json> outcome_rows;
  for (const auto& o : outcomes) {
    ordered_json j;
    j["endpoint"] = o.endpoint;
    j["task"] = task_name(o.task);
    j["run"] = o.run_index;
    j["sample_id"] = o.sample_id;
    j["cancer_type"] = o.cancer_type;
    j["gold"] = o.gold;
    j["predicted"] = o.predicted ? json(*o.predicted) : json(nullptr);
    j["extraction"] = o.extraction;
    j["prompt_hash"] = o.prompt_hash;
    outcome_rows.push_back(std::move(j));
  }
  text::write_file_atomic(run_dir / "completions.jsonl", jsonl(completions));
  text::write_file_atomic(run_dir / "outcomes.jsonl", jsonl(outcome_rows));

  fs::remove_all(run_dir / "metrics");
  for (const auto& ep : endpoints) {
    for (auto task : config.tasks) {
      const auto labelset = task_labelset(task);
      for (int run = 0; run < config.n_runs; ++run) {
        std::vector<ScoredInstance> scored;
        for (const auto& o : outcomes) {
          if (o.endpoint == ep.name && o.task == task && o.run_index == run) scored.push_back({o.gold, o.predicted});
        }
        if (scored.empty()) continue;
        const auto metrics = score_run(scored, labelset, run);
        const auto path = run_dir / "metrics" / path_component(ep.name) / std::string(task_name(task)) /
                          ("run_" + std::to_string(run) + ".json");
        text::write_file_atomic(path, metrics.to_json().dump(2) + "\n");
      }
    }
  }

  EvaluationResult result;
  result.outcomes = std::move(outcomes);
  result.cache_hits = hits.load();
  result.completions = jobs.size();
  return result;
}

// ---- report ---------------------------------------------------------------

std::size_t report(const fs::path& eval_dir, const fs::path& out_dir) {
  const auto metrics_root = eval_dir / "metrics";
  if (!fs::is_directory(metrics_root)) {
    throw Error(ErrorKind::Precondition, "no metrics directory under " + eval_dir.string());
  }

  // (endpoint dir, task) -> cancer type -> {correct, total}
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::pair<std::size_t, std::size_t>>> per_type;
  if (fs::exists(eval_dir / "outcomes.jsonl")) {
    for (const auto& row : read_jsonl(eval_dir / "outcomes.jsonl")) {
      auto& cell = per_type[{path_component(row.at("endpoint").get<std::string>()), row.at("task").get<std::string>()}]
                           [row.at("cancer_type").get<std::string>()];
      const auto& pred = row.at("predicted");
      cell.first += (!pred.is_null() && pred.get<std::string>() == row.at("gold").get<std::string>()) ? 1 : 0;
      ++cell.second;
    }
  }

  std::vector<fs::path> groups;
  for (const auto& ep : fs::directory_iterator(metrics_root)) {
    if (!ep.is_directory()) continue;
    for (const auto& task : fs::directory_iterator(ep.path())) {
      if (task.is_directory()) groups.push_back(task.path());
    }
  }
  std::sort(groups.begin(), groups.end());

  std::string summary = "endpoint,task,n_runs,n_instances,mean_accuracy,ci95_accuracy,mean_macro_f1,ci95_macro_f1\n";
  for (const auto& group : groups) {
    const auto endpoint = group.parent_path().filename().string();
    const auto task_str = group.filename().string();
    const auto task = parse_task(task_str);
    if (!task) throw Error(ErrorKind::Schema, "unknown task directory " + group.string());

    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(group)) {
      if (f.path().extension() == ".json") files.push_back(f.path());
    }
    std::vector<RunMetrics> runs;
    for (const auto& f : files) {
      try {
        runs.push_back(RunMetrics::from_json(json::parse(text::read_file(f))));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Schema, f.string() + ": " + e.what());
      }
    }
    std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.run_index < b.run_index; });
    if (runs.empty()) continue;

    ordered_json agg;
    if (runs.size() >= 2) {
      agg = aggregate(runs).to_json();
    } else {
      agg["n_runs"] = 1;
      agg["mean_accuracy"] = runs.front().accuracy;
      agg["mean_macro_f1"] = runs.front().macro_f1;
      agg["ci95_accuracy"] = nullptr;
      agg["ci95_macro_f1"] = nullptr;
    }
    ordered_json per_run = ordered_json::array();
    for (const auto& r : runs) per_run.push_back({{"run", r.run_index}, {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}});
    agg["runs"] = per_run;

    ConfusionMatrix pooled(task_labelset(*task));
    const auto cols = pooled.columns();
    for (const auto& r : runs) {
      for (std::size_t g = 0; g < r.confusion.labels().size(); ++g) {
        for (std::size_t p = 0; p < cols.size(); ++p) {
          const auto n = r.confusion.count(g, p);
          if (n == 0) continue;
          pooled.add(r.confusion.labels()[g],
                     p == r.confusion.invalid_column() ? std::nullopt : std::optional(cols[p]), n);
        }
      }
    }
    const auto errors = error_rates(pooled);

    const auto dir = out_dir / "report" / endpoint / task_str;
    text::write_file_atomic(dir / "aggregate.json", agg.dump(2) + "\n");
    text::write_file_atomic(dir / "confusion.csv", pooled.to_csv());
    text::write_file_atomic(dir / "error_rates.csv", errors.rates_csv());
    text::write_file_atomic(dir / "top_confusions.csv", errors.pairs_csv());

    std::string types = "cancer_type,correct,total,accuracy\n";
    for (const auto& [type, cell] : per_type[{endpoint, task_str}]) {
      types += csv_field(type) + "," + std::to_string(cell.first) + "," + std::to_string(cell.second) + "," +
               num(static_cast<double>(cell.first) / static_cast<double>(cell.second)) + "\n";
    }
    text::write_file_atomic(dir / "per_type_accuracy.csv", types);

    const auto ci = [](const ordered_json& v) { return v.is_null() ? std::string() : num(v.get<double>()); };
    summary += csv_field(endpoint) + "," + task_str + "," + std::to_string(runs.size()) + "," +
               std::to_string(runs.front().n) + "," + num(agg["mean_accuracy"].get<double>()) + "," +
               ci(agg["ci95_accuracy"]) + "," + num(agg["mean_macro_f1"].get<double>()) + "," +
               ci(agg["ci95_macro_f1"]) + "\n";
  }
  text::write_file_atomic(out_dir / "report" / "summary.csv", summary);
  return groups.size();
}

// ---- survival -------------------------------------------------------------

void km_tables(std::span<const PathologyRecord> records, MeanPolicy policy, const fs::path& out_dir) {
  const auto means = mean_dss_by_type(records, policy);
  std::string summary = "cancer_type,code,n_subjects,n_events,mean_dss_years\n";
  std::string dist = "cancer_type,sample_id,split,dss_time_years,dss_event,survived_past_mean\n";
  for (const auto type : CancerType::all()) {
    std::vector<double> times;
    std::vector<bool> events;
    std::vector<const PathologyRecord*> rows;
    for (const auto& r : records) {
      if (r.cancer_type != type) continue;
      rows.push_back(&r);
      if (r.dss_time_years && r.dss_event) {
        times.push_back(*r.dss_time_years);
        events.push_back(*r.dss_event);
      }
    }
    std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
    const auto m = means.find(type);
    for (const auto* r : rows) {
      std::string label;
      if (m != means.end()) {
        if (const auto l = prognosis_label(*r, m->second); l.value) label = *l.value ? "True" : "False";
      }
      dist += csv_field(type.label()) + "," + r->sample_id + "," +
              (r->split ? std::string(split_name(*r->split)) : std::string()) + "," +
              (r->dss_time_years ? num(*r->dss_time_years) : std::string()) + "," +
              (r->dss_event ? std::string(*r->dss_event ? "1" : "0") : std::string()) + "," + label + "\n";
    }
    if (times.empty()) continue;
    const auto curve = km_curve(times, events);
    std::string table = "time_years,at_risk,events,survival\n";
    std::size_t n_events = 0;
    for (std::size_t i = 0; i < curve.event_times.size(); ++i) {
      table += num(curve.event_times[i]) + "," + std::to_string(curve.at_risk[i]) + "," +
               std::to_string(curve.events[i]) + "," + num(curve.survival[i]) + "\n";
      n_events += curve.events[i];
    }
    text::write_file_atomic(out_dir / "km" / (std::string(type.tcga_code()) + ".csv"), table);
    summary += csv_field(type.label()) + "," + std::string(type.tcga_code()) + "," +
               std::to_string(curve.n_subjects) + "," + std::to_string(n_events) + "," +
               (m != means.end() ? num(m->second) : std::string()) + "\n";
  }
  text::write_file_atomic(out_dir / "km" / "summary.csv", summary);
  text::write_file_atomic(out_dir / "km" / "dss_distribution.csv", dist);
}

// ---- tuning data ----------------------------------------------------------

TunegenResult tunegen(std::span<const PathologyRecord> records, const EvalConfig& config, Gateway* gateway,
                      const fs::path& run_dir, RunManifest& manifest) {
  std::vector<PathologyRecord> train;
  std::vector<PathologyRecord> val;
  std::set<std::string> test_ids;
  for (const auto& r : records) {
    if (!r.split) throw Error(ErrorKind::Integrity, "record " + r.sample_id + " has no split");
    if (*r.split == Split::Train) train.push_back(r);
    if (*r.split == Split::Val) val.push_back(r);
    if (*r.split == Split::Test) test_ids.insert(r.sample_id);
  }
  const auto means = mean_dss_by_type(records, config.mean_policy);

  ParaphraseSource source;
  if (config.tunegen.generator) {
    source.gateway = gateway;
    source.endpoint = &config.endpoint(*config.tunegen.generator);
  }
  VariantSet variants;
  ordered_json variants_json = ordered_json::object();
  for (auto task : config.tasks) {
    auto list = paraphrase_templates(task, config.tunegen.n_variants, source, config.tunegen.seed);
    ordered_json arr = ordered_json::array();
    for (const auto& v : list) {
      auto j = v.to_json();
      j["system"] = v.system;
      j["user"] = v.user_template;
      arr.push_back(std::move(j));
    }
    variants_json[std::string(task_name(task))] = std::move(arr);
    variants[task] = std::move(list);
  }

  const auto train_pairs = generate_pairs(train, variants, means, config.tunegen.seed);
  const auto val_pairs = generate_pairs(val, variants, means, config.tunegen.seed);
  for (const auto* pairs : {&train_pairs, &val_pairs}) {
    for (const auto& e : pairs->examples) {
      if (test_ids.contains(e.sample_id)) {
        throw Error(ErrorKind::Integrity, "Test-split record " + e.sample_id + " leaked into tuning data");
      }
    }
  }

  const auto dir = run_dir / "tunegen";
  emit_chat_file(train_pairs.examples, dir / "train.jsonl", config.tunegen.seed);
  emit_chat_file(val_pairs.examples, dir / "val.jsonl", config.tunegen.seed);
  text::write_file_atomic(dir / "variants.json", variants_json.dump(2) + "\n");

  ordered_json counts = ordered_json::object();
  for (const auto& [name, pairs] : {std::pair{"train", &train_pairs}, std::pair{"val", &val_pairs}}) {
    ordered_json per_task = ordered_json::object();
    for (auto task : config.tasks) {
      per_task[std::string(task_name(task))] =
          std::count_if(pairs->examples.begin(), pairs->examples.end(), [&](const auto& e) { return e.task == task; });
    }
    counts[name] = {{"examples", pairs->examples.size()}, {"by_task", per_task}, {"skipped", pairs->skipped}};
  }
  ordered_json m;
  m["seed"] = config.tunegen.seed;
  m["n_variants"] = config.tunegen.n_variants;
  m["generator"] = config.tunegen.generator ? json(*config.tunegen.generator) : json("fixture");
  m["counts"] = counts;
  m["test_records_excluded"] = test_ids.size();
  ordered_json prov = ordered_json::object();
  for (const auto& [task, list] : variants) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : list) arr.push_back(v.to_json());
    prov[std::string(task_name(task))] = arr;
  }
  m["variants"] = prov;
  text::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");

  manifest.counts()["tunegen"] = counts;
  return {train_pairs.examples.size(), val_pairs.examples.size()};
}

}  // namespace pathbench
