#include "pathbench/cli.hpp"

#include "pathbench/config.hpp"
#include "pathbench/error.hpp"
#include "pathbench/extract.hpp"
#include "pathbench/pipeline.hpp"
#include "pathbench/synthetic.hpp"
#include "pathbench/text.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>

namespace pathbench {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config;
  std::string run_dir;
  std::string output_dir;
  std::string corpus;
  std::string cache_dir;
  std::string shots;
  std::vector<std::string> endpoints;
  std::vector<std::string> tasks;
  std::string prompt_mode;
  std::string mean_policy;
  std::vector<double> ratios;
  double mislabel = 0.0;
  double format_break = 0.0;
  double verbose = 0.0;
  std::uint64_t oracle_seed = 0;
  int n_runs = 5;
  std::size_t concurrency = 8;
  std::uint64_t split_seed = kDefaultSplitSeed;
  std::uint64_t shot_seed = 1;
  int summary_words = kDefaultSummaryWords;
  std::string summarizer;
  std::string reports;
  std::string clinical;
  // report
  std::string eval_dir;
  // tunegen
  std::size_t n_variants = 1;
  std::uint64_t tunegen_seed = 7;
  std::string generator;
  // synth
  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  // extract
  std::string task;
  std::string input = "-";
  std::string completions;
  std::string output;
};

// Option handles whose count() tells whether the flag was given.
struct Given {
  std::multimap<std::string, CLI::Option*> opts;
  void add(const std::string& name, CLI::Option* opt) { opts.emplace(name, opt); }
  bool has(const std::string& name) const {
    const auto [lo, hi] = opts.equal_range(name);
    return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
  }
};

void add_common(CLI::App* sub, Flags& f, Given& g) {
  g.add("config", sub->add_option("--config", f.config, "JSON configuration file"));
  g.add("run-dir", sub->add_option("--run-dir", f.run_dir, "Write outputs here instead of a timestamped directory"));
  g.add("output-dir", sub->add_option("--output-dir", f.output_dir, "Parent of timestamped run directories"));
}

void add_corpus(CLI::App* sub, Flags& f, Given& g) {
  g.add("corpus", sub->add_option("--corpus", f.corpus, "Curated corpus (JSON lines)"));
  g.add("split-seed", sub->add_option("--split-seed", f.split_seed, "Seed of the stratified split"));
  g.add("ratios", sub->add_option("--ratios", f.ratios, "Train Val Test ratios")->expected(3));
  g.add("mean-policy", sub->add_option("--mean-policy", f.mean_policy, "all_times or events_only"));
}

void add_eval(CLI::App* sub, Flags& f, Given& g) {
  g.add("endpoint", sub->add_option("--endpoint", f.endpoints, "Endpoint name (repeatable; 'oracle' is built in)"));
  g.add("mislabel", sub->add_option("--mislabel", f.mislabel, "Oracle mislabel probability"));
  g.add("format-break", sub->add_option("--format-break", f.format_break, "Oracle format-break probability"));
  g.add("verbose", sub->add_option("--verbose-prob", f.verbose, "Oracle verbose-filler probability"));
  g.add("oracle-seed", sub->add_option("--oracle-seed", f.oracle_seed, "Oracle error-model seed"));
  g.add("n-runs", sub->add_option("--n-runs", f.n_runs, "Repetitions per instance"));
  g.add("tasks", sub->add_option("--tasks", f.tasks, "Subset of type, staging, prognosis")->delimiter(','));
  g.add("prompt-mode", sub->add_option("--prompt-mode", f.prompt_mode, "standard or tuned"));
  g.add("concurrency", sub->add_option("--concurrency", f.concurrency, "Maximum requests in flight"));
  g.add("cache-dir", sub->add_option("--cache-dir", f.cache_dir, "Response cache directory"));
  g.add("shot-seed", sub->add_option("--shot-seed", f.shot_seed, "Seed of the exemplar draw"));
  g.add("summary-words", sub->add_option("--summary-words", f.summary_words, "Exemplar summary word budget"));
  g.add("summarizer", sub->add_option("--summarizer", f.summarizer, "Endpoint that writes exemplar summaries"));
  g.add("shots", sub->add_option("--shots", f.shots, "Precomputed shots.json"));
}

void apply_oracle_flags(ModelEndpoint& e, const Flags& f, const Given& g) {
  if (e.kind != EndpointKind::OracleTest) return;
  if (g.has("mislabel")) e.oracle.mislabel_prob = f.mislabel;
  if (g.has("format-break")) e.oracle.format_break_prob = f.format_break;
  if (g.has("verbose")) e.oracle.verbose_prob = f.verbose;
  if (g.has("oracle-seed")) e.oracle.seed = f.oracle_seed;
  e.validate();
}

bool has_endpoint(const EvalConfig& c, std::string_view name) {
  return std::any_of(c.endpoints.begin(), c.endpoints.end(), [&](const auto& e) { return e.name == name; });
}

EvalConfig resolve_config(const Flags& f, const Given& g) {
  EvalConfig c = f.config.empty() ? EvalConfig{} : EvalConfig::load(f.config);
  if (g.has("output-dir")) c.output_dir = f.output_dir;
  if (g.has("corpus")) c.corpus = f.corpus;
  if (g.has("split-seed")) c.split_seed = f.split_seed;
  if (g.has("ratios")) c.split_ratios = {f.ratios.at(0), f.ratios.at(1), f.ratios.at(2)};
  if (g.has("mean-policy")) {
    const auto p = parse_mean_policy(f.mean_policy);
    if (!p) throw Error(ErrorKind::Config, "unknown mean policy '" + f.mean_policy + "'");
    c.mean_policy = *p;
  }
  if (g.has("n-runs")) c.n_runs = f.n_runs;
  if (g.has("tasks")) {
    c.tasks.clear();
    for (const auto& t : f.tasks) {
      const auto task = parse_task(t);
      if (!task) throw Error(ErrorKind::Config, "unknown task '" + t + "'");
      c.tasks.push_back(*task);
    }
  }
  if (g.has("prompt-mode")) {
    const auto m = parse_mode(f.prompt_mode);
    if (!m) throw Error(ErrorKind::Config, "unknown prompt mode '" + f.prompt_mode + "'");
    c.prompt_mode = *m;
  }
  if (g.has("concurrency")) c.concurrency = f.concurrency;
  if (g.has("cache-dir")) c.cache_dir = f.cache_dir;
  if (g.has("shot-seed")) c.shot_seed = f.shot_seed;
  if (g.has("summary-words")) c.summary_max_words = f.summary_words;
  if (g.has("summarizer")) c.summarizer = f.summarizer;
  if (g.has("n-variants")) c.tunegen.n_variants = f.n_variants;
  if (g.has("tunegen-seed")) c.tunegen.seed = f.tunegen_seed;
  if (g.has("generator")) c.tunegen.generator = f.generator;
  if (g.has("reports") || g.has("clinical")) {
    json cur = c.curation.value_or(json::object());
    if (g.has("reports")) cur["reports"]["path"] = fs::absolute(f.reports).string();
    if (g.has("clinical")) cur["clinical"]["path"] = fs::absolute(f.clinical).string();
    c.curation = cur;
  }

  // The built-in oracle joins the endpoint list whenever it is referenced.
  const bool wants_oracle = std::find(f.endpoints.begin(), f.endpoints.end(), "oracle") != f.endpoints.end() ||
                            c.summarizer == "oracle";
  if (wants_oracle && !has_endpoint(c, "oracle")) c.endpoints.push_back(ModelEndpoint::oracle_endpoint("oracle", {}));
  for (auto& e : c.endpoints) {
    const bool selected =
        f.endpoints.empty() || std::find(f.endpoints.begin(), f.endpoints.end(), e.name) != f.endpoints.end();
    if (selected) apply_oracle_flags(e, f, g);
  }
  c.validate();
  return c;
}

std::vector<ModelEndpoint> selected_endpoints(const EvalConfig& c, const Flags& f) {
  std::vector<ModelEndpoint> out;
  if (f.endpoints.empty()) return c.endpoints;
  for (const auto& name : f.endpoints) out.push_back(c.endpoint(name));
  return out;
}

fs::path open_run_dir(const EvalConfig& c, const Flags& f, std::string_view subcommand) {
  if (!f.run_dir.empty()) {
    fs::create_directories(f.run_dir);
    return f.run_dir;
  }
  return make_run_dir(c.output_dir, subcommand);
}

Gateway::Options gateway_options(const EvalConfig& c, const fs::path& run_dir) {
  Gateway::Options o;
  o.cache_dir = c.cache_dir ? *c.cache_dir : c.output_dir / "cache";
  o.audit_log = run_dir / "audit.jsonl";
  o.max_in_flight = c.concurrency;
  return o;
}

// Curated corpus from --corpus / config, or curated and split in memory.
std::vector<PathologyRecord> obtain_corpus(const EvalConfig& c, RunManifest& manifest) {
  if (c.corpus) return load_split_corpus(c, *c.corpus, manifest);
  if (c.curation) {
    auto load = load_corpus(c.curation_config());
    const auto assignment = stratified_split(load.records, c.split_ratios, c.split_seed);
    apply_split(load.records, assignment);
    for (const auto& w : assignment.warnings) manifest.warn(w);
    manifest.counts()["ingest"] = load.report.to_json();
    return std::move(load.records);
  }
  throw Error(ErrorKind::Config, "no corpus: pass --corpus or configure 'corpus' or 'curation'");
}

const ModelEndpoint& summarizer_for(const EvalConfig& c, std::span<const ModelEndpoint> selected) {
  if (c.summarizer) return c.endpoint(*c.summarizer);
  if (selected.empty()) throw Error(ErrorKind::Config, "no endpoint available to write exemplar summaries");
  return c.endpoint(selected.front().name);
}

bool needs_shots(const EvalConfig& c) {
  return c.prompt_mode == PromptMode::Standard && std::find(c.tasks.begin(), c.tasks.end(), Task::Prognosis) != c.tasks.end();
}

std::map<CancerType, ShotSet> obtain_shots(const EvalConfig& c, const Flags& f, std::span<const PathologyRecord> records,
                                           const std::map<CancerType, double>& means, Gateway& gateway,
                                           std::span<const ModelEndpoint> selected, RunManifest& manifest) {
  if (!f.shots.empty()) {
    manifest.add_input(f.shots);
    return read_shots(f.shots);
  }
  return summarize_shots(records, means, c, gateway, summarizer_for(c, selected), manifest);
}

ordered_json split_counts(std::span<const PathologyRecord> records) {
  std::map<std::string, std::map<std::string, std::size_t>> by_type;
  for (const auto& r : records) {
    by_type[std::string(r.cancer_type.label())][r.split ? std::string(split_name(*r.split)) : "none"]++;
  }
  ordered_json j = ordered_json::object();
  for (const auto& [type, m] : by_type) j[type] = m;
  return j;
}

// Completion lines carry sample_id, run (or run_index), text and optionally task.
std::string extract_batch(const fs::path& in, std::optional<Task> task, const std::string& output) {
  std::ifstream src(in, std::ios::binary);
  if (!src) throw Error(ErrorKind::Io, "cannot open " + in.string());
  std::string lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(src, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto where = in.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, where + ": " + e.what());
    }
    auto t = task;
    if (auto it = j.find("task"); it != j.end() && it->is_string()) t = parse_task(it->get<std::string>());
    if (!t || *t == Task::Summarize) throw Error(ErrorKind::Schema, where + ": no scoreable task");
    if (!j.contains("text") || !j["text"].is_string()) throw Error(ErrorKind::Schema, where + ": missing text");
    const auto outcome = extract_answer(j["text"].get<std::string>(), *t);
    ordered_json o;
    o["sample_id"] = j.value("sample_id", std::string());
    o["run_index"] = j.contains("run") ? j["run"] : j.value("run_index", json(nullptr));
    o["task"] = task_name(*t);
    o["outcome"] = to_json(outcome);
    o["failure_kind"] = is_extracted(outcome) ? json(nullptr) : json(to_string(std::get<Failure>(outcome).kind));
    lines += o.dump() + "\n";
  }
  if (output.empty()) return lines;
  text::write_file_atomic(output, lines);
  return ordered_json{{"outcomes", output}}.dump() + "\n";
}

int finish(std::ostream& out, const fs::path& run_dir, const RunManifest& manifest, ordered_json summary) {
  manifest.write(run_dir);
  summary["run_dir"] = run_dir.string();
  out << summary.dump() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pathology report LLM evaluation pipeline"};
  app.require_subcommand(1);
  Flags f;
  Given g;

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic report and clinical table pair");
  synth->add_option("--n", f.synth_n, "Number of patients");
  synth->add_option("--seed", f.synth_seed, "Generator seed");
  synth->add_option("--out-dir", f.synth_out, "Destination directory")->required();

  auto* curate = app.add_subcommand("curate", "Join, normalize and summarize the source tables");
  add_common(curate, f, g);
  g.add("reports", curate->add_option("--reports", f.reports, "Report table (overrides config)"));
  g.add("clinical", curate->add_option("--clinical", f.clinical, "Clinical table (overrides config)"));
  g.add("split-seed", curate->add_option("--split-seed", f.split_seed, "Also split with this seed"));
  g.add("ratios", curate->add_option("--ratios", f.ratios, "Train Val Test ratios")->expected(3));

  auto* split = app.add_subcommand("split", "Assign stratified Train/Val/Test splits");
  add_common(split, f, g);
  add_corpus(split, f, g);

  auto* summarize = app.add_subcommand("summarize", "Draw and summarize the prognosis exemplars");
  add_common(summarize, f, g);
  add_corpus(summarize, f, g);
  add_eval(summarize, f, g);

  auto* build = app.add_subcommand("build-prompts", "Materialize Test-split prompts");
  add_common(build, f, g);
  add_corpus(build, f, g);
  add_eval(build, f, g);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Dispatch, extract and score");
  add_common(evaluate_cmd, f, g);
  add_corpus(evaluate_cmd, f, g);
  add_eval(evaluate_cmd, f, g);

  auto* report_cmd = app.add_subcommand("report", "Aggregate an evaluate run");
  add_common(report_cmd, f, g);
  report_cmd->add_option("--eval-dir", f.eval_dir, "Run directory written by evaluate")->required();

  auto* km = app.add_subcommand("km", "Kaplan-Meier tables per cancer type");
  add_common(km, f, g);
  add_corpus(km, f, g);

  auto* tune = app.add_subcommand("tunegen", "Generate chat-format tuning files");
  add_common(tune, f, g);
  add_corpus(tune, f, g);
  g.add("tasks", tune->add_option("--tasks", f.tasks, "Subset of type, staging, prognosis")->delimiter(','));
  g.add("n-variants", tune->add_option("--n-variants", f.n_variants, "Template variants per task"));
  g.add("tunegen-seed", tune->add_option("--seed", f.tunegen_seed, "Variant choice and shuffle seed"));
  g.add("generator", tune->add_option("--generator", f.generator, "Endpoint that paraphrases templates"));
  g.add("cache-dir", tune->add_option("--cache-dir", f.cache_dir, "Response cache directory"));

  auto* extract_cmd = app.add_subcommand("extract", "Extract an answer from a completion text");
  extract_cmd->add_option("--task", f.task, "type, staging or prognosis (default: each line's task)");
  extract_cmd->add_option("--input", f.input, "File holding one completion text, '-' for stdin");
  extract_cmd->add_option("--completions", f.completions, "Batch mode: completion JSON lines");
  extract_cmd->add_option("--output", f.output, "Batch mode: outcome JSON lines (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    ordered_json j{{"error", {{"kind", "config"}, {"message", e.what()}}}};
    err << j.dump() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      const auto records = synthetic_records(f.synth_n, f.synth_seed);
      const auto [rp, cp] = write_synthetic_tables(records, f.synth_out);
      out << ordered_json{{"reports", rp.string()}, {"clinical", cp.string()}, {"records", records.size()}}.dump()
          << "\n";
      return 0;
    }

    if (extract_cmd->parsed()) {
      std::optional<Task> task;
      if (!f.task.empty()) {
        task = parse_task(f.task);
        if (!task || *task == Task::Summarize) throw Error(ErrorKind::Config, "unknown task '" + f.task + "'");
      }
      if (f.completions.empty()) {
        if (!task) throw Error(ErrorKind::Config, "extract needs --task for a single completion");
        std::string textin;
        if (f.input == "-") {
          textin.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
        } else {
          textin = text::read_file(f.input);
        }
        out << to_json(extract_answer(textin, *task)).dump() << "\n";
        return 0;
      }
      out << extract_batch(f.completions, task, f.output);
      return 0;
    }

    if (report_cmd->parsed()) {
      const auto c = resolve_config(f, g);
      const auto run_dir = open_run_dir(c, f, "report");
      RunManifest manifest("report", c, args);
      const auto groups = report(f.eval_dir, run_dir);
      manifest.counts()["groups"] = groups;
      return finish(out, run_dir, manifest, {{"groups", groups}});
    }

    if (curate->parsed()) {
      const auto c = resolve_config(f, g);
      if (!c.curation) throw Error(ErrorKind::Config, "curate needs a curation block or --reports and --clinical");
      const auto cur = c.curation_config();
      const auto run_dir = open_run_dir(c, f, "curate");
      RunManifest manifest("curate", c, args);
      manifest.add_input(cur.reports.path);
      manifest.add_input(cur.clinical.path);
      auto load = load_corpus(cur);
      if (g.has("split-seed") || g.has("ratios")) {
        const auto assignment = stratified_split(load.records, c.split_ratios, c.split_seed);
        apply_split(load.records, assignment);
        for (const auto& w : assignment.warnings) manifest.warn(w);
      }
      write_corpus(run_dir / "corpus.jsonl", load.records);
      text::write_file_atomic(run_dir / "ingest_report.json", load.report.to_json().dump(2) + "\n");
      text::write_file_atomic(run_dir / "cohort_stats.json", to_json(cohort_stats(load.records)).dump(2) + "\n");
      manifest.counts()["records"] = load.records.size();
      manifest.counts()["rejected"] = load.report.rejected_count();
      return finish(out, run_dir, manifest,
                    {{"records", load.records.size()}, {"corpus", (run_dir / "corpus.jsonl").string()}});
    }

    if (split->parsed()) {
      const auto c = resolve_config(f, g);
      if (!c.corpus) throw Error(ErrorKind::Config, "split needs --corpus");
      const auto run_dir = open_run_dir(c, f, "split");
      RunManifest manifest("split", c, args);
      auto records = read_corpus(*c.corpus);
      manifest.add_input(*c.corpus);
      const auto assignment = stratified_split(records, c.split_ratios, c.split_seed);
      apply_split(records, assignment);
      for (const auto& w : assignment.warnings) manifest.warn(w);
      write_corpus(run_dir / "corpus.jsonl", records);
      ordered_json summary{{"seed", c.split_seed}, {"by_type", split_counts(records)}, {"warnings", assignment.warnings}};
      text::write_file_atomic(run_dir / "split_summary.json", summary.dump(2) + "\n");
      manifest.counts()["records"] = records.size();
      return finish(out, run_dir, manifest,
                    {{"records", records.size()}, {"corpus", (run_dir / "corpus.jsonl").string()}});
    }

    if (km->parsed()) {
      const auto c = resolve_config(f, g);
      const auto run_dir = open_run_dir(c, f, "km");
      RunManifest manifest("km", c, args);
      const auto records = obtain_corpus(c, manifest);
      km_tables(records, c.mean_policy, run_dir);
      manifest.counts()["records"] = records.size();
      return finish(out, run_dir, manifest, {{"records", records.size()}});
    }

    if (tune->parsed()) {
      const auto c = resolve_config(f, g);
      const auto run_dir = open_run_dir(c, f, "tunegen");
      RunManifest manifest("tunegen", c, args);
      const auto records = obtain_corpus(c, manifest);
      std::unique_ptr<Gateway> gateway;
      if (c.tunegen.generator) gateway = std::make_unique<Gateway>(gateway_options(c, run_dir));
      const auto res = tunegen(records, c, gateway.get(), run_dir, manifest);
      return finish(out, run_dir, manifest, {{"train_examples", res.train_examples}, {"val_examples", res.val_examples}});
    }

    if (summarize->parsed() || build->parsed() || evaluate_cmd->parsed()) {
      const std::string name = summarize->parsed() ? "summarize" : build->parsed() ? "build-prompts" : "evaluate";
      auto c = resolve_config(f, g);
      const auto selected = selected_endpoints(c, f);
      if (name == "evaluate") c.validate_for_evaluation();
      const auto run_dir = open_run_dir(c, f, name);
      RunManifest manifest(name, c, args);
      ordered_json eps = ordered_json::array();
      for (const auto& e : selected) eps.push_back(e.name);
      manifest.counts()["endpoints"] = eps;
      const auto records = obtain_corpus(c, manifest);
      const auto means = mean_dss_by_type(records, c.mean_policy);
      Gateway gateway(gateway_options(c, run_dir));

      std::map<CancerType, ShotSet> shots;
      if (name == "summarize" || needs_shots(c)) {
        shots = obtain_shots(c, f, records, means, gateway, selected, manifest);
        write_shots(run_dir / "shots.json", shots);
      }
      if (name == "summarize") return finish(out, run_dir, manifest, {{"shot_sets", shots.size()}});

      const auto prompts = build_prompt_set(records, c, means, shots);
      manifest.counts()["instances"] = prompts.bundles.size();
      manifest.counts()["skipped"] = prompts.skipped;
      if (name == "build-prompts") {
        std::string lines;
        for (const auto& b : prompts.bundles) lines += b.to_json().dump() + "\n";
        text::write_file_atomic(run_dir / "prompts.jsonl", lines);
        return finish(out, run_dir, manifest, {{"instances", prompts.bundles.size()}});
      }

      const auto result = evaluate(prompts, records, c, selected, gateway, run_dir);
      manifest.counts()["completions"] = result.completions;
      manifest.counts()["cache_hits"] = result.cache_hits;
      manifest.counts()["cache_invalidations"] = gateway.cache_invalidations();
      return finish(out, run_dir, manifest,
                    {{"instances", prompts.bundles.size()},
                     {"completions", result.completions},
                     {"cache_hits", result.cache_hits}});
    }
  } catch (const Error& e) {
    ordered_json j{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
    err << j.dump() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    ordered_json j{{"error", {{"kind", "internal"}, {"message", e.what()}}}};
    err << j.dump() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace pathbench
