#include "pathbench/config.hpp"

#include "pathbench/error.hpp"
#include "pathbench/text.hpp"

#include <cmath>
#include <set>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;

void EvalConfig::validate() const {
  if (n_runs < 1) throw Error(ErrorKind::Config, "n_runs must be >= 1");
  split_ratios.validate();
  if (tasks.empty()) throw Error(ErrorKind::Config, "tasks must not be empty");
  std::set<Task> seen_tasks;
  for (auto t : tasks) {
    if (t == Task::Summarize) throw Error(ErrorKind::Config, "summarize is not a scored task");
    if (!seen_tasks.insert(t).second) throw Error(ErrorKind::Config, "duplicate task " + std::string(task_name(t)));
  }
  if (concurrency < 1) throw Error(ErrorKind::Config, "concurrency must be >= 1");
  if (summary_max_words < 1) throw Error(ErrorKind::Config, "summary_max_words must be >= 1");
  if (tunegen.n_variants < 1) throw Error(ErrorKind::Config, "tunegen.n_variants must be >= 1");
  std::set<std::string> names;
  for (const auto& e : endpoints) {
    e.validate();
    if (!names.insert(e.name).second) throw Error(ErrorKind::Config, "duplicate endpoint name '" + e.name + "'");
  }
  if (summarizer && !names.contains(*summarizer) && *summarizer != "oracle") {
    throw Error(ErrorKind::Config, "summarizer '" + *summarizer + "' is not a configured endpoint");
  }
  if (tunegen.generator && !names.contains(*tunegen.generator)) {
    throw Error(ErrorKind::Config, "tunegen.generator '" + *tunegen.generator + "' is not a configured endpoint");
  }
}

void EvalConfig::validate_for_evaluation() const {
  validate();
  if (endpoints.empty()) throw Error(ErrorKind::Config, "at least one endpoint is required");
}

CurationConfig EvalConfig::curation_config() const {
  if (!curation) throw Error(ErrorKind::Config, "no curation block configured");
  return CurationConfig::from_json(*curation, base_dir);
}

const ModelEndpoint& EvalConfig::endpoint(std::string_view name) const {
  for (const auto& e : endpoints) {
    if (e.name == name) return e;
  }
  throw Error(ErrorKind::Config, "unknown endpoint '" + std::string(name) + "'");
}

std::filesystem::path EvalConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

namespace {

ordered_json endpoint_json(const ModelEndpoint& e) {
  auto j = e.fingerprint();
  if (!e.auth_env.empty()) j["auth_env"] = e.auth_env;
  j["temperature"] = e.params.temperature;
  j["max_output_tokens"] = e.params.max_output_tokens;
  j["retry"] = {{"max_attempts", e.retry.max_attempts},
                {"base_delay_ms", e.retry.base_delay.count()},
                {"max_delay_ms", e.retry.max_delay.count()},
                {"timeout_ms", e.retry.timeout.count()}};
  j["requests_per_minute"] = e.rate.requests_per_minute;
  j["tokens_per_minute"] = e.rate.tokens_per_minute;
  return j;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

}  // namespace

ordered_json EvalConfig::to_json() const {
  ordered_json j;
  j["curation"] = curation ? ordered_json::parse(curation->dump()) : ordered_json(nullptr);
  j["corpus"] = corpus ? ordered_json(corpus->generic_string()) : ordered_json(nullptr);
  j["split"] = {{"ratios", {split_ratios.train, split_ratios.val, split_ratios.test}}, {"seed", split_seed}};
  j["mean_policy"] = mean_policy == MeanPolicy::AllTimes ? "all_times" : "events_only";
  ordered_json eps = ordered_json::array();
  for (const auto& e : endpoints) eps.push_back(endpoint_json(e));
  j["endpoints"] = eps;
  j["summarizer"] = summarizer ? ordered_json(*summarizer) : ordered_json(nullptr);
  j["n_runs"] = n_runs;
  ordered_json ts = ordered_json::array();
  for (auto t : tasks) ts.push_back(task_name(t));
  j["tasks"] = ts;
  j["prompt_mode"] = mode_name(prompt_mode);
  j["concurrency"] = concurrency;
  j["shot_seed"] = shot_seed;
  j["summary_max_words"] = summary_max_words;
  j["tunegen"] = {{"n_variants", tunegen.n_variants},
                  {"seed", tunegen.seed},
                  {"generator", tunegen.generator ? ordered_json(*tunegen.generator) : ordered_json(nullptr)}};
  return j;
}

EvalConfig EvalConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  static const std::set<std::string> kKnown{"curation",    "corpus",     "split",     "mean_policy",
                                            "endpoints",   "summarizer", "n_runs",    "tasks",
                                            "prompt_mode", "concurrency", "cache_dir", "output_dir",
                                            "shot_seed",   "summary_max_words", "tunegen"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  EvalConfig c;
  c.base_dir = base_dir;
  try {
    if (auto it = j.find("curation"); it != j.end() && !it->is_null()) c.curation = *it;
    if (auto it = j.find("corpus"); it != j.end() && !it->is_null()) c.corpus = c.resolve(it->get<std::string>());
    if (auto it = j.find("split"); it != j.end()) {
      if (auto r = it->find("ratios"); r != it->end()) {
        if (!r->is_array() || r->size() != 3) throw Error(ErrorKind::Config, "split.ratios must be [train, val, test]");
        c.split_ratios = {(*r)[0].get<double>(), (*r)[1].get<double>(), (*r)[2].get<double>()};
      }
      c.split_seed = get_or<std::uint64_t>(*it, "seed", c.split_seed);
    }
    if (auto it = j.find("mean_policy"); it != j.end()) {
      const auto p = parse_mean_policy(it->get<std::string>());
      if (!p) throw Error(ErrorKind::Config, "unknown mean_policy '" + it->get<std::string>() + "'");
      c.mean_policy = *p;
    }
    if (auto it = j.find("endpoints"); it != j.end()) {
      for (const auto& e : *it) c.endpoints.push_back(ModelEndpoint::from_json(e));
    }
    if (auto it = j.find("summarizer"); it != j.end() && !it->is_null()) c.summarizer = it->get<std::string>();
    c.n_runs = get_or<int>(j, "n_runs", c.n_runs);
    if (auto it = j.find("tasks"); it != j.end()) {
      c.tasks.clear();
      for (const auto& t : *it) {
        const auto task = parse_task(t.get<std::string>());
        if (!task) throw Error(ErrorKind::Config, "unknown task '" + t.get<std::string>() + "'");
        c.tasks.push_back(*task);
      }
    }
    if (auto it = j.find("prompt_mode"); it != j.end()) {
      const auto m = parse_mode(it->get<std::string>());
      if (!m) throw Error(ErrorKind::Config, "unknown prompt_mode '" + it->get<std::string>() + "'");
      c.prompt_mode = *m;
    }
    c.concurrency = get_or<std::size_t>(j, "concurrency", c.concurrency);
    if (auto it = j.find("cache_dir"); it != j.end() && !it->is_null()) c.cache_dir = c.resolve(it->get<std::string>());
    if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = c.resolve(it->get<std::string>());
    c.shot_seed = get_or<std::uint64_t>(j, "shot_seed", c.shot_seed);
    c.summary_max_words = get_or<int>(j, "summary_max_words", c.summary_max_words);
    if (auto it = j.find("tunegen"); it != j.end()) {
      c.tunegen.n_variants = get_or<std::size_t>(*it, "n_variants", c.tunegen.n_variants);
      c.tunegen.seed = get_or<std::uint64_t>(*it, "seed", c.tunegen.seed);
      if (auto g = it->find("generator"); g != it->end() && !g->is_null()) c.tunegen.generator = g->get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

EvalConfig EvalConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return from_json(j, path.parent_path());
}

std::string config_hash(const EvalConfig& config) { return text::sha256_hex(config.to_json().dump()); }

}  // namespace pathbench
