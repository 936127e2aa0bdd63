#include "pathbench/tunegen.hpp"

#include "pathbench/error.hpp"
#include "pathbench/extract.hpp"
#include "pathbench/prompts.hpp"
#include "pathbench/rng.hpp"
#include "pathbench/templates.hpp"
#include "pathbench/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace pathbench {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kStageOptions = "(A) Stage I\n\n(B) Stage II\n\n(C) Stage III\n\n(D) Stage IV";
constexpr std::string_view kSurvivalOptions = "(A) True\n\n(B) False";

std::size_t occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::set<std::string> allowed_placeholders(Task task, bool in_user) {
  std::set<std::string> allowed;
  if (in_user) allowed.insert("REPORT");
  if (task == Task::TypeId && !in_user) allowed.insert("OPTIONS");
  if (task == Task::Prognosis) allowed.insert("MEAN_TIME");
  return allowed;
}

}  // namespace

std::string_view to_string(Provenance p) { return p == Provenance::Original ? "original" : "paraphrased"; }

ordered_json TemplateVariant::to_json() const {
  ordered_json j;
  j["task"] = task_name(task);
  j["provenance"] = to_string(provenance);
  j["generator_model"] = generator_model ? json(*generator_model) : json(nullptr);
  j["system_sha256"] = text::sha256_hex(system);
  j["user_sha256"] = text::sha256_hex(user_template);
  return j;
}

TemplateVariant original_variant(Task task) {
  TemplateVariant v;
  v.task = task;
  v.provenance = Provenance::Original;
  switch (task) {
    case Task::TypeId:
      v.system = std::string(templates::get("type_system.txt"));
      v.user_template = std::string(templates::get("type_user.txt"));
      break;
    case Task::Staging:
      v.system = std::string(templates::get("staging_tuned_system.txt"));
      v.user_template = std::string(templates::get("staging_user.txt"));
      break;
    case Task::Prognosis:
      v.system = std::string(templates::get("prognosis_tuned_system.txt"));
      v.user_template = std::string(templates::get("prognosis_user.txt"));
      break;
    case Task::Summarize:
      throw Error(ErrorKind::Precondition, "summarize has no tuning template");
  }
  return v;
}

std::vector<TemplateVariant> fixture_variants(Task task) {
  const auto all = json::parse(templates::get("tuning_variants.json"));
  std::vector<TemplateVariant> out;
  const auto key = std::string(task_name(task));
  if (!all.contains(key)) return out;
  for (const auto& entry : all[key]) {
    TemplateVariant v;
    v.task = task;
    v.system = entry.at("system").get<std::string>();
    v.user_template = entry.at("user").get<std::string>();
    v.provenance = Provenance::Paraphrased;
    v.generator_model = "fixture";
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> validate_variant(const TemplateVariant& v) {
  std::vector<std::string> problems;
  if (occurrences(v.user_template, "{{REPORT}}") != 1) {
    problems.emplace_back("user template must contain {{REPORT}} exactly once");
  }
  if (v.system.find("{{REPORT}}") != std::string::npos) problems.emplace_back("system prompt must not embed the report");
  for (const auto& [text, in_user] : {std::pair{std::string_view(v.system), false},
                                      std::pair{std::string_view(v.user_template), true}}) {
    const auto allowed = allowed_placeholders(v.task, in_user);
    for (const auto& p : templates::placeholders(text)) {
      if (!allowed.contains(p)) {
        problems.push_back("unexpected placeholder {{" + p + "}} in " + (in_user ? "user" : "system"));
      }
    }
  }
  const auto both = v.system + "\n" + v.user_template;
  switch (v.task) {
    case Task::TypeId:
      if (occurrences(v.system, "{{OPTIONS}}") != 1) problems.emplace_back("system must list {{OPTIONS}} exactly once");
      if (both.find("JSON") == std::string::npos) problems.emplace_back("JSON answer instruction missing");
      break;
    case Task::Staging:
      if (v.user_template.find(kStageOptions) == std::string::npos) problems.emplace_back("stage option list altered");
      if (both.find("{\"stage\"") == std::string::npos) problems.emplace_back("stage answer stanza missing");
      break;
    case Task::Prognosis:
      if (v.user_template.find("{{MEAN_TIME}}") == std::string::npos) {
        problems.emplace_back("user template must carry {{MEAN_TIME}}");
      }
      if (v.user_template.find(kSurvivalOptions) == std::string::npos) {
        problems.emplace_back("survival option list altered");
      }
      if (both.find("{\"Survival\"") == std::string::npos) problems.emplace_back("survival answer stanza missing");
      if (both.find("Answer:") != std::string::npos) problems.emplace_back("tuned prognosis prompt carries an example block");
      break;
    case Task::Summarize:
      problems.emplace_back("summarize has no tuning template");
      break;
  }
  return problems;
}

std::vector<TemplateVariant> paraphrase_templates(Task task, std::size_t n_variants, const ParaphraseSource& source,
                                                  std::uint64_t seed) {
  if (n_variants < 1) throw Error(ErrorKind::Precondition, "n_variants must be >= 1");
  std::vector<TemplateVariant> out{original_variant(task)};
  std::set<std::string> seen_systems{out.front().system};
  std::vector<std::string> rejects;

  if (source.gateway == nullptr || source.endpoint == nullptr) {
    for (auto& v : fixture_variants(task)) {
      if (out.size() >= n_variants) break;
      if (auto problems = validate_variant(v); !problems.empty()) {
        rejects.push_back("fixture: " + problems.front());
        continue;
      }
      if (seen_systems.insert(v.system).second) out.push_back(std::move(v));
    }
  } else {
    const auto orig = out.front();
    const auto system = std::string(templates::get("paraphrase_system.txt"));
    int variant_no = 0;
    while (out.size() < n_variants) {
      bool accepted = false;
      for (int attempt = 0; attempt < source.max_attempts_per_variant && !accepted; ++attempt) {
        ++variant_no;
        const auto user = templates::render(templates::get("paraphrase_user.txt"),
                                            {{"VARIANT", std::to_string(variant_no) + "-" + std::to_string(seed)},
                                             {"SYSTEM", orig.system},
                                             {"USER", orig.user_template}});
        auto request = CompletionRequest::chat(system, user, source.endpoint->params, 0);
        const auto completion = source.gateway->cached_complete(*source.endpoint, request);
        const auto spans = find_json_objects(strip_code_fences(completion.text));
        const json* obj = nullptr;
        for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
          if (it->value && it->value->contains("system") && it->value->contains("user")) {
            obj = &*it->value;
            break;
          }
        }
        if (obj == nullptr || !(*obj)["system"].is_string() || !(*obj)["user"].is_string()) {
          rejects.push_back("variant " + std::to_string(variant_no) + ": no {system, user} object in output");
          continue;
        }
        TemplateVariant v;
        v.task = task;
        v.system = (*obj)["system"].get<std::string>();
        v.user_template = (*obj)["user"].get<std::string>();
        v.provenance = Provenance::Paraphrased;
        v.generator_model = source.endpoint->model.empty() ? source.endpoint->name : source.endpoint->model;
        if (auto problems = validate_variant(v); !problems.empty()) {
          rejects.push_back("variant " + std::to_string(variant_no) + ": " + problems.front());
          continue;
        }
        if (!seen_systems.insert(v.system).second) {
          rejects.push_back("variant " + std::to_string(variant_no) + ": duplicate of an earlier variant");
          continue;
        }
        out.push_back(std::move(v));
        accepted = true;
      }
      if (!accepted) break;
    }
  }

  if (out.size() < n_variants) {
    std::string msg = "could only build " + std::to_string(out.size()) + " of " + std::to_string(n_variants) +
                      " valid " + std::string(task_name(task)) + " variants";
    for (const auto& r : rejects) msg += "; " + r;
    throw Error(ErrorKind::Precondition, msg);
  }
  return out;
}

std::pair<std::string, std::string> render_variant(const TemplateVariant& v, const PathologyRecord& record,
                                                   std::optional<double> mean_years) {
  templates::Values values{{"REPORT", record.report_text}, {"OPTIONS", templates::cancer_type_options()}};
  if (mean_years) values["MEAN_TIME"] = format_mean_time(*mean_years);
  return {templates::render(v.system, values), templates::render(v.user_template, values)};
}

GeneratedPairs generate_pairs(std::span<const PathologyRecord> records, const VariantSet& variants,
                              const std::map<CancerType, double>& means, std::uint64_t seed) {
  GeneratedPairs out;
  auto pick = [&](Task task, const std::string& sample_id) -> const TemplateVariant& {
    const auto it = variants.find(task);
    if (it == variants.end() || it->second.empty()) {
      throw Error(ErrorKind::Precondition, "no variants supplied for task " + std::string(task_name(task)));
    }
    SeededStream rng(seed, {"variant", task_name(task), sample_id});
    return it->second[static_cast<std::size_t>(rng.below(it->second.size()))];
  };

  for (const auto& r : records) {
    if (!r.split) throw Error(ErrorKind::Integrity, "record " + r.sample_id + " has no split");
    if (*r.split == Split::Test) {
      throw Error(ErrorKind::Integrity, "Test-split record " + r.sample_id + " passed to tuning generation");
    }
    std::size_t made = 0;
    auto emit = [&](Task task, const Answer& gold, std::optional<double> mean) {
      if (!variants.contains(task)) return;
      const auto& v = pick(task, r.sample_id);
      auto [system, user] = render_variant(v, r, mean);
      out.examples.push_back({task, r.sample_id, *r.split, std::move(system), std::move(user),
                              canonical_answer_json(task, gold)});
      ++made;
    };

    emit(Task::TypeId, r.cancer_type, std::nullopt);
    if (r.stage) {
      emit(Task::Staging, *r.stage, std::nullopt);
    } else if (variants.contains(Task::Staging)) {
      ++out.skipped["staging:missing_stage"];
    }
    if (variants.contains(Task::Prognosis)) {
      const auto m = means.find(r.cancer_type);
      if (m == means.end()) {
        ++out.skipped["prognosis:missing_mean"];
      } else if (const auto label = prognosis_label(r, m->second); label.value) {
        emit(Task::Prognosis, *label.value, m->second);
      } else {
        ++out.skipped["prognosis:" + std::string(to_string(label.reason))];
      }
    }
    if (made == 0) ++out.skipped["no_applicable_task"];
  }
  return out;
}

std::string chat_line(const TuningExample& e) {
  ordered_json j;
  j["messages"] = ordered_json::array({
      ordered_json{{"role", "system"}, {"content", e.system}},
      ordered_json{{"role", "user"}, {"content", e.user}},
      ordered_json{{"role", "assistant"}, {"content", e.assistant}},
  });
  return j.dump();
}

void emit_chat_file(std::span<const TuningExample> examples, const std::filesystem::path& destination,
                    std::uint64_t seed) {
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededStream rng(seed, {"emit_chat_file", destination.filename().string()});
  seeded_shuffle(order, rng);

  std::string chat;
  std::string index;
  for (auto i : order) {
    const auto& e = examples[i];
    chat += chat_line(e) + "\n";
    ordered_json idx;
    idx["sample_id"] = e.sample_id;
    idx["task"] = task_name(e.task);
    idx["split"] = split_name(e.split);
    index += idx.dump() + "\n";
  }
  auto index_path = destination;
  index_path += ".index.jsonl";
  text::write_file_atomic(destination, chat);
  text::write_file_atomic(index_path, index);
}

std::vector<TuningExample> read_chat_file(const std::filesystem::path& path) {
  auto index_path = path;
  index_path += ".index.jsonl";
  std::ifstream chat(path, std::ios::binary);
  std::ifstream index(index_path, std::ios::binary);
  if (!chat || !index) throw Error(ErrorKind::Io, "cannot open chat file " + path.string() + " or its index");
  std::vector<TuningExample> out;
  std::string line;
  std::string idx_line;
  std::size_t lineno = 0;
  while (std::getline(chat, line)) {
    ++lineno;
    if (!std::getline(index, idx_line)) throw Error(ErrorKind::Schema, "index shorter than chat file " + path.string());
    try {
      const auto j = json::parse(line);
      const auto& msgs = j.at("messages");
      if (msgs.size() != 3 || msgs[0].at("role") != "system" || msgs[1].at("role") != "user" ||
          msgs[2].at("role") != "assistant") {
        throw Error(ErrorKind::Schema, "line " + std::to_string(lineno) + ": expected system/user/assistant");
      }
      const auto ij = json::parse(idx_line);
      TuningExample e;
      const auto task = parse_task(ij.at("task").get<std::string>());
      const auto split = parse_split(ij.at("split").get<std::string>());
      if (!task || !split) throw Error(ErrorKind::Schema, "line " + std::to_string(lineno) + ": bad index entry");
      e.task = *task;
      e.split = *split;
      e.sample_id = ij.at("sample_id").get<std::string>();
      e.system = msgs[0].at("content").get<std::string>();
      e.user = msgs[1].at("content").get<std::string>();
      e.assistant = msgs[2].at("content").get<std::string>();
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::Schema, path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace pathbench
