#include "pathbench/extract.hpp"

#include "pathbench/corpus.hpp"
#include "pathbench/text.hpp"

#include <charconv>

namespace pathbench {

using nlohmann::json;

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::NoJsonObject: return "NoJsonObject";
    case FailureKind::MalformedJson: return "MalformedJson";
    case FailureKind::MissingKey: return "MissingKey";
    case FailureKind::UnknownLabel: return "UnknownLabel";
    case FailureKind::AmbiguousObjects: return "AmbiguousObjects";
  }
  return "?";
}

std::optional<FailureKind> parse_failure_kind(std::string_view name) {
  for (auto k : {FailureKind::NoJsonObject, FailureKind::MalformedJson, FailureKind::MissingKey,
                 FailureKind::UnknownLabel, FailureKind::AmbiguousObjects}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string strip_code_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    const auto line = text.substr(pos, last ? std::string_view::npos : nl - pos);
    const auto t = text::trim(line);
    const bool fence = t.substr(0, 3) == "```" && t.find_first_of("{}") == std::string_view::npos;
    if (!fence) {
      out.append(line);
      if (!last) out.push_back('\n');
    }
    if (last) break;
    pos = nl + 1;
  }
  return out;
}

namespace {

// End of the balanced span opening at `open`, or npos if it never closes.
std::size_t match_span(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::vector<JsonSpan> find_json_objects(std::string_view text) {
  std::vector<JsonSpan> spans;
  std::size_t i = 0;
  bool reported_unterminated = false;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    const auto end = match_span(text, i);
    if (end == std::string_view::npos) {
      // Unclosed brace: record it once, then keep scanning inside it.
      if (!reported_unterminated) {
        spans.push_back({i, text.size(), false, std::nullopt});
        reported_unterminated = true;
      }
      ++i;
      continue;
    }
    JsonSpan span{i, end, true, std::nullopt};
    try {
      auto v = json::parse(text.substr(i, end - i));
      if (v.is_object()) span.value = std::move(v);
    } catch (const json::parse_error&) {
    }
    spans.push_back(std::move(span));
    i = end;
  }
  return spans;
}

namespace {

std::optional<AjccStage> stage_from_numeral(std::string_view s) {
  s = text::trim(s);
  if (text::starts_with_icase(s, "stage")) {
    s.remove_prefix(5);
    s = text::trim(s);
  }
  const auto u = text::to_upper(s);
  if (u == "I" || u == "1") return AjccStage::I;
  if (u == "II" || u == "2") return AjccStage::II;
  if (u == "III" || u == "3") return AjccStage::III;
  if (u == "IV" || u == "4") return AjccStage::IV;
  return std::nullopt;
}

}  // namespace

std::optional<Answer> normalize_value(Task task, const json& value) {
  switch (task) {
    case Task::TypeId:
      if (value.is_string()) {
        if (auto t = CancerType::parse(value.get<std::string>())) return *t;
      }
      return std::nullopt;
    case Task::Staging:
      if (value.is_string()) {
        if (auto s = stage_from_numeral(value.get<std::string>())) return *s;
      } else if (value.is_number_integer()) {
        const auto n = value.get<std::int64_t>();
        if (n >= 1 && n <= 4) return static_cast<AjccStage>(n);
      }
      return std::nullopt;
    case Task::Prognosis:
      if (value.is_boolean()) return value.get<bool>();
      if (value.is_string()) {
        const auto v = text::trim(value.get<std::string>());
        if (text::iequals(v, "true")) return true;
        if (text::iequals(v, "false")) return false;
      }
      return std::nullopt;
    case Task::Summarize: break;
  }
  return std::nullopt;
}

ExtractionOutcome extract_answer(std::string_view raw, Task task) {
  const auto cleaned = strip_code_fences(raw);
  const auto spans = find_json_objects(cleaned);
  if (spans.empty()) return Failure{FailureKind::NoJsonObject, "no JSON object in completion"};

  const JsonSpan* chosen = nullptr;
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    if (it->value) {
      chosen = &*it;
      break;
    }
  }
  if (chosen == nullptr) {
    return Failure{FailureKind::MalformedJson, std::to_string(spans.size()) + " brace span(s), none parse as an object"};
  }
  const auto& obj = *chosen->value;
  const auto key = answer_key(task);

  std::vector<const json*> matches;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (text::iequals(text::trim(it.key()), key)) matches.push_back(&it.value());
  }
  if (matches.size() > 1) {
    const auto first = normalize_value(task, *matches.front());
    for (const auto* m : matches) {
      const auto v = normalize_value(task, *m);
      if (!v || !first || answer_label(*v) != answer_label(*first)) {
        return Failure{FailureKind::AmbiguousObjects, "conflicting values for key '" + std::string(key) + "'"};
      }
    }
  }
  if (!matches.empty()) {
    if (auto v = normalize_value(task, *matches.front())) return Extracted{*v};
    return Failure{FailureKind::UnknownLabel, matches.front()->dump()};
  }

  // No expected key: accept only an unambiguous single valid label.
  std::vector<Answer> candidates;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (auto v = normalize_value(task, it.value())) candidates.push_back(*v);
  }
  if (candidates.size() == 1) return Extracted{candidates.front()};
  if (candidates.size() > 1) {
    return Failure{FailureKind::AmbiguousObjects, "several keys hold valid labels, none named '" + std::string(key) + "'"};
  }
  return Failure{FailureKind::MissingKey, "object lacks key '" + std::string(key) + "'"};
}

nlohmann::ordered_json to_json(const ExtractionOutcome& outcome) {
  nlohmann::ordered_json j;
  if (const auto* e = std::get_if<Extracted>(&outcome)) {
    j["outcome"] = "extracted";
    j["label"] = answer_label(e->label);
    j["failure_kind"] = nullptr;
  } else {
    const auto& f = std::get<Failure>(outcome);
    j["outcome"] = "failure";
    j["label"] = nullptr;
    j["failure_kind"] = to_string(f.kind);
    j["detail"] = f.detail;
  }
  return j;
}

}  // namespace pathbench
