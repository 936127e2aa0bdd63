#include "pathbench/labels.hpp"

#include "pathbench/error.hpp"
#include "pathbench/text.hpp"

#include <nlohmann/json.hpp>

namespace pathbench {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::TypeId: return "type";
    case Task::Staging: return "staging";
    case Task::Prognosis: return "prognosis";
    case Task::Summarize: return "summarize";
  }
  return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
  const auto n = text::to_lower(text::trim(name));
  if (n == "type" || n == "typeid" || n == "type_id") return Task::TypeId;
  if (n == "staging" || n == "stage") return Task::Staging;
  if (n == "prognosis") return Task::Prognosis;
  if (n == "summarize" || n == "summary") return Task::Summarize;
  return std::nullopt;
}

CancerType CancerType::at(std::size_t index) {
  if (index >= kCount) throw Error(ErrorKind::Precondition, "cancer type index out of range");
  return CancerType(static_cast<std::uint8_t>(index));
}

std::optional<CancerType> CancerType::parse(std::string_view value) {
  const auto t = text::trim(value);
  std::optional<CancerType> found;
  for (std::size_t i = 0; i < kCount; ++i) {
    if (text::iequals(t, kCancerTypeLabels[i])) {
      if (found) return std::nullopt;
      found = CancerType(static_cast<std::uint8_t>(i));
    }
  }
  return found;
}

std::optional<CancerType> CancerType::from_tcga_code(std::string_view code) {
  auto c = text::trim(code);
  if (text::starts_with_icase(c, "TCGA-")) c.remove_prefix(5);
  for (std::size_t i = 0; i < kCount; ++i) {
    if (text::iequals(c, kTcgaStudyCodes[i])) return CancerType(static_cast<std::uint8_t>(i));
  }
  return std::nullopt;
}

std::vector<CancerType> CancerType::all() {
  std::vector<CancerType> out;
  out.reserve(kCount);
  for (std::size_t i = 0; i < kCount; ++i) out.push_back(CancerType(static_cast<std::uint8_t>(i)));
  return out;
}

std::string_view roman(AjccStage stage) {
  switch (stage) {
    case AjccStage::I: return "I";
    case AjccStage::II: return "II";
    case AjccStage::III: return "III";
    case AjccStage::IV: return "IV";
  }
  return "?";
}

std::string stage_label(AjccStage stage) { return "Stage " + std::string(roman(stage)); }

bool answer_matches_task(const Answer& answer, Task task) {
  switch (task) {
    case Task::TypeId: return std::holds_alternative<CancerType>(answer);
    case Task::Staging: return std::holds_alternative<AjccStage>(answer);
    case Task::Prognosis: return std::holds_alternative<bool>(answer);
    case Task::Summarize: return false;
  }
  return false;
}

std::string answer_label(const Answer& answer) {
  if (const auto* c = std::get_if<CancerType>(&answer)) return std::string(c->label());
  if (const auto* s = std::get_if<AjccStage>(&answer)) return stage_label(*s);
  return std::get<bool>(answer) ? "True" : "False";
}

std::optional<Answer> parse_answer_label(Task task, std::string_view label) {
  for (const auto& a : task_answers(task)) {
    if (answer_label(a) == label) return a;
  }
  return std::nullopt;
}

std::string_view answer_key(Task task) {
  switch (task) {
    case Task::TypeId: return "diagnosis";
    case Task::Staging: return "stage";
    case Task::Prognosis: return "Survival";
    case Task::Summarize: break;
  }
  throw Error(ErrorKind::Precondition, "summarize task has no answer key");
}

std::string canonical_answer_json(Task task, const Answer& answer) {
  if (!answer_matches_task(answer, task)) {
    throw Error(ErrorKind::Precondition, "answer does not belong to task " + std::string(task_name(task)));
  }
  // {"key": "value"} with a single space after the colon.
  return "{" + nlohmann::json(std::string(answer_key(task))).dump() + ": " +
         nlohmann::json(answer_label(answer)).dump() + "}";
}

std::vector<Answer> task_answers(Task task) {
  std::vector<Answer> out;
  switch (task) {
    case Task::TypeId:
      for (auto c : CancerType::all()) out.emplace_back(c);
      break;
    case Task::Staging:
      for (auto s : kAllStages) out.emplace_back(s);
      break;
    case Task::Prognosis:
      out.emplace_back(true);
      out.emplace_back(false);
      break;
    case Task::Summarize: break;
  }
  return out;
}

std::vector<std::string> task_labelset(Task task) {
  std::vector<std::string> out;
  for (const auto& a : task_answers(task)) out.push_back(answer_label(a));
  return out;
}

}  // namespace pathbench
