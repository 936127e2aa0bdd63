#pragma once

#include "pathbench/labels.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pathbench {

enum class FailureKind { NoJsonObject, MalformedJson, MissingKey, UnknownLabel, AmbiguousObjects };

std::string_view to_string(FailureKind kind);
std::optional<FailureKind> parse_failure_kind(std::string_view name);

struct Extracted {
  Answer label;
};

struct Failure {
  FailureKind kind;
  std::string detail;
};

using ExtractionOutcome = std::variant<Extracted, Failure>;

inline bool is_extracted(const ExtractionOutcome& o) { return std::holds_alternative<Extracted>(o); }

/// A balanced top-level {...} span of the scanned text.
struct JsonSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the closing brace, or text end if unterminated
  bool terminated = true;
  std::optional<nlohmann::json> value;  // set when the span parses to a JSON object
};

/// Drops markdown code-fence marker lines (```json ... ```).
std::string strip_code_fences(std::string_view text);

/// Top-level brace spans in document order. String literals inside a span are
/// honoured, so braces within quoted values do not split it.
std::vector<JsonSpan> find_json_objects(std::string_view text);

/// Normalizes a single JSON value to the task's closed answer set.
std::optional<Answer> normalize_value(Task task, const nlohmann::json& value);

/// Last validly-parsing object wins.
ExtractionOutcome extract_answer(std::string_view text, Task task);

nlohmann::ordered_json to_json(const ExtractionOutcome& outcome);

}  // namespace pathbench
