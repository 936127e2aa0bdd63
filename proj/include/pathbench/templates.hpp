#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

// Prompt template fixtures (templates/*.txt) compiled into the library.
//
// Placeholders are written {{NAME}} with NAME in [A-Z_]. Rendering is a
// single left-to-right pass: substituted text is never rescanned, so a report
// that happens to contain "{{MEAN_TIME}}" comes through untouched. Lowercase
// brace markers such as "{{question}}" are literal template text.
namespace pathbench::templates {

using Values = std::map<std::string, std::string, std::less<>>;

/// Fixture text with one trailing newline removed. Throws on unknown names.
std::string_view get(std::string_view file_name);
std::vector<std::string> names();

std::string render(std::string_view tpl, const Values& values);

/// Uppercase placeholder names in document order (duplicates kept).
std::vector<std::string> placeholders(std::string_view tpl);

/// The quoted, comma-separated cancer-type option list.
std::string cancer_type_options();

namespace detail {
const std::map<std::string, std::string, std::less<>>& embedded();
}

}  // namespace pathbench::templates
