#include "pathbench/templates.hpp"

#include "pathbench/error.hpp"
#include "pathbench/labels.hpp"

#include <cctype>

namespace pathbench::templates {

namespace {

bool is_name_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

// Length of a {{NAME}} token starting at pos, or 0.
std::size_t token_at(std::string_view tpl, std::size_t pos, std::string_view& name) {
  if (tpl.compare(pos, 2, "{{") != 0) return 0;
  std::size_t i = pos + 2;
  while (i < tpl.size() && is_name_char(tpl[i])) ++i;
  if (i == pos + 2 || tpl.compare(i, 2, "}}") != 0) return 0;
  name = tpl.substr(pos + 2, i - pos - 2);
  return i + 2 - pos;
}

}  // namespace

std::string_view get(std::string_view file_name) {
  const auto& files = detail::embedded();
  auto it = files.find(file_name);
  if (it == files.end()) throw Error(ErrorKind::Config, "unknown template " + std::string(file_name));
  std::string_view body = it->second;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  return body;
}

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : detail::embedded()) out.push_back(name);
  return out;
}

std::string render(std::string_view tpl, const Values& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    std::string_view name;
    if (const auto len = token_at(tpl, i, name); len != 0) {
      if (auto it = values.find(name); it != values.end()) {
        out += it->second;
        i += len;
        continue;
      }
    }
    out.push_back(tpl[i]);
    ++i;
  }
  return out;
}

std::vector<std::string> placeholders(std::string_view tpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tpl.size();) {
    std::string_view name;
    if (const auto len = token_at(tpl, i, name); len != 0) {
      out.emplace_back(name);
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

std::string cancer_type_options() {
  std::string out;
  for (std::size_t i = 0; i < kCancerTypeLabels.size(); ++i) {
    if (i != 0) out += ", ";
    out += '\'';
    out += kCancerTypeLabels[i];
    out += '\'';
  }
  return out;
}

}  // namespace pathbench::templates
