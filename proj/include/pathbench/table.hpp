#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pathbench {

/// Delimiter-separated table with a header row. Fields may be double-quoted;
/// quoted fields can hold delimiters, newlines and "" escapes.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws a schema error naming the column.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table parse_delimited(std::string_view content, char delimiter);
Table read_delimited(const std::filesystem::path& path, char delimiter);

}  // namespace pathbench
