#include "pathbench/table.hpp"

#include "pathbench/error.hpp"
#include "pathbench/text.hpp"

#include <algorithm>

namespace pathbench {

std::size_t Table::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw Error(ErrorKind::Schema, "missing required column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

Table parse_delimited(std::string_view content, char delimiter) {
  if (content.size() >= 3 && content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) records.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
      // folded into the following '\n'
    } else if (c == '\n') {
      end_row();
      ++line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::Schema, "unterminated quoted field near line " + std::to_string(line));
  if (field_started || !field.empty() || !row.empty()) end_row();

  if (records.empty()) throw Error(ErrorKind::Schema, "table has no header row");
  Table table;
  table.header = std::move(records.front());
  for (auto& h : table.header) h = std::string(text::trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.size() != table.header.size()) {
      throw Error(ErrorKind::Schema, "row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                                         " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(rec));
  }
  return table;
}

Table read_delimited(const std::filesystem::path& path, char delimiter) {
  return parse_delimited(text::read_file(path), delimiter);
}

}  // namespace pathbench
