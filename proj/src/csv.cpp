// SPDX-License-Identifier: Apache-2.0
#include "pmchar/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>

#include "pmchar/util.hpp"

namespace pmchar::csv {

void Table::set_meta(const std::string& key, const std::string& value) {
  for (auto& kv : meta) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  meta.emplace_back(key, value);
}

const std::string* Table::find_meta(const std::string& key) const {
  for (const auto& kv : meta)
    if (kv.first == key) return &kv.second;
  return nullptr;
}

const std::string& Table::require_meta(const std::string& key) const {
  const std::string* v = find_meta(key);
  if (!v) fail(strf("missing '# %s=' header", key.c_str()));
  return *v;
}

int Table::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); i++)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require_column(const std::string& name) const {
  int i = column(name);
  if (i < 0) fail(strf("missing column '%s'", name.c_str()));
  return i;
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(strf("cannot open %s", path.c_str()));
  Table t;
  std::string line;
  int lineno = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = trim(line.substr(1));
      size_t eq = body.find('=');
      if (eq == std::string::npos)
        fail(strf("%s:%d: comment header is not key=value", path.c_str(), lineno));
      t.meta.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
      continue;
    }
    std::vector<std::string> fields = split(line, ',');
    for (std::string& f : fields) f = trim(f);
    if (!have_columns) {
      t.columns = std::move(fields);
      have_columns = true;
      continue;
    }
    if (fields.size() != t.columns.size())
      fail(strf("%s:%d: expected %zu fields, got %zu", path.c_str(), lineno, t.columns.size(),
                fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_columns) fail(strf("%s: no column header found", path.c_str()));
  return t;
}

void write_table(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(strf("cannot write %s", path.c_str()));
  for (const auto& kv : table.meta) out << "# " << kv.first << "=" << kv.second << "\n";
  for (size_t i = 0; i < table.columns.size(); i++)
    out << (i ? "," : "") << table.columns[i];
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      fail(strf("row with %zu fields in %zu-column table", row.size(), table.columns.size()));
    for (size_t i = 0; i < row.size(); i++) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) fail(strf("write to %s failed", path.c_str()));
}

double to_double(const std::string& field, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (errno != 0 || end == field.c_str() || *end != '\0')
    fail(strf("%s: '%s' is not a number", context.c_str(), field.c_str()));
  return v;
}

int64_t to_int(const std::string& field, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(field.c_str(), &end, 10);
  if (errno != 0 || end == field.c_str() || *end != '\0')
    fail(strf("%s: '%s' is not an integer", context.c_str(), field.c_str()));
  return v;
}

}  // namespace pmchar::csv
