// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace pmchar::csv {

// Comment-headed CSV: zero or more `# key=value` lines, one column-name row,
// then data rows.  Meta order is preserved so files round-trip byte-for-byte.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void set_meta(const std::string& key, const std::string& value);
  const std::string* find_meta(const std::string& key) const;
  const std::string& require_meta(const std::string& key) const;
  int column(const std::string& name) const;  // -1 when absent
  int require_column(const std::string& name) const;
};

Table read_table(const std::string& path);
void write_table(const std::string& path, const Table& table);

double to_double(const std::string& field, const std::string& context);
int64_t to_int(const std::string& field, const std::string& context);

}  // namespace pmchar::csv
