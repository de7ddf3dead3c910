// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace saccade {

// Quotes a field when it contains a comma, quote, CR, or LF; embedded quotes
// are doubled.
std::string csv_escape(const std::string& field);

// Compact numeric field: up to 9 significant digits, no trailing noise.
std::string csv_num(double v);

// Writes UTF-8 CSV with a header row. Every row carries the schema id in the
// leading "schema" column so readers can hard-verify what they load.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& fields);  // one per declared column
  void close();

 private:
  std::string path_;
  std::string schema_;
  std::size_t width_ = 0;
  std::string buf_;
  bool open_ = true;
};

struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;                // without the schema column
  std::vector<std::vector<std::string>> rows;      // schema column stripped
};

// Full RFC-4180 parse (quoted fields, doubled quotes, embedded separators and
// newlines, CRLF or LF). Throws when the schema column is missing or any row
// carries a schema other than `expected_schema`.
CsvTable read_csv(const std::string& path, const std::string& expected_schema);

}  // namespace saccade
