// SPDX-License-Identifier: Apache-2.0
#include "saccade/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "saccade/tensor.hpp"

namespace saccade {

std::string csv_escape(const std::string& field) {
  bool needs = false;
  for (char c : field)
    if (c == ',' || c == '"' || c == '\r' || c == '\n') {
      needs = true;
      break;
    }
  if (!needs) return field;
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& schema,
                     const std::vector<std::string>& columns)
    : path_(path), schema_(schema), width_(columns.size()) {
  check(!schema.empty() && !columns.empty(), "csv: schema and columns required");
  buf_ += "schema";
  for (const auto& c : columns) {
    buf_.push_back(',');
    buf_ += csv_escape(c);
  }
  buf_.push_back('\n');
}

CsvWriter::~CsvWriter() {
  if (open_) close();
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  check(open_, "csv: writer already closed");
  check(fields.size() == width_, "csv: row width does not match the header");
  buf_ += csv_escape(schema_);
  for (const auto& f : fields) {
    buf_.push_back(',');
    buf_ += csv_escape(f);
  }
  buf_.push_back('\n');
}

void CsvWriter::close() {
  if (!open_) return;
  open_ = false;
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot write " + path_);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw std::runtime_error("csv: short write to " + path_);
}

namespace {

std::vector<std::vector<std::string>> parse_rfc4180(const std::string& text,
                                                    const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    any = true;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  while (i < n) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          quoted = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty())
          throw std::runtime_error("csv: stray quote inside unquoted field in " + path);
        quoted = true;
        ++i;
        break;
      case ',':
        end_field();
        ++i;
        break;
      case '\r':
        if (i + 1 < n && text[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_row();
        ++i;
        break;
      default:
        field.push_back(c);
        ++i;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field in " + path);
  if (any || !field.empty()) end_row();  // final row without trailing newline
  return rows;
}

}  // namespace

CsvTable read_csv(const std::string& path, const std::string& expected_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto rows = parse_rfc4180(text, path);
  if (rows.empty()) throw std::runtime_error("csv: empty file " + path);
  const auto& header = rows.front();
  if (header.empty() || header.front() != "schema")
    throw std::runtime_error("csv: missing schema column in " + path);
  CsvTable table;
  table.schema = expected_schema;
  table.columns.assign(header.begin() + 1, header.end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw std::runtime_error("csv: ragged row in " + path);
    if (row.front() != expected_schema)
      throw std::runtime_error("csv: schema mismatch in " + path + ": expected " +
                               expected_schema + ", found " + row.front());
    table.rows.emplace_back(row.begin() + 1, row.end());
  }
  return table;
}

}  // namespace saccade
