#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdrboot/errors.hpp"
#include "fdrboot/matrix.hpp"

namespace fdrboot::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_count() const { return header.size(); }
  std::size_t row_count() const { return rows.size(); }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_cell(std::string_view cell, std::size_t line_no, std::size_t col_no) {
  const std::string_view trimmed = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size())
    throw ValidationError("line " + std::to_string(line_no) + ", column " +
                          std::to_string(col_no) + ": '" + std::string(trimmed) +
                          "' is not numeric");
  if (std::isnan(value))
    throw ValidationError("line " + std::to_string(line_no) + ", column " +
                          std::to_string(col_no) + ": NaN is not allowed");
  return value;
}

}  // namespace detail

// Reads a comma-separated file with a mandatory header row. Every data cell
// must parse as a finite decimal (scientific notation accepted); errors
// carry 1-based line and column positions.
inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");

  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      for (std::string_view f : detail::split_fields(line))
        table.header.emplace_back(detail::trim(f));
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
        throw ValidationError(path + ": missing header row");
      continue;
    }
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    const auto fields = detail::split_fields(line);
    if (fields.size() != table.header.size())
      throw ValidationError(path + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      row.push_back(detail::parse_cell(fields[c], line_no, c + 1));
    table.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw ValidationError(path + ": empty file");
  if (table.rows.empty()) throw ValidationError(path + ": no data rows after the header");
  return table;
}

// 17 significant digits: enough for binary round-trip of any double.
inline std::string format_cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Writes through a temp file in the destination directory and renames into
// place, so readers never observe a partially written file.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    if (!out) throw ValidationError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("failed moving '" + tmp.string() + "' to '" + path + "': " +
                          ec.message());
  }
}

inline std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header) {
  if (header.size() != m.cols())
    throw ValidationError("matrix_to_csv: header width mismatch");
  std::ostringstream out;
  for (std::size_t c = 0; c < header.size(); ++c)
    out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c)
      out << (c ? "," : "") << format_cell(m(r, c));
    out << '\n';
  }
  return out.str();
}

inline void write_matrix_csv(const std::string& path, const Matrix& m,
                             const std::vector<std::string>& header) {
  write_file_atomic(path, matrix_to_csv(m, header));
}

}  // namespace fdrboot::csv
