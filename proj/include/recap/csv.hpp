#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/histories.hpp"

namespace recap {

struct CsvError : std::runtime_error {
  CsvError(int line_, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
  int line;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline bool numeric_cell(const std::string& s) {
  if (s.empty()) return false;
  size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  bool digit = false;
  for (; i < s.size(); ++i) {
    if (s[i] >= '0' && s[i] <= '9')
      digit = true;
    else if (s[i] != '.')
      return false;
  }
  return digit;
}

}  // namespace detail

// One row per observed unit, t columns of 0/1. A single leading header
// line is skipped when its first cell is non-numeric. Errors carry the
// offending line number.
inline CaptureMatrix read_capture_csv(std::istream& in) {
  std::vector<std::uint64_t> rows;
  int t = -1;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (first_content) {
      first_content = false;
      if (!detail::numeric_cell(cells[0])) continue;  // header
    }
    if (t < 0) {
      t = static_cast<int>(cells.size());
      if (t < 1) throw CsvError(line_no, "no columns");
      if (t > kMaxOccasions) throw CsvError(line_no, "more than 63 capture occasions");
    } else if (static_cast<int>(cells.size()) != t) {
      throw CsvError(line_no, "expected " + std::to_string(t) + " columns, found " +
                                  std::to_string(cells.size()));
    }
    std::uint64_t bits = 0;
    for (int j = 0; j < t; ++j) {
      const std::string& c = cells[static_cast<size_t>(j)];
      if (c == "1")
        bits |= std::uint64_t{1} << j;
      else if (c != "0")
        throw CsvError(line_no, "entry '" + c + "' is not 0 or 1");
    }
    if (bits == 0) throw CsvError(line_no, "row has no captures (unobservable unit)");
    rows.push_back(bits);
  }
  if (t < 0) throw CsvError(0, "no data rows");
  return CaptureMatrix(t, std::move(rows));
}

inline void write_capture_csv(std::ostream& out, const CaptureMatrix& data) {
  for (std::int64_t i = 0; i < data.m(); ++i) {
    for (int j = 1; j <= data.t(); ++j) {
      if (j > 1) out << ',';
      out << (data.entry(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

// Observed-rows covariate matrix, full double precision (integers for
// the unnormalized f quantifier print exactly).
inline void write_covariate_csv(std::ostream& out, const CovariateMatrix& z) {
  char buf[64];
  for (const auto& row : z.observed) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      if (row[j].is_integer()) {
        out << row[j].num();
      } else {
        std::snprintf(buf, sizeof buf, "%.15g", row[j].to_double());
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace recap
