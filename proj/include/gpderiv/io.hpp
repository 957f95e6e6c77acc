#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gpderiv/types.hpp"

namespace gpderiv {

/// Shortest representation that round-trips a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class csv_error : public std::runtime_error {
 public:
  csv_error(const std::string& what, int line) : std::runtime_error(what), line_number(line) {}
  int line_number;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, int line, int column) {
  std::string_view sv(cell);
  while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
  while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t')) sv.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (ec != std::errc() || ptr != sv.data() + sv.size()) {
    std::ostringstream os;
    os << "line " << line << ", column " << column + 1 << ": cannot parse '" << cell << "' as a number";
    throw csv_error(os.str(), line);
  }
  return value;
}

}  // namespace detail

/// Reads x,y[,sigma_y] rows (by position) after a mandatory header line.
inline Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw csv_error("empty input: expected a header row", 1);

  std::vector<double> x, y, sd;
  bool has_sd = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv(line);
    if (cells.size() < 2) {
      std::ostringstream os;
      os << "line " << line_no << ": expected at least two columns (x,y), got " << cells.size();
      throw csv_error(os.str(), line_no);
    }
    if (x.empty()) has_sd = cells.size() >= 3;
    if ((cells.size() >= 3) != has_sd) {
      std::ostringstream os;
      os << "line " << line_no << ": inconsistent column count";
      throw csv_error(os.str(), line_no);
    }
    x.push_back(detail::parse_cell(cells[0], line_no, 0));
    y.push_back(detail::parse_cell(cells[1], line_no, 1));
    if (has_sd) sd.push_back(detail::parse_cell(cells[2], line_no, 2));
  }
  if (x.empty()) throw csv_error("no data rows found after the header", line_no);

  Dataset data;
  data.x = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
  data.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  if (has_sd) data.obs_sd = Eigen::Map<const Vector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  data.validate();
  return data;
}

}  // namespace gpderiv
