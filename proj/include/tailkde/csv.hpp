#pragma once

#include "core.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace tailkde {

//! A parsed CSV file: optional header names and rows of finite numbers.
struct CsvTable
{
  std::vector<std::string> header;
  std::size_t columns = 0;
  std::vector<double> values;

  std::size_t rows() const { return columns ? values.size() / columns : 0; }
};

namespace detail {

inline std::string_view
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view>
split_commas(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto k = line.find(',', start);
    out.push_back(trim(line.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start)));
    if (k == std::string_view::npos)
      return out;
    start = k + 1;
  }
}

inline bool
parse_number(std::string_view s, double& v)
{
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && r.ec == std::errc() && r.ptr == s.data() + s.size();
}

} // namespace detail

//! Comma-separated numbers, one observation per row. A first row with any
//! non-numeric cell is a header. Blank, NaN or infinite cells and ragged
//! rows are rejected with their row and column. Empty lines are skipped.
inline CsvTable
read_csv(std::istream& in, const std::string& source = "<input>")
{
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty())
      continue;
    const auto cells = detail::split_commas(line);
    if (first) {
      first = false;
      t.columns = cells.size();
      bool numeric = true;
      double v;
      for (auto c : cells) {
        if (c.empty())
          continue;
        numeric = numeric && detail::parse_number(c, v);
      }
      if (!numeric) {
        for (auto c : cells)
          t.header.emplace_back(c);
        continue;
      }
    }
    if (cells.size() != t.columns)
      throw DataError(detail::concat(source, ": row ", lineno, " has ", cells.size(), " columns, expected ", t.columns));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v = 0.0;
      if (cells[j].empty())
        throw DataError(detail::concat(source, ": blank cell at row ", lineno, ", column ", j + 1));
      if (!detail::parse_number(cells[j], v))
        throw DataError(detail::concat(source, ": non-numeric cell '", std::string(cells[j]), "' at row ", lineno,
                                       ", column ", j + 1));
      if (!std::isfinite(v))
        throw DataError(detail::concat(source, ": non-finite cell at row ", lineno, ", column ", j + 1));
      t.values.push_back(v);
    }
  }
  if (t.rows() == 0)
    throw DataError(detail::concat(source, ": no data rows"));
  return t;
}

inline CsvTable
read_csv_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError(detail::concat("cannot open '", path, "'"));
  return read_csv(in, path);
}

//! Selects columns by 1-based index or header name ("1,3" or "tmax,tmin");
//! an empty selection keeps every column.
inline DataMatrix
to_data_matrix(const CsvTable& t, const std::vector<std::string>& cols = {})
{
  std::vector<std::size_t> idx;
  if (cols.empty()) {
    for (std::size_t j = 0; j < t.columns; ++j)
      idx.push_back(j);
  } else {
    for (const auto& c : cols) {
      const auto h = std::find(t.header.begin(), t.header.end(), c);
      if (h != t.header.end()) {
        idx.push_back(static_cast<std::size_t>(h - t.header.begin()));
        continue;
      }
      std::size_t k = 0;
      const auto r = std::from_chars(c.data(), c.data() + c.size(), k);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size() || k < 1 || k > t.columns)
        throw ConfigError(detail::concat("unknown column '", c, "'"));
      idx.push_back(k - 1);
    }
  }
  if (idx.empty() || idx.size() > 3)
    throw ConfigError(detail::concat("need 1 to 3 columns, got ", idx.size()));
  std::vector<double> v;
  v.reserve(t.rows() * idx.size());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (auto j : idx)
      v.push_back(t.values[i * t.columns + j]);
  return DataMatrix(t.rows(), idx.size(), std::move(v));
}

inline std::string
format_g17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

//! Writes the ingestion format with a header row and 17 significant digits.
inline void
write_csv(std::ostream& os, const DataMatrix& x, std::vector<std::string> names = {})
{
  if (names.empty())
    for (std::size_t j = 0; j < x.d(); ++j)
      names.push_back("x" + std::to_string(j + 1));
  for (std::size_t j = 0; j < names.size(); ++j)
    os << (j ? "," : "") << names[j];
  os << "\n";
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t j = 0; j < x.d(); ++j)
      os << (j ? "," : "") << format_g17(x(i, j));
    os << "\n";
  }
}

} // namespace tailkde
