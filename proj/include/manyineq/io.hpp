// CSV input of numeric matrices and the Monte Carlo result table.
//
// CSV: comma-separated, '.' decimal point, optional single header row, any
// of \n, \r\n or \r as line terminator. Blank lines are skipped.
#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "manyineq/core.hpp"
#include "manyineq/simulate.hpp"

namespace manyineq {

/// A number printed with 12 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// v rounded to 12 significant digits.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_number(v).c_str(), nullptr);
}

namespace detail {

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char ch = text[k];
    if (ch == '\n' || ch == '\r') {
      lines.push_back(std::move(cur));
      cur.clear();
      if (ch == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool blank(std::string_view s) { return trim(s).empty(); }

inline double parse_double(std::string_view field, const std::string& where) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
    throw input_error(where + ": not a number: '" + std::string(field) + "'");
  if (!std::isfinite(v)) throw input_error(where + ": non-finite value '" + std::string(field) + "'");
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parses CSV text into a matrix; errors name the source, line and column (1-based).
inline Eigen::MatrixXd parse_csv_matrix(std::string_view text, bool header, const std::string& source = "input") {
  const auto lines = detail::split_lines(text);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  bool header_pending = header;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    if (header_pending) {
      header_pending = false;
      width = detail::split_fields(lines[ln]).size();
      continue;
    }
    const auto fields = detail::split_fields(lines[ln]);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw input_error(source + ": line " + std::to_string(ln + 1) + ": expected " + std::to_string(width) +
                        " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(width);
    for (std::size_t c = 0; c < width; ++c)
      row[c] = detail::parse_double(fields[c], source + ": line " + std::to_string(ln + 1) + ", column " +
                                                   std::to_string(c + 1));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline Eigen::MatrixXd read_csv_matrix(const std::string& path, bool header) {
  return parse_csv_matrix(detail::read_file(path), header, path);
}

/// Reads and validates a sample (n >= 2, p >= 1, finite entries).
inline SampleMatrix read_sample(const std::string& path, bool header) {
  auto m = read_csv_matrix(path, header);
  try {
    return SampleMatrix(std::move(m));
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

/// One row of the Monte Carlo table.
struct McRow {
  std::string method;
  double rejection_rate = 0.0;
  double se = 0.0;
  std::size_t sims = 0;
  std::size_t rejections = 0;
};

inline std::vector<McRow> mc_rows(const McResult& res) {
  std::vector<McRow> rows;
  for (const auto& r : res.rates)
    rows.push_back({std::string(method_name(r.method)), r.rate(), r.se(), r.sims, r.rejections});
  return rows;
}

inline constexpr std::string_view kMcCsvHeader = "method,rejection_rate,se,sims,rejections";

inline void write_mc_csv(std::ostream& out, const std::vector<McRow>& rows) {
  out << kMcCsvHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << format_number(r.rejection_rate) << ',' << format_number(r.se) << ',' << r.sims << ','
        << r.rejections << '\n';
}

inline void write_mc_csv(std::ostream& out, const McResult& res) { write_mc_csv(out, mc_rows(res)); }

inline std::vector<McRow> parse_mc_csv(std::string_view text, const std::string& source = "input") {
  const auto lines = detail::split_lines(text);
  std::vector<McRow> rows;
  bool seen_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const std::string where = source + ": line " + std::to_string(ln + 1);
    if (!seen_header) {
      if (detail::trim(lines[ln]) != kMcCsvHeader) throw input_error(where + ": unexpected header");
      seen_header = true;
      continue;
    }
    const auto f = detail::split_fields(lines[ln]);
    if (f.size() != 5) throw input_error(where + ": expected 5 fields, found " + std::to_string(f.size()));
    McRow r;
    r.method = std::string(f[0]);
    r.rejection_rate = detail::parse_double(f[1], where + ", column 2");
    r.se = detail::parse_double(f[2], where + ", column 3");
    const double sims = detail::parse_double(f[3], where + ", column 4");
    const double rej = detail::parse_double(f[4], where + ", column 5");
    if (sims < 0 || rej < 0 || sims != std::floor(sims) || rej != std::floor(rej))
      throw input_error(where + ": counts must be nonnegative integers");
    r.sims = static_cast<std::size_t>(sims);
    r.rejections = static_cast<std::size_t>(rej);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<McRow> read_mc_csv(const std::string& path) { return parse_mc_csv(detail::read_file(path), path); }

}  // namespace manyineq
