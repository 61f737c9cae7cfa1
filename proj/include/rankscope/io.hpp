// File formats: headerless matrix CSV at 17 significant digits, the logits
// CSV (category-id header plus a trailing "label" column), and plain text
// helpers. All writers emit '\n' line endings so outputs are byte-stable.
#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rankscope/common.hpp"
#include "rankscope/matrix.hpp"

namespace rankscope {

inline std::string format_double(double v) {
  char buf[64];
  const std::to_chars_result r =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& token, const std::string& where) {
  std::size_t begin = token.find_first_not_of(" \t\r");
  std::size_t end = token.find_last_not_of(" \t\r");
  if (begin == std::string::npos)
    throw input_error(where + ": empty numeric field");
  const char* first = token.data() + begin;
  const char* last = token.data() + end + 1;
  double value = 0.0;
  const std::from_chars_result r = std::from_chars(first, last, value);
  if (r.ec != std::errc() || r.ptr != last)
    throw input_error(where + ": bad numeric field '" + token + "'");
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw input_error("cannot write file: " + path);
  out << content;
  if (!out) throw input_error("write failure: " + path);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::string body;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) body += ',';
      body += format_double(m(i, j));
    }
    body += '\n';
  }
  write_text_file(path, body);
}

inline Matrix read_matrix_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw input_error("matrix csv: no rows in " + path);
  const int rows = static_cast<int>(lines.size());
  const std::vector<std::string> first = split_csv_line(lines[0]);
  const int cols = static_cast<int>(first.size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const std::vector<std::string> fields = split_csv_line(lines[static_cast<std::size_t>(i)]);
    if (static_cast<int>(fields.size()) != cols)
      throw input_error("matrix csv: ragged row " + std::to_string(i + 1) + " in " + path);
    for (int j = 0; j < cols; ++j)
      m(i, j) = parse_double(fields[static_cast<std::size_t>(j)], path);
  }
  return m;
}

// Accepts a single CSV row or a single CSV column.
inline std::vector<double> read_vector_csv(const std::string& path) {
  const Matrix m = read_matrix_csv(path);
  std::vector<double> v;
  if (m.rows() == 1) {
    v.resize(static_cast<std::size_t>(m.cols()));
    for (int j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(0, j);
  } else if (m.cols() == 1) {
    v.resize(static_cast<std::size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, 0);
  } else {
    throw input_error("vector csv: expected one row or one column in " + path);
  }
  return v;
}

struct LogitsData {
  Matrix logits;            // N x C
  std::vector<int> labels;  // N, values in [0, C)
};

// Header: C category-id fields followed by a final "label" field.
inline LogitsData read_logits_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.size() < 2) throw input_error("logits csv: need a header and at least one row");
  const std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() < 2 || header.back() != "label")
    throw input_error("logits csv: last header field must be 'label'");
  const int c = static_cast<int>(header.size()) - 1;
  const int n = static_cast<int>(lines.size()) - 1;
  LogitsData data;
  data.logits = Matrix(n, c);
  data.labels.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const std::vector<std::string> fields = split_csv_line(lines[static_cast<std::size_t>(t) + 1]);
    if (static_cast<int>(fields.size()) != c + 1)
      throw input_error("logits csv: ragged row " + std::to_string(t + 2));
    for (int j = 0; j < c; ++j)
      data.logits(t, j) = parse_double(fields[static_cast<std::size_t>(j)], path);
    const double lbl = parse_double(fields.back(), path);
    const int li = static_cast<int>(lbl);
    if (lbl != li || li < 0 || li >= c)
      throw input_error("logits csv: label out of range in row " + std::to_string(t + 2));
    data.labels[static_cast<std::size_t>(t)] = li;
  }
  return data;
}

inline void write_logits_csv(const std::string& path, const Matrix& logits,
                             const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows())
    throw input_error("logits csv: label count mismatch");
  std::string body;
  for (int j = 0; j < logits.cols(); ++j) {
    body += std::to_string(j);
    body += ',';
  }
  body += "label\n";
  for (int t = 0; t < logits.rows(); ++t) {
    for (int j = 0; j < logits.cols(); ++j) {
      body += format_double(logits(t, j));
      body += ',';
    }
    body += std::to_string(labels[static_cast<std::size_t>(t)]);
    body += '\n';
  }
  write_text_file(path, body);
}

}  // namespace rankscope
