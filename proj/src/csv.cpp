#include "signscan/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace signscan {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

DataMatrix load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open file: " + path);
  }

  std::vector<std::vector<double>> rows;
  std::size_t expected_cols = 0;
  std::string line;
  bool header_pending = has_header;
  Index data_row = 0;

  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;  // tolerate blank/trailing lines
    if (header_pending) {
      header_pending = false;
      continue;
    }
    ++data_row;
    const auto fields = split_fields(line);
    if (expected_cols == 0) {
      expected_cols = fields.size();
    } else if (fields.size() != expected_cols) {
      std::ostringstream os;
      os << path << ": row " << data_row << " has " << fields.size() << " fields, expected "
         << expected_cols;
      throw InputError(os.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string_view tok = trim(fields[j]);
      double v = 0.0;
      const auto* first = tok.data();
      const auto* last = tok.data() + tok.size();
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || tok.empty()) {
        std::ostringstream os;
        os << path << ": cannot parse value '" << std::string(tok) << "' at row " << data_row
           << ", column " << (j + 1);
        throw InputError(os.str());
      }
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }

  if (rows.size() < 4) {
    throw InputError(path + ": need at least 4 observations, got " + std::to_string(rows.size()));
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(expected_cols));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return DataMatrix::from_values(std::move(m));
}

void write_csv(const DataMatrix& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open file for writing: " + path);
  }
  char buf[64];
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.values(i, j));
      out << buf;
      if (j + 1 < data.p()) out << ',';
    }
    out << '\n';
  }
  if (!out) {
    throw InputError("write failed: " + path);
  }
}

}  // namespace signscan
