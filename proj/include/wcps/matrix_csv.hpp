#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "wcps/numerics/matrix.hpp"

namespace wcps {

// Plain comma-separated rows, no header. Values are written with 17
// significant digits so a write/read cycle is exact.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& a) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (c) out << ',';
      out << format_double(a(r, c));
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        fail(ErrorKind::kInvalidInput, "matrix CSV line " + std::to_string(lineno) +
                                           ": not a number: '" + cell + "'");
      }
      require(cell.find_first_not_of(" \t", used) == std::string::npos, ErrorKind::kInvalidInput,
              "matrix CSV line " + std::to_string(lineno) + ": trailing text in '" + cell + "'");
      row.push_back(v);
    }
    require(rows.empty() || row.size() == rows.front().size(), ErrorKind::kInvalidInput,
            "matrix CSV line " + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  require(!rows.empty() && !rows.front().empty(), ErrorKind::kInvalidInput, "matrix CSV is empty");
  Matrix a(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) a(r, c) = rows[r][c];
  require(a.all_finite(), ErrorKind::kInvalidInput, "matrix CSV contains non-finite values");
  return a;
}

inline void save_matrix_csv(const std::string& path, const Matrix& a) {
  std::ofstream out(path);
  require(bool(out), ErrorKind::kInvalidInput, "cannot open '" + path + "' for writing");
  write_matrix_csv(out, a);
}

inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::kInvalidInput, "cannot open '" + path + "'");
  return read_matrix_csv(in);
}

}  // namespace wcps
