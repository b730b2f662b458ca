#include "sim/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sim {

static double parse_field(const std::string& field, std::size_t line_no) {
  const char* s = field.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  while (end && (*end == ' ' || *end == '\t')) ++end;
  if (end == s || (end && *end != '\0'))
    throw CsvError("line " + std::to_string(line_no) + ": bad numeric field '" +
                   field + "'");
  if (!std::isfinite(v))
    throw CsvError("line " + std::to_string(line_no) + ": non-finite value");
  return v;
}

Matrix parse_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(parse_field(field, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw CsvError("line " + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  return m;
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CsvError("cannot open " + path);
  return parse_matrix_csv(f);
}

void write_matrix_csv(const Matrix& m, std::ostream& out) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace sim
