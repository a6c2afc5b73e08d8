#include "ehmc/io/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ehmc::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& colnames) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (!colnames.empty()) {
    if (static_cast<Eigen::Index>(colnames.size()) != m.cols())
      throw ConfigError("header size does not match column count");
    for (std::size_t j = 0; j < colnames.size(); ++j)
      out << (j ? "," : "") << colnames[j];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace and a trailing CR
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? ""
                                            : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

bool parse_field(const std::string& field, double& out) {
  if (field.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(field, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == field.size();
}

}  // namespace

Matrix read_matrix_csv(const std::string& path,
                       std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  std::size_t width = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!parse_field(fields[j], row[j])) {
        numeric = false;
        bad_col = j;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && !saw_header) {
        saw_header = true;
        if (header) *header = fields;
        width = fields.size();
        continue;
      }
      throw DataError(path + ": cannot parse value at row " +
                      std::to_string(line_no) + ", column " +
                      std::to_string(bad_col + 1));
    }
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw DataError(path + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(row.size()) + " fields, expected " +
                      std::to_string(width));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return m;
}

}  // namespace ehmc::io
