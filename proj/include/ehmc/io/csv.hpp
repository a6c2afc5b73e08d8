#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehmc/errors.hpp"
#include "ehmc/target.hpp"

namespace ehmc::io {

/// Shortest representation that round-trips an IEEE double (17 significant
/// digits); NaN prints as "nan".
std::string format_double(double x);

/// Writes a matrix as CSV, one row per line, with an optional header row.
void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& colnames = {});

/// Reads a numeric CSV. A non-numeric first row is treated as a header and
/// returned through `header` when given. Parse failures carry the row and
/// column location.
Matrix read_matrix_csv(const std::string& path,
                       std::vector<std::string>* header = nullptr);

}  // namespace ehmc::io
