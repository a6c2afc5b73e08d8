#include "ehmc/models/logistic.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ehmc/io/csv.hpp"

namespace ehmc {

void standardize_columns(Matrix& X, const std::vector<std::string>& names) {
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    X.col(j).array() -= mean;
    const double var = X.col(j).squaredNorm() / n;  // population variance
    if (!(var > 0.0)) {
      const std::string label =
          static_cast<std::size_t>(j) < names.size()
              ? names[static_cast<std::size_t>(j)]
              : "column " + std::to_string(j + 1);
      throw DataError("constant covariate cannot be standardized: " + label);
    }
    X.col(j) /= std::sqrt(var);
  }
}

LogisticData load_logistic_csv(const std::string& path) {
  std::vector<std::string> header;
  Matrix table = io::read_matrix_csv(path, &header);
  if (table.rows() < 1 || table.cols() < 2)
    throw DataError(path + ": need at least one row and two columns");

  const Eigen::Index p = table.cols() - 1;
  LogisticData data;
  data.X = table.leftCols(p);
  data.y = table.col(p);
  for (Eigen::Index i = 0; i < data.y.size(); ++i)
    if (data.y[i] != 0.0 && data.y[i] != 1.0)
      throw DataError(path + ": label at row " + std::to_string(i + 1) +
                      " is not 0 or 1");
  if (!header.empty()) header.pop_back();  // drop the label column name
  standardize_columns(data.X, header);
  return data;
}

LogisticData make_logistic_data(int n, int p, RngStream& rng) {
  if (n < 2 || p < 1) throw ConfigError("logistic synthetic: bad shape");
  LogisticData data;
  data.X.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) data.X(i, j) = rng.normal();
  standardize_columns(data.X);

  Vector coef(p);
  for (int j = 0; j < p; ++j) coef[j] = rng.normal();
  const Vector z = data.X * coef;
  data.y.resize(n);
  for (int i = 0; i < n; ++i)
    data.y[i] = rng.uniform() < sigmoid(z[i]) ? 1.0 : 0.0;
  return data;
}

void save_logistic_csv(const LogisticData& data, const std::string& path) {
  Matrix table(data.X.rows(), data.X.cols() + 1);
  table.leftCols(data.X.cols()) = data.X;
  table.col(data.X.cols()) = data.y;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < data.X.cols(); ++j)
    names.push_back("x" + std::to_string(j + 1));
  names.push_back("y");
  io::write_matrix_csv(path, table, names);
}

}  // namespace ehmc
