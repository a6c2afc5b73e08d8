#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "ehmc/errors.hpp"
#include "ehmc/rng.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Covariates (standardized to mean 0, unit population variance) and binary
/// labels.
struct LogisticData {
  Matrix X;
  Vector y;
};

/// In place: centers each column and scales it to unit population variance.
/// Throws DataError on constant columns, naming the offender.
void standardize_columns(Matrix& X, const std::vector<std::string>& names = {});

/// Numeric CSV with the label in the last column; an optional header row is
/// auto-detected. Covariate columns are standardized on load.
LogisticData load_logistic_csv(const std::string& path);

/// Synthetic design: standardized Gaussian covariates, labels from a random
/// coefficient vector.
LogisticData make_logistic_data(int n, int p, RngStream& rng);

void save_logistic_csv(const LogisticData& data, const std::string& path);

inline double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Logistic regression posterior under a flat prior:
/// U(theta) = sum_i [ log(1 + exp(x_i' theta)) - y_i x_i' theta ].
class LogisticModel : public TargetModel {
 public:
  explicit LogisticModel(std::shared_ptr<const LogisticData> data)
      : data_(std::move(data)) {
    if (!data_ || data_->X.rows() < 1 || data_->X.cols() < 1)
      throw ConfigError("logistic: empty data");
    if (data_->y.size() != data_->X.rows())
      throw ConfigError("logistic: label count mismatch");
  }

  explicit LogisticModel(LogisticData data)
      : LogisticModel(std::make_shared<const LogisticData>(std::move(data))) {}

  int dim() const override { return static_cast<int>(data_->X.cols()); }
  std::string name() const override { return "logistic"; }

  double potential(const Vector& theta) const override {
    check(theta);
    const Vector z = data_->X * theta;
    double u = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      u += log1p_exp(z[i]) - data_->y[i] * z[i];
    return u;
  }

  const LogisticData& data() const { return *data_; }

 protected:
  double eval_potential_grad(const Vector& theta, Vector& grad) const override {
    check(theta);
    const Vector z = data_->X * theta;
    double u = 0.0;
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      u += log1p_exp(z[i]) - data_->y[i] * z[i];
      r[i] = sigmoid(z[i]) - data_->y[i];
    }
    grad.noalias() = data_->X.transpose() * r;
    return u;
  }

 private:
  void check(const Vector& theta) const {
    if (theta.size() != data_->X.cols())
      throw ConfigError("logistic: dimension mismatch");
  }

  std::shared_ptr<const LogisticData> data_;
};

}  // namespace ehmc
