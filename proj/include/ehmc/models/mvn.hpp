#pragma once

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ehmc/diagnostics.hpp"
#include "ehmc/errors.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Centered Gaussian with covariance A_ij = rho^{|i-j|}.
/// U(theta) = theta' A^{-1} theta / 2, with the gradient obtained from the
/// Cholesky factor cached at construction; the inverse is never formed.
/// Every marginal is standard normal.
class MvnModel : public TargetModel {
 public:
  MvnModel(int dim, double rho) : d_(dim), rho_(rho) {
    if (dim < 1) throw ConfigError("mvn: dimension must be >= 1");
    if (!(std::abs(rho) < 1.0)) throw ConfigError("mvn: |rho| must be < 1");
    cov_.resize(d_, d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        cov_(i, j) = std::pow(rho_, std::abs(i - j));
    llt_.compute(cov_);
    if (llt_.info() != Eigen::Success)
      throw ConfigError("mvn: covariance is not positive definite");
  }

  int dim() const override { return d_; }
  std::string name() const override { return "mvn"; }

  double potential(const Vector& theta) const override {
    check(theta);
    return 0.5 * theta.dot(llt_.solve(theta));
  }

  bool has_analytic_marginals() const override { return true; }
  double marginal_cdf(int /*component*/, double x) const override {
    return normal_cdf(x);
  }

  const Matrix& covariance() const { return cov_; }
  double rho() const { return rho_; }

  /// Exact draw from the target; used to start chains in stationarity.
  Vector sample_target(RngStream& rng) const {
    Vector z(d_);
    for (int i = 0; i < d_; ++i) z[i] = rng.normal();
    return llt_.matrixL() * z;
  }

 protected:
  double eval_potential_grad(const Vector& theta, Vector& grad) const override {
    check(theta);
    grad = llt_.solve(theta);
    return 0.5 * theta.dot(grad);
  }

 private:
  void check(const Vector& theta) const {
    if (theta.size() != d_) throw ConfigError("mvn: dimension mismatch");
  }

  int d_;
  double rho_;
  Matrix cov_;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace ehmc
