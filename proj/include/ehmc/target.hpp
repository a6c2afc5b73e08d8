#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace ehmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A named contiguous slice of the parameter vector, used when reporting
/// per-group efficiency metrics.
struct ComponentGroup {
  std::string name;
  int begin;
  int end;  // one past the last index
};

/// Differentiable potential: the negative log target density up to an
/// additive constant.
///
/// `potential_grad` is the unit of cost accounting: it bumps the gradient
/// counter by exactly one per call, and nothing else does. Potential-only
/// evaluations are free. An instance is owned by a single chain; when chains
/// run in parallel each owns its own instance and counters are merged at
/// report time.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;

  /// U(theta); does not touch the gradient counter.
  virtual double potential(const Vector& theta) const = 0;

  /// U(theta) with the gradient written into `grad`. Counts one gradient
  /// evaluation.
  double potential_grad(const Vector& theta, Vector& grad) const {
    ++grad_calls_;
    return eval_potential_grad(theta, grad);
  }

  Vector gradient(const Vector& theta) const {
    Vector g(dim());
    potential_grad(theta, g);
    return g;
  }

  std::int64_t grad_calls() const noexcept { return grad_calls_; }
  void reset_grad_calls() noexcept { grad_calls_ = 0; }

  /// Parameter groups for reporting; the default is a single "all" group.
  virtual std::vector<ComponentGroup> component_groups() const {
    return {{"all", 0, dim()}};
  }

  /// True if per-component marginal CDFs are known in closed form.
  virtual bool has_analytic_marginals() const { return false; }
  virtual double marginal_cdf(int /*component*/, double /*x*/) const {
    throw std::logic_error("no analytic marginals for " + name());
  }

 protected:
  virtual double eval_potential_grad(const Vector& theta,
                                     Vector& grad) const = 0;

 private:
  mutable std::int64_t grad_calls_ = 0;
};

}  // namespace ehmc
