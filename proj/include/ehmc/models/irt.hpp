#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ehmc/errors.hpp"
#include "ehmc/rng.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Binary response matrix, items by persons.
struct IrtData {
  Matrix y;  // entries in {0, 1}
  int items() const { return static_cast<int>(y.rows()); }
  int persons() const { return static_cast<int>(y.cols()); }
};

IrtData irt_simulate(int items, int persons, RngStream& rng);
void save_irt_csv(const IrtData& data, const std::string& path);
IrtData load_irt_csv(const std::string& path);

/// Two-parameter logistic item response posterior in unconstrained
/// coordinates. Parameter layout (dimension 2I + J + 4):
///   [0, I)          log a_i   (discrimination, log-normal prior)
///   [I, 2I)         log b_i   (difficulty, log-normal prior)
///   [2I, 2I+J)      eta_j     (ability, normal prior)
///   2I+J .. 2I+J+3  log sigma_eta, log sigma_a, mu_b, log sigma_b
/// Success probability: logit p_ij = a_i (eta_j - b_i). Scale parameters
/// carry half-Cauchy(0, 2) priors and mu_b a Normal(0, 25) prior; every
/// log-transformed coordinate contributes its Jacobian term.
class IrtModel : public TargetModel {
 public:
  explicit IrtModel(std::shared_ptr<const IrtData> data)
      : data_(std::move(data)) {
    if (!data_ || data_->items() < 1 || data_->persons() < 1)
      throw ConfigError("irt: empty response matrix");
    for (int i = 0; i < data_->items(); ++i)
      for (int j = 0; j < data_->persons(); ++j) {
        const double v = data_->y(i, j);
        if (v != 0.0 && v != 1.0)
          throw ConfigError("irt: responses must be 0 or 1");
      }
  }

  explicit IrtModel(IrtData data)
      : IrtModel(std::make_shared<const IrtData>(std::move(data))) {}

  int dim() const override { return 2 * data_->items() + data_->persons() + 4; }
  std::string name() const override { return "irt"; }

  double potential(const Vector& params) const override;

  std::vector<ComponentGroup> component_groups() const override {
    const int I = data_->items();
    const int J = data_->persons();
    return {{"all", 0, 2 * I + J + 4},
            {"a", 0, I},
            {"b", I, 2 * I},
            {"eta", 2 * I, 2 * I + J},
            {"hyper", 2 * I + J, 2 * I + J + 4}};
  }

  const IrtData& data() const { return *data_; }

 protected:
  double eval_potential_grad(const Vector& params, Vector& grad) const override;

 private:
  double eval_potential_grad_impl(const Vector& params, Vector* grad) const;

  std::shared_ptr<const IrtData> data_;
};

}  // namespace ehmc
