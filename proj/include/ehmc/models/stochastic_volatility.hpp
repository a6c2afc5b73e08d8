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

/// Observed return series of a stochastic volatility model.
struct SvData {
  Vector y;
  int length() const { return static_cast<int>(y.size()); }
};

/// Generates T observations: latent AR(1) log-volatility x with persistence
/// phi0 and innovation scale sigma0, returns y_t = eps_t * kappa0 *
/// exp(x_t / 2).
SvData sv_simulate(int T, double phi0, double kappa0, double sigma0,
                   RngStream& rng);

void save_sv_csv(const SvData& data, const std::string& path);
SvData load_sv_csv(const std::string& path);

/// Stochastic volatility posterior in unconstrained coordinates
/// (alpha, beta, gamma, x_1..x_T), where alpha = log((1+phi)/(1-phi)),
/// beta = log kappa, gamma = log sigma^2. Dimension T+3.
///
/// The potential is the fixed closed-form expression this artifact targets;
/// `sv_potential_rederived` recomputes it from the model densities (it
/// matches up to an additive constant) for cross-checking.
class SvModel : public TargetModel {
 public:
  explicit SvModel(std::shared_ptr<const SvData> data)
      : data_(std::move(data)) {
    if (!data_ || data_->length() < 1)
      throw ConfigError("sv: need at least one observation");
  }

  explicit SvModel(SvData data)
      : SvModel(std::make_shared<const SvData>(std::move(data))) {}

  int dim() const override { return data_->length() + 3; }
  std::string name() const override { return "sv"; }

  double potential(const Vector& params) const override;

  std::vector<ComponentGroup> component_groups() const override {
    const int T = data_->length();
    return {{"all", 0, T + 3}, {"theta", 0, 3}, {"x", 3, T + 3}};
  }

  const SvData& data() const { return *data_; }

 protected:
  double eval_potential_grad(const Vector& params, Vector& grad) const override;

 private:
  double eval_potential_grad_impl(const Vector& params, Vector* grad) const;

  std::shared_ptr<const SvData> data_;
};

/// The same negative log posterior assembled term by term from the state
/// space densities, the priors, and the log-transform Jacobians. Differs from
/// SvModel::potential by a params-independent constant.
double sv_potential_rederived(const SvData& data, const Vector& params);

/// Max absolute discrepancy of potential differences between `checks` random
/// point pairs, |dU_closed_form - dU_rederived|; reports rather than fails.
double sv_crosscheck(const SvData& data, int checks, RngStream& rng);

}  // namespace ehmc
