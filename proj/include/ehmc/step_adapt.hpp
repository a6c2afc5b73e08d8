#pragma once

#include <cmath>
#include <iostream>
#include <utility>

#include "ehmc/errors.hpp"
#include "ehmc/leapfrog.hpp"
#include "ehmc/phase.hpp"
#include "ehmc/samplers.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Dual-averaging state driving log(eps) so the realized acceptance
/// statistic matches the target p0. Constants follow the usual defaults:
/// gamma = 0.05, t0 = 10, kappa = 0.75, mu = log(10 * eps_init).
struct DualAveragingState {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_avg = 0.0;
  double h_bar = 0.0;
  long t = 0;
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double p0 = 0.8;

  static DualAveragingState init(double eps_init, double p0, double gamma = 0.05,
                                 double t0 = 10.0, double kappa = 0.75) {
    if (!(eps_init > 0.0) || !std::isfinite(eps_init))
      throw ConfigError("dual averaging: eps_init must be positive");
    if (!(p0 > 0.0 && p0 < 1.0))
      throw ConfigError("dual averaging: target acceptance must be in (0, 1)");
    if (!(gamma > 0.0) || !(t0 > 0.0))
      throw ConfigError("dual averaging: gamma and t0 must be positive");
    if (!(kappa > 0.5 && kappa <= 1.0))
      throw ConfigError("dual averaging: kappa must be in (0.5, 1]");
    DualAveragingState s;
    s.mu = std::log(10.0 * eps_init);
    s.log_eps = std::log(eps_init);
    s.log_eps_avg = std::log(eps_init);
    s.h_bar = 0.0;
    s.t = 0;
    s.gamma = gamma;
    s.t0 = t0;
    s.kappa = kappa;
    s.p0 = p0;
    return s;
  }
};

/// One dual-averaging update with the observed acceptance statistic.
inline void da_update(DualAveragingState& s, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("dual averaging: acceptance statistic outside [0, 1]");
  s.t += 1;
  const double t = static_cast<double>(s.t);
  const double w = 1.0 / (t + s.t0);
  s.h_bar = (1.0 - w) * s.h_bar + w * (s.p0 - alpha);
  s.log_eps = s.mu - std::sqrt(t) / s.gamma * s.h_bar;
  const double w_avg = std::pow(t, -s.kappa);
  s.log_eps_avg = w_avg * s.log_eps + (1.0 - w_avg) * s.log_eps_avg;
}

namespace detail {
constexpr double kInitEpsFloor = 0x1.0p-50;
constexpr double kInitEpsCeil = 0x1.0p+50;
}  // namespace detail

/// Reasonable starting step size: doubled or halved from 1 until the
/// one-step Metropolis ratio from (theta0, fresh momentum) crosses 1/2.
/// On potentials that never reject, the search stops at a large cap and the
/// capped value is returned with a warning.
inline double init_epsilon(const TargetModel& model, const MassSpec& mass,
                           const Vector& theta0, RngStream& rng) {
  if (theta0.size() != model.dim())
    throw ConfigError("starting point dimension mismatch");
  if (!theta0.allFinite())
    throw ModelError("non-finite starting point");
  const int d = model.dim();
  mass.check_dim(d);
  const Vector v = sample_momentum(mass, d, rng);
  Vector grad(d);
  const double u0 = model.potential_grad(theta0, grad);
  if (!std::isfinite(u0) || !grad.allFinite())
    throw ModelError("non-finite potential or gradient at the starting point");
  const double h0 = u0 + mass.kinetic(v);

  const auto one_step_ratio = [&](double eps) -> double {
    LeapfrogStepper s(model, mass, {theta0, v}, eps, u0, grad);
    if (!s.advance()) return 0.0;
    return std::exp(h0 - s.hamiltonian());
  };

  double eps = 1.0;
  double ratio = one_step_ratio(eps);
  const bool grow = ratio > 0.5;
  while (grow ? ratio > 0.5 : ratio < 0.5) {
    eps *= grow ? 2.0 : 0.5;
    if (eps < detail::kInitEpsFloor)
      throw ModelError("step size search underflowed; the target rejects "
                       "even vanishing steps");
    if (eps > detail::kInitEpsCeil) {
      std::cerr << "ehmc: warning: step size search capped at " << eps
                << "; the target never rejects\n";
      break;
    }
    ratio = one_step_ratio(eps);
  }
  return eps;
}

struct TuneResult {
  double eps = 0.0;       // frozen averaged step size
  Vector theta_end;
  double eps_init = 0.0;  // value chosen by the doubling search
  double accept_rate = 0.0;
  long n_divergent = 0;
};

/// Adapts the step size over a fixed-length HMC warmup chain, feeding the
/// clipped Metropolis ratio of every iteration into dual averaging. Returns
/// exp(log_eps_avg) frozen after the last iteration.
inline TuneResult tune_step_size(const TargetModel& model, const MassSpec& mass,
                                 const Vector& theta0, double p0,
                                 int warmup_iters, int warmup_steps,
                                 RngStream& rng) {
  if (warmup_iters < 1) throw ConfigError("warmup needs at least 1 iteration");
  if (warmup_steps < 1) throw ConfigError("warmup trajectory length must be >= 1");

  const double eps0 = init_epsilon(model, mass, theta0, rng);
  DualAveragingState da = DualAveragingState::init(eps0, p0);
  ChainState state{theta0, Vector::Zero(model.dim()), 0};
  long n_div = 0, accepted = 0;
  for (int t = 0; t < warmup_iters; ++t) {
    const HmcStepResult r = hmc_step(state, model, mass, std::exp(da.log_eps),
                                     warmup_steps, rng);
    if (r.diverged) ++n_div;
    if (r.accepted) ++accepted;
    da_update(da, r.accept_prob);
  }
  if (n_div == warmup_iters)
    throw ModelError("every warmup trajectory diverged; adaptation failed");
  return {std::exp(da.log_eps_avg), std::move(state.theta), eps0,
          static_cast<double>(accepted) / warmup_iters, n_div};
}

struct WarmupResult {
  double eps = 0.0;
  Vector theta_end;
  MassSpec mass = MassSpec::identity();
};

/// Warmup driver. With `adapt_mass`, component variances estimated from the
/// second half of the warmup draws set the inverse mass (momentum precision
/// matches the posterior spread), and the step size is re-tuned for 20% more
/// iterations under the new metric.
inline WarmupResult warmup_chain(const TargetModel& model, const MassSpec& mass,
                                 const Vector& theta0, double p0,
                                 int warmup_iters, int warmup_steps,
                                 RngStream& rng, bool adapt_mass = false) {
  if (!adapt_mass) {
    TuneResult t = tune_step_size(model, mass, theta0, p0, warmup_iters,
                                  warmup_steps, rng);
    return {t.eps, std::move(t.theta_end), mass};
  }
  if (warmup_iters < 2) throw ConfigError("mass adaptation needs >= 2 warmup iterations");

  const int d = model.dim();
  const double eps0 = init_epsilon(model, mass, theta0, rng);
  DualAveragingState da = DualAveragingState::init(eps0, p0);
  ChainState state{theta0, Vector::Zero(d), 0};
  const int half = warmup_iters / 2;
  Vector sum = Vector::Zero(d), sumsq = Vector::Zero(d);
  long n_div = 0, n_kept = 0;
  for (int t = 0; t < warmup_iters; ++t) {
    const HmcStepResult r = hmc_step(state, model, mass, std::exp(da.log_eps),
                                     warmup_steps, rng);
    if (r.diverged) ++n_div;
    da_update(da, r.accept_prob);
    if (t >= half) {
      sum += state.theta;
      sumsq += state.theta.cwiseProduct(state.theta);
      ++n_kept;
    }
  }
  if (n_div == warmup_iters)
    throw ModelError("every warmup trajectory diverged; adaptation failed");

  const Vector mean = sum / static_cast<double>(n_kept);
  Vector var = sumsq / static_cast<double>(n_kept) - mean.cwiseProduct(mean);
  var = var.cwiseMax(1e-12);
  // momentum covariance = inverse of the estimated position covariance
  const MassSpec adapted = MassSpec::diagonal(var.cwiseInverse());

  const int extra = std::max(1, (warmup_iters + 4) / 5);
  TuneResult t2 = tune_step_size(model, adapted, state.theta, p0, extra,
                                 warmup_steps, rng);
  return {t2.eps, std::move(t2.theta_end), adapted};
}

}  // namespace ehmc
