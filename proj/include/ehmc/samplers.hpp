#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ehmc/diagnostics.hpp"
#include "ehmc/errors.hpp"
#include "ehmc/leapfrog.hpp"
#include "ehmc/phase.hpp"
#include "ehmc/rng.hpp"
#include "ehmc/target.hpp"
#include "ehmc/uturn.hpp"

namespace ehmc {

struct ChainState {
  Vector theta;
  Vector v;
  long iter = 0;
};

struct HmcStepResult {
  double accept_prob = 0.0;  // MH ratio clipped at 1; 0 on divergence
  bool accepted = false;
  bool diverged = false;
};

/// One Metropolis-adjusted trajectory move with a fresh momentum draw.
/// Rejection keeps the position; a divergent trajectory rejects with zero
/// acceptance credit and consumes no accept/reject variate.
inline HmcStepResult hmc_step(ChainState& state, const TargetModel& model,
                              const MassSpec& mass, double eps, int steps,
                              RngStream& rng) {
  if (steps < 1) throw ConfigError("trajectory length must be >= 1");
  const int d = model.dim();
  if (state.theta.size() != d) throw ConfigError("chain state dimension mismatch");

  state.v = sample_momentum(mass, d, rng);
  LeapfrogStepper s(model, mass, {state.theta, state.v}, eps);
  const double h_start = s.hamiltonian();
  bool diverged = s.diverged();
  for (int l = 0; l < steps && !diverged; ++l)
    if (!s.advance()) diverged = true;

  HmcStepResult out;
  out.diverged = diverged;
  ++state.iter;
  if (diverged) return out;

  out.accept_prob = std::min(1.0, std::exp(h_start - s.hamiltonian()));
  if (rng.uniform() < out.accept_prob) {
    state.theta = s.state().theta;
    state.v = -s.state().v;
    out.accepted = true;
  }
  return out;
}

enum class SamplerKind { HmcFixed, HmcJitter, Ehmc, Prhmc };

inline std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::HmcFixed: return "hmc-fixed";
    case SamplerKind::HmcJitter: return "hmc-jitter";
    case SamplerKind::Ehmc: return "ehmc";
    case SamplerKind::Prhmc: return "prhmc";
  }
  throw ConfigError("unknown sampler kind");
}

inline SamplerKind sampler_from_string(const std::string& s) {
  if (s == "hmc-fixed") return SamplerKind::HmcFixed;
  if (s == "hmc-jitter") return SamplerKind::HmcJitter;
  if (s == "ehmc") return SamplerKind::Ehmc;
  if (s == "prhmc") return SamplerKind::Prhmc;
  throw ConfigError("unknown sampler '" + s + "'");
}

struct SamplerConfig {
  double eps = 0.1;
  SamplerKind sampler = SamplerKind::Ehmc;
  int fixed_steps = 10;          // baselines
  double eta = 0.25;             // momentum refresh probability, in (0, 1]
  int length_divisor = 3;        // drawn lengths are mapped to ceil(L / divisor)
  long iters = 10000;
  std::uint64_t seed = 1;
  std::int64_t grad_budget = 0;  // 0 = unlimited; stop once the budget is spent
  int max_cache_points = 1000000;

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps))
      throw ConfigError("sampler: step size must be positive");
    if (iters < 0) throw ConfigError("sampler: iteration count must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0))
      throw ConfigError("sampler: refresh probability must be in (0, 1]");
    if (length_divisor < 1)
      throw ConfigError("sampler: length divisor must be >= 1");
    if (grad_budget < 0) throw ConfigError("sampler: bad gradient budget");
  }
};

/// Production output: recorded positions (one row per iteration) plus the
/// sampling tallies. Efficiency metrics are filled separately.
struct SampleRun {
  Matrix chain;
  RunReport report;
};

namespace detail {

// Trajectory-length substream; kept separate from the dynamics substream so
// samplers that do not draw lengths consume identical dynamics randomness.
constexpr std::uint64_t kDynamicsStream = 0;
constexpr std::uint64_t kLengthStream = 1;

template <typename DrawLength>
SampleRun run_fresh_momentum_chain(const TargetModel& model,
                                   const MassSpec& mass, const Vector& theta0,
                                   const SamplerConfig& cfg,
                                   DrawLength&& draw_length) {
  cfg.validate();
  if (theta0.size() != model.dim())
    throw ConfigError("starting point dimension mismatch");
  const int d = model.dim();
  RngStream dynamics(cfg.seed, kDynamicsStream);
  RngStream length_rng(cfg.seed, kLengthStream);

  SampleRun run;
  run.chain.resize(cfg.iters, d);
  run.report.lengths.reserve(static_cast<std::size_t>(cfg.iters));

  ChainState state{theta0, Vector::Zero(d), 0};
  const std::int64_t grads_before = model.grad_calls();
  long n = 0, accepted = 0;
  double accept_prob_sum = 0.0;
  for (; n < cfg.iters; ++n) {
    if (cfg.grad_budget > 0 &&
        model.grad_calls() - grads_before >= cfg.grad_budget)
      break;
    const int steps = draw_length(length_rng);
    const HmcStepResult r = hmc_step(state, model, mass, cfg.eps, steps, dynamics);
    run.chain.row(n) = state.theta;
    run.report.lengths.push_back(steps);
    accept_prob_sum += r.accept_prob;
    if (r.accepted) ++accepted;
    if (r.diverged) ++run.report.n_divergent;
  }
  run.chain.conservativeResize(n, d);
  run.report.n_draws = n;
  run.report.grad_calls = model.grad_calls() - grads_before;
  if (n > 0) {
    run.report.accept_rate = static_cast<double>(accepted) / n;
    run.report.mean_accept_prob = accept_prob_sum / n;
  }
  return run;
}

}  // namespace detail

/// HMC with the per-iteration trajectory length drawn from a learned length
/// distribution, independently of the chain state.
inline SampleRun run_ehmc(const TargetModel& model, const MassSpec& mass,
                          const Vector& theta0, const BatchDistribution& dist,
                          const SamplerConfig& cfg) {
  if (dist.empty()) throw ConfigError("empty length distribution");
  return detail::run_fresh_momentum_chain(
      model, mass, theta0, cfg,
      [&dist](RngStream& rng) { return dist.sample(rng); });
}

/// Fixed-length HMC, or uniformly jittered lengths on {1, ..., fixed_steps}.
inline SampleRun run_baseline_hmc(const TargetModel& model,
                                  const MassSpec& mass, const Vector& theta0,
                                  int fixed_steps, bool jitter,
                                  const SamplerConfig& cfg) {
  if (fixed_steps < 1) throw ConfigError("baseline trajectory length must be >= 1");
  if (jitter)
    return detail::run_fresh_momentum_chain(
        model, mass, theta0, cfg, [fixed_steps](RngStream& rng) {
          return 1 + static_cast<int>(rng.uniform_below(
                         static_cast<std::uint64_t>(fixed_steps)));
        });
  return detail::run_fresh_momentum_chain(
      model, mass, theta0, cfg,
      [fixed_steps](RngStream&) { return fixed_steps; });
}

/// Cached forward-oriented leapfrog orbit for partial momentum refreshment.
/// `cursor` (1-based) marks the chain's current point; the stored momentum
/// there equals direction * v_current. Gradients at both ends are kept so
/// extensions never re-differentiate a cached position.
struct PathCache {
  struct Point {
    Vector theta;
    Vector v;  // forward orientation
    double potential;
  };

  std::deque<Point> points;
  int cursor = 1;
  int direction = 1;
  Vector grad_front, grad_back;
  bool has_grad_front = false, has_grad_back = false;

  int size() const { return static_cast<int>(points.size()); }
  const Point& at(int k) const { return points[static_cast<std::size_t>(k - 1)]; }
};

/// Partially refreshed HMC. With probability eta the momentum is redrawn and
/// the orbit cache rebuilt from a fresh trajectory; otherwise the chain moves
/// along the cached orbit in its current direction, extending the cache on
/// demand and flipping momentum and direction on rejection.
class PrhmcSampler {
 public:
  PrhmcSampler(const TargetModel& model, const MassSpec& mass, Vector theta0,
               const BatchDistribution& dist, double eta,
               const SamplerConfig& cfg)
      : model_(model),
        mass_(mass),
        dist_(dist),
        eta_(eta),
        cfg_(cfg),
        dynamics_(cfg.seed, detail::kDynamicsStream),
        length_rng_(cfg.seed, detail::kLengthStream),
        theta_(std::move(theta0)) {
    cfg_.validate();
    if (dist_.empty()) throw ConfigError("empty length distribution");
    if (!(eta_ > 0.0 && eta_ <= 1.0))
      throw ConfigError("refresh probability must be in (0, 1]");
    if (theta_.size() != model_.dim())
      throw ConfigError("starting point dimension mismatch");
    v_ = sample_momentum(mass_, model_.dim(), dynamics_);
    cache_.points.push_back({theta_, v_, model_.potential(theta_)});
    cache_.cursor = 1;
    cache_.direction = 1;
  }

  struct StepInfo {
    int length = 0;        // rescaled draw used this iteration
    bool refreshed = false;
    bool accepted = false;
    bool diverged = false;
    double accept_prob = 0.0;
  };

  StepInfo step() {
    const double u = dynamics_.uniform();
    const int raw = dist_.sample(length_rng_);
    const int length = std::max(1, (raw + cfg_.length_divisor - 1) / cfg_.length_divisor);
    StepInfo info;
    info.length = length;
    if (u < eta_) {
      info.refreshed = true;
      refresh_move(length, info);
    } else {
      cached_move(length, info);
    }
    return info;
  }

  const Vector& theta() const { return theta_; }
  const Vector& momentum() const { return v_; }
  const PathCache& cache() const { return cache_; }

 private:
  void refresh_move(int length, StepInfo& info) {
    const Vector v_new = sample_momentum(mass_, model_.dim(), dynamics_);
    LeapfrogStepper s(model_, mass_, {theta_, v_new}, cfg_.eps);
    const double h_start = s.hamiltonian();

    std::deque<PathCache::Point> pts;
    pts.push_back({theta_, v_new, s.potential()});
    cache_.grad_front = s.grad();
    cache_.has_grad_front = !s.diverged();
    int done = 0;
    for (int k = 0; k < length; ++k) {
      if (!s.advance()) break;
      pts.push_back({s.state().theta, s.state().v, s.potential()});
      ++done;
    }
    cache_.points = std::move(pts);
    cache_.grad_back = s.grad();
    cache_.has_grad_back = cache_.has_grad_front;

    if (done < length) {  // divergent rebuild: reject and flip
      info.diverged = true;
      v_ = -v_new;
      cache_.cursor = 1;
      cache_.direction = -1;
      return;
    }
    info.accept_prob = std::min(1.0, std::exp(h_start - s.hamiltonian()));
    if (dynamics_.uniform() < info.accept_prob) {
      info.accepted = true;
      theta_ = cache_.points.back().theta;
      v_ = cache_.points.back().v;
      cache_.cursor = cache_.size();
      cache_.direction = 1;
    } else {
      v_ = -v_new;
      cache_.cursor = 1;
      cache_.direction = -1;
    }
  }

  void cached_move(int length, StepInfo& info) {
    int target = cache_.cursor + cache_.direction * length;
    const int deficit = cache_.direction == 1 ? target - cache_.size()
                                              : 1 - target;
    bool extended_fully = true;
    if (deficit > 0) {
      if (cache_.size() + deficit > cfg_.max_cache_points)
        throw std::runtime_error(
            "trajectory cache would exceed " +
            std::to_string(cfg_.max_cache_points) +
            " points; lower the inter-refresh excursion (raise eta)");
      const int done = cache_.direction == 1 ? extend_forward(deficit)
                                             : extend_backward(deficit);
      if (cache_.direction == -1) target += done;
      extended_fully = done == deficit;
    }
    if (!extended_fully) {  // divergent extension: reject and flip
      info.diverged = true;
      v_ = -v_;
      cache_.direction = -cache_.direction;
      return;
    }
    const PathCache::Point& current = cache_.at(cache_.cursor);
    const PathCache::Point& proposal = cache_.at(target);
    const double h_current = current.potential + mass_.kinetic(v_);
    const double h_proposal = proposal.potential + mass_.kinetic(proposal.v);
    info.accept_prob = std::min(1.0, std::exp(h_current - h_proposal));
    if (dynamics_.uniform() < info.accept_prob) {
      info.accepted = true;
      theta_ = proposal.theta;
      v_ = cache_.direction == 1 ? proposal.v : Vector(-proposal.v);
      cache_.cursor = target;
    } else {
      v_ = -v_;
      cache_.direction = -cache_.direction;
    }
  }

  // Appends up to `count` points past the forward end; returns how many were
  // added before a divergence.
  int extend_forward(int count) {
    const PathCache::Point& end = cache_.points.back();
    LeapfrogStepper s =
        cache_.has_grad_back
            ? LeapfrogStepper(model_, mass_, {end.theta, end.v}, cfg_.eps,
                              end.potential, cache_.grad_back)
            : LeapfrogStepper(model_, mass_, {end.theta, end.v}, cfg_.eps);
    int done = 0;
    for (int k = 0; k < count; ++k) {
      if (!s.advance()) break;
      cache_.points.push_back({s.state().theta, s.state().v, s.potential()});
      ++done;
    }
    cache_.grad_back = s.grad();
    cache_.has_grad_back = true;
    return done;
  }

  // Prepends up to `count` points before the backward end, integrating
  // against the stored orientation and storing the results flipped. The
  // cursor shifts by the number of points added.
  int extend_backward(int count) {
    const PathCache::Point& front = cache_.points.front();
    LeapfrogStepper s =
        cache_.has_grad_front
            ? LeapfrogStepper(model_, mass_, {front.theta, Vector(-front.v)},
                              cfg_.eps, front.potential, cache_.grad_front)
            : LeapfrogStepper(model_, mass_, {front.theta, Vector(-front.v)},
                              cfg_.eps);
    int done = 0;
    for (int k = 0; k < count; ++k) {
      if (!s.advance()) break;
      cache_.points.push_front(
          {s.state().theta, Vector(-s.state().v), s.potential()});
      ++done;
    }
    cache_.grad_front = s.grad();
    cache_.has_grad_front = true;
    cache_.cursor += done;
    return done;
  }

  const TargetModel& model_;
  const MassSpec& mass_;
  const BatchDistribution& dist_;
  double eta_;
  SamplerConfig cfg_;
  RngStream dynamics_;
  RngStream length_rng_;
  Vector theta_;
  Vector v_;
  PathCache cache_;
};

/// Runs a prHMC chain; drawn lengths are rescaled by the configured divisor.
inline SampleRun run_prhmc(const TargetModel& model, const MassSpec& mass,
                           const Vector& theta0, const BatchDistribution& dist,
                           double eta, const SamplerConfig& cfg) {
  PrhmcSampler sampler(model, mass, theta0, dist, eta, cfg);
  const int d = model.dim();

  SampleRun run;
  run.chain.resize(cfg.iters, d);
  run.report.lengths.reserve(static_cast<std::size_t>(cfg.iters));
  run.report.refreshed.reserve(static_cast<std::size_t>(cfg.iters));

  const std::int64_t grads_before = model.grad_calls();
  long n = 0, accepted = 0;
  double accept_prob_sum = 0.0;
  for (; n < cfg.iters; ++n) {
    if (cfg.grad_budget > 0 &&
        model.grad_calls() - grads_before >= cfg.grad_budget)
      break;
    const PrhmcSampler::StepInfo info = sampler.step();
    run.chain.row(n) = sampler.theta();
    run.report.lengths.push_back(info.length);
    run.report.refreshed.push_back(info.refreshed ? 1 : 0);
    accept_prob_sum += info.accept_prob;
    if (info.accepted) ++accepted;
    if (info.diverged) ++run.report.n_divergent;
  }
  run.chain.conservativeResize(n, d);
  run.report.n_draws = n;
  run.report.grad_calls = model.grad_calls() - grads_before;
  if (n > 0) {
    run.report.accept_rate = static_cast<double>(accepted) / n;
    run.report.mean_accept_prob = accept_prob_sum / n;
  }
  return run;
}

}  // namespace ehmc
