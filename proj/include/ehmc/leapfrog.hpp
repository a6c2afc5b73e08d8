#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ehmc/errors.hpp"
#include "ehmc/phase.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// One-step-at-a-time leapfrog driver.
///
/// The gradient at the current position is kept between steps, so every new
/// position is differentiated exactly once: integrating L steps from scratch
/// costs L+1 gradient calls, and resuming from a known (potential, gradient)
/// pair costs exactly one call per step. Each step applies two half-kicks
/// around the drift and never fuses them, so chained single steps, a single
/// multi-step call, and resumed trajectories produce bitwise-identical
/// states.
///
/// A step that leaves the finite range, or moves the Hamiltonian more than
/// `kMaxEnergyError` away from its value at construction, is rolled back:
/// `advance` returns false and the stepper stays at the last good state.
class LeapfrogStepper {
 public:
  static constexpr double kMaxEnergyError = 1000.0;

  /// Costs one gradient call.
  LeapfrogStepper(const TargetModel& model, const MassSpec& mass,
                  PhasePoint start, double eps)
      : model_(&model), mass_(&mass), p_(std::move(start)), eps_(eps) {
    init_common();
    potential_ = model_->potential_grad(p_.theta, grad_);
    finish_init();
  }

  /// Resumes from a known potential/gradient pair; costs no gradient call.
  LeapfrogStepper(const TargetModel& model, const MassSpec& mass,
                  PhasePoint start, double eps, double potential, Vector grad)
      : model_(&model),
        mass_(&mass),
        p_(std::move(start)),
        eps_(eps),
        potential_(potential),
        grad_(std::move(grad)) {
    init_common();
    finish_init();
  }

  /// One leapfrog step. Returns false on divergence; the state is unchanged.
  bool advance() {
    if (diverged_) return false;
    vhalf_ = p_.v - (0.5 * eps_) * grad_;
    theta_next_ = p_.theta + eps_ * mass_->apply_inverse(vhalf_);
    if (!theta_next_.allFinite()) return mark_diverged();
    const double u_next = model_->potential_grad(theta_next_, grad_next_);
    v_next_ = vhalf_ - (0.5 * eps_) * grad_next_;
    if (!std::isfinite(u_next) || !v_next_.allFinite()) return mark_diverged();
    const double h_next = u_next + mass_->kinetic(v_next_);
    if (!std::isfinite(h_next) || std::abs(h_next - h0_) > kMaxEnergyError)
      return mark_diverged();
    p_.theta.swap(theta_next_);
    p_.v.swap(v_next_);
    grad_.swap(grad_next_);
    potential_ = u_next;
    hamiltonian_ = h_next;
    ++steps_;
    return true;
  }

  const PhasePoint& state() const { return p_; }
  double potential() const { return potential_; }
  double hamiltonian() const { return hamiltonian_; }
  const Vector& grad() const { return grad_; }
  int steps() const { return steps_; }
  bool diverged() const { return diverged_; }
  /// 1-based index of the step that failed; 0 when not diverged.
  int divergence_step() const { return diverged_ ? steps_ + 1 : 0; }

 private:
  void init_common() {
    if (eps_ <= 0.0 || !std::isfinite(eps_))
      throw ConfigError("leapfrog step size must be positive and finite");
    if (p_.theta.size() != model_->dim() || p_.v.size() != model_->dim())
      throw ConfigError("phase point dimension mismatch");
    mass_->check_dim(model_->dim());
  }

  void finish_init() {
    hamiltonian_ = potential_ + mass_->kinetic(p_.v);
    h0_ = hamiltonian_;
    if (!std::isfinite(h0_) || !grad_.allFinite())
      diverged_ = true;
  }

  bool mark_diverged() {
    diverged_ = true;
    return false;
  }

  const TargetModel* model_;
  const MassSpec* mass_;
  PhasePoint p_;
  double eps_;
  double potential_ = 0.0;
  Vector grad_;
  double hamiltonian_ = 0.0;
  double h0_ = 0.0;
  int steps_ = 0;
  bool diverged_ = false;
  Vector vhalf_, theta_next_, v_next_, grad_next_;
};

/// State after L leapfrog steps of size eps. L = 0 returns the input with no
/// gradient call; L >= 1 costs exactly L+1 gradient calls. Throws
/// DivergenceError with the failing step index.
inline PhasePoint leapfrog(const TargetModel& model, const MassSpec& mass,
                           PhasePoint p, double eps, int steps) {
  if (steps < 0) throw ConfigError("leapfrog step count must be >= 0");
  if (steps == 0) return p;
  LeapfrogStepper s(model, mass, std::move(p), eps);
  for (int l = 1; l <= steps; ++l)
    if (!s.advance()) throw DivergenceError("leapfrog trajectory diverged", l);
  return s.state();
}

/// The full length-L trajectory: element l-1 is the state after l steps,
/// bitwise equal to leapfrog(..., l). Costs L+1 gradient calls.
inline std::vector<PhasePoint> leapfrog_path(const TargetModel& model,
                                             const MassSpec& mass,
                                             PhasePoint p, double eps,
                                             int steps) {
  if (steps < 1) throw ConfigError("leapfrog path needs >= 1 step");
  std::vector<PhasePoint> path;
  path.reserve(static_cast<std::size_t>(steps));
  LeapfrogStepper s(model, mass, std::move(p), eps);
  for (int l = 1; l <= steps; ++l) {
    if (!s.advance()) throw DivergenceError("leapfrog trajectory diverged", l);
    path.push_back(s.state());
  }
  return path;
}

}  // namespace ehmc
