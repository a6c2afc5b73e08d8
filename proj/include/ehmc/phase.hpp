#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ehmc/errors.hpp"
#include "ehmc/rng.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// A position-momentum pair; the unit of Hamiltonian flow.
struct PhasePoint {
  Vector theta;
  Vector v;
};

/// Momentum covariance: identity or a strictly positive diagonal. The
/// inverse is applied elementwise.
class MassSpec {
 public:
  static MassSpec identity() { return MassSpec(); }

  static MassSpec diagonal(Vector diag) {
    if (diag.size() < 1) throw ConfigError("diagonal mass needs dimension >= 1");
    if (!(diag.array() > 0.0).all() || !diag.allFinite())
      throw ConfigError("diagonal mass entries must be finite and positive");
    MassSpec m;
    m.diag_ = std::move(diag);
    m.identity_ = false;
    return m;
  }

  bool is_identity() const { return identity_; }

  const Vector& diag() const {
    if (identity_) throw ConfigError("identity mass has no explicit diagonal");
    return diag_;
  }

  void check_dim(int d) const {
    if (!identity_ && diag_.size() != d)
      throw ConfigError("mass dimension mismatch");
  }

  /// M^{-1} v.
  Vector apply_inverse(const Vector& v) const {
    if (identity_) return v;
    check_dim(static_cast<int>(v.size()));
    return (v.array() / diag_.array()).matrix();
  }

  /// v' M^{-1} v / 2; symmetric in the sign of v.
  double kinetic(const Vector& v) const {
    if (identity_) return 0.5 * v.squaredNorm();
    check_dim(static_cast<int>(v.size()));
    return 0.5 * (v.array().square() / diag_.array()).sum();
  }

 private:
  MassSpec() = default;
  Vector diag_;
  bool identity_ = true;
};

struct HamiltonianValue {
  double potential_energy;
  double kinetic_energy;
  double total;
};

/// H(theta, v) = U(theta) + v' M^{-1} v / 2. Non-finite inputs are rejected.
inline HamiltonianValue hamiltonian(const TargetModel& model,
                                    const MassSpec& mass,
                                    const PhasePoint& p) {
  if (p.theta.size() != model.dim() || p.v.size() != model.dim())
    throw ConfigError("phase point dimension mismatch");
  if (!p.v.allFinite())
    throw DivergenceError("non-finite momentum in Hamiltonian evaluation", 0);
  const double u = model.potential(p.theta);
  if (!std::isfinite(u))
    throw DivergenceError("non-finite potential in Hamiltonian evaluation", 0);
  const double k = mass.kinetic(p.v);
  return {u, k, u + k};
}

/// Fresh momentum draw: component i ~ Normal(0, M_ii).
inline Vector sample_momentum(const MassSpec& mass, int d, RngStream& rng) {
  if (d < 1) throw ConfigError("momentum dimension must be >= 1");
  mass.check_dim(d);
  Vector v(d);
  if (mass.is_identity()) {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
  } else {
    const Vector scale = mass.diag().cwiseSqrt();
    for (int i = 0; i < d; ++i) v[i] = scale[i] * rng.normal();
  }
  return v;
}

}  // namespace ehmc
