#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ehmc/errors.hpp"
#include "ehmc/leapfrog.hpp"
#include "ehmc/phase.hpp"
#include "ehmc/rng.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Multiset of trajectory lengths with uniform resampling. Immutable once
/// built; freely shareable across chains.
class BatchDistribution {
 public:
  BatchDistribution() = default;

  explicit BatchDistribution(std::vector<int> lengths)
      : lengths_(std::move(lengths)) {
    for (int l : lengths_)
      if (l < 1) throw ConfigError("batch lengths must be >= 1");
  }

  bool empty() const { return lengths_.empty(); }
  std::size_t size() const { return lengths_.size(); }
  const std::vector<int>& lengths() const { return lengths_; }

  /// Uniform draw over the stored multiset.
  int sample(RngStream& rng) const {
    if (lengths_.empty())
      throw StatError("cannot sample from an empty length distribution");
    return lengths_[rng.uniform_below(lengths_.size())];
  }

  /// Lower median of the stored lengths.
  int median() const {
    if (lengths_.empty())
      throw StatError("median of an empty length distribution");
    std::vector<int> sorted = lengths_;
    const std::size_t mid = (sorted.size() - 1) / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    return sorted[mid];
  }

  /// Copy with every length mapped through ceil(l / divisor), floored at 1.
  BatchDistribution rescaled(int divisor) const {
    if (divisor < 1) throw ConfigError("length divisor must be >= 1");
    std::vector<int> out;
    out.reserve(lengths_.size());
    for (int l : lengths_)
      out.push_back(std::max(1, (l + divisor - 1) / divisor));
    return BatchDistribution(std::move(out));
  }

  /// One integer per line, no header.
  void save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    for (int l : lengths_) out << l << '\n';
  }

  static BatchDistribution load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<int> lengths;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      try {
        std::size_t pos = 0;
        const int v = std::stoi(line, &pos);
        while (pos < line.size() &&
               (line[pos] == ' ' || line[pos] == '\r' || line[pos] == '\t'))
          ++pos;
        if (pos != line.size()) throw std::invalid_argument("trailing junk");
        lengths.push_back(v);
      } catch (const std::exception&) {
        // a non-numeric first line is treated as a header
        if (line_no == 1) continue;
        throw DataError(path + ": bad length at line " +
                        std::to_string(line_no));
      }
    }
    return BatchDistribution(std::move(lengths));
  }

 private:
  std::vector<int> lengths_;
};

inline int sample_batch(const BatchDistribution& dist, RngStream& rng) {
  return dist.sample(rng);
}

struct BatchLearnConfig {
  double epsilon = 0.1;
  int initial_steps = 10;   // trajectory length of the underlying chain
  int iterations = 2000;    // number of recorded lengths
  int max_batch = 10000;    // cap for targets that never turn

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw ConfigError("batch learning: epsilon must be positive");
    if (initial_steps < 1)
      throw ConfigError("batch learning: initial step count must be >= 1");
    if (iterations < 1)
      throw ConfigError("batch learning: iteration count must be >= 1");
    if (max_batch < initial_steps)
      throw ConfigError("batch learning: max_batch must be >= initial steps");
  }
};

struct LongestBatchResult {
  PhasePoint point;  // state after min(batch, requested steps) leapfrog steps
  int batch;         // first step count at which the U-turn test trips
  bool capped;       // batch hit the cap before a U-turn occurred
};

/// Integrates from `start` until (theta_l - theta_0) . M^{-1} v_l < 0 and
/// returns that first l, along with the state after exactly `snapshot_steps`
/// steps when the scan ran that far (or the state at the U-turn otherwise).
/// The scan costs batch+1 gradient calls. Divergence throws; a capped scan is
/// flagged and reports the cap as its batch.
inline LongestBatchResult longest_batch(const TargetModel& model,
                                        const MassSpec& mass,
                                        const PhasePoint& start, double eps,
                                        int snapshot_steps,
                                        int max_batch = 10000) {
  if (snapshot_steps < 1) throw ConfigError("snapshot step count must be >= 1");
  if (max_batch < 1) throw ConfigError("max_batch must be >= 1");
  LeapfrogStepper s(model, mass, start, eps);
  std::optional<PhasePoint> snapshot;
  int l = 0;
  bool capped = false;
  while ((s.state().theta - start.theta)
             .dot(mass.apply_inverse(s.state().v)) >= 0.0) {
    if (l == max_batch) {
      capped = true;
      break;
    }
    if (!s.advance())
      throw DivergenceError("U-turn scan diverged", s.divergence_step());
    ++l;
    if (l == snapshot_steps) snapshot = s.state();
  }
  PhasePoint point = (l >= snapshot_steps && snapshot) ? std::move(*snapshot)
                                                       : s.state();
  return {std::move(point), l, capped};
}

struct BatchLearnResult {
  BatchDistribution dist;
  Vector theta_end;
  double accept_rate = 0.0;
  long n_divergent = 0;
  long n_capped = 0;
};

/// Runs a fixed-length HMC chain and records the U-turn length of every
/// proposed trajectory, accepted or not. Divergent scans record the steps
/// completed before the blow-up (at least 1) and reject the move; capped
/// scans record the cap and go through the usual accept step.
inline BatchLearnResult learn_batch_distribution(const TargetModel& model,
                                                 const MassSpec& mass,
                                                 const Vector& theta0,
                                                 const BatchLearnConfig& cfg,
                                                 RngStream& rng) {
  cfg.validate();
  if (theta0.size() != model.dim())
    throw ConfigError("starting point dimension mismatch");
  const int d = model.dim();
  const int l0 = cfg.initial_steps;

  Vector theta = theta0;
  std::vector<int> lengths;
  lengths.reserve(static_cast<std::size_t>(cfg.iterations));
  long n_div = 0, n_capped = 0, accepted = 0;

  for (int k = 0; k < cfg.iterations; ++k) {
    PhasePoint start{theta, sample_momentum(mass, d, rng)};
    LeapfrogStepper s(model, mass, start, cfg.epsilon);
    const double h_start = s.hamiltonian();

    int l = 0;
    bool capped = false, diverged = s.diverged();
    std::optional<PhasePoint> proposal;
    double h_prop = 0.0;
    while (!diverged &&
           (s.state().theta - start.theta)
                   .dot(mass.apply_inverse(s.state().v)) >= 0.0) {
      if (l == cfg.max_batch) {
        capped = true;
        break;
      }
      if (!s.advance()) {
        diverged = true;
        break;
      }
      ++l;
      if (l == l0) {
        proposal = s.state();
        h_prop = s.hamiltonian();
      }
    }
    lengths.push_back(diverged ? std::max(l, 1) : l);
    if (capped) ++n_capped;

    // bring the trajectory up to the chain's fixed length if the U-turn
    // came early; the stepper resumes with its cached gradient
    while (!diverged && l < l0) {
      if (!s.advance()) {
        diverged = true;
        break;
      }
      ++l;
      if (l == l0) {
        proposal = s.state();
        h_prop = s.hamiltonian();
      }
    }

    if (diverged || !proposal) {
      ++n_div;  // rejected; the chain keeps its current state
      continue;
    }
    const double alpha = std::min(1.0, std::exp(h_start - h_prop));
    if (rng.uniform() < alpha) {
      theta = proposal->theta;
      ++accepted;
    }
  }
  return {BatchDistribution(std::move(lengths)), std::move(theta),
          static_cast<double>(accepted) / cfg.iterations, n_div, n_capped};
}

}  // namespace ehmc
