#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ehmc/errors.hpp"
#include "ehmc/target.hpp"

namespace ehmc {

/// Effective sample size N / (1 + 2 sum rho_k), with the autocorrelation sum
/// truncated by the initial positive monotone pair-sum rule. The estimate is
/// clamped to (0, N].
inline double ess(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  if (n < 10) throw StatError("ESS needs at least 10 samples");
  Eigen::VectorXd c = x.array() - x.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) throw StatError("ESS undefined for a constant sequence");
  if (!std::isfinite(c0)) throw StatError("ESS undefined for non-finite input");

  const auto rho = [&](Eigen::Index k) -> double {
    if (k >= n) return 0.0;
    return c.head(n - k).dot(c.tail(n - k)) / (static_cast<double>(n) * c0);
  };

  double pair_sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m < n; ++m) {
    double g = rho(2 * m) + rho(2 * m + 1);
    if (g <= 0.0) break;
    g = std::min(g, prev);  // enforce a non-increasing pair sequence
    prev = g;
    pair_sum += g;
  }
  const double tau = std::max(1.0, 2.0 * pair_sum - 1.0);
  return static_cast<double>(n) / tau;
}

/// Per-column ESS of an iterations-by-dimension chain.
inline Eigen::VectorXd ess_per_component(const Matrix& chain) {
  Eigen::VectorXd out(chain.cols());
  for (Eigen::Index j = 0; j < chain.cols(); ++j) out[j] = ess(chain.col(j));
  return out;
}

/// min over components of ESS / gradient evaluations.
inline double min_ess_per_grad(const Matrix& chain, std::int64_t grad_calls) {
  if (grad_calls <= 0) throw ConfigError("gradient call count must be > 0");
  if (chain.cols() < 1) throw ConfigError("empty chain");
  double min_ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < chain.cols(); ++j)
    min_ess = std::min(min_ess, ess(chain.col(j)));
  return min_ess / static_cast<double>(grad_calls);
}

/// Mean squared Euclidean jump between successive draws.
inline double esjd(const Matrix& chain) {
  const Eigen::Index n = chain.rows();
  if (n < 2) throw StatError("ESJD needs at least 2 draws");
  const double total = (chain.bottomRows(n - 1) - chain.topRows(n - 1))
                           .rowwise()
                           .squaredNorm()
                           .sum();
  return total / static_cast<double>(n - 1);
}

/// Two-sample Kolmogorov-Smirnov distance, exact sup over the merged support.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw StatError("KS distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  // once one sample is exhausted the gap can only shrink
  return d;
}

/// One-sample Kolmogorov-Smirnov distance against an analytic CDF, with
/// one-sided corrections at the sample points.
inline double ks_distance(std::vector<double> sample,
                          const std::function<double(double)>& cdf) {
  if (sample.empty()) throw StatError("KS distance of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

/// Standard normal CDF.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Max over components of the KS distance against per-component analytic
/// CDFs.
inline double max_ks(const Matrix& chain,
                     const std::vector<std::function<double(double)>>& cdfs) {
  if (static_cast<Eigen::Index>(cdfs.size()) != chain.cols())
    throw ConfigError("need one reference CDF per component");
  double d = 0.0;
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    std::vector<double> col(chain.col(j).data(),
                            chain.col(j).data() + chain.rows());
    d = std::max(d, ks_distance(std::move(col), cdfs[j]));
  }
  return d;
}

/// Max over components of the two-sample KS distance against a reference
/// chain of the same dimension.
inline double max_ks(const Matrix& chain, const Matrix& reference) {
  if (reference.cols() != chain.cols())
    throw ConfigError("reference chain dimension mismatch");
  double d = 0.0;
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    std::vector<double> a(chain.col(j).data(),
                          chain.col(j).data() + chain.rows());
    std::vector<double> b(reference.col(j).data(),
                          reference.col(j).data() + reference.rows());
    d = std::max(d, ks_distance(std::move(a), std::move(b)));
  }
  return d;
}

/// Per-run record: sampling tallies filled by the sampler, efficiency
/// metrics filled by `finalize_report`.
struct RunReport {
  long n_draws = 0;
  std::int64_t grad_calls = 0;
  double accept_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_accept_prob = std::numeric_limits<double>::quiet_NaN();
  long n_divergent = 0;
  std::vector<int> lengths;     // per-iteration trajectory length draw
  std::vector<char> refreshed;  // per-iteration momentum refresh flag

  Eigen::VectorXd ess;  // per component
  double ess_min = std::numeric_limits<double>::quiet_NaN();
  double min_ess_per_grad = std::numeric_limits<double>::quiet_NaN();
  double esjd = std::numeric_limits<double>::quiet_NaN();
  double esjd_per_grad = std::numeric_limits<double>::quiet_NaN();
  double max_ks = std::numeric_limits<double>::quiet_NaN();
};

/// Computes ESS/ESJD metrics from the recorded chain. Components whose ESS is
/// undefined (constant columns) report NaN and are skipped in the minimum.
inline void finalize_report(RunReport& report, const Matrix& chain) {
  const Eigen::Index d = chain.cols();
  report.ess = Eigen::VectorXd::Constant(
      d, std::numeric_limits<double>::quiet_NaN());
  double min_ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < d; ++j) {
    try {
      report.ess[j] = ess(chain.col(j));
      min_ess = std::min(min_ess, report.ess[j]);
    } catch (const StatError&) {
    }
  }
  if (std::isfinite(min_ess)) {
    report.ess_min = min_ess;
    if (report.grad_calls > 0)
      report.min_ess_per_grad =
          min_ess / static_cast<double>(report.grad_calls);
  }
  if (chain.rows() >= 2) {
    report.esjd = esjd(chain);
    if (report.grad_calls > 0)
      report.esjd_per_grad =
          report.esjd / static_cast<double>(report.grad_calls);
  }
}

}  // namespace ehmc
