#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ehmc/errors.hpp"
#include "ehmc/target.hpp"

namespace ehmc::bench {

/// Full experiment description: one model, a sampler list, a target-
/// acceptance grid, and replication counts, plus every tuning knob the
/// pipeline consumes. Defaults are desk scale; the full-scale protocol is
/// warmup 5000, batch_iters 2000, iters 25000, reps 40.
struct ExperimentSpec {
  // model selection; synthetic data is generated when no path is given
  std::string model = "mvn";  // mvn | logistic | sv | irt
  std::string data_path;
  int mvn_dim = 20;
  double mvn_rho = 0.99;
  int logistic_n = 1000;
  int logistic_p = 24;
  int sv_len = 100;
  double sv_phi = 0.98;
  double sv_kappa = 0.65;
  double sv_sigma = 0.15;
  int irt_items = 20;
  int irt_persons = 100;

  std::vector<std::string> samplers = {"ehmc"};
  std::vector<double> p0_grid = {0.60, 0.65, 0.70, 0.75,
                                 0.80, 0.85, 0.90, 0.95};
  int reps = 5;

  int warmup = 2000;
  int batch_iters = 1000;
  long iters = 10000;
  std::int64_t grad_budget = 0;

  std::uint64_t seed = 1;
  double eta = 0.25;
  int l0 = 10;
  int l_fixed = 0;  // 0: baselines use the lower median of the learned lengths
  int length_divisor = 3;
  std::string mass = "identity";  // identity | diag
  int max_batch = 10000;

  std::string out = "results.csv";
  std::string format = "csv";  // csv | json
  std::string dump_chains_dir;
  std::string ks = "auto";  // auto (analytic marginals only) | on | off
  int jobs = 1;

  void validate() const;
};

/// One grid cell, one parameter group. Failed cells carry a reason and keep
/// their siblings untouched.
struct ResultRow {
  std::string model, sampler, group;
  double p0 = 0.0;
  int rep = 0;
  std::uint64_t cell_seed = 0;
  std::string status = "ok";
  std::string reason;
  double eps = std::numeric_limits<double>::quiet_NaN();
  int batch_median = 0;
  long n_draws = 0;
  double accept_rate = std::numeric_limits<double>::quiet_NaN();
  double mean_accept_prob = std::numeric_limits<double>::quiet_NaN();
  long n_divergent = 0;
  std::int64_t grads_warmup = 0;
  std::int64_t grads_learn = 0;
  std::int64_t grads_production = 0;
  double ess_min = std::numeric_limits<double>::quiet_NaN();
  double min_ess_per_grad = std::numeric_limits<double>::quiet_NaN();
  double esjd = std::numeric_limits<double>::quiet_NaN();
  double esjd_per_grad = std::numeric_limits<double>::quiet_NaN();
  double max_ks = std::numeric_limits<double>::quiet_NaN();
};

/// Deterministic seed for a grid cell: stable under additions elsewhere in
/// the grid because it hashes the cell key, not its position.
std::uint64_t derive_cell_seed(std::uint64_t root_seed, const std::string& key);

/// Runs the whole grid: per cell, tune eps, learn the length distribution,
/// draw the production chain, and report metrics per parameter group. Cells
/// run on `jobs` workers; rows come back in deterministic grid order.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

std::string results_csv_header();
std::string result_to_csv_row(const ResultRow& row);
void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows);
void write_results_json(const std::string& path,
                        const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::string& path);

/// Per (model, sampler, group): "best" rows give mean +- sd over reps of the
/// max-over-p0 min ESS per gradient; "curve" rows give medians over reps at
/// each p0.
struct SummaryRow {
  std::string kind;  // best | curve
  std::string model, sampler, group;
  double p0 = std::numeric_limits<double>::quiet_NaN();
  long n = 0;
  double mean_best = std::numeric_limits<double>::quiet_NaN();
  double sd_best = std::numeric_limits<double>::quiet_NaN();
  double median_min_ess_per_grad = std::numeric_limits<double>::quiet_NaN();
  double median_esjd_per_grad = std::numeric_limits<double>::quiet_NaN();
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows);
void write_summary_json(const std::string& path,
                        const std::vector<SummaryRow>& rows);

}  // namespace ehmc::bench
