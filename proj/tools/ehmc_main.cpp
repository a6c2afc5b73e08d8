// Benchmark harness for empirical-length HMC samplers.
//
// Subcommands:
//   run            full pipeline over a sampler/p0/replication grid
//   tune           dual-averaging step size search only
//   learn-batches  record the U-turn length distribution for a given eps
//   sample         production draws given eps and a lengths file
//   report         efficiency metrics for a stored chain
//   summarize      aggregate a results table

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ehmc/bench/experiment.hpp"
#include "ehmc/diagnostics.hpp"
#include "ehmc/io/csv.hpp"
#include "ehmc/models/irt.hpp"
#include "ehmc/models/logistic.hpp"
#include "ehmc/models/mvn.hpp"
#include "ehmc/models/stochastic_volatility.hpp"
#include "ehmc/samplers.hpp"
#include "ehmc/step_adapt.hpp"
#include "ehmc/uturn.hpp"

namespace {

using ehmc::bench::ExperimentSpec;

void add_model_options(CLI::App* cmd, ExperimentSpec& spec) {
  cmd->add_option("--model", spec.model, "Target: mvn|logistic|sv|irt")
      ->check(CLI::IsMember({"mvn", "logistic", "sv", "irt"}));
  cmd->add_option("--data", spec.data_path,
                  "Dataset CSV (synthetic data is generated when omitted)");
  cmd->add_option("--dim", spec.mvn_dim, "mvn: dimension");
  cmd->add_option("--rho", spec.mvn_rho, "mvn: correlation base");
  cmd->add_option("--logistic-n", spec.logistic_n, "logistic: synthetic rows");
  cmd->add_option("--logistic-p", spec.logistic_p,
                  "logistic: synthetic covariates");
  cmd->add_option("--sv-len", spec.sv_len, "sv: series length");
  cmd->add_option("--sv-phi", spec.sv_phi, "sv: generating persistence");
  cmd->add_option("--sv-kappa", spec.sv_kappa, "sv: generating scale");
  cmd->add_option("--sv-sigma", spec.sv_sigma, "sv: generating volatility");
  cmd->add_option("--irt-items", spec.irt_items, "irt: items");
  cmd->add_option("--irt-persons", spec.irt_persons, "irt: persons");
  cmd->add_option("--mass", spec.mass,
                  "Mass matrix: identity, or diag for warmup-adapted diagonal")
      ->check(CLI::IsMember({"identity", "diag"}));
  cmd->add_option("--seed", spec.seed, "Root seed");
}

std::unique_ptr<ehmc::TargetModel> build_model(const ExperimentSpec& spec) {
  ehmc::RngStream data_rng(spec.seed, ehmc::fnv1a("data", 4));
  if (spec.model == "mvn")
    return std::make_unique<ehmc::MvnModel>(spec.mvn_dim, spec.mvn_rho);
  if (spec.model == "logistic")
    return std::make_unique<ehmc::LogisticModel>(
        spec.data_path.empty()
            ? ehmc::make_logistic_data(spec.logistic_n, spec.logistic_p,
                                       data_rng)
            : ehmc::load_logistic_csv(spec.data_path));
  if (spec.model == "sv")
    return std::make_unique<ehmc::SvModel>(
        spec.data_path.empty()
            ? ehmc::sv_simulate(spec.sv_len, spec.sv_phi, spec.sv_kappa,
                                spec.sv_sigma, data_rng)
            : ehmc::load_sv_csv(spec.data_path));
  if (spec.model == "irt")
    return std::make_unique<ehmc::IrtModel>(
        spec.data_path.empty()
            ? ehmc::irt_simulate(spec.irt_items, spec.irt_persons, data_rng)
            : ehmc::load_irt_csv(spec.data_path));
  throw ehmc::ConfigError("unknown model '" + spec.model + "'");
}

void write_report(const ehmc::RunReport& report, const std::string& path,
                  const std::string& format) {
  nlohmann::ordered_json j;
  j["n_draws"] = report.n_draws;
  j["grad_calls"] = report.grad_calls;
  j["accept_rate"] = report.accept_rate;
  j["mean_accept_prob"] = report.mean_accept_prob;
  j["n_divergent"] = report.n_divergent;
  j["ess_min"] = report.ess_min;
  j["min_ess_per_grad"] = report.min_ess_per_grad;
  j["esjd"] = report.esjd;
  j["esjd_per_grad"] = report.esjd_per_grad;
  j["max_ks"] = report.max_ks;
  std::vector<double> ess(report.ess.data(),
                          report.ess.data() + report.ess.size());
  j["ess"] = ess;

  if (format == "json") {
    std::ofstream out(path);
    if (!out) throw ehmc::DataError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw ehmc::DataError("cannot open " + path + " for writing");
  out << "n_draws,grad_calls,accept_rate,mean_accept_prob,n_divergent,"
         "ess_min,min_ess_per_grad,esjd,esjd_per_grad,max_ks\n";
  out << report.n_draws << ',' << report.grad_calls << ','
      << ehmc::io::format_double(report.accept_rate) << ','
      << ehmc::io::format_double(report.mean_accept_prob) << ','
      << report.n_divergent << ',' << ehmc::io::format_double(report.ess_min)
      << ',' << ehmc::io::format_double(report.min_ess_per_grad) << ','
      << ehmc::io::format_double(report.esjd) << ','
      << ehmc::io::format_double(report.esjd_per_grad) << ','
      << ehmc::io::format_double(report.max_ks) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-length HMC benchmark harness"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file; flags override it")
      ->transform(CLI::FileOnNonDefaultPath(""));

  ExperimentSpec spec;
  double tune_p0 = 0.8;
  std::string eps_opt;
  double eps_value = 0.0;
  std::string batches_path, chain_path, chain_out, report_out = "report.csv";
  std::string results_path, summary_out = "summary.csv";
  std::string sampler_name = "ehmc";
  long long grad_calls_flag = 0;

  CLI::App* run = app.add_subcommand("run", "Run the full experiment grid");
  add_model_options(run, spec);
  run->add_option("--sampler", spec.samplers,
                  "Samplers to run (repeatable): hmc-fixed|hmc-jitter|ehmc|prhmc");
  run->add_option("--p0", spec.p0_grid, "Target acceptance grid (repeatable)");
  run->add_option("--warmup", spec.warmup, "Step size tuning iterations");
  run->add_option("--batch-iters", spec.batch_iters,
                  "Length-learning iterations");
  run->add_option("--iters", spec.iters, "Production iterations");
  run->add_option("--reps", spec.reps, "Replications per grid point");
  run->add_option("--eta", spec.eta, "prhmc refresh probability");
  run->add_option("--l0", spec.l0, "Warmup/learning trajectory length");
  run->add_option("--l-fixed", spec.l_fixed,
                  "Baseline trajectory length (0: median of learned lengths)");
  run->add_option("--l-div", spec.length_divisor,
                  "prhmc drawn-length divisor");
  run->add_option("--max-batch", spec.max_batch, "U-turn scan cap");
  run->add_option("--grad-budget", spec.grad_budget,
                  "Stop production once this many gradients are spent (0: off)");
  run->add_option("--out", spec.out, "Results file");
  run->add_option("--format", spec.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--jobs", spec.jobs, "Parallel grid cells");
  run->add_option("--dump-chains", spec.dump_chains_dir,
                  "Directory for per-cell chain dumps");
  run->add_option("--ks", spec.ks, "KS computation: auto|on|off")
      ->check(CLI::IsMember({"auto", "on", "off"}));

  CLI::App* tune = app.add_subcommand("tune", "Tune the step size only");
  add_model_options(tune, spec);
  tune->add_option("--p0", tune_p0, "Target acceptance");
  tune->add_option("--warmup", spec.warmup, "Tuning iterations");
  tune->add_option("--l0", spec.l0, "Warmup trajectory length");
  tune->add_option("--out", report_out, "Optional output file")->capture_default_str();

  CLI::App* learn = app.add_subcommand(
      "learn-batches", "Record the U-turn length distribution");
  add_model_options(learn, spec);
  learn->add_option("--eps", eps_value, "Step size (from `tune`)")->required();
  learn->add_option("--l0", spec.l0, "Chain trajectory length");
  learn->add_option("--batch-iters", spec.batch_iters, "Iterations");
  learn->add_option("--max-batch", spec.max_batch, "U-turn scan cap");
  learn->add_option("--out", spec.out, "Lengths CSV")->required();

  CLI::App* sample = app.add_subcommand("sample", "Draw a production chain");
  add_model_options(sample, spec);
  sample->add_option("--sampler", sampler_name,
                     "hmc-fixed|hmc-jitter|ehmc|prhmc");
  sample->add_option("--eps", eps_value, "Step size")->required();
  sample->add_option("--batches", batches_path, "Lengths CSV (ehmc/prhmc)");
  sample->add_option("--iters", spec.iters, "Iterations");
  sample->add_option("--eta", spec.eta, "prhmc refresh probability");
  sample->add_option("--l-div", spec.length_divisor, "prhmc length divisor");
  sample->add_option("--l-fixed", spec.l_fixed,
                     "Baseline trajectory length (0: median of lengths file)");
  sample->add_option("--out", chain_out, "Chain CSV")->required();
  sample->add_option("--report", report_out, "Report file")->capture_default_str();
  sample->add_option("--format", spec.format, "csv|json");

  CLI::App* report = app.add_subcommand("report", "Metrics for a stored chain");
  report->add_option("--chain", chain_path, "Chain CSV")->required();
  report->add_option("--grad-calls", grad_calls_flag,
                     "Gradient evaluations spent producing the chain")
      ->required();
  report->add_option("--model", spec.model,
                     "Reference target for KS (mvn only)");
  report->add_option("--dim", spec.mvn_dim, "mvn: dimension");
  report->add_option("--rho", spec.mvn_rho, "mvn: correlation base");
  report->add_option("--out", report_out, "Report file")->capture_default_str();
  report->add_option("--format", spec.format, "csv|json");

  CLI::App* summ = app.add_subcommand("summarize", "Aggregate a results table");
  summ->add_option("--results", results_path, "results.csv from `run`")
      ->required();
  summ->add_option("--out", summary_out, "Summary file")->capture_default_str();
  summ->add_option("--format", spec.format, "csv|json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto rows = ehmc::bench::run_experiment(spec);
      if (spec.format == "json")
        ehmc::bench::write_results_json(spec.out, rows);
      else
        ehmc::bench::write_results_csv(spec.out, rows);
      long failed = 0;
      for (const auto& r : rows)
        if (r.status != "ok") ++failed;
      std::cerr << "ehmc: wrote " << rows.size() << " rows to " << spec.out;
      if (failed) std::cerr << " (" << failed << " failed)";
      std::cerr << '\n';
      return failed == 0 ? 0 : 1;
    }

    if (tune->parsed()) {
      auto model = build_model(spec);
      ehmc::RngStream rng(spec.seed, 2);
      const ehmc::WarmupResult w = ehmc::warmup_chain(
          *model, ehmc::MassSpec::identity(),
          ehmc::Vector::Zero(model->dim()), tune_p0, spec.warmup, spec.l0, rng,
          spec.mass == "diag");
      std::cout << ehmc::io::format_double(w.eps) << '\n';
      return 0;
    }

    if (learn->parsed()) {
      auto model = build_model(spec);
      ehmc::RngStream rng(spec.seed, 3);
      ehmc::BatchLearnConfig cfg;
      cfg.epsilon = eps_value;
      cfg.initial_steps = spec.l0;
      cfg.iterations = spec.batch_iters;
      cfg.max_batch = spec.max_batch;
      const auto result = ehmc::learn_batch_distribution(
          *model, ehmc::MassSpec::identity(),
          ehmc::Vector::Zero(model->dim()), cfg, rng);
      result.dist.save_csv(spec.out);
      std::cerr << "ehmc: wrote " << result.dist.size() << " lengths to "
                << spec.out << '\n';
      return 0;
    }

    if (sample->parsed()) {
      auto model = build_model(spec);
      const ehmc::SamplerKind kind = ehmc::sampler_from_string(sampler_name);
      ehmc::SamplerConfig cfg;
      cfg.eps = eps_value;
      cfg.sampler = kind;
      cfg.iters = spec.iters;
      cfg.seed = spec.seed;
      cfg.eta = spec.eta;
      cfg.length_divisor = spec.length_divisor;
      const ehmc::Vector theta0 = ehmc::Vector::Zero(model->dim());
      const ehmc::MassSpec mass = ehmc::MassSpec::identity();

      ehmc::BatchDistribution dist;
      if (!batches_path.empty())
        dist = ehmc::BatchDistribution::load_csv(batches_path);

      ehmc::SampleRun run_out;
      switch (kind) {
        case ehmc::SamplerKind::Ehmc:
          run_out = ehmc::run_ehmc(*model, mass, theta0, dist, cfg);
          break;
        case ehmc::SamplerKind::Prhmc:
          run_out = ehmc::run_prhmc(*model, mass, theta0, dist, spec.eta, cfg);
          break;
        default: {
          const int fixed = spec.l_fixed > 0 ? spec.l_fixed : dist.median();
          run_out = ehmc::run_baseline_hmc(
              *model, mass, theta0, fixed,
              kind == ehmc::SamplerKind::HmcJitter, cfg);
        }
      }
      std::vector<std::string> names;
      for (int j = 0; j < model->dim(); ++j)
        names.push_back("theta_" + std::to_string(j));
      ehmc::io::write_matrix_csv(chain_out, run_out.chain, names);
      ehmc::finalize_report(run_out.report, run_out.chain);
      write_report(run_out.report, report_out, spec.format);
      return 0;
    }

    if (report->parsed()) {
      const ehmc::Matrix chain = ehmc::io::read_matrix_csv(chain_path);
      ehmc::RunReport rep;
      rep.n_draws = chain.rows();
      rep.grad_calls = grad_calls_flag;
      ehmc::finalize_report(rep, chain);
      if (spec.model == "mvn" && chain.cols() == spec.mvn_dim) {
        std::vector<std::function<double(double)>> cdfs;
        for (int j = 0; j < spec.mvn_dim; ++j)
          cdfs.emplace_back([](double x) { return ehmc::normal_cdf(x); });
        rep.max_ks = ehmc::max_ks(chain, cdfs);
      }
      write_report(rep, report_out, spec.format);
      return 0;
    }

    if (summ->parsed()) {
      const auto rows = ehmc::bench::read_results_csv(results_path);
      const auto summary = ehmc::bench::summarize(rows);
      if (spec.format == "json")
        ehmc::bench::write_summary_json(summary_out, summary);
      else
        ehmc::bench::write_summary_csv(summary_out, summary);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "ehmc: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
