#include "ehmc/bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ehmc/diagnostics.hpp"
#include "ehmc/io/csv.hpp"
#include "ehmc/models/irt.hpp"
#include "ehmc/models/logistic.hpp"
#include "ehmc/models/mvn.hpp"
#include "ehmc/models/stochastic_volatility.hpp"
#include "ehmc/samplers.hpp"
#include "ehmc/step_adapt.hpp"
#include "ehmc/uturn.hpp"

namespace ehmc::bench {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_quoted(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_double_or_nan(const std::string& s) {
  if (s.empty() || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](double x) { return !std::isfinite(x); }),
          v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ModelBundle {
  std::function<std::unique_ptr<TargetModel>()> make;
};

ModelBundle build_model_bundle(const ExperimentSpec& spec) {
  RngStream data_rng(spec.seed, fnv1a("data", 4));
  if (spec.model == "mvn") {
    const int d = spec.mvn_dim;
    const double rho = spec.mvn_rho;
    return {[d, rho] { return std::make_unique<MvnModel>(d, rho); }};
  }
  if (spec.model == "logistic") {
    auto data = std::make_shared<const LogisticData>(
        spec.data_path.empty()
            ? make_logistic_data(spec.logistic_n, spec.logistic_p, data_rng)
            : load_logistic_csv(spec.data_path));
    return {[data] { return std::make_unique<LogisticModel>(data); }};
  }
  if (spec.model == "sv") {
    auto data = std::make_shared<const SvData>(
        spec.data_path.empty()
            ? sv_simulate(spec.sv_len, spec.sv_phi, spec.sv_kappa,
                          spec.sv_sigma, data_rng)
            : load_sv_csv(spec.data_path));
    return {[data] { return std::make_unique<SvModel>(data); }};
  }
  if (spec.model == "irt") {
    auto data = std::make_shared<const IrtData>(
        spec.data_path.empty()
            ? irt_simulate(spec.irt_items, spec.irt_persons, data_rng)
            : load_irt_csv(spec.data_path));
    return {[data] { return std::make_unique<IrtModel>(data); }};
  }
  throw ConfigError("unknown model '" + spec.model + "'");
}

struct Cell {
  std::string sampler;
  double p0;
  int rep;
  std::string key;
  std::uint64_t seed;
};

// Reference sample for KS against targets without analytic marginals: one
// long eHMC run at p0 = 0.95, built lazily and shared across cells.
struct KsReference {
  std::mutex mu;
  std::optional<Matrix> chain;
  std::string error;
};

Matrix build_ks_reference(const ExperimentSpec& spec, const ModelBundle& bundle) {
  const std::uint64_t seed = derive_cell_seed(spec.seed, spec.model + "|ks-reference");
  auto model = bundle.make();
  const Vector theta0 = Vector::Zero(model->dim());
  RngStream warm_rng(seed, 2), learn_rng(seed, 3);
  const WarmupResult w =
      warmup_chain(*model, MassSpec::identity(), theta0, 0.95, spec.warmup,
                   spec.l0, warm_rng, spec.mass == "diag");
  BatchLearnConfig bcfg;
  bcfg.epsilon = w.eps;
  bcfg.initial_steps = spec.l0;
  bcfg.iterations = spec.batch_iters;
  bcfg.max_batch = spec.max_batch;
  const BatchLearnResult learn =
      learn_batch_distribution(*model, w.mass, w.theta_end, bcfg, learn_rng);
  SamplerConfig cfg;
  cfg.eps = w.eps;
  cfg.iters = 10 * spec.iters;
  cfg.seed = seed;
  return run_ehmc(*model, w.mass, learn.theta_end, learn.dist, cfg).chain;
}

void fill_group_metrics(ResultRow& row, const Matrix& chain,
                        const ComponentGroup& group, std::int64_t grads,
                        const TargetModel& model, bool want_ks,
                        const Matrix* ks_reference) {
  const auto block = chain.middleCols(group.begin, group.end - group.begin);
  double min_ess = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    try {
      min_ess = std::min(min_ess, ess(block.col(j)));
    } catch (const StatError&) {
    }
  }
  if (std::isfinite(min_ess)) {
    row.ess_min = min_ess;
    if (grads > 0) row.min_ess_per_grad = min_ess / static_cast<double>(grads);
  }
  if (block.rows() >= 2) {
    row.esjd = esjd(block);
    if (grads > 0) row.esjd_per_grad = row.esjd / static_cast<double>(grads);
  }
  if (want_ks && chain.rows() > 0) {
    if (model.has_analytic_marginals()) {
      std::vector<std::function<double(double)>> cdfs;
      for (int j = group.begin; j < group.end; ++j)
        cdfs.push_back([&model, j](double x) { return model.marginal_cdf(j, x); });
      row.max_ks = max_ks(block, cdfs);
    } else if (ks_reference) {
      row.max_ks =
          max_ks(block, ks_reference->middleCols(group.begin,
                                                 group.end - group.begin));
    }
  }
}

std::string sanitize_for_filename(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.')
      c = '_';
  return s;
}

std::vector<ResultRow> run_cell(const ExperimentSpec& spec,
                                const ModelBundle& bundle, const Cell& cell,
                                KsReference& ks_ref) {
  ResultRow base;
  base.model = spec.model;
  base.sampler = cell.sampler;
  base.group = "all";
  base.p0 = cell.p0;
  base.rep = cell.rep;
  base.cell_seed = cell.seed;
  try {
    const SamplerKind kind = sampler_from_string(cell.sampler);
    auto model = bundle.make();
    const Vector theta0 = Vector::Zero(model->dim());
    RngStream warm_rng(cell.seed, 2), learn_rng(cell.seed, 3);

    const std::int64_t g0 = model->grad_calls();
    const WarmupResult w =
        warmup_chain(*model, MassSpec::identity(), theta0, cell.p0,
                     spec.warmup, spec.l0, warm_rng, spec.mass == "diag");
    base.eps = w.eps;
    base.grads_warmup = model->grad_calls() - g0;

    BatchLearnConfig bcfg;
    bcfg.epsilon = w.eps;
    bcfg.initial_steps = spec.l0;
    bcfg.iterations = spec.batch_iters;
    bcfg.max_batch = spec.max_batch;
    const BatchLearnResult learn =
        learn_batch_distribution(*model, w.mass, w.theta_end, bcfg, learn_rng);
    base.grads_learn = model->grad_calls() - g0 - base.grads_warmup;
    base.batch_median = learn.dist.median();

    SamplerConfig cfg;
    cfg.eps = w.eps;
    cfg.sampler = kind;
    cfg.iters = spec.iters;
    cfg.seed = cell.seed;
    cfg.eta = spec.eta;
    cfg.length_divisor = spec.length_divisor;
    cfg.grad_budget = spec.grad_budget;

    SampleRun run;
    switch (kind) {
      case SamplerKind::Ehmc:
        run = run_ehmc(*model, w.mass, learn.theta_end, learn.dist, cfg);
        break;
      case SamplerKind::Prhmc:
        run = run_prhmc(*model, w.mass, learn.theta_end, learn.dist, spec.eta,
                        cfg);
        break;
      case SamplerKind::HmcFixed:
      case SamplerKind::HmcJitter: {
        const int fixed =
            spec.l_fixed > 0 ? spec.l_fixed : learn.dist.median();
        run = run_baseline_hmc(*model, w.mass, learn.theta_end, fixed,
                               kind == SamplerKind::HmcJitter, cfg);
        break;
      }
    }
    base.grads_production =
        model->grad_calls() - g0 - base.grads_warmup - base.grads_learn;
    base.n_draws = run.report.n_draws;
    base.accept_rate = run.report.accept_rate;
    base.mean_accept_prob = run.report.mean_accept_prob;
    base.n_divergent = run.report.n_divergent;

    const bool want_ks =
        spec.ks == "on" ||
        (spec.ks == "auto" && model->has_analytic_marginals());
    const Matrix* reference = nullptr;
    if (want_ks && !model->has_analytic_marginals()) {
      std::lock_guard<std::mutex> lock(ks_ref.mu);
      if (!ks_ref.chain && ks_ref.error.empty()) {
        try {
          ks_ref.chain = build_ks_reference(spec, bundle);
        } catch (const std::exception& e) {
          ks_ref.error = e.what();
        }
      }
      if (ks_ref.chain) reference = &*ks_ref.chain;
    }

    if (!spec.dump_chains_dir.empty()) {
      std::vector<std::string> names;
      for (int j = 0; j < model->dim(); ++j)
        names.push_back("theta_" + std::to_string(j));
      io::write_matrix_csv(spec.dump_chains_dir + "/" +
                               sanitize_for_filename(cell.key) + ".csv",
                           run.chain, names);
    }

    std::vector<ResultRow> rows;
    for (const ComponentGroup& group : model->component_groups()) {
      ResultRow row = base;
      row.group = group.name;
      fill_group_metrics(row, run.chain, group, base.grads_production, *model,
                         want_ks, reference);
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const std::exception& e) {
    base.status = "failed";
    base.reason = e.what();
    return {base};
  }
}

}  // namespace

void ExperimentSpec::validate() const {
  if (samplers.empty()) throw ConfigError("no samplers given");
  if (p0_grid.empty()) throw ConfigError("empty p0 grid");
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (warmup < 1 || batch_iters < 1 || iters < 0)
    throw ConfigError("phase iteration counts must be positive");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (format != "csv" && format != "json")
    throw ConfigError("format must be csv or json");
  if (ks != "auto" && ks != "on" && ks != "off")
    throw ConfigError("ks must be auto, on or off");
  if (mass != "identity" && mass != "diag")
    throw ConfigError("mass must be identity or diag");
  for (const std::string& s : samplers) (void)sampler_from_string(s);
}

std::uint64_t derive_cell_seed(std::uint64_t root_seed,
                               const std::string& key) {
  std::uint64_t x = root_seed;
  const std::uint64_t mixed = splitmix64(x);
  return mixed ^ fnv1a(key.data(), key.size());
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const ModelBundle bundle = build_model_bundle(spec);
  KsReference ks_ref;

  std::vector<Cell> cells;
  for (const std::string& sampler : spec.samplers)
    for (const double p0 : spec.p0_grid)
      for (int rep = 0; rep < spec.reps; ++rep) {
        Cell c;
        c.sampler = sampler;
        c.p0 = p0;
        c.rep = rep;
        c.key = spec.model + "|" + sampler + "|p0=" + io::format_double(p0) +
                "|rep=" + std::to_string(rep);
        c.seed = derive_cell_seed(spec.seed, c.key);
        cells.push_back(std::move(c));
      }

  std::vector<std::vector<ResultRow>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(spec.jobs, static_cast<int>(cells.size())));
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      slots[i] = run_cell(spec, bundle, cells[i], ks_ref);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRow> rows;
  for (auto& slot : slots)
    for (auto& row : slot) rows.push_back(std::move(row));
  return rows;
}

std::string results_csv_header() {
  return "model,sampler,group,p0,rep,cell_seed,status,reason,eps,"
         "batch_median,n_draws,accept_rate,mean_accept_prob,n_divergent,"
         "grads_warmup,grads_learn,grads_production,ess_min,"
         "min_ess_per_grad,esjd,esjd_per_grad,max_ks";
}

std::string result_to_csv_row(const ResultRow& r) {
  std::ostringstream out;
  out << csv_escape(r.model) << ',' << csv_escape(r.sampler) << ','
      << csv_escape(r.group) << ',' << io::format_double(r.p0) << ',' << r.rep
      << ',' << r.cell_seed << ',' << r.status << ',' << csv_escape(r.reason)
      << ',' << io::format_double(r.eps) << ',' << r.batch_median << ','
      << r.n_draws << ',' << io::format_double(r.accept_rate) << ','
      << io::format_double(r.mean_accept_prob) << ',' << r.n_divergent << ','
      << r.grads_warmup << ',' << r.grads_learn << ',' << r.grads_production
      << ',' << io::format_double(r.ess_min) << ','
      << io::format_double(r.min_ess_per_grad) << ','
      << io::format_double(r.esjd) << ',' << io::format_double(r.esjd_per_grad)
      << ',' << io::format_double(r.max_ks);
  return out.str();
}

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << results_csv_header() << '\n';
  for (const ResultRow& r : rows) out << result_to_csv_row(r) << '\n';
}

namespace {

ordered_json result_to_json(const ResultRow& r) {
  ordered_json j;
  j["model"] = r.model;
  j["sampler"] = r.sampler;
  j["group"] = r.group;
  j["p0"] = r.p0;
  j["rep"] = r.rep;
  j["cell_seed"] = r.cell_seed;
  j["status"] = r.status;
  j["reason"] = r.reason;
  j["eps"] = r.eps;
  j["batch_median"] = r.batch_median;
  j["n_draws"] = r.n_draws;
  j["accept_rate"] = r.accept_rate;
  j["mean_accept_prob"] = r.mean_accept_prob;
  j["n_divergent"] = r.n_divergent;
  j["grads_warmup"] = r.grads_warmup;
  j["grads_learn"] = r.grads_learn;
  j["grads_production"] = r.grads_production;
  j["ess_min"] = r.ess_min;
  j["min_ess_per_grad"] = r.min_ess_per_grad;
  j["esjd"] = r.esjd;
  j["esjd_per_grad"] = r.esjd_per_grad;
  j["max_ks"] = r.max_ks;
  return j;
}

}  // namespace

void write_results_json(const std::string& path,
                        const std::vector<ResultRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const ResultRow& r : rows) arr.push_back(result_to_json(r));
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << arr.dump(2) << '\n';
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (split_csv_quoted(line) != split_csv_quoted(results_csv_header()))
    throw DataError(path + ": unexpected results header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_quoted(line);
    if (f.size() != 22)
      throw DataError(path + ": bad results row with " +
                      std::to_string(f.size()) + " fields");
    ResultRow r;
    r.model = f[0];
    r.sampler = f[1];
    r.group = f[2];
    r.p0 = parse_double_or_nan(f[3]);
    r.rep = std::stoi(f[4]);
    r.cell_seed = std::stoull(f[5]);
    r.status = f[6];
    r.reason = f[7];
    r.eps = parse_double_or_nan(f[8]);
    r.batch_median = std::stoi(f[9]);
    r.n_draws = std::stol(f[10]);
    r.accept_rate = parse_double_or_nan(f[11]);
    r.mean_accept_prob = parse_double_or_nan(f[12]);
    r.n_divergent = std::stol(f[13]);
    r.grads_warmup = std::stoll(f[14]);
    r.grads_learn = std::stoll(f[15]);
    r.grads_production = std::stoll(f[16]);
    r.ess_min = parse_double_or_nan(f[17]);
    r.min_ess_per_grad = parse_double_or_nan(f[18]);
    r.esjd = parse_double_or_nan(f[19]);
    r.esjd_per_grad = parse_double_or_nan(f[20]);
    r.max_ks = parse_double_or_nan(f[21]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw ConfigError("summarize: no result rows");

  // keyed by (model, sampler, group), preserving first-seen order
  std::vector<std::string> order;
  struct Bucket {
    std::string model, sampler, group;
    // rep -> best-over-p0 of min ESS per gradient
    std::vector<std::pair<int, double>> per_rep_best;
    // p0 -> per-rep metric values
    std::vector<double> p0s;
    std::vector<std::vector<double>> ess_by_p0;
    std::vector<std::vector<double>> esjd_by_p0;
  };
  std::vector<Bucket> buckets;
  auto find_bucket = [&](const ResultRow& r) -> Bucket& {
    const std::string key = r.model + "|" + r.sampler + "|" + r.group;
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == key) return buckets[i];
    order.push_back(key);
    buckets.push_back(Bucket{r.model, r.sampler, r.group, {}, {}, {}, {}});
    return buckets.back();
  };

  for (const ResultRow& r : rows) {
    if (r.status != "ok") continue;
    Bucket& b = find_bucket(r);
    if (std::isfinite(r.min_ess_per_grad)) {
      bool found = false;
      for (auto& [rep, best] : b.per_rep_best)
        if (rep == r.rep) {
          best = std::max(best, r.min_ess_per_grad);
          found = true;
        }
      if (!found) b.per_rep_best.emplace_back(r.rep, r.min_ess_per_grad);
    }
    std::size_t pi = 0;
    for (; pi < b.p0s.size(); ++pi)
      if (b.p0s[pi] == r.p0) break;
    if (pi == b.p0s.size()) {
      b.p0s.push_back(r.p0);
      b.ess_by_p0.emplace_back();
      b.esjd_by_p0.emplace_back();
    }
    b.ess_by_p0[pi].push_back(r.min_ess_per_grad);
    b.esjd_by_p0[pi].push_back(r.esjd_per_grad);
  }

  std::vector<SummaryRow> out;
  for (const Bucket& b : buckets) {
    SummaryRow best;
    best.kind = "best";
    best.model = b.model;
    best.sampler = b.sampler;
    best.group = b.group;
    best.n = static_cast<long>(b.per_rep_best.size());
    if (!b.per_rep_best.empty()) {
      double sum = 0.0;
      for (const auto& [rep, v] : b.per_rep_best) sum += v;
      best.mean_best = sum / static_cast<double>(b.per_rep_best.size());
      double ss = 0.0;
      for (const auto& [rep, v] : b.per_rep_best)
        ss += (v - best.mean_best) * (v - best.mean_best);
      best.sd_best = b.per_rep_best.size() > 1
                         ? std::sqrt(ss / static_cast<double>(
                                              b.per_rep_best.size() - 1))
                         : 0.0;
    }
    out.push_back(std::move(best));
    for (std::size_t pi = 0; pi < b.p0s.size(); ++pi) {
      SummaryRow curve;
      curve.kind = "curve";
      curve.model = b.model;
      curve.sampler = b.sampler;
      curve.group = b.group;
      curve.p0 = b.p0s[pi];
      curve.n = static_cast<long>(b.ess_by_p0[pi].size());
      curve.median_min_ess_per_grad = median_of(b.ess_by_p0[pi]);
      curve.median_esjd_per_grad = median_of(b.esjd_by_p0[pi]);
      out.push_back(std::move(curve));
    }
  }
  return out;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "kind,model,sampler,group,p0,n,mean_best_min_ess_per_grad,"
         "sd_best_min_ess_per_grad,median_min_ess_per_grad,"
         "median_esjd_per_grad\n";
  for (const SummaryRow& r : rows) {
    out << r.kind << ',' << csv_escape(r.model) << ',' << csv_escape(r.sampler)
        << ',' << csv_escape(r.group) << ',' << io::format_double(r.p0) << ','
        << r.n << ',' << io::format_double(r.mean_best) << ','
        << io::format_double(r.sd_best) << ','
        << io::format_double(r.median_min_ess_per_grad) << ','
        << io::format_double(r.median_esjd_per_grad) << '\n';
  }
}

void write_summary_json(const std::string& path,
                        const std::vector<SummaryRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const SummaryRow& r : rows) {
    ordered_json j;
    j["kind"] = r.kind;
    j["model"] = r.model;
    j["sampler"] = r.sampler;
    j["group"] = r.group;
    j["p0"] = r.p0;
    j["n"] = r.n;
    j["mean_best_min_ess_per_grad"] = r.mean_best;
    j["sd_best_min_ess_per_grad"] = r.sd_best;
    j["median_min_ess_per_grad"] = r.median_min_ess_per_grad;
    j["median_esjd_per_grad"] = r.median_esjd_per_grad;
    arr.push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << arr.dump(2) << '\n';
}

}  // namespace ehmc::bench
