#include "ehmc/models/stochastic_volatility.hpp"

#include <cmath>

#include "ehmc/io/csv.hpp"

namespace ehmc {

SvData sv_simulate(int T, double phi0, double kappa0, double sigma0,
                   RngStream& rng) {
  if (T < 1) throw ConfigError("sv: series length must be >= 1");
  if (!(std::abs(phi0) < 1.0)) throw ConfigError("sv: |phi0| must be < 1");
  if (!(kappa0 > 0.0) || !(sigma0 > 0.0))
    throw ConfigError("sv: kappa0 and sigma0 must be positive");

  SvData data;
  data.y.resize(T);
  double x = std::sqrt(sigma0 * sigma0 / (1.0 - phi0 * phi0)) * rng.normal();
  data.y[0] = rng.normal() * kappa0 * std::exp(0.5 * x);
  for (int t = 1; t < T; ++t) {
    x = phi0 * x + sigma0 * rng.normal();
    data.y[t] = rng.normal() * kappa0 * std::exp(0.5 * x);
  }
  return data;
}

void save_sv_csv(const SvData& data, const std::string& path) {
  Matrix m(data.y.size(), 1);
  m.col(0) = data.y;
  io::write_matrix_csv(path, m, {"y"});
}

SvData load_sv_csv(const std::string& path) {
  const Matrix m = io::read_matrix_csv(path);
  if (m.cols() != 1) throw DataError(path + ": expected a single column");
  return SvData{m.col(0)};
}

double SvModel::potential(const Vector& params) const {
  return eval_potential_grad_impl(params, nullptr);
}

double SvModel::eval_potential_grad(const Vector& params, Vector& grad) const {
  grad.resize(dim());
  return eval_potential_grad_impl(params, &grad);
}

double SvModel::eval_potential_grad_impl(const Vector& params,
                                         Vector* grad) const {
  const int T = data_->length();
  if (params.size() != T + 3) throw ConfigError("sv: dimension mismatch");
  const Vector& y = data_->y;

  const double alpha = params[0];
  const double beta = params[1];
  const double gamma = params[2];
  const auto x = params.segment(3, T);

  const double s = std::exp(alpha);
  const double s1 = s + 1.0;
  const double phi = (s - 1.0) / s1;
  const double dphi = 2.0 * s / (s1 * s1);
  const double e2b = std::exp(-2.0 * beta);
  const double w = std::exp(-gamma);

  double u = T * beta - 20.5 * alpha + 22.5 * std::log(s1) +
             (0.5 * T + 5.0) * gamma + 0.25 * w;
  u += 2.0 * x[0] * x[0] * s * w / (s1 * s1);

  double obs_sum = 0.0;      // sum of y_t^2 e^{-2 beta - x_t}
  double trans_sq = 0.0;     // sum of (x_t - phi x_{t-1})^2
  double trans_lag = 0.0;    // sum of (x_t - phi x_{t-1}) x_{t-1}
  for (int t = 0; t < T; ++t) {
    const double q = y[t] * y[t] * e2b * std::exp(-x[t]);
    obs_sum += q;
    u += 0.5 * x[t] + 0.5 * q;
    if (grad) (*grad)[3 + t] = 0.5 - 0.5 * q;
  }
  for (int t = 1; t < T; ++t) {
    const double r = x[t] - phi * x[t - 1];
    trans_sq += r * r;
    trans_lag += r * x[t - 1];
    if (grad) {
      (*grad)[3 + t] += w * r;
      (*grad)[3 + t - 1] -= w * phi * r;
    }
  }
  u += 0.5 * w * trans_sq;

  if (grad) {
    (*grad)[0] = -20.5 + 22.5 * s / s1 +
                 2.0 * x[0] * x[0] * w * s * (1.0 - s) / (s1 * s1 * s1) -
                 w * dphi * trans_lag;
    (*grad)[1] = T - obs_sum;
    (*grad)[2] = (0.5 * T + 5.0) - 2.0 * x[0] * x[0] * s * w / (s1 * s1) -
                 0.5 * w * trans_sq - 0.25 * w;
    (*grad)[3] += 4.0 * x[0] * s * w / (s1 * s1);
  }
  return u;
}

double sv_potential_rederived(const SvData& data, const Vector& params) {
  const int T = data.length();
  if (params.size() != T + 3) throw ConfigError("sv: dimension mismatch");
  const Vector& y = data.y;

  const double alpha = params[0];
  const double beta = params[1];
  const double gamma = params[2];
  const auto x = params.segment(3, T);

  const double phi = std::tanh(0.5 * alpha);
  const double one_m_phi2 = 1.0 - phi * phi;
  const double e2b = std::exp(-2.0 * beta);
  const double w = std::exp(-gamma);

  double u = 0.0;
  for (int t = 0; t < T; ++t)  // y_t | x_t ~ N(0, kappa^2 e^{x_t})
    u += beta + 0.5 * x[t] + 0.5 * y[t] * y[t] * e2b * std::exp(-x[t]);
  for (int t = 1; t < T; ++t) {  // x_t | x_{t-1} ~ N(phi x_{t-1}, sigma^2)
    const double r = x[t] - phi * x[t - 1];
    u += 0.5 * gamma + 0.5 * w * r * r;
  }
  // stationary start: x_1 ~ N(0, sigma^2 / (1 - phi^2))
  u += 0.5 * gamma - 0.5 * std::log(one_m_phi2) +
       0.5 * x[0] * x[0] * one_m_phi2 * w;
  // (1 + phi)/2 ~ Beta(20, 1.5), transformed to alpha with its Jacobian
  u += -19.0 * std::log(0.5 * (1.0 + phi)) -
       0.5 * std::log(0.5 * (1.0 - phi)) - std::log(0.5 * one_m_phi2);
  // sigma^2 ~ scaled inverse chi-squared(10, 0.05), transformed to gamma;
  // kappa's scale prior is flat in beta
  u += 5.0 * gamma + 0.25 * w;
  return u;
}

double sv_crosscheck(const SvData& data, int checks, RngStream& rng) {
  const int d = data.length() + 3;
  const SvModel model{data};
  double worst = 0.0;
  for (int c = 0; c < checks; ++c) {
    Vector p(d), q(d);
    for (int i = 0; i < d; ++i) {
      p[i] = 0.5 * rng.normal();
      q[i] = 0.5 * rng.normal();
    }
    const double d_closed = model.potential(p) - model.potential(q);
    const double d_rederived =
        sv_potential_rederived(data, p) - sv_potential_rederived(data, q);
    worst = std::max(worst, std::abs(d_closed - d_rederived));
  }
  return worst;
}

}  // namespace ehmc
