#include "ehmc/models/irt.hpp"

#include <cmath>

#include "ehmc/io/csv.hpp"
#include "ehmc/models/logistic.hpp"  // sigmoid, log1p_exp

namespace ehmc {

IrtData irt_simulate(int items, int persons, RngStream& rng) {
  if (items < 1 || persons < 1) throw ConfigError("irt: bad shape");
  Vector a(items), b(items), eta(persons);
  for (int i = 0; i < items; ++i) {
    a[i] = std::exp(0.5 * rng.normal());
    b[i] = std::exp(0.5 * rng.normal());
  }
  for (int j = 0; j < persons; ++j) eta[j] = rng.normal();

  IrtData data;
  data.y.resize(items, persons);
  for (int i = 0; i < items; ++i)
    for (int j = 0; j < persons; ++j) {
      const double p = sigmoid(a[i] * (eta[j] - b[i]));
      data.y(i, j) = rng.uniform() < p ? 1.0 : 0.0;
    }
  return data;
}

void save_irt_csv(const IrtData& data, const std::string& path) {
  io::write_matrix_csv(path, data.y);
}

IrtData load_irt_csv(const std::string& path) {
  return IrtData{io::read_matrix_csv(path)};
}

namespace {

// half-Cauchy(0, 2) on sigma = exp(s), including the log-scale Jacobian:
// -log p(sigma) - log sigma = log(4 + sigma^2) - s + const
double half_cauchy_term(double s, double sigma_sq) {
  return std::log(4.0 + sigma_sq) - s;
}

}  // namespace

double IrtModel::potential(const Vector& params) const {
  return eval_potential_grad_impl(params, nullptr);
}

double IrtModel::eval_potential_grad(const Vector& params, Vector& grad) const {
  grad.resize(dim());
  return eval_potential_grad_impl(params, &grad);
}

double IrtModel::eval_potential_grad_impl(const Vector& params,
                                          Vector* grad) const {
  const int I = data_->items();
  const int J = data_->persons();
  if (params.size() != 2 * I + J + 4) throw ConfigError("irt: dimension mismatch");

  const auto log_a = params.segment(0, I);
  const auto log_b = params.segment(I, I);
  const auto eta = params.segment(2 * I, J);
  const double s_eta = params[2 * I + J];
  const double s_a = params[2 * I + J + 1];
  const double mu_b = params[2 * I + J + 2];
  const double s_b = params[2 * I + J + 3];

  const double var_eta = std::exp(2.0 * s_eta);
  const double var_a = std::exp(2.0 * s_a);
  const double var_b = std::exp(2.0 * s_b);

  if (grad) grad->setZero();

  double u = 0.0;
  for (int i = 0; i < I; ++i) {
    const double a = std::exp(log_a[i]);
    const double b = std::exp(log_b[i]);
    for (int j = 0; j < J; ++j) {
      const double m = a * (eta[j] - b);
      const double yij = data_->y(i, j);
      u += log1p_exp(m) - yij * m;
      if (grad) {
        const double z = sigmoid(m) - yij;
        (*grad)[i] += z * m;           // d m / d log a_i = m
        (*grad)[I + i] -= z * a * b;   // d m / d log b_i = -a b
        (*grad)[2 * I + j] += z * a;   // d m / d eta_j   = a
      }
    }
  }

  // log-normal priors become Gaussians on the log scale; the Jacobians of
  // the log transforms cancel the 1/a, 1/b density factors
  double ssq_a = 0.0, ssq_b = 0.0, sum_b_dev = 0.0, ssq_eta = 0.0;
  for (int i = 0; i < I; ++i) {
    ssq_a += log_a[i] * log_a[i];
    const double dev = log_b[i] - mu_b;
    ssq_b += dev * dev;
    sum_b_dev += dev;
    if (grad) {
      (*grad)[i] += log_a[i] / var_a;
      (*grad)[I + i] += dev / var_b;
    }
  }
  for (int j = 0; j < J; ++j) {
    ssq_eta += eta[j] * eta[j];
    if (grad) (*grad)[2 * I + j] += eta[j] / var_eta;
  }
  u += 0.5 * ssq_a / var_a + I * s_a;
  u += 0.5 * ssq_b / var_b + I * s_b;
  u += 0.5 * ssq_eta / var_eta + J * s_eta;

  u += half_cauchy_term(s_eta, var_eta);
  u += half_cauchy_term(s_a, var_a);
  u += half_cauchy_term(s_b, var_b);
  u += mu_b * mu_b / 50.0;  // mu_b ~ Normal(0, 25)

  if (grad) {
    (*grad)[2 * I + J] = -ssq_eta / var_eta + J +
                         2.0 * var_eta / (4.0 + var_eta) - 1.0;
    (*grad)[2 * I + J + 1] = -ssq_a / var_a + I +
                             2.0 * var_a / (4.0 + var_a) - 1.0;
    (*grad)[2 * I + J + 2] = -sum_b_dev / var_b + mu_b / 25.0;
    (*grad)[2 * I + J + 3] = -ssq_b / var_b + I +
                             2.0 * var_b / (4.0 + var_b) - 1.0;
  }
  return u;
}

}  // namespace ehmc
