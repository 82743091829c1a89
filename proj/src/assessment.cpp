#include "ricov/assessment.hpp"

#include <omp.h>

#include <cmath>
#include <numeric>
#include <string>

#include "ricov/core.hpp"

namespace ricov {

PredictorMixture PredictorMixture::from(const HyperPosterior& hp) {
  const int K = static_cast<int>(hp.points.size());
  if (K == 0 || hp.moments.size() != hp.points.size())
    throw InputError("hyperparameter posterior carries no grid moments");
  const int C = static_cast<int>(hp.moments.front().eta_mean.size());
  PredictorMixture m;
  m.w.resize(K);
  m.mean.resize(K, C);
  m.var.resize(K, C);
  for (int k = 0; k < K; ++k) {
    m.w[k] = hp.points[k].weight;
    m.mean.row(k) = hp.moments[k].eta_mean.transpose();
    m.var.row(k) = hp.moments[k].eta_var.transpose();
  }
  return m;
}

namespace {

void cell_terms(const PredictorMixture& mix, const GaussianData& data, int c, PointwiseTerms& t) {
  const double y = data.theta_hat[c], V = data.V_hat[c];
  const int K = mix.num_points();

  double eta_bar = 0, mean_dev = 0, Eu = 0, Eu2 = 0;
  double lppd_max = -INFINITY, cpo_max = -INFINITY;
  std::vector<double> log_pred(K), log_inv(K);
  for (int k = 0; k < K; ++k) {
    const double w = mix.w[k], m = mix.mean(k, c), s2 = mix.var(k, c);
    const double d = y - m;
    eta_bar += w * m;
    mean_dev += w * (kLog2Pi + std::log(V) + (d * d + s2) / V);
    const double u1 = d * d + s2;
    Eu += w * u1;
    Eu2 += w * (4 * d * d * s2 + 2 * s2 * s2 + u1 * u1);
    log_pred[k] = std::log(w) + log_normal_pdf(y, m, V + s2);
    lppd_max = std::max(lppd_max, log_pred[k]);

    double s2_loo = 0, m_loo = m;  // a point mass does not depend on the data
    if (s2 > 0) {
      const double prec_loo = 1.0 / s2 - 1.0 / V;
      if (!(prec_loo > 0) || !std::isfinite(prec_loo))
        throw NumericalError("leave-one-out downdate gives a non-positive predictive variance "
                             "for cell " + std::to_string(c));
      s2_loo = 1.0 / prec_loo;
      m_loo = s2_loo * (m / s2 - y / V);
    }
    log_inv[k] = std::log(w) - log_normal_pdf(y, m_loo, V + s2_loo);
    cpo_max = std::max(cpo_max, log_inv[k]);
  }
  double s1 = 0, s2 = 0;
  for (int k = 0; k < K; ++k) {
    s1 += std::exp(log_pred[k] - lppd_max);
    s2 += std::exp(log_inv[k] - cpo_max);
  }
  const double d_bar = y - eta_bar;
  t.deviance_at_mean[c] = kLog2Pi + std::log(V) + d_bar * d_bar / V;
  t.mean_deviance[c] = mean_dev;
  t.lppd[c] = lppd_max + std::log(s1);
  t.var_loglik[c] = std::max(0.0, Eu2 - Eu * Eu) / (4 * V * V);
  t.neg_log_cpo[c] = cpo_max + std::log(s2);
}

PointwiseTerms allocate(int C) {
  PointwiseTerms t;
  t.deviance_at_mean.resize(C);
  t.mean_deviance.resize(C);
  t.lppd.resize(C);
  t.var_loglik.resize(C);
  t.neg_log_cpo.resize(C);
  return t;
}

void check_sizes(const PredictorMixture& mix, const GaussianData& data) {
  if (mix.num_cells() != data.size())
    throw InputError("predictor mixture and data disagree on the number of cells");
}

}  // namespace

PointwiseTerms pointwise_terms(const PredictorMixture& mix, const GaussianData& data,
                               int threads) {
  check_sizes(mix, data);
  const int C = data.size();
  PointwiseTerms t = allocate(C);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  std::string error;
  bool failed = false;
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int c = 0; c < C; ++c) {
    try {
      cell_terms(mix, data, c, t);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw NumericalError(error);
  return t;
}

namespace serial {
PointwiseTerms pointwise_terms(const PredictorMixture& mix, const GaussianData& data) {
  check_sizes(mix, data);
  PointwiseTerms t = allocate(data.size());
  for (int c = 0; c < data.size(); ++c) cell_terms(mix, data, c, t);
  return t;
}
}  // namespace serial

double effective_parameters(const PointwiseTerms& t) {
  return t.mean_deviance.sum() - t.deviance_at_mean.sum();
}

double dic(const PointwiseTerms& t) {
  return t.deviance_at_mean.sum() + 2 * effective_parameters(t);
}

double waic(const PointwiseTerms& t) { return -2 * (t.lppd.sum() - t.var_loglik.sum()); }

double lcpo(const PointwiseTerms& t) {
  if (t.neg_log_cpo.size() == 0) throw InputError("LCPO of an empty dataset");
  return t.neg_log_cpo.mean();
}

std::array<double, 6> variance_decomposition(const HyperPosterior& hp) {
  if (hp.points.empty()) throw InputError("empty hyperparameter grid");
  std::vector<double> w;
  for (const auto& p : hp.points) w.push_back(p.weight);
  std::array<double, 6> med{};
  double total = 0;
  for (int j = 0; j < 6; ++j) {
    std::vector<double> var;
    for (const auto& p : hp.points) var.push_back(p.natural[j] * p.natural[j]);
    med[j] = weighted_quantile(var, w, 0.5);
    total += med[j];
  }
  for (double& m : med) m /= total;
  return med;
}

AssessmentReport assess(const HyperPosterior& hp, const GaussianData& data, int threads) {
  const auto t = pointwise_terms(PredictorMixture::from(hp), data, threads);
  AssessmentReport r;
  r.dic = dic(t);
  r.p_d = effective_parameters(t);
  r.waic = waic(t);
  r.lcpo = lcpo(t);
  r.variance_shares = variance_decomposition(hp);
  return r;
}

}  // namespace ricov
