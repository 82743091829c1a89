#include <doctest.h>

#include <random>

#include "refit.hpp"
#include "ricov/assessment.hpp"
#include "ricov/core.hpp"

using namespace ricov;

namespace {

PredictorMixture point_mass(int cells) {
  PredictorMixture m;
  m.w = VectorXd::Ones(1);
  m.mean = MatrixXd::Zero(1, cells);
  m.var = MatrixXd::Zero(1, cells);
  return m;
}

GaussianData zeros(int cells) {
  GaussianData d;
  d.A.resize(cells, 1);
  d.theta_hat = VectorXd::Zero(cells);
  d.V_hat = VectorXd::Ones(cells);
  return d;
}

HyperPosterior fake_grid(const std::vector<std::array<double, 6>>& sigmas,
                         const std::vector<double>& weights) {
  HyperPosterior hp;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    HyperGridPoint p;
    p.natural.assign(sigmas[k].begin(), sigmas[k].end());
    p.weight = weights[k];
    hp.points.push_back(p);
  }
  return hp;
}

}  // namespace

TEST_CASE("point-mass posterior") {
  const auto t = pointwise_terms(point_mass(1), zeros(1));
  CHECK(effective_parameters(t) == 0.0);
  CHECK(dic(t) == doctest::Approx(1.8378770664).epsilon(1e-10));
  CHECK(waic(t) == doctest::Approx(1.8378770664).epsilon(1e-10));
  CHECK(lcpo(t) == doctest::Approx(0.9189385332).epsilon(1e-10));

  const auto two = pointwise_terms(point_mass(2), zeros(2));
  CHECK(two.deviance_at_mean.sum() == doctest::Approx(2 * t.deviance_at_mean.sum()));
}

TEST_CASE("DIC prefers a posterior concentrated on the truth") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  const int C = 50;
  GaussianData d;
  d.A.resize(C, 1);
  d.V_hat = VectorXd::Constant(C, 0.3);
  VectorXd truth(C);
  d.theta_hat.resize(C);
  for (int c = 0; c < C; ++c) {
    truth[c] = z(rng);
    d.theta_hat[c] = truth[c] + std::sqrt(0.3) * z(rng);
  }
  PredictorMixture near, far;
  near.w = far.w = VectorXd::Ones(1);
  near.mean = truth.transpose();
  far.mean = (truth.array() + 0.8).matrix().transpose();
  near.var = far.var = MatrixXd::Constant(1, C, 0.05);
  CHECK(dic(pointwise_terms(near, d)) < dic(pointwise_terms(far, d)));
}

TEST_CASE("WAIC and LCPO against Monte-Carlo draws and row order") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  const int K = 3, C = 6;
  PredictorMixture mix;
  mix.w = VectorXd(K);
  mix.w << 0.2, 0.5, 0.3;
  mix.mean.resize(K, C);
  mix.var.resize(K, C);
  GaussianData d;
  d.A.resize(C, 1);
  d.theta_hat.resize(C);
  d.V_hat.resize(C);
  for (int c = 0; c < C; ++c) {
    d.theta_hat[c] = 2 * u(rng) - 1;
    d.V_hat[c] = 0.2 + u(rng);
    for (int k = 0; k < K; ++k) {
      mix.mean(k, c) = 2 * u(rng) - 1;
      mix.var(k, c) = 0.05 + 0.3 * u(rng);
    }
  }
  const auto t = pointwise_terms(mix, d);

  // sample-based WAIC from M draws of eta
  const int M = 50000;
  std::discrete_distribution<int> pick(mix.w.data(), mix.w.data() + K);
  std::normal_distribution<double> z;
  double lppd = 0, pw = 0;
  for (int c = 0; c < C; ++c) {
    double s = 0, s1 = 0, s2 = 0;
    for (int m = 0; m < M; ++m) {
      const int k = pick(rng);
      const double eta = mix.mean(k, c) + std::sqrt(mix.var(k, c)) * z(rng);
      const double ll = log_normal_pdf(d.theta_hat[c], eta, d.V_hat[c]);
      s += std::exp(ll);
      s1 += ll;
      s2 += ll * ll;
    }
    lppd += std::log(s / M);
    pw += (s2 - s1 * s1 / M) / (M - 1);
  }
  const double mc = -2 * (lppd - pw);
  CHECK(std::abs(waic(t) - mc) < 0.02 * std::abs(mc) + 0.05);

  PredictorMixture rev = mix;
  GaussianData drev = d;
  for (int c = 0; c < C; ++c) {
    rev.mean.col(c) = mix.mean.col(C - 1 - c);
    rev.var.col(c) = mix.var.col(C - 1 - c);
    drev.theta_hat[c] = d.theta_hat[C - 1 - c];
    drev.V_hat[c] = d.V_hat[C - 1 - c];
  }
  const auto tr = pointwise_terms(rev, drev);
  CHECK(waic(tr) == doctest::Approx(waic(t)).epsilon(1e-12));
  CHECK(lcpo(tr) == doctest::Approx(lcpo(t)).epsilon(1e-12));
  for (int c = 0; c < C; ++c) CHECK(std::isfinite(t.neg_log_cpo[c]));

  const auto ts = serial::pointwise_terms(mix, d);
  CHECK(ts.lppd == t.lppd);
  CHECK(ts.neg_log_cpo == t.neg_log_cpo);
}

TEST_CASE("leave-one-out downdating matches refits") {
  std::mt19937_64 rng(31);
  for (auto v : {InteractionVariant::kIcarAr1, InteractionVariant::kIidRw2}) {
    const auto p = oracle::small_problem(v, 14, rng);
    const SpaceTimeModel model(p.spec, p.graph);
    ExploreOptions opt;
    opt.points_per_dim = 3;
    const auto hp = explore_hyper(model, p.data, opt);
    const auto t = pointwise_terms(PredictorMixture::from(hp), p.data);
    for (int c = 0; c < p.data.size(); ++c)
      CHECK(std::abs(t.neg_log_cpo[c] -
                     oracle::refit_neg_log_cpo(model, p.data, hp.points, c)) < 1e-8);
  }
}

TEST_CASE("variance shares") {
  const auto equal = fake_grid({{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, {1, 1, 1, 1, 1, 1}},
                               {0.3, 0.7});
  for (double s : variance_decomposition(equal)) CHECK(s == doctest::Approx(1.0 / 6));
  const auto mixed = fake_grid({{1, 2, 0.3, 0.1, 3, 0.2}, {0.9, 1.5, 0.4, 0.2, 2, 0.3},
                                {1.2, 2.5, 0.2, 0.1, 3.3, 0.1}},
                               {0.2, 0.5, 0.3});
  const auto s = variance_decomposition(mixed);
  double total = 0;
  for (double x : s) total += x;
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK(s[4] > s[0]);
}
