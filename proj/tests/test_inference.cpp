#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "oracles.hpp"
#include "random_models.hpp"
#include "ricov/core.hpp"
#include "ricov/inference.hpp"
#include "ricov/sparse_cholesky.hpp"

using namespace ricov;

namespace {

SpMat dense_to_sparse(const MatrixXd& M) { return M.sparseView(); }

// tau * I_n prior, y_j ~ N(x_j, 1), Gamma(a, b) prior on tau.
class GammaToy final : public LatentModel {
 public:
  GammaToy(int n, double a, double b) : n_(n), a_(a), b_(b) {}
  int latent_dim() const override { return n_; }
  int hyper_dim() const override { return 1; }
  std::vector<std::string> hyper_names() const override { return {"log_tau"}; }
  PriorPrecision prior_precision(std::span<const double> psi) const override {
    PriorPrecision p;
    p.Q = std::exp(psi[0]) * dense_to_sparse(MatrixXd::Identity(n_, n_));
    p.rank = n_;
    p.log_pdet = n_ * psi[0];
    return p;
  }
  double log_hyperprior(std::span<const double> psi) const override {
    return a_ * std::log(b_) - std::lgamma(a_) + a_ * psi[0] - b_ * std::exp(psi[0]);
  }
  const ConstraintSet& constraints() const override { return none_; }
  VectorXd initial_hyper() const override { return VectorXd::Zero(1); }

 private:
  int n_;
  double a_, b_;
  ConstraintSet none_;
};

}  // namespace

TEST_CASE("scalar conjugate posterior") {
  const SpMat Q = dense_to_sparse(MatrixXd::Identity(1, 1));
  const SpMat A = dense_to_sparse(MatrixXd::Identity(1, 1));
  const auto post = conditional_posterior(Q, {}, A, VectorXd::Constant(1, 2.0),
                                          VectorXd::Constant(1, 1.0));
  CHECK(post.mean()[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(post.covariance()(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("scalar conjugate log marginal") {
  for (double tau : {0.1, 1.0, 7.5}) {
    for (double y : {-1.3, 0.0, 2.4}) {
      oracle::RandomModel m;
      m.Q = dense_to_sparse(MatrixXd::Identity(1, 1));
      m.A = m.Q;
      m.theta = VectorXd::Constant(1, y);
      m.V = VectorXd::Ones(1);
      m.rank = 1;
      const oracle::ScaledModel model(m);
      const double psi = std::log(tau);
      const double got = log_marginal_likelihood(model, {&psi, 1}, model.data());
      CHECK(std::abs(got - log_normal_pdf(y, 0.0, 1.0 + 1.0 / tau)) < 1e-10);
    }
  }
}

TEST_CASE("random models against the dense constrained oracle") {
  std::mt19937_64 rng(99);
  for (int r = 0; r < 60; ++r) {
    const bool proper = r % 2 == 1;
    const auto m = oracle::random_model(rng, proper);
    const MatrixXd Q(m.Q), A(m.A), C(m.constraints.C);
    const auto dense = oracle::constrained_posterior(Q, C, A, m.theta, m.V);
    const auto post = conditional_posterior(m.Q, m.constraints, m.A, m.theta, m.V);
    CAPTURE(r);
    CHECK((post.mean() - dense.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.covariance() - dense.cov).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((post.marginal_variances() - dense.cov.diagonal()).cwiseAbs().maxCoeff() < 1e-8);
    for (int c = 0; c < A.rows(); ++c) {
      Eigen::SparseVector<double> a = m.A.row(c).transpose();
      const auto [mean, var] = post.linear_moments(a);
      CHECK(std::abs(mean - A.row(c).dot(dense.mean)) < 1e-8);
      CHECK(std::abs(var - A.row(c) * dense.cov * A.row(c).transpose()) < 1e-8);
    }
    const VectorXd a = VectorXd::LinSpaced(Q.rows(), -1, 1);
    CHECK(std::abs(post.variance_of(a) - a.dot(dense.cov * a)) < 1e-8);

    const oracle::ScaledModel model(m);
    const double psi = 0.3;
    const double got = log_marginal_likelihood(model, {&psi, 1}, model.data());
    const double want = oracle::log_marginal(std::exp(psi) * Q, C, A, m.theta, m.V);
    CHECK(std::abs(got - want) < 1e-8);
  }
}

TEST_CASE("no observations leave the prior") {
  std::mt19937_64 rng(5);
  for (int r = 0; r < 10; ++r) {
    auto m = oracle::random_model(rng, r % 2 == 0, 20, 0);
    m.A.resize(0, m.Q.rows());
    m.theta.resize(0);
    m.V.resize(0);
    const MatrixXd Q(m.Q), C(m.constraints.C);
    const MatrixXd N = oracle::constraint_basis(C, static_cast<int>(Q.rows()));
    const MatrixXd prior_cov = N * (N.transpose() * Q * N).inverse() * N.transpose();
    const auto post = conditional_posterior(m.Q, m.constraints, m.A, m.theta, m.V);
    CHECK(post.mean().norm() < 1e-12);
    CHECK((post.covariance() - prior_cov).cwiseAbs().maxCoeff() < 1e-8);
    const oracle::ScaledModel model(m);
    const double psi = -0.4;
    CHECK(std::abs(log_marginal_likelihood(model, {&psi, 1}, model.data())) < 1e-9);
    CHECK(log_marginal_hyper(model, {&psi, 1}, model.data()) ==
          doctest::Approx(model.log_hyperprior({&psi, 1})));
  }
}

TEST_CASE("data row order does not matter") {
  std::mt19937_64 rng(17);
  const auto m = oracle::random_model(rng, false, 25, 30);
  auto shuffled = m;
  const int rows = static_cast<int>(m.A.rows());
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P(rows);
  P.setIdentity();
  std::shuffle(P.indices().data(), P.indices().data() + rows, rng);
  shuffled.A = P * m.A;
  shuffled.theta = P * m.theta;
  shuffled.V = P * m.V;
  const oracle::ScaledModel a(m), b(shuffled);
  const double psi = 0.2;
  CHECK(log_marginal_hyper(a, {&psi, 1}, a.data()) ==
        doctest::Approx(log_marginal_hyper(b, {&psi, 1}, b.data())).epsilon(1e-12));
}

TEST_CASE("selected inverse matches the dense inverse on the factor pattern") {
  std::mt19937_64 rng(23);
  for (int r = 0; r < 10; ++r) {
    const auto m = oracle::random_model(rng, true, 30, 40);
    SpMat P = m.Q + SpMat(m.A.transpose() * m.A);
    P.makeCompressed();
    SparseCholesky chol;
    REQUIRE(chol.factorize(P));
    const MatrixXd S = MatrixXd(P).inverse();
    const auto sel = chol.selected_inverse();
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it) {
        const int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
        CHECK(std::abs(sel(i, j) - S(i, j)) < 1e-10);
      }
    CHECK((sel.diagonal() - S.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(chol.log_det() == doctest::Approx(std::log(MatrixXd(P).determinant())));
  }
}

TEST_CASE("factorization failure and pattern changes") {
  SparseCholesky chol;
  MatrixXd M(2, 2);
  M << 1, 2, 2, 1;
  CHECK_FALSE(chol.factorize(M.sparseView()));
  MatrixXd G(3, 3);
  G << 4, 1, 0, 1, 3, 0, 0, 0, 2;
  REQUIRE(chol.factorize(G.sparseView()));
  CHECK((chol.solve(VectorXd(VectorXd::Ones(3))) - G.inverse() * VectorXd::Ones(3)).norm() < 1e-14);
  G(0, 2) = G(2, 0) = 0.5;
  REQUIRE(chol.factorize(G.sparseView()));
  CHECK((chol.solve(VectorXd(VectorXd::Ones(3))) - G.inverse() * VectorXd::Ones(3)).norm() < 1e-14);
}

TEST_CASE("improper posterior is reported") {
  // an unconstrained ICAR with no data
  const auto g = AdjacencyGraph::lattice(1, 3);
  const auto s = structure_matrix(StructureKind::kIcar, 3, &g);
  const SpMat A(0, 3);
  CHECK_THROWS_AS(conditional_posterior(s.Q, {}, A, VectorXd(), VectorXd()), NumericalError);
}

TEST_CASE("constrained samples") {
  std::mt19937_64 gen(41);
  const auto m = oracle::random_model(gen, false, 20, 25);
  const auto post = conditional_posterior(m.Q, m.constraints, m.A, m.theta, m.V);
  const MatrixXd C(m.constraints.C);
  std::mt19937_64 rng(1);
  const int M = 50000;
  VectorXd sum = VectorXd::Zero(post.dim());
  double worst = 0;
  for (int i = 0; i < M; ++i) {
    const VectorXd x = post.sample(rng);
    if (C.rows() > 0) worst = std::max(worst, (C * x).cwiseAbs().maxCoeff());
    sum += x;
  }
  CHECK(worst < 1e-8);
  const VectorXd mean = sum / M;
  const VectorXd se = (post.marginal_variances() / M).cwiseSqrt();
  for (int i = 0; i < post.dim(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(mean[i] - post.mean()[i]) <= 3 * se[i] + 1e-12);
  }
}

TEST_CASE("grid integration against quadrature") {
  const int n = 10;
  const GammaToy model(n, 2.0, 1.0);
  GaussianData data;
  data.A = dense_to_sparse(MatrixXd::Identity(n, n));
  data.theta_hat = VectorXd::LinSpaced(n, -1.5, 2.0);
  data.V_hat = VectorXd::Ones(n);

  ExploreOptions opt;
  opt.points_per_dim = 241;
  opt.half_width = 8.0;
  opt.max_log_drop = 60.0;
  const auto hp = explore_hyper(model, data, opt);
  CHECK(hp.mode_gradient_norm < 1e-5);
  double wsum = 0, mean_tau = 0;
  for (const auto& p : hp.points) {
    wsum += p.weight;
    mean_tau += p.weight * std::exp(p.psi[0]);
  }
  CHECK(std::abs(wsum - 1.0) < 1e-12);

  // log p(y | tau) = sum log N(y_j; 0, 1 + 1/tau)
  auto log_post = [&](double t) {
    double lp = model.log_hyperprior({&t, 1});
    for (int j = 0; j < n; ++j)
      lp += log_normal_pdf(data.theta_hat[j], 0.0, 1.0 + std::exp(-t));
    return lp - hp.mode_log_posterior;
  };
  using boost::math::quadrature::gauss_kronrod;
  double err = 0;
  const double z = gauss_kronrod<double, 61>::integrate(
      [&](double t) { return std::exp(log_post(t)); }, -20.0, 20.0, 20, 1e-14, &err);
  const double m1 = gauss_kronrod<double, 61>::integrate(
      [&](double t) { return std::exp(t + log_post(t)); }, -20.0, 20.0, 20, 1e-14, &err);
  CHECK(std::abs(mean_tau - m1 / z) < 1e-4);
}

TEST_CASE("posterior sampling is deterministic and thread independent") {
  std::mt19937_64 gen(8);
  const oracle::ScaledModel model(oracle::random_model(gen, false, 20, 30));
  const auto data = model.data();
  ExploreOptions opt;
  opt.points_per_dim = 7;
  const auto hp = explore_hyper(model, data, opt);
  const MatrixXd a = sample_posterior(model, data, hp.points, 300, 42);
  const MatrixXd b = sample_posterior(model, data, hp.points, 300, 42);
  const MatrixXd c = serial::sample_posterior(model, data, hp.points, 300, 42);
  const MatrixXd d = sample_posterior(model, data, hp.points, 300, 43);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a != d);
  const MatrixXd C(model.constraints().C);
  if (C.rows() > 0) CHECK((C * a).cwiseAbs().maxCoeff() < 1e-8);

  std::vector<VectorXd> psis;
  for (const auto& p : hp.points) psis.push_back(p.psi);
  const auto pe = evaluate_points(model, data, psis, true, {});
  const auto se = serial::evaluate_points(model, data, psis, true, {});
  for (std::size_t i = 0; i < psis.size(); ++i) {
    CHECK(pe[i].log_posterior == se[i].log_posterior);
    CHECK(pe[i].moments->eta_var == se[i].moments->eta_var);
  }
}

TEST_CASE("quantile helpers") {
  std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(nearest_rank_quantile(v, 0.5) == 3);
  CHECK(nearest_rank_quantile(v, 0.2) == 1);
  CHECK(nearest_rank_quantile(v, 1.0) == 5);
  const std::vector<double> w{0.3, 0.7}, mu{0.0, 0.0}, var{1.0, 1.0};
  CHECK(mixture_quantile(w, mu, var, 0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  const std::vector<double> vals{1, 2, 3}, wts{1, 1, 1};
  CHECK(weighted_quantile(vals, wts, 0.5) == doctest::Approx(2.0));
}
