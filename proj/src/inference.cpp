#include "ricov/inference.hpp"

#include <gsl/gsl_blas.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ricov/core.hpp"

namespace ricov {

void GaussianData::validate(int latent_dim) const {
  if (A.rows() != theta_hat.size() || V_hat.size() != theta_hat.size())
    throw InputError("data: A, theta_hat and V_hat sizes disagree");
  if (A.cols() != latent_dim)
    throw InputError("data: A has " + std::to_string(A.cols()) + " columns, latent dim is " +
                     std::to_string(latent_dim));
  for (Eigen::Index i = 0; i < V_hat.size(); ++i)
    if (!(V_hat[i] > 0) || !std::isfinite(V_hat[i]) || !std::isfinite(theta_hat[i]))
      throw InputError("data: V_hat must be positive and finite, theta_hat finite (row " +
                       std::to_string(i) + ")");
}

namespace {

using RowSpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double llt_log_det(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Which latent block fails to be positive definite on its own.
std::string diagnose(const SpMat& Q, std::span<const LatentBlock> blocks) {
  for (const auto& b : blocks) {
    SpMat sub = Q.block(b.offset, b.offset, b.size, b.size);
    Eigen::SimplicialLLT<SpMat> llt(sub);
    if (llt.info() != Eigen::Success) return "block '" + b.name + "' is singular";
  }
  return blocks.empty() ? "singular precision"
                        : "every block is positive definite alone; the singular direction "
                          "couples several blocks";
}

}  // namespace

GaussianPosterior conditional_posterior(const SpMat& Q_prior, const ConstraintSet& constraints,
                                        const SpMat& A, const VectorXd& theta_hat,
                                        const VectorXd& V_hat, const PosteriorOptions& options,
                                        SparseCholesky* cache,
                                        std::span<const LatentBlock> blocks) {
  const int n = static_cast<int>(Q_prior.rows());
  const int k = constraints.size();
  GaussianData{A, theta_hat, V_hat}.validate(n);
  if (k > 0 && constraints.C.cols() != n)
    throw InputError("constraint matrix has wrong number of columns");

  GaussianPosterior post;
  const SpMat At = A.transpose();
  const SpMat AtD = At * V_hat.cwiseInverse().asDiagonal();
  post.precision_ = Q_prior + SpMat(AtD * A);
  post.precision_.makeCompressed();
  const VectorXd b = AtD * theta_hat;
  post.constraints_ = constraints;

  SparseCholesky local;
  SparseCholesky* chol = cache ? cache : &local;

  const bool any_unfriendly = std::any_of(constraints.fill_friendly.begin(),
                                          constraints.fill_friendly.end(),
                                          [](bool f) { return !f; });
  auto augmented = [&](bool all) {
    if (k == 0) return post.precision_;
    std::vector<Eigen::Triplet<double>> t;
    int r = 0;
    for (int j = 0; j < k; ++j) {
      if (!all && !constraints.fill_friendly[j]) continue;
      for (RowSpMat::InnerIterator it(constraints.C, j); it; ++it)
        t.emplace_back(r, static_cast<int>(it.col()), it.value());
      ++r;
    }
    SpMat Cs(r, n);
    Cs.setFromTriplets(t.begin(), t.end());
    SpMat Q = post.precision_ + options.kappa * SpMat(Cs.transpose() * Cs);
    Q.makeCompressed();
    return Q;
  };

  bool all = options.augment_all || !any_unfriendly;
  SpMat Qaug = augmented(all);
  bool ok = chol->factorize(Qaug);
  if (ok && !all && n > 0) {
    // near-zero pivot counts as failure
    const double scale = Qaug.diagonal().cwiseAbs().maxCoeff();
    ok = chol->min_pivot() > 1e-10 * scale;
  }
  if (!ok && !all) {
    all = true;
    Qaug = augmented(true);
    ok = chol->factorize(Qaug);
  }
  if (!ok)
    throw NumericalError("posterior precision is not positive definite after constraint "
                         "handling: " + diagnose(Qaug, blocks));
  post.augmented_all_ = all && any_unfriendly;
  post.chol_ = cache ? std::make_shared<SparseCholesky>(*cache)
                     : std::make_shared<SparseCholesky>(std::move(local));
  chol = post.chol_.get();

  post.unconstrained_ = chol->solve(b);
  post.mean_ = post.unconstrained_;
  if (k > 0) {
    const MatrixXd Ct = MatrixXd(constraints.C.transpose());
    post.G_ = chol->forward(Ct);
    post.W_.compute(post.G_.transpose() * post.G_);
    if (post.W_.info() != Eigen::Success)
      throw NumericalError("constraint covariance C Q^-1 C^T is not positive definite; "
                           "are the constraints linearly dependent?");
    post.log_det_W_ = llt_log_det(post.W_);
    Eigen::LLT<MatrixXd> cct(MatrixXd(constraints.C * constraints.C.transpose()));
    post.log_det_CCt_ = llt_log_det(cct);
    post.mean_ -= chol->solve_lt(
        MatrixXd(post.G_ * post.W_.solve(constraints.C * post.unconstrained_))).col(0);
  }
  return post;
}

GaussianPosterior conditional_posterior(const LatentModel& model, std::span<const double> psi,
                                        const GaussianData& data,
                                        const PosteriorOptions& options, SparseCholesky* cache) {
  const auto prior = model.prior_precision(psi);
  const auto blocks = model.blocks();
  return conditional_posterior(prior.Q, model.constraints(), data.A, data.theta_hat,
                               data.V_hat, options, cache, blocks);
}

const SparseCholesky::SelectedInverse& GaussianPosterior::selected() const {
  if (!selected_)
    selected_ = std::make_shared<SparseCholesky::SelectedInverse>(chol_->selected_inverse());
  return *selected_;
}

const MatrixXd& GaussianPosterior::constraint_solve() const {
  if (!V_) V_ = std::make_shared<MatrixXd>(chol_->solve_lt(G_));
  return *V_;
}

std::pair<double, double> GaussianPosterior::linear_moments(
    const Eigen::SparseVector<double>& a) const {
  const auto& S = selected();
  double m = 0, v = 0;
  for (Eigen::SparseVector<double>::InnerIterator i(a); i; ++i) {
    m += i.value() * mean_[i.index()];
    for (Eigen::SparseVector<double>::InnerIterator j(a); j; ++j)
      v += i.value() * j.value() *
           S(static_cast<int>(i.index()), static_cast<int>(j.index()));
  }
  if (num_constraints() > 0) {
    const MatrixXd& V = constraint_solve();
    VectorXd va = VectorXd::Zero(V.cols());
    for (Eigen::SparseVector<double>::InnerIterator i(a); i; ++i)
      va += i.value() * V.row(i.index()).transpose();
    v -= W_.matrixL().solve(va).squaredNorm();
  }
  return {m, v};
}

double GaussianPosterior::variance_of(const VectorXd& a) const {
  double v = a.dot(chol_->solve(a));
  if (num_constraints() > 0)
    v -= W_.matrixL().solve(constraint_solve().transpose() * a).squaredNorm();
  return v;
}

VectorXd GaussianPosterior::marginal_variances() const {
  VectorXd d = selected().diagonal();
  if (num_constraints() > 0) {
    const MatrixXd G = W_.matrixL().solve(constraint_solve().transpose());  // k x n
    d -= G.colwise().squaredNorm().transpose();
  }
  return d;
}

MatrixXd GaussianPosterior::covariance() const {
  MatrixXd S = chol_->solve(MatrixXd(MatrixXd::Identity(dim(), dim())));
  if (num_constraints() > 0) {
    const MatrixXd& V = constraint_solve();
    S -= V * W_.solve(V.transpose());
  }
  return 0.5 * (S + S.transpose());
}

VectorXd GaussianPosterior::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) z[i] = normal(rng);
  VectorXd x = unconstrained_ + chol_->solve_lt(z);
  if (num_constraints() > 0)
    x -= chol_->solve_lt(MatrixXd(G_ * W_.solve(constraints_.C * x))).col(0);
  return x;
}

double GaussianPosterior::log_density_at_mean() const {
  const int n = dim(), k = num_constraints();
  return -0.5 * (n - k) * kLog2Pi + 0.5 * chol_->log_det() + 0.5 * log_det_W_ -
         0.5 * log_det_CCt_;
}

namespace {

struct MarginalParts {
  double log_lik = 0;       // log p(theta_hat | psi)
  double log_hyper = 0;     // log pi(psi)
  bool augmented_all = false;
  long nnz_factor = 0;
  std::optional<GaussianPosterior> posterior;
};

MarginalParts marginal_parts(const LatentModel& model, std::span<const double> psi,
                             const GaussianData& data, const PosteriorOptions& options,
                             SparseCholesky* cache, bool keep_posterior) {
  const auto prior = model.prior_precision(psi);
  const auto& cons = model.constraints();
  const auto blocks = model.blocks();
  auto post = conditional_posterior(prior.Q, cons, data.A, data.theta_hat, data.V_hat, options,
                                    cache, blocks);
  const VectorXd& x = post.mean();
  const int n = post.dim(), k = post.num_constraints();

  double log_prior = -0.5 * x.dot(prior.Q * x);
  if (prior.intrinsic) {
    log_prior += -0.5 * prior.rank * kLog2Pi + 0.5 * prior.log_pdet;
  } else {
    log_prior += -0.5 * n * kLog2Pi + 0.5 * prior.log_pdet;
    if (k > 0) {
      SparseCholesky pc;
      if (!pc.factorize(prior.Q))
        throw NumericalError("proper prior precision is not positive definite");
      const MatrixXd U = pc.solve(MatrixXd(cons.C.transpose()));
      Eigen::LLT<MatrixXd> M(cons.C * U);
      Eigen::LLT<MatrixXd> cct(MatrixXd(cons.C * cons.C.transpose()));
      log_prior += 0.5 * k * kLog2Pi + 0.5 * llt_log_det(M) - 0.5 * llt_log_det(cct);
    }
  }

  const VectorXd eta = data.A * x;
  double log_data = 0;
  for (int c = 0; c < data.size(); ++c)
    log_data += log_normal_pdf(data.theta_hat[c], eta[c], data.V_hat[c]);

  MarginalParts out;
  out.log_lik = log_prior + log_data - post.log_density_at_mean();
  out.log_hyper = model.log_hyperprior(psi);
  out.augmented_all = post.augmented_all();
  out.nnz_factor = post.nnz_factor();
  if (keep_posterior) out.posterior = std::move(post);
  return out;
}

PointMoments moments_of(const GaussianPosterior& post, const GaussianData& data) {
  PointMoments m;
  m.latent_mean = post.mean();
  const RowSpMat Ar = data.A;
  m.eta_mean.resize(data.size());
  m.eta_var.resize(data.size());
  for (int c = 0; c < data.size(); ++c) {
    Eigen::SparseVector<double> a = Ar.row(c).transpose();
    const auto [mean, var] = post.linear_moments(a);
    m.eta_mean[c] = mean;
    m.eta_var[c] = var;
  }
  return m;
}

PointEvaluation evaluate_one(const LatentModel& model, const GaussianData& data,
                             const VectorXd& psi, bool with_moments,
                             const PosteriorOptions& options, SparseCholesky* cache) {
  const std::span<const double> s(psi.data(), static_cast<std::size_t>(psi.size()));
  auto parts = marginal_parts(model, s, data, options, cache, with_moments);
  PointEvaluation ev;
  ev.log_posterior = parts.log_lik + parts.log_hyper;
  if (with_moments) ev.moments = moments_of(*parts.posterior, data);
  return ev;
}

}  // namespace

double log_marginal_likelihood(const LatentModel& model, std::span<const double> psi,
                               const GaussianData& data, const PosteriorOptions& options,
                               SparseCholesky* cache) {
  return marginal_parts(model, psi, data, options, cache, false).log_lik;
}

double log_marginal_hyper(const LatentModel& model, std::span<const double> psi,
                          const GaussianData& data, const PosteriorOptions& options,
                          SparseCholesky* cache) {
  const auto p = marginal_parts(model, psi, data, options, cache, false);
  return p.log_lik + p.log_hyper;
}

VectorXd log_posterior_gradient(const LatentModel& model, std::span<const double> psi,
                                const GaussianData& data, const PosteriorOptions& options,
                                SparseCholesky* cache, double step) {
  const int d = static_cast<int>(psi.size());
  VectorXd g(d);
  std::vector<double> p(psi.begin(), psi.end());
  auto f = [&](int j, double delta) {
    p[j] = psi[j] + delta;
    const double v = log_marginal_hyper(model, p, data, options, cache);
    p[j] = psi[j];
    return v;
  };
  for (int j = 0; j < d; ++j)
    g[j] = (-f(j, 2 * step) + 8 * f(j, step) - 8 * f(j, -step) + f(j, -2 * step)) / (12 * step);
  return g;
}

namespace {

struct OptContext {
  const LatentModel* model;
  const GaussianData* data;
  PosteriorOptions options;
  SparseCholesky cache;
  long evaluations = 0;
};

double neg_log_post(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<OptContext*>(params);
  const std::span<const double> psi(v->data, v->size);
  ++ctx->evaluations;
  try {
    const double f = -log_marginal_hyper(*ctx->model, psi, *ctx->data, ctx->options, &ctx->cache);
    return std::isfinite(f) ? f : GSL_POSINF;
  } catch (const NumericalError&) {
    return GSL_POSINF;
  }
}

void neg_log_post_grad(const gsl_vector* v, void* params, gsl_vector* g) {
  const double h = 1e-4;
  std::vector<double> p(v->data, v->data + v->size);
  gsl_vector_view pv = gsl_vector_view_array(p.data(), p.size());
  for (std::size_t j = 0; j < v->size; ++j) {
    p[j] = v->data[j] + h;
    const double fp = neg_log_post(&pv.vector, params);
    p[j] = v->data[j] - h;
    const double fm = neg_log_post(&pv.vector, params);
    p[j] = v->data[j];
    gsl_vector_set(g, j, (fp - fm) / (2 * h));
  }
}

void neg_log_post_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = neg_log_post(v, params);
  neg_log_post_grad(v, params, g);
}

// Hessian of -log posterior by central differences.
MatrixXd numeric_hessian(const LatentModel& model, const VectorXd& psi, const GaussianData& data,
                         const PosteriorOptions& options, SparseCholesky* cache, double h) {
  const int d = static_cast<int>(psi.size());
  std::vector<double> p(psi.data(), psi.data() + d);
  auto f = [&]() { return -log_marginal_hyper(model, p, data, options, cache); };
  const double f0 = f();
  MatrixXd H(d, d);
  for (int i = 0; i < d; ++i) {
    p[i] = psi[i] + h;
    const double fp = f();
    p[i] = psi[i] - h;
    const double fm = f();
    p[i] = psi[i];
    H(i, i) = (fp - 2 * f0 + fm) / (h * h);
    for (int j = 0; j < i; ++j) {
      double acc = 0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          p[i] = psi[i] + si * h;
          p[j] = psi[j] + sj * h;
          acc += si * sj * f();
        }
      p[i] = psi[i];
      p[j] = psi[j];
      H(i, j) = H(j, i) = acc / (4 * h * h);
    }
  }
  return H;
}

VectorXd find_mode(const LatentModel& model, const GaussianData& data,
                   const ExploreOptions& options, OptContext& ctx, int& iterations,
                   double& grad_norm, std::ostringstream& trace) {
  const int d = model.hyper_dim();
  VectorXd psi = model.initial_hyper();

  gsl_set_error_handler_off();
  gsl_multimin_function_fdf fdf;
  fdf.n = static_cast<std::size_t>(d);
  fdf.f = &neg_log_post;
  fdf.df = &neg_log_post_grad;
  fdf.fdf = &neg_log_post_fdf;
  fdf.params = &ctx;
  gsl_vector* x = gsl_vector_alloc(fdf.n);
  for (int j = 0; j < d; ++j) gsl_vector_set(x, j, psi[j]);
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, fdf.n);
  gsl_multimin_fdfminimizer_set(s, &fdf, x, 0.1, 0.1);
  int status = GSL_CONTINUE;
  int iter = 0;
  while (status == GSL_CONTINUE && iter < options.max_iter) {
    ++iter;
    status = gsl_multimin_fdfminimizer_iterate(s);
    trace << "bfgs " << iter << " f=" << s->f << " |g|=" << gsl_blas_dnrm2(s->gradient) << "\n";
    if (status) break;
    status = gsl_multimin_test_gradient(s->gradient, std::max(options.grad_tol * 0.1, 1e-2));
  }
  for (int j = 0; j < d; ++j) psi[j] = gsl_vector_get(s->x, j);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(x);

  // Newton polish with a fourth-order gradient. The Hessian is reused while
  // the gradient norm at least halves per step.
  auto objective = [&](const VectorXd& p) {
    return -log_marginal_hyper(model, std::span<const double>(p.data(), d), data,
                               ctx.options, &ctx.cache);
  };
  auto gradient = [&](const VectorXd& p) -> VectorXd {
    return -log_posterior_gradient(model, std::span<const double>(p.data(), d), data,
                                   ctx.options, &ctx.cache);
  };
  VectorXd g = gradient(psi);
  MatrixXd vecs;
  VectorXd lam;
  bool fresh = false;
  for (int it = 0; it < 30 && g.norm() >= options.grad_tol; ++it) {
    if (!fresh) {
      const MatrixXd H =
          numeric_hessian(model, psi, data, ctx.options, &ctx.cache, options.hessian_step);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
      vecs = es.eigenvectors();
      lam = es.eigenvalues().cwiseMax(1e-3);
      fresh = true;
    }
    const VectorXd step = -vecs * (vecs.transpose() * g).cwiseQuotient(lam);
    const double f0 = objective(psi);
    double t = 1.0;
    VectorXd next = psi + step;
    double f = objective(next);
    while (t > 1e-4 && !(f <= f0 + 1e-10)) {
      t *= 0.5;
      next = psi + t * step;
      f = objective(next);
    }
    const VectorXd g_next = gradient(next);
    if (t < 1 || g_next.norm() > 0.5 * g.norm()) fresh = false;
    psi = next;
    g = g_next;
    trace << "newton " << it + 1 << " f=" << f << " |g|=" << g.norm()
          << " t=" << t << "\n";
    ++iter;
  }
  iterations = iter;
  grad_norm = g.norm();
  return psi;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

std::vector<PointEvaluation> evaluate_points(const LatentModel& model, const GaussianData& data,
                                             const std::vector<VectorXd>& psis,
                                             bool with_moments, const PosteriorOptions& options,
                                             int threads) {
  std::vector<PointEvaluation> out(psis.size());
  const long count = static_cast<long>(psis.size());
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  std::string error;
  bool failed = false;
#pragma omp parallel num_threads(nt)
  {
    SparseCholesky cache;
#pragma omp for schedule(dynamic, 1)
    for (long i = 0; i < count; ++i) {
      if (failed) continue;
      try {
        out[i] = evaluate_one(model, data, psis[i], with_moments, options, &cache);
      } catch (const std::exception& e) {
#pragma omp critical
        {
          failed = true;
          error = e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError(error);
  return out;
}

namespace serial {
std::vector<PointEvaluation> evaluate_points(const LatentModel& model, const GaussianData& data,
                                             const std::vector<VectorXd>& psis,
                                             bool with_moments, const PosteriorOptions& options) {
  std::vector<PointEvaluation> out;
  out.reserve(psis.size());
  SparseCholesky cache;
  for (const auto& psi : psis)
    out.push_back(evaluate_one(model, data, psi, with_moments, options, &cache));
  return out;
}
}  // namespace serial

HyperPosterior explore_hyper(const LatentModel& model, const GaussianData& data,
                             const ExploreOptions& options) {
  data.validate(model.latent_dim());
  if (options.points_per_dim < 1) throw InputError("points_per_dim must be >= 1");
  const int d = model.hyper_dim();

  OptContext ctx{&model, &data, options.posterior, {}, 0};
  {
    // settle the constraint augmentation mode once, so every later
    // evaluation factorizes the same pattern
    const VectorXd init = model.initial_hyper();
    const auto parts = marginal_parts(model, std::span<const double>(init.data(), d), data,
                                      ctx.options, &ctx.cache, false);
    if (parts.augmented_all) ctx.options.augment_all = true;
  }

  HyperPosterior hp;
  hp.names = model.hyper_names();
  hp.augment_all = ctx.options.augment_all;
  std::ostringstream trace;
  hp.mode = find_mode(model, data, options, ctx, hp.iterations, hp.mode_gradient_norm, trace);
  if (!(hp.mode_gradient_norm < options.grad_tol))
    throw ConvergenceError("hyperparameter mode search did not converge (|grad| = " +
                               std::to_string(hp.mode_gradient_norm) + ")",
                           trace.str());

  hp.hessian = numeric_hessian(model, hp.mode, data, ctx.options, &ctx.cache,
                               options.hessian_step);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hp.hessian);
  const VectorXd lam = es.eigenvalues().cwiseMax(1e-2);
  const MatrixXd to_psi = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal();

  // product grid in standardized coordinates
  const int P = options.points_per_dim;
  std::vector<double> axis(P, 0.0);
  for (int j = 0; j < P && P > 1; ++j)
    axis[j] = -options.half_width + 2.0 * options.half_width * j / (P - 1);
  std::vector<VectorXd> psis;
  std::vector<int> idx(d, 0);
  while (true) {
    VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = axis[idx[j]];
    if (!options.prune_sphere || z.norm() <= options.half_width + 1e-12)
      psis.push_back(hp.mode + to_psi * z);
    int j = 0;
    while (j < d && ++idx[j] == P) idx[j++] = 0;
    if (j == d) break;
  }

  auto evals = evaluate_points(model, data, psis, true, ctx.options, options.threads);
  hp.mode_log_posterior = -std::numeric_limits<double>::infinity();
  for (const auto& e : evals) hp.mode_log_posterior = std::max(hp.mode_log_posterior, e.log_posterior);

  std::vector<double> lp;
  for (std::size_t i = 0; i < psis.size(); ++i) {
    if (evals[i].log_posterior < hp.mode_log_posterior - options.max_log_drop) continue;
    HyperGridPoint pt;
    pt.psi = psis[i];
    pt.natural = model.natural_hyper(std::span<const double>(pt.psi.data(), d));
    pt.log_posterior = evals[i].log_posterior;
    lp.push_back(pt.log_posterior);
    hp.points.push_back(std::move(pt));
    hp.moments.push_back(std::move(*evals[i].moments));
  }
  const double norm = log_sum_exp(lp);
  for (auto& pt : hp.points) pt.weight = std::exp(pt.log_posterior - norm);

  SparseCholesky c;
  hp.nnz_factor = conditional_posterior(model, std::span<const double>(hp.mode.data(), d), data,
                                        ctx.options, &c)
                      .nnz_factor();
  return hp;
}

namespace {

std::mt19937_64 draw_stream(std::uint64_t seed, int m) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(m)};
  return std::mt19937_64(seq);
}

int pick_point(const std::vector<HyperGridPoint>& points, double u) {
  double acc = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    acc += points[k].weight;
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(points.size()) - 1;
}

std::vector<std::vector<int>> assign_draws(const std::vector<HyperGridPoint>& points, int M,
                                           std::uint64_t seed) {
  if (M < 1) throw InputError("number of posterior samples must be >= 1");
  if (points.empty()) throw InputError("no hyperparameter grid points to sample from");
  std::vector<std::vector<int>> by_point(points.size());
  for (int m = 0; m < M; ++m) {
    auto rng = draw_stream(seed, m);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    by_point[pick_point(points, unif(rng))].push_back(m);
  }
  return by_point;
}

void draw_for_point(const LatentModel& model, const GaussianData& data,
                    const HyperGridPoint& point, const std::vector<int>& draws,
                    std::uint64_t seed, const PosteriorOptions& options, SparseCholesky* cache,
                    MatrixXd& out) {
  if (draws.empty()) return;
  const auto post = conditional_posterior(
      model, std::span<const double>(point.psi.data(), point.psi.size()), data, options, cache);
  for (int m : draws) {
    auto rng = draw_stream(seed, m);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    (void)unif(rng);  // consumed by the grid-point choice
    out.col(m) = post.sample(rng);
  }
}

}  // namespace

MatrixXd sample_posterior(const LatentModel& model, const GaussianData& data,
                          const std::vector<HyperGridPoint>& points, int M, std::uint64_t seed,
                          const PosteriorOptions& options, int threads) {
  const auto by_point = assign_draws(points, M, seed);
  MatrixXd out(model.latent_dim(), M);
  const long count = static_cast<long>(points.size());
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  std::string error;
  bool failed = false;
#pragma omp parallel num_threads(nt)
  {
    SparseCholesky cache;
#pragma omp for schedule(dynamic, 1)
    for (long k = 0; k < count; ++k) {
      if (failed) continue;
      try {
        draw_for_point(model, data, points[k], by_point[k], seed, options, &cache, out);
      } catch (const std::exception& e) {
#pragma omp critical
        {
          failed = true;
          error = e.what();
        }
      }
    }
  }
  if (failed) throw NumericalError(error);
  return out;
}

namespace serial {
MatrixXd sample_posterior(const LatentModel& model, const GaussianData& data,
                          const std::vector<HyperGridPoint>& points, int M, std::uint64_t seed,
                          const PosteriorOptions& options) {
  const auto by_point = assign_draws(points, M, seed);
  MatrixXd out(model.latent_dim(), M);
  SparseCholesky cache;
  for (std::size_t k = 0; k < points.size(); ++k)
    draw_for_point(model, data, points[k], by_point[k], seed, options, &cache, out);
  return out;
}
}  // namespace serial

double nearest_rank_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<long>(std::ceil(p * n));
  rank = std::clamp(rank, 1L, static_cast<long>(values.size()));
  return values[static_cast<std::size_t>(rank - 1)];
}

double mixture_quantile(std::span<const double> weights, std::span<const double> means,
                        std::span<const double> vars, double p) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double s = std::sqrt(std::max(vars[k], 0.0));
    lo = std::min(lo, means[k] - 12 * s - 1e-12);
    hi = std::max(hi, means[k] + 12 * s + 1e-12);
  }
  auto cdf = [&](double x) {
    double c = 0;
    for (std::size_t k = 0; k < means.size(); ++k) {
      const double s = std::sqrt(std::max(vars[k], 0.0));
      c += weights[k] * (s > 0 ? 0.5 * std::erfc(-(x - means[k]) / (s * std::sqrt(2.0)))
                               : (x >= means[k] ? 1.0 : 0.0));
    }
    return c;
  };
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  double total = 0;
  for (double w : weights) total += w;
  std::vector<double> mid(order.size());
  double acc = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    mid[r] = (acc + 0.5 * weights[order[r]]) / total;
    acc += weights[order[r]];
  }
  if (p <= mid.front()) return values[order.front()];
  if (p >= mid.back()) return values[order.back()];
  const auto it = std::upper_bound(mid.begin(), mid.end(), p);
  const std::size_t r = static_cast<std::size_t>(it - mid.begin());
  const double t = (p - mid[r - 1]) / (mid[r] - mid[r - 1]);
  return values[order[r - 1]] + t * (values[order[r]] - values[order[r - 1]]);
}

}  // namespace ricov
