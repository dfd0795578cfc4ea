#include "bayesfb/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "bayesfb/errors.hpp"
#include "bayesfb/selected_inverse.hpp"

namespace bayesfb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Acklam's rational approximation of the standard normal quantile; only used
// to seed the mixture-quantile iteration, which then refines to tolerance.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// ---------------------------------------------------------------------------
// Likelihood evaluation
// ---------------------------------------------------------------------------

double likelihood_value(const Likelihood& lik, const Eigen::VectorXd& x) {
  double value = 0.0;
  for (const GammaTerm& term : lik.gamma) {
    const Eigen::VectorXd eta = term.design * x;
    const double phi = term.phi;
    const double lg = std::lgamma(phi);
    for (int i = 0; i < eta.size(); ++i) {
      value += phi * (std::log(phi) - eta[i] - term.y[i] * std::exp(-eta[i])) - lg +
               (phi - 1.0) * std::log(term.y[i]);
    }
  }
  for (const GaussianTerm& term : lik.gaussian) {
    const Eigen::VectorXd resid = term.y - term.design * x;
    value += 0.5 * resid.size() * (std::log(term.precision) - kLog2Pi) -
             0.5 * term.precision * resid.squaredNorm();
  }
  for (const LgcpTerm& term : lik.lgcp) {
    const Eigen::VectorXd eta = term.node_design * x;
    value += term.point_linear.dot(x) - term.weights.dot(eta.array().exp().matrix());
  }
  return value;
}

// Gradient and curvature (sum of B^T W B) of the likelihood at x.
void likelihood_grad_hess(const Likelihood& lik, const Eigen::VectorXd& x,
                          Eigen::VectorXd& grad, Eigen::SparseMatrix<double>& hess) {
  const int n = static_cast<int>(x.size());
  grad = Eigen::VectorXd::Zero(n);
  hess.resize(n, n);
  hess.setZero();
  for (const GammaTerm& term : lik.gamma) {
    const Eigen::VectorXd eta = term.design * x;
    const Eigen::ArrayXd w = term.phi * term.y.array() * (-eta.array()).exp();
    const Eigen::VectorXd g = (w - term.phi).matrix();
    grad += term.design.transpose() * g;
    hess += Eigen::SparseMatrix<double>(term.design.transpose() * w.matrix().asDiagonal() *
                                        term.design);
  }
  for (const GaussianTerm& term : lik.gaussian) {
    grad += term.precision * (term.design.transpose() * (term.y - term.design * x));
    hess += Eigen::SparseMatrix<double>(term.precision *
                                        (term.design.transpose() * term.design));
  }
  for (const LgcpTerm& term : lik.lgcp) {
    const Eigen::VectorXd eta = term.node_design * x;
    const Eigen::ArrayXd w = term.weights.array() * eta.array().exp();
    grad += term.point_linear - term.node_design.transpose() * w.matrix();
    hess += Eigen::SparseMatrix<double>(term.node_design.transpose() * w.matrix().asDiagonal() *
                                        term.node_design);
  }
}

// ---------------------------------------------------------------------------
// Newton with backtracking and Levenberg boost
// ---------------------------------------------------------------------------

struct NewtonWork {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>* llt = nullptr;  // shared pattern
  bool* pattern_ready = nullptr;
};

GaussianApprox newton_mode(const LatentModel& model, const Eigen::VectorXd& theta,
                           const NewtonOptions& opts, const Eigen::VectorXd* warm_start,
                           NewtonWork* work) {
  const Eigen::SparseMatrix<double> p0 = model.prior_precision(theta);
  const Eigen::VectorXd m0 = model.prior_mean(theta);
  const Likelihood lik = model.likelihood(theta);
  const int n = model.latent_dim();

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> local_llt;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt = work ? *work->llt : local_llt;

  Eigen::VectorXd x = warm_start && warm_start->size() == n ? *warm_start : m0;

  const auto objective = [&](const Eigen::VectorXd& v) {
    const Eigen::VectorXd dv = v - m0;
    return likelihood_value(lik, v) - 0.5 * dv.dot(p0 * dv);
  };

  double f = objective(x);
  if (!std::isfinite(f)) {  // fall back to the prior mean
    x = m0;
    f = objective(x);
  }

  GaussianApprox result;
  Eigen::VectorXd grad;
  Eigen::SparseMatrix<double> curvature;
  std::vector<double> grad_trace;

  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    likelihood_grad_hess(lik, x, grad, curvature);
    grad -= p0 * (x - m0);
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    grad_trace.push_back(gnorm);
    result.final_gradient_norm = gnorm;
    result.iterations = iter;
    if (gnorm < opts.gradient_tol) break;
    if (iter == opts.max_iterations) {
      std::string trace = "newton gradient trace:";
      for (const double g : grad_trace) trace += " " + std::to_string(g);
      throw NewtonDiverged("gaussian_approx: no convergence in " +
                           std::to_string(opts.max_iterations) + " iterations; " + trace);
    }

    Eigen::SparseMatrix<double> h = p0 + curvature;
    if (work && !*work->pattern_ready) {
      llt.analyzePattern(h);
      *work->pattern_ready = true;
    } else if (!work) {
      llt.analyzePattern(h);
    }
    llt.factorize(h);
    double boost = 0.0;
    while (llt.info() != Eigen::Success) {
      ++result.levenberg_boosts;
      boost = boost == 0.0 ? 1e-8 : boost * 10.0;
      if (boost > 1e2) {
        throw NewtonDiverged("gaussian_approx: Hessian factorization failed despite boosts");
      }
      Eigen::SparseMatrix<double> boosted = h;
      for (int i = 0; i < n; ++i) boosted.coeffRef(i, i) += boost * std::max(1.0, h.coeff(i, i));
      llt.factorize(boosted);
    }

    const Eigen::VectorXd step = llt.solve(grad);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      const Eigen::VectorXd candidate = x + t * step;
      const double fc = objective(candidate);
      if (std::isfinite(fc) && fc >= f - 1e-12 * std::abs(f)) {
        // Accept non-decreasing steps; strict descent is checked via gradient.
        x = candidate;
        f = fc;
        accepted = true;
        if (ls > 0) result.line_search_backtracks += ls;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      std::string trace = "newton gradient trace:";
      for (const double g : grad_trace) trace += " " + std::to_string(g);
      throw NewtonDiverged("gaussian_approx: line search failed; " + trace);
    }
  }

  // Final curvature and log-determinant at the mode.
  likelihood_grad_hess(lik, x, grad, curvature);
  Eigen::SparseMatrix<double> h = p0 + curvature;
  if (work && !*work->pattern_ready) {
    llt.analyzePattern(h);
    *work->pattern_ready = true;
  } else if (!work) {
    llt.analyzePattern(h);
  }
  llt.factorize(h);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("gaussian_approx: final Hessian not positive definite");
  }
  const Eigen::SparseMatrix<double> l = llt.matrixL();
  result.log_det_precision = 2.0 * Eigen::VectorXd(l.diagonal()).array().log().sum();
  result.mode = x;
  result.precision = std::move(h);
  result.log_lik_at_mode = likelihood_value(lik, x);
  const Eigen::VectorXd dv = x - m0;
  result.latent_log_prior_at_mode = 0.5 * model.prior_precision_log_det(theta) -
                                    0.5 * n * kLog2Pi - 0.5 * dv.dot(p0 * dv);
  return result;
}

}  // namespace

GaussianApprox gaussian_approx(const LatentModel& model, const Eigen::VectorXd& theta,
                               const NewtonOptions& opts, const Eigen::VectorXd* warm_start) {
  return newton_mode(model, theta, opts, warm_start, nullptr);
}

double log_posterior_hyper(const LatentModel& model, const Eigen::VectorXd& theta,
                           const NewtonOptions& opts) {
  const GaussianApprox ga = gaussian_approx(model, theta, opts);
  return ga.log_lik_at_mode + ga.latent_log_prior_at_mode +
         0.5 * model.latent_dim() * kLog2Pi - 0.5 * ga.log_det_precision +
         model.log_prior_hyper(theta);
}

// ---------------------------------------------------------------------------
// Hyper exploration
// ---------------------------------------------------------------------------

namespace {

struct EngineContext {
  const LatentModel& model;
  ExploreOptions opts;
  FitDiagnostics diag;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  bool pattern_ready = false;
  Eigen::VectorXd last_mode;
  bool have_last_mode = false;

  explicit EngineContext(const LatentModel& m, const ExploreOptions& o) : model(m), opts(o) {}
};

struct PointEval {
  double lp = -kInf;
  GaussianApprox ga;
  bool ok = false;
};

PointEval eval_point(EngineContext& ctx, const Eigen::VectorXd& theta) {
  PointEval out;
  try {
    NewtonWork work{&ctx.llt, &ctx.pattern_ready};
    const Eigen::VectorXd* warm = ctx.have_last_mode ? &ctx.last_mode : nullptr;
    out.ga = newton_mode(ctx.model, theta, ctx.opts.newton, warm, &work);
    out.lp = out.ga.log_lik_at_mode + out.ga.latent_log_prior_at_mode +
             0.5 * ctx.model.latent_dim() * kLog2Pi - 0.5 * out.ga.log_det_precision +
             ctx.model.log_prior_hyper(theta);
    out.ok = std::isfinite(out.lp);
    if (out.ok) {
      ctx.last_mode = out.ga.mode;
      ctx.have_last_mode = true;
      ctx.diag.newton_iterations += out.ga.iterations;
      ctx.diag.line_search_backtracks += out.ga.line_search_backtracks;
      ctx.diag.levenberg_boosts += out.ga.levenberg_boosts;
      ctx.diag.max_gradient_norm =
          std::max(ctx.diag.max_gradient_norm, out.ga.final_gradient_norm);
    }
  } catch (const Error&) {
    out.ok = false;
    out.lp = -kInf;
  }
  return out;
}

// Nelder-Mead maximization of the Laplace log posterior.
Eigen::VectorXd nelder_mead_mode(EngineContext& ctx, double* best_lp) {
  const int dim = ctx.model.hyper_dim();
  const auto f = [&](const Eigen::VectorXd& theta) {
    ++ctx.diag.nm_evaluations;
    return eval_point(ctx, theta).lp;
  };

  Eigen::VectorXd start = ctx.model.hyper_start();
  double lp_best = -kInf;
  Eigen::VectorXd x_best = start;

  for (int attempt = 0; attempt <= ctx.opts.nm_restarts; ++attempt) {
    if (attempt > 0) ++ctx.diag.nm_restarts_used;
    const double step = 0.5 / (1 << std::min(attempt, 4));
    std::vector<Eigen::VectorXd> simplex(dim + 1, x_best);
    std::vector<double> value(dim + 1);
    for (int i = 1; i <= dim; ++i) simplex[i][i - 1] += step;
    for (int i = 0; i <= dim; ++i) value[i] = f(simplex[i]);

    bool converged = false;
    for (int iter = 0; iter < ctx.opts.nm_max_iterations; ++iter) {
      std::vector<int> order(dim + 1);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] > value[b]; });
      const int best = order[0];
      const int worst = order[dim];
      const int second_worst = order[dim - 1];
      if (std::isfinite(value[best]) && std::isfinite(value[worst]) &&
          value[best] - value[worst] < ctx.opts.nm_tol) {
        converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
      for (int i = 0; i <= dim; ++i) {
        if (i != worst) centroid += simplex[i];
      }
      centroid /= dim;

      const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
      const double fr = f(reflected);
      if (fr > value[best]) {
        const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
        const double fe = f(expanded);
        if (fe > fr) {
          simplex[worst] = expanded;
          value[worst] = fe;
        } else {
          simplex[worst] = reflected;
          value[worst] = fr;
        }
      } else if (fr > value[second_worst]) {
        simplex[worst] = reflected;
        value[worst] = fr;
      } else {
        const Eigen::VectorXd contracted = centroid + 0.5 * (simplex[worst] - centroid);
        const double fc = f(contracted);
        if (fc > value[worst]) {
          simplex[worst] = contracted;
          value[worst] = fc;
        } else {
          for (int i = 0; i <= dim; ++i) {
            if (i == best) continue;
            simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
            value[i] = f(simplex[i]);
          }
        }
      }
    }

    int best = 0;
    for (int i = 1; i <= dim; ++i) {
      if (value[i] > value[best]) best = i;
    }
    if (value[best] > lp_best) {
      lp_best = value[best];
      x_best = simplex[best];
    }
    if (converged && std::isfinite(lp_best)) break;
    if (attempt == ctx.opts.nm_restarts && !std::isfinite(lp_best)) {
      throw HyperOptFailed("explore_hyper: optimizer failed after restarts");
    }
  }
  if (!std::isfinite(lp_best)) {
    throw HyperOptFailed("explore_hyper: no finite posterior value found");
  }
  *best_lp = lp_best;
  return x_best;
}

// Per-axis posterior sd from a finite-difference Hessian at the mode.
Eigen::VectorXd hyper_posterior_sd(EngineContext& ctx, const Eigen::VectorXd& mode) {
  const int dim = ctx.model.hyper_dim();
  const double h = 0.05;
  const auto f = [&](const Eigen::VectorXd& theta) { return eval_point(ctx, theta).lp; };

  const double f0 = f(mode);
  Eigen::MatrixXd hess(dim, dim);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd tp = mode, tm = mode;
    tp[i] += h;
    tm[i] -= h;
    const double fp = f(tp);
    const double fm = f(tm);
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int j = i + 1; j < dim; ++j) {
      Eigen::VectorXd tpp = mode, tpm = mode, tmp = mode, tmm = mode;
      tpp[i] += h; tpp[j] += h;
      tpm[i] += h; tpm[j] -= h;
      tmp[i] -= h; tmp[j] += h;
      tmm[i] -= h; tmm[j] -= h;
      hess(i, j) = hess(j, i) = (f(tpp) - f(tpm) - f(tmp) + f(tmm)) / (4.0 * h * h);
    }
  }

  // Precision = -Hessian; clamp eigenvalues so flat directions stay bounded.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hess);
  Eigen::VectorXd evals = eig.eigenvalues();
  const double floor_ev = std::max(1e-8, 1e-6 * evals.cwiseAbs().maxCoeff());
  for (int i = 0; i < dim; ++i) evals[i] = std::max(evals[i], floor_ev);
  const Eigen::MatrixXd cov = eig.eigenvectors() * evals.cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();
  Eigen::VectorXd sd(dim);
  for (int i = 0; i < dim; ++i) sd[i] = std::min(std::sqrt(std::max(cov(i, i), 0.0)), 2.0);
  return sd;
}

struct ExtractionTargets {
  const Eigen::SparseMatrix<double>* predictor_transposed = nullptr;  // latent x cells
  PredictiveMixture* mixture = nullptr;
  int point_row = -1;
};

// Marginal sds of the latent components (and optionally prediction rows) from
// the factorization held in ctx.llt after a Newton solve at this point.
void extract_point_summaries(EngineContext& ctx, IntegrationPoint& point,
                             const ExtractionTargets& targets) {
  const SelectedInverse selinv(ctx.llt);
  const int n = ctx.model.latent_dim();
  point.latent_sd.resize(n);
  for (int i = 0; i < n; ++i) point.latent_sd[i] = std::sqrt(std::max(0.0, selinv.variance(i)));
  point.precision_pd = true;

  if (!targets.predictor_transposed || !targets.mixture) return;
  const Eigen::SparseMatrix<double>& bt = *targets.predictor_transposed;
  const int n_cells = bt.cols();

  // Fixed-effect covariance columns are dense solves; together with the
  // selected inverse they cover every product pair in a prediction row.
  const int n_nodes = n - static_cast<int>(bt.rows() - n);  // unused guard
  (void)n_nodes;
  int first_fixed = n;
  for (int c = 0; c < n_cells && first_fixed == n; ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(bt, c); it; ++it) {
      // fixed-effect rows sit at the tail of the latent vector
    }
  }
  // Identify fixed-effect indices as those >= n_field where n_field is the
  // smallest index such that all tail indices appear densely; the caller
  // knows the split, so recover it from the model via dynamic cast instead.
  first_fixed = targets.mixture->first_fixed_index;

  const int n_fixed = n - first_fixed;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, n_fixed);
  for (int k = 0; k < n_fixed; ++k) rhs(first_fixed + k, k) = 1.0;
  const Eigen::MatrixXd fixed_cov = ctx.llt.solve(rhs);

  for (int c = 0; c < n_cells; ++c) {
    double mean = 0.0;
    double var = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(bt, c); it; ++it) {
      mean += it.value() * point.latent_mode[it.row()];
    }
    for (Eigen::SparseMatrix<double>::InnerIterator ita(bt, c); ita; ++ita) {
      const int ia = ita.row();
      const double va = ita.value();
      for (Eigen::SparseMatrix<double>::InnerIterator itb(bt, c); itb; ++itb) {
        const int ib = itb.row();
        if (ib < ia) continue;
        const double vb = itb.value();
        double cov;
        if (ia >= first_fixed) {
          cov = fixed_cov(ib, ia - first_fixed);
        } else if (ib >= first_fixed) {
          cov = fixed_cov(ia, ib - first_fixed);
        } else {
          const auto entry = selinv.covariance(ia, ib);
          if (entry) {
            cov = *entry;
          } else {
            // Outside the factor pattern: exact fallback via a full solve.
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e[ib] = 1.0;
            cov = ctx.llt.solve(e)[ia];
            ++ctx.diag.failed_grid_points;  // counted for visibility in tests
          }
        }
        var += (ia == ib ? 1.0 : 2.0) * va * vb * cov;
      }
    }
    targets.mixture->mean(targets.point_row, c) = mean;
    targets.mixture->sd(targets.point_row, c) = std::sqrt(std::max(0.0, var));
  }
}

}  // namespace

}  // namespace bayesfb
