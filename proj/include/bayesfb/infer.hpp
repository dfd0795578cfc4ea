#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bayesfb/mesh.hpp"
#include "bayesfb/model_spec.hpp"
#include "bayesfb/priors.hpp"
#include "bayesfb/simulate.hpp"

namespace bayesfb {

struct NewtonOptions {
  int max_iterations = 50;
  double gradient_tol = 1e-8;  // infinity norm
  int max_line_search = 40;
};

// Gaussian approximation of the latent conditional at a fixed hyper vector.
struct GaussianApprox {
  Eigen::VectorXd mode;
  Eigen::SparseMatrix<double> precision;  // negative Hessian at the mode
  double log_det_precision = 0.0;
  double log_lik_at_mode = 0.0;
  double latent_log_prior_at_mode = 0.0;  // full Gaussian log density
  int iterations = 0;
  double final_gradient_norm = 0.0;
  int line_search_backtracks = 0;
  int levenberg_boosts = 0;
};

GaussianApprox gaussian_approx(const LatentModel& model, const Eigen::VectorXd& theta,
                               const NewtonOptions& opts = {},
                               const Eigen::VectorXd* warm_start = nullptr);

// Laplace-approximated log p(theta | y) up to a constant.
double log_posterior_hyper(const LatentModel& model, const Eigen::VectorXd& theta,
                           const NewtonOptions& opts = {});

struct IntegrationPoint {
  Eigen::VectorXd theta;
  double weight = 0.0;
  double log_posterior = 0.0;  // unnormalized
  Eigen::VectorXd latent_mode;
  Eigen::VectorXd latent_sd;
  std::vector<int> grid_offset;  // per-dim steps from the mode, in {-2..2}
  bool precision_pd = false;
};

struct ExploreOptions {
  int points_per_dim = 5;
  double spacing_sd = 0.75;
  double prune_log_drop = 5.0;
  double nm_tol = 1e-5;
  int nm_max_iterations = 400;
  int nm_restarts = 3;
  NewtonOptions newton;
};

struct FitDiagnostics {
  int newton_iterations = 0;         // across all evaluations
  double max_gradient_norm = 0.0;    // worst converged gradient norm
  int nm_evaluations = 0;
  int nm_restarts_used = 0;
  int line_search_backtracks = 0;
  int levenberg_boosts = 0;
  int failed_grid_points = 0;
  int pruned_points = 0;
  bool robustness_flag = false;
  double elapsed_seconds = 0.0;
};

std::vector<IntegrationPoint> explore_hyper(const LatentModel& model,
                                            const ExploreOptions& opts = {},
                                            FitDiagnostics* diagnostics = nullptr);

struct MarginalSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
};

// Gaussian-mixture marginals over integration points.
std::vector<MarginalSummary> latent_marginals(const std::vector<IntegrationPoint>& points);

// Mixture CDF/quantile of one latent component across integration points.
double mixture_cdf(const std::vector<IntegrationPoint>& points, int component, double x);
double mixture_quantile(const std::vector<IntegrationPoint>& points, int component, double p);

// One hyperparameter's tabulated posterior marginal on the natural scale.
struct HyperMarginal {
  std::string name;
  Eigen::VectorXd support;
  Eigen::VectorXd density;
  double mean_internal = 0.0;  // moments of the internal-scale marginal
  double sd_internal = 0.0;
};

// Per-cell predictive mixture of eta and the derived predictors.
struct PredictiveMixture {
  Eigen::VectorXd weights;  // per integration point
  Eigen::MatrixXd mean;     // points x cells
  Eigen::MatrixXd sd;
};

struct PredictiveMap {
  Eigen::VectorXd mean_predictor;    // E[mu] = sum_k w_k exp(m + s^2/2)
  Eigen::VectorXd median_predictor;  // exp(median of the eta mixture)
  Eigen::VectorXd eta_sd;
};

struct FitResult {
  FitVariant variant = FitVariant::IM;
  HyperLayout layout;
  int n_nodes = 0;
  int n_latent = 0;
  std::vector<std::string> fixed_labels;
  std::vector<IntegrationPoint> points;
  std::vector<MarginalSummary> latent;
  std::vector<HyperMarginal> hyper;
  FitDiagnostics diagnostics;
  std::optional<PredictiveMixture> prediction;  // filled when cells were given

  const MarginalSummary& fixed_effect(const std::string& label) const;
  const HyperMarginal& hyper_marginal(const std::string& name) const;
};

struct FitOptions {
  ExploreOptions explore;
  // Raster cells to predict on during the fit (one factorization per point).
  std::vector<Point> prediction_cells;
  Eigen::VectorXd prediction_covariate;
};

// Full pipeline on any latent model: explore, latent marginals, hyper
// marginals, optional fused prediction.
FitResult fit_model(const LatentModel& model, const FitOptions& opts = {});

FitResult fit_im(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                 std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                 const FitOptions& opts = {});
FitResult fit_pm(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                 std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                 std::optional<CovariateShape> shape, const FitOptions& opts = {});
FitResult fit_pp(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                 std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                 std::optional<CovariateShape> shape, const FitOptions& opts = {});

// Predictive map at arbitrary cells from a finished fit (recomputes one
// factorization per integration point).
PredictiveMixture predict_mixture(const LatentModel& model, const FitResult& fit,
                                  std::span<const Point> cells,
                                  const Eigen::VectorXd& covariate);
PredictiveMap finalize_prediction(const PredictiveMixture& mixture);

// Serialized fit summary (fixed-effect table, hyper marginal grids,
// convergence diagnostics).
std::string fit_result_json(const FitResult& fit);

}  // namespace bayesfb
