#pragma once

#include <Eigen/Sparse>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bayesfb/mesh.hpp"
#include "bayesfb/priors.hpp"
#include "bayesfb/simulate.hpp"

namespace bayesfb {

// Gamma observations: y_i ~ Gamma(shape phi, rate phi/mu_i), log mu = eta.
struct GammaTerm {
  Eigen::SparseMatrix<double> design;
  Eigen::VectorXd y;
  double phi = 1.0;
};

// Gaussian observations with known precision (test hook for Laplace exactness).
struct GaussianTerm {
  Eigen::SparseMatrix<double> design;
  Eigen::VectorXd y;
  double precision = 1.0;
};

// Dual-mesh LGCP approximation: sum_points eta'(s_i) - sum_k w_k exp(eta'_k).
// The point sum is linear in the latent vector and enters through
// point_linear = (point design)^T 1.
struct LgcpTerm {
  Eigen::SparseMatrix<double> node_design;
  Eigen::VectorXd weights;
  Eigen::VectorXd point_linear;
};

struct Likelihood {
  std::vector<GammaTerm> gamma;
  std::vector<GaussianTerm> gaussian;
  std::vector<LgcpTerm> lgcp;
};

// Latent Gaussian model as seen by the inference engine: a Gaussian latent
// prior whose precision may depend on the hyperparameters, plus likelihood
// terms assembled at a given internal-scale hyperparameter vector.
class LatentModel {
 public:
  virtual ~LatentModel() = default;

  virtual int latent_dim() const = 0;
  virtual int hyper_dim() const = 0;
  virtual Eigen::VectorXd hyper_start() const = 0;
  virtual Eigen::SparseMatrix<double> prior_precision(const Eigen::VectorXd& theta) const = 0;
  virtual Eigen::VectorXd prior_mean(const Eigen::VectorXd& theta) const = 0;
  virtual Likelihood likelihood(const Eigen::VectorXd& theta) const = 0;
  virtual double log_prior_hyper(const Eigen::VectorXd& theta) const = 0;
  // log det of prior_precision(theta); the default factorizes, models may cache.
  virtual double prior_precision_log_det(const Eigen::VectorXd& theta) const;
};

enum class FitVariant { IM, PM, PP };

std::string to_string(FitVariant variant);

// Concrete spatial model: shared-field layout (u block, then fixed effects)
// with a Gamma block and, for PM/PP, the LGCP block whose field columns are
// scaled by the copy parameter alpha.
// A built spec is immutable apart from an internal precision cache, so share
// one instance per fit; concurrent fits should each build their own.
class ModelSpec : public LatentModel {
 public:
  int latent_dim() const override { return n_latent_; }
  int hyper_dim() const override { return layout_.dim(); }
  Eigen::VectorXd hyper_start() const override;
  Eigen::SparseMatrix<double> prior_precision(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd prior_mean(const Eigen::VectorXd& theta) const override;
  Likelihood likelihood(const Eigen::VectorXd& theta) const override;
  double log_prior_hyper(const Eigen::VectorXd& theta) const override;
  double prior_precision_log_det(const Eigen::VectorXd& theta) const override;

  FitVariant variant() const { return variant_; }
  const HyperLayout& hyper_layout() const { return layout_; }
  int node_count() const { return n_nodes_; }
  int fixed_count() const { return n_fixed_; }
  const std::vector<std::string>& fixed_labels() const { return fixed_labels_; }
  int fixed_index(const std::string& label) const;  // latent index
  const Mesh& mesh() const { return *mesh_; }
  const PriorSet& priors() const { return priors_; }
  std::optional<double> fixed_alpha() const { return fixed_alpha_; }
  const Eigen::SparseMatrix<double>& gamma_design() const { return gamma_design_; }

  // Design rows mapping the latent vector to the geostatistical predictor eta
  // at the given locations with the given covariate values (prediction rows).
  Eigen::SparseMatrix<double> predictor_design(std::span<const Point> locations,
                                               const Eigen::VectorXd& covariate) const;

  friend ModelSpec build_im(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                            std::shared_ptr<const FemMatrices> fem, const PriorSet& priors);
  friend ModelSpec build_pm(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                            std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                            std::optional<CovariateShape> shape,
                            std::optional<double> fixed_alpha);
  friend ModelSpec build_pp(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                            std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                            std::optional<CovariateShape> shape);

 private:
  struct SpatialCacheEntry {
    Eigen::SparseMatrix<double> q;
    double log_det = 0.0;
  };

  std::vector<const NormalPrior*> fixed_priors() const;
  double effective_alpha(const Eigen::VectorXd& theta) const;
  const SpatialCacheEntry& spatial_precision(double rho, double sigma) const;

  FitVariant variant_ = FitVariant::IM;
  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const FemMatrices> fem_;
  PriorSet priors_;
  HyperLayout layout_;
  int n_nodes_ = 0;
  int n_fixed_ = 0;
  int n_latent_ = 0;
  std::vector<std::string> fixed_labels_;
  std::optional<double> fixed_alpha_;

  // Gamma block (IM and PM).
  Eigen::SparseMatrix<double> gamma_design_;
  Eigen::VectorXd gamma_y_;

  // LGCP block split into alpha-scaled field part and fixed part (PM and PP).
  Eigen::SparseMatrix<double> lgcp_node_field_;
  Eigen::SparseMatrix<double> lgcp_node_fixed_;
  Eigen::VectorXd lgcp_weights_;
  Eigen::VectorXd lgcp_point_field_;  // (point design field part)^T 1
  Eigen::VectorXd lgcp_point_fixed_;

  mutable std::map<std::pair<double, double>, SpatialCacheEntry> spatial_cache_;
};

ModelSpec build_im(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors);

// shape gives the covariate entering the LGCP predictor at mesh nodes;
// nullopt drops the covariate (intercept-only point process, diagnostics).
// fixed_alpha removes alpha from the hyper vector and pins it (diagnostics).
ModelSpec build_pm(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                   std::optional<CovariateShape> shape,
                   std::optional<double> fixed_alpha = std::nullopt);

// Point-process-only model (Appendix-A sigma_pp fits): latent (u, beta0', beta1').
ModelSpec build_pp(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                   std::optional<CovariateShape> shape);

}  // namespace bayesfb
