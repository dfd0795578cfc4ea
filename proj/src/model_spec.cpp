#include "bayesfb/model_spec.hpp"

#include <cmath>

#include "bayesfb/errors.hpp"
#include "bayesfb/spde.hpp"

namespace bayesfb {

std::string to_string(FitVariant variant) {
  switch (variant) {
    case FitVariant::IM: return "IM";
    case FitVariant::PM: return "PM";
    case FitVariant::PP: return "PP";
  }
  return "?";
}

double LatentModel::prior_precision_log_det(const Eigen::VectorXd& theta) const {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(prior_precision(theta));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("prior_precision_log_det: Cholesky failed");
  }
  const Eigen::SparseMatrix<double> l = llt.matrixL();
  return 2.0 * Eigen::VectorXd(l.diagonal()).array().log().sum();
}

int ModelSpec::fixed_index(const std::string& label) const {
  for (int k = 0; k < n_fixed_; ++k) {
    if (fixed_labels_[k] == label) return n_nodes_ + k;
  }
  throw ShapeError("ModelSpec: unknown fixed effect label " + label);
}

std::vector<const NormalPrior*> ModelSpec::fixed_priors() const {
  switch (variant_) {
    case FitVariant::IM:
      return {&priors_.beta0, &priors_.beta1};
    case FitVariant::PM:
      return {&priors_.beta0, &priors_.beta1, &*priors_.beta0_pp, &*priors_.beta1_pp};
    case FitVariant::PP:
      return {&priors_.beta0, &priors_.beta1};
  }
  return {};
}

double ModelSpec::effective_alpha(const Eigen::VectorXd& theta) const {
  if (variant_ == FitVariant::PP) return 1.0;
  if (fixed_alpha_) return *fixed_alpha_;
  return theta[layout_.idx_alpha()];
}

Eigen::VectorXd ModelSpec::hyper_start() const {
  Eigen::VectorXd theta(layout_.dim());
  double log_rho0 = 0.0;
  double log_sigma0 = 0.0;
  if (const auto* en = std::get_if<ENPriorSpec>(&priors_.spatial)) {
    log_rho0 = std::log(en->rho0) + en->mu2;
    log_sigma0 = std::log(en->sigma0) + en->mu1;
  } else if (const auto* pc = std::get_if<PCPriorSpec>(&priors_.spatial)) {
    log_rho0 = std::log(pc->rho0);
    log_sigma0 = std::log(pc->sigma0);
  } else {
    const auto& tab = std::get<TabulatedSpatial>(priors_.spatial);
    log_rho0 = std::log(tab.rho.quantile(0.5));
    log_sigma0 = std::log(tab.sigma.quantile(0.5));
  }
  theta[layout_.idx_log_rho()] = log_rho0;
  theta[layout_.idx_log_sigma()] = log_sigma0;
  if (layout_.has_phi) theta[layout_.idx_log_phi()] = std::log(10.0);
  if (layout_.has_alpha) theta[layout_.idx_alpha()] = priors_.alpha_copy->mean;
  return theta;
}

const ModelSpec::SpatialCacheEntry& ModelSpec::spatial_precision(double rho, double sigma) const {
  const auto key = std::make_pair(rho, sigma);
  auto it = spatial_cache_.find(key);
  if (it != spatial_cache_.end()) return it->second;

  SpatialCacheEntry entry;
  entry.q = precision_matrix(matern_params(rho, sigma), *fem_).Q;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(entry.q);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("ModelSpec: spatial precision Cholesky failed");
  }
  const Eigen::SparseMatrix<double> l = llt.matrixL();
  entry.log_det = 2.0 * Eigen::VectorXd(l.diagonal()).array().log().sum();
  return spatial_cache_.emplace(key, std::move(entry)).first->second;
}

Eigen::SparseMatrix<double> ModelSpec::prior_precision(const Eigen::VectorXd& theta) const {
  if (theta.size() != layout_.dim()) {
    throw ShapeError("ModelSpec::prior_precision: bad hyper dimension");
  }
  const double rho = std::exp(theta[layout_.idx_log_rho()]);
  const double sigma = std::exp(theta[layout_.idx_log_sigma()]);
  const SpatialCacheEntry& spatial = spatial_precision(rho, sigma);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(spatial.q.nonZeros() + n_fixed_);
  for (int k = 0; k < spatial.q.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(spatial.q, k); it; ++it) {
      triplets.emplace_back(it.row(), it.col(), it.value());
    }
  }
  const auto priors = fixed_priors();
  for (int k = 0; k < n_fixed_; ++k) {
    triplets.emplace_back(n_nodes_ + k, n_nodes_ + k, priors[k]->precision);
  }
  Eigen::SparseMatrix<double> p0(n_latent_, n_latent_);
  p0.setFromTriplets(triplets.begin(), triplets.end());
  p0.makeCompressed();
  return p0;
}

double ModelSpec::prior_precision_log_det(const Eigen::VectorXd& theta) const {
  if (theta.size() != layout_.dim()) {
    throw ShapeError("ModelSpec::prior_precision_log_det: bad hyper dimension");
  }
  const double rho = std::exp(theta[layout_.idx_log_rho()]);
  const double sigma = std::exp(theta[layout_.idx_log_sigma()]);
  double log_det = spatial_precision(rho, sigma).log_det;
  for (const NormalPrior* prior : fixed_priors()) log_det += std::log(prior->precision);
  return log_det;
}

Eigen::VectorXd ModelSpec::prior_mean(const Eigen::VectorXd&) const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_latent_);
  const auto priors = fixed_priors();
  for (int k = 0; k < n_fixed_; ++k) m[n_nodes_ + k] = priors[k]->mean;
  return m;
}

Likelihood ModelSpec::likelihood(const Eigen::VectorXd& theta) const {
  if (theta.size() != layout_.dim()) {
    throw ShapeError("ModelSpec::likelihood: bad hyper dimension");
  }
  Likelihood lik;
  if (gamma_y_.size() > 0) {
    GammaTerm term;
    term.design = gamma_design_;
    term.y = gamma_y_;
    term.phi = std::exp(theta[layout_.idx_log_phi()]);
    lik.gamma.push_back(std::move(term));
  }
  if (lgcp_weights_.size() > 0) {
    const double alpha = effective_alpha(theta);
    LgcpTerm term;
    term.node_design = alpha * lgcp_node_field_ + lgcp_node_fixed_;
    term.weights = lgcp_weights_;
    term.point_linear = alpha * lgcp_point_field_ + lgcp_point_fixed_;
    lik.lgcp.push_back(std::move(term));
  }
  return lik;
}

double ModelSpec::log_prior_hyper(const Eigen::VectorXd& theta) const {
  return bayesfb::log_prior_hyper(theta, priors_, layout_);
}

Eigen::SparseMatrix<double> ModelSpec::predictor_design(std::span<const Point> locations,
                                                        const Eigen::VectorXd& covariate) const {
  if (static_cast<std::size_t>(covariate.size()) != locations.size()) {
    throw ShapeError("predictor_design: covariate size does not match locations");
  }
  const Eigen::SparseMatrix<double> a = projector(*mesh_, locations);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(a.nonZeros() + 2 * locations.size());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      triplets.emplace_back(it.row(), it.col(), it.value());
    }
  }
  const int b0 = n_nodes_;      // first fixed effect is the predictor intercept
  const int b1 = n_nodes_ + 1;  // second is the covariate effect
  for (std::size_t i = 0; i < locations.size(); ++i) {
    triplets.emplace_back(static_cast<int>(i), b0, 1.0);
    triplets.emplace_back(static_cast<int>(i), b1, covariate[i]);
  }
  Eigen::SparseMatrix<double> design(static_cast<int>(locations.size()), n_latent_);
  design.setFromTriplets(triplets.begin(), triplets.end());
  design.makeCompressed();
  return design;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace {

// Gamma rows: [A | 1 | x] on (u, beta0, beta1), zero on any further columns.
Eigen::SparseMatrix<double> gamma_design_rows(const Mesh& mesh, const Sample& sample,
                                              int n_latent, int beta0_col) {
  const Eigen::SparseMatrix<double> a = projector(mesh, sample.locations);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(a.nonZeros() + 2 * sample.size());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      triplets.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (int i = 0; i < sample.size(); ++i) {
    triplets.emplace_back(i, beta0_col, 1.0);
    triplets.emplace_back(i, beta0_col + 1, sample.covariate[i]);
  }
  Eigen::SparseMatrix<double> design(sample.size(), n_latent);
  design.setFromTriplets(triplets.begin(), triplets.end());
  design.makeCompressed();
  return design;
}

// LGCP pieces on the latent layout with the point-process fixed effects at
// columns (b0p, b0p+1); field columns are stored unscaled (alpha applied at
// assembly). Nodes with zero dual weight inside the unit square are dropped.
struct LgcpParts {
  Eigen::SparseMatrix<double> node_field;
  Eigen::SparseMatrix<double> node_fixed;
  Eigen::VectorXd weights;
  Eigen::VectorXd point_field;
  Eigen::VectorXd point_fixed;
};

LgcpParts lgcp_parts(const Mesh& mesh, const FemMatrices& fem, const Sample& sample,
                     std::optional<CovariateShape> shape, int n_latent, int b0p_col) {
  LgcpParts parts;
  std::vector<int> active;
  for (int k = 0; k < fem.node_weights.size(); ++k) {
    if (fem.node_weights[k] > 0.0) active.push_back(k);
  }
  const int m = static_cast<int>(active.size());
  parts.weights.resize(m);
  std::vector<Eigen::Triplet<double>> field_trip, fixed_trip;
  field_trip.reserve(m);
  fixed_trip.reserve(2 * m);
  for (int r = 0; r < m; ++r) {
    const int k = active[r];
    parts.weights[r] = fem.node_weights[k];
    field_trip.emplace_back(r, k, 1.0);
    fixed_trip.emplace_back(r, b0p_col, 1.0);
    const double x = shape ? covariate_value(*shape, mesh.nodes[k]) : 0.0;
    if (x != 0.0) fixed_trip.emplace_back(r, b0p_col + 1, x);
  }
  parts.node_field.resize(m, n_latent);
  parts.node_field.setFromTriplets(field_trip.begin(), field_trip.end());
  parts.node_field.makeCompressed();
  parts.node_fixed.resize(m, n_latent);
  parts.node_fixed.setFromTriplets(fixed_trip.begin(), fixed_trip.end());
  parts.node_fixed.makeCompressed();

  // Point part enters only through column sums of the point design.
  const Eigen::SparseMatrix<double> a_pts = projector(mesh, sample.locations);
  parts.point_field = Eigen::VectorXd::Zero(n_latent);
  parts.point_field.head(mesh.node_count()) =
      a_pts.transpose() * Eigen::VectorXd::Ones(sample.size());
  parts.point_fixed = Eigen::VectorXd::Zero(n_latent);
  parts.point_fixed[b0p_col] = sample.size();
  double sum_x = 0.0;
  if (shape) {
    for (const Point& p : sample.locations) sum_x += covariate_value(*shape, p);
  }
  parts.point_fixed[b0p_col + 1] = sum_x;
  return parts;
}

}  // namespace

ModelSpec build_im(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors) {
  if (sample.size() == 0) throw EmptySample("build_im: empty sample");
  validate_prior_set(priors);
  if (priors.variant != ModelVariant::IM) {
    throw SpecMismatch("build_im: prior set is not an IM set");
  }
  ModelSpec spec;
  spec.variant_ = FitVariant::IM;
  spec.mesh_ = std::move(mesh);
  spec.fem_ = std::move(fem);
  spec.priors_ = priors;
  spec.layout_ = HyperLayout{true, false};
  spec.n_nodes_ = spec.mesh_->node_count();
  spec.n_fixed_ = 2;
  spec.n_latent_ = spec.n_nodes_ + 2;
  spec.fixed_labels_ = {"beta0", "beta1"};
  spec.gamma_design_ = gamma_design_rows(*spec.mesh_, sample, spec.n_latent_, spec.n_nodes_);
  spec.gamma_y_ = sample.y;
  return spec;
}

ModelSpec build_pm(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                   std::optional<CovariateShape> shape, std::optional<double> fixed_alpha) {
  if (sample.size() == 0) throw EmptySample("build_pm: empty sample");
  validate_prior_set(priors);
  if (priors.variant != ModelVariant::PM) {
    throw SpecMismatch("build_pm: prior set is not a PM set");
  }
  if (sample.kind != SamplerKind::Preferential) {
    throw SpecMismatch("build_pm: PM requires a preferential sample");
  }
  ModelSpec spec;
  spec.variant_ = FitVariant::PM;
  spec.mesh_ = std::move(mesh);
  spec.fem_ = std::move(fem);
  spec.priors_ = priors;
  spec.fixed_alpha_ = fixed_alpha;
  spec.layout_ = HyperLayout{true, !fixed_alpha.has_value()};
  spec.n_nodes_ = spec.mesh_->node_count();
  spec.n_fixed_ = 4;
  spec.n_latent_ = spec.n_nodes_ + 4;
  spec.fixed_labels_ = {"beta0", "beta1", "beta0_pp", "beta1_pp"};
  spec.gamma_design_ = gamma_design_rows(*spec.mesh_, sample, spec.n_latent_, spec.n_nodes_);
  spec.gamma_y_ = sample.y;

  LgcpParts parts =
      lgcp_parts(*spec.mesh_, *spec.fem_, sample, shape, spec.n_latent_, spec.n_nodes_ + 2);
  spec.lgcp_node_field_ = std::move(parts.node_field);
  spec.lgcp_node_fixed_ = std::move(parts.node_fixed);
  spec.lgcp_weights_ = std::move(parts.weights);
  spec.lgcp_point_field_ = std::move(parts.point_field);
  spec.lgcp_point_fixed_ = std::move(parts.point_fixed);
  return spec;
}

ModelSpec build_pp(const Sample& sample, std::shared_ptr<const Mesh> mesh,
                   std::shared_ptr<const FemMatrices> fem, const PriorSet& priors,
                   std::optional<CovariateShape> shape) {
  if (sample.size() == 0) throw EmptySample("build_pp: empty sample");
  validate_prior_set(priors);
  if (priors.variant != ModelVariant::IM) {
    throw SpecMismatch("build_pp: expects an IM prior set (spatial + fixed-effect priors)");
  }
  ModelSpec spec;
  spec.variant_ = FitVariant::PP;
  spec.mesh_ = std::move(mesh);
  spec.fem_ = std::move(fem);
  spec.priors_ = priors;
  spec.layout_ = HyperLayout{false, false};
  spec.n_nodes_ = spec.mesh_->node_count();
  spec.n_fixed_ = 2;
  spec.n_latent_ = spec.n_nodes_ + 2;
  spec.fixed_labels_ = {"beta0_pp", "beta1_pp"};

  LgcpParts parts =
      lgcp_parts(*spec.mesh_, *spec.fem_, sample, shape, spec.n_latent_, spec.n_nodes_);
  spec.lgcp_node_field_ = std::move(parts.node_field);
  spec.lgcp_node_fixed_ = std::move(parts.node_fixed);
  spec.lgcp_weights_ = std::move(parts.weights);
  spec.lgcp_point_field_ = std::move(parts.point_field);
  spec.lgcp_point_fixed_ = std::move(parts.point_fixed);
  return spec;
}

}  // namespace bayesfb
