#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace bayesfb {

struct NormalPrior {
  double mean = 0.0;
  double precision = 1.0;

  bool operator==(const NormalPrior&) const = default;
};

// Prior on log(phi): exp(theta) ~ Gamma(shape, rate).
struct LogGammaPrior {
  double shape = 1.0;
  double rate = 5e-5;

  bool operator==(const LogGammaPrior&) const = default;
};

// Exponentially transformed normal prior on the spatial hyperparameters:
// log(sigma) = log(sigma0) + theta1, log(rho) = log(rho0) + theta2 with
// theta1 ~ N(mu1, sigma1^2), theta2 ~ N(mu2, sigma2^2).
struct ENPriorSpec {
  double rho0 = 1.0;
  double sigma0 = 1.0;
  double mu1 = 0.0;
  double sigma1 = 1.0;
  double mu2 = 0.0;
  double sigma2 = 1.0;

  bool operator==(const ENPriorSpec&) const = default;
};

// Penalized-complexity prior: lambda1 = -log(p_rho0) rho0^{d/2},
// lambda2 = -log(p_sigma0) / sigma0, d = 2.
struct PCPriorSpec {
  double rho0 = 1.0;
  double p_rho0 = 0.5;
  double sigma0 = 1.0;
  double p_sigma0 = 0.5;
  static constexpr int d = 2;

  double lambda1() const;
  double lambda2() const;

  bool operator==(const PCPriorSpec&) const = default;
};

// One-dimensional numeric prior on the natural scale: support points with
// log-density values, piecewise-linear interpolation in log-density, linear
// tail extrapolation cut to -inf beyond 3x the support span. Construction
// renormalizes so the trapezoid integral over the support is 1.
class TabulatedPrior {
 public:
  TabulatedPrior() = default;
  TabulatedPrior(std::vector<double> support, std::vector<double> log_density);

  static TabulatedPrior from_densities(std::vector<double> support,
                                       std::vector<double> density);

  double log_density(double x) const;
  double density(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  double mean() const;
  double sd() const;

  // Trapezoid integral of the density over the support (1 after normalization).
  double integral() const;

  const std::vector<double>& support() const { return x_; }
  const std::vector<double>& log_densities() const { return logd_; }
  int size() const { return static_cast<int>(x_.size()); }

  bool operator==(const TabulatedPrior&) const = default;

 private:
  std::vector<double> x_;
  std::vector<double> logd_;
  std::vector<double> cum_;  // cumulative trapezoid masses
};

struct TabulatedSpatial {
  TabulatedPrior rho;
  TabulatedPrior sigma;

  bool operator==(const TabulatedSpatial&) const = default;
};

using SpatialPrior = std::variant<ENPriorSpec, PCPriorSpec, TabulatedSpatial>;

enum class ModelVariant { IM, PM };
enum class SpatialFamily { EN, PC };

// Full prior specification of one model variant (Eq.-10 layout): the IM
// carries no point-process entries, the PM carries all of them.
struct PriorSet {
  ModelVariant variant = ModelVariant::IM;
  NormalPrior beta0{0.0, 0.001};
  NormalPrior beta1{0.0, 0.001};
  std::optional<NormalPrior> beta0_pp;
  std::optional<NormalPrior> beta1_pp;
  SpatialPrior spatial = PCPriorSpec{};
  LogGammaPrior phi{1.0, 5e-5};
  std::optional<NormalPrior> alpha_copy;

  bool operator==(const PriorSet&) const = default;
};

// Layout of the internal-scale hyperparameter vector
// (log rho, log sigma [, log phi] [, alpha]).
struct HyperLayout {
  bool has_phi = true;
  bool has_alpha = false;

  int dim() const { return 2 + (has_phi ? 1 : 0) + (has_alpha ? 1 : 0); }
  int idx_log_rho() const { return 0; }
  int idx_log_sigma() const { return 1; }
  int idx_log_phi() const { return 2; }
  int idx_alpha() const { return 2 + (has_phi ? 1 : 0); }
};

double pc_joint_density(double rho, double sigma, const PCPriorSpec& spec);
double en_joint_density(double rho, double sigma, const ENPriorSpec& spec);

// CDF of the PC range marginal (Frechet form exp(-lambda1 rho^{-d/2})) and
// its inverse.
double pc_cdf_rho(double rho, const PCPriorSpec& spec);
double pc_quantile_rho(double p, const PCPriorSpec& spec);

// Joint log prior of the internal-scale hyperparameter vector, including the
// change-of-variable Jacobians for the log-transformed components.
double log_prior_hyper(const Eigen::VectorXd& theta, const PriorSet& priors,
                       const HyperLayout& layout);

// Throws SpecMismatch when the set violates its variant's layout.
void validate_prior_set(const PriorSet& priors);

// Base (uninformative) defaults: beta ~ N(0, 0.001), log-Gamma(1, 5e-5) on
// log phi, PC(rho0 = sqrt(2)/5, 0.5; 1, 0.5) or the EN analog, alpha ~ N(0,1).
PriorSet base_priors(ModelVariant variant, SpatialFamily family);

std::string to_json_string(const PriorSet& priors);
PriorSet prior_set_from_json_string(const std::string& text);

}  // namespace bayesfb
