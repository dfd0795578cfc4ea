#include "bayesfb/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "bayesfb/errors.hpp"

namespace bayesfb {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace

double PCPriorSpec::lambda1() const {
  return -std::log(p_rho0) * std::pow(rho0, 0.5 * d);
}

double PCPriorSpec::lambda2() const { return -std::log(p_sigma0) / sigma0; }

// ---------------------------------------------------------------------------
// TabulatedPrior
// ---------------------------------------------------------------------------

TabulatedPrior::TabulatedPrior(std::vector<double> support, std::vector<double> log_density)
    : x_(std::move(support)), logd_(std::move(log_density)) {
  if (x_.size() != logd_.size()) {
    throw ShapeError("TabulatedPrior: support and log-density sizes differ");
  }
  if (x_.size() < 5) {
    throw InsufficientSupport("TabulatedPrior: needs at least 5 support points");
  }
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) {
      throw InvalidHyperparameter("TabulatedPrior: support must be strictly increasing");
    }
  }
  // Normalize so the trapezoid integral over the support equals 1.
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    total += 0.5 * (std::exp(logd_[i]) + std::exp(logd_[i + 1])) * (x_[i + 1] - x_[i]);
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidHyperparameter("TabulatedPrior: density does not integrate to a positive value");
  }
  const double log_total = std::log(total);
  for (auto& v : logd_) v -= log_total;

  cum_.assign(x_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    cum_[i + 1] = cum_[i] + 0.5 * (std::exp(logd_[i]) + std::exp(logd_[i + 1])) * (x_[i + 1] - x_[i]);
  }
}

TabulatedPrior TabulatedPrior::from_densities(std::vector<double> support,
                                              std::vector<double> density) {
  std::vector<double> logd(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) {
    if (density[i] < 0.0) throw InvalidHyperparameter("TabulatedPrior: negative density");
    logd[i] = density[i] > 0.0 ? std::log(density[i]) : -750.0;
  }
  return TabulatedPrior(std::move(support), std::move(logd));
}

double TabulatedPrior::log_density(double x) const {
  const double span = x_.back() - x_.front();
  if (x < x_.front()) {
    if (x < x_.front() - 3.0 * span) return kNegInf;
    const double slope = (logd_[1] - logd_[0]) / (x_[1] - x_[0]);
    return logd_.front() + slope * (x - x_.front());
  }
  if (x > x_.back()) {
    if (x > x_.back() + 3.0 * span) return kNegInf;
    const std::size_t n = x_.size();
    const double slope = (logd_[n - 1] - logd_[n - 2]) / (x_[n - 1] - x_[n - 2]);
    return logd_.back() + slope * (x - x_.back());
  }
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t hi = std::min<std::size_t>(it - x_.begin(), x_.size() - 1);
  const std::size_t lo = hi == 0 ? 0 : hi - 1;
  if (hi == lo) return logd_[lo];
  const double t = (x - x_[lo]) / (x_[hi] - x_[lo]);
  return (1.0 - t) * logd_[lo] + t * logd_[hi];
}

double TabulatedPrior::density(double x) const { return std::exp(log_density(x)); }

double TabulatedPrior::integral() const { return cum_.back(); }

double TabulatedPrior::cdf(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return 1.0;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t hi = it - x_.begin();
  const std::size_t lo = hi - 1;
  const double d0 = std::exp(logd_[lo]);
  const double d1 = std::exp(logd_[hi]);
  const double w = x_[hi] - x_[lo];
  const double t = x - x_[lo];
  // Linear density within the segment: mass = d0 t + (d1-d0) t^2 / (2w).
  return std::min(1.0, cum_[lo] + d0 * t + 0.5 * (d1 - d0) * t * t / w);
}

double TabulatedPrior::quantile(double p) const {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw InvalidHyperparameter("TabulatedPrior::quantile: p must be in (0,1)");
  }
  const double target = p * cum_.back();
  std::size_t lo = 0;
  while (lo + 2 < cum_.size() && cum_[lo + 1] < target) ++lo;
  const double d0 = std::exp(logd_[lo]);
  const double d1 = std::exp(logd_[lo + 1]);
  const double w = x_[lo + 1] - x_[lo];
  const double need = target - cum_[lo];
  const double a = 0.5 * (d1 - d0) / w;
  double t;
  if (std::abs(a) < 1e-14 * std::max(d0, 1.0)) {
    t = d0 > 0.0 ? need / d0 : 0.0;
  } else {
    const double disc = std::max(0.0, d0 * d0 + 4.0 * a * need);
    t = (-d0 + std::sqrt(disc)) / (2.0 * a);
  }
  return x_[lo] + std::clamp(t, 0.0, w);
}

double TabulatedPrior::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    const double d0 = std::exp(logd_[i]);
    const double d1 = std::exp(logd_[i + 1]);
    const double w = x_[i + 1] - x_[i];
    m += w / 6.0 * (x_[i] * (2.0 * d0 + d1) + x_[i + 1] * (d0 + 2.0 * d1));
  }
  return m;
}

double TabulatedPrior::sd() const {
  const double m = mean();
  double s2 = 0.0;
  for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
    // Simpson on x^2 * density with linear density per segment.
    const double d0 = std::exp(logd_[i]);
    const double d1 = std::exp(logd_[i + 1]);
    const double w = x_[i + 1] - x_[i];
    const double xm = 0.5 * (x_[i] + x_[i + 1]);
    const double dm = 0.5 * (d0 + d1);
    s2 += w / 6.0 * (x_[i] * x_[i] * d0 + 4.0 * xm * xm * dm + x_[i + 1] * x_[i + 1] * d1);
  }
  return std::sqrt(std::max(0.0, s2 - m * m));
}

// ---------------------------------------------------------------------------
// Joint densities and PC marginals
// ---------------------------------------------------------------------------

double pc_joint_density(double rho, double sigma, const PCPriorSpec& spec) {
  if (!(rho > 0.0)) throw InvalidHyperparameter("pc_joint_density: rho must be positive");
  if (sigma < 0.0) throw InvalidHyperparameter("pc_joint_density: sigma must be >= 0");
  const double l1 = spec.lambda1();
  const double l2 = spec.lambda2();
  const double dh = 0.5 * PCPriorSpec::d;
  return dh * l1 * std::pow(rho, -1.0 - dh) * std::exp(-l1 * std::pow(rho, -dh)) * l2 *
         std::exp(-l2 * sigma);
}

double en_joint_density(double rho, double sigma, const ENPriorSpec& spec) {
  if (!(rho > 0.0) || !(sigma > 0.0)) {
    throw InvalidHyperparameter("en_joint_density: rho and sigma must be positive");
  }
  const double z1 = (std::log(sigma / spec.sigma0) - spec.mu1) / spec.sigma1;
  const double z2 = (std::log(rho / spec.rho0) - spec.mu2) / spec.sigma2;
  return std::exp(-0.5 * z1 * z1 - 0.5 * z2 * z2) /
         (2.0 * M_PI * spec.sigma1 * spec.sigma2 * rho * sigma);
}

double pc_cdf_rho(double rho, const PCPriorSpec& spec) {
  if (!(rho > 0.0)) return 0.0;
  return std::exp(-spec.lambda1() * std::pow(rho, -0.5 * PCPriorSpec::d));
}

double pc_quantile_rho(double p, const PCPriorSpec& spec) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw InvalidHyperparameter("pc_quantile_rho: p must be in (0,1)");
  }
  return std::pow(spec.lambda1() / (-std::log(p)), 2.0 / PCPriorSpec::d);
}

// ---------------------------------------------------------------------------
// Internal-scale joint log prior
// ---------------------------------------------------------------------------

namespace {

// log prior of (log rho, log sigma) including the exp-transform Jacobians.
double spatial_log_prior_internal(double t_rho, double t_sigma, const SpatialPrior& spatial) {
  if (const auto* en = std::get_if<ENPriorSpec>(&spatial)) {
    return log_normal_density(t_rho - std::log(en->rho0), en->mu2, en->sigma2) +
           log_normal_density(t_sigma - std::log(en->sigma0), en->mu1, en->sigma1);
  }
  if (const auto* pc = std::get_if<PCPriorSpec>(&spatial)) {
    const double l1 = pc->lambda1();
    const double l2 = pc->lambda2();
    // d = 2 marginals: rho ~ lambda1 rho^-2 exp(-lambda1/rho), sigma ~ Exp(lambda2).
    const double lp_rho = std::log(l1) - t_rho - l1 * std::exp(-t_rho);
    const double lp_sigma = std::log(l2) - l2 * std::exp(t_sigma) + t_sigma;
    return lp_rho + lp_sigma;
  }
  const auto& tab = std::get<TabulatedSpatial>(spatial);
  return tab.rho.log_density(std::exp(t_rho)) + t_rho +
         tab.sigma.log_density(std::exp(t_sigma)) + t_sigma;
}

double log_gamma_log_prior(double t, const LogGammaPrior& prior) {
  // exp(t) ~ Gamma(shape, rate) transformed to t.
  return prior.shape * std::log(prior.rate) - std::lgamma(prior.shape) + prior.shape * t -
         prior.rate * std::exp(t);
}

}  // namespace

double log_prior_hyper(const Eigen::VectorXd& theta, const PriorSet& priors,
                       const HyperLayout& layout) {
  if (theta.size() != layout.dim()) {
    throw ShapeError("log_prior_hyper: theta dimension does not match the layout");
  }
  double lp = spatial_log_prior_internal(theta[layout.idx_log_rho()],
                                         theta[layout.idx_log_sigma()], priors.spatial);
  if (layout.has_phi) {
    lp += log_gamma_log_prior(theta[layout.idx_log_phi()], priors.phi);
  }
  if (layout.has_alpha) {
    if (!priors.alpha_copy) {
      throw SpecMismatch("log_prior_hyper: layout has alpha but prior set has no alpha prior");
    }
    const NormalPrior& a = *priors.alpha_copy;
    lp += log_normal_density(theta[layout.idx_alpha()], a.mean, 1.0 / std::sqrt(a.precision));
  }
  return lp;
}

void validate_prior_set(const PriorSet& priors) {
  const bool has_pp = priors.beta0_pp || priors.beta1_pp || priors.alpha_copy;
  if (priors.variant == ModelVariant::IM && has_pp) {
    throw SpecMismatch("prior set: IM variant must not carry point-process priors");
  }
  if (priors.variant == ModelVariant::PM &&
      !(priors.beta0_pp && priors.beta1_pp && priors.alpha_copy)) {
    throw SpecMismatch("prior set: PM variant requires beta0', beta1' and alpha priors");
  }
  if (!(priors.beta0.precision > 0.0) || !(priors.beta1.precision > 0.0)) {
    throw InvalidHyperparameter("prior set: fixed-effect precisions must be positive");
  }
  if (!(priors.phi.shape > 0.0) || !(priors.phi.rate > 0.0)) {
    throw InvalidHyperparameter("prior set: log-Gamma parameters must be positive");
  }
  if (const auto* en = std::get_if<ENPriorSpec>(&priors.spatial)) {
    if (!(en->rho0 > 0.0) || !(en->sigma0 > 0.0) || !(en->sigma1 > 0.0) || !(en->sigma2 > 0.0)) {
      throw InvalidHyperparameter("prior set: invalid EN spec");
    }
  } else if (const auto* pc = std::get_if<PCPriorSpec>(&priors.spatial)) {
    if (!(pc->rho0 > 0.0) || !(pc->sigma0 > 0.0) || !(pc->p_rho0 > 0.0) || !(pc->p_rho0 < 1.0) ||
        !(pc->p_sigma0 > 0.0) || !(pc->p_sigma0 < 1.0)) {
      throw InvalidHyperparameter("prior set: invalid PC spec");
    }
  }
}

PriorSet base_priors(ModelVariant variant, SpatialFamily family) {
  PriorSet priors;
  priors.variant = variant;
  const double rho0 = std::sqrt(2.0) / 5.0;  // domain diagonal / 5
  if (family == SpatialFamily::PC) {
    priors.spatial = PCPriorSpec{rho0, 0.5, 1.0, 0.5};
  } else {
    priors.spatial = ENPriorSpec{rho0, 1.0, 0.0, 1.0, 0.0, 1.0};
  }
  if (variant == ModelVariant::PM) {
    priors.beta0_pp = NormalPrior{0.0, 0.001};
    priors.beta1_pp = NormalPrior{0.0, 0.001};
    priors.alpha_copy = NormalPrior{0.0, 1.0};
  }
  return priors;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json normal_to_json(const NormalPrior& p) { return {{"mean", p.mean}, {"precision", p.precision}}; }

NormalPrior normal_from_json(const json& j) {
  return NormalPrior{j.at("mean").get<double>(), j.at("precision").get<double>()};
}

json tabulated_to_json(const TabulatedPrior& p) {
  return {{"support", p.support()}, {"log_density", p.log_densities()}};
}

TabulatedPrior tabulated_from_json(const json& j) {
  return TabulatedPrior(j.at("support").get<std::vector<double>>(),
                        j.at("log_density").get<std::vector<double>>());
}

}  // namespace

std::string to_json_string(const PriorSet& priors) {
  json j;
  j["variant"] = priors.variant == ModelVariant::IM ? "IM" : "PM";
  j["beta0"] = normal_to_json(priors.beta0);
  j["beta1"] = normal_to_json(priors.beta1);
  if (priors.beta0_pp) j["beta0_pp"] = normal_to_json(*priors.beta0_pp);
  if (priors.beta1_pp) j["beta1_pp"] = normal_to_json(*priors.beta1_pp);
  if (priors.alpha_copy) j["alpha"] = normal_to_json(*priors.alpha_copy);
  j["phi"] = {{"shape", priors.phi.shape}, {"rate", priors.phi.rate}};

  if (const auto* en = std::get_if<ENPriorSpec>(&priors.spatial)) {
    j["spatial"] = {{"family", "EN"},   {"rho0", en->rho0},     {"sigma0", en->sigma0},
                    {"mu1", en->mu1},   {"sigma1", en->sigma1}, {"mu2", en->mu2},
                    {"sigma2", en->sigma2}};
  } else if (const auto* pc = std::get_if<PCPriorSpec>(&priors.spatial)) {
    j["spatial"] = {{"family", "PC"},
                    {"rho0", pc->rho0},
                    {"p_rho0", pc->p_rho0},
                    {"sigma0", pc->sigma0},
                    {"p_sigma0", pc->p_sigma0}};
  } else {
    const auto& tab = std::get<TabulatedSpatial>(priors.spatial);
    j["spatial"] = {{"family", "tabulated"},
                    {"rho", tabulated_to_json(tab.rho)},
                    {"sigma", tabulated_to_json(tab.sigma)}};
  }
  return j.dump(2);
}

PriorSet prior_set_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  PriorSet priors;
  priors.variant = j.at("variant").get<std::string>() == "PM" ? ModelVariant::PM : ModelVariant::IM;
  priors.beta0 = normal_from_json(j.at("beta0"));
  priors.beta1 = normal_from_json(j.at("beta1"));
  if (j.contains("beta0_pp")) priors.beta0_pp = normal_from_json(j.at("beta0_pp"));
  if (j.contains("beta1_pp")) priors.beta1_pp = normal_from_json(j.at("beta1_pp"));
  if (j.contains("alpha")) priors.alpha_copy = normal_from_json(j.at("alpha"));
  priors.phi = LogGammaPrior{j.at("phi").at("shape").get<double>(),
                             j.at("phi").at("rate").get<double>()};

  const json& s = j.at("spatial");
  const std::string family = s.at("family").get<std::string>();
  if (family == "EN") {
    priors.spatial = ENPriorSpec{s.at("rho0").get<double>(),   s.at("sigma0").get<double>(),
                                 s.at("mu1").get<double>(),    s.at("sigma1").get<double>(),
                                 s.at("mu2").get<double>(),    s.at("sigma2").get<double>()};
  } else if (family == "PC") {
    priors.spatial = PCPriorSpec{s.at("rho0").get<double>(), s.at("p_rho0").get<double>(),
                                 s.at("sigma0").get<double>(), s.at("p_sigma0").get<double>()};
  } else {
    priors.spatial = TabulatedSpatial{tabulated_from_json(s.at("rho")),
                                      tabulated_from_json(s.at("sigma"))};
  }
  validate_prior_set(priors);
  return priors;
}

}  // namespace bayesfb
