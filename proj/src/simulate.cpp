#include "bayesfb/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "bayesfb/errors.hpp"
#include "bayesfb/rng.hpp"
#include "bayesfb/spde.hpp"

namespace bayesfb {

CovariateShape covariate_shape_from_string(const std::string& name) {
  if (name == "a" || name == "A") return CovariateShape::A;
  if (name == "b" || name == "B") return CovariateShape::B;
  if (name == "c" || name == "C") return CovariateShape::C;
  throw InvalidShape("unknown covariate shape: " + name);
}

std::string to_string(CovariateShape shape) {
  switch (shape) {
    case CovariateShape::A: return "a";
    case CovariateShape::B: return "b";
    case CovariateShape::C: return "c";
  }
  throw InvalidShape("unknown covariate shape enum value");
}

double covariate_value(CovariateShape shape, const Point& p) {
  switch (shape) {
    case CovariateShape::A:
      return 0.5 + p.x + 0.8 * (p.y - 0.5) * (p.y - 0.5);
    case CovariateShape::B:
      return -1.0 + 1.7 * p.x * p.x + 0.3 / ((p.y - 0.5) * (p.y - 0.5) + 0.1);
    case CovariateShape::C: {
      const double sx = std::sin(p.x * 2.0 * M_PI);
      const double sy = std::sin(p.y * 2.0 * M_PI);
      return 0.7 + 0.5 * sx * sx + sy * sy;
    }
  }
  throw InvalidShape("unknown covariate shape enum value");
}

Eigen::VectorXd covariate_field(CovariateShape shape, std::span<const Point> locations) {
  Eigen::VectorXd values(locations.size());
  for (std::size_t i = 0; i < locations.size(); ++i) {
    values[i] = covariate_value(shape, locations[i]);
  }
  return values;
}

TruthRaster simulate_truth(const TruthParams& params, const Mesh& mesh, const FemMatrices& fem) {
  if (!(params.rho > 0.0) || !(params.sigma > 0.0) || !(params.phi > 0.0)) {
    throw InvalidHyperparameter("simulate_truth: rho, sigma and phi must be positive");
  }
  if (params.grid_n < 10) {
    throw InvalidHyperparameter("simulate_truth: grid_n must be >= 10");
  }

  TruthRaster raster;
  raster.params = params;
  raster.grid_n = params.grid_n;
  const int g = params.grid_n;
  raster.cell_area = 1.0 / (static_cast<double>(g) * g);
  raster.cells.reserve(static_cast<std::size_t>(g) * g);
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < g; ++i) {
      raster.cells.push_back({(i + 0.5) / g, (j + 0.5) / g});
    }
  }

  raster.covariate = covariate_field(params.shape, raster.cells);

  const MaternParams matern = matern_params(params.rho, params.sigma);
  const SparsePrecision precision = precision_matrix(matern, fem);
  const Eigen::VectorXd node_field = sample_field(precision, Rng::mix(params.seed, 1));
  raster.u = projector(mesh, raster.cells) * node_field;

  const int n = raster.cell_count();
  raster.eta.resize(n);
  raster.mu.resize(n);
  raster.y.resize(n);
  Rng rng(Rng::mix(params.seed, 2));
  for (int i = 0; i < n; ++i) {
    raster.eta[i] = params.beta0 + params.beta1 * raster.covariate[i] + raster.u[i];
    raster.mu[i] = std::exp(raster.eta[i]);
    // shape = phi, rate = phi/mu gives E[y] = mu, Var[y] = mu^2/phi.
    raster.y[i] = rng.gamma(params.phi, params.phi / raster.mu[i]);
  }
  return raster;
}

namespace {

Sample collect_sample(const TruthRaster& raster, std::vector<int> ids, SamplerKind kind, double r) {
  Sample sample;
  sample.kind = kind;
  sample.r = r;
  sample.cell_ids = std::move(ids);
  const int n = static_cast<int>(sample.cell_ids.size());
  sample.locations.reserve(n);
  sample.y.resize(n);
  sample.covariate.resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = sample.cell_ids[i];
    sample.locations.push_back(raster.cells[c]);
    sample.y[i] = raster.y[c];
    sample.covariate[i] = raster.covariate[c];
  }
  return sample;
}

}  // namespace

Sample sample_independent(const TruthRaster& raster, int n_s, std::uint64_t seed) {
  const int n_cells = raster.cell_count();
  if (n_s < 1 || n_s > n_cells) {
    throw SampleTooLarge("sample_independent: n_s must be in [1, cell count]");
  }
  std::vector<int> pool(n_cells);
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: first n_s entries become the draws.
  for (int i = 0; i < n_s; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(n_cells - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n_s);
  return collect_sample(raster, std::move(pool), SamplerKind::Independent, 0.0);
}

Eigen::VectorXd preferential_first_draw_probs(const TruthRaster& raster, double r) {
  const double y_max = raster.y.maxCoeff();
  Eigen::VectorXd w = ((raster.y.array() - y_max) * r).exp();
  return w / w.sum();
}

Sample sample_preferential(const TruthRaster& raster, int n_s, double r, std::uint64_t seed) {
  const int n_cells = raster.cell_count();
  if (n_s < 1) throw SampleTooLarge("sample_preferential: n_s must be >= 1");
  if (static_cast<double>(n_s) / n_cells > 0.1 + 1e-12) {
    throw SampleTooLarge("sample_preferential: n_s / n_y must be <= 0.1");
  }
  if (r < 0.0) throw InvalidHyperparameter("sample_preferential: r must be >= 0");

  const Eigen::VectorXd probs = preferential_first_draw_probs(raster, r);
  if (probs.maxCoeff() * n_s > 1.0) {
    throw PreferentialityTooHigh(
        "sample_preferential: highest-value cells would be exhausted (max prob * n_s > 1)");
  }

  const double y_max = raster.y.maxCoeff();
  std::vector<double> weight(n_cells);
  double total = 0.0;
  for (int i = 0; i < n_cells; ++i) {
    weight[i] = std::exp(r * (raster.y[i] - y_max));
    total += weight[i];
  }

  Rng rng(seed);
  std::vector<int> ids;
  ids.reserve(n_s);
  for (int draw = 0; draw < n_s; ++draw) {
    const double target = rng.uniform() * total;
    double acc = 0.0;
    int chosen = -1;
    for (int i = 0; i < n_cells; ++i) {
      acc += weight[i];
      if (acc >= target && weight[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) {  // guard against fp round-off at the top of the scan
      for (int i = n_cells - 1; i >= 0; --i) {
        if (weight[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    ids.push_back(chosen);
    total -= weight[chosen];
    weight[chosen] = 0.0;
  }
  return collect_sample(raster, std::move(ids), SamplerKind::Preferential, r);
}

double adjust_preferentiality(const TruthRaster& raster, int n_s, double r_init) {
  double r = r_init;
  while (r > 1e-12 && preferential_first_draw_probs(raster, r).maxCoeff() * n_s > 1.0) {
    r *= 0.5;
  }
  return r;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

namespace {

void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

}  // namespace

std::string raster_csv(const TruthRaster& raster) {
  std::string out = "cell_id,x_coord,y_coord,covariate,u,eta,mu,y\n";
  for (int i = 0; i < raster.cell_count(); ++i) {
    out += std::to_string(i);
    for (const double v : {raster.cells[i].x, raster.cells[i].y, raster.covariate[i], raster.u[i],
                           raster.eta[i], raster.mu[i], raster.y[i]}) {
      out += ',';
      append_num(out, v);
    }
    out += '\n';
  }
  return out;
}

std::string sample_csv(const TruthRaster& raster, const Sample& sample) {
  std::string out = "cell_id,x_coord,y_coord,covariate,u,eta,mu,y,draw_order,sampler,r\n";
  for (int k = 0; k < sample.size(); ++k) {
    const int i = sample.cell_ids[k];
    out += std::to_string(i);
    for (const double v : {raster.cells[i].x, raster.cells[i].y, raster.covariate[i], raster.u[i],
                           raster.eta[i], raster.mu[i], raster.y[i]}) {
      out += ',';
      append_num(out, v);
    }
    out += ',' + std::to_string(k);
    out += sample.kind == SamplerKind::Independent ? ",independent," : ",preferential,";
    append_num(out, sample.r);
    out += '\n';
  }
  return out;
}

}  // namespace bayesfb
