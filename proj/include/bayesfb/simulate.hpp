#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bayesfb/mesh.hpp"

namespace bayesfb {

enum class CovariateShape { A, B, C };

CovariateShape covariate_shape_from_string(const std::string& name);
std::string to_string(CovariateShape shape);

double covariate_value(CovariateShape shape, const Point& p);
Eigen::VectorXd covariate_field(CovariateShape shape, std::span<const Point> locations);

struct TruthParams {
  CovariateShape shape = CovariateShape::A;
  double rho = 0.5;
  double sigma = 1.0;
  double beta0 = -1.0;
  double beta1 = 1.0;
  double phi = 15.0;
  int grid_n = 50;
  std::uint64_t seed = 0;
};

// Realized generative surface on a grid of cell centers over (0,1)^2:
// eta = beta0 + beta1 x + u, mu = exp(eta), y ~ Gamma(mean mu, precision phi).
struct TruthRaster {
  TruthParams params;
  int grid_n = 0;
  double cell_area = 0.0;
  std::vector<Point> cells;
  Eigen::VectorXd covariate;
  Eigen::VectorXd u;
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  Eigen::VectorXd y;

  int cell_count() const { return static_cast<int>(cells.size()); }
};

enum class SamplerKind { Independent, Preferential };

struct Sample {
  std::vector<int> cell_ids;  // in draw order, no repeats
  std::vector<Point> locations;
  Eigen::VectorXd y;
  Eigen::VectorXd covariate;
  SamplerKind kind = SamplerKind::Independent;
  double r = 0.0;

  int size() const { return static_cast<int>(cell_ids.size()); }
};

TruthRaster simulate_truth(const TruthParams& params, const Mesh& mesh, const FemMatrices& fem);

Sample sample_independent(const TruthRaster& raster, int n_s, std::uint64_t seed);

// Sequential without-replacement draws with P(s_i) proportional to
// exp(r y(s_i)), renormalized after each draw.
Sample sample_preferential(const TruthRaster& raster, int n_s, double r, std::uint64_t seed);

// First-draw probabilities of the preferential sampler (the Eq.-13 softmax).
Eigen::VectorXd preferential_first_draw_probs(const TruthRaster& raster, double r);

// Halves r until the exhaustion precondition max_prob * n_s <= 1 holds.
double adjust_preferentiality(const TruthRaster& raster, int n_s, double r_init);

std::string raster_csv(const TruthRaster& raster);
std::string sample_csv(const TruthRaster& raster, const Sample& sample);

}  // namespace bayesfb
