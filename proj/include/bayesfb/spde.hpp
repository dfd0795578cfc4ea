#pragma once

#include <Eigen/Sparse>
#include <cstdint>

#include "bayesfb/mesh.hpp"

namespace bayesfb {

// Matern field parameterization with smoothness fixed at nu = 1 (alpha = 2,
// d = 2): kappa = sqrt(8 nu)/rho and tau^2 = Gamma(nu) [Gamma(alpha)
// (4 pi)^{d/2} kappa^2 sigma^2]^{-1}.
struct MaternParams {
  double rho = 0.0;
  double sigma = 0.0;
  double nu = 1.0;
  int d = 2;
  double alpha_smooth = 2.0;  // nu + d/2
  double kappa = 0.0;
  double tau = 0.0;
};

struct SparsePrecision {
  Eigen::SparseMatrix<double> Q;
};

MaternParams matern_params(double rho, double sigma);

// Matern correlation at distance h for range rho (nu = 1); equals 1 at h = 0
// and ~0.139 at h = rho (the range convention used throughout).
double matern_correlation(double h, double rho);

// GMRF precision Q = tau^2 (kappa^4 C + 2 kappa^2 G + G C^{-1} G) on the mesh
// nodes, validated positive definite.
SparsePrecision precision_matrix(const MaternParams& params, const FemMatrices& fem);

// One draw from N(0, Q^{-1}) by back-substitution of standard normals.
Eigen::VectorXd sample_field(const SparsePrecision& precision, std::uint64_t seed);

}  // namespace bayesfb
