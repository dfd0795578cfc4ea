#include "bayesfb/spde.hpp"

#include <cmath>

#include "bayesfb/errors.hpp"
#include "bayesfb/rng.hpp"

namespace bayesfb {

MaternParams matern_params(double rho, double sigma) {
  if (!(rho > 0.0) || !(sigma > 0.0)) {
    throw InvalidHyperparameter("matern_params: rho and sigma must be positive");
  }
  MaternParams p;
  p.rho = rho;
  p.sigma = sigma;
  p.kappa = std::sqrt(8.0 * p.nu) / rho;
  // Gamma(1) = Gamma(2) = 1, (4 pi)^{d/2} = 4 pi.
  p.tau = 1.0 / (p.kappa * sigma * std::sqrt(4.0 * M_PI));
  return p;
}

double matern_correlation(double h, double rho) {
  if (!(rho > 0.0)) throw InvalidHyperparameter("matern_correlation: rho must be positive");
  if (h < 0.0) throw InvalidHyperparameter("matern_correlation: h must be >= 0");
  const double kh = std::sqrt(8.0) * h / rho;
  if (kh < 1e-8) return 1.0;  // x K_1(x) -> 1 as x -> 0
  return kh * std::cyl_bessel_k(1.0, kh);
}

SparsePrecision precision_matrix(const MaternParams& params, const FemMatrices& fem) {
  const double k2 = params.kappa * params.kappa;
  const double t2 = params.tau * params.tau;

  Eigen::SparseMatrix<double> c_inv(fem.C.rows(), fem.C.cols());
  c_inv.setIdentity();
  for (int i = 0; i < fem.C.rows(); ++i) c_inv.coeffRef(i, i) = 1.0 / fem.c_diag[i];

  Eigen::SparseMatrix<double> q =
      t2 * (k2 * k2 * fem.C + 2.0 * k2 * fem.G +
            Eigen::SparseMatrix<double>(fem.G * c_inv * fem.G));
  q.makeCompressed();

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(q);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("precision_matrix: sparse Cholesky failed");
  }
  return SparsePrecision{std::move(q)};
}

Eigen::VectorXd sample_field(const SparsePrecision& precision, std::uint64_t seed) {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(precision.Q);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("sample_field: sparse Cholesky failed");
  }
  Rng rng(seed);
  Eigen::VectorXd z(precision.Q.rows());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // Q = P^-1 L L^T P, so x = P^-1 L^-T z has covariance Q^-1.
  Eigen::VectorXd y = llt.matrixU().solve(z);
  return llt.permutationPinv() * y;
}

}  // namespace bayesfb
