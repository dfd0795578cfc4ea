#pragma once

#include <Eigen/Sparse>
#include <optional>

namespace bayesfb {

// Takahashi selected inversion: given a sparse Cholesky factorization
// H = P^T L L^T P, computes the entries of H^{-1} on the sparsity pattern of
// L (plus the diagonal) in one backward pass. Queries are in original
// (unpermuted) indices; entries outside the pattern return nullopt.
class SelectedInverse {
 public:
  explicit SelectedInverse(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt);

  double variance(int i) const;
  std::optional<double> covariance(int i, int j) const;

 private:
  Eigen::SparseMatrix<double> l_;       // lower factor, compressed
  Eigen::VectorXi perm_;                // original index -> permuted index
  Eigen::VectorXd sigma_values_;        // aligned with l_'s value array
  std::optional<double> permuted_entry(int pi, int pj) const;
};

}  // namespace bayesfb
