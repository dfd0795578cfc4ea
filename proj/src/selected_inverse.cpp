#include "bayesfb/selected_inverse.hpp"

#include <algorithm>

#include "bayesfb/errors.hpp"

namespace bayesfb {

SelectedInverse::SelectedInverse(const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>& llt) {
  l_ = llt.matrixL();
  l_.makeCompressed();
  perm_ = llt.permutationP().indices();

  const int n = l_.rows();
  const int* outer = l_.outerIndexPtr();
  const int* inner = l_.innerIndexPtr();
  const double* lval = l_.valuePtr();
  sigma_values_.resize(l_.nonZeros());

  // Entry lookup in column k (rows sorted ascending, diagonal first).
  const auto find_entry = [&](int row, int col) -> int {
    const int* begin = inner + outer[col];
    const int* end = inner + outer[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    if (it == end || *it != row) return -1;
    return static_cast<int>(it - inner);
  };
  // Sigma(i,k) for i >= k from already-computed columns.
  const auto sigma_at = [&](int i, int k) -> double {
    const int pos = find_entry(i, k);
    return pos >= 0 ? sigma_values_[pos] : 0.0;
  };

  // Backward Takahashi recursion:
  //   Sigma_ij = delta_ij / L_jj^2 - (1/L_jj) sum_{k>j} L_kj Sigma_ik,
  // evaluated on the (fill-closed) pattern of L.
  for (int j = n - 1; j >= 0; --j) {
    const int start = outer[j];
    const int stop = outer[j + 1];
    const double ljj = lval[start];  // diagonal leads its column
    for (int p = stop - 1; p > start; --p) {
      const int i = inner[p];
      double s = 0.0;
      for (int q = start + 1; q < stop; ++q) {
        const int k = inner[q];
        const double sik = i >= k ? sigma_at(i, k) : sigma_at(k, i);
        s += lval[q] * sik;
      }
      sigma_values_[p] = -s / ljj;
    }
    double s = 0.0;
    for (int q = start + 1; q < stop; ++q) {
      s += lval[q] * sigma_values_[q];
    }
    sigma_values_[start] = 1.0 / (ljj * ljj) - s / ljj;
  }
}

std::optional<double> SelectedInverse::permuted_entry(int pi, int pj) const {
  if (pi < pj) std::swap(pi, pj);
  const int* outer = l_.outerIndexPtr();
  const int* inner = l_.innerIndexPtr();
  const int* begin = inner + outer[pj];
  const int* end = inner + outer[pj + 1];
  const int* it = std::lower_bound(begin, end, pi);
  if (it == end || *it != pi) return std::nullopt;
  return sigma_values_[it - inner];
}

double SelectedInverse::variance(int i) const {
  const auto v = permuted_entry(perm_[i], perm_[i]);
  if (!v) throw ShapeError("SelectedInverse: missing diagonal entry");
  return *v;
}

std::optional<double> SelectedInverse::covariance(int i, int j) const {
  return permuted_entry(perm_[i], perm_[j]);
}

}  // namespace bayesfb
