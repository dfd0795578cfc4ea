#pragma once

#include <Eigen/Sparse>
#include <array>
#include <span>
#include <vector>

namespace bayesfb {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Structured right-triangle mesh over (0,1)^2 plus an extension band.
// The interior grid has nx-by-ny nodes with spacing 1/(nx-1), 1/(ny-1);
// the band adds round(extension*(n-1)) node layers on each side so the
// unit-square boundary always passes through mesh lines.
struct Mesh {
  int nx = 0;           // nodes across the unit square, x direction
  int ny = 0;
  int ext_x = 0;        // extension node layers per side
  int ext_y = 0;
  double hx = 0.0;      // node spacing
  double hy = 0.0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<bool> interior;  // node lies in [0,1]^2 (index-exact)

  int cols() const { return nx + 2 * ext_x; }
  int rows() const { return ny + 2 * ext_y; }
  int node_count() const { return static_cast<int>(nodes.size()); }
  int node_index(int i, int j) const { return j * cols() + i; }
  double extended_area() const {
    return (cols() - 1) * hx * (rows() - 1) * hy;
  }
};

struct FemMatrices {
  Eigen::SparseMatrix<double> C;   // lumped mass (diagonal)
  Eigen::SparseMatrix<double> G;   // stiffness
  Eigen::VectorXd c_diag;          // diag(C)
  Eigen::VectorXd node_weights;    // dual-cell areas clipped to (0,1)^2
};

Mesh build_regular_mesh(int nx, int ny, double extension);

FemMatrices assemble_fem(const Mesh& mesh);

// Barycentric interpolation rows at the given locations; each row sums to 1.
Eigen::SparseMatrix<double> projector(const Mesh& mesh, std::span<const Point> locations);

}  // namespace bayesfb
