#include "bayesfb/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "bayesfb/errors.hpp"

namespace bayesfb {

Mesh build_regular_mesh(int nx, int ny, double extension) {
  if (nx < 2 || ny < 2) throw InvalidMesh("build_regular_mesh: nx and ny must be >= 2");
  if (extension < 0.0) throw InvalidMesh("build_regular_mesh: extension must be >= 0");

  Mesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.hx = 1.0 / (nx - 1);
  mesh.hy = 1.0 / (ny - 1);
  mesh.ext_x = static_cast<int>(std::llround(extension * (nx - 1)));
  mesh.ext_y = static_cast<int>(std::llround(extension * (ny - 1)));

  const int cols = mesh.cols();
  const int rows = mesh.rows();
  mesh.nodes.resize(static_cast<std::size_t>(cols) * rows);
  mesh.interior.resize(mesh.nodes.size());
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < cols; ++i) {
      const int idx = mesh.node_index(i, j);
      mesh.nodes[idx] = {(i - mesh.ext_x) * mesh.hx, (j - mesh.ext_y) * mesh.hy};
      mesh.interior[idx] = i >= mesh.ext_x && i <= mesh.ext_x + nx - 1 &&
                           j >= mesh.ext_y && j <= mesh.ext_y + ny - 1;
    }
  }

  // Each cell splits along the LL->UR diagonal: (LL,LR,UR) and (LL,UR,UL),
  // both counterclockwise.
  mesh.triangles.reserve(2 * static_cast<std::size_t>(cols - 1) * (rows - 1));
  for (int j = 0; j + 1 < rows; ++j) {
    for (int i = 0; i + 1 < cols; ++i) {
      const int ll = mesh.node_index(i, j);
      const int lr = mesh.node_index(i + 1, j);
      const int ul = mesh.node_index(i, j + 1);
      const int ur = mesh.node_index(i + 1, j + 1);
      mesh.triangles.push_back({ll, lr, ur});
      mesh.triangles.push_back({ll, ur, ul});
    }
  }
  return mesh;
}

namespace {

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

// A triangle lies inside the unit square iff all its corner indices do;
// the square boundary coincides with mesh lines by construction.
bool triangle_in_unit_square(const Mesh& mesh, const std::array<int, 3>& tri) {
  for (const int v : tri) {
    const int i = v % mesh.cols();
    const int j = v / mesh.cols();
    if (i < mesh.ext_x || i > mesh.ext_x + mesh.nx - 1) return false;
    if (j < mesh.ext_y || j > mesh.ext_y + mesh.ny - 1) return false;
  }
  return true;
}

}  // namespace

FemMatrices assemble_fem(const Mesh& mesh) {
  const int n = mesh.node_count();
  FemMatrices fem;
  fem.c_diag = Eigen::VectorXd::Zero(n);
  fem.node_weights = Eigen::VectorXd::Zero(n);

  std::vector<Eigen::Triplet<double>> g_triplets;
  g_triplets.reserve(9 * mesh.triangles.size());

  for (const auto& tri : mesh.triangles) {
    const Point& p0 = mesh.nodes[tri[0]];
    const Point& p1 = mesh.nodes[tri[1]];
    const Point& p2 = mesh.nodes[tri[2]];
    const double area = signed_area(p0, p1, p2);
    if (!(area > 1e-14)) throw DegenerateElement("assemble_fem: nonpositive triangle area");

    // Row-sum lumping of the consistent P1 mass matrix: area/3 per corner.
    const bool inside = triangle_in_unit_square(mesh, tri);
    for (const int v : tri) {
      fem.c_diag[v] += area / 3.0;
      if (inside) fem.node_weights[v] += area / 3.0;
    }

    // P1 stiffness: grad(lambda_k) = (b_k, c_k) / (2A) with
    // b_k = y_{k+1} - y_{k+2}, c_k = x_{k+2} - x_{k+1} (cyclic).
    const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
    const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        g_triplets.emplace_back(tri[k], tri[l], (b[k] * b[l] + c[k] * c[l]) / (4.0 * area));
      }
    }
  }

  fem.C.resize(n, n);
  std::vector<Eigen::Triplet<double>> c_triplets;
  c_triplets.reserve(n);
  for (int i = 0; i < n; ++i) c_triplets.emplace_back(i, i, fem.c_diag[i]);
  fem.C.setFromTriplets(c_triplets.begin(), c_triplets.end());

  fem.G.resize(n, n);
  fem.G.setFromTriplets(g_triplets.begin(), g_triplets.end());
  fem.G.makeCompressed();
  fem.C.makeCompressed();
  return fem;
}

Eigen::SparseMatrix<double> projector(const Mesh& mesh, std::span<const Point> locations) {
  constexpr double kEps = 1e-12;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(3 * locations.size());

  for (std::size_t r = 0; r < locations.size(); ++r) {
    const Point& p = locations[r];
    if (p.x < -kEps || p.x > 1.0 + kEps || p.y < -kEps || p.y > 1.0 + kEps) {
      throw OutOfDomain("projector: location outside the unit square");
    }
    // Grid coordinates relative to mesh origin; clamp to the covered cells.
    const double gx = p.x / mesh.hx + mesh.ext_x;
    const double gy = p.y / mesh.hy + mesh.ext_y;
    const int ci = std::clamp(static_cast<int>(std::floor(gx)), 0, mesh.cols() - 2);
    const int cj = std::clamp(static_cast<int>(std::floor(gy)), 0, mesh.rows() - 2);
    const double u = std::clamp(gx - ci, 0.0, 1.0);
    const double v = std::clamp(gy - cj, 0.0, 1.0);

    const int ll = mesh.node_index(ci, cj);
    const int lr = mesh.node_index(ci + 1, cj);
    const int ul = mesh.node_index(ci, cj + 1);
    const int ur = mesh.node_index(ci + 1, cj + 1);

    if (u >= v) {
      // (LL, LR, UR): lambda = (1-u, u-v, v)
      triplets.emplace_back(r, ll, 1.0 - u);
      triplets.emplace_back(r, lr, u - v);
      triplets.emplace_back(r, ur, v);
    } else {
      // (LL, UR, UL): lambda = (1-v, u, v-u)
      triplets.emplace_back(r, ll, 1.0 - v);
      triplets.emplace_back(r, ur, u);
      triplets.emplace_back(r, ul, v - u);
    }
  }

  Eigen::SparseMatrix<double> A(static_cast<int>(locations.size()), mesh.node_count());
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();
  return A;
}

}  // namespace bayesfb
