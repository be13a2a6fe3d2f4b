#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "netgraph/coefficients.hpp"
#include "netgraph/graph.hpp"

// Well-posedness data for both dynamics. Transport: the boundary matrix
// relating outflow traces to inflow traces; the problem is always solvable
// forward in time, and backward too exactly when the boundary matrix is
// invertible. Diffusion: vertex conditions as block rows (continuity chains +
// flux rows, or Robin rows), with solvability decided by one determinant that
// factors over vertex clusters.

namespace netgraph {

struct TransportBoundary {
  Matrix B_c;  // inflow trace = B_c * outflow trace
  double det_B_c = 0.0;
  bool is_semigroup = true;  // forward solvability needs no condition
  bool is_group = false;     // det(B_c) != 0, relative threshold 1e-10
};

namespace detail {

// Hadamard bound: product of column 2-norms; the natural scale for a
// relative determinant threshold.
inline double hadamard_bound(const Matrix& M) {
  double prod = 1.0;
  for (int j = 0; j < M.cols(); ++j) prod *= M.col(j).norm();
  return prod;
}

inline bool det_nonzero(double det, const Matrix& M, double rel_tol = 1e-10) {
  const double scale = hadamard_bound(M);
  if (scale == 0.0) return false;
  return std::abs(det) > rel_tol * scale;
}

}  // namespace detail

inline TransportBoundary transport_boundary(const MetricGraph& g,
                                            const CoefficientField& c) {
  if (g.m() != c.m()) throw ShapeMismatch("coefficient count != edge count");
  for (int v = 0; v < g.n; ++v)
    if (g.out_degree(v) == 0)
      throw HasSinkOrSource("vertex " + std::to_string(v) +
                            " is a sink; transport loses mass there");
  LineGraphMatrices lm = line_matrices(g);
  TransportBoundary tb;
  tb.B_c = lm.B_w;
  for (int j = 0; j < g.m(); ++j)
    for (int k = 0; k < g.m(); ++k)
      if (tb.B_c(j, k) != 0.0)
        tb.B_c(j, k) *= c.at(k, 0.0) / c.at(j, 1.0);
  Eigen::FullPivLU<Matrix> lu(tb.B_c);
  tb.det_B_c = lu.determinant();
  tb.is_semigroup = true;
  tb.is_group = detail::det_nonzero(tb.det_B_c, tb.B_c);
  return tb;
}

// ---------------------------------------------------------------------------
// Diffusion vertex conditions

struct DiffusionBoundary {
  Matrix V0, V1;  // k0 x m value rows:      V0 f(0) + V1 f(1) = 0
  Matrix W0, W1;  // k1 x m derivative rows; see the two constructors
  std::optional<Matrix> robin_K;  // 2m x 2m: (f'(0); f'(1)) = K (f(0); f(1))

  int k0() const { return static_cast<int>(V0.rows()); }
  int k1() const { return static_cast<int>(W0.rows()); }
};

// Standard (continuity + flux balance) conditions. Continuity rows chain the
// edges incident to each vertex in index order; flux rows are
// phi_minus*a(1) / phi_plus*a(0). Row count k0 = 2m - n for a connected graph.
inline DiffusionBoundary diffusion_boundary_standard(const MetricGraph& g,
                                                     const CoefficientField& a) {
  if (g.m() != a.m()) throw ShapeMismatch("coefficient count != edge count");
  const int m = g.m();
  const int k0 = 2 * m - g.n;
  DiffusionBoundary b;
  b.V0 = Matrix::Zero(k0, m);
  b.V1 = Matrix::Zero(k0, m);
  int row = 0;
  for (int v = 0; v < g.n; ++v) {
    // incident endpoints at v, edges in index order; (j, which) with which=0/1
    std::vector<std::pair<int, int>> inc;
    for (int j = 0; j < m; ++j) {
      if (g.edges[j].v0 == v) inc.emplace_back(j, 0);
      if (g.edges[j].v1 == v) inc.emplace_back(j, 1);
    }
    for (size_t r = 0; r + 1 < inc.size(); ++r) {
      auto put = [&](int j, int which, double val) {
        (which == 0 ? b.V0 : b.V1)(row, j) = val;
      };
      put(inc[r].first, inc[r].second, 1.0);
      put(inc[r + 1].first, inc[r + 1].second, -1.0);
      ++row;
    }
  }
  if (row != k0) throw ShapeMismatch("continuity row count mismatch");
  IncidenceSet inc = incidence(g);
  b.W1 = inc.phi_minus;
  b.W0 = inc.phi_plus;
  for (int j = 0; j < m; ++j) {
    b.W1.col(j) *= a.at(j, 1.0);
    b.W0.col(j) *= a.at(j, 0.0);
  }
  return b;
}

// Robin rows: derivative traces prescribed directly by K. No value rows.
inline DiffusionBoundary robin_boundary(const Matrix& K) {
  const int two_m = static_cast<int>(K.rows());
  if (K.cols() != two_m || two_m % 2 != 0)
    throw ShapeMismatch("Robin matrix must be 2m x 2m");
  const int m = two_m / 2;
  DiffusionBoundary b;
  b.V0 = Matrix::Zero(0, m);
  b.V1 = Matrix::Zero(0, m);
  b.W0 = Matrix::Zero(two_m, m);
  b.W1 = Matrix::Zero(two_m, m);
  b.W0.topRows(m) = -Matrix::Identity(m, m);
  b.W1.bottomRows(m) = Matrix::Identity(m, m);
  b.robin_K = K;
  return b;
}

// Cluster determinant at one vertex: sum of sqrt(a) over incident endpoints.
inline double vertex_cluster_det(const MetricGraph& g, const CoefficientField& a,
                                 int v) {
  double sum = 0.0;
  for (int j = 0; j < g.m(); ++j) {
    if (g.edges[j].v0 == v) sum += std::sqrt(a.at(j, 0.0));
    if (g.edges[j].v1 == v) sum += std::sqrt(a.at(j, 1.0));
  }
  return sum;
}

struct GenerationCheck {
  double det = 0.0;
  bool ok = false;
};

// Solvability determinant for the diffusion vertex conditions: the block
// matrix [[V1, V0], [W1 a(1)^{-1/2}, W0 a(0)^{-1/2}]] must be invertible.
// The lower rows are scaled so that for standard conditions the matrix is a
// permutation of vertex-cluster blocks whose determinants are the
// vertex_cluster_det values.
inline GenerationCheck check_diffusion_generation(const DiffusionBoundary& b,
                                                  const CoefficientField& a) {
  const int m = a.m();
  if (b.V0.cols() != m || b.W0.cols() != m)
    throw ShapeMismatch("boundary blocks sized for a different edge count");
  if (b.k0() + b.k1() != 2 * m)
    throw ShapeMismatch("boundary needs k0 + k1 = 2m rows");
  Matrix M = Matrix::Zero(2 * m, 2 * m);
  M.block(0, 0, b.k0(), m) = b.V1;
  M.block(0, m, b.k0(), m) = b.V0;
  Matrix w1 = b.W1, w0 = b.W0;
  for (int j = 0; j < m; ++j) {
    w1.col(j) /= std::sqrt(a.at(j, 1.0));
    w0.col(j) /= std::sqrt(a.at(j, 0.0));
  }
  M.block(b.k0(), 0, b.k1(), m) = w1;
  M.block(b.k0(), m, b.k1(), m) = w0;
  Eigen::FullPivLU<Matrix> lu(M);
  GenerationCheck out;
  out.det = lu.determinant();
  out.ok = detail::det_nonzero(out.det, M);
  return out;
}

}  // namespace netgraph
