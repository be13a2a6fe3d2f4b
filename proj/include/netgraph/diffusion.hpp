#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "netgraph/coefficients.hpp"
#include "netgraph/generation.hpp"
#include "netgraph/graph.hpp"

// Second-order dynamics u_t = a(s) u_ss on every edge (the coefficient sits
// outside the derivative; divergence form is out of scope). Two layouts:
//
//  Standard: one unknown per vertex shared by all incident edges (continuity
//  is exact by construction) plus interior nodes per edge. Vertex rows are
//  finite-volume balances over the union of incident half-cells. Every
//  off-diagonal entry is nonnegative, constants are an exact kernel, and for
//  edgewise-constant a the flux sum telescopes, so the trapezoid mass
//  functional is an exact left kernel of the generator.
//
//  Robin: every edge keeps both endpoint unknowns; derivative traces are
//  prescribed by a 2m x 2m matrix K via (f'(0); f'(1)) = K (f(0); f(1)).
//  Endpoint rows are half-cell balances with the K-flux as the boundary term.

namespace netgraph {

enum class DiffusionLayout { Standard, Robin };
enum class Scheme { BackwardEuler, Trapezoidal };

struct DiscreteGenerator {
  DiffusionLayout layout = DiffusionLayout::Standard;
  int m = 0;  // edges
  int n = 0;  // vertices (standard layout only)
  std::vector<int> N;       // cells per edge
  std::vector<double> dx;   // 1 / N per edge
  int dim = 0;              // unknown count
  Eigen::SparseMatrix<double> A;
  Vector mass_w;            // trapezoid weights; total mass = mass_w . u

  std::vector<int> edge_offset;  // first interior unknown of edge j
  std::vector<int> vertex_of;    // standard: unknown index of vertex v

  // standard: endpoint unknowns are the vertex unknowns
  int idx_vertex(int v) const { return vertex_of[v]; }
  // interior node i = 1 .. N-1 at position s = i * dx
  int idx_interior(int j, int i) const { return edge_offset[j] + (i - 1); }
  // robin: endpoint unknowns per edge
  int idx_v0(int j) const { return edge_offset[j] - 1; }
  int idx_v1(int j) const { return edge_offset[j] + N[j] - 1; }
};

namespace detail {

inline std::vector<int> uniform_cells(int m, int cells) {
  if (cells < 2) throw ShapeMismatch("need at least 2 cells per edge");
  return std::vector<int>(m, cells);
}

}  // namespace detail

// Standard layout. Unknown order: vertices 0..n-1, then interior blocks per
// edge. Edge j runs between the unknowns of its endpoint vertices.
inline DiscreteGenerator assemble_standard(const MetricGraph& g,
                                           const CoefficientField& a,
                                           const std::vector<int>& cells) {
  if (static_cast<int>(cells.size()) != g.m())
    throw ShapeMismatch("cell count per edge must match edge count");
  CoefficientField af = a;
  af.validate();
  if (!check_diffusion_generation(diffusion_boundary_standard(g, a), a).ok)
    throw SingularBoundaryRows("vertex conditions are not uniquely solvable");

  DiscreteGenerator gen;
  gen.layout = DiffusionLayout::Standard;
  gen.m = g.m();
  gen.n = g.n;
  gen.N = cells;
  gen.dx.resize(g.m());
  gen.vertex_of.resize(g.n);
  for (int v = 0; v < g.n; ++v) gen.vertex_of[v] = v;
  gen.edge_offset.resize(g.m());
  int off = g.n;
  for (int j = 0; j < g.m(); ++j) {
    if (cells[j] < 2) throw ShapeMismatch("need at least 2 cells per edge");
    gen.dx[j] = 1.0 / cells[j];
    gen.edge_offset[j] = off;
    off += cells[j] - 1;
  }
  gen.dim = off;

  std::vector<Eigen::Triplet<double>> trip;
  gen.mass_w = Vector::Zero(gen.dim);

  auto node_index = [&](int j, int i) {
    if (i == 0) return gen.idx_vertex(g.edges[j].v0);
    if (i == gen.N[j]) return gen.idx_vertex(g.edges[j].v1);
    return gen.idx_interior(j, i);
  };

  // vertex control volumes: half a cell from every incident edge
  for (int j = 0; j < g.m(); ++j) {
    gen.mass_w[gen.idx_vertex(g.edges[j].v0)] += 0.5 / cells[j];
    gen.mass_w[gen.idx_vertex(g.edges[j].v1)] += 0.5 / cells[j];
  }
  for (int v = 0; v < g.n; ++v)
    if (gen.mass_w[gen.idx_vertex(v)] == 0.0)
      throw Disconnected("isolated vertex in diffusion assembly");

  for (int j = 0; j < g.m(); ++j) {
    const int N = gen.N[j];
    const double dxj = gen.dx[j];
    // the operator is a(s) d^2/ds^2, not divergence form: each row carries
    // the coefficient sampled at its own node
    for (int i = 1; i < N; ++i) {
      const int row = gen.idx_interior(j, i);
      const double w = a.at(j, i * dxj) / (dxj * dxj);
      trip.emplace_back(row, node_index(j, i - 1), w);
      trip.emplace_back(row, node_index(j, i + 1), w);
      trip.emplace_back(row, row, -2.0 * w);
      gen.mass_w[row] += dxj;
    }
    // half-cell flux balances at the endpoint vertices, divided by volume;
    // the flux coefficient is the endpoint value, as in the Kirchhoff rows
    const double a0 = a.at(j, 0.0), a1 = a.at(j, 1.0);
    const int r0 = gen.idx_vertex(g.edges[j].v0);
    const double vol0 = gen.mass_w[r0];
    trip.emplace_back(r0, node_index(j, 1), a0 / (dxj * vol0));
    trip.emplace_back(r0, r0, -a0 / (dxj * vol0));
    const int r1 = gen.idx_vertex(g.edges[j].v1);
    const double vol1 = gen.mass_w[r1];
    trip.emplace_back(r1, node_index(j, N - 1), a1 / (dxj * vol1));
    trip.emplace_back(r1, r1, -a1 / (dxj * vol1));
  }

  gen.A.resize(gen.dim, gen.dim);
  gen.A.setFromTriplets(trip.begin(), trip.end());
  return gen;
}

inline DiscreteGenerator assemble_standard(const MetricGraph& g,
                                           const CoefficientField& a, int cells) {
  return assemble_standard(g, a, detail::uniform_cells(g.m(), cells));
}

// Robin layout. Unknown order per edge: V0, interior 1..N-1, V1; edges
// concatenated. K rows: j -> f'_j(0), m + j -> f'_j(1).
inline DiscreteGenerator assemble_robin(const CoefficientField& a, const Matrix& K,
                                        const std::vector<int>& cells) {
  const int m = a.m();
  if (static_cast<int>(cells.size()) != m)
    throw ShapeMismatch("cell count per edge must match edge count");
  if (K.rows() != 2 * m || K.cols() != 2 * m)
    throw ShapeMismatch("Robin matrix must be 2m x 2m");
  CoefficientField af = a;
  af.validate();
  if (!check_diffusion_generation(robin_boundary(K), a).ok)
    throw SingularBoundaryRows("Robin conditions are not uniquely solvable");

  DiscreteGenerator gen;
  gen.layout = DiffusionLayout::Robin;
  gen.m = m;
  gen.N = cells;
  gen.dx.resize(m);
  gen.edge_offset.resize(m);
  int off = 0;
  for (int j = 0; j < m; ++j) {
    if (cells[j] < 2) throw ShapeMismatch("need at least 2 cells per edge");
    gen.dx[j] = 1.0 / cells[j];
    gen.edge_offset[j] = off + 1;  // V0 sits at off
    off += cells[j] + 1;
  }
  gen.dim = off;

  std::vector<Eigen::Triplet<double>> trip;
  gen.mass_w = Vector::Zero(gen.dim);

  for (int j = 0; j < m; ++j) {
    const int N = gen.N[j];
    const double dxj = gen.dx[j];
    auto node = [&](int i) {
      if (i == 0) return gen.idx_v0(j);
      if (i == N) return gen.idx_v1(j);
      return gen.idx_interior(j, i);
    };
    for (int i = 1; i < N; ++i) {
      const int row = gen.idx_interior(j, i);
      const double w = a.at(j, i * dxj) / (dxj * dxj);
      trip.emplace_back(row, node(i - 1), w);
      trip.emplace_back(row, node(i + 1), w);
      trip.emplace_back(row, row, -2.0 * w);
      gen.mass_w[row] += dxj;
    }
    // half-cell balances; boundary flux from the K rows, interior flux with
    // the endpoint coefficient (the operator is not divergence form)
    const int r0 = gen.idx_v0(j), r1 = gen.idx_v1(j);
    const double inv_half = 2.0 / dxj;
    const double a0 = a.at(j, 0.0), a1 = a.at(j, 1.0);
    trip.emplace_back(r0, node(1), inv_half * a0 / dxj);
    trip.emplace_back(r0, r0, -inv_half * a0 / dxj);
    trip.emplace_back(r1, node(N - 1), inv_half * a1 / dxj);
    trip.emplace_back(r1, r1, -inv_half * a1 / dxj);
    for (int l = 0; l < 2 * m; ++l) {
      const int col = l < m ? gen.idx_v0(l) : gen.idx_v1(l - m);
      if (K(j, l) != 0.0) trip.emplace_back(r0, col, -inv_half * a0 * K(j, l));
      if (K(m + j, l) != 0.0) trip.emplace_back(r1, col, inv_half * a1 * K(m + j, l));
    }
    gen.mass_w[r0] = dxj / 2.0;
    gen.mass_w[r1] = dxj / 2.0;
  }

  gen.A.resize(gen.dim, gen.dim);
  gen.A.setFromTriplets(trip.begin(), trip.end());
  return gen;
}

inline DiscreteGenerator assemble_robin(const CoefficientField& a, const Matrix& K,
                                        int cells) {
  return assemble_robin(a, K, detail::uniform_cells(a.m(), cells));
}

// ---------------------------------------------------------------------------
// Sampling initial data

// Standard layout: vertex unknowns average the endpoint samples of their
// incident edges (equal for continuous data).
inline Vector sample_standard(const DiscreteGenerator& gen, const MetricGraph& g,
                              const std::function<double(int, double)>& f) {
  Vector u = Vector::Zero(gen.dim);
  Vector cnt = Vector::Zero(g.n);
  for (int j = 0; j < g.m(); ++j) {
    u[gen.idx_vertex(g.edges[j].v0)] += f(j, 0.0);
    cnt[g.edges[j].v0] += 1.0;
    u[gen.idx_vertex(g.edges[j].v1)] += f(j, 1.0);
    cnt[g.edges[j].v1] += 1.0;
    for (int i = 1; i < gen.N[j]; ++i)
      u[gen.idx_interior(j, i)] = f(j, i * gen.dx[j]);
  }
  for (int v = 0; v < g.n; ++v) u[gen.idx_vertex(v)] /= cnt[v];
  return u;
}

inline Vector sample_robin(const DiscreteGenerator& gen,
                           const std::function<double(int, double)>& f) {
  Vector u = Vector::Zero(gen.dim);
  for (int j = 0; j < gen.m; ++j) {
    u[gen.idx_v0(j)] = f(j, 0.0);
    u[gen.idx_v1(j)] = f(j, 1.0);
    for (int i = 1; i < gen.N[j]; ++i)
      u[gen.idx_interior(j, i)] = f(j, i * gen.dx[j]);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Time stepping

class DiffusionStepper {
 public:
  DiffusionStepper(const DiscreteGenerator& gen, double dt,
                   Scheme scheme = Scheme::BackwardEuler)
      : dt_(dt), scheme_(scheme) {
    if (dt <= 0.0) throw ShapeMismatch("time step must be positive");
    const int d = gen.dim;
    Eigen::SparseMatrix<double> I(d, d);
    I.setIdentity();
    const double w = scheme == Scheme::BackwardEuler ? dt : dt / 2.0;
    Eigen::SparseMatrix<double> M = I - w * gen.A;
    if (scheme == Scheme::Trapezoidal) B_ = I + (dt / 2.0) * gen.A;
    lu_.compute(M);
    if (lu_.info() != Eigen::Success)
      throw LinearSolveFailure("implicit step factorization");
  }

  Vector step(const Vector& u) const {
    Vector rhs = scheme_ == Scheme::BackwardEuler ? u : Vector(B_ * u);
    Vector out = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw LinearSolveFailure("implicit step solve");
    return out;
  }

  double dt() const { return dt_; }

 private:
  double dt_;
  Scheme scheme_;
  Eigen::SparseMatrix<double> B_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

// Advance u by duration T = steps * dt (T must sit on the step grid).
inline Vector evolve_diffusion(const DiscreteGenerator& gen, Vector u, double T,
                               double dt, Scheme scheme = Scheme::BackwardEuler) {
  const double steps_real = T / dt;
  const long long steps = std::llround(steps_real);
  if (steps < 0 || std::abs(steps_real - steps) > 1e-9 * std::max(1.0, steps_real))
    throw NonGridTime("duration is not a multiple of the time step");
  DiffusionStepper st(gen, dt, scheme);
  for (long long k = 0; k < steps; ++k) u = st.step(u);
  return u;
}

// ---------------------------------------------------------------------------
// Equilibrium projection and diagnostics

struct EquilibriumProjection {
  Vector right;  // A right = 0, scaled to unit mass functional
  Vector left;   // left^T A = 0
  std::optional<double> rate;  // slowest nonzero eigenvalue, when requested
  // projection of x: (left . x) * right
  Vector apply(const Vector& x) const { return (left.dot(x)) * right; }
};

// Slowest decay rate: the largest real part among the eigenvalues of the
// generator away from zero. Dense solve, intended for desk-scale grids.
inline double spectral_rate(const DiscreteGenerator& gen, double zero_tol = 1e-8) {
  Matrix A = Matrix(gen.A);
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw EigensolverFailure("generator eigensolve did not converge");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  double rate = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    if (std::abs(lam) <= zero_tol * scale) continue;
    rate = std::max(rate, lam.real());
  }
  if (!std::isfinite(rate))
    throw EigenFailure("generator has no eigenvalue away from zero");
  return rate;
}

inline EquilibriumProjection equilibrium(const DiscreteGenerator& gen,
                                         bool with_rate = true,
                                         double rel_threshold = 1e-9) {
  Matrix A = Matrix(gen.A);
  Eigen::FullPivLU<Matrix> lu(A);
  lu.setThreshold(rel_threshold);
  if (lu.dimensionOfKernel() != 1)
    throw KernelDimensionNotOne("generator kernel dimension " +
                                std::to_string(lu.dimensionOfKernel()));
  Eigen::FullPivLU<Matrix> lut(A.transpose());
  lut.setThreshold(rel_threshold);
  if (lut.dimensionOfKernel() != 1)
    throw KernelDimensionNotOne("adjoint kernel dimension " +
                                std::to_string(lut.dimensionOfKernel()));
  EquilibriumProjection pi;
  pi.right = lu.kernel().col(0);
  pi.left = lut.kernel().col(0);
  if (pi.right.sum() < 0) pi.right = -pi.right;
  if (pi.left.sum() < 0) pi.left = -pi.left;
  const double pairing = pi.left.dot(pi.right);
  if (std::abs(pairing) < 1e-12) throw EigenFailure("kernel pairing degenerate");
  pi.left /= pairing;
  if (with_rate) pi.rate = spectral_rate(gen);
  return pi;
}

struct DiffusionResiduals {
  double mass = 0.0;
  double min_value = 0.0;
  double vertex_flux_defect = 0.0;  // one-sided 3-point Kirchhoff estimate
  double robin_defect = 0.0;        // trace-derivative mismatch, robin layout
};

namespace detail {

// one-sided 3-point derivative estimates at the endpoints
inline double d_at_0(const Vector& u, int n0, int n1, int n2, double dx) {
  return (-3.0 * u[n0] + 4.0 * u[n1] - u[n2]) / (2.0 * dx);
}
inline double d_at_1(const Vector& u, int nN, int nN1, int nN2, double dx) {
  return (3.0 * u[nN] - 4.0 * u[nN1] + u[nN2]) / (2.0 * dx);
}

}  // namespace detail

inline DiffusionResiduals residuals_standard(const DiscreteGenerator& gen,
                                             const MetricGraph& g,
                                             const CoefficientField& a,
                                             const Vector& u) {
  DiffusionResiduals r;
  r.mass = gen.mass_w.dot(u);
  r.min_value = u.minCoeff();
  Vector defect = Vector::Zero(g.n);
  for (int j = 0; j < g.m(); ++j) {
    const int N = gen.N[j];
    const double dxj = gen.dx[j];
    auto node = [&](int i) {
      if (i == 0) return gen.idx_vertex(g.edges[j].v0);
      if (i == N) return gen.idx_vertex(g.edges[j].v1);
      return gen.idx_interior(j, i);
    };
    const double d0 = detail::d_at_0(u, node(0), node(1), node(2), dxj);
    const double d1 = detail::d_at_1(u, node(N), node(N - 1), node(N - 2), dxj);
    defect[g.edges[j].v0] -= a.at(j, 0.0) * d0;
    defect[g.edges[j].v1] += a.at(j, 1.0) * d1;
  }
  r.vertex_flux_defect = defect.cwiseAbs().maxCoeff();
  return r;
}

inline DiffusionResiduals residuals_robin(const DiscreteGenerator& gen,
                                          const CoefficientField& a,
                                          const Matrix& K, const Vector& u) {
  DiffusionResiduals r;
  r.mass = gen.mass_w.dot(u);
  r.min_value = u.minCoeff();
  const int m = gen.m;
  Vector traces(2 * m);
  for (int j = 0; j < m; ++j) {
    traces[j] = u[gen.idx_v0(j)];
    traces[m + j] = u[gen.idx_v1(j)];
  }
  Vector target = K * traces;
  double worst = 0.0;
  for (int j = 0; j < m; ++j) {
    const int N = gen.N[j];
    const double dxj = gen.dx[j];
    auto node = [&](int i) {
      if (i == 0) return gen.idx_v0(j);
      if (i == N) return gen.idx_v1(j);
      return gen.idx_interior(j, i);
    };
    const double d0 = detail::d_at_0(u, node(0), node(1), node(2), dxj);
    const double d1 = detail::d_at_1(u, node(N), node(N - 1), node(N - 2), dxj);
    worst = std::max(worst, std::abs(d0 - target[j]));
    worst = std::max(worst, std::abs(d1 - target[m + j]));
  }
  r.robin_defect = worst;
  (void)a;
  return r;
}

}  // namespace netgraph
