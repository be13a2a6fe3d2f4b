#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "netgraph/diffusion.hpp"
#include "netgraph/graph.hpp"
#include "netgraph/spectral.hpp"
#include "netgraph/transport.hpp"

// Singular-perturbation studies. Two fast/slow splittings are covered:
//
//  - fast transport with rare mutations: speed 1/eps and boundary matrix
//    K + eps*Q collapse, as eps -> 0, onto a rank-one ODE along the Perron
//    direction of the column-stochastic K;
//  - fast diffusion with slow endpoint exchange: diffusivity 1/eps and Robin
//    coupling eps*K flatten every edge, leaving an ODE for the per-edge
//    averages driven by the aggregated exchange matrix.
//
// The projections P (edgewise integral), Pi1 ((e_l.u) e_r) and Pi0 ((e.u) 1)
// connect the PDE states to the finite-dimensional limits.

namespace netgraph {

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
};

inline Vector rk4_step(const Matrix& A, const Vector& x, double dt) {
  Vector k1 = A * x;
  Vector k2 = A * (x + 0.5 * dt * k1);
  Vector k3 = A * (x + 0.5 * dt * k2);
  Vector k4 = A * (x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline OdeTrajectory rk4_linear(const Matrix& A, const Vector& x0, double T, double dt) {
  if (!(dt > 0.0) || T < 0.0) throw NonGridTime("need dt > 0 and T >= 0");
  const long long steps = std::llround(T / dt);
  if (std::abs(static_cast<double>(steps) * dt - T) > 1e-9 * std::max(1.0, std::abs(T)))
    throw NonGridTime("T is not a multiple of dt");
  OdeTrajectory tr;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  Vector x = x0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  for (long long k = 0; k < steps; ++k) {
    x = rk4_step(A, x, dt);
    tr.times.push_back(static_cast<double>(k + 1) * dt);
    tr.states.push_back(x);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Flow aggregation

struct FlowProjections {
  Vector e_l, e_r;  // Perron pair of the mitosis matrix, e_l . e_r = 1
  double growth = 0.0;  // e_l . Q e_r: rate of the scalar limit dynamics
  Matrix Pi1;           // e_r e_l^T

  Vector project(const Vector& v) const { return e_l.dot(v) * e_r; }
};

inline FlowProjections flow_projections(const Matrix& K, const Matrix& Q,
                                        double col_tol = 1e-12) {
  if (K.rows() != K.cols() || Q.rows() != Q.cols() || K.rows() != Q.rows())
    throw ShapeMismatch("K and Q must be square of equal size");
  for (int k = 0; k < K.cols(); ++k)
    if (std::abs(K.col(k).sum() - 1.0) > col_tol)
      throw NotColumnStochastic("column " + std::to_string(k) + " of K sums to " +
                                std::to_string(K.col(k).sum()));
  if (K.minCoeff() < 0.0) throw NegativeEntry("K has negative entries");
  check_semisimple_one(K);
  FlowProjections pr;
  PerronPair pp = perron_pair(K);
  pr.e_l = pp.left;
  pr.e_r = pp.right;
  pr.growth = pr.e_l.dot(Q * pr.e_r);
  pr.Pi1 = pr.e_r * pr.e_l.transpose();
  return pr;
}

inline Vector closed_form_flow(const FlowProjections& pr, const Vector& x0, double t) {
  return std::exp(pr.growth * t) * pr.e_l.dot(x0) * pr.e_r;
}

// Limit ODE u' = Pi1 Q Pi1 u from the projected initial state; RK4 is the
// generic path, the scalar closed form above is the oracle.
inline OdeTrajectory aggregated_flow_ode(const Matrix& K, const Matrix& Q,
                                         const Vector& x0, double T, double dt) {
  FlowProjections pr = flow_projections(K, Q);
  Matrix A = pr.Pi1 * Q * pr.Pi1;
  return rk4_linear(A, pr.project(x0), T, dt);
}

struct EpsilonFlow {
  double eps = 0.0;
  TransportSystem sys;
  TransportState state;
};

// Transport at speed 1/eps with boundary matrix K + eps*Q: every edge has
// travel time eps, so a step of h = eps/cells keeps shifts exact.
inline EpsilonFlow make_epsilon_flow(const MetricGraph& g, const Matrix& K,
                                     const Matrix& Q, double eps,
                                     const std::function<double(int, double)>& x0,
                                     int cells_per_edge = 32) {
  const int m = g.m();
  if (K.rows() != m || K.cols() != m || Q.rows() != m || Q.cols() != m)
    throw ShapeMismatch("K and Q must be m x m for the graph's m edges");
  if (cells_per_edge < 1) throw ShapeMismatch("need at least one cell per edge");
  Matrix B = K + eps * Q;
  if (B.minCoeff() < 0.0)
    throw NegativeBoundaryEntry("K + eps*Q has negative entries");
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (B(j, k) != 0.0 && g.edges[j].v1 != g.edges[k].v0)
        throw WeightSupportMismatch("entry (" + std::to_string(j) + ", " +
                                    std::to_string(k) + ") crosses no vertex");
  EpsilonFlow flow;
  flow.eps = eps;
  flow.sys = make_transport_raw(std::vector<double>(m, eps), B);
  flow.state = init_state(flow.sys, x0, eps / cells_per_edge);
  return flow;
}

// Edgewise integral over the unit parametrization: P u per edge.
inline Vector edge_averages(const TransportState& st) {
  Vector avg = Vector::Zero(st.m());
  for (int j = 0; j < st.m(); ++j)
    for (int i = 0; i < st.size(j); ++i) avg[j] += st.value(j, i) * st.ds[j][i];
  return avg;
}

struct ConvergenceStudy {
  std::vector<double> eps;
  std::vector<double> e1;  // sup_t L1 distance between profiles
  std::vector<double> e2;  // sup_t l1 distance between projected averages
  double t_min = 0.0;      // e1 is measured on [t_min, T] only
};

// For each eps, run the fast flow and track both error modes against the
// scalar limit: e2 compares Pi1-projected edge averages, e1 compares the full
// profile with the edgewise-constant embedding of the limit state.
inline ConvergenceStudy flow_convergence_study(
    const MetricGraph& g, const Matrix& K, const Matrix& Q,
    const std::function<double(int, double)>& x0, const std::vector<double>& eps_list,
    double T, double t_min = 0.0, int cells_per_edge = 32) {
  FlowProjections pr = flow_projections(K, Q);
  ConvergenceStudy study;
  study.t_min = t_min;
  for (double eps : eps_list) {
    EpsilonFlow flow = make_epsilon_flow(g, K, Q, eps, x0, cells_per_edge);
    const double h = flow.state.h;
    const long long steps = std::llround(T / h);
    const double mass0 = pr.e_l.dot(edge_averages(flow.state));
    double sup1 = 0.0, sup2 = 0.0;
    for (long long k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * h;
      Vector avg = edge_averages(flow.state);
      Vector limit = std::exp(pr.growth * t) * mass0 * pr.e_r;
      sup2 = std::max(sup2, (pr.project(avg) - limit).cwiseAbs().sum());
      if (t >= t_min) {
        double l1 = 0.0;
        for (int j = 0; j < flow.state.m(); ++j)
          for (int i = 0; i < flow.state.size(j); ++i)
            l1 += std::abs(flow.state.value(j, i) - limit[j]) * flow.state.ds[j][i];
        sup1 = std::max(sup1, l1);
      }
      if (k < steps) transport_step(flow.sys, flow.state);
    }
    study.eps.push_back(eps);
    study.e1.push_back(sup1);
    study.e2.push_back(sup2);
  }
  return study;
}

// ---------------------------------------------------------------------------
// Diffusion aggregation

struct DiffusionLimit {
  Vector e;    // left kernel vector of the exchange matrix, e . 1 = 1
  Matrix Pi0;  // 1 e^T

  Vector project(const Vector& x) const {
    return Vector::Constant(e.size(), e.dot(x));
  }
};

inline DiffusionLimit diffusion_limit(const Matrix& K_minus,
                                      double rel_threshold = 1e-9) {
  if (K_minus.rows() != K_minus.cols()) throw ShapeMismatch("K_minus must be square");
  Eigen::FullPivLU<Matrix> lu(K_minus.transpose());
  lu.setThreshold(rel_threshold);
  if (lu.dimensionOfKernel() != 1)
    throw KernelDimensionNotOne("left kernel dimension " +
                                std::to_string(lu.dimensionOfKernel()));
  Vector e = lu.kernel().col(0);
  const double total = e.sum();
  if (std::abs(total) < 1e-14) throw KernelDimensionNotOne("left kernel sums to zero");
  e /= total;
  DiffusionLimit lim;
  lim.e = e;
  lim.Pi0 = Vector::Ones(e.size()) * e.transpose();
  return lim;
}

// Limit ODE for the per-edge averages: u' = -K_minus u (the exchange matrix
// is Laplacian-like, so the minus sign gives equilibration).
inline OdeTrajectory aggregated_diffusion_ode(const Matrix& K_minus, const Vector& x0,
                                              double T, double dt) {
  return rk4_linear(-K_minus, x0, T, dt);
}

struct EpsilonDiffusion {
  double eps = 0.0;
  DiscreteGenerator gen;
  Vector u;
};

// Robin diffusion with diffusivity 1/eps and coupling eps*K: the product
// keeps the vertex exchange at unit strength while interiors flatten fast.
inline EpsilonDiffusion make_epsilon_diffusion(const Matrix& robin_K, double eps,
                                               const std::function<double(int, double)>& x0,
                                               int cells) {
  if (!(eps > 0.0)) throw NonPositiveCoefficient("eps must be positive");
  const int m = static_cast<int>(robin_K.rows()) / 2;
  auto a = CoefficientField::constant(m, 1.0 / eps);
  EpsilonDiffusion ed;
  ed.eps = eps;
  ed.gen = assemble_robin(a, Matrix(eps * robin_K), cells);
  ed.u = sample_robin(ed.gen, x0);
  return ed;
}

// P u per edge for the Robin layout: the half-weighted endpoint rule is the
// exact integral of the piecewise-linear reconstruction.
inline Vector robin_edge_averages(const DiscreteGenerator& gen, const Vector& u) {
  Vector avg = Vector::Zero(gen.m);
  for (int j = 0; j < gen.m; ++j) {
    const int lo = gen.idx_v0(j), hi = gen.idx_v1(j);
    for (int i = lo; i <= hi; ++i) avg[j] += gen.mass_w[i] * u[i];
  }
  return avg;
}

// Fast-diffusion analogue of the flow study: e2 compares per-edge averages
// with the aggregated ODE, e1 compares profiles with their flat embedding.
inline ConvergenceStudy diffusion_convergence_study(
    const Matrix& robin_K, const Matrix& K_minus,
    const std::function<double(int, double)>& x0, const std::vector<double>& eps_list,
    double T, double t_min, int cells, double dt,
    Scheme scheme = Scheme::Trapezoidal) {
  ConvergenceStudy study;
  study.t_min = t_min;
  const Matrix A_lim = -K_minus;
  for (double eps : eps_list) {
    EpsilonDiffusion ed = make_epsilon_diffusion(robin_K, eps, x0, cells);
    DiffusionStepper stepper(ed.gen, dt, scheme);
    const long long steps = std::llround(T / dt);
    Vector agg = robin_edge_averages(ed.gen, ed.u);
    double sup1 = 0.0, sup2 = 0.0;
    for (long long k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      if (t >= t_min) {
        Vector avg = robin_edge_averages(ed.gen, ed.u);
        sup2 = std::max(sup2, (avg - agg).cwiseAbs().sum());
        double l1 = 0.0;
        for (int j = 0; j < ed.gen.m; ++j)
          for (int i = ed.gen.idx_v0(j); i <= ed.gen.idx_v1(j); ++i)
            l1 += std::abs(ed.u[i] - agg[j]) * ed.gen.mass_w[i];
        sup1 = std::max(sup1, l1);
      }
      if (k < steps) {
        ed.u = stepper.step(ed.u);
        agg = rk4_step(A_lim, agg, dt);
      }
    }
    study.eps.push_back(eps);
    study.e1.push_back(sup1);
    study.e2.push_back(sup2);
  }
  return study;
}

// ---------------------------------------------------------------------------
// Boundary layer corrector

struct BoundaryLayer {
  std::vector<double> a;  // cosine coefficients for modes 1..n_max
  double tau = 0.0;

  double operator()(double x) const {
    const double pi = 3.14159265358979323846;
    double w = 0.0;
    for (std::size_t n = 1; n <= a.size(); ++n) {
      const double npi = static_cast<double>(n) * pi;
      w += std::exp(-npi * npi * tau) * a[n - 1] * std::cos(npi * x);
    }
    return w;
  }

  double sup_bound() const {
    const double pi = 3.14159265358979323846;
    double s = 0.0;
    for (double c : a) s += std::abs(c);
    return std::exp(-pi * pi * tau) * s;
  }
};

// The initial transient on one edge: expand x0 minus its mean in cosine
// modes (Neumann eigenfunctions) and damp each by exp(-(n pi)^2 tau). The
// mean itself is carried by the aggregated ODE, so only modes n >= 1 enter.
inline BoundaryLayer boundary_layer_corrector(const std::function<double(double)>& x0,
                                              double tau, int n_max = 64) {
  if (n_max < 1) throw ShapeMismatch("need at least one cosine mode");
  BoundaryLayer layer;
  layer.tau = tau;
  layer.a.resize(n_max);
  const double pi = 3.14159265358979323846;
  const int panels = 4096;  // Simpson, even count
  const double h = 1.0 / panels;
  for (int n = 1; n <= n_max; ++n) {
    double s = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const double x = i * h;
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      s += w * x0(x) * std::cos(n * pi * x);
    }
    layer.a[n - 1] = 2.0 * s * h / 3.0;
  }
  return layer;
}

}  // namespace netgraph
