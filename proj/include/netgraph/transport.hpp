#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "netgraph/coefficients.hpp"
#include "netgraph/generation.hpp"
#include "netgraph/graph.hpp"
#include "netgraph/rational.hpp"

// First-order transport: u_t = c(s) u_s on every edge, inflow trace coupled to
// outflow traces by u(t,1) = B_c u(t,0). In travel-time coordinates
// y = phi(s) = int_0^s dr/c the equation is a unit-speed shift toward y = 0,
// so on a grid of travel-time cells the evolution is exact: every step moves
// each cell one slot toward the exit and fills the entry cell from the
// boundary matrix. Interior values are never touched arithmetically, which
// keeps characteristics bitwise-invariant.

namespace netgraph {

struct TransportSystem {
  Matrix B_c;
  TravelTimeMap map;            // physical sampling map per edge
  std::vector<double> lengths;  // travel times l_j = phi_j(1)
  Vector c_exit, c_entry;       // c_j(0), c_j(1): flux factors at the traces
  std::optional<IncidenceSet> inc;  // present when built from a graph

  int m() const { return static_cast<int>(lengths.size()); }
};

inline TransportSystem make_transport(const MetricGraph& g,
                                      const CoefficientField& c) {
  TransportBoundary tb = transport_boundary(g, c);
  TransportSystem sys;
  sys.B_c = tb.B_c;
  sys.map = travel_time(c);
  sys.lengths = sys.map.lengths();
  sys.c_exit = Vector::Zero(g.m());
  sys.c_entry = Vector::Zero(g.m());
  for (int j = 0; j < g.m(); ++j) {
    sys.c_exit[j] = c.at(j, 0.0);
    sys.c_entry[j] = c.at(j, 1.0);
  }
  sys.inc = incidence(g);
  return sys;
}

// Custom boundary matrix over a graph's geometry: B_w need not factor
// through vertex weights (mutation models couple edges directly), but the
// coefficient scaling and the incidence diagnostics still apply.
inline TransportSystem make_transport_weighted(const MetricGraph& g,
                                               const CoefficientField& c,
                                               const Matrix& B_w) {
  const int m = g.m();
  if (c.m() != m) throw ShapeMismatch("coefficient field size differs from edge count");
  if (B_w.rows() != m || B_w.cols() != m) throw ShapeMismatch("B_w must be m x m");
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (B_w(j, k) != 0.0 && g.edges[j].v1 != g.edges[k].v0)
        throw WeightSupportMismatch("entry (" + std::to_string(j) + ", " +
                                    std::to_string(k) + ") crosses no vertex");
  TransportSystem sys;
  sys.B_c = Matrix::Zero(m, m);
  sys.map = travel_time(c);
  sys.lengths = sys.map.lengths();
  sys.c_exit = Vector::Zero(m);
  sys.c_entry = Vector::Zero(m);
  for (int j = 0; j < m; ++j) {
    sys.c_exit[j] = c.at(j, 0.0);
    sys.c_entry[j] = c.at(j, 1.0);
  }
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (B_w(j, k) != 0.0) sys.B_c(j, k) = B_w(j, k) * sys.c_exit[k] / sys.c_entry[j];
  sys.inc = incidence(g);
  return sys;
}

// Raw form: prescribed travel times and boundary matrix, no vertex structure.
// Useful for configurations a simple graph cannot express.
inline TransportSystem make_transport_raw(const std::vector<double>& lengths,
                                          const Matrix& B_c) {
  const int m = static_cast<int>(lengths.size());
  if (B_c.rows() != m || B_c.cols() != m)
    throw ShapeMismatch("B_c must be m x m");
  std::vector<double> speeds(m);
  for (int j = 0; j < m; ++j) {
    if (lengths[j] <= 0.0) throw NonPositiveCoefficient("travel time must be positive");
    speeds[j] = 1.0 / lengths[j];
  }
  TransportSystem sys;
  sys.B_c = B_c;
  sys.map = travel_time(CoefficientField::per_edge(speeds));
  sys.lengths = sys.map.lengths();
  sys.c_exit = Vector::Zero(m);
  sys.c_entry = Vector::Zero(m);
  for (int j = 0; j < m; ++j) sys.c_exit[j] = sys.c_entry[j] = speeds[j];
  return sys;
}

struct TransportState {
  double h = 0.0;  // travel-time width of every cell
  double t = 0.0;
  std::vector<std::vector<double>> cells;  // ring buffer per edge
  std::vector<int> head;                   // ring offset; logical 0 = exit cell
  std::vector<std::vector<double>> ds;     // s-width per logical cell
  std::vector<double> snap_error;          // |N_j h - l_j| per edge

  int m() const { return static_cast<int>(cells.size()); }
  int size(int j) const { return static_cast<int>(cells[j].size()); }

  double value(int j, int i) const {
    const int n = size(j);
    return cells[j][(head[j] + i) % n];
  }
  double& value(int j, int i) {
    const int n = size(j);
    return cells[j][(head[j] + i) % n];
  }
};

// Build the initial state by sampling f(edge, s) at cell midpoints. The cell
// width must tile every edge: if the travel times have a common rational unit
// the step is chosen as the largest divisor of that unit not exceeding
// h_target; otherwise strict mode refuses and non-strict mode rounds each
// edge to the nearest whole number of cells, recording the length error.
inline TransportState init_state(const TransportSystem& sys,
                                 const std::function<double(int, double)>& f,
                                 double h_target, bool strict = true) {
  if (h_target <= 0.0) throw ShapeMismatch("cell width must be positive");
  const int m = sys.m();
  TransportState st;
  auto unit = commensurable_gcd(sys.lengths);
  if (unit) {
    st.h = *unit / std::max(1.0, std::ceil(*unit / h_target - 1e-9));
  } else if (strict) {
    throw IncommensurableLengths("edge travel times share no rational unit");
  } else {
    st.h = h_target;
  }
  st.cells.resize(m);
  st.head.assign(m, 0);
  st.ds.resize(m);
  st.snap_error.assign(m, 0.0);
  for (int j = 0; j < m; ++j) {
    const double l = sys.lengths[j];
    const int N = std::max(1, static_cast<int>(std::llround(l / st.h)));
    st.snap_error[j] = std::abs(N * st.h - l);
    st.cells[j].resize(N);
    st.ds[j].resize(N);
    const double ybar = l / N;  // physical width of one cell in travel time
    double s_lo = 0.0;
    for (int i = 0; i < N; ++i) {
      const double s_hi = (i + 1 == N) ? 1.0 : sys.map.inverse(j, (i + 1) * ybar);
      const double s_mid = sys.map.inverse(j, (i + 0.5) * ybar);
      st.cells[j][i] = f(j, s_mid);
      st.ds[j][i] = s_hi - s_lo;
      s_lo = s_hi;
    }
  }
  return st;
}

// One exact step of size h: collect exit values, rotate, refill entry cells.
inline void transport_step(const TransportSystem& sys, TransportState& st) {
  const int m = st.m();
  Vector q(m);
  for (int k = 0; k < m; ++k) q[k] = st.value(k, 0);
  Vector inflow = sys.B_c * q;
  for (int j = 0; j < m; ++j) {
    const int n = st.size(j);
    // advancing the head turns the old exit slot into the new entry slot
    st.head[j] = (st.head[j] + 1) % n;
    st.value(j, n - 1) = inflow[j];
  }
}

// Advance to t_target, which must sit on the step grid.
inline void evolve(const TransportSystem& sys, TransportState& st,
                   double t_target) {
  const double dt = t_target - st.t;
  if (dt < -1e-12) throw NonGridTime("cannot evolve backward");
  const double steps_real = dt / st.h;
  const long long steps = std::llround(steps_real);
  if (std::abs(steps_real - steps) > 1e-9 * std::max(1.0, std::abs(steps_real)))
    throw NonGridTime("target time " + std::to_string(t_target) +
                      " is not a multiple of the cell width");
  for (long long k = 0; k < steps; ++k) transport_step(sys, st);
  st.t = t_target;
}

inline Vector exit_trace(const TransportState& st) {
  Vector q(st.m());
  for (int k = 0; k < st.m(); ++k) q[k] = st.value(k, 0);
  return q;
}

// Value of the cell containing position s on edge j.
inline double sample(const TransportSystem& sys, const TransportState& st,
                     int j, double s) {
  const int N = st.size(j);
  const double ybar = sys.lengths[j] / N;
  int i = static_cast<int>(sys.map.phi(j, s) / ybar);
  i = std::min(std::max(i, 0), N - 1);
  return st.value(j, i);
}

struct TransportDiagnostics {
  double mass = 0.0;
  std::vector<double> edge_mass;
  double min_value = 0.0;
  double kirchhoff_residual = 0.0;  // flux balance with fresh entry traces
};

inline TransportDiagnostics diagnostics(const TransportSystem& sys,
                                        const TransportState& st) {
  TransportDiagnostics d;
  d.edge_mass.assign(st.m(), 0.0);
  d.min_value = std::numeric_limits<double>::infinity();
  for (int j = 0; j < st.m(); ++j) {
    for (int i = 0; i < st.size(j); ++i) {
      d.edge_mass[j] += st.value(j, i) * st.ds[j][i];
      d.min_value = std::min(d.min_value, st.value(j, i));
    }
    d.mass += d.edge_mass[j];
  }
  if (sys.inc) {
    Vector q = exit_trace(st);
    Vector entry = sys.B_c * q;
    Vector in_flux = sys.inc->phi_plus * (sys.c_exit.asDiagonal() * q);
    Vector out_flux = sys.inc->phi_minus * (sys.c_entry.asDiagonal() * entry);
    d.kirchhoff_residual = (in_flux - out_flux).cwiseAbs().maxCoeff();
  }
  return d;
}

// Latest time by which all material on cycle-free, cycle-unfed edges has
// drained: the longest travel-time chain through acyclic edges.
inline double nilpotent_extinction(const MetricGraph& g,
                                   const TransportSystem& sys) {
  StructureReport rep = analyze_structure(g);
  auto adj = edge_digraph(g);
  const int m = g.m();
  std::vector<double> T(m, -1.0);
  // memoized longest chain ending at edge j (acyclic edges only)
  std::function<double(int)> chain = [&](int j) -> double {
    if (T[j] >= 0.0) return T[j];
    double best = 0.0;
    for (int k = 0; k < m; ++k)
      if (rep.edge_class[k] == EdgeClass::Acyclic)
        for (int t : adj[k])
          if (t == j) best = std::max(best, chain(k));
    return T[j] = sys.lengths[j] + best;
  };
  double out = 0.0;
  for (int j = 0; j < m; ++j)
    if (rep.edge_class[j] == EdgeClass::Acyclic) out = std::max(out, chain(j));
  return out;
}

}  // namespace netgraph
