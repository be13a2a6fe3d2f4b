#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <optional>
#include <vector>

#include "netgraph/rational.hpp"
#include "netgraph/transport.hpp"

// Long-term behavior of the transport flow. Spectral side: Perron pairs and
// the number of peripheral eigenvalues of the boundary matrix. Combinatorial
// side: periods of the terminal strong components, computed exactly with
// rational arithmetic on reconstructed travel times, by two independent
// routes (gcd of elementary-cycle sums, gcd of spanning-tree potential
// discrepancies).

namespace netgraph {

inline bool is_nonnegative(const Matrix& B) { return B.minCoeff() >= 0.0; }

// Support digraph strongly connected.
inline bool is_irreducible(const Matrix& B) {
  const int n = static_cast<int>(B.rows());
  if (n == 0) return false;
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && B(i, j) != 0.0) adj[i].push_back(j);
  detail::Tarjan t(adj);
  return t.ncomp == 1;
}

struct PerronPair {
  double rho = 0.0;
  Vector right;  // entrywise positive, scaled to unit sum
  Vector left;   // scaled so that left . right = 1
};

inline PerronPair perron_pair(const Matrix& B) {
  if (B.rows() != B.cols()) throw ShapeMismatch("Perron pair needs a square matrix");
  if (!is_nonnegative(B)) throw NotNonnegative("matrix has negative entries");
  if (!is_irreducible(B)) throw NotIrreducible("support digraph is not strongly connected");

  auto positive_eigvec = [](const Matrix& M) -> std::pair<double, Vector> {
    Eigen::EigenSolver<Matrix> es(M);
    if (es.info() != Eigen::Success) throw EigensolverFailure("eigendecomposition");
    int best = 0;
    for (int i = 1; i < M.rows(); ++i)
      if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
    Vector v = es.eigenvectors().col(best).real();
    if (v.sum() < 0) v = -v;
    if (v.minCoeff() < -1e-8 * v.maxCoeff())
      throw EigenFailure("leading eigenvector has mixed signs");
    return {es.eigenvalues()[best].real(), v.cwiseMax(0.0)};
  };

  PerronPair p;
  auto [rho_r, vr] = positive_eigvec(B);
  auto [rho_l, vl] = positive_eigvec(B.transpose());
  p.rho = rho_r;
  p.right = vr / vr.sum();
  const double scale = vl.dot(p.right);
  if (scale <= 0.0) throw EigenFailure("left/right eigenvector pairing degenerate");
  p.left = vl / scale;
  return p;
}

// Number of eigenvalues on the spectral circle |z| = rho.
inline int imprimitivity_index(const Matrix& B, double rel_tol = 1e-8) {
  if (B.rows() != B.cols()) throw ShapeMismatch("imprimitivity needs a square matrix");
  Eigen::EigenSolver<Matrix> es(B, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw EigensolverFailure("eigendecomposition");
  double rho = 0.0;
  for (int i = 0; i < B.rows(); ++i) rho = std::max(rho, std::abs(es.eigenvalues()[i]));
  int count = 0;
  for (int i = 0; i < B.rows(); ++i)
    if (std::abs(std::abs(es.eigenvalues()[i]) - rho) < rel_tol * std::max(rho, 1.0))
      ++count;
  return count;
}

// Eigenvalue 1 is semisimple iff rank((K - I)^2) = rank(K - I).
inline bool semisimple_one(const Matrix& K, double rel_threshold = 1e-9) {
  if (K.rows() != K.cols()) throw ShapeMismatch("semisimplicity needs a square matrix");
  Matrix A = K - Matrix::Identity(K.rows(), K.cols());
  Eigen::FullPivLU<Matrix> lu1(A);
  lu1.setThreshold(rel_threshold);
  Eigen::FullPivLU<Matrix> lu2(A * A);
  lu2.setThreshold(rel_threshold);
  return lu1.rank() == lu2.rank();
}

inline void check_semisimple_one(const Matrix& K, double rel_threshold = 1e-9) {
  if (!semisimple_one(K, rel_threshold))
    throw SemisimplicityFailure("eigenvalue 1 has a nontrivial Jordan block");
}

// ---------------------------------------------------------------------------
// Periods from travel times, exactly.

// Cycle travel-time sums as exact rationals. nullopt when a travel time
// cannot be reconstructed as a small fraction.
struct CycleRationals {
  std::vector<Rational> sums;  // one per cycle
  Rational tau{0, 1};          // gcd of the sums
  long long d = 1;             // lcm of the sum denominators
};

inline std::optional<std::vector<Rational>> rational_lengths(
    const std::vector<double>& lengths, double tol = 1e-9, long long max_den = 10000) {
  std::vector<Rational> out;
  out.reserve(lengths.size());
  for (double l : lengths) {
    auto r = reconstruct_rational(l, tol, max_den);
    if (!r) return std::nullopt;
    out.push_back(*r);
  }
  return out;
}

inline std::optional<CycleRationals> cycle_rationals(
    const std::vector<std::vector<int>>& cycles, const std::vector<double>& lengths) {
  auto rl = rational_lengths(lengths);
  if (!rl) return std::nullopt;
  CycleRationals out;
  for (const auto& cyc : cycles) {
    Rational sum{0, 1};
    for (int j : cyc) sum = rational_add(sum, (*rl)[j]);
    out.sums.push_back(sum);
    out.tau = rational_gcd(out.tau, sum);
    out.d = std::lcm(out.d, sum.den);
  }
  return out;
}

// Period of one strongly connected node set of the edge digraph: gcd of the
// sums of travel times around its cycles, restricted to the listed cycles.
inline std::optional<Rational> scc_period_cycles(
    const std::vector<std::vector<int>>& cycles, const std::vector<double>& lengths,
    const std::vector<int>& component) {
  auto rl = rational_lengths(lengths);
  if (!rl) return std::nullopt;
  std::vector<char> in_comp(lengths.size(), 0);
  for (int j : component) in_comp[j] = 1;
  Rational g{0, 1};
  bool any = false;
  for (const auto& cyc : cycles) {
    if (cyc.empty() || !in_comp[cyc.front()]) continue;
    Rational sum{0, 1};
    for (int j : cyc) sum = rational_add(sum, (*rl)[j]);
    g = rational_gcd(g, sum);
    any = true;
  }
  if (!any) return std::nullopt;
  return g;
}

// Same period by spanning-tree potentials: assign p over the component with
// arc weight w(j -> k) = length(k); the gcd of the discrepancies
// p[j] + w - p[k] over all arcs equals the gcd of the cycle sums. Avoids
// cycle enumeration entirely.
inline std::optional<Rational> scc_period_potentials(
    const std::vector<std::vector<int>>& adj, const std::vector<double>& lengths,
    const std::vector<int>& component) {
  auto rl = rational_lengths(lengths);
  if (!rl) return std::nullopt;
  const int m = static_cast<int>(lengths.size());
  std::vector<char> in_comp(m, 0);
  for (int j : component) in_comp[j] = 1;

  // arcs within the component, and reverse lists for undirected traversal
  std::vector<std::vector<int>> fwd(m), rev(m);
  bool any_arc = false;
  for (int j = 0; j < m; ++j) {
    if (!in_comp[j]) continue;
    for (int k : adj[j])
      if (in_comp[k]) {
        fwd[j].push_back(k);
        rev[k].push_back(j);
        any_arc = true;
      }
  }
  if (!any_arc) return std::nullopt;

  std::vector<Rational> p(m, Rational{0, 1});
  std::vector<char> seen(m, 0);
  std::vector<int> stack{component.front()};
  seen[component.front()] = 1;
  while (!stack.empty()) {
    int j = stack.back();
    stack.pop_back();
    for (int k : fwd[j])
      if (!seen[k]) {
        seen[k] = 1;
        p[k] = rational_add(p[j], (*rl)[k]);  // arc weight = arrival length
        stack.push_back(k);
      }
    for (int i : rev[j])
      if (!seen[i]) {
        seen[i] = 1;
        p[i] = rational_sub(p[j], (*rl)[j]);
        stack.push_back(i);
      }
  }

  Rational g{0, 1};
  for (int j = 0; j < m; ++j) {
    if (!in_comp[j]) continue;
    for (int k : fwd[j]) {
      Rational delta = rational_sub(rational_add(p[j], (*rl)[k]), p[k]);
      g = rational_gcd(g, rational_abs(delta));
    }
  }
  if (g.num == 0) return std::nullopt;  // no cycle in the component
  return g;
}

// ---------------------------------------------------------------------------
// Full long-term classification

struct ComponentAsymptotics {
  int component = 0;
  bool terminal = false;
  bool cyclic = false;
  bool single_cycle = false;  // exactly periodic after the extinction time
  std::optional<Rational> period;
};

struct AsymptoticsReport {
  double t_star = 0.0;  // extinction time of the acyclic part
  std::vector<ComponentAsymptotics> components;
  bool ldq_holds = false;          // all cycle sums reconstructed as rationals
  long long d = 1;                 // lcm of cycle-sum denominators
  std::optional<Rational> global_period;  // lcm over terminal components
};

inline AsymptoticsReport classify_long_term(const MetricGraph& g,
                                            const TransportSystem& sys,
                                            size_t max_cycles = 10000) {
  StructureReport rep = analyze_structure(g, max_cycles);
  auto adj = edge_digraph(g);
  AsymptoticsReport out;
  out.t_star = nilpotent_extinction(g, sys);

  auto cr = cycle_rationals(rep.cycles, sys.lengths);
  out.ldq_holds = cr.has_value();
  if (cr) out.d = cr->d;

  std::vector<int> cycle_count(rep.strong_components.size(), 0);
  for (const auto& cyc : rep.cycles)
    if (!cyc.empty()) ++cycle_count[rep.edge_component[cyc.front()]];

  bool all_terminal_periods = true;
  Rational global{0, 1};
  for (size_t c = 0; c < rep.strong_components.size(); ++c) {
    ComponentAsymptotics ca;
    ca.component = static_cast<int>(c);
    ca.terminal = rep.terminal[c];
    ca.cyclic = rep.strong_components[c].size() > 1;
    ca.single_cycle = cycle_count[c] == 1;
    if (ca.cyclic)
      ca.period = scc_period_potentials(adj, sys.lengths, rep.strong_components[c]);
    if (ca.terminal && ca.cyclic) {
      if (ca.period)
        global = global.num == 0 ? *ca.period : rational_lcm(global, *ca.period);
      else
        all_terminal_periods = false;
    }
    out.components.push_back(std::move(ca));
  }
  if (all_terminal_periods && global.num != 0) out.global_period = global;
  return out;
}

}  // namespace netgraph
