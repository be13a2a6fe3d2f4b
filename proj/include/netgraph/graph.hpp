#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "netgraph/errors.hpp"

// Metric graph core. A graph has n vertices and m edges; every edge is a copy
// of [0,1] parametrized so that material enters at the endpoint e(1) and
// leaves at e(0). "Edge j transports into edge k" therefore means
// e_j(0) == e_k(1). Vertex weights distribute outgoing material: w(i,j) is the
// fraction sent into edge j at vertex i, nonzero exactly when e_j(1) = v_i,
// and each vertex with outgoing edges has unit row sum.

namespace netgraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
  int v0 = 0;  // e(0): exit endpoint
  int v1 = 0;  // e(1): entry endpoint
};

struct MetricGraph {
  int n = 0;
  std::vector<Edge> edges;
  Matrix weights;  // n x m; zero rows at vertices without outgoing edges
  bool has_weights = false;

  int m() const { return static_cast<int>(edges.size()); }

  int out_degree(int v) const {
    int d = 0;
    for (const Edge& e : edges) d += (e.v1 == v);
    return d;
  }
  int in_degree(int v) const {
    int d = 0;
    for (const Edge& e : edges) d += (e.v0 == v);
    return d;
  }
  // Undirected degree, used by the diffusion vertex clusters.
  int degree(int v) const {
    int d = 0;
    for (const Edge& e : edges) d += (e.v0 == v) + (e.v1 == v);
    return d;
  }
};

namespace detail {

inline void check_simple(int n, const std::vector<Edge>& edges) {
  std::vector<std::pair<int, int>> seen;
  for (const Edge& e : edges) {
    if (e.v0 < 0 || e.v0 >= n || e.v1 < 0 || e.v1 >= n)
      throw ShapeMismatch("edge endpoint out of range");
    if (e.v0 == e.v1) throw NotSimple("loop edge at vertex " + std::to_string(e.v0));
    std::pair<int, int> key = std::minmax(e.v0, e.v1);
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw NotSimple("parallel edges between " + std::to_string(key.first) + " and " +
                      std::to_string(key.second));
    seen.push_back(key);
  }
}

inline void check_connected(int n, const std::vector<Edge>& edges) {
  if (n == 0) throw Disconnected("empty graph");
  std::vector<std::vector<int>> adj(n);
  for (const Edge& e : edges) {
    adj[e.v0].push_back(e.v1);
    adj[e.v1].push_back(e.v0);
  }
  std::vector<char> vis(n, 0);
  std::vector<int> stack{0};
  vis[0] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!vis[w]) { vis[w] = 1; stack.push_back(w); }
  }
  for (int v = 0; v < n; ++v)
    if (!vis[v]) throw Disconnected("vertex " + std::to_string(v) + " unreachable");
}

inline void check_weights(const MetricGraph& g) {
  const double kRowTol = 1e-12;
  if (g.weights.rows() != g.n || g.weights.cols() != g.m())
    throw ShapeMismatch("weight matrix must be n x m");
  for (int i = 0; i < g.n; ++i) {
    bool any_out = false;
    double sum = 0.0;
    for (int j = 0; j < g.m(); ++j) {
      const bool on_support = (g.edges[j].v1 == i);
      const double w = g.weights(i, j);
      if (w < 0.0) throw BadWeightRow("negative weight at vertex " + std::to_string(i));
      if (on_support && w == 0.0)
        throw WeightSupportMismatch("zero weight on outgoing edge " + std::to_string(j));
      if (!on_support && w != 0.0)
        throw WeightSupportMismatch("nonzero weight off support at vertex " +
                                    std::to_string(i));
      any_out |= on_support;
      sum += w;
    }
    if (any_out && std::abs(sum - 1.0) > kRowTol)
      throw BadWeightRow("row sum " + std::to_string(sum) + " at vertex " + std::to_string(i));
  }
}

}  // namespace detail

inline Matrix uniform_weights(int n, const std::vector<Edge>& edges) {
  Matrix w = Matrix::Zero(n, static_cast<int>(edges.size()));
  std::vector<int> outdeg(n, 0);
  for (const Edge& e : edges) ++outdeg[e.v1];
  for (int j = 0; j < static_cast<int>(edges.size()); ++j)
    w(edges[j].v1, j) = 1.0 / outdeg[edges[j].v1];
  return w;
}

inline MetricGraph build_graph(int n, const std::vector<Edge>& edges,
                               std::optional<Matrix> weights = std::nullopt) {
  detail::check_simple(n, edges);
  detail::check_connected(n, edges);
  MetricGraph g;
  g.n = n;
  g.edges = edges;
  if (weights) {
    g.weights = *weights;
    g.has_weights = true;
    detail::check_weights(g);
  } else {
    g.weights = Matrix::Zero(n, g.m());
    g.has_weights = false;
  }
  return g;
}

inline MetricGraph build_graph_uniform(int n, const std::vector<Edge>& edges) {
  detail::check_simple(n, edges);
  return build_graph(n, edges, uniform_weights(n, edges));
}

// ---------------------------------------------------------------------------
// Incidence

struct IncidenceSet {
  Matrix phi_minus;  // (i,j) = 1 iff e_j(1) = v_i  (edge j leaves vertex i)
  Matrix phi_plus;   // (i,j) = 1 iff e_j(0) = v_i  (edge j arrives at vertex i)
  std::vector<int> sinks;    // vertices with zero phi_minus row
  std::vector<int> sources;  // vertices with zero phi_plus row
};

inline IncidenceSet incidence(const MetricGraph& g) {
  IncidenceSet inc;
  inc.phi_minus = Matrix::Zero(g.n, g.m());
  inc.phi_plus = Matrix::Zero(g.n, g.m());
  for (int j = 0; j < g.m(); ++j) {
    inc.phi_minus(g.edges[j].v1, j) = 1.0;
    inc.phi_plus(g.edges[j].v0, j) = 1.0;
  }
  for (int i = 0; i < g.n; ++i) {
    if (inc.phi_minus.row(i).sum() == 0.0) inc.sinks.push_back(i);
    if (inc.phi_plus.row(i).sum() == 0.0) inc.sources.push_back(i);
  }
  return inc;
}

inline bool has_sink(const MetricGraph& g) {
  for (int v = 0; v < g.n; ++v)
    if (g.out_degree(v) == 0) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Line-graph matrices

struct LineGraphMatrices {
  Matrix B_w;        // (j,k) nonzero iff edge k feeds edge j; value w(e_k(0), j)
  Matrix D_w_minus;  // diagonal of column sums of B_w (weighted out-degrees)
  Matrix K_minus;    // D_w_minus - B_w^T; rows sum to zero by construction
};

inline LineGraphMatrices line_matrices(const MetricGraph& g) {
  const int m = g.m();
  Matrix w;
  if (g.has_weights) {
    w = g.weights;
  } else {
    // Weights are forced when no vertex splits its outflow.
    for (int v = 0; v < g.n; ++v)
      if (g.out_degree(v) > 1)
        throw MissingWeights("vertex " + std::to_string(v) +
                             " splits outflow; weights required");
    w = uniform_weights(g.n, g.edges);
  }
  LineGraphMatrices lm;
  lm.B_w = Matrix::Zero(m, m);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (g.edges[k].v0 == g.edges[j].v1) lm.B_w(j, k) = w(g.edges[j].v1, j);
  lm.D_w_minus = Matrix::Zero(m, m);
  for (int k = 0; k < m; ++k) lm.D_w_minus(k, k) = lm.B_w.col(k).sum();
  lm.K_minus = lm.D_w_minus - lm.B_w.transpose();
  return lm;
}

// ---------------------------------------------------------------------------
// Structural analysis of the edge digraph (nodes = edges of g, arc j -> k
// when material can pass from edge j into edge k).

enum class EdgeClass {
  Acyclic,    // on no cycle and fed by no cycle: drains to zero in finite time
  Transient,  // in or downstream of a non-terminal cycle: decays, not nilpotent
  Terminal,   // member of a terminal strong component
};

struct StructureReport {
  std::vector<std::vector<int>> strong_components;  // partition of edge indices
  std::vector<bool> terminal;                       // per component
  std::vector<int> edge_component;                  // per edge
  std::vector<EdgeClass> edge_class;                // per edge
  std::vector<std::vector<int>> cycles;             // elementary cycles, edge sequences
  std::vector<int> sinks, sources;                  // vertex indices
  bool is_single_directed_cycle = false;
};

inline std::vector<std::vector<int>> edge_digraph(const MetricGraph& g) {
  std::vector<std::vector<int>> adj(g.m());
  for (int j = 0; j < g.m(); ++j)
    for (int k = 0; k < g.m(); ++k)
      if (j != k && g.edges[j].v0 == g.edges[k].v1) adj[j].push_back(k);
  return adj;
}

namespace detail {

// Tarjan strongly connected components; returns the component index per node,
// components numbered in reverse topological order.
struct Tarjan {
  const std::vector<std::vector<int>>& adj;
  std::vector<int> index, low, comp;
  std::vector<char> on_stack;
  std::vector<int> stack;
  int counter = 0, ncomp = 0;

  explicit Tarjan(const std::vector<std::vector<int>>& a)
      : adj(a), index(a.size(), -1), low(a.size(), 0), comp(a.size(), -1),
        on_stack(a.size(), 0) {
    for (int v = 0; v < static_cast<int>(a.size()); ++v)
      if (index[v] < 0) strongconnect(v);
  }

  void strongconnect(int root) {
    // Iterative DFS: (node, next child position) frames.
    std::vector<std::pair<int, size_t>> frames{{root, 0}};
    while (!frames.empty()) {
      auto& [v, ci] = frames.back();
      if (ci == 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (ci < adj[v].size()) {
        int w = adj[v][ci++];
        if (index[w] < 0) {
          frames.emplace_back(w, 0);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        while (true) {
          int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = ncomp;
          if (w == v) break;
        }
        ++ncomp;
      }
      int finished = v;
      frames.pop_back();
      if (!frames.empty()) {
        int parent = frames.back().first;
        low[parent] = std::min(low[parent], low[finished]);
      }
    }
  }
};

// Johnson's elementary-circuit enumeration. Throws once more than max_cycles
// circuits are found.
struct JohnsonCycles {
  const std::vector<std::vector<int>>& adj;
  size_t max_cycles;
  std::vector<std::vector<int>> cycles;
  std::vector<char> blocked;
  std::vector<std::vector<int>> block_map;
  std::vector<int> path;
  int start = 0;

  JohnsonCycles(const std::vector<std::vector<int>>& a, size_t cap)
      : adj(a), max_cycles(cap) {
    const int n = static_cast<int>(a.size());
    blocked.assign(n, 0);
    block_map.assign(n, {});
    for (start = 0; start < n; ++start) {
      // Restrict to nodes >= start; unblock everything in that region.
      for (int v = start; v < n; ++v) {
        blocked[v] = 0;
        block_map[v].clear();
      }
      circuit(start);
    }
  }

  void unblock(int v) {
    blocked[v] = 0;
    for (int w : block_map[v])
      if (blocked[w]) unblock(w);
    block_map[v].clear();
  }

  bool circuit(int v) {
    bool found = false;
    path.push_back(v);
    blocked[v] = 1;
    for (int w : adj[v]) {
      if (w < start) continue;
      if (w == start) {
        if (cycles.size() >= max_cycles)
          throw CycleEnumerationOverflow("more than " + std::to_string(max_cycles) +
                                         " elementary cycles");
        cycles.push_back(path);
        found = true;
      } else if (!blocked[w]) {
        if (circuit(w)) found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (int w : adj[v]) {
        if (w < start) continue;
        auto& lst = block_map[w];
        if (std::find(lst.begin(), lst.end(), v) == lst.end()) lst.push_back(v);
      }
    }
    path.pop_back();
    return found;
  }
};

}  // namespace detail

inline StructureReport analyze_structure(const MetricGraph& g,
                                         size_t max_cycles = 10000) {
  const int m = g.m();
  StructureReport rep;
  auto adj = edge_digraph(g);

  detail::Tarjan tarjan(adj);
  rep.strong_components.assign(tarjan.ncomp, {});
  rep.edge_component.assign(m, -1);
  for (int j = 0; j < m; ++j) {
    rep.edge_component[j] = tarjan.comp[j];
    rep.strong_components[tarjan.comp[j]].push_back(j);
  }
  rep.terminal.assign(tarjan.ncomp, true);
  for (int j = 0; j < m; ++j)
    for (int k : adj[j])
      if (tarjan.comp[j] != tarjan.comp[k]) rep.terminal[tarjan.comp[j]] = false;

  // A component is cyclic iff it has >1 node (self-arcs are impossible in a
  // simple graph). Edges reachable from a cyclic component keep receiving
  // inflow forever, so only cycle-free, cycle-unfed edges are nilpotent.
  std::vector<char> cyclic(tarjan.ncomp, 0);
  for (int c = 0; c < tarjan.ncomp; ++c)
    cyclic[c] = rep.strong_components[c].size() > 1;
  std::vector<char> fed_by_cycle(m, 0);
  {
    std::vector<int> stack;
    for (int j = 0; j < m; ++j)
      if (cyclic[tarjan.comp[j]]) { fed_by_cycle[j] = 1; stack.push_back(j); }
    while (!stack.empty()) {
      int j = stack.back();
      stack.pop_back();
      for (int k : adj[j])
        if (!fed_by_cycle[k]) { fed_by_cycle[k] = 1; stack.push_back(k); }
    }
  }
  rep.edge_class.assign(m, EdgeClass::Acyclic);
  for (int j = 0; j < m; ++j) {
    const int c = tarjan.comp[j];
    if (cyclic[c] && rep.terminal[c]) rep.edge_class[j] = EdgeClass::Terminal;
    else if (fed_by_cycle[j]) rep.edge_class[j] = EdgeClass::Transient;
    else rep.edge_class[j] = EdgeClass::Acyclic;
  }

  detail::JohnsonCycles jc(adj, max_cycles);
  rep.cycles = std::move(jc.cycles);

  IncidenceSet inc = incidence(g);
  rep.sinks = inc.sinks;
  rep.sources = inc.sources;

  rep.is_single_directed_cycle = (g.n == m);
  for (int v = 0; v < g.n && rep.is_single_directed_cycle; ++v)
    if (g.out_degree(v) != 1 || g.in_degree(v) != 1)
      rep.is_single_directed_cycle = false;

  return rep;
}

// Algebraic multiplicity of the zero eigenvalue of an outgoing Kirchhoff
// matrix; for a line-graph Kirchhoff matrix this counts connected components.
inline int multiplicity_zero_kirchhoff(const Matrix& K) {
  if (K.rows() != K.cols()) throw ShapeMismatch("Kirchhoff matrix must be square");
  const double norm = K.cwiseAbs().rowwise().sum().maxCoeff();
  if (norm == 0.0) return static_cast<int>(K.rows());
  Eigen::EigenSolver<Matrix> es(K, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw EigensolverFailure("Kirchhoff eigensolve");
  int count = 0;
  for (int i = 0; i < K.rows(); ++i)
    if (std::abs(es.eigenvalues()[i]) < 1e-8 * norm) ++count;
  return count;
}

}  // namespace netgraph
