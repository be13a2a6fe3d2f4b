#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "netgraph/graph.hpp"
#include "netgraph/spectral.hpp"

// The two application models.
//
// Mutation flow: material on edge k reproduces into edge j either faithfully
// (mitosis matrix K) or with a type change (mutation matrix Q); together they
// form the boundary matrix B_w = K + Q of a unit-speed transport problem, so
// K + Q must be column stochastic for the plain scenario to conserve mass.
// The singular-perturbation study instead scales Q by eps and requires K
// alone to be stochastic; that check lives with the study.
//
// Synaptic exchange: vesicle pools sit at both endpoints of every edge and
// swap content across vertices. Exit rates l_i (at e_i(1)) and r_i (at
// e_i(0)) split into pairwise transfer rates toward the endpoint pools of
// neighboring edges; the trace map collects them into a 2m x 2m matrix whose
// dissipative orientation drives the Robin diffusion layout.

namespace netgraph {

struct MutationModel {
  MetricGraph g;
  Matrix K, Q, B_w;
  int m = 0;
};

inline MutationModel build_mutation_model(const MetricGraph& g, const Matrix& K,
                                          const Matrix& Q, double col_tol = 1e-12) {
  const int m = g.m();
  if (K.rows() != m || K.cols() != m || Q.rows() != m || Q.cols() != m)
    throw ShapeMismatch("K and Q must be m x m for the graph's m edges");
  if (K.minCoeff() < 0.0) throw NegativeEntry("K has negative entries");
  if (Q.minCoeff() < 0.0) throw NegativeEntry("Q has negative entries");
  Matrix B = K + Q;
  for (int k = 0; k < m; ++k)
    if (std::abs(B.col(k).sum() - 1.0) > col_tol)
      throw NotColumnStochastic("column " + std::to_string(k) + " of K + Q sums to " +
                                std::to_string(B.col(k).sum()));
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k)
      if (B(j, k) != 0.0 && g.edges[j].v1 != g.edges[k].v0)
        throw WeightSupportMismatch("entry (" + std::to_string(j) + ", " +
                                    std::to_string(k) + ") crosses no vertex");
  MutationModel model;
  model.g = g;
  model.K = K;
  model.Q = Q;
  model.B_w = std::move(B);
  model.m = m;
  return model;
}

// ---------------------------------------------------------------------------
// Synaptic exchange

struct SynapticRates {
  Vector l, r;        // total exit rates at e(1) / e(0) per edge
  Matrix l_pair, r_pair;  // (i, j): transfer from edge i's pool into edge j's
};

struct MarkovCheck {
  bool ok = true;
  double worst = 0.0;  // largest |row balance defect|
};

// Exit rates are Markovian when each pool's pairwise rates exhaust its total
// exit rate; exactly then the Robin generator conserves mass.
inline MarkovCheck check_markov(const SynapticRates& rates, double tol = 1e-12) {
  MarkovCheck chk;
  for (int i = 0; i < rates.l.size(); ++i) {
    chk.worst = std::max(chk.worst, std::abs(rates.l_pair.row(i).sum() - rates.l[i]));
    chk.worst = std::max(chk.worst, std::abs(rates.r_pair.row(i).sum() - rates.r[i]));
  }
  chk.ok = chk.worst <= tol;
  return chk;
}

struct SynapticModel {
  SynapticRates rates;
  Matrix Kblocks;  // (f'(0); f'(1)) = Kblocks (f(0); f(1)), entries as modeled
  Matrix robin_K;  // -Kblocks: the dissipative orientation fed to assembly
  Matrix K_minus;  // diag(l + r) - (l_pair + r_pair)
};

inline SynapticModel build_synaptic_model(const MetricGraph& g,
                                          const SynapticRates& rates,
                                          bool require_connected = true) {
  const int m = g.m();
  if (rates.l.size() != m || rates.r.size() != m || rates.l_pair.rows() != m ||
      rates.l_pair.cols() != m || rates.r_pair.rows() != m || rates.r_pair.cols() != m)
    throw ShapeMismatch("rate containers must match the edge count");
  if (rates.l.minCoeff() < 0.0 || rates.r.minCoeff() < 0.0 ||
      rates.l_pair.minCoeff() < 0.0 || rates.r_pair.minCoeff() < 0.0)
    throw NegativeEntry("exchange rates must be nonnegative");

  auto incident = [&](int edge, int v) {
    return g.edges[edge].v0 == v || g.edges[edge].v1 == v;
  };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (rates.r_pair(i, j) != 0.0 && (i == j || !incident(j, g.edges[i].v0)))
        throw SupportMismatch("r transfer " + std::to_string(i) + "->" +
                              std::to_string(j) + " crosses no shared vertex");
      if (rates.l_pair(i, j) != 0.0 && (i == j || !incident(j, g.edges[i].v1)))
        throw SupportMismatch("l transfer " + std::to_string(i) + "->" +
                              std::to_string(j) + " crosses no shared vertex");
    }

  SynapticModel model;
  model.rates = rates;
  Matrix K00 = Matrix::Zero(m, m), K01 = Matrix::Zero(m, m);
  Matrix K10 = Matrix::Zero(m, m), K11 = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    K00(i, i) = -rates.r[i];
    K11(i, i) = rates.l[i];
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      if (rates.r_pair(i, j) != 0.0) {
        // pool at e_i(0) feeds whichever endpoint of edge j sits at the vertex
        if (g.edges[j].v0 == g.edges[i].v0) K00(i, j) += rates.r_pair(i, j);
        else K01(i, j) += rates.r_pair(i, j);
      }
      if (rates.l_pair(i, j) != 0.0) {
        if (g.edges[j].v0 == g.edges[i].v1) K10(i, j) -= rates.l_pair(i, j);
        else K11(i, j) -= rates.l_pair(i, j);
      }
    }
  }
  model.Kblocks = Matrix::Zero(2 * m, 2 * m);
  model.Kblocks.topLeftCorner(m, m) = K00;
  model.Kblocks.topRightCorner(m, m) = K01;
  model.Kblocks.bottomLeftCorner(m, m) = K10;
  model.Kblocks.bottomRightCorner(m, m) = K11;
  model.robin_K = -model.Kblocks;
  model.K_minus = Matrix(rates.l.asDiagonal()) + Matrix(rates.r.asDiagonal()) -
                  rates.l_pair - rates.r_pair;

  if (require_connected) {
    Matrix transfer = rates.l_pair + rates.r_pair;
    if (!is_irreducible(transfer + Matrix::Identity(m, m)))
      throw NotStronglyConnected("exchange rates do not connect all edges");
  }
  return model;
}

struct SynapticPreset {
  MetricGraph g;
  SynapticModel model;
};

// Two pools across one shared vertex with symmetric unit exchange; the
// aggregated exchange matrix is [[1, -1], [-1, 1]] with spectral gap 2.
inline SynapticPreset two_pool_preset() {
  SynapticPreset p;
  p.g = build_graph_uniform(3, {{1, 0}, {2, 1}});  // chain 0->1->2
  SynapticRates rates;
  rates.l = Vector::Zero(2);
  rates.r = Vector::Zero(2);
  rates.l_pair = Matrix::Zero(2, 2);
  rates.r_pair = Matrix::Zero(2, 2);
  rates.r[0] = 1.0;
  rates.r_pair(0, 1) = 1.0;  // e0(0) = v1 = e1(1)
  rates.l[1] = 1.0;
  rates.l_pair(1, 0) = 1.0;
  p.model = build_synaptic_model(p.g, rates);
  return p;
}

// Three pools in a chain with symmetric unit exchange at both interior
// vertices; the aggregated exchange matrix has eigenvalues {0, 1, 3}.
inline SynapticPreset three_pool_preset() {
  SynapticPreset p;
  p.g = build_graph_uniform(4, {{1, 0}, {2, 1}, {3, 2}});  // 0->1->2->3 chain
  SynapticRates rates;
  rates.l = Vector::Zero(3);
  rates.r = Vector::Zero(3);
  rates.l_pair = Matrix::Zero(3, 3);
  rates.r_pair = Matrix::Zero(3, 3);
  // vertex 1 joins e0(0) and e1(1); vertex 2 joins e1(0) and e2(1)
  rates.r[0] = 1.0;
  rates.r_pair(0, 1) = 1.0;
  rates.l[1] = 1.0;
  rates.l_pair(1, 0) = 1.0;
  rates.r[1] = 1.0;
  rates.r_pair(1, 2) = 1.0;
  rates.l[2] = 1.0;
  rates.l_pair(2, 1) = 1.0;
  p.model = build_synaptic_model(p.g, rates);
  return p;
}

}  // namespace netgraph
