#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "netgraph/errors.hpp"

// Per-edge coefficient fields (velocities for transport, diffusivities for
// diffusion) and the travel-time change of variables. A coefficient is either
// a positive constant or a positive tabulation on a uniform grid over [0,1],
// interpolated linearly.

namespace netgraph {

struct EdgeCoefficient {
  bool is_constant = true;
  double value = 1.0;
  std::vector<double> samples;  // uniform grid incl. both endpoints, size >= 2

  double eval(double s) const {
    if (is_constant) return value;
    const int K = static_cast<int>(samples.size());
    double x = s * (K - 1);
    int k = std::min(static_cast<int>(x), K - 2);
    if (k < 0) k = 0;
    double t = x - k;
    return samples[k] * (1.0 - t) + samples[k + 1] * t;
  }
};

struct CoefficientField {
  std::vector<EdgeCoefficient> edge;

  int m() const { return static_cast<int>(edge.size()); }
  double at(int j, double s) const { return edge[j].eval(s); }

  static CoefficientField constant(int m, double v) {
    CoefficientField f;
    f.edge.assign(m, EdgeCoefficient{true, v, {}});
    f.validate();
    return f;
  }
  static CoefficientField per_edge(const std::vector<double>& v) {
    CoefficientField f;
    for (double c : v) f.edge.push_back(EdgeCoefficient{true, c, {}});
    f.validate();
    return f;
  }
  static CoefficientField tabulated(const std::vector<std::vector<double>>& tables) {
    CoefficientField f;
    for (const auto& t : tables) {
      if (t.size() < 2) throw ShapeMismatch("tabulated coefficient needs >= 2 samples");
      f.edge.push_back(EdgeCoefficient{false, 0.0, t});
    }
    f.validate();
    return f;
  }

  void validate() const {
    for (int j = 0; j < m(); ++j) {
      const auto& e = edge[j];
      if (e.is_constant) {
        if (!(e.value > 0.0))
          throw NonPositiveCoefficient("edge " + std::to_string(j));
      } else {
        for (double v : e.samples)
          if (!(v > 0.0)) throw NonPositiveCoefficient("edge " + std::to_string(j));
      }
    }
  }
};

// Travel-time map per edge: phi(s) = integral over [0,s] of 1/c. Tabulated
// coefficients use the composite trapezoid on the reciprocal samples (exact
// when 1/c is piecewise linear); inversion is monotone bisection to 1e-12.
struct TravelTimeMap {
  struct EdgeMap {
    bool is_constant = true;
    double c = 1.0;               // constant case
    std::vector<double> g_nodes;  // 1/c at uniform s-nodes
    std::vector<double> y_nodes;  // cumulative trapezoid of g
    double length = 1.0;          // phi(1)

    double phi(double s) const {
      if (is_constant) return s / c;
      const int K = static_cast<int>(g_nodes.size());
      const double ds = 1.0 / (K - 1);
      double x = s / ds;
      int k = std::min(std::max(static_cast<int>(x), 0), K - 2);
      const double s_k = k * ds;
      const double t = (s - s_k) / ds;
      const double gs = g_nodes[k] * (1.0 - t) + g_nodes[k + 1] * t;
      return y_nodes[k] + (s - s_k) * 0.5 * (g_nodes[k] + gs);
    }

    double inverse(double y) const {
      if (is_constant) return std::min(std::max(y * c, 0.0), 1.0);
      if (y <= 0.0) return 0.0;
      if (y >= length) return 1.0;
      double lo = 0.0, hi = 1.0;
      while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        if (phi(mid) < y) lo = mid; else hi = mid;
      }
      return 0.5 * (lo + hi);
    }
  };

  std::vector<EdgeMap> edge;

  int m() const { return static_cast<int>(edge.size()); }
  double length(int j) const { return edge[j].length; }
  double phi(int j, double s) const { return edge[j].phi(s); }
  double inverse(int j, double y) const { return edge[j].inverse(y); }

  std::vector<double> lengths() const {
    std::vector<double> out(edge.size());
    for (size_t j = 0; j < edge.size(); ++j) out[j] = edge[j].length;
    return out;
  }
};

inline TravelTimeMap travel_time(const CoefficientField& c) {
  c.validate();
  TravelTimeMap map;
  map.edge.resize(c.m());
  for (int j = 0; j < c.m(); ++j) {
    auto& e = map.edge[j];
    if (c.edge[j].is_constant) {
      e.is_constant = true;
      e.c = c.edge[j].value;
      e.length = 1.0 / e.c;
    } else {
      e.is_constant = false;
      const auto& tab = c.edge[j].samples;
      const int K = static_cast<int>(tab.size());
      e.g_nodes.resize(K);
      for (int k = 0; k < K; ++k) e.g_nodes[k] = 1.0 / tab[k];
      e.y_nodes.resize(K);
      e.y_nodes[0] = 0.0;
      const double ds = 1.0 / (K - 1);
      for (int k = 1; k < K; ++k)
        e.y_nodes[k] = e.y_nodes[k - 1] + 0.5 * ds * (e.g_nodes[k - 1] + e.g_nodes[k]);
      e.length = e.y_nodes[K - 1];
    }
  }
  return map;
}

}  // namespace netgraph
