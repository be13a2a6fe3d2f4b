#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "netgraph/coefficients.hpp"
#include "netgraph/diffusion.hpp"
#include "netgraph/graph.hpp"
#include "netgraph/models.hpp"

// Scenario files: one JSON object describing a graph, a coefficient field,
// optional model data, initial values, and solver parameters. Edges are
// 1-based {"tail": a, "head": b} with material flowing tail -> head, so the
// stored Edge has v1 = tail - 1 (the s = 1 endpoint) and v0 = head - 1.

namespace netgraph {

using njson = nlohmann::json;

struct SolverParams {
  double t_final = 1.0;
  double h = 0.05;
  double dt = 1e-3;
  int cells = 32;
  Scheme scheme = Scheme::BackwardEuler;
  bool strict = true;
  double t_min = 0.0;  // aggregation studies ignore errors before this time
};

struct InitialSpec {
  std::string kind = "constant";  // constant | per-edge | cosine | samples | random
  double value = 1.0;
  std::vector<double> values;
  double base = 1.0, amplitude = 0.5;
  int mode_k = 1;
  std::vector<std::vector<double>> tables;
  double low = 0.0, high = 1.0;
};

struct Scenario {
  std::string name;
  std::string mode;  // transport | diffusion-standard | diffusion-robin
  MetricGraph g;
  CoefficientField coeff;
  // Mutation matrices are stored raw: the transport command needs K + Q
  // column stochastic while the aggregation study needs K alone stochastic,
  // so each command validates against its own contract.
  std::optional<Matrix> mutation_K, mutation_Q;
  std::optional<SynapticModel> synaptic;
  std::optional<Matrix> robin_K;
  InitialSpec initial;
  SolverParams solver;
  std::vector<double> eps;
  std::string aggregate_mode;  // flow | diffusion | ""
  njson raw;
};

namespace detail {

inline const njson& require(const njson& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw SchemaError(std::string(where) + ": missing \"" + key + "\"");
  return *it;
}

inline double number(const njson& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + " must be a number");
  return j.get<double>();
}

inline std::vector<double> parse_numbers(const njson& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, where));
  return out;
}

inline Matrix parse_matrix(const njson& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw SchemaError(where + " must be a nonempty array of rows");
  const auto first = parse_numbers(j[0], where);
  Matrix M(static_cast<int>(j.size()), static_cast<int>(first.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto row = parse_numbers(j[i], where);
    if (row.size() != first.size()) throw SchemaError(where + " rows differ in length");
    for (std::size_t k = 0; k < row.size(); ++k)
      M(static_cast<int>(i), static_cast<int>(k)) = row[k];
  }
  return M;
}

inline Vector parse_vec(const njson& j, const std::string& where) {
  const auto v = parse_numbers(j, where);
  Vector out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

inline MetricGraph parse_graph(const njson& j) {
  if (!j.is_object()) throw SchemaError("graph must be an object");
  const njson& jv = require(j, "vertices", "graph");
  if (!jv.is_number_integer() || jv.get<int>() < 1)
    throw SchemaError("graph.vertices must be a positive integer");
  const int n = jv.get<int>();
  const njson& je = require(j, "edges", "graph");
  if (!je.is_array() || je.empty()) throw SchemaError("graph.edges must be a nonempty array");
  std::vector<Edge> edges;
  for (const auto& e : je) {
    if (!e.is_object()) throw SchemaError("each edge must be an object");
    const int tail = static_cast<int>(number(require(e, "tail", "edge"), "edge.tail"));
    const int head = static_cast<int>(number(require(e, "head", "edge"), "edge.head"));
    if (tail < 1 || tail > n || head < 1 || head > n)
      throw SchemaError("edge endpoints must lie in 1.." + std::to_string(n));
    edges.push_back({head - 1, tail - 1});
  }
  if (j.contains("weights")) {
    Matrix w = parse_matrix(j["weights"], "graph.weights");
    return build_graph(n, edges, w);
  }
  return build_graph_uniform(n, edges);
}

inline CoefficientField parse_coefficients(const njson& j, int m) {
  if (!j.is_object()) throw SchemaError("coefficients must be an object");
  const std::string kind = require(j, "kind", "coefficients").get<std::string>();
  if (kind == "constant")
    return CoefficientField::constant(m, number(require(j, "value", "coefficients"),
                                                "coefficients.value"));
  if (kind == "per-edge") {
    auto v = parse_numbers(require(j, "values", "coefficients"), "coefficients.values");
    if (static_cast<int>(v.size()) != m)
      throw SchemaError("coefficients.values must list one value per edge");
    return CoefficientField::per_edge(v);
  }
  if (kind == "tabulated") {
    const njson& jt = require(j, "tables", "coefficients");
    if (!jt.is_array() || static_cast<int>(jt.size()) != m)
      throw SchemaError("coefficients.tables must list one table per edge");
    std::vector<std::vector<double>> tables;
    for (const auto& t : jt) tables.push_back(parse_numbers(t, "coefficients.tables"));
    return CoefficientField::tabulated(tables);
  }
  throw SchemaError("coefficients.kind must be constant, per-edge, or tabulated");
}

inline InitialSpec parse_initial(const njson& j, int m) {
  if (!j.is_object()) throw SchemaError("initial must be an object");
  InitialSpec spec;
  spec.kind = require(j, "kind", "initial").get<std::string>();
  if (spec.kind == "constant") {
    spec.value = number(require(j, "value", "initial"), "initial.value");
  } else if (spec.kind == "per-edge") {
    spec.values = parse_numbers(require(j, "values", "initial"), "initial.values");
    if (static_cast<int>(spec.values.size()) != m)
      throw SchemaError("initial.values must list one value per edge");
  } else if (spec.kind == "cosine") {
    spec.base = number(require(j, "base", "initial"), "initial.base");
    spec.amplitude = number(require(j, "amplitude", "initial"), "initial.amplitude");
    spec.mode_k = j.value("mode", 1);
    if (spec.mode_k < 0) throw SchemaError("initial.mode must be nonnegative");
  } else if (spec.kind == "samples") {
    const njson& jt = require(j, "values", "initial");
    if (!jt.is_array() || static_cast<int>(jt.size()) != m)
      throw SchemaError("initial.values must list one sample table per edge");
    for (const auto& t : jt) {
      spec.tables.push_back(parse_numbers(t, "initial.values"));
      if (spec.tables.back().size() < 2)
        throw SchemaError("initial sample tables need at least two points");
    }
  } else if (spec.kind == "random") {
    spec.low = j.value("low", 0.0);
    spec.high = j.value("high", 1.0);
    if (!(spec.low <= spec.high)) throw SchemaError("initial.low must not exceed high");
  } else {
    throw SchemaError("initial.kind must be constant, per-edge, cosine, samples, or random");
  }
  return spec;
}

inline SynapticRates parse_rates(const njson& j, int m) {
  if (!j.is_object()) throw SchemaError("model.rates must be an object");
  SynapticRates rates;
  rates.l = parse_vec(require(j, "l", "rates"), "rates.l");
  rates.r = parse_vec(require(j, "r", "rates"), "rates.r");
  rates.l_pair = parse_matrix(require(j, "l_pair", "rates"), "rates.l_pair");
  rates.r_pair = parse_matrix(require(j, "r_pair", "rates"), "rates.r_pair");
  if (rates.l.size() != m || rates.r.size() != m)
    throw SchemaError("rates.l and rates.r must list one rate per edge");
  return rates;
}

}  // namespace detail

// Deterministic initial-data evaluator; the random kind draws one constant
// per edge from the seed so reruns with the same seed are identical.
inline std::function<double(int, double)> initial_function(const InitialSpec& spec,
                                                           int m,
                                                           unsigned seed = 12345) {
  const double pi = 3.14159265358979323846;
  if (spec.kind == "constant") {
    const double v = spec.value;
    return [v](int, double) { return v; };
  }
  if (spec.kind == "per-edge") {
    auto values = spec.values;
    return [values](int j, double) { return values[j]; };
  }
  if (spec.kind == "cosine") {
    const double b = spec.base, a = spec.amplitude;
    const int k = spec.mode_k;
    return [b, a, k, pi](int, double s) { return b + a * std::cos(k * pi * s); };
  }
  if (spec.kind == "samples") {
    auto tables = spec.tables;
    return [tables](int j, double s) {
      const auto& t = tables[j];
      const int K = static_cast<int>(t.size());
      double x = s * (K - 1);
      int k = std::min(std::max(static_cast<int>(x), 0), K - 2);
      const double frac = x - k;
      return t[k] * (1.0 - frac) + t[k + 1] * frac;
    };
  }
  if (spec.kind == "random") {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(spec.low, spec.high);
    std::vector<double> values(m);
    for (double& v : values) v = dist(rng);
    return [values](int j, double) { return values[j]; };
  }
  throw SchemaError("unknown initial kind " + spec.kind);
}

inline Scenario parse_scenario(const njson& j) {
  if (!j.is_object()) throw SchemaError("scenario must be a JSON object");
  Scenario sc;
  sc.raw = j;
  sc.name = j.value("name", "");

  std::string preset;
  if (j.contains("model")) {
    const njson& jm = j["model"];
    if (!jm.is_object()) throw SchemaError("model must be an object");
    const std::string type = detail::require(jm, "type", "model").get<std::string>();
    if (type == "preset") {
      preset = detail::require(jm, "name", "model").get<std::string>();
      SynapticPreset p;
      if (preset == "two-pool") p = two_pool_preset();
      else if (preset == "three-pool") p = three_pool_preset();
      else throw SchemaError("model preset must be two-pool or three-pool");
      sc.g = p.g;
      sc.synaptic = p.model;
    }
  }

  if (j.contains("graph")) {
    if (!preset.empty()) throw SchemaError("give either a graph or a model preset, not both");
    sc.g = detail::parse_graph(j["graph"]);
  } else if (preset.empty()) {
    throw SchemaError("scenario needs a graph or a model preset");
  }
  const int m = sc.g.m();

  if (j.contains("model") && preset.empty()) {
    const njson& jm = j["model"];
    const std::string type = jm["type"].get<std::string>();
    if (type == "mutation") {
      Matrix K = detail::parse_matrix(detail::require(jm, "K", "model"), "model.K");
      Matrix Q = detail::parse_matrix(detail::require(jm, "Q", "model"), "model.Q");
      if (K.rows() != m || K.cols() != m || Q.rows() != m || Q.cols() != m)
        throw SchemaError("model.K and model.Q must be m x m for m edges");
      sc.mutation_K = K;
      sc.mutation_Q = Q;
    } else if (type == "synaptic") {
      SynapticRates rates = detail::parse_rates(detail::require(jm, "rates", "model"), m);
      sc.synaptic = build_synaptic_model(sc.g, rates);
    } else {
      throw SchemaError("model.type must be mutation, synaptic, or preset");
    }
  }

  sc.mode = j.value("mode", sc.synaptic ? std::string("diffusion-robin")
                                        : std::string("transport"));
  if (sc.mode != "transport" && sc.mode != "diffusion-standard" &&
      sc.mode != "diffusion-robin")
    throw SchemaError("mode must be transport, diffusion-standard, or diffusion-robin");

  sc.coeff = j.contains("coefficients")
                 ? detail::parse_coefficients(j["coefficients"], m)
                 : CoefficientField::constant(m, 1.0);

  if (sc.synaptic) sc.robin_K = sc.synaptic->robin_K;
  else if (j.contains("robin_K"))
    sc.robin_K = detail::parse_matrix(j["robin_K"], "robin_K");

  sc.initial = j.contains("initial") ? detail::parse_initial(j["initial"], m)
                                     : InitialSpec{};

  if (j.contains("solver")) {
    const njson& js = j["solver"];
    if (!js.is_object()) throw SchemaError("solver must be an object");
    sc.solver.t_final = js.value("t_final", sc.solver.t_final);
    sc.solver.h = js.value("h", sc.solver.h);
    sc.solver.dt = js.value("dt", sc.solver.dt);
    sc.solver.cells = js.value("cells", sc.solver.cells);
    sc.solver.strict = js.value("strict", sc.solver.strict);
    sc.solver.t_min = js.value("t_min", sc.solver.t_min);
    if (js.contains("scheme")) {
      const std::string s = js["scheme"].get<std::string>();
      if (s == "be") sc.solver.scheme = Scheme::BackwardEuler;
      else if (s == "tr") sc.solver.scheme = Scheme::Trapezoidal;
      else throw SchemaError("solver.scheme must be be or tr");
    }
    if (!(sc.solver.t_final >= 0.0) || !(sc.solver.h > 0.0) || !(sc.solver.dt > 0.0) ||
        sc.solver.cells < 2)
      throw SchemaError("solver parameters must be positive (cells >= 2)");
  }

  if (j.contains("eps")) {
    sc.eps = detail::parse_numbers(j["eps"], "eps");
    for (double e : sc.eps)
      if (!(e > 0.0)) throw SchemaError("eps values must be positive");
  }

  sc.aggregate_mode = j.value("aggregate",
                              sc.mutation_K ? std::string("flow")
                                            : (sc.synaptic ? std::string("diffusion")
                                                           : std::string()));
  if (!sc.aggregate_mode.empty() && sc.aggregate_mode != "flow" &&
      sc.aggregate_mode != "diffusion")
    throw SchemaError("aggregate must be flow or diffusion");
  return sc;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline njson parse_json_text(const std::string& text) {
  try {
    return njson::parse(text);
  } catch (const njson::parse_error& e) {
    throw ParseError(e.what());  // nlohmann reports byte position and context
  }
}

inline Scenario load_scenario(const std::string& path) {
  return parse_scenario(parse_json_text(read_file(path)));
}

// FNV-1a over the scenario file bytes; stable fingerprint for reports.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace netgraph
