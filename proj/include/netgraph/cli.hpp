#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "netgraph/aggregation.hpp"
#include "netgraph/generation.hpp"
#include "netgraph/scenario.hpp"
#include "netgraph/spectral.hpp"

// Command-line front end. Every command loads one scenario file, applies
// flag overrides, and emits a JSON summary (stdout, or --out <file> plus a
// CSV sidecar for time series). Exit codes: 0 success, 2 rejected input,
// 3 numerical failure. Output is deterministic: rerunning the same command
// on the same file produces byte-identical artifacts.

namespace netgraph::cli {

inline constexpr const char* kVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Output plumbing

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

struct Series {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool empty() const { return columns.empty(); }

  std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += fmt17(row[i]);
      }
      out += '\n';
    }
    return out;
  }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

inline std::string csv_path_for(const std::string& out) {
  const std::string suffix = ".json";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + ".csv";
  return out + ".csv";
}

inline njson rational_json(const Rational& r) {
  njson j;
  j["num"] = r.num;
  j["den"] = r.den;
  j["value"] = r.value();
  j["text"] = std::to_string(r.num) + "/" + std::to_string(r.den);
  return j;
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// ---------------------------------------------------------------------------
// Flag overrides

struct Overrides {
  double t_final = -1.0, h = -1.0, dt = -1.0, t_min = -1.0;
  int cells = -1;
  std::string scheme;
  std::vector<double> eps;
  std::string out;
  unsigned seed = 12345;
  bool strict_on = false, strict_off = false;
  std::string aggregate_mode;
  bool echo_config = false;
};

inline void apply_overrides(Scenario& sc, const Overrides& o) {
  if (o.t_final >= 0.0) sc.solver.t_final = o.t_final;
  if (o.h > 0.0) sc.solver.h = o.h;
  if (o.dt > 0.0) sc.solver.dt = o.dt;
  if (o.t_min >= 0.0) sc.solver.t_min = o.t_min;
  if (o.cells > 0) {
    if (o.cells < 2) throw SchemaError("--cells must be at least 2");
    sc.solver.cells = o.cells;
  }
  if (!o.scheme.empty()) {
    if (o.scheme == "be") sc.solver.scheme = Scheme::BackwardEuler;
    else if (o.scheme == "tr") sc.solver.scheme = Scheme::Trapezoidal;
    else throw SchemaError("--scheme must be be or tr");
  }
  if (!o.eps.empty()) {
    for (double e : o.eps)
      if (!(e > 0.0)) throw SchemaError("--eps values must be positive");
    sc.eps = o.eps;
  }
  if (o.strict_on) sc.solver.strict = true;
  if (o.strict_off) sc.solver.strict = false;
  if (!o.aggregate_mode.empty()) sc.aggregate_mode = o.aggregate_mode;
}

// ---------------------------------------------------------------------------
// Shared builders

inline TransportSystem build_transport_system(const Scenario& sc) {
  // Mutation scenarios evolve under the composite matrix K + Q. Column sums
  // are reported as a conservation diagnostic, not enforced here: generation
  // only needs the support to match the graph, and growth models carry
  // column sums above one on purpose.
  if (sc.mutation_K)
    return make_transport_weighted(sc.g, sc.coeff, *sc.mutation_K + *sc.mutation_Q);
  return make_transport(sc.g, sc.coeff);
}

// per-edge integral of the initial profile (composite Simpson)
inline Vector edge_integrals(const std::function<double(int, double)>& f, int m) {
  const int panels = 512;
  Vector out = Vector::Zero(m);
  for (int j = 0; j < m; ++j) {
    const double hq = 1.0 / panels;
    double acc = f(j, 0.0) + f(j, 1.0);
    for (int i = 1; i < panels; ++i)
      acc += (i % 2 ? 4.0 : 2.0) * f(j, i * hq);
    out[j] = acc * hq / 3.0;
  }
  return out;
}

inline long long step_count(double T, double dt) {
  const double steps_real = T / dt;
  const long long steps = std::llround(steps_real);
  if (steps < 0 || std::abs(steps_real - steps) > 1e-9 * std::max(1.0, steps_real))
    throw NonGridTime("t_final is not a multiple of the step");
  return steps;
}

// ---------------------------------------------------------------------------
// check: can the generator of the chosen dynamics exist, and is it a group

inline njson cmd_check(const Scenario& sc) {
  njson out;
  out["vertices"] = sc.g.n;
  out["edges"] = sc.g.m();
  StructureReport rep = analyze_structure(sc.g);
  out["sinks"] = rep.sinks;
  out["sources"] = rep.sources;

  if (sc.mode == "transport") {
    const bool semigroup = rep.sinks.empty();
    out["conditions"] = "transport";
    out["semigroup"] = semigroup;
    if (semigroup) {
      TransportSystem sys = build_transport_system(sc);
      Eigen::FullPivLU<Matrix> lu(sys.B_c);
      const double det = lu.determinant();
      out["det"] = det;
      out["group"] = detail::det_nonzero(det, sys.B_c);
      out["single_directed_cycle"] = rep.is_single_directed_cycle;
      if (sc.mutation_K) {
        const Matrix B = *sc.mutation_K + *sc.mutation_Q;
        double defect = 0.0;
        for (int k = 0; k < B.cols(); ++k)
          defect = std::max(defect, std::abs(B.col(k).sum() - 1.0));
        out["column_stochastic_defect"] = defect;
      }
    } else {
      out["group"] = false;
    }
    return out;
  }

  if (sc.mode == "diffusion-standard") {
    DiffusionBoundary b = diffusion_boundary_standard(sc.g, sc.coeff);
    GenerationCheck chk = check_diffusion_generation(b, sc.coeff);
    out["conditions"] = "standard";
    out["k0"] = b.k0();
    out["k1"] = b.k1();
    out["det"] = chk.det;
    out["generates"] = chk.ok;
    return out;
  }

  // diffusion-robin
  if (!sc.robin_K)
    throw SchemaError("diffusion-robin needs a synaptic model or a robin_K matrix");
  DiffusionBoundary b = robin_boundary(*sc.robin_K);
  GenerationCheck chk = check_diffusion_generation(b, sc.coeff);
  out["conditions"] = "robin";
  out["det"] = chk.det;
  out["generates"] = chk.ok;
  if (sc.synaptic) {
    MarkovCheck mc = check_markov(sc.synaptic->rates);
    out["markov"] = mc.ok;
    out["markov_defect"] = mc.worst;
  }
  return out;
}

// ---------------------------------------------------------------------------
// transport: exact-shift evolution with conservation diagnostics

inline njson cmd_transport(const Scenario& sc, Series& series) {
  if (sc.mode != "transport")
    throw SchemaError("transport command needs mode transport");
  TransportSystem sys = build_transport_system(sc);
  auto f = initial_function(sc.initial, sc.g.m());
  TransportState st = init_state(sys, f, sc.solver.h, sc.solver.strict);
  const long long steps = step_count(sc.solver.t_final, st.h);

  series.columns = {"t", "mass", "min", "kirchhoff"};
  for (int j = 0; j < sc.g.m(); ++j)
    series.columns.push_back("mass_edge" + std::to_string(j + 1));

  double mass0 = 0.0, min_all = 0.0, kirchhoff_max = 0.0, mass_final = 0.0;
  auto record = [&](long long k) {
    TransportDiagnostics d = diagnostics(sys, st);
    std::vector<double> row = {st.t, d.mass, d.min_value, d.kirchhoff_residual};
    row.insert(row.end(), d.edge_mass.begin(), d.edge_mass.end());
    series.rows.push_back(std::move(row));
    if (k == 0) {
      mass0 = d.mass;
      min_all = d.min_value;
    }
    min_all = std::min(min_all, d.min_value);
    kirchhoff_max = std::max(kirchhoff_max, d.kirchhoff_residual);
    mass_final = d.mass;
  };
  record(0);
  for (long long k = 1; k <= steps; ++k) {
    transport_step(sys, st);
    record(k);
  }

  double snap = 0.0;
  for (double e : st.snap_error) snap = std::max(snap, e);

  njson out;
  out["h"] = st.h;
  out["steps"] = steps;
  out["snap_error"] = snap;
  out["mass_initial"] = mass0;
  out["mass_final"] = mass_final;
  out["mass_drift_rel"] =
      std::abs(mass_final - mass0) / std::max(std::abs(mass0), 1e-300);
  out["min_value"] = min_all;
  out["kirchhoff_max"] = kirchhoff_max;
  return out;
}

// ---------------------------------------------------------------------------
// diffuse: finite-volume heat evolution under either vertex condition family

inline njson cmd_diffuse(const Scenario& sc, Series& series) {
  DiscreteGenerator gen;
  Vector u;
  auto f = initial_function(sc.initial, sc.g.m());
  if (sc.mode == "diffusion-standard") {
    gen = assemble_standard(sc.g, sc.coeff, sc.solver.cells);
    u = sample_standard(gen, sc.g, f);
  } else if (sc.mode == "diffusion-robin") {
    if (!sc.robin_K)
      throw SchemaError("diffusion-robin needs a synaptic model or a robin_K matrix");
    gen = assemble_robin(sc.coeff, *sc.robin_K, sc.solver.cells);
    u = sample_robin(gen, f);
  } else {
    throw SchemaError("diffuse command needs a diffusion mode");
  }

  const double dt = sc.solver.dt;
  const long long steps = step_count(sc.solver.t_final, dt);
  DiffusionStepper stepper(gen, dt, sc.solver.scheme);
  const Vector u0 = u;

  series.columns = {"t", "mass", "min"};
  double mass0 = gen.mass_w.dot(u), min_all = u.minCoeff();
  series.rows.push_back({0.0, mass0, min_all});
  for (long long k = 1; k <= steps; ++k) {
    u = stepper.step(u);
    const double mass = gen.mass_w.dot(u);
    const double mn = u.minCoeff();
    min_all = std::min(min_all, mn);
    series.rows.push_back({k * dt, mass, mn});
  }

  DiffusionResiduals res = sc.mode == "diffusion-standard"
                               ? residuals_standard(gen, sc.g, sc.coeff, u)
                               : residuals_robin(gen, sc.coeff, *sc.robin_K, u);

  njson out;
  out["unknowns"] = gen.dim;
  out["cells"] = sc.solver.cells;
  out["dt"] = dt;
  out["steps"] = steps;
  out["scheme"] = sc.solver.scheme == Scheme::BackwardEuler ? "be" : "tr";
  const double mass_final = gen.mass_w.dot(u);
  out["mass_initial"] = mass0;
  out["mass_final"] = mass_final;
  out["mass_drift_rel"] =
      std::abs(mass_final - mass0) / std::max(std::abs(mass0), 1e-300);
  out["min_value"] = min_all;
  if (sc.mode == "diffusion-standard") out["vertex_flux_defect"] = res.vertex_flux_defect;
  else out["robin_defect"] = res.robin_defect;
  try {
    // the rate needs a dense eigensolve; skip it on grids too large for that
    const bool with_rate = gen.dim <= 1500;
    EquilibriumProjection pi = equilibrium(gen, with_rate);
    out["equilibrium_gap"] =
        (u - pi.apply(u0)).lpNorm<Eigen::Infinity>();
    if (pi.rate) out["rate"] = *pi.rate;
  } catch (const NumericalError&) {
    // no one-dimensional kernel: equilibrium projection not defined
  }
  return out;
}

// ---------------------------------------------------------------------------
// analyze: edge classes, components, extinction time, periods

inline njson cmd_analyze(const Scenario& sc) {
  const int m = sc.g.m();
  StructureReport rep = analyze_structure(sc.g);
  TravelTimeMap map = travel_time(sc.coeff);
  TransportSystem sys = make_transport_raw(map.lengths(), Matrix::Zero(m, m));
  AsymptoticsReport asym = classify_long_term(sc.g, sys);

  njson out;
  out["vertices"] = sc.g.n;
  out["edges"] = m;
  out["sinks"] = rep.sinks;
  out["sources"] = rep.sources;
  out["single_directed_cycle"] = rep.is_single_directed_cycle;
  out["cycles"] = rep.cycles.size();

  njson edges = njson::array();
  for (int j = 0; j < m; ++j) {
    njson e;
    e["tail"] = sc.g.edges[j].v1 + 1;
    e["head"] = sc.g.edges[j].v0 + 1;
    e["travel_time"] = sys.lengths[j];
    e["component"] = rep.edge_component[j];
    switch (rep.edge_class[j]) {
      case EdgeClass::Acyclic: e["class"] = "acyclic"; break;
      case EdgeClass::Transient: e["class"] = "transient"; break;
      case EdgeClass::Terminal: e["class"] = "terminal"; break;
    }
    edges.push_back(std::move(e));
  }
  out["edge_detail"] = edges;

  njson comps = njson::array();
  for (const auto& ca : asym.components) {
    njson c;
    c["edges"] = rep.strong_components[ca.component];
    c["terminal"] = ca.terminal;
    c["cyclic"] = ca.cyclic;
    c["single_cycle"] = ca.single_cycle;
    if (ca.period) c["period"] = rational_json(*ca.period);
    comps.push_back(std::move(c));
  }
  out["components"] = comps;

  out["t_star"] = asym.t_star;
  out["ldq"] = asym.ldq_holds;
  out["denominator_lcm"] = asym.d;
  if (asym.global_period) out["global_period"] = rational_json(*asym.global_period);

  Matrix B = sc.mutation_K ? Matrix(*sc.mutation_K + *sc.mutation_Q)
                           : line_matrices(sc.g).B_w;
  if (is_nonnegative(B) && is_irreducible(B)) {
    PerronPair pp = perron_pair(B);
    njson perron;
    perron["rho"] = pp.rho;
    perron["imprimitivity"] = imprimitivity_index(B);
    perron["right"] = to_std(pp.right);
    out["perron"] = perron;
  }
  return out;
}

// ---------------------------------------------------------------------------
// aggregate: singular-perturbation studies against their limit dynamics

inline njson cmd_aggregate(const Scenario& sc, Series& series) {
  const std::string mode = sc.aggregate_mode;
  if (mode != "flow" && mode != "diffusion")
    throw SchemaError("aggregate needs --mode flow or --mode diffusion");
  auto f = initial_function(sc.initial, sc.g.m());
  const double T = sc.solver.t_final;
  const double t_min = sc.solver.t_min;

  njson out;
  out["aggregate"] = mode;
  ConvergenceStudy study;

  if (mode == "flow") {
    if (!sc.mutation_K) throw SchemaError("aggregate flow needs a mutation model");
    const Matrix& K = *sc.mutation_K;
    const Matrix& Q = *sc.mutation_Q;
    FlowProjections pr = flow_projections(K, Q);
    std::vector<double> eps = sc.eps.empty() ? std::vector<double>{0.1, 0.05, 0.025}
                                             : sc.eps;
    study = flow_convergence_study(sc.g, K, Q, f, eps, T, t_min, sc.solver.cells);

    Vector x0 = edge_integrals(f, sc.g.m());
    OdeTrajectory traj = aggregated_flow_ode(K, Q, x0, T, sc.solver.dt);
    double dev = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k)
      dev = std::max(dev, (traj.states[k] - closed_form_flow(pr, x0, traj.times[k]))
                              .lpNorm<Eigen::Infinity>());
    out["growth"] = pr.growth;
    out["limit_profile"] = to_std(pr.e_r);
    out["rk4_closed_form_dev"] = dev;
  } else {
    if (!sc.synaptic) throw SchemaError("aggregate diffusion needs a synaptic model");
    const Matrix& robin_K = sc.synaptic->robin_K;
    const Matrix& K_minus = sc.synaptic->K_minus;
    std::vector<double> eps = sc.eps.empty() ? std::vector<double>{0.2, 0.1, 0.05}
                                             : sc.eps;
    study = diffusion_convergence_study(robin_K, K_minus, f, eps, T, t_min,
                                        sc.solver.cells, sc.solver.dt,
                                        sc.solver.scheme);

    DiffusionLimit lim = diffusion_limit(K_minus);
    out["kernel_left"] = to_std(lim.e);
    Vector x0 = edge_integrals(f, sc.g.m());
    OdeTrajectory traj = aggregated_diffusion_ode(K_minus, x0, T, sc.solver.dt);
    double drift = 0.0;
    const double pairing0 = lim.e.dot(x0);
    for (const Vector& u : traj.states)
      drift = std::max(drift, std::abs(lim.e.dot(u) - pairing0));
    out["pairing_drift"] = drift;
  }

  out["t_min"] = study.t_min;
  out["eps"] = study.eps;
  out["e1"] = study.e1;
  out["e2"] = study.e2;
  bool decreasing = true;
  for (std::size_t i = 1; i < study.e2.size(); ++i)
    if (!(study.e2[i] <= study.e2[i - 1])) decreasing = false;
  out["e2_nonincreasing"] = decreasing;

  series.columns = {"eps", "e1", "e2"};
  for (std::size_t i = 0; i < study.eps.size(); ++i)
    series.rows.push_back({study.eps[i], study.e1[i], study.e2[i]});
  return out;
}

// ---------------------------------------------------------------------------
// report: one-stop summary

inline njson cmd_report(const Scenario& sc, bool echo_config) {
  njson out;
  njson graph;
  graph["vertices"] = sc.g.n;
  njson edges = njson::array();
  for (const Edge& e : sc.g.edges) {
    njson je;
    je["tail"] = e.v1 + 1;
    je["head"] = e.v0 + 1;
    edges.push_back(std::move(je));
  }
  graph["edges"] = edges;
  out["graph"] = graph;
  out["check"] = cmd_check(sc);
  out["structure"] = cmd_analyze(sc);
  if (echo_config) out["config"] = sc.raw;
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch

struct Invocation {
  std::string command;
  std::string scenario_path;
  Overrides o;
};

inline njson summary_head(const Invocation& inv, const Scenario& sc,
                          const std::string& bytes) {
  njson j;
  j["tool"] = "netgraph";
  j["version"] = kVersion;
  j["command"] = inv.command;
  j["scenario"] = inv.scenario_path;
  j["scenario_hash"] = fnv1a_hex(bytes);
  j["name"] = sc.name;
  j["mode"] = sc.mode;
  j["seed"] = inv.o.seed;
  return j;
}

inline int run_command(const Invocation& inv) {
  const std::string bytes = read_file(inv.scenario_path);
  Scenario sc = parse_scenario(parse_json_text(bytes));
  apply_overrides(sc, inv.o);

  njson summary = summary_head(inv, sc, bytes);
  Series series;
  if (inv.command == "check") {
    summary["check"] = cmd_check(sc);
  } else if (inv.command == "transport") {
    summary["transport"] = cmd_transport(sc, series);
  } else if (inv.command == "diffuse") {
    summary["diffuse"] = cmd_diffuse(sc, series);
  } else if (inv.command == "analyze") {
    summary["analyze"] = cmd_analyze(sc);
  } else if (inv.command == "aggregate") {
    summary["aggregate"] = cmd_aggregate(sc, series);
  } else if (inv.command == "report") {
    summary["report"] = cmd_report(sc, inv.o.echo_config);
  }

  const std::string text = summary.dump(2) + "\n";
  if (!inv.o.out.empty()) {
    write_text(inv.o.out, text);
    if (!series.empty()) write_text(csv_path_for(inv.o.out), series.csv());
  } else {
    std::cout << text;
  }
  return 0;
}

inline int run_cli(int argc, const char* const* argv) {
  if (const char* env = std::getenv("NETGRAPH_THREADS")) {
    const int k = std::atoi(env);
    if (k >= 1) Eigen::setNbThreads(k);
  }

  CLI::App app{"transport and diffusion dynamics on metric graphs"};
  // long-only help: subcommands take --h as the cell width, so the usual -h
  // short alias would collide (subcommands inherit this flag's spelling)
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);
  Invocation inv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", inv.scenario_path, "scenario JSON file")
        ->required();
    sub->add_option("--out", inv.o.out,
                    "write the JSON summary here (time series go to a .csv sidecar)");
    sub->add_option("--t-final", inv.o.t_final, "override solver.t_final");
    sub->add_option("--h", inv.o.h, "override transport cell width target");
    sub->add_option("--dt", inv.o.dt, "override time step");
    sub->add_option("--t-min", inv.o.t_min, "override study window start");
    sub->add_option("--cells", inv.o.cells, "override cells per edge");
    sub->add_option("--scheme", inv.o.scheme, "time scheme: be or tr");
    sub->add_option("--eps", inv.o.eps, "comma-separated scale-separation values")
        ->delimiter(',');
    sub->add_option("--seed", inv.o.seed, "seed for randomized initial data");
    sub->add_flag("--strict", inv.o.strict_on,
                  "refuse incommensurable travel times");
    sub->add_flag("--no-strict", inv.o.strict_off,
                  "round edges to whole cell counts instead of refusing");
    return sub;
  };

  add_common(app.add_subcommand("check", "well-posedness of the chosen dynamics"));
  add_common(app.add_subcommand("transport", "run the first-order evolution"));
  add_common(app.add_subcommand("diffuse", "run the second-order evolution"));
  add_common(app.add_subcommand("analyze", "graph structure and long-term class"));
  CLI::App* agg =
      add_common(app.add_subcommand("aggregate", "scale-separation study"));
  agg->add_option("--mode", inv.o.aggregate_mode, "flow or diffusion")
      ->check(CLI::IsMember({"flow", "diffusion"}));
  CLI::App* rep = add_common(app.add_subcommand("report", "full scenario summary"));
  rep->add_flag("--echo-config", inv.o.echo_config,
                "embed the parsed scenario back into the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  inv.command = app.get_subcommands().front()->get_name();

  try {
    return run_command(inv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("netgraph");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace netgraph::cli
