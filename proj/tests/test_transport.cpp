#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <set>

#include "netgraph/transport.hpp"

using namespace netgraph;

namespace {

MetricGraph c3() { return build_graph_uniform(3, {{1, 0}, {2, 1}, {0, 2}}); }

// Characteristics traced backward through the boundary matrix. Independent of
// the solver: pure recursion on trace times.
double oracle_value(const TransportSystem& sys,
                    const std::function<double(int, double)>& u0, int j,
                    double s, double t) {
  const double y = sys.map.phi(j, s);
  if (y + t <= sys.lengths[j])
    return u0(j, sys.map.inverse(j, y + t));
  const double tp = t - (sys.lengths[j] - y);
  double val = 0.0;
  for (int k = 0; k < sys.m(); ++k)
    if (sys.B_c(j, k) != 0.0)
      val += sys.B_c(j, k) * oracle_value(sys, u0, k, 0.0, tp);
  return val;
}

std::optional<MetricGraph> random_sink_free(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> used;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      std::pair<int, int> key = std::minmax(a, b);
      if (used.count(key)) continue;
      if (coin(rng) < 0.5) {
        used.insert(key);
        bool fwd = coin(rng) < 0.5;
        edges.push_back(fwd ? Edge{b, a} : Edge{a, b});
      }
    }
  if (edges.empty()) return std::nullopt;
  try {
    MetricGraph g = build_graph_uniform(n, edges);
    if (has_sink(g)) return std::nullopt;
    return g;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

}  // namespace

TEST_CASE("solver reproduces characteristics exactly", "[transport]") {
  MetricGraph g = c3();
  CoefficientField c = CoefficientField::per_edge({1.0, 2.0, 0.5});
  TransportSystem sys = make_transport(g, c);
  REQUIRE(sys.lengths[0] == Catch::Approx(1.0));
  REQUIRE(sys.lengths[1] == Catch::Approx(0.5));
  REQUIRE(sys.lengths[2] == Catch::Approx(2.0));

  auto u0 = [](int j, double s) { return std::sin(3.0 * s + j) + 2.0; };
  TransportState st = init_state(sys, u0, 0.25);
  REQUIRE(st.h == Catch::Approx(0.25));

  evolve(sys, st, 1.75);
  for (int j = 0; j < 3; ++j) {
    const int N = st.size(j);
    const double ybar = sys.lengths[j] / N;
    for (int i = 0; i < N; ++i) {
      double s_mid = sys.map.inverse(j, (i + 0.5) * ybar);
      double expect = oracle_value(sys, u0, j, s_mid, 1.75);
      CHECK(st.value(j, i) == Catch::Approx(expect).margin(1e-13));
    }
  }
}

TEST_CASE("variable speed uses the travel-time map consistently", "[transport]") {
  MetricGraph g = c3();
  // edge 0: 1/c piecewise linear through [1,2,1,2,1] so its travel time is 1.5
  std::vector<double> cs{1.0, 0.5, 1.0, 0.5, 1.0};
  CoefficientField c = CoefficientField::tabulated(
      {cs, std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 1.0}});
  TransportSystem sys = make_transport(g, c);
  REQUIRE(sys.lengths[0] == Catch::Approx(1.5));
  REQUIRE(sys.lengths[1] == Catch::Approx(1.0));

  // map inverse really inverts
  for (double s : {0.1, 0.37, 0.5, 0.93})
    CHECK(sys.map.inverse(0, sys.map.phi(0, s)) == Catch::Approx(s).margin(1e-10));

  auto u0 = [](int j, double s) { return std::cos(2.0 * s) + 1.5 * (j == 0); };
  TransportState st = init_state(sys, u0, 0.5);
  REQUIRE(st.h == Catch::Approx(0.5));
  evolve(sys, st, 2.5);
  for (int j = 0; j < 3; ++j) {
    const int N = st.size(j);
    const double ybar = sys.lengths[j] / N;
    for (int i = 0; i < N; ++i) {
      double s_mid = sys.map.inverse(j, (i + 0.5) * ybar);
      CHECK(st.value(j, i) ==
            Catch::Approx(oracle_value(sys, u0, j, s_mid, 2.5)).margin(1e-12));
    }
  }
}

TEST_CASE("single cycle returns to the initial state bitwise", "[transport]") {
  MetricGraph g = c3();
  TransportSystem sys = make_transport(g, CoefficientField::constant(3, 1.0));
  auto u0 = [](int j, double s) { return 1.0 + j + std::exp(-s); };
  TransportState st = init_state(sys, u0, 0.25);
  TransportState st0 = st;

  evolve(sys, st, 1.0);
  bool same_at_1 = true;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < st.size(j); ++i)
      same_at_1 = same_at_1 && st.value(j, i) == st0.value(j, i);
  CHECK_FALSE(same_at_1);

  evolve(sys, st, 3.0);  // total cycle travel time
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < st.size(j); ++i)
      CHECK(st.value(j, i) == st0.value(j, i));  // exact equality
}

TEST_CASE("mass, positivity, and vertex flux balance", "[transport][property]") {
  std::mt19937 rng(4242u);
  const std::vector<double> speed_pool{1.0, 2.0, 0.5, 4.0 / 3.0};
  int tested = 0;
  while (tested < 25) {
    auto og = random_sink_free(rng, 3 + static_cast<int>(rng() % 3));
    if (!og) continue;
    const MetricGraph& g = *og;
    ++tested;
    std::vector<double> speeds(g.m());
    for (double& v : speeds) v = speed_pool[rng() % speed_pool.size()];
    TransportSystem sys = make_transport(g, CoefficientField::per_edge(speeds));

    auto u0 = [](int j, double s) { return 0.3 + s * s + 0.1 * j; };
    TransportState st = init_state(sys, u0, 0.2);
    TransportDiagnostics d0 = diagnostics(sys, st);
    evolve(sys, st, st.h * 37);
    TransportDiagnostics d1 = diagnostics(sys, st);

    CHECK(std::abs(d1.mass - d0.mass) < 1e-10 * std::max(1.0, std::abs(d0.mass)));
    CHECK(d1.min_value >= 0.0);
    CHECK(d1.kirchhoff_residual < 1e-12);
  }
}

TEST_CASE("backward solvability happens exactly on single cycles",
          "[transport][property]") {
  std::mt19937 rng(515151u);
  int tested = 0;
  while (tested < 30) {
    auto og = random_sink_free(rng, 3 + static_cast<int>(rng() % 3));
    if (!og) continue;
    ++tested;
    TransportBoundary tb =
        transport_boundary(*og, CoefficientField::constant(og->m(), 1.0));
    StructureReport rep = analyze_structure(*og);
    CHECK(tb.is_semigroup);
    CHECK(tb.is_group == rep.is_single_directed_cycle);
  }
}

TEST_CASE("sinks are rejected, sources pass", "[transport]") {
  MetricGraph path = build_graph_uniform(3, {{1, 0}, {2, 1}});  // 0->1->2
  CHECK_THROWS_AS(make_transport(path, CoefficientField::constant(2, 1.0)),
                  HasSinkOrSource);

  MetricGraph lolli = build_graph_uniform(4, {{1, 0}, {2, 1}, {3, 2}, {1, 3}});
  CHECK_NOTHROW(make_transport(lolli, CoefficientField::constant(4, 1.0)));
}

TEST_CASE("grid construction honors the common unit", "[transport]") {
  // travel times 1 and 1/3: target 0.25 refines the unit 1/3 to 1/6
  TransportSystem sys = make_transport_raw({1.0, 1.0 / 3.0},
                                           Matrix::Identity(2, 2));
  auto one = [](int, double) { return 1.0; };
  TransportState st = init_state(sys, one, 0.25);
  CHECK(st.h == Catch::Approx(1.0 / 6.0));
  CHECK(st.size(0) == 6);
  CHECK(st.size(1) == 2);
  CHECK(st.snap_error[0] < 1e-12);
  CHECK(st.snap_error[1] < 1e-12);
}

TEST_CASE("incommensurable travel times: strict throws, loose snaps",
          "[transport]") {
  TransportSystem sys =
      make_transport_raw({1.0, std::sqrt(2.0)}, Matrix::Identity(2, 2));
  auto one = [](int, double) { return 1.0; };
  CHECK_THROWS_AS(init_state(sys, one, 0.25, /*strict=*/true),
                  IncommensurableLengths);
  TransportState st = init_state(sys, one, 0.25, /*strict=*/false);
  CHECK(st.h == Catch::Approx(0.25));
  CHECK(st.snap_error[0] < 1e-12);
  CHECK(st.snap_error[1] > 1e-3);  // sqrt(2) rounded to 6 cells of 0.25
}

TEST_CASE("off-grid times are refused", "[transport]") {
  TransportSystem sys = make_transport_raw({1.0}, Matrix::Identity(1, 1));
  auto one = [](int, double) { return 1.0; };
  TransportState st = init_state(sys, one, 0.25);
  CHECK_THROWS_AS(evolve(sys, st, 0.3), NonGridTime);
  CHECK_THROWS_AS(evolve(sys, st, -0.25), NonGridTime);
  CHECK_NOTHROW(evolve(sys, st, 0.5));
}

TEST_CASE("acyclic edges drain by the extinction time", "[transport]") {
  // 0 -> 1 -> 2 feeding cycle 2 -> 3 -> 4 -> 2
  MetricGraph g =
      build_graph_uniform(5, {{1, 0}, {2, 1}, {3, 2}, {4, 3}, {2, 4}});
  TransportSystem sys = make_transport(g, CoefficientField::constant(5, 1.0));
  StructureReport rep = analyze_structure(g);
  REQUIRE(rep.edge_class[0] == EdgeClass::Acyclic);
  REQUIRE(rep.edge_class[1] == EdgeClass::Acyclic);

  double tstar = nilpotent_extinction(g, sys);
  CHECK(tstar == Catch::Approx(2.0));

  auto u0 = [&](int j, double) {
    return rep.edge_class[j] == EdgeClass::Acyclic ? 1.0 : 0.0;
  };
  TransportState st = init_state(sys, u0, 0.25);
  evolve(sys, st, tstar - st.h);
  double acyclic_mass_before = 0.0;
  for (int j = 0; j < g.m(); ++j)
    if (rep.edge_class[j] == EdgeClass::Acyclic)
      for (int i = 0; i < st.size(j); ++i) acyclic_mass_before += st.value(j, i);
  CHECK(acyclic_mass_before > 0.0);

  evolve(sys, st, tstar);
  for (int j = 0; j < g.m(); ++j)
    if (rep.edge_class[j] == EdgeClass::Acyclic)
      for (int i = 0; i < st.size(j); ++i) CHECK(st.value(j, i) == 0.0);
}

TEST_CASE("lollipop extinction is the feeder travel time", "[transport]") {
  MetricGraph g = build_graph_uniform(4, {{1, 0}, {2, 1}, {3, 2}, {1, 3}});
  TransportSystem sys = make_transport(g, CoefficientField::constant(4, 1.0));
  CHECK(nilpotent_extinction(g, sys) == Catch::Approx(1.0));
}
