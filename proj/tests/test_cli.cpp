#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "netgraph/cli.hpp"

using namespace netgraph;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  fs::path d = fs::temp_directory_path() / "netgraph_cli_tests";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path spit(const std::string& name, const std::string& text) {
  fs::path p = work_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << text;
  return p;
}

int run(std::vector<std::string> args) { return cli::run_cli(args); }

const char* kRing = R"({
  "name": "ring",
  "mode": "transport",
  "graph": {"vertices": 3, "edges": [
    {"tail": 1, "head": 2}, {"tail": 2, "head": 3}, {"tail": 3, "head": 1}]},
  "coefficients": {"kind": "constant", "value": 1.0},
  "initial": {"kind": "cosine", "base": 1.0, "amplitude": 0.5, "mode": 2},
  "solver": {"t_final": 3.0, "h": 0.01}
})";

njson run_to_json(std::vector<std::string> args, const std::string& out_name) {
  fs::path out = work_dir() / out_name;
  args.push_back("--out");
  args.push_back(out.string());
  REQUIRE(run(args) == 0);
  return njson::parse(slurp(out));
}

}  // namespace

TEST_CASE("check summarizes transport well-posedness") {
  fs::path sc = spit("ring.json", kRing);
  njson j = run_to_json({"check", sc.string()}, "ring_check.json");
  CHECK(j["tool"] == "netgraph");
  CHECK(j["name"] == "ring");
  CHECK(j["mode"] == "transport");
  CHECK(j["scenario_hash"].get<std::string>().size() == 16);
  CHECK(j["check"]["semigroup"] == true);
  CHECK(j["check"]["group"] == true);
  CHECK(j["check"]["single_directed_cycle"] == true);
}

TEST_CASE("transport run emits a conservative series") {
  fs::path sc = spit("ring.json", kRing);
  fs::path out = work_dir() / "ring_transport.json";
  REQUIRE(run({"transport", sc.string(), "--out", out.string()}) == 0);
  njson j = njson::parse(slurp(out));
  CHECK(j["transport"]["h"].get<double>() == Catch::Approx(0.01));
  CHECK(j["transport"]["steps"] == 300);
  CHECK(j["transport"]["mass_drift_rel"].get<double>() < 1e-12);
  CHECK(j["transport"]["kirchhoff_max"].get<double>() < 1e-12);
  CHECK(j["transport"]["min_value"].get<double>() >= 0.0);

  const std::string csv = slurp(work_dir() / "ring_transport.csv");
  CHECK(csv.rfind("t,mass,min,kirchhoff,mass_edge1,mass_edge2,mass_edge3", 0) == 0);
  const long rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == 302);  // header + 301 states
}

TEST_CASE("reruns produce byte-identical artifacts") {
  fs::path sc = spit("ring.json", kRing);
  fs::path o1 = work_dir() / "rerun1.json";
  fs::path o2 = work_dir() / "rerun2.json";
  REQUIRE(run({"transport", sc.string(), "--t-final", "1", "--out", o1.string()}) == 0);
  REQUIRE(run({"transport", sc.string(), "--t-final", "1", "--out", o2.string()}) == 0);
  CHECK(slurp(o1) != "");
  // the summary embeds only the scenario path, identical between runs
  CHECK(slurp(o1) == slurp(o2));
  CHECK(slurp(work_dir() / "rerun1.csv") == slurp(work_dir() / "rerun2.csv"));
}

TEST_CASE("flag overrides reach the solver") {
  fs::path sc = spit("ring.json", kRing);
  njson j = run_to_json({"transport", sc.string(), "--h", "0.05"}, "ring_h.json");
  CHECK(j["transport"]["h"].get<double>() == Catch::Approx(0.05));
  CHECK(j["transport"]["steps"] == 60);
}

TEST_CASE("malformed input exits 2") {
  fs::path bad = spit("bad.json", "{ \"name\": \"x\", ");
  CHECK(run({"check", bad.string()}) == 2);

  fs::path missing = work_dir() / "does_not_exist.json";
  CHECK(run({"check", missing.string()}) == 2);

  fs::path schema = spit("schema.json", R"({"graph": {"vertices": 2}})");
  CHECK(run({"check", schema.string()}) == 2);

  // valid file, but the horizon does not sit on the time grid
  fs::path sc = spit("ring.json", kRing);
  CHECK(run({"transport", sc.string(), "--t-final", "0.005"}) == 2);
}

TEST_CASE("cli parse errors are not scenario errors") {
  CHECK(run({}) != 0);
  CHECK(run({"transmogrify"}) != 0);
}

TEST_CASE("aggregate flow reports a decreasing scale study") {
  const char* text = R"({
    "name": "flow-study",
    "graph": {"vertices": 4, "edges": [
      {"tail": 1, "head": 2}, {"tail": 2, "head": 3}, {"tail": 3, "head": 1},
      {"tail": 3, "head": 4}, {"tail": 4, "head": 1}]},
    "model": {"type": "mutation",
      "K": [[0,0,1,0,1],[1,0,0,0,0],[0,0.5,0,0,0],[0,0.5,0,0,0],[0,0,0,1,0]],
      "Q": [[0,0,0.3,0,0.15],[0,0,0,0,0],[0,0,0,0,0],[0,0,0,0,0],[0,0,0,0,0]]},
    "initial": {"kind": "per-edge", "values": [1.0, 0.5, 0.75, 0.25, 0.6]},
    "solver": {"t_final": 2.0, "dt": 0.001, "cells": 32, "t_min": 0.25},
    "eps": [0.1, 0.05]
  })";
  fs::path sc = spit("flow_study.json", text);
  njson j = run_to_json({"aggregate", sc.string(), "--mode", "flow"}, "flow_study_out.json");
  const njson& a = j["aggregate"];
  CHECK(a["growth"].get<double>() == Catch::Approx(0.45 / 7.0).epsilon(1e-9));
  CHECK(a["rk4_closed_form_dev"].get<double>() < 1e-8);
  auto e2 = a["e2"].get<std::vector<double>>();
  REQUIRE(e2.size() == 2);
  CHECK(e2[1] < e2[0]);

  const std::string csv = slurp(work_dir() / "flow_study_out.csv");
  CHECK(csv.rfind("eps,e1,e2", 0) == 0);
}

TEST_CASE("aggregate diffusion runs the preset model") {
  const char* text = R"({
    "name": "pools",
    "model": {"type": "preset", "name": "three-pool"},
    "initial": {"kind": "cosine", "base": 1.0, "amplitude": 0.4, "mode": 1},
    "solver": {"t_final": 2.0, "dt": 0.001, "cells": 16, "scheme": "tr", "t_min": 0.5},
    "eps": [0.2, 0.1]
  })";
  fs::path sc = spit("pools.json", text);
  njson j = run_to_json({"aggregate", sc.string()}, "pools_agg.json");
  const njson& a = j["aggregate"];
  CHECK(a["aggregate"] == "diffusion");
  CHECK(a["pairing_drift"].get<double>() < 1e-10);
  CHECK(a["e2_nonincreasing"] == true);
  auto e = a["kernel_left"].get<std::vector<double>>();
  REQUIRE(e.size() == 3);
  CHECK(e[0] == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("aggregate diffusion without a conservation law exits 3") {
  // leaky rates: K_minus is invertible, so no one-dimensional kernel exists
  const char* text = R"({
    "name": "leaky",
    "mode": "diffusion-robin",
    "graph": {"vertices": 3, "edges": [
      {"tail": 1, "head": 2}, {"tail": 2, "head": 3}]},
    "model": {"type": "synaptic", "rates": {
      "l": [0.0, 1.5], "r": [1.0, 0.0],
      "l_pair": [[0, 0], [1.0, 0]], "r_pair": [[0, 1.0], [0, 0]]}},
    "solver": {"t_final": 1.0, "dt": 0.001, "cells": 8},
    "eps": [0.2]
  })";
  fs::path sc = spit("leaky.json", text);
  CHECK(run({"aggregate", sc.string(), "--mode", "diffusion"}) == 3);
}

TEST_CASE("diffuse conserves mass for balanced robin exchange") {
  const char* text = R"({
    "name": "pools",
    "model": {"type": "preset", "name": "three-pool"},
    "initial": {"kind": "cosine", "base": 1.0, "amplitude": 0.4, "mode": 1},
    "solver": {"t_final": 0.5, "dt": 0.001, "cells": 16, "scheme": "tr"}
  })";
  fs::path sc = spit("pools_diffuse.json", text);
  njson j = run_to_json({"diffuse", sc.string()}, "pools_diffuse_out.json");
  CHECK(j["mode"] == "diffusion-robin");
  CHECK(j["diffuse"]["mass_drift_rel"].get<double>() < 1e-10);
  CHECK(j["diffuse"]["robin_defect"].get<double>() < 1.0);
}

TEST_CASE("report echoes the configuration back verbatim") {
  fs::path sc = spit("ring.json", kRing);
  njson j = run_to_json({"report", sc.string(), "--echo-config"}, "ring_report.json");
  REQUIRE(j["report"].contains("config"));
  CHECK(j["report"]["config"] == njson::parse(kRing));
  CHECK(j["report"]["check"]["group"] == true);
  CHECK(j["report"]["structure"]["single_directed_cycle"] == true);

  // the echoed object parses back into the same scenario
  Scenario round = parse_scenario(j["report"]["config"]);
  CHECK(round.name == "ring");
  CHECK(round.mode == "transport");
  CHECK(round.solver.t_final == Catch::Approx(3.0));
}

TEST_CASE("analyze reports structure on an open graph") {
  const char* text = R"({
    "name": "tail-cycle",
    "mode": "transport",
    "graph": {"vertices": 4, "edges": [
      {"tail": 1, "head": 2}, {"tail": 2, "head": 3},
      {"tail": 3, "head": 4}, {"tail": 4, "head": 2}]},
    "coefficients": {"kind": "constant", "value": 1.0},
    "initial": {"kind": "per-edge", "values": [1.0, 0.0, 0.0, 0.0]}
  })";
  fs::path sc = spit("tail_cycle.json", text);
  njson j = run_to_json({"analyze", sc.string()}, "tail_cycle_analyze.json");
  const njson& a = j["analyze"];
  CHECK(a["t_star"].get<double>() == Catch::Approx(1.0));
  CHECK(a["ldq"] == true);
  CHECK(a["global_period"]["text"] == "3/1");
  CHECK(a["edge_detail"][0]["class"] == "acyclic");
  CHECK(a["edge_detail"][1]["class"] == "terminal");
}

TEST_CASE("shipped scenarios run their documented commands") {
  const fs::path dir = NETGRAPH_SCENARIO_DIR;
  auto path = [&](const char* f) { return (dir / f).string(); };
  auto out = [&](const char* f) { return (work_dir() / f).string(); };

  CHECK(run({"transport", path("c3.json"), "--out", out("ship_c3.json")}) == 0);
  CHECK(run({"analyze", path("lollipop.json"), "--out", out("ship_lolli.json")}) == 0);
  CHECK(run({"transport", path("lollipop.json"), "--out", out("ship_lolli_t.json")}) == 0);
  CHECK(run({"aggregate", path("mutation_reference.json"),
             "--out", out("ship_mut.json")}) == 0);
  CHECK(run({"aggregate", path("synaptic_three_pool.json"),
             "--out", out("ship_syn.json")}) == 0);
  CHECK(run({"diffuse", path("star3.json"), "--out", out("ship_star.json")}) == 0);
  CHECK(run({"check", path("star3.json"), "--out", out("ship_star_chk.json")}) == 0);
  CHECK(run({"report", path("mutation_reference.json"),
             "--out", out("ship_mut_rep.json")}) == 0);

  njson star = njson::parse(slurp(out("ship_star_chk.json")));
  CHECK(star["check"]["generates"] == true);
  njson mut = njson::parse(slurp(out("ship_mut.json")));
  auto e2 = mut["aggregate"]["e2"].get<std::vector<double>>();
  REQUIRE(e2.size() == 3);
  CHECK(e2[1] < e2[0]);
  CHECK(e2[2] < e2[1]);
}
