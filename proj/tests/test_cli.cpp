#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbo/errors.hpp"
#include "cbo/run_config.hpp"

using namespace cbo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cbo_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

json small_config(const std::string& problem, int iterations, const fs::path& out) {
  return json{{"problem", problem},
              {"iterations", iterations},
              {"seed", 4},
              {"mcmc", {{"ensemble", 3}, {"burnin", 4}, {"initial_burnin", 10}}},
              {"entropy", {{"discretization", 15}, {"samples", 100}, {"fantasies", 3}}},
              {"output_dir", out.string()}};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + CBO_BENCH_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Numeric columns of a surface file, header stripped.
std::vector<std::array<double, 3>> read_surface(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "x1,x2,value");
  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    std::array<double, 3> r{};
    char comma = 0;
    std::istringstream ss(line);
    ss >> r[0] >> comma >> r[1] >> comma >> r[2];
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config parsing") {
    const RunConfig c = parse_run_config(json{{"problem", "toy-1d"}, {"mode", "coupled"}, {"seed", 7}});
    CHECK(c.problem == "toy-1d");
    CHECK(c.mode == Mode::coupled);
    CHECK(c.seed == 7);
    CHECK(c.iterations == 50);
    CHECK_THROWS_AS(parse_run_config(json{{"iteratons", 5}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json{{"iterations", "five"}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json{{"mode", "sequential"}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json{{"mcmc", {{"ensemble", 0}}}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json{{"constraints", {{{"id", "disk"}, {"delta", 1.5}}}}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json{{"constraints", {{{"id", "disk"}, {"cost", -1.0}}}}}), InputError);
    CHECK_THROWS_AS(parse_run_config(json::array()), InputError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/cbo.json"), InputError);
  }

  TEST_CASE("overrides reach the benchmark") {
    RunConfig c = parse_run_config(
        json{{"problem", "branin-disk"}, {"objective_cost", 4.0}, {"constraints", {{{"id", "disk"}, {"delta", 0.2}}}}});
    const BenchmarkProblem bp = configured_benchmark(c);
    CHECK(bp.problem.objective_cost == 4.0);
    CHECK(bp.problem.constraints[0].spec.delta == 0.2);
    CHECK(resolved_n_init(c, bp) == 5);
    c.constraints[0].id = "ring";
    CHECK_THROWS_AS(configured_benchmark(c), InputError);
  }

  TEST_CASE("an out-of-range delta exits with status 2") {
    const fs::path dir = scratch("delta");
    json cfg = small_config("branin-disk", 1, dir / "out");
    cfg["constraints"] = json::array({{{"id", "disk"}, {"delta", 1.5}}});
    CHECK_THROWS_AS(parse_run_config(cfg), InputError);
    RunConfig direct;
    direct.constraints.push_back({"disk", 1.5, std::nullopt});
    direct.output_dir = dir / "direct";
    CHECK(run(direct) == 2);
    std::ofstream(dir / "cfg.json") << cfg.dump();
    CHECK(run_binary("--config " + (dir / "cfg.json").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "out" / "trace.jsonl"));
  }

  TEST_CASE("binary argument handling") {
    CHECK(run_binary("--list") == 0);
    CHECK(run_binary("--mode sideways") == 2);
    CHECK(run_binary("--iterations many") == 2);
    CHECK(run_binary("--problem nope --output " + (scratch("nope") / "o").string()) == 2);
  }

  TEST_CASE("a fifty iteration run writes fifty trace lines and replays exactly") {
    const fs::path dir = scratch("replay");
    json cfg = small_config("toy-1d", 50, dir / "a");
  cfg["mode"] = "coupled";
  const RunConfig a = parse_run_config(cfg);
    RunConfig b = a;
    b.output_dir = dir / "b";
    REQUIRE(run(a) == 0);
    REQUIRE(run(b) == 0);
    const auto trace = lines(dir / "a" / "trace.jsonl");
    CHECK(trace.size() == 50);
    CHECK(slurp(dir / "a" / "trace.jsonl") == slurp(dir / "b" / "trace.jsonl"));
    CHECK(lines(dir / "a" / "timing.jsonl").size() == 50);
    CHECK(lines(dir / "a" / "initial_design.jsonl").size() == 3);
    for (size_t i = 0; i < trace.size(); ++i) {
      const json r = json::parse(trace[i]);
      CHECK(r.at("iter") == i + 1);
      CHECK_FALSE(r.contains("wall_ms"));
      CHECK(r.at("task") == "joint");
      CHECK(r.at("observation").contains("objective"));
      CHECK(r.at("observation").at("constraints").contains("g"));
    }
    const json rec = json::parse(slurp(dir / "a" / "recommendation.json"));
    CHECK(rec.at("constraint_probabilities").contains("g"));
    CHECK(rec.contains("true_objective"));
  }

  TEST_CASE("the effective config round-trips") {
    const fs::path dir = scratch("roundtrip");
    const RunConfig c = parse_run_config(small_config("synthetic-decoupled", 2, dir / "out"));
    REQUIRE(run(c) == 0);
    const json eff = json::parse(slurp(dir / "out" / "effective_config.json"));
    const RunConfig again = parse_run_config(eff);
    CHECK(again.problem == c.problem);
    CHECK(again.iterations == c.iterations);
    CHECK(again.seed == c.seed);
    CHECK(again.mcmc.ensemble == 3);
    CHECK(again.entropy.samples == 100);
    CHECK(again.n_init == 5);
    REQUIRE(again.constraints.size() == 1);
    CHECK(again.constraints[0].id == "disk");
    CHECK(effective_config_json(again, configured_benchmark(again)) == eff);
  }

  TEST_CASE("cost budget stops the run early") {
    const fs::path dir = scratch("budget");
    json cfg = small_config("toy-1d", 20, dir / "out");
    cfg["mode"] = "coupled";
    cfg["cost_budget"] = 6.0;
    REQUIRE(run(parse_run_config(cfg)) == 0);
    // Three initial points cost 2 each in coupled mode.
    CHECK(lines(dir / "out" / "trace.jsonl").empty());
    cfg["cost_budget"] = 10.0;
    REQUIRE(run(parse_run_config(cfg)) == 0);
    CHECK(lines(dir / "out" / "trace.jsonl").size() == 2);
  }

  TEST_CASE("surfaces cover the grid and stay consistent") {
    const fs::path dir = scratch("surfaces");
    json cfg = small_config("branin-disk", 1, dir / "out");
    cfg["emit_surfaces"] = 50;
    REQUIRE(run(parse_run_config(cfg)) == 0);
    const fs::path s = dir / "out" / "surfaces";
    for (const char* f : {"objective_mean.csv", "objective_variance.csv", "probability_disk.csv",
                          "indicator_disk.csv", "acquisition.csv"})
      CHECK(lines(s / f).size() == 2501);
    const auto prob = read_surface(s / "probability_disk.csv");
    const auto ind = read_surface(s / "indicator_disk.csv");
    const auto var = read_surface(s / "objective_variance.csv");
    REQUIRE(prob.size() == 2500);
    REQUIRE(ind.size() == 2500);
    int feasible = 0;
    for (size_t i = 0; i < prob.size(); ++i) {
      CHECK(prob[i][2] >= 0.0);
      CHECK(prob[i][2] <= 1.0);
      CHECK(ind[i][2] == (prob[i][2] >= 1.0 - 0.01 ? 1.0 : 0.0));
      CHECK(var[i][2] >= 0.0);
      feasible += static_cast<int>(ind[i][2]);
    }
    CHECK(prob.front()[0] == -5.0);
    CHECK(prob.front()[1] == 0.0);
    CHECK(prob.back()[0] == 10.0);
    CHECK(prob.back()[1] == 15.0);
    CHECK(feasible < 2500);
    const json summary = json::parse(slurp(s / "pmin_summary.json"));
    CHECK(summary.at("infeasible_mass").get<double>() >= 0.0);
    CHECK(lines(s / "pmin.csv").size() == static_cast<size_t>(summary.at("points").get<int>()) + 1);
  }

  TEST_CASE("surfaces need a two dimensional problem") {
    const fs::path dir = scratch("surfaces1d");
    json cfg = small_config("toy-1d", 1, dir / "out");
    cfg["emit_surfaces"] = 10;
    CHECK(run(parse_run_config(cfg)) == 2);
    CHECK_THROWS_AS(parse_run_config(json{{"emit_surfaces", 1}}), InputError);
  }
}
