#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbo/benchmarks.hpp"
#include "cbo/loop.hpp"

namespace cbo {

struct ConstraintOverride {
  std::string id;
  std::optional<double> delta;
  std::optional<double> cost;
};

/// Everything needed to reproduce one benchmark run.
struct RunConfig {
  std::string problem = "branin-disk";
  Mode mode = Mode::decoupled;
  int iterations = 50;
  /// 0 selects the default of 2 D + 1.
  int n_init = 0;
  std::uint64_t seed = 0;
  std::vector<ConstraintOverride> constraints;
  std::optional<double> objective_cost;
  McmcSettings mcmc;
  SelectionSettings entropy;
  /// Stop early once the summed task cost reaches this value.
  std::optional<double> cost_budget;
  std::filesystem::path output_dir = "cbo_run";
  /// Grid resolution of the surface files; 0 disables them.
  int emit_surfaces = 0;

  /// Throws InputError on out-of-range values.
  void validate() const;
};

/// Parses the structured config; unknown keys and bad types are InputErrors.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Effective configuration with every default resolved against `benchmark`.
nlohmann::json effective_config_json(const RunConfig& config, const BenchmarkProblem& benchmark);

/// Builds the benchmark named by the config and applies its overrides.
BenchmarkProblem configured_benchmark(const RunConfig& config);
OptimizerSettings optimizer_settings(const RunConfig& config);
int resolved_n_init(const RunConfig& config, const BenchmarkProblem& benchmark);

nlohmann::json evaluation_json(const Evaluation& evaluation, const Problem& problem);
/// One trace line; timing is kept out so traces are reproducible byte for byte.
nlohmann::json trace_record_json(const TraceRecord& record, const Problem& problem);
nlohmann::json recommendation_json(const Recommendation& rec, const Optimizer& optimizer,
                                   const BenchmarkProblem& benchmark);

/// Runs initialization plus the iteration budget and writes trace.jsonl,
/// timing.jsonl, initial_design.jsonl, recommendation.json and
/// effective_config.json into the output directory. Returns 0 on success,
/// 1 on evaluator failure and 2 on an invalid configuration.
int run(const RunConfig& config);

/// Writes gridded CSV surfaces ("x1,x2,value") for a 2D optimizer state.
/// Throws InputError for other dimensions or a resolution below 2.
std::vector<std::filesystem::path> emit_surfaces(const Optimizer& optimizer, int resolution,
                                                 const std::filesystem::path& out_dir);

}  // namespace cbo
