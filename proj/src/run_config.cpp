#include "cbo/run_config.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "cbo/errors.hpp"

namespace cbo {
namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& j, const char* key, const char* type_name) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config: '") + key + "' must be " + type_name);
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw InputError("config: unknown key '" + it.key() + "' in " + where);
}

Mode parse_mode(const std::string& s) {
  if (s == "coupled") return Mode::coupled;
  if (s == "decoupled") return Mode::decoupled;
  throw InputError("config: mode must be 'coupled' or 'decoupled', got '" + s + "'");
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json payload_json(const ConstraintPayload& p) {
  if (const double* d = std::get_if<double>(&p)) return *d;
  if (const bool* b = std::get_if<bool>(&p)) return *b;
  const auto& c = std::get<BinomialCount>(p);
  return json{{"successes", c.successes}, {"trials", c.trials}};
}

}  // namespace

void RunConfig::validate() const {
  if (problem.empty()) throw InputError("config: problem name is empty");
  if (iterations < 1) throw InputError("config: iterations must be at least 1");
  if (n_init < 0) throw InputError("config: n_init must be at least 1");
  if (emit_surfaces < 0 || emit_surfaces == 1) throw InputError("config: emit_surfaces resolution must be at least 2");
  for (const auto& c : constraints) {
    if (c.delta && !(*c.delta > 0.0 && *c.delta < 1.0))
      throw InputError("config: delta for constraint '" + c.id + "' must lie in (0, 1)");
    if (c.cost && !(*c.cost > 0.0)) throw InputError("config: cost for constraint '" + c.id + "' must be positive");
  }
  if (objective_cost && !(*objective_cost > 0.0)) throw InputError("config: objective_cost must be positive");
  if (cost_budget && !(*cost_budget > 0.0)) throw InputError("config: cost_budget must be positive");
  mcmc.validate();
  entropy.validate();
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw InputError("config: top level must be an object");
  reject_unknown(j,
                 {"problem", "mode", "iterations", "n_init", "seed", "constraints", "objective_cost", "mcmc", "entropy",
                  "cost_budget", "output_dir", "emit_surfaces"},
                 "config");
  RunConfig c;
  if (j.contains("problem")) c.problem = get_as<std::string>(j, "problem", "a string");
  if (j.contains("mode")) c.mode = parse_mode(get_as<std::string>(j, "mode", "a string"));
  if (j.contains("iterations")) c.iterations = get_as<int>(j, "iterations", "an integer");
  if (j.contains("n_init")) c.n_init = get_as<int>(j, "n_init", "an integer");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed", "a nonnegative integer");
  if (j.contains("objective_cost")) c.objective_cost = get_as<double>(j, "objective_cost", "a number");
  if (j.contains("cost_budget")) c.cost_budget = get_as<double>(j, "cost_budget", "a number");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir", "a string");
  if (j.contains("emit_surfaces")) c.emit_surfaces = get_as<int>(j, "emit_surfaces", "an integer");
  if (j.contains("constraints")) {
    const json& list = j.at("constraints");
    if (!list.is_array()) throw InputError("config: 'constraints' must be an array");
    for (const json& item : list) {
      if (!item.is_object()) throw InputError("config: constraint entries must be objects");
      reject_unknown(item, {"id", "delta", "cost"}, "constraint entry");
      ConstraintOverride o;
      o.id = get_as<std::string>(item, "id", "a string");
      if (item.contains("delta")) o.delta = get_as<double>(item, "delta", "a number");
      if (item.contains("cost")) o.cost = get_as<double>(item, "cost", "a number");
      c.constraints.push_back(o);
    }
  }
  if (j.contains("mcmc")) {
    const json& m = j.at("mcmc");
    if (!m.is_object()) throw InputError("config: 'mcmc' must be an object");
    reject_unknown(m, {"ensemble", "burnin", "initial_burnin"}, "mcmc");
    if (m.contains("ensemble")) c.mcmc.ensemble = get_as<int>(m, "ensemble", "an integer");
    if (m.contains("burnin")) c.mcmc.burnin = get_as<int>(m, "burnin", "an integer");
    if (m.contains("initial_burnin")) c.mcmc.initial_burnin = get_as<int>(m, "initial_burnin", "an integer");
  }
  if (j.contains("entropy")) {
    const json& e = j.at("entropy");
    if (!e.is_object()) throw InputError("config: 'entropy' must be an object");
    reject_unknown(e, {"discretization", "samples", "fantasies"}, "entropy");
    if (e.contains("discretization")) c.entropy.discretization = get_as<int>(e, "discretization", "an integer");
    if (e.contains("samples")) c.entropy.samples = get_as<int>(e, "samples", "an integer");
    if (e.contains("fantasies")) c.entropy.fantasies = get_as<int>(e, "fantasies", "an integer");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: parse error: ") + e.what());
  }
  return parse_run_config(j);
}

BenchmarkProblem configured_benchmark(const RunConfig& config) {
  BenchmarkProblem bp = make_benchmark(config.problem, config.mode, config.seed);
  if (config.objective_cost) bp.problem.objective_cost = *config.objective_cost;
  for (const auto& o : config.constraints) {
    auto it = std::find_if(bp.problem.constraints.begin(), bp.problem.constraints.end(),
                           [&](const ConstraintTask& t) { return t.spec.id == o.id; });
    if (it == bp.problem.constraints.end())
      throw InputError("config: problem '" + config.problem + "' has no constraint '" + o.id + "'");
    if (o.delta) it->spec.delta = *o.delta;
    if (o.cost) it->spec.cost = *o.cost;
  }
  bp.problem.validate();
  return bp;
}

OptimizerSettings optimizer_settings(const RunConfig& config) {
  OptimizerSettings s;
  s.mcmc = config.mcmc;
  s.selection = config.entropy;
  return s;
}

int resolved_n_init(const RunConfig& config, const BenchmarkProblem& benchmark) {
  return config.n_init > 0 ? config.n_init : static_cast<int>(2 * benchmark.problem.bounds.dim() + 1);
}

json effective_config_json(const RunConfig& config, const BenchmarkProblem& benchmark) {
  json constraints = json::array();
  for (const auto& c : benchmark.problem.constraints)
    constraints.push_back({{"id", c.spec.id}, {"delta", c.spec.delta}, {"cost", c.spec.cost}});
  json j = {{"problem", config.problem},
            {"mode", to_string(config.mode)},
            {"iterations", config.iterations},
            {"n_init", resolved_n_init(config, benchmark)},
            {"seed", config.seed},
            {"constraints", constraints},
            {"objective_cost", benchmark.problem.objective_cost},
            {"mcmc",
             {{"ensemble", config.mcmc.ensemble},
              {"burnin", config.mcmc.burnin},
              {"initial_burnin", config.mcmc.initial_burnin}}},
            {"entropy",
             {{"discretization", config.entropy.discretization},
              {"samples", config.entropy.samples},
              {"fantasies", config.entropy.fantasies}}},
            {"output_dir", config.output_dir.string()},
            {"emit_surfaces", config.emit_surfaces}};
  if (config.cost_budget) j["cost_budget"] = *config.cost_budget;
  return j;
}

json evaluation_json(const Evaluation& e, const Problem& problem) {
  json j = json::object();
  if (e.objective_evaluated) j["objective"] = e.objective ? json(*e.objective) : json(nullptr);
  json cons = json::object();
  for (size_t k = 0; k < e.constraints.size() && k < problem.constraints.size(); ++k)
    if (e.constraints[k]) cons[problem.constraints[k].spec.id] = payload_json(*e.constraints[k]);
  if (!cons.empty()) j["constraints"] = cons;
  return j;
}

json trace_record_json(const TraceRecord& r, const Problem& problem) {
  json j;
  j["iter"] = r.iter;
  j["task"] = r.task_label;
  j["x"] = vector_json(r.x);
  j["observation"] = evaluation_json(r.observation, problem);
  j["incumbent_x"] = vector_json(r.incumbent.x);
  j["incumbent_value"] = r.incumbent.expected_objective;
  j["feasible"] = r.incumbent.feasible;
  j["acquisition"] = r.feasibility_mode ? "feasibility" : "constrained-ei";
  j["acq_value"] = r.acq_value;
  return j;
}

json recommendation_json(const Recommendation& rec, const Optimizer& optimizer, const BenchmarkProblem& benchmark) {
  json probs = json::object();
  for (size_t k = 0; k < rec.constraint_probabilities.size(); ++k)
    probs[optimizer.constraint_model(k).spec().id] = rec.constraint_probabilities[k];
  json j = {{"x", vector_json(rec.x)},
            {"expected_objective", rec.expected_objective},
            {"constraint_probabilities", probs},
            {"feasible", rec.feasible}};
  if (benchmark.true_objective) j["true_objective"] = benchmark.true_objective(rec.x);
  if (benchmark.truly_feasible) j["truly_feasible"] = benchmark.truly_feasible(rec.x);
  return j;
}

int run(const RunConfig& config) {
  BenchmarkProblem bench;
  try {
    config.validate();
    bench = configured_benchmark(config);
  } catch (const InputError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory '" << config.output_dir.string() << "': " << ec.message() << "\n";
    return 2;
  }
  {
    std::ofstream cfg(config.output_dir / "effective_config.json");
    cfg << effective_config_json(config, bench).dump(2) << "\n";
  }
  std::ofstream trace(config.output_dir / "trace.jsonl", std::ios::trunc);
  std::ofstream timing(config.output_dir / "timing.jsonl", std::ios::trunc);

  try {
    Optimizer opt(bench.problem, optimizer_settings(config), config.seed);
    opt.initialize(resolved_n_init(config, bench));
    {
      std::ofstream design(config.output_dir / "initial_design.jsonl", std::ios::trunc);
      for (const auto& r : opt.initial_design())
        design << json{{"x", vector_json(r.x)}, {"observation", evaluation_json(r.observation, bench.problem)}}.dump()
               << "\n";
    }
    for (int i = 0; i < config.iterations; ++i) {
      if (config.cost_budget && opt.total_cost() >= *config.cost_budget) break;
      const TraceRecord& r = opt.step();
      trace << trace_record_json(r, bench.problem).dump() << "\n" << std::flush;
      timing << json{{"iter", r.iter}, {"wall_ms", r.wall_ms}}.dump() << "\n";
    }
    std::ofstream rec(config.output_dir / "recommendation.json");
    rec << recommendation_json(opt.recommend(), opt, bench).dump(2) << "\n";
    if (config.emit_surfaces > 0) emit_surfaces(opt, config.emit_surfaces, config.output_dir / "surfaces");
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation failed: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace cbo
