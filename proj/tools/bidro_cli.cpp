// bidro: instance generation, solves, baselines, experiment matrices and
// out-of-sample evaluation from the command line.
//
// Exit codes: 0 success, 2 invalid input, 3 solver failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bidro/baselines.hpp"
#include "bidro/bilevel.hpp"
#include "bidro/errors.hpp"
#include "bidro/experiments.hpp"
#include "bidro/instance_io.hpp"
#include "bidro/scenario.hpp"

namespace {

using namespace bidro;

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

MetricScaling parse_metric(const std::string& text) {
  if (text == "unit") return MetricScaling::Unit;
  if (text == "normalized") return MetricScaling::Normalized;
  throw ValidationError("--metric must be 'unit' or 'normalized'");
}

EmpiricalDistribution training_samples(const NetworkInstance& inst, std::size_t n, std::uint64_t seed,
                                       double bias) {
  const DemandModel model = demand_model(inst);
  return apply_forecast_error(sample_demands(model, n, seed, 0), bias, model.lo, model.hi);
}

struct GenArgs {
  std::string topology = "SiouxFalls24";
  int nodes = 6;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  ScenarioSpec spec;
  spec.topology = parse_topology(a.topology);
  spec.ring_nodes = a.nodes;
  spec.seed = a.seed;
  write_instance(a.out, gen_instance(spec));
  return 0;
}

struct SolveArgs {
  std::string instance;
  double eps = 0.1;
  std::size_t n_samples = 50;
  std::uint64_t seed = 1;
  double bias = 0.0;
  double tol = 1e-5;
  int max_iters = 500;
  double eta = 1.0;
  std::string strategy = "decompose";
  std::string metric = "normalized";
  std::string report;
  std::string plan;
};

int run_solve(const SolveArgs& a) {
  const NetworkInstance inst = read_instance(a.instance);
  const AmbiguitySet amb = make_experiment_ambiguity(
      inst, training_samples(inst, a.n_samples, a.seed, a.bias), a.eps, parse_metric(a.metric));
  SolverConfig cfg;
  cfg.tolerance = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.eta0 = a.eta;
  cfg.strategy = parse_strategy(a.strategy);
  const SolverReport rep = solve(inst, amb, cfg);
  if (!a.report.empty()) {
    std::ostringstream csv;
    write_trajectory_csv(csv, rep);
    write_text_file(a.report, csv.str());
  }
  if (!a.plan.empty()) write_plan(a.plan, Plan{"DRO", rep.objective, rep.leader});
  nlohmann::json out;
  out["objective"] = rep.objective;
  out["lower_bound"] = rep.lower_bound;
  out["lambda"] = rep.lambda;
  out["iterations"] = rep.iterations;
  out["termination"] = to_string(rep.termination);
  out["wall_ms"] = rep.wall_ms;
  std::cout << out.dump(1) << '\n';
  return 0;
}

struct BaselineArgs {
  std::string kind = "sp";
  std::string instance;
  std::size_t n_samples = 50;
  std::uint64_t seed = 1;
  double bias = 0.0;
  std::string out;
};

int run_baseline(const BaselineArgs& a) {
  const NetworkInstance inst = read_instance(a.instance);
  const EmpiricalDistribution train = training_samples(inst, a.n_samples, a.seed, a.bias);
  const BaselineKind kind = parse_baseline_kind(a.kind);
  BaselineResult r;
  switch (kind) {
    case BaselineKind::Deterministic: r = solve_deterministic(inst, train.mean()); break;
    case BaselineKind::StochasticSAA: r = solve_saa(inst, train); break;
    case BaselineKind::RobustBox: r = solve_robust_box(inst, empirical_intervals(train)); break;
  }
  const std::string method = kind == BaselineKind::Deterministic ? "DET"
                             : kind == BaselineKind::StochasticSAA ? "SP"
                                                                   : "RO";
  const Plan plan{method, r.objective, r.leader};
  if (!a.out.empty()) write_plan(a.out, plan);
  else std::cout << plan_to_json(plan);
  return 0;
}

struct ExperimentArgs {
  std::string matrix;
  std::string out_dir = "results";
  int threads = 0;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  const MatrixSpec spec = parse_matrix_json(read_text_file(a.matrix));
  const std::filesystem::path dir(a.out_dir);
  const std::vector<ExperimentResultRow> rows = run_experiment(spec, a.threads);
  std::ostringstream csv;
  write_results_csv(csv, rows);
  write_text_file(dir / "results.csv", csv.str());
  write_plots(dir.string(), rows);
  if (spec.scaling_reps > 0) {
    ScalingSpec ss;
    ss.sizes = spec.sizes;
    ss.reps = spec.scaling_reps;
    ss.n_samples = spec.n_samples;
    ss.sp_samples = spec.sp_samples;
    ss.eps = spec.eps.empty() ? 0.1 : spec.eps.back();
    ss.tol = spec.tol;
    ss.max_iters = spec.max_iters;
    ss.seed = spec.seeds.front();
    const std::vector<ScalingRow> srows = run_scaling_study(ss);
    std::ostringstream scsv;
    write_scaling_csv(scsv, srows);
    write_text_file(dir / "scaling.csv", scsv.str());
    write_scaling_plot(dir.string(), srows);
  }
  int failed = 0;
  for (const auto& r : rows) failed += r.status.rfind("error", 0) == 0;
  std::cerr << rows.size() << " rows written to " << (dir / "results.csv").string();
  if (failed > 0) std::cerr << " (" << failed << " failed)";
  std::cerr << '\n';
  return 0;
}

struct EvalArgs {
  std::string plan;
  std::string instance;
  std::uint64_t eval_seed = 1;
  std::size_t eval_n = 1000;
  double shift = 0.0;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const NetworkInstance inst = read_instance(a.instance);
  const Plan plan = read_plan(a.plan);
  const std::vector<Demand> draws =
      sample_demands(shifted(demand_model(inst), a.shift), a.eval_n, a.eval_seed, 1).samples;
  const Metrics m = compute_metrics(inst, plan.decision, plan.objective, draws);
  nlohmann::json out;
  out["method"] = plan.method;
  out["in_sample_cost"] = plan.objective;
  out["out_sample_mean_cost"] = m.mean;
  out["out_sample_p95_cost"] = m.p95;
  out["worst_case_cost"] = m.max;
  out["service_level_pct"] = m.service_level_pct;
  out["robustness_metric"] = m.robustness;
  const std::string text = out.dump(1) + "\n";
  if (!a.out.empty()) write_text_file(a.out, text);
  else std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-level Wasserstein distributionally robust supply-chain planning"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-instance", "Write a generated instance as JSON");
  g->add_option("--topology", gen.topology, "SiouxFalls24, Ring or Tiny2")->capture_default_str();
  g->add_option("--nodes", gen.nodes, "Ring node count")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out)->required();

  SolveArgs solve_args;
  auto* s = app.add_subcommand("solve", "Solve the distributionally robust bi-level program");
  s->add_option("--instance", solve_args.instance)->required();
  s->add_option("--eps", solve_args.eps, "Wasserstein radius")->capture_default_str();
  s->add_option("--n-samples", solve_args.n_samples)->capture_default_str();
  s->add_option("--seed", solve_args.seed)->capture_default_str();
  s->add_option("--bias", solve_args.bias, "forecast error applied to the training draws")->capture_default_str();
  s->add_option("--tol", solve_args.tol)->capture_default_str();
  s->add_option("--max-iters", solve_args.max_iters)->capture_default_str();
  s->add_option("--eta", solve_args.eta, "dual step size")->capture_default_str();
  s->add_option("--strategy", solve_args.strategy, "enumerate, relax or decompose")->capture_default_str();
  s->add_option("--metric", solve_args.metric, "unit or normalized")->capture_default_str();
  s->add_option("--report", solve_args.report, "trajectory CSV");
  s->add_option("--plan", solve_args.plan, "plan JSON");

  BaselineArgs base_args;
  auto* b = app.add_subcommand("baseline", "Solve a comparison method");
  b->add_option("--kind", base_args.kind, "det, sp or ro")->capture_default_str();
  b->add_option("--instance", base_args.instance)->required();
  b->add_option("--n-samples", base_args.n_samples)->capture_default_str();
  b->add_option("--seed", base_args.seed)->capture_default_str();
  b->add_option("--bias", base_args.bias)->capture_default_str();
  b->add_option("--out", base_args.out, "plan JSON (stdout if omitted)");

  ExperimentArgs exp_args;
  auto* e = app.add_subcommand("experiment", "Run an experiment matrix");
  e->add_option("--matrix", exp_args.matrix, "bidro-matrix-v1 JSON")->required();
  e->add_option("--out-dir", exp_args.out_dir)->capture_default_str();
  e->add_option("--threads", exp_args.threads, "worker count (default: BIDRO_THREADS or all cores)");

  EvalArgs eval_args;
  auto* v = app.add_subcommand("eval", "Out-of-sample evaluation of a plan");
  v->add_option("--plan", eval_args.plan)->required();
  v->add_option("--instance", eval_args.instance)->required();
  v->add_option("--eval-seed", eval_args.eval_seed)->capture_default_str();
  v->add_option("--eval-n", eval_args.eval_n)->capture_default_str();
  v->add_option("--shift", eval_args.shift, "demand shift applied to the evaluation law")->capture_default_str();
  v->add_option("--out", eval_args.out, "metrics JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitValidation;
  }

  try {
    if (*g) return run_gen(gen);
    if (*s) return run_solve(solve_args);
    if (*b) return run_baseline(base_args);
    if (*e) return run_experiment_cmd(exp_args);
    if (*v) return run_eval(eval_args);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const SolverError& err) {
    std::cerr << "solver failure: " << err.what() << '\n';
    if (!err.dump().empty()) std::cerr << err.dump() << '\n';
    return kExitSolver;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "solver failure: " << err.what() << '\n';
    return kExitSolver;
  }
  return 0;
}
