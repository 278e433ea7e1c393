#pragma once

// Experiment matrix: fit every method on seeded training draws, evaluate on
// fresh (optionally shifted) draws, and emit one row per (cell, method, eps).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bidro/problem.hpp"
#include "bidro/scenario.hpp"

namespace bidro {

enum class MetricScaling {
  Unit,        // plain norm on raw demand units
  Normalized,  // weights 1 / box width: shifts measured in support widths
};

struct MatrixSpec {
  Topology topology = Topology::SiouxFalls24;
  std::vector<int> sizes{6};  // Ring node counts; ignored otherwise
  std::vector<std::string> methods{"DET", "SP", "RO", "DRO"};
  std::vector<double> eps{0.05, 0.10, 0.20};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> forecast_bias{0.0};
  std::size_t n_samples = 50;
  std::size_t eval_n = 1000;
  double eval_shift = 0.2;
  double tol = 1e-4;
  int max_iters = 300;
  MetricScaling metric = MetricScaling::Normalized;
  // Ring only: when > 0, also time every size this many times per method.
  int scaling_reps = 0;
  std::size_t sp_samples = 500;

  void validate() const;
};

// "bidro-matrix-v1"; unknown fields are rejected.
MatrixSpec parse_matrix_json(const std::string& text);
std::string matrix_to_json(const MatrixSpec& spec);

struct ExperimentResultRow {
  std::string run_id;
  std::string method;
  double eps = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double bias = 0.0;
  int size = 0;
  std::string status = "ok";
  double in_sample_cost = 0.0;
  double out_sample_mean_cost = 0.0;
  double out_sample_p95_cost = 0.0;
  double worst_case_cost = 0.0;
  double cost_reduction_pct = 0.0;
  double service_level_pct = 0.0;
  double robustness_metric = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

struct Metrics {
  double mean = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  double service_level_pct = 0.0;
  double robustness = 0.0;
  std::vector<double> costs;  // per draw
};

// Exact per-draw costs with the follower re-optimized on every draw.
Metrics compute_metrics(const NetworkInstance& inst, const LeaderDecision& plan,
                        double in_sample_cost, const std::vector<Demand>& draws);

// Linear-interpolated quantile of unsorted data.
double quantile(std::vector<double> values, double q);

AmbiguitySet make_experiment_ambiguity(const NetworkInstance& inst, EmpiricalDistribution samples,
                                       double eps, MetricScaling metric);

// Worker count from BIDRO_THREADS (default: hardware concurrency, at least 1).
int worker_threads();

// Rows in deterministic order: size, bias, seed, then methods as listed
// (DRO expanded over eps). Solver failures are recorded in `status`.
std::vector<ExperimentResultRow> run_experiment(const MatrixSpec& spec, int threads = 0);

void write_results_csv(std::ostream& out, const std::vector<ExperimentResultRow>& rows,
                       bool include_timing = true);

struct ScalingRow {
  int size = 0;
  std::string method;
  int rep = 0;
  int iterations = 0;
  double wall_ms = 0.0;
};

struct ScalingSpec {
  std::vector<int> sizes{6, 12, 24};
  std::vector<std::string> methods{"DET", "RO", "DRO", "SP500"};
  int reps = 3;
  std::size_t n_samples = 50;
  std::size_t sp_samples = 500;
  double eps = 0.1;
  double tol = 1e-4;
  int max_iters = 300;
  std::uint64_t seed = 1;
};

std::vector<ScalingRow> run_scaling_study(const ScalingSpec& spec);

struct ScalingSummary {
  std::string method;
  std::vector<int> sizes;
  std::vector<double> median_ms;
  double loglog_slope = 0.0;  // least squares of log(median) on log(size)
};

std::vector<ScalingSummary> summarize_scaling(const std::vector<ScalingRow>& rows);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

// Long-format plot data and one SVG chart per figure, written into `dir`:
// costs_vs_eps, service_vs_eps, cost_box_vs_bias, time_vs_size.
void write_plots(const std::string& dir, const std::vector<ExperimentResultRow>& rows);
void write_scaling_plot(const std::string& dir, const std::vector<ScalingRow>& rows);

}  // namespace bidro
