#include "bidro/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "bidro/baselines.hpp"
#include "bidro/bilevel.hpp"
#include "bidro/errors.hpp"
#include "bidro/kkt.hpp"

namespace bidro {
namespace {

using json = nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

const std::set<std::string> kMethods{"DET", "SP", "RO", "DRO"};

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_bias(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", b);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  }
  return s;
}

struct Cell {
  int size;
  double bias;
  std::uint64_t seed;
};

struct Fitted {
  std::string method;
  double eps = 0.0;
  std::string status = "ok";
  LeaderDecision plan;
  double in_sample = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

std::vector<ExperimentResultRow> run_cell(const MatrixSpec& spec, const Cell& cell) {
  ScenarioSpec sc;
  sc.topology = spec.topology;
  sc.ring_nodes = cell.size;
  sc.seed = cell.seed;
  sc.samples = spec.n_samples;
  sc.forecast_error = cell.bias;
  const NetworkInstance inst = gen_instance(sc);
  const DemandModel model = demand_model(inst);
  const EmpiricalDistribution train = apply_forecast_error(
      sample_demands(model, spec.n_samples, cell.seed, 0), cell.bias, model.lo, model.hi);
  const std::vector<Demand> draws =
      sample_demands(shifted(model, spec.eval_shift), spec.eval_n, cell.seed, 1).samples;

  SolverConfig cfg;
  cfg.tolerance = spec.tol;
  cfg.max_iters = spec.max_iters;

  auto fit = [&](const std::string& method, double eps) {
    Fitted f;
    f.method = method;
    f.eps = eps;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (method == "DET") {
        const BaselineResult r = solve_deterministic(inst, train.mean());
        f.plan = r.leader;
        f.in_sample = r.objective;
        f.iterations = r.iterations;
      } else if (method == "SP") {
        const BaselineResult r = solve_saa(inst, train, SaaMethod::Auto, cfg);
        f.plan = r.leader;
        f.in_sample = r.objective;
        f.iterations = r.iterations;
      } else if (method == "RO") {
        const BaselineResult r = solve_robust_box(inst, empirical_intervals(train));
        f.plan = r.leader;
        f.in_sample = r.objective;
        f.iterations = r.iterations;
      } else {
        const AmbiguitySet amb = make_experiment_ambiguity(inst, train, eps, spec.metric);
        const SolverReport rep = solve(inst, amb, cfg);
        f.plan = rep.leader;
        f.in_sample = rep.objective;
        f.iterations = rep.iterations;
        if (rep.termination == Termination::IterationLimit) f.status = "iteration-limit";
      }
    } catch (const std::exception& e) {
      f.status = "error: " + sanitize(e.what());
    }
    f.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return f;
  };

  std::vector<Fitted> fitted;
  for (const std::string& method : spec.methods) {
    if (method == "DRO") {
      for (double eps : spec.eps) fitted.push_back(fit(method, eps));
    } else {
      fitted.push_back(fit(method, 0.0));
    }
  }

  std::vector<ExperimentResultRow> rows;
  std::vector<Metrics> metrics;
  for (const Fitted& f : fitted) {
    ExperimentResultRow row;
    row.method = f.method;
    row.eps = f.eps;
    row.n = spec.n_samples;
    row.seed = cell.seed;
    row.bias = cell.bias;
    row.size = spec.topology == Topology::Ring ? cell.size : static_cast<int>(inst.nodes());
    row.run_id = std::string(to_string(spec.topology)) + std::to_string(row.size) + "-b" +
                 format_bias(cell.bias) + "-s" + std::to_string(cell.seed) + "-" + f.method +
                 (f.method == "DRO" ? "-e" + format_number(f.eps) : std::string());
    row.status = f.status;
    row.iterations = f.iterations;
    row.wall_ms = f.wall_ms;
    Metrics m;
    if (f.status.rfind("error", 0) != 0) {
      try {
        m = compute_metrics(inst, f.plan, f.in_sample, draws);
        row.in_sample_cost = f.in_sample;
        row.out_sample_mean_cost = m.mean;
        row.out_sample_p95_cost = m.p95;
        row.worst_case_cost = m.max;
        row.service_level_pct = m.service_level_pct;
        row.robustness_metric = m.robustness;
      } catch (const std::exception& e) {
        row.status = "error: " + sanitize(e.what());
      }
    }
    rows.push_back(row);
  }

  // Cost reduction against the deterministic plan of the same cell.
  double det_mean = std::nan("");
  for (const ExperimentResultRow& r : rows) {
    if (r.method == "DET" && r.status == "ok") det_mean = r.out_sample_mean_cost;
  }
  if (std::isnan(det_mean)) {
    const Fitted det = fit("DET", 0.0);
    if (det.status == "ok") det_mean = compute_metrics(inst, det.plan, det.in_sample, draws).mean;
  }
  for (ExperimentResultRow& r : rows) {
    if (r.method == "DET") {
      r.cost_reduction_pct = 0.0;
    } else if (r.status.rfind("error", 0) == 0 || std::isnan(det_mean) || det_mean == 0.0) {
      r.cost_reduction_pct = std::nan("");
    } else {
      r.cost_reduction_pct = 100.0 * (det_mean - r.out_sample_mean_cost) / det_mean;
    }
  }
  return rows;
}

}  // namespace

void MatrixSpec::validate() const {
  require(!methods.empty(), "matrix needs at least one method");
  for (const std::string& m : methods) require(kMethods.count(m) == 1, "unknown method '" + m + "'");
  require(!seeds.empty(), "matrix needs at least one seed");
  require(!forecast_bias.empty(), "matrix needs at least one forecast bias");
  for (double b : forecast_bias) require(std::abs(b) <= 0.5, "forecast bias must lie in [-0.5, 0.5]");
  for (double e : eps) require(std::isfinite(e) && e >= 0.0, "eps values must be >= 0");
  if (std::find(methods.begin(), methods.end(), "DRO") != methods.end()) {
    require(!eps.empty(), "DRO needs at least one eps value");
  }
  require(n_samples >= 1, "n_samples must be >= 1");
  require(eval_n >= 1000, "eval_n must be >= 1000");
  require(eval_shift > -1.0, "eval_shift must be > -1");
  require(tol > 0.0 && max_iters >= 1, "tol must be > 0 and max_iters >= 1");
  if (topology == Topology::Ring) {
    require(!sizes.empty(), "Ring matrix needs sizes");
    for (int s : sizes) require(s >= 3, "ring sizes must be >= 3");
  }
  require(scaling_reps >= 0 && sp_samples >= 1, "scaling_reps must be >= 0 and sp_samples >= 1");
  require(scaling_reps == 0 || topology == Topology::Ring, "the scaling study runs on Ring sizes");
}

MatrixSpec parse_matrix_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("matrix spec is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "matrix spec must be a JSON object");
  static const std::set<std::string> known{"format", "topology", "sizes", "methods", "eps", "seeds",
                                           "forecast_bias", "n_samples", "eval_n", "eval_shift",
                                           "tol", "max_iters", "metric", "scaling_reps",
                                           "sp_samples"};
  for (const auto& [key, _] : j.items()) require(known.count(key) == 1, "unknown matrix field '" + key + "'");
  require(j.value("format", std::string()) == "bidro-matrix-v1",
          "matrix spec format must be 'bidro-matrix-v1'");
  MatrixSpec s;
  try {
    if (j.contains("topology")) s.topology = parse_topology(j["topology"].get<std::string>());
    if (j.contains("sizes")) s.sizes = j["sizes"].get<std::vector<int>>();
    if (j.contains("methods")) s.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("eps")) s.eps = j["eps"].get<std::vector<double>>();
    if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("forecast_bias")) s.forecast_bias = j["forecast_bias"].get<std::vector<double>>();
    if (j.contains("n_samples")) s.n_samples = j["n_samples"].get<std::size_t>();
    if (j.contains("eval_n")) s.eval_n = j["eval_n"].get<std::size_t>();
    if (j.contains("eval_shift")) s.eval_shift = j["eval_shift"].get<double>();
    if (j.contains("tol")) s.tol = j["tol"].get<double>();
    if (j.contains("max_iters")) s.max_iters = j["max_iters"].get<int>();
    if (j.contains("scaling_reps")) s.scaling_reps = j["scaling_reps"].get<int>();
    if (j.contains("sp_samples")) s.sp_samples = j["sp_samples"].get<std::size_t>();
    if (j.contains("metric")) {
      const std::string m = j["metric"].get<std::string>();
      require(m == "unit" || m == "normalized", "metric must be 'unit' or 'normalized'");
      s.metric = m == "unit" ? MetricScaling::Unit : MetricScaling::Normalized;
    }
  } catch (const json::type_error& e) {
    throw ValidationError(std::string("matrix spec field has the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

std::string matrix_to_json(const MatrixSpec& s) {
  json j;
  j["format"] = "bidro-matrix-v1";
  j["topology"] = to_string(s.topology);
  j["sizes"] = s.sizes;
  j["methods"] = s.methods;
  j["eps"] = s.eps;
  j["seeds"] = s.seeds;
  j["forecast_bias"] = s.forecast_bias;
  j["n_samples"] = s.n_samples;
  j["eval_n"] = s.eval_n;
  j["eval_shift"] = s.eval_shift;
  j["tol"] = s.tol;
  j["max_iters"] = s.max_iters;
  j["metric"] = s.metric == MetricScaling::Unit ? "unit" : "normalized";
  j["scaling_reps"] = s.scaling_reps;
  j["sp_samples"] = s.sp_samples;
  return j.dump(1) + "\n";
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Metrics compute_metrics(const NetworkInstance& inst, const LeaderDecision& plan,
                        double in_sample_cost, const std::vector<Demand>& draws) {
  require(!draws.empty(), "metrics need at least one evaluation draw");
  check_decision(inst, plan);
  Metrics m;
  m.costs.reserve(draws.size());
  for (const Demand& d : draws) m.costs.push_back(realized_cost(inst, plan, d));
  double sum = 0.0;
  for (double c : m.costs) sum += c;
  m.mean = sum / static_cast<double>(m.costs.size());
  m.p95 = quantile(m.costs, 0.95);
  m.max = *std::max_element(m.costs.begin(), m.costs.end());
  m.service_level_pct = 100.0 * service_level(inst, plan, draws);
  m.robustness = m.p95 > 0.0 ? std::clamp(in_sample_cost / m.p95, 0.0, 1.0) : 1.0;
  return m;
}

AmbiguitySet make_experiment_ambiguity(const NetworkInstance& inst, EmpiricalDistribution samples,
                                       double eps, MetricScaling metric) {
  AmbiguitySet amb = make_ambiguity_set(inst, std::move(samples), eps, GroundNorm::L1);
  if (metric == MetricScaling::Normalized) {
    for (std::size_t j = 0; j < amb.dimension(); ++j) {
      const double width = amb.hi[j] - amb.lo[j];
      amb.metric_weights.push_back(width > 0.0 ? 1.0 / width : 1.0);
    }
  }
  amb.validate();
  return amb;
}

int worker_threads() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("BIDRO_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min<long>(v, 1024));
    throw ValidationError("BIDRO_THREADS must be a positive integer");
  }
  return hw;
}

std::vector<ExperimentResultRow> run_experiment(const MatrixSpec& spec, int threads) {
  spec.validate();
  std::vector<Cell> cells;
  const std::vector<int> sizes = spec.topology == Topology::Ring ? spec.sizes : std::vector<int>{0};
  for (int size : sizes) {
    for (double bias : spec.forecast_bias) {
      for (std::uint64_t seed : spec.seeds) cells.push_back({size, bias, seed});
    }
  }
  if (threads <= 0) threads = worker_threads();
  threads = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));

  std::vector<std::vector<ExperimentResultRow>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      try {
        results[k] = run_cell(spec, cells[k]);
      } catch (const std::exception& e) {
        ExperimentResultRow row;
        row.run_id = std::string(to_string(spec.topology)) + "-b" + format_bias(cells[k].bias) +
                     "-s" + std::to_string(cells[k].seed);
        row.method = "ALL";
        row.seed = cells[k].seed;
        row.bias = cells[k].bias;
        row.size = cells[k].size;
        row.status = "error: " + sanitize(e.what());
        results[k] = {row};
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<ExperimentResultRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ExperimentResultRow>& rows,
                       bool include_timing) {
  out << "run_id,method,eps,N,seed,bias,size,status,in_sample_cost,out_sample_mean_cost,"
         "out_sample_p95_cost,worst_case_cost,cost_reduction_pct,service_level_pct,"
         "robustness_metric,iterations";
  if (include_timing) out << ",wall_ms";
  out << '\n';
  for (const ExperimentResultRow& r : rows) {
    out << r.run_id << ',' << r.method << ',' << format_number(r.eps) << ',' << r.n << ','
        << r.seed << ',' << format_number(r.bias) << ',' << r.size << ',' << r.status << ','
        << format_number(r.in_sample_cost) << ',' << format_number(r.out_sample_mean_cost) << ','
        << format_number(r.out_sample_p95_cost) << ',' << format_number(r.worst_case_cost) << ','
        << format_number(r.cost_reduction_pct) << ',' << format_number(r.service_level_pct) << ','
        << format_number(r.robustness_metric) << ',' << r.iterations;
    if (include_timing) out << ',' << format_number(r.wall_ms);
    out << '\n';
  }
}

std::vector<ScalingRow> run_scaling_study(const ScalingSpec& spec) {
  require(!spec.sizes.empty() && spec.reps >= 1, "scaling study needs sizes and reps >= 1");
  std::vector<ScalingRow> rows;
  SolverConfig cfg;
  cfg.tolerance = spec.tol;
  cfg.max_iters = spec.max_iters;
  for (int size : spec.sizes) {
    ScenarioSpec sc;
    sc.topology = Topology::Ring;
    sc.ring_nodes = size;
    const NetworkInstance inst = gen_instance(sc);
    const DemandModel model = demand_model(inst);
    for (const std::string& method : spec.methods) {
      for (int rep = 0; rep < spec.reps; ++rep) {
        const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(rep);
        ScalingRow row;
        row.size = size;
        row.method = method;
        row.rep = rep;
        const auto start = std::chrono::steady_clock::now();
        if (method == "DET") {
          row.iterations = solve_deterministic(inst, model.mean).iterations;
        } else if (method == "RO") {
          const auto train = sample_demands(model, spec.n_samples, seed);
          row.iterations = solve_robust_box(inst, empirical_intervals(train)).iterations;
        } else if (method == "DRO") {
          const auto train = sample_demands(model, spec.n_samples, seed);
          const AmbiguitySet amb = make_experiment_ambiguity(inst, train, spec.eps, MetricScaling::Normalized);
          row.iterations = solve(inst, amb, cfg).iterations;
        } else if (method == "SP500") {
          const auto train = sample_demands(model, spec.sp_samples, seed);
          row.iterations = solve_saa(inst, train, SaaMethod::Auto, cfg).iterations;
        } else {
          throw ValidationError("unknown scaling method '" + method + "'");
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::vector<ScalingSummary> summarize_scaling(const std::vector<ScalingRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<double>>> times;
  for (const ScalingRow& r : rows) {
    if (times.find(r.method) == times.end()) order.push_back(r.method);
    times[r.method][r.size].push_back(r.wall_ms);
  }
  std::vector<ScalingSummary> out;
  for (const std::string& method : order) {
    ScalingSummary s;
    s.method = method;
    for (const auto& [size, ms] : times[method]) {
      s.sizes.push_back(size);
      s.median_ms.push_back(quantile(ms, 0.5));
    }
    const std::size_t k = s.sizes.size();
    if (k >= 2) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < k; ++i) {
        mx += std::log(s.sizes[i]);
        my += std::log(std::max(s.median_ms[i], 1e-6));
      }
      mx /= k;
      my /= k;
      double sxy = 0, sxx = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const double dx = std::log(s.sizes[i]) - mx;
        sxy += dx * (std::log(std::max(s.median_ms[i], 1e-6)) - my);
        sxx += dx * dx;
      }
      s.loglog_slope = sxx > 0 ? sxy / sxx : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "size,method,rep,iterations,wall_ms\n";
  for (const ScalingRow& r : rows) {
    out << r.size << ',' << r.method << ',' << r.rep << ',' << r.iterations << ','
        << format_number(r.wall_ms) << '\n';
  }
}

}  // namespace bidro
