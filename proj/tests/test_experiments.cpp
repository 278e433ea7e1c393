#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "bidro/errors.hpp"
#include "bidro/experiments.hpp"
#include "bidro/kkt.hpp"
#include "fixtures.hpp"

using namespace bidro;

namespace {

MatrixSpec tiny_matrix() {
  MatrixSpec spec;
  spec.topology = Topology::Tiny2;
  spec.seeds = {1, 2};
  spec.eps = {0.05, 0.2};
  spec.forecast_bias = {0.0, 0.15};
  spec.n_samples = 10;
  spec.eval_n = 1000;
  return spec;
}

std::string csv_without_timing(const std::vector<ExperimentResultRow>& rows) {
  std::ostringstream out;
  write_results_csv(out, rows, false);
  return out.str();
}

}  // namespace

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  CHECK(quantile({0.0, 10.0}, 0.95) == doctest::Approx(9.5));
}

TEST_CASE("metrics re-solve the follower on every draw") {
  const NetworkInstance t1 = fixture::t1();
  const LeaderDecision x{{4.0, 3.0}, {1.0}};
  const std::vector<Demand> draws{{3.0, 2.5}, {7.5, 5.0}, {5.0, 4.0}, {6.0, 6.0}};
  const Metrics m = compute_metrics(t1, x, 10.0, draws);
  double mean = 0, mx = 0;
  for (const auto& d : draws) {
    const double c = realized_cost(t1, x, d);
    mean += c / 4.0;
    mx = std::max(mx, c);
  }
  CHECK(m.mean == doctest::Approx(mean));
  CHECK(m.max == doctest::Approx(mx));
  CHECK(m.costs.size() == 4);
  CHECK(m.robustness == doctest::Approx(10.0 / m.p95));
  CHECK(compute_metrics(t1, x, 1e6, draws).robustness == 1.0);
  CHECK(compute_metrics(t1, x, -5.0, draws).robustness == 0.0);
  CHECK_THROWS_AS(compute_metrics(t1, x, 0.0, {}), ValidationError);
}

TEST_CASE("matrix JSON is strict") {
  const MatrixSpec spec = tiny_matrix();
  const std::string text = matrix_to_json(spec);
  const MatrixSpec back = parse_matrix_json(text);
  CHECK(back.seeds == spec.seeds);
  CHECK(back.eps == spec.eps);
  CHECK(back.forecast_bias == spec.forecast_bias);
  CHECK(back.topology == Topology::Tiny2);
  CHECK(matrix_to_json(back) == text);

  std::string extra = text;
  extra.insert(extra.find('{') + 1, "\"colour\": 1,");
  CHECK_THROWS_AS(parse_matrix_json(extra), ValidationError);
  CHECK_THROWS_AS(parse_matrix_json(R"({"format":"bidro-matrix-v0"})"), ValidationError);
  MatrixSpec bad = spec;
  bad.eps = {-0.1};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("experiment rows") {
  const MatrixSpec spec = tiny_matrix();
  const auto rows = run_experiment(spec, 1);
  // 2 biases x 2 seeds x (DET, SP, RO, DRO x 2 eps)
  REQUIRE(rows.size() == 20);
  for (const auto& r : rows) {
    CAPTURE(r.run_id);
    CHECK(r.status == "ok");
    if (r.method == "DET") CHECK(r.cost_reduction_pct == 0.0);
    CHECK(r.service_level_pct >= 0.0);
    CHECK(r.service_level_pct <= 100.0);
    CHECK(r.out_sample_p95_cost <= r.worst_case_cost + 1e-9);
  }
  // Same flags, same bytes, whatever the worker count.
  CHECK(csv_without_timing(run_experiment(spec, 1)) == csv_without_timing(rows));
  CHECK(csv_without_timing(run_experiment(spec, 3)) == csv_without_timing(rows));
}

TEST_CASE("worker count from the environment") {
  ::setenv("BIDRO_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  ::setenv("BIDRO_THREADS", "many", 1);
  CHECK_THROWS_AS(worker_threads(), ValidationError);
  ::unsetenv("BIDRO_THREADS");
  CHECK(worker_threads() >= 1);
}

TEST_CASE("scaling summary fits a log-log slope") {
  std::vector<ScalingRow> rows;
  for (int n : {6, 12, 24}) {
    for (int rep = 0; rep < 3; ++rep) {
      rows.push_back({n, "A", rep, 1, 0.01 * n * n * (rep == 1 ? 1.0 : rep == 0 ? 0.5 : 9.0)});
      rows.push_back({n, "B", rep, 1, 2.0 * n});
    }
  }
  const auto sums = summarize_scaling(rows);
  REQUIRE(sums.size() == 2);
  for (const auto& s : sums) {
    CHECK(s.sizes == std::vector<int>{6, 12, 24});
    CHECK(s.loglog_slope == doctest::Approx(s.method == "A" ? 2.0 : 1.0));
  }
}

TEST_CASE("plots are written") {
  const auto dir = std::filesystem::temp_directory_path() / "bidro_plot_test";
  std::filesystem::remove_all(dir);
  const auto rows = run_experiment(tiny_matrix(), 1);
  write_plots(dir.string(), rows);
  for (const char* f : {"plot_costs_vs_eps.csv", "costs_vs_eps.svg", "service_vs_eps.svg",
                        "plot_cost_box_vs_bias.csv", "cost_box_vs_bias.svg"}) {
    CAPTURE(f);
    CHECK(std::filesystem::file_size(dir / f) > 0);
  }
  std::filesystem::remove_all(dir);
}
