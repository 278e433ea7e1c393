#include <doctest.h>

#include <random>
#include <sstream>

#include "bidro/baselines.hpp"
#include "bidro/bilevel.hpp"
#include "bidro/errors.hpp"
#include "bidro/scenario.hpp"
#include "bidro/wasserstein.hpp"
#include "fixtures.hpp"

using namespace bidro;

namespace {

SolverConfig tight() {
  SolverConfig cfg;
  cfg.tolerance = 1e-10;
  return cfg;
}

EmpiricalDistribution t1_samples() {
  return fixture::samples({{3.0, 3.0}, {5.0, 4.0}, {7.0, 2.5}, {4.0, 5.5}, {6.0, 4.5}});
}

NetworkInstance ring6() {
  ScenarioSpec spec;
  spec.topology = Topology::Ring;
  spec.ring_nodes = 6;
  spec.seed = 4;
  return gen_instance(spec);
}

// Single node, one sample d, unit metric. The worst case moves a fraction
// min(1, eps / (hi - d)) of the mass to hi; the objective is convex and
// piecewise linear in x with kinks at d and hi.
double single_node_optimum(double c, double p, double q, double cap, double hi, double d, double eps) {
  auto f = [&](double x) {
    const double stay = std::max(0.0, d - x), top = std::max(0.0, hi - x);
    const double frac = hi > d ? std::min(1.0, eps / (hi - d)) : 0.0;
    return c * x + p * stay + frac * p * (top - stay) + q * stay;
  };
  double best = f(0.0);
  for (double x : {d, hi, cap}) {
    if (x >= 0.0 && x <= cap) best = std::min(best, f(x));
  }
  return best;
}

}  // namespace

TEST_CASE("zero radius reproduces the sample average program") {
  const NetworkInstance t1 = fixture::t1();
  const EmpiricalDistribution s1 = t1_samples();
  const SolverReport r1 = solve(t1, make_ambiguity_set(t1, s1, 0.0), tight());
  CHECK(r1.objective == doctest::Approx(solve_saa(t1, s1).objective).epsilon(1e-5).scale(1.0));

  const NetworkInstance one = fixture::single(1.0, 3.0, 0.5, 20.0, 0.0, 10.0);
  const EmpiricalDistribution s2 = fixture::samples({{2.0}, {6.0}, {9.0}});
  const SolverReport r2 = solve(one, make_ambiguity_set(one, s2, 0.0), tight());
  CHECK(r2.objective == doctest::Approx(solve_saa(one, s2).objective).epsilon(1e-5).scale(1.0));

  const NetworkInstance ring = ring6();
  const EmpiricalDistribution s3 = sample_demands(demand_model(ring), 20, 4, 0);
  const SolverReport r3 = solve(ring, make_ambiguity_set(ring, s3, 0.0), tight());
  CHECK(r3.objective == doctest::Approx(solve_saa(ring, s3).objective).epsilon(1e-5).scale(1.0));
}

TEST_CASE("fixture T1 matches the monolithic program") {
  const NetworkInstance t1 = fixture::t1();
  const EmpiricalDistribution s = fixture::samples({{3.0, 3.0}, {6.0, 4.5}});
  for (double eps : {0.05, 0.2, 1.0}) {
    const AmbiguitySet amb = make_ambiguity_set(t1, s, eps);
    const MonolithicResult mono = solve_monolithic(t1, amb);
    const SolverReport rep = solve(t1, amb, tight());
    CAPTURE(eps);
    CHECK(rep.objective == doctest::Approx(mono.objective).epsilon(1e-4).scale(1.0));
    CHECK(evaluate_plan(t1, amb, rep.leader).total == doctest::Approx(rep.objective).epsilon(1e-9));
  }
}

TEST_CASE("single node against the closed form") {
  for (double eps : {0.0, 0.5, 2.0, 10.0}) {
    for (double d : {1.0, 4.0, 9.5}) {
      const NetworkInstance one = fixture::single(1.0, 3.0, 0.5, 20.0, 0.0, 10.0);
      const AmbiguitySet amb = make_ambiguity_set(one, fixture::samples({{d}}), eps);
      const SolverReport rep = solve(one, amb, tight());
      CAPTURE(eps);
      CAPTURE(d);
      CHECK(rep.objective ==
            doctest::Approx(single_node_optimum(1.0, 3.0, 0.5, 20.0, 10.0, d, eps)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("solver invariants on fixture T1") {
  const NetworkInstance t1 = fixture::t1();
  const AmbiguitySet amb = make_ambiguity_set(t1, t1_samples(), 0.2);
  SolverConfig cfg;
  cfg.stop_on_gap = false;
  int calls = 0;
  cfg.on_iteration = [&](const IterationRecord&) { ++calls; };
  const SolverReport rep = solve(t1, amb, cfg);

  CHECK(rep.termination == Termination::Residuals);
  CHECK(rep.iterations <= 500);
  CHECK(calls == rep.iterations);
  const auto& last = rep.trajectory.back();
  CHECK(std::max(last.primal_res, last.dual_res) < 1e-5);
  for (std::size_t k = 1; k < rep.trajectory.size(); ++k) {
    CHECK(rep.trajectory[k].upper <= rep.trajectory[k - 1].upper + 1e-8);
    CHECK(rep.trajectory[k].lower >= rep.trajectory[k - 1].lower - 1e-8);
  }
  CHECK(rep.lower_bound <= rep.objective + 1e-8);
  CHECK_NOTHROW(check_decision(t1, rep.leader));
  REQUIRE(rep.followers.size() == amb.center.samples.size());
  for (const auto& z : rep.followers) CHECK_NOTHROW(check_decision(t1, z));

  // Retained cuts never overestimate what they model.
  const ShortfallWorstCase wc(amb, t1.penalty_cost);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> cov_d(0.0, 12.0), lam_d(0.0, 8.0), x_d(0.0, 8.0);
  for (int probe = 0; probe < 100; ++probe) {
    const std::vector<double> cov{cov_d(rng), cov_d(rng)};
    const double lam = lam_d(rng);
    const auto ev = wc.evaluate(cov, lam);
    for (const PenaltyCut& c : rep.penalty_cuts) {
      const double cut = c.constant - c.cov_coef * cov[c.node] - c.lambda_coef * lam;
      CHECK(cut <= ev.per_coordinate[c.node] + 1e-7);
    }
    const std::vector<double> x{x_d(rng), x_d(rng)};
    double mean = 0;
    for (const auto& d : amb.center.samples) mean += solve_follower(t1, x, d).value;
    mean /= static_cast<double>(amb.center.samples.size());
    for (const FollowerCut& c : rep.follower_cuts) {
      double cut = c.constant;
      for (int i = 0; i < 2; ++i) cut += c.x_coef[i] * x[i];
      CHECK(cut <= mean + 1e-7);
    }
  }
}

TEST_CASE("follower strategies agree") {
  const NetworkInstance t1 = fixture::t1();
  const AmbiguitySet amb = make_ambiguity_set(t1, fixture::samples({{3.0, 3.0}, {6.0, 4.5}}), 0.1);
  SolverConfig cfg = tight();
  cfg.tolerance = 1e-7;
  const double ref = solve(t1, amb, cfg).objective;
  for (FollowerStrategy s : {FollowerStrategy::Enumerate, FollowerStrategy::Relax}) {
    cfg.strategy = s;
    CAPTURE(to_string(s));
    CHECK(solve(t1, amb, cfg).objective == doctest::Approx(ref).epsilon(1e-5));
  }
  CHECK(parse_strategy("relax") == FollowerStrategy::Relax);
  CHECK_THROWS_AS(parse_strategy("simplex"), ValidationError);
}

TEST_CASE("objective is nondecreasing in the radius") {
  const NetworkInstance t1 = fixture::t1();
  double prev = -kInf;
  for (double eps : {0.0, 0.05, 0.1, 0.2, 0.5}) {
    const double v = solve(t1, make_ambiguity_set(t1, t1_samples(), eps), tight()).objective;
    CHECK(v >= prev - 1e-7);
    prev = v;
  }
}

TEST_CASE("trajectory CSV") {
  const NetworkInstance t1 = fixture::t1();
  const SolverReport rep = solve(t1, make_ambiguity_set(t1, t1_samples(), 0.1));
  std::ostringstream out;
  write_trajectory_csv(out, rep);
  const std::string text = out.str();
  CHECK(text.rfind("iter,upper,lower,primal_res,dual_res,lambda,mu_norm,tau,ms\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(rep.trajectory.size()) + 1);
}

TEST_CASE("configuration validation") {
  SolverConfig cfg;
  cfg.tolerance = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SolverConfig{};
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
