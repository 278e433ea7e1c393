#include <doctest.h>

#include "bidro/baselines.hpp"
#include "bidro/bilevel.hpp"
#include "bidro/errors.hpp"
#include "bidro/scenario.hpp"
#include "fixtures.hpp"

using namespace bidro;

TEST_CASE("deterministic newsvendor on one node") {
  const NetworkInstance one = fixture::single(1.0, 2.0, 0.0, 10.0, 0.0, 10.0);
  const BaselineResult r = solve_deterministic(one, Demand{5.0});
  CHECK(r.objective == doctest::Approx(5.0));
  CHECK(r.leader.inventory[0] == doctest::Approx(5.0));
  CHECK(r.kind == BaselineKind::Deterministic);
}

TEST_CASE("sample average program against a grid search") {
  const NetworkInstance one = fixture::single(1.0, 2.0, 0.5, 10.0, 0.0, 10.0);
  const EmpiricalDistribution s = fixture::samples({{2.0}, {4.0}});
  double best = 1e300;
  for (int k = 0; k <= 10000; ++k) {
    const double x = k * 0.001;
    double v = x;
    for (double d : {2.0, 4.0}) v += 0.5 * 2.5 * std::max(0.0, d - x);
    best = std::min(best, v);
  }
  for (SaaMethod m : {SaaMethod::Extensive, SaaMethod::Decomposed, SaaMethod::Auto}) {
    CHECK(solve_saa(one, s, m).objective == doctest::Approx(best).epsilon(1e-7));
  }
}

TEST_CASE("box-robust program") {
  const NetworkInstance t1 = fixture::t1();
  const Demand mean{5.0, 4.0};
  const BaselineResult det = solve_deterministic(t1, mean);
  const BaselineResult ro0 = solve_robust_box(t1, DemandIntervals{{5.0, 4.0}, {0.0, 0.0}});
  CHECK(ro0.objective == doctest::Approx(det.objective));
  const BaselineResult ro = solve_robust_box(t1, DemandIntervals{{5.0, 4.0}, {1.0, 1.5}});
  CHECK(ro.objective == doctest::Approx(solve_deterministic(t1, Demand{6.0, 5.5}).objective));
  CHECK_THROWS_AS(solve_robust_box(t1, DemandIntervals{{5.0, 4.0}, {-1.0, 0.0}}), ValidationError);

  const DemandIntervals iv = empirical_intervals(fixture::samples({{3.0, 3.0}, {7.0, 4.0}, {5.0, 2.0}}));
  CHECK(iv.center == std::vector<double>{5.0, 3.0});
  CHECK(iv.radius == std::vector<double>{4.0, 2.0});
}

TEST_CASE("methods order by how much uncertainty they price") {
  ScenarioSpec spec;
  spec.topology = Topology::Ring;
  spec.ring_nodes = 6;
  for (std::uint64_t seed : {1, 2, 3}) {
    spec.seed = seed;
    const NetworkInstance inst = gen_instance(spec);
    const EmpiricalDistribution s = sample_demands(demand_model(inst), 30, seed, 0);
    const double det = solve_deterministic(inst, s.mean()).objective;
    const double saa = solve_saa(inst, s).objective;
    const double ro = solve_robust_box(inst, empirical_intervals(s)).objective;
    SolverConfig cfg;
    cfg.tolerance = 1e-9;
    const double dro = solve(inst, make_ambiguity_set(inst, s, 0.5), cfg).objective;
    CAPTURE(seed);
    // Jensen: the cost is convex in demand.
    CHECK(det <= saa + 1e-7);
    // The upper corner dominates every sample.
    CHECK(saa <= ro + 1e-7);
    CHECK(saa <= dro + 1e-6);
    CHECK(solve_saa(inst, s, SaaMethod::Extensive).objective ==
          doctest::Approx(solve_saa(inst, s, SaaMethod::Decomposed, cfg).objective).epsilon(1e-7));
  }
}

TEST_CASE("baseline names") {
  CHECK(parse_baseline_kind("sp") == BaselineKind::StochasticSAA);
  CHECK(parse_baseline_kind("ro") == BaselineKind::RobustBox);
  CHECK(parse_baseline_kind("det") == BaselineKind::Deterministic);
  CHECK_THROWS_AS(parse_baseline_kind("mip"), ValidationError);
}
