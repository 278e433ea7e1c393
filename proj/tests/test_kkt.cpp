#include <doctest.h>

#include <random>

#include "bidro/errors.hpp"
#include "bidro/kkt.hpp"
#include "fixtures.hpp"
#include "mpec_cases.hpp"
#include "oracles.hpp"

using namespace bidro;

namespace {

// Follower of fixture T1 written out by hand: z0, z1, flow on arc 0 -> 1.
LinearProgram t1_follower(double x0, double x1, double d0, double d1) {
  LinearProgram lp(2, 3);
  lp.objective = {0.5, 0.5, 0.2};
  lp.lower = {0.0, 0.0, 0.0};
  lp.upper = {std::max(8.0, d0), std::max(6.0, d1), 4.0};
  lp.at(0, 0) = 1.0;
  lp.at(0, 2) = -1.0;
  lp.at(1, 1) = 1.0;
  lp.at(1, 2) = 1.0;
  lp.senses = {RowSense::GreaterEqual, RowSense::GreaterEqual};
  lp.rhs = {d0 - x0, d1 - x1};
  return lp;
}

// Single node, leader inventory x in [0, 10] with cost 3, and a leader that
// earns 1 per unit the follower allocates. The follower allocates
// max(0, 5 - x), so the bi-level optimum is x = 0 with value -5, while
// dropping complementarity lets z climb to its cap of 8.
MpecProgram reward_mpec(int* x_col = nullptr) {
  const NetworkInstance inst = fixture::single(3.0, 4.0, 0.5, 10.0, 0.0, 8.0);
  MpecProgram mpec;
  const int x = mpec.builder.add_column(0.0, 10.0, 3.0);
  const std::vector<double> demand{5.0};
  const std::vector<int> cols{x};
  const FollowerLp f = build_follower_lp(inst, demand, cols);
  const KktSystem k = build_kkt(mpec.builder, f);
  mpec.builder.add_cost(k.z[0], -1.0);
  mpec.pairs = k.pairs;
  mpec.big_m = default_big_m(inst);
  if (x_col) *x_col = x;
  return mpec;
}

}  // namespace

TEST_CASE("follower optimum matches a hand-built program") {
  const NetworkInstance inst = fixture::t1();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> xd(0.0, 10.0), d0(2.0, 8.0), d1(2.0, 6.0);
  for (int t = 0; t < 30; ++t) {
    const std::vector<double> x{xd(rng), xd(rng) * 0.8}, d{d0(rng), d1(rng)};
    const FollowerSolution s = solve_follower(inst, x, d);
    const auto ref = oracle::vertex_enumeration(t1_follower(x[0], x[1], d[0], d[1]));
    REQUIRE(ref.has_value());
    CAPTURE(t);
    CHECK(s.value == doctest::Approx(*ref).epsilon(1e-9).scale(1.0));
    CHECK(s.primal_residual < 1e-9);
    CHECK(follower_cost(inst, s.decision) == doctest::Approx(s.value).epsilon(1e-9).scale(1.0));
    for (double mu : s.row_duals) CHECK(mu >= -1e-12);
  }
}

TEST_CASE("follower value is convex with row duals as subgradients") {
  const NetworkInstance inst = fixture::t1();
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> xd(0.0, 9.0), d0(2.0, 8.0), d1(2.0, 6.0);
  for (int t = 0; t < 50; ++t) {
    const std::vector<double> d{d0(rng), d1(rng)};
    const std::vector<double> x{xd(rng), xd(rng) * 0.8}, x2{xd(rng), xd(rng) * 0.8};
    const FollowerSolution a = solve_follower(inst, x, d);
    const FollowerSolution b = solve_follower(inst, x2, d);
    // value(x2) >= value(x) - mu . (x2 - x)
    double lin = a.value;
    for (int i = 0; i < 2; ++i) lin -= a.row_duals[i] * (x2[i] - x[i]);
    CHECK(b.value >= lin - 1e-9);
  }
}

TEST_CASE("realized cost of fixture T1") {
  const NetworkInstance inst = fixture::t1();
  const LeaderDecision x{{3.0, 2.0}, {1.0}};
  const std::vector<double> d{6.0, 4.0};
  const auto follower = oracle::vertex_enumeration(t1_follower(3.0, 2.0, 6.0, 4.0));
  REQUIRE(follower.has_value());
  // first stage 5.5, penalty 4 * 2 + 3 * 2 = 14
  CHECK(realized_cost(inst, x, d) == doctest::Approx(5.5 + 14.0 + *follower));
}

TEST_CASE("KKT system at a fixed leader reproduces the follower optimum") {
  const NetworkInstance inst = fixture::t1();
  const std::vector<double> d{6.5, 3.0};
  MpecProgram mpec;
  const int x0 = mpec.builder.add_column(2.0, 2.0, 0.0);
  const int x1 = mpec.builder.add_column(4.0, 4.0, 0.0);
  const std::vector<int> cols{x0, x1};
  const FollowerLp f = build_follower_lp(inst, d, cols);
  const KktSystem k = build_kkt(mpec.builder, f);
  mpec.pairs = k.pairs;
  mpec.big_m = default_big_m(inst);
  // Zero objective: any KKT point is the follower optimum. Read its cost.
  const MpecSolution e = enumerate_complementarity(mpec);
  double cost = 0;
  for (std::size_t j = 0; j < f.vars(); ++j) cost += f.cost[j] * e.values[k.z[j]];
  const auto ref = oracle::vertex_enumeration(t1_follower(2.0, 4.0, d[0], d[1]));
  REQUIRE(ref.has_value());
  CHECK(cost == doctest::Approx(*ref).epsilon(1e-9).scale(1.0));
  CHECK(e.complementarity < 1e-9);
  CHECK(k.multipliers(e.values).size() == f.rows.size() + 2 * f.vars());
}

TEST_CASE("enumeration and relaxation agree on a small bi-level program") {
  int x = -1;
  const MpecProgram mpec = reward_mpec(&x);
  const MpecSolution e = enumerate_complementarity(mpec);
  CHECK(e.objective == doctest::Approx(-5.0));
  CHECK(e.values[x] == doctest::Approx(0.0).scale(1.0));
  CHECK(e.relaxation_bound == doctest::Approx(-8.0));

  const MpecSolution r = relax_complementarity(mpec);
  CHECK(r.objective == doctest::Approx(e.objective).epsilon(1e-6));
  CHECK(r.complementarity < 1e-6);
  CHECK(complementarity_residual(mpec.pairs, r.values) == doctest::Approx(r.complementarity));
}

TEST_CASE("enumeration limit and big-M checks") {
  MpecProgram mpec = reward_mpec();
  CHECK_THROWS_AS(enumerate_complementarity(mpec, 2), ValidationError);
  mpec.big_m = 1.0;
  CHECK_THROWS_AS(relax_complementarity(mpec), SolverError);
  const NetworkInstance inst = fixture::t1();
  // 10 * largest cost (4) * largest bound (10)
  CHECK(default_big_m(inst) == doctest::Approx(400.0));
}

TEST_CASE("random bi-level programs: follower response is optimal, strategies agree") {
  std::mt19937_64 rng(2025);
  for (int t = 0; t < 25; ++t) {
    const mpec_case::Case c = mpec_case::random_case(rng);
    const MpecSolution e = enumerate_complementarity(c.mpec);
    const MpecSolution r = relax_complementarity(c.mpec);
    CAPTURE(t);
    CHECK(r.objective == doctest::Approx(e.objective).epsilon(1e-4).scale(1.0));
    CHECK(r.complementarity <= 1e-5);
    for (const MpecSolution* s : {&e, &r}) {
      const std::vector<double> x{s->values[c.x_cols[0]], s->values[c.x_cols[1]]};
      const FollowerSolution direct = solve_follower(c.inst, x, c.demand);
      double cost = 0;
      for (std::size_t j = 0; j < c.kkt.z.size(); ++j) {
        cost += (j < 2 ? c.inst.alloc_cost[j] : c.inst.flow_cost[j - 2]) * s->values[c.kkt.z[j]];
      }
      CHECK(cost == doctest::Approx(direct.value).epsilon(1e-6).scale(1.0));
    }
  }
}
