#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "bidro/errors.hpp"
#include "bidro/wasserstein.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bidro;

namespace {

AmbiguitySet box_set(std::vector<double> lo, std::vector<double> hi,
                     std::vector<std::vector<double>> samples, double radius) {
  AmbiguitySet amb;
  amb.center = fixture::samples(std::move(samples));
  amb.radius = radius;
  amb.lo = std::move(lo);
  amb.hi = std::move(hi);
  return amb;
}

// sum_j p_j max(0, xi_j - cov_j) written as the max over subsets of nodes.
PiecewiseAffineLoss shortfall_loss(const std::vector<double>& p, const std::vector<double>& cov) {
  const std::size_t n = p.size();
  PiecewiseAffineLoss loss;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    AffinePiece piece;
    piece.slope.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (mask >> j & 1) {
        piece.slope[j] = p[j];
        piece.intercept.constant -= p[j] * cov[j];
      }
    }
    loss.pieces.push_back(piece);
  }
  return loss;
}

// Worst-case shortfall under a weighted L1 ball as a fractional knapsack:
// each (sample, node) pair may send its mass to hi_j, gaining
// p_j (hi_j - cov_j)^+ - p_j (xi_j - cov_j)^+ for a budget of w_j (hi_j - xi_j).
double knapsack_worst_case(const AmbiguitySet& amb, const std::vector<double>& p,
                           const std::vector<double>& cov) {
  const double n = static_cast<double>(amb.center.samples.size());
  double base = 0;
  std::vector<std::pair<double, double>> items;  // gain, cost
  for (const auto& s : amb.center.samples) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double stay = p[j] * std::max(0.0, s[j] - cov[j]);
      base += stay / n;
      const double gain = (p[j] * std::max(0.0, amb.hi[j] - cov[j]) - stay) / n;
      const double cost = amb.weight(j) * (amb.hi[j] - s[j]) / n;
      if (gain > 0) items.push_back({gain, cost});
    }
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.first * b.second > b.first * a.second;
  });
  double budget = amb.radius, total = base;
  for (const auto& [gain, cost] : items) {
    if (cost <= budget) {
      total += gain;
      budget -= cost;
    } else {
      total += gain * budget / cost;
      break;
    }
  }
  return total;
}

double brute_force_assignment(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a[i].size(); ++j) cost += std::abs(a[i][j] - b[perm[i]][j]);
    }
    best = std::min(best, cost / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("support function of a box") {
  const std::vector<double> zero{0.0, 0.0}, lo{0.0, 0.0}, hi{1.0, 1.0};
  CHECK(support_function_box(zero, lo, hi) == 0.0);
  const std::vector<double> v{1.0, -1.0};
  CHECK(support_function_box(v, lo, hi) == doctest::Approx(1.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const std::vector<double> w{u(rng), u(rng)};
    const std::vector<double> a{-1.0, 0.5}, b{2.0, 4.0};
    // The maximum of a linear function sits on a corner, so a grid that
    // contains the corners is exact.
    double best = -1e300;
    for (int i = 0; i <= 30; ++i) {
      for (int k = 0; k <= 30; ++k) {
        const double x0 = a[0] + (b[0] - a[0]) * i / 30.0, x1 = a[1] + (b[1] - a[1]) * k / 30.0;
        best = std::max(best, w[0] * x0 + w[1] * x1);
      }
    }
    CHECK(support_function_box(w, a, b) == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("zero radius gives the sample average") {
  const AmbiguitySet amb = box_set({0.0, 0.0}, {10.0, 10.0}, {{1, 2}, {3, 5}, {7, 1}}, 0.0);
  const PiecewiseAffineLoss loss = shortfall_loss({2.0, 3.0}, {2.0, 2.0});
  double mean = 0;
  for (const auto& s : amb.center.samples) mean += loss.evaluate(s);
  mean /= 3.0;
  CHECK(dro_value(loss, amb) == doctest::Approx(mean).epsilon(1e-9));
}

TEST_CASE("single affine piece moves mass to the upper edge") {
  const AmbiguitySet amb = box_set({0.0}, {10.0}, {{2.0}, {4.0}}, 1.0);
  PiecewiseAffineLoss loss;
  loss.pieces.push_back(AffinePiece{{1.0}, {}});
  // mean 3 plus slope 1 times budget 1.
  CHECK(dro_value(loss, amb) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("grid oracle on a hinge") {
  const AmbiguitySet amb = box_set({0.0}, {4.0}, {{2.0}}, 0.5);
  PiecewiseAffineLoss loss;
  loss.pieces.push_back(AffinePiece{{0.0}, {}});
  loss.pieces.push_back(AffinePiece{{1.0}, {-2.0, {}}});
  const OracleResult o = worst_case_oracle(loss, amb, 0.05);
  CHECK(o.value == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(dro_value(loss, amb) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("fixture T1 dual program matches the grid oracle") {
  const NetworkInstance inst = fixture::t1();
  const auto center = fixture::samples({{3.0, 3.0}, {5.0, 4.0}, {7.0, 2.5}, {4.0, 5.5}});
  // Coverage on grid points so the worst case (samples and upper corners)
  // lies on the grid.
  const std::vector<double> cov{5.0, 4.0};
  const PiecewiseAffineLoss loss = shortfall_loss(inst.penalty_cost, cov);
  for (double eps : {0.05, 0.1, 0.2}) {
    const AmbiguitySet amb = make_ambiguity_set(inst, center, eps);
    const double dual = dro_value(loss, amb);
    const OracleResult o = worst_case_oracle(loss, amb, 0.05);
    CAPTURE(eps);
    CHECK(o.value <= dual + 1e-7);
    CHECK(dual <= o.value + o.gap + 1e-7);
    CHECK(dual == doctest::Approx(o.value).epsilon(1e-6).scale(1.0));
    CHECK(dual == doctest::Approx(knapsack_worst_case(amb, inst.penalty_cost, cov)).epsilon(1e-7));
  }
}

TEST_CASE("worst case is monotone, dominates the mean, and respects the Lipschitz cap") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<double>> samples;
    for (int s = 0; s < 6; ++s) samples.push_back({4 * u(rng), 4 * u(rng)});
    PiecewiseAffineLoss loss;
    for (int k = 0; k < 3; ++k) {
      loss.pieces.push_back(AffinePiece{{4 * u(rng) - 2, 4 * u(rng) - 2}, {2 * u(rng) - 1, {}}});
    }
    double prev = -1e300;
    double mean = 0;
    for (const auto& s : samples) mean += loss.evaluate(s) / 6.0;
    for (double eps : {0.0, 0.05, 0.1, 0.3, 1.0}) {
      const AmbiguitySet amb = box_set({0.0, 0.0}, {4.0, 4.0}, samples, eps);
      const double v = dro_value(loss, amb);
      CHECK(v >= prev - 1e-9);
      CHECK(v >= mean - 1e-9);
      CHECK(v <= mean + loss.lipschitz(amb) * eps + 1e-9);
      prev = v;
    }
    // A pointwise larger loss has a larger worst case.
    PiecewiseAffineLoss bigger = loss;
    bigger.pieces.push_back(AffinePiece{{1.0, 1.0}, {0.0, {}}});
    const AmbiguitySet amb = box_set({0.0, 0.0}, {4.0, 4.0}, samples, 0.2);
    CHECK(dro_value(bigger, amb) >= dro_value(loss, amb) - 1e-9);
  }
}

TEST_CASE("L2 ground norm is rejected by the dual program") {
  AmbiguitySet amb = box_set({0.0}, {1.0}, {{0.5}}, 0.1);
  amb.ground_norm = GroundNorm::L2;
  PiecewiseAffineLoss loss;
  loss.pieces.push_back(AffinePiece{{1.0}, {}});
  CHECK_THROWS_AS(dro_value(loss, amb), ValidationError);
}

TEST_CASE("transport distance") {
  const DiscreteDistribution a{{{0.0}}, {1.0}}, b{{{3.0}}, {1.0}};
  CHECK(wasserstein_distance(a, b) == doctest::Approx(3.0));
  CHECK(wasserstein_distance(a, a) == doctest::Approx(0.0).scale(1.0));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  auto random_1d = [&](int k) {
    DiscreteDistribution d;
    double total = 0;
    for (int i = 0; i < k; ++i) {
      d.points.push_back({u(rng)});
      d.weights.push_back(0.1 + u(rng));
      total += d.weights.back();
    }
    for (double& w : d.weights) w /= total;
    return d;
  };
  auto flat = [](const DiscreteDistribution& d) {
    std::vector<double> x;
    for (const auto& p : d.points) x.push_back(p[0]);
    return x;
  };
  for (int t = 0; t < 20; ++t) {
    const DiscreteDistribution p = random_1d(4), q = random_1d(6), r = random_1d(3);
    const double pq = wasserstein_distance(p, q);
    CHECK(pq == doctest::Approx(oracle::wasserstein_1d(flat(p), p.weights, flat(q), q.weights)).epsilon(1e-9));
    CHECK(pq == doctest::Approx(wasserstein_distance(q, p)).epsilon(1e-9));
    CHECK(pq <= wasserstein_distance(p, r) + wasserstein_distance(r, q) + 1e-9);
  }

  // Uniform five-point laws in two dimensions: optimal plans are permutations.
  for (int t = 0; t < 10; ++t) {
    std::vector<std::vector<double>> pa, pb;
    for (int i = 0; i < 5; ++i) {
      pa.push_back({u(rng), u(rng)});
      pb.push_back({u(rng), u(rng)});
    }
    const std::vector<double> w(5, 0.2);
    const double d = wasserstein_distance({pa, w}, {pb, w});
    CHECK(d == doctest::Approx(brute_force_assignment(pa, pb)).epsilon(1e-8));
  }

  const DiscreteDistribution heavy{{{0.0}}, {1.1}};
  CHECK_THROWS_AS(wasserstein_distance(heavy, b), ValidationError);
}

TEST_CASE("shortfall worst case agrees with the dual program and a knapsack") {
  const NetworkInstance inst = fixture::t1();
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> d0(2.0, 8.0), d1(2.0, 6.0), c(1.0, 9.0), e(0.0, 2.0);
  for (int t = 0; t < 25; ++t) {
    std::vector<std::vector<double>> s;
    for (int k = 0; k < 5; ++k) s.push_back({d0(rng), d1(rng)});
    AmbiguitySet amb = make_ambiguity_set(inst, fixture::samples(s), e(rng));
    if (t % 2) amb.metric_weights = {0.5 + e(rng), 0.5 + e(rng)};
    const std::vector<double> cov{c(rng), c(rng)};
    const ShortfallWorstCase wc(amb, inst.penalty_cost);
    const auto opt = wc.minimize(cov);
    CAPTURE(t);
    CHECK(opt.value == doctest::Approx(knapsack_worst_case(amb, inst.penalty_cost, cov)).epsilon(1e-9));
    CHECK(opt.value == doctest::Approx(dro_value(shortfall_loss(inst.penalty_cost, cov), amb)).epsilon(1e-7));
    CHECK(wc.evaluate(cov, opt.lambda).value == doctest::Approx(opt.value).epsilon(1e-9));
    CHECK(opt.lambda <= wc.lambda_cap() + 1e-12);

    // Cuts taken anywhere stay below the dual function everywhere.
    const double lam = e(rng) * 3;
    const auto ev = wc.evaluate(cov, lam);
    for (int k = 0; k < 10; ++k) {
      const std::vector<double> cv{c(rng), c(rng)};
      const double lv = e(rng) * 3;
      double cut = lv * amb.radius;
      for (int j = 0; j < 2; ++j) cut += ev.cut_const[j] - ev.cut_cov[j] * cv[j] - ev.cut_lambda[j] * lv;
      CHECK(cut <= wc.evaluate(cv, lv).value + 1e-9);
    }
  }
}

TEST_CASE("shortfall worst case at zero radius") {
  const NetworkInstance inst = fixture::t1();
  const auto center = fixture::samples({{3.0, 3.0}, {7.0, 2.5}, {6.5, 5.9}});
  const AmbiguitySet amb = make_ambiguity_set(inst, center, 0.0);
  const ShortfallWorstCase wc(amb, inst.penalty_cost);
  const std::vector<double> cov{4.0, 3.0};
  double stay = 0;
  for (const auto& s : center.samples) {
    stay += (4.0 * std::max(0.0, s[0] - 4.0) + 3.0 * std::max(0.0, s[1] - 3.0)) / 3.0;
  }
  const auto opt = wc.minimize(cov);
  CHECK(opt.value == doctest::Approx(stay).epsilon(1e-12));
  // Lambda must be large enough that no mass moves.
  CHECK(wc.evaluate(cov, opt.lambda).transport == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("proximal step in lambda") {
  const NetworkInstance inst = fixture::t1();
  const auto center = fixture::samples({{3.0, 3.0}, {5.0, 4.0}, {7.0, 2.5}});
  const AmbiguitySet amb = make_ambiguity_set(inst, center, 0.15);
  const ShortfallWorstCase wc(amb, inst.penalty_cost);
  const std::vector<double> cov{4.5, 3.5};
  for (double center_l : {0.0, 0.5, 2.0, 6.0}) {
    for (double eta : {0.05, 1.0, 10.0}) {
      const double got = wc.proximal_point(cov, center_l, eta, 1.0);
      const double ref = oracle::ternary_search(
          [&](double l) {
            return wc.evaluate(cov, l).value + (l - center_l) * (l - center_l) / (2 * eta);
          },
          0.0, 50.0);
      CAPTURE(center_l);
      CAPTURE(eta);
      CHECK(got == doctest::Approx(ref).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("grid oracle brackets the dual value under the max norm") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    AmbiguitySet amb = box_set({0.0, 0.0}, {1.0, 1.0}, {{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}},
                               0.05 + 0.2 * u(rng));
    amb.ground_norm = GroundNorm::Linf;
    PiecewiseAffineLoss loss;
    for (int k = 0; k < 2; ++k) loss.pieces.push_back(AffinePiece{{2 * u(rng) - 1, 2 * u(rng) - 1}, {u(rng), {}}});
    const double dual = dro_value(loss, amb);
    const OracleResult o = worst_case_oracle(loss, amb, 0.01);
    CAPTURE(t);
    CHECK(o.gap > 0.0);
    CHECK(o.value <= dual + 1e-9);
    CHECK(dual <= o.value + o.gap + 1e-9);
  }
}
