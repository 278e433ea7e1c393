#include "bidro/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bidro/errors.hpp"
#include "bidro/kkt.hpp"

namespace bidro {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// Rows of the extensive form above which the decomposition is used.
constexpr std::size_t kExtensiveRowLimit = 400;

BaselineResult extensive_form(const NetworkInstance& inst, const EmpiricalDistribution& samples) {
  const std::size_t n = inst.nodes();
  const std::size_t m = inst.arc_count();
  const double w = samples.weight();
  LpBuilder b;
  std::vector<int> x, y;
  for (std::size_t i = 0; i < n; ++i) x.push_back(b.add_column(0.0, inst.storage_cap[i], inst.inventory_cost[i]));
  for (std::size_t a = 0; a < m; ++a) y.push_back(b.add_column(0.0, inst.transport_cap[a], inst.transport_cost[a]));

  for (const Demand& d : samples.samples) {
    // shortage_i >= d_i - coverage_i
    for (std::size_t i = 0; i < n; ++i) {
      const int e = b.add_column(0.0, kInf, w * inst.penalty_cost[i]);
      std::vector<Term> row{{e, 1.0}, {x[i], 1.0}};
      for (std::size_t a = 0; a < m; ++a) {
        if (inst.arcs[a].tail == static_cast<int>(i)) row.emplace_back(y[a], 1.0);
      }
      b.add_row(std::move(row), RowSense::GreaterEqual, d[i]);
    }
    // Follower copy. Leader and follower minimize the same cost here, so the
    // follower's optimality needs no extra conditions.
    const FollowerLp f = build_follower_lp(inst, d, x);
    std::vector<int> z;
    for (std::size_t j = 0; j < f.vars(); ++j) z.push_back(b.add_column(0.0, f.upper[j], w * f.cost[j]));
    for (std::size_t r = 0; r < f.rows.size(); ++r) {
      std::vector<Term> row;
      for (const auto& [col, coef] : f.rows[r]) row.emplace_back(z[static_cast<std::size_t>(col)], coef);
      for (const auto& [col, coef] : f.rhs[r].terms) row.emplace_back(col, -coef);
      b.add_row(std::move(row), RowSense::GreaterEqual, f.rhs[r].constant);
    }
  }
  const LpSolution sol = solve_lp(b.build(), 1e-9);
  if (!sol.optimal()) {
    throw SolverError(std::string("extensive-form LP ended with status ") + to_string(sol.status));
  }
  BaselineResult r;
  r.kind = BaselineKind::StochasticSAA;
  for (int c : x) r.leader.inventory.push_back(std::clamp(sol.primal[static_cast<std::size_t>(c)], 0.0, kInf));
  for (int c : y) r.leader.shipment.push_back(std::clamp(sol.primal[static_cast<std::size_t>(c)], 0.0, kInf));
  r.objective = sol.objective;
  r.iterations = sol.iterations;
  return r;
}

}  // namespace

const char* to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Deterministic: return "det";
    case BaselineKind::StochasticSAA: return "sp";
    case BaselineKind::RobustBox: return "ro";
  }
  return "?";
}

BaselineKind parse_baseline_kind(const std::string& text) {
  if (text == "det") return BaselineKind::Deterministic;
  if (text == "sp" || text == "saa") return BaselineKind::StochasticSAA;
  if (text == "ro") return BaselineKind::RobustBox;
  throw ValidationError("unknown baseline kind '" + text + "' (expected det, sp or ro)");
}

SolverConfig reference_config() {
  SolverConfig cfg;
  cfg.tolerance = 1e-10;
  return cfg;
}

BaselineResult solve_saa(const NetworkInstance& inst, const EmpiricalDistribution& samples,
                         SaaMethod method, const SolverConfig& config) {
  inst.validate();
  samples.validate();
  require(samples.dimension() == inst.nodes(), "sample dimension differs from the node count");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t rows = samples.size() * 2 * inst.nodes();
  if (method == SaaMethod::Auto) {
    method = rows <= kExtensiveRowLimit ? SaaMethod::Extensive : SaaMethod::Decomposed;
  }
  BaselineResult r;
  if (method == SaaMethod::Extensive) {
    r = extensive_form(inst, samples);
  } else {
    const AmbiguitySet amb = make_ambiguity_set(inst, samples, 0.0);
    const SolverReport rep = solve(inst, amb, config);
    r.leader = rep.leader;
    r.objective = rep.objective;
    r.iterations = rep.iterations;
  }
  r.kind = BaselineKind::StochasticSAA;
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

BaselineResult solve_deterministic(const NetworkInstance& inst, const Demand& nominal) {
  BaselineResult r = solve_saa(inst, EmpiricalDistribution{{nominal}}, SaaMethod::Extensive);
  r.kind = BaselineKind::Deterministic;
  return r;
}

void DemandIntervals::validate() const {
  require(center.size() == radius.size(), "interval centre and radius differ in length");
  for (double r : radius) require(std::isfinite(r) && r >= 0.0, "interval radius must be >= 0");
}

DemandIntervals empirical_intervals(const EmpiricalDistribution& samples) {
  samples.validate();
  DemandIntervals iv;
  iv.center = samples.mean();
  iv.radius.assign(samples.dimension(), 0.0);
  for (std::size_t i = 0; i < samples.dimension(); ++i) {
    double lo = kInf, hi = -kInf;
    for (const Demand& d : samples.samples) {
      lo = std::min(lo, d[i]);
      hi = std::max(hi, d[i]);
    }
    iv.radius[i] = hi - lo;
  }
  return iv;
}

BaselineResult solve_robust_box(const NetworkInstance& inst, const DemandIntervals& intervals) {
  intervals.validate();
  require(intervals.center.size() == inst.nodes(), "interval dimension differs from the node count");
  Demand corner(inst.nodes());
  for (std::size_t i = 0; i < inst.nodes(); ++i) {
    corner[i] = std::max(0.0, intervals.center[i] + intervals.radius[i]);
  }
  BaselineResult r = solve_saa(inst, EmpiricalDistribution{{corner}}, SaaMethod::Extensive);
  r.kind = BaselineKind::RobustBox;
  return r;
}

}  // namespace bidro
