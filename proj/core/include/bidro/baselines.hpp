#pragma once

// Comparison methods on the same instance: deterministic (mean demand),
// sample average approximation, and box-robust. All three keep the
// follower's optimal response; they differ only in how demand uncertainty
// enters the leader's objective.

#include <string>

#include "bidro/bilevel.hpp"
#include "bidro/problem.hpp"

namespace bidro {

enum class BaselineKind { Deterministic, StochasticSAA, RobustBox };

const char* to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& text);

struct BaselineResult {
  BaselineKind kind = BaselineKind::Deterministic;
  LeaderDecision leader;
  double objective = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

enum class SaaMethod {
  Auto,        // extensive form when small, decomposition otherwise
  Extensive,   // one LP with a copy of the follower per sample
  Decomposed,  // the bi-level solver with a zero radius
};

// Solver settings that close the relative gap to 1e-10.
SolverConfig reference_config();

// `config` drives the decomposed path only.
BaselineResult solve_saa(const NetworkInstance& inst, const EmpiricalDistribution& samples,
                         SaaMethod method = SaaMethod::Auto,
                         const SolverConfig& config = reference_config());

// Single-scenario program at the nominal demand.
BaselineResult solve_deterministic(const NetworkInstance& inst, const Demand& nominal);

// Per-node intervals [center - radius, center + radius].
struct DemandIntervals {
  std::vector<double> center, radius;
  void validate() const;
};

// Centre at the sample mean, radius equal to the per-node sample range.
DemandIntervals empirical_intervals(const EmpiricalDistribution& samples);

// Worst case over the box. The cost is nondecreasing in every demand
// component, so this is the program at the upper corner.
BaselineResult solve_robust_box(const NetworkInstance& inst, const DemandIntervals& intervals);

}  // namespace bidro
