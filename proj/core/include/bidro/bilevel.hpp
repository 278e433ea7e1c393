#pragma once

// Bi-level distributionally robust solver.
//
// Outer loop: a cutting-plane master over the leader plan and the Wasserstein
// multiplier lambda, cuts for the worst-case shortfall penalty (exact,
// jointly valid in coverage and lambda) and, with the Decompose strategy,
// optimal-value cuts for the follower. Each iteration evaluates the exact
// worst case at the new plan (upper bound), takes a proximal step on the
// dual state (lambda, mu) and records primal/dual residuals.

#include <chrono>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bidro/kkt.hpp"
#include "bidro/problem.hpp"

namespace bidro {

enum class FollowerStrategy {
  Enumerate,  // KKT rows in the master, complementarity by branch and bound
  Relax,      // KKT rows in the master, complementarity by the tau path
  Decompose,  // follower optimal-value cuts from per-sample LP duals
};

enum class StepSchedule { Constant, InverseSqrt };

// Direction of the lambda step. Descent is the proximal step that minimizes
// the dual function; Ascent is the explicit projected step with the opposite
// sign, kept for experimentation.
enum class DualStep { Descent, Ascent };

const char* to_string(FollowerStrategy s);
FollowerStrategy parse_strategy(const std::string& text);

struct IterationRecord {
  int iter = 0;
  double upper = 0.0;
  double lower = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double lambda = 0.0;
  double mu_norm = 0.0;
  double tau = 0.0;
  double ms = 0.0;  // wall time since the start of the solve
};

struct SolverConfig {
  double tolerance = 1e-5;
  int max_iters = 500;
  double eta0 = 1.0;
  StepSchedule schedule = StepSchedule::Constant;
  DualStep dual_step = DualStep::Descent;
  FollowerStrategy strategy = FollowerStrategy::Decompose;
  RelaxSchedule relax{};
  int enumerate_limit = 20;  // complementarity pairs
  int cut_drop_after = 25;
  // Stop as soon as the relative gap closes; when false only the residual
  // test (or the iteration limit) ends the loop.
  bool stop_on_gap = true;
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
};

enum class Termination { Residuals, GapClosed, IterationLimit };
const char* to_string(Termination t);

// theta_node >= constant - cov_coef * coverage_node - lambda_coef * lambda
struct PenaltyCut {
  int node = 0;
  double constant = 0.0;
  double cov_coef = 0.0;
  double lambda_coef = 0.0;
  int inactive = 0;
};

// phi >= constant + sum_i x_coef_i * x_i
struct FollowerCut {
  double constant = 0.0;
  std::vector<double> x_coef;
  int inactive = 0;
};

struct SolverReport {
  Termination termination = Termination::IterationLimit;
  std::vector<IterationRecord> trajectory;
  LeaderDecision leader;
  std::vector<FollowerDecision> followers;  // one per sample, at `leader`
  double lambda = 0.0;                      // minimizer of the dual function at `leader`
  std::vector<double> mu;                   // final multiplier iterate
  double objective = 0.0;                   // best upper bound
  double lower_bound = -kInf;
  int iterations = 0;
  double wall_ms = 0.0;
  std::vector<PenaltyCut> penalty_cuts;     // retained at termination
  std::vector<FollowerCut> follower_cuts;
};

// Exact objective of a leader plan: first-stage cost, worst-case expected
// shortfall penalty, and the mean follower cost over the samples.
struct PlanValue {
  double total = 0.0;
  double first_stage = 0.0;
  double worst_penalty = 0.0;
  double follower = 0.0;
  double lambda = 0.0;
};

PlanValue evaluate_plan(const NetworkInstance& inst, const AmbiguitySet& amb,
                        const LeaderDecision& x);

SolverReport solve(const NetworkInstance& inst, const AmbiguitySet& amb,
                   const SolverConfig& config = {});

// Trajectory CSV: iter,upper,lower,primal_res,dual_res,lambda,mu_norm,tau,ms
void write_trajectory_csv(std::ostream& out, const SolverReport& report);

struct MonolithicResult {
  LeaderDecision leader;
  double objective = 0.0;
  int lp_solves = 0;
};

// Single-level program (dualized worst case plus per-sample follower KKT)
// solved by complementarity enumeration. Exponential in the node count; for
// small fixtures only.
MonolithicResult solve_monolithic(const NetworkInstance& inst, const AmbiguitySet& amb,
                                  int limit = 20);

}  // namespace bidro
