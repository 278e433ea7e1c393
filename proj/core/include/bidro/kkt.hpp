#pragma once

// Follower linear programs and their optimality systems.
//
// The follower solves   min cost'z  s.t.  rows z >= rhs(leader),  0 <= z <= upper.
// Replacing it by stationarity, feasibility and complementarity turns the
// bi-level program into a single-level program with complementarity pairs
// (an MPEC). Two ways of solving those are provided: exact depth-first
// enumeration of the dichotomies, and an active-set relaxation path driven
// by a threshold tau.

#include <span>
#include <string>
#include <vector>

#include "bidro/lp.hpp"
#include "bidro/problem.hpp"
#include "bidro/wasserstein.hpp"

namespace bidro {

struct FollowerLp {
  std::vector<double> cost;
  std::vector<double> upper;              // kInf for no bound
  std::vector<std::vector<Term>> rows;    // over follower variables
  std::vector<AffineForm> rhs;            // over leader columns

  std::size_t vars() const { return cost.size(); }
  // Follower program with the leader fixed at `leader_columns`.
  LinearProgram to_lp(std::span<const double> leader_columns) const;
  void validate() const;
};

// Network follower for one demand realization. Variables are the node
// allocations z_i followed by arc flows; row i reads
//   z_i + inflow_i - outflow_i >= d_i - x_i
// with x_i the builder column inventory_cols[i]. Allocations are capped at
// max(support_hi_i, d_i), so the program is always feasible.
FollowerLp build_follower_lp(const NetworkInstance& inst, std::span<const double> demand,
                             std::span<const int> inventory_cols);

struct FollowerSolution {
  FollowerDecision decision;
  double value = 0.0;
  std::vector<double> row_duals;  // >= 0, one per node; subgradient of value in -x
  std::vector<double> multipliers;  // KKT multipliers: rows, lower, upper
  double primal_residual = 0.0;
};

FollowerSolution solve_follower(const NetworkInstance& inst, std::span<const double> inventory,
                                std::span<const double> demand);

// Realized total cost of a leader plan once demand is observed: first-stage
// cost, shortfall penalty, and the re-optimized follower cost.
double realized_cost(const NetworkInstance& inst, const LeaderDecision& x,
                     std::span<const double> demand);

struct ComplementarityPair {
  int first = -1;   // usually the multiplier
  int second = -1;  // usually the slack
};

// KKT conditions of a FollowerLp appended to a builder:
//   cost_j - sum_r G_rj mu_r - mu_lo_j + mu_up_j = 0,
//   G z - s = rhs, z + u = upper, all of mu, s, u >= 0,
// and the pairs (mu_r, s_r), (mu_lo_j, z_j), (mu_up_j, u_j).
struct KktSystem {
  std::vector<int> z;
  std::vector<int> row_mu, row_slack;
  std::vector<int> lower_mu;
  std::vector<int> upper_mu, upper_slack;  // -1 where the bound is infinite
  std::vector<ComplementarityPair> pairs;

  // Multipliers in (rows, lower, upper) order, read from a solution.
  std::vector<double> multipliers(std::span<const double> values) const;
};

KktSystem build_kkt(LpBuilder& builder, const FollowerLp& follower);

struct MpecProgram {
  LpBuilder builder;  // everything except complementarity
  std::vector<ComplementarityPair> pairs;
  double big_m = 0.0;  // bound used by the relaxation; 0 disables it
};

// 10 * (largest cost coefficient) * (largest capacity or support bound).
double default_big_m(const NetworkInstance& inst);

struct MpecSolution {
  std::vector<double> values;
  double objective = 0.0;
  double relaxation_bound = -kInf;  // objective without complementarity
  // Best objective among points within tau of complementarity; a lower
  // bound on the MPEC optimum. Equals `objective` for enumeration.
  double lower_bound = -kInf;
  double complementarity = 0.0;     // max over pairs of min(first, second)
  double tau = 0.0;
  int lp_solves = 0;
  int nodes = 0;
  std::vector<double> stage_residuals;
};

// Max over pairs of min(values[first], values[second]).
double complementarity_residual(std::span<const ComplementarityPair> pairs,
                                std::span<const double> values);

// Exact global optimum by depth-first branch and bound over the dichotomies.
// Throws ValidationError when the program has more than `limit` pairs and
// SolverError when every branch is infeasible.
MpecSolution enumerate_complementarity(const MpecProgram& mpec, int limit = 20);

struct RelaxSchedule {
  double tau0 = 1.0;
  double decay = 0.1;
  double tau_min = 1e-6;
  bool polish = true;  // finish by fixing one side of every remaining pair
  int node_limit = 200000;
};

// Relaxation path. Undecided pairs are modelled with a continuous switch
//   first <= M w,  second <= M (1 - w).
// For each tau of the schedule a depth-first search fixes pairs whose
// min(first, second) exceeds tau until none does; each stage returns the best
// such point. Throws SolverError if
// a pair value exceeds big_m / 2 (the big-M constant was too small).
MpecSolution relax_complementarity(const MpecProgram& mpec, const RelaxSchedule& schedule = {});

// The LP of one stage: pairs in `fix_first` / `fix_second` have that side
// fixed at zero, all other pairs get the big-M switch.
LinearProgram relaxation_stage(const MpecProgram& mpec, const std::vector<char>& fix_first,
                               const std::vector<char>& fix_second);

}  // namespace bidro
