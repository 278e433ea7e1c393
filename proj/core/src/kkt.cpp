#include "bidro/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bidro/errors.hpp"

namespace bidro {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

constexpr double kComplementarityTol = 1e-7;

}  // namespace

void FollowerLp::validate() const {
  require(upper.size() == vars(), "follower upper bounds dimension mismatch");
  require(rows.size() == rhs.size(), "follower rows and right-hand sides differ in count");
  for (const auto& row : rows) {
    for (const auto& [col, coef] : row) {
      require(col >= 0 && static_cast<std::size_t>(col) < vars(), "follower row column out of range");
      require(std::isfinite(coef), "non-finite follower coefficient");
    }
  }
  for (double u : upper) require(u >= 0.0, "follower upper bounds must be >= 0");
}

LinearProgram FollowerLp::to_lp(std::span<const double> leader_columns) const {
  validate();
  LinearProgram lp(rows.size(), vars());
  lp.objective = cost;
  lp.upper = upper;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [col, coef] : rows[r]) lp.at(r, static_cast<std::size_t>(col)) += coef;
    lp.senses[r] = RowSense::GreaterEqual;
    lp.rhs[r] = rhs[r].evaluate(leader_columns);
  }
  return lp;
}

FollowerLp build_follower_lp(const NetworkInstance& inst, std::span<const double> demand,
                             std::span<const int> inventory_cols) {
  const std::size_t n = inst.nodes();
  const std::size_t m = inst.arc_count();
  require(demand.size() == n, "demand dimension mismatch");
  require(inventory_cols.size() == n, "inventory column count mismatch");

  FollowerLp f;
  f.cost = inst.alloc_cost;
  f.cost.insert(f.cost.end(), inst.flow_cost.begin(), inst.flow_cost.end());
  f.upper.resize(n + m);
  for (std::size_t i = 0; i < n; ++i) {
    const double cap = inst.has_support() ? inst.support_hi[i] : 0.0;
    f.upper[i] = std::max({cap, demand[i], 0.0});
  }
  for (std::size_t a = 0; a < m; ++a) f.upper[n + a] = inst.transport_cap[a];

  f.rows.resize(n);
  f.rhs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.rows[i].emplace_back(static_cast<int>(i), 1.0);
    f.rhs[i].constant = demand[i];
    f.rhs[i].terms.emplace_back(inventory_cols[i], -1.0);
  }
  for (std::size_t a = 0; a < m; ++a) {
    const int col = static_cast<int>(n + a);
    f.rows[static_cast<std::size_t>(inst.arcs[a].head)].emplace_back(col, 1.0);
    f.rows[static_cast<std::size_t>(inst.arcs[a].tail)].emplace_back(col, -1.0);
  }
  return f;
}

FollowerSolution solve_follower(const NetworkInstance& inst, std::span<const double> inventory,
                                std::span<const double> demand) {
  const std::size_t n = inst.nodes();
  require(inventory.size() == n, "inventory dimension mismatch");
  std::vector<int> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = static_cast<int>(i);
  const FollowerLp f = build_follower_lp(inst, demand, cols);
  const LinearProgram lp = f.to_lp(inventory);
  const LpSolution sol = solve_lp(lp, 1e-9);
  if (!sol.optimal()) {
    std::ostringstream dump;
    write_lp_text(dump, lp);
    throw SolverError(std::string("follower LP ended with status ") + to_string(sol.status),
                      dump.str());
  }

  FollowerSolution out;
  out.decision.allocation.assign(sol.primal.begin(), sol.primal.begin() + static_cast<long>(n));
  out.decision.flow.assign(sol.primal.begin() + static_cast<long>(n), sol.primal.end());
  out.value = sol.objective;
  out.row_duals.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.row_duals[i] = std::max(0.0, sol.duals[i]);
  // Bound multipliers from reduced costs: d_j = mu_lo_j - mu_up_j.
  out.multipliers = out.row_duals;
  std::vector<double> up(f.vars(), 0.0);
  for (std::size_t j = 0; j < f.vars(); ++j) {
    out.multipliers.push_back(std::max(0.0, sol.reduced_costs[j]));
    up[j] = std::max(0.0, -sol.reduced_costs[j]);
  }
  for (std::size_t j = 0; j < f.vars(); ++j) {
    if (std::isfinite(f.upper[j])) out.multipliers.push_back(up[j]);
  }
  out.primal_residual = primal_residual(lp, sol.primal);
  return out;
}

double realized_cost(const NetworkInstance& inst, const LeaderDecision& x,
                     std::span<const double> demand) {
  check_decision(inst, x);
  const FollowerSolution f = solve_follower(inst, x.inventory, demand);
  const std::vector<double> cov = coverage(inst, x);
  double cost = first_stage_cost(inst, x) + f.value;
  for (std::size_t i = 0; i < inst.nodes(); ++i) {
    cost += inst.penalty_cost[i] * std::max(0.0, demand[i] - cov[i]);
  }
  return cost;
}

std::vector<double> KktSystem::multipliers(std::span<const double> values) const {
  std::vector<double> out;
  for (int c : row_mu) out.push_back(values[static_cast<std::size_t>(c)]);
  for (int c : lower_mu) out.push_back(values[static_cast<std::size_t>(c)]);
  for (int c : upper_mu) {
    if (c >= 0) out.push_back(values[static_cast<std::size_t>(c)]);
  }
  return out;
}

KktSystem build_kkt(LpBuilder& builder, const FollowerLp& follower) {
  follower.validate();
  const std::size_t nv = follower.vars();
  const std::size_t nr = follower.rows.size();
  KktSystem k;
  for (std::size_t j = 0; j < nv; ++j) k.z.push_back(builder.add_column(0.0, follower.upper[j], 0.0));

  // Primal feasibility with explicit slacks.
  for (std::size_t r = 0; r < nr; ++r) {
    const int s = builder.add_column(0.0, kInf, 0.0);
    k.row_slack.push_back(s);
    std::vector<Term> row;
    for (const auto& [col, coef] : follower.rows[r]) row.emplace_back(k.z[static_cast<std::size_t>(col)], coef);
    for (const auto& [col, coef] : follower.rhs[r].terms) row.emplace_back(col, -coef);
    row.emplace_back(s, -1.0);
    builder.add_row(std::move(row), RowSense::Equal, follower.rhs[r].constant);
  }
  for (std::size_t j = 0; j < nv; ++j) {
    if (!std::isfinite(follower.upper[j])) {
      k.upper_slack.push_back(-1);
      continue;
    }
    const int u = builder.add_column(0.0, kInf, 0.0);
    k.upper_slack.push_back(u);
    builder.add_row({{k.z[j], 1.0}, {u, 1.0}}, RowSense::Equal, follower.upper[j]);
  }

  // Dual feasibility (stationarity).
  for (std::size_t r = 0; r < nr; ++r) k.row_mu.push_back(builder.add_column(0.0, kInf, 0.0));
  for (std::size_t j = 0; j < nv; ++j) {
    k.lower_mu.push_back(builder.add_column(0.0, kInf, 0.0));
    k.upper_mu.push_back(std::isfinite(follower.upper[j]) ? builder.add_column(0.0, kInf, 0.0) : -1);
  }
  std::vector<std::vector<Term>> stationarity(nv);
  for (std::size_t r = 0; r < nr; ++r) {
    for (const auto& [col, coef] : follower.rows[r]) {
      stationarity[static_cast<std::size_t>(col)].emplace_back(k.row_mu[r], -coef);
    }
  }
  for (std::size_t j = 0; j < nv; ++j) {
    auto& row = stationarity[j];
    row.emplace_back(k.lower_mu[j], -1.0);
    if (k.upper_mu[j] >= 0) row.emplace_back(k.upper_mu[j], 1.0);
    builder.add_row(std::move(row), RowSense::Equal, -follower.cost[j]);
  }

  for (std::size_t r = 0; r < nr; ++r) k.pairs.push_back({k.row_mu[r], k.row_slack[r]});
  for (std::size_t j = 0; j < nv; ++j) k.pairs.push_back({k.lower_mu[j], k.z[j]});
  for (std::size_t j = 0; j < nv; ++j) {
    if (k.upper_mu[j] >= 0) k.pairs.push_back({k.upper_mu[j], k.upper_slack[j]});
  }
  return k;
}

double default_big_m(const NetworkInstance& inst) {
  double cost = 0.0, cap = 0.0;
  for (const auto* v : {&inst.inventory_cost, &inst.penalty_cost, &inst.alloc_cost,
                        &inst.transport_cost, &inst.flow_cost}) {
    for (double e : *v) cost = std::max(cost, e);
  }
  for (const auto* v : {&inst.storage_cap, &inst.transport_cap, &inst.support_hi}) {
    for (double e : *v) cap = std::max(cap, e);
  }
  return 10.0 * std::max(cost, 1.0) * std::max(cap, 1.0);
}

double complementarity_residual(std::span<const ComplementarityPair> pairs,
                                std::span<const double> values) {
  double worst = 0.0;
  for (const auto& p : pairs) {
    worst = std::max(worst, std::min(values[static_cast<std::size_t>(p.first)],
                                     values[static_cast<std::size_t>(p.second)]));
  }
  return worst;
}

MpecSolution enumerate_complementarity(const MpecProgram& mpec, int limit) {
  const int npairs = static_cast<int>(mpec.pairs.size());
  if (npairs > limit) {
    throw ValidationError("complementarity enumeration limit exceeded: " + std::to_string(npairs) +
                          " pairs > limit " + std::to_string(limit));
  }
  const LinearProgram base = mpec.builder.build();
  MpecSolution best;
  best.objective = kInf;

  // Node = per-pair state: 0 free, 1 first fixed to zero, 2 second fixed to zero.
  std::vector<std::vector<char>> stack{std::vector<char>(mpec.pairs.size(), 0)};
  int solves = 0, nodes = 0;
  while (!stack.empty()) {
    std::vector<char> state = std::move(stack.back());
    stack.pop_back();
    ++nodes;
    LinearProgram lp = base;
    for (std::size_t p = 0; p < state.size(); ++p) {
      if (state[p] == 1) lp.upper[static_cast<std::size_t>(mpec.pairs[p].first)] = 0.0;
      if (state[p] == 2) lp.upper[static_cast<std::size_t>(mpec.pairs[p].second)] = 0.0;
    }
    const LpSolution sol = solve_lp(lp, 1e-9);
    ++solves;
    if (nodes == 1 && sol.optimal()) best.relaxation_bound = sol.objective;
    if (!sol.optimal()) {
      if (sol.status == LpStatus::Unbounded) throw SolverError("MPEC relaxation is unbounded");
      continue;
    }
    if (sol.objective >= best.objective - 1e-9 * (1.0 + std::abs(best.objective))) continue;

    int branch = -1;
    double worst = kComplementarityTol;
    for (std::size_t p = 0; p < state.size(); ++p) {
      const double v = std::min(sol.primal[static_cast<std::size_t>(mpec.pairs[p].first)],
                                sol.primal[static_cast<std::size_t>(mpec.pairs[p].second)]);
      if (state[p] == 0 && v > worst) {
        worst = v;
        branch = static_cast<int>(p);
      }
    }
    if (branch < 0) {
      best.values = sol.primal;
      best.objective = sol.objective;
      continue;
    }
    std::vector<char> second = state;
    second[static_cast<std::size_t>(branch)] = 2;
    state[static_cast<std::size_t>(branch)] = 1;
    stack.push_back(std::move(second));
    stack.push_back(std::move(state));
  }
  if (best.values.empty()) throw SolverError("every complementarity branch is infeasible");
  best.complementarity = complementarity_residual(mpec.pairs, best.values);
  best.lower_bound = best.objective;
  best.lp_solves = solves;
  best.nodes = nodes;
  return best;
}

LinearProgram relaxation_stage(const MpecProgram& mpec, const std::vector<char>& fix_first,
                               const std::vector<char>& fix_second) {
  LpBuilder b = mpec.builder;
  for (std::size_t p = 0; p < mpec.pairs.size(); ++p) {
    const auto& pair = mpec.pairs[p];
    if (fix_first[p]) {
      b.set_bounds(pair.first, b.lower(pair.first), 0.0);
    } else if (fix_second[p]) {
      b.set_bounds(pair.second, b.lower(pair.second), 0.0);
    } else if (mpec.big_m > 0.0) {
      const int w = b.add_column(0.0, 1.0, 0.0);
      b.add_row({{pair.first, 1.0}, {w, -mpec.big_m}}, RowSense::LessEqual, 0.0);
      b.add_row({{pair.second, 1.0}, {w, mpec.big_m}}, RowSense::LessEqual, mpec.big_m);
    }
  }
  return b.build();
}

namespace {

struct StageResult {
  bool feasible = false;
  std::vector<double> values;
  double objective = 0.0;
};

StageResult solve_stage(const MpecProgram& mpec, const std::vector<char>& fix_first,
                        const std::vector<char>& fix_second, int& solves) {
  const LinearProgram lp = relaxation_stage(mpec, fix_first, fix_second);
  const LpSolution sol = solve_lp(lp, 1e-9);
  ++solves;
  StageResult r;
  if (!sol.optimal()) return r;
  r.feasible = true;
  r.objective = sol.objective;
  r.values.assign(sol.primal.begin(), sol.primal.begin() + mpec.builder.cols());
  if (mpec.big_m > 0.0) {
    for (const auto& pair : mpec.pairs) {
      const double a = r.values[static_cast<std::size_t>(pair.first)];
      const double b = r.values[static_cast<std::size_t>(pair.second)];
      if (std::max(a, b) > mpec.big_m / 2) {
        std::ostringstream dump;
        write_lp_text(dump, lp);
        throw SolverError("big-M constant too small: pair value " + std::to_string(std::max(a, b)) +
                              " exceeds M/2 = " + std::to_string(mpec.big_m / 2),
                          dump.str());
      }
    }
  }
  return r;
}

}  // namespace

MpecSolution relax_complementarity(const MpecProgram& mpec, const RelaxSchedule& schedule) {
  require(schedule.tau0 > 0.0 && schedule.decay > 0.0 && schedule.decay < 1.0 &&
              schedule.tau_min > 0.0 && schedule.tau_min <= schedule.tau0,
          "relaxation schedule needs 0 < tau_min <= tau0 and 0 < decay < 1");
  const std::size_t np = mpec.pairs.size();
  MpecSolution out;
  int solves = 0, nodes = 0;

  const std::vector<char> none(np, 0);
  StageResult root = solve_stage(mpec, none, none, solves);
  if (!root.feasible) throw SolverError("relaxed MPEC is infeasible");
  out.relaxation_bound = root.objective;

  auto pair_min = [&](const std::vector<double>& v, std::size_t p) {
    return std::min(v[static_cast<std::size_t>(mpec.pairs[p].first)],
                    v[static_cast<std::size_t>(mpec.pairs[p].second)]);
  };

  // One stage: depth-first search over the switch relaxation. A node is
  // accepted once every undecided pair has min(first, second) <= tau;
  // otherwise the worst pair is fixed, the side that is already smaller
  // first. Node LPs bound their subtree, so the stage optimum is global
  // among points within tau of complementarity.
  struct Node {
    std::vector<char> ff, fs;
    StageResult sol;
  };
  StageResult current;
  std::vector<char> cur_ff(np, 0), cur_fs(np, 0);
  for (double tau = schedule.tau0;; tau = std::max(schedule.tau_min, tau * schedule.decay)) {
    StageResult best;
    std::vector<char> best_ff, best_fs;
    std::vector<Node> stack;
    stack.push_back({none, none, root});
    while (!stack.empty()) {
      Node node = std::move(stack.back());
      stack.pop_back();
      if (++nodes > schedule.node_limit) {
        throw SolverError("relaxation path exceeded " + std::to_string(schedule.node_limit) + " nodes");
      }
      if (best.feasible &&
          node.sol.objective >= best.objective - 1e-9 * (1.0 + std::abs(best.objective))) {
        continue;
      }
      int branch = -1;
      double worst = tau;
      for (std::size_t p = 0; p < np; ++p) {
        if (node.ff[p] || node.fs[p]) continue;
        const double v = pair_min(node.sol.values, p);
        if (v > worst) {
          worst = v;
          branch = static_cast<int>(p);
        }
      }
      if (branch < 0) {
        best = std::move(node.sol);
        best_ff = std::move(node.ff);
        best_fs = std::move(node.fs);
        continue;
      }
      const auto& pr = mpec.pairs[static_cast<std::size_t>(branch)];
      const bool first_smaller = node.sol.values[static_cast<std::size_t>(pr.first)] <=
                                 node.sol.values[static_cast<std::size_t>(pr.second)];
      Node a{node.ff, node.fs, {}}, b{node.ff, node.fs, {}};
      a.ff[static_cast<std::size_t>(branch)] = 1;
      b.fs[static_cast<std::size_t>(branch)] = 1;
      if (first_smaller) std::swap(a, b);
      // a is explored second, b first.
      a.sol = solve_stage(mpec, a.ff, a.fs, solves);
      b.sol = solve_stage(mpec, b.ff, b.fs, solves);
      if (a.sol.feasible) stack.push_back(std::move(a));
      if (b.sol.feasible) stack.push_back(std::move(b));
    }
    if (!best.feasible) throw SolverError("relaxation path found no point within tau = " + std::to_string(tau));
    current = std::move(best);
    cur_ff = std::move(best_ff);
    cur_fs = std::move(best_fs);
    out.stage_residuals.push_back(complementarity_residual(mpec.pairs, current.values));
    out.tau = tau;
    out.lower_bound = current.objective;
    if (tau <= schedule.tau_min) break;
  }

  if (schedule.polish) {
    std::vector<char> ff = cur_ff, fs = cur_fs;
    for (std::size_t p = 0; p < np; ++p) {
      if (ff[p] || fs[p]) continue;
      if (current.values[static_cast<std::size_t>(mpec.pairs[p].first)] <=
          current.values[static_cast<std::size_t>(mpec.pairs[p].second)]) {
        ff[p] = 1;
      } else {
        fs[p] = 1;
      }
    }
    StageResult polished = solve_stage(mpec, ff, fs, solves);
    if (polished.feasible) current = std::move(polished);
  }

  out.values = std::move(current.values);
  out.objective = current.objective;
  out.complementarity = complementarity_residual(mpec.pairs, out.values);
  out.lp_solves = solves;
  out.nodes = nodes;
  return out;
}

}  // namespace bidro
