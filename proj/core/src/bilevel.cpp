#include "bidro/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bidro/errors.hpp"
#include "bidro/wasserstein.hpp"

namespace bidro {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct SampleEval {
  double mean_value = 0.0;
  double infeasibility = 0.0;
  FollowerCut cut;
  std::vector<double> multipliers;
  std::vector<FollowerDecision> decisions;
};

SampleEval evaluate_followers(const NetworkInstance& inst, const AmbiguitySet& amb,
                              std::span<const double> inventory) {
  const std::size_t n = inst.nodes();
  const double w = amb.center.weight();
  SampleEval ev;
  ev.cut.x_coef.assign(n, 0.0);
  for (const Demand& d : amb.center.samples) {
    FollowerSolution f = solve_follower(inst, inventory, d);
    ev.mean_value += w * f.value;
    ev.infeasibility = std::max(ev.infeasibility, f.primal_residual);
    // V_s(x') >= V_s(x) - pi_s . (x' - x)
    ev.cut.constant += w * f.value;
    for (std::size_t i = 0; i < n; ++i) {
      ev.cut.constant += w * f.row_duals[i] * inventory[i];
      ev.cut.x_coef[i] -= w * f.row_duals[i];
    }
    ev.multipliers.insert(ev.multipliers.end(), f.multipliers.begin(), f.multipliers.end());
    ev.decisions.push_back(std::move(f.decision));
  }
  return ev;
}

bool same_cut(const PenaltyCut& a, const PenaltyCut& b) {
  auto close = [](double u, double v) { return std::abs(u - v) <= 1e-12 * (1.0 + std::abs(u)); };
  return a.node == b.node && close(a.constant, b.constant) && close(a.cov_coef, b.cov_coef) &&
         close(a.lambda_coef, b.lambda_coef);
}

bool same_cut(const FollowerCut& a, const FollowerCut& b) {
  auto close = [](double u, double v) { return std::abs(u - v) <= 1e-12 * (1.0 + std::abs(u)); };
  if (!close(a.constant, b.constant)) return false;
  for (std::size_t i = 0; i < a.x_coef.size(); ++i) {
    if (!close(a.x_coef[i], b.x_coef[i])) return false;
  }
  return true;
}

// Removes cuts idle for `limit` rounds together with their basis status.
template <class Cut>
void drop_stale(std::vector<Cut>& cuts, std::vector<VarStatus>& status, int limit) {
  std::size_t keep = 0;
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    if (cuts[k].inactive >= limit) continue;
    if (keep != k) {
      cuts[keep] = std::move(cuts[k]);
      status[keep] = status[k];
    }
    ++keep;
  }
  cuts.resize(keep);
  status.resize(keep);
}

class Solver {
 public:
  Solver(const NetworkInstance& inst, const AmbiguitySet& amb, const SolverConfig& cfg)
      : inst_(inst), amb_(amb), cfg_(cfg), wc_(amb, inst.penalty_cost) {
    build_base();
  }

  SolverReport run();

 private:
  struct MasterPoint {
    std::vector<double> values;
    double bound = 0.0;
    double tau = 0.0;
  };

  void build_base();
  MasterPoint solve_master();
  std::vector<double> coverage_of(const std::vector<double>& values) const;
  // With `master` given, only cuts violated at that master point are kept.
  void add_penalty_cuts(std::span<const double> cov, double lambda,
                        const std::vector<double>* master = nullptr);
  void add_follower_cut(FollowerCut cut);
  void age_cuts(const std::vector<double>& values);

  const NetworkInstance& inst_;
  const AmbiguitySet& amb_;
  SolverConfig cfg_;
  ShortfallWorstCase wc_;

  LpBuilder base_;
  std::vector<int> x_, y_, theta_;
  int lambda_ = -1;
  int phi_ = -1;
  std::vector<ComplementarityPair> pairs_;
  std::vector<PenaltyCut> penalty_cuts_;
  std::vector<FollowerCut> follower_cuts_;
  // Last optimal master basis; row statuses are kept parallel to the cut
  // lists so that dropped and added cuts keep the rest of it usable.
  std::vector<VarStatus> column_status_, penalty_status_, follower_status_;
};

void Solver::build_base() {
  const std::size_t n = inst_.nodes();
  const std::size_t m = inst_.arc_count();
  for (std::size_t i = 0; i < n; ++i) {
    x_.push_back(base_.add_column(0.0, inst_.storage_cap[i], inst_.inventory_cost[i]));
  }
  for (std::size_t a = 0; a < m; ++a) {
    y_.push_back(base_.add_column(0.0, inst_.transport_cap[a], inst_.transport_cost[a]));
  }
  lambda_ = base_.add_column(0.0, std::max(wc_.lambda_cap(), 0.0), amb_.radius);
  for (std::size_t i = 0; i < n; ++i) theta_.push_back(base_.add_column(0.0, kInf, 1.0));

  if (cfg_.strategy == FollowerStrategy::Decompose) {
    phi_ = base_.add_column(0.0, kInf, 1.0);
    return;
  }
  const double w = amb_.center.weight();
  for (const Demand& d : amb_.center.samples) {
    const FollowerLp f = build_follower_lp(inst_, d, x_);
    const KktSystem k = build_kkt(base_, f);
    for (std::size_t j = 0; j < f.vars(); ++j) base_.add_cost(k.z[j], w * f.cost[j]);
    pairs_.insert(pairs_.end(), k.pairs.begin(), k.pairs.end());
  }
}

std::vector<double> Solver::coverage_of(const std::vector<double>& values) const {
  LeaderDecision x;
  for (int c : x_) x.inventory.push_back(values[static_cast<std::size_t>(c)]);
  for (int c : y_) x.shipment.push_back(values[static_cast<std::size_t>(c)]);
  return coverage(inst_, x);
}

Solver::MasterPoint Solver::solve_master() {
  LpBuilder b = base_;
  for (const PenaltyCut& c : penalty_cuts_) {
    std::vector<Term> row{{theta_[static_cast<std::size_t>(c.node)], 1.0},
                          {x_[static_cast<std::size_t>(c.node)], c.cov_coef}};
    for (std::size_t a = 0; a < inst_.arc_count(); ++a) {
      if (inst_.arcs[a].tail == c.node) row.emplace_back(y_[a], c.cov_coef);
    }
    row.emplace_back(lambda_, c.lambda_coef);
    b.add_row(std::move(row), RowSense::GreaterEqual, c.constant);
  }
  for (const FollowerCut& c : follower_cuts_) {
    std::vector<Term> row{{phi_, 1.0}};
    for (std::size_t i = 0; i < x_.size(); ++i) row.emplace_back(x_[i], -c.x_coef[i]);
    b.add_row(std::move(row), RowSense::GreaterEqual, c.constant);
  }

  MasterPoint out;
  if (cfg_.strategy == FollowerStrategy::Decompose) {
    const LinearProgram lp = b.build();
    LpOptions opt;
    opt.feas_tol = 1e-9;
    LpBasis warm;
    if (!column_status_.empty()) {
      warm.columns = column_status_;
      warm.rows.assign(static_cast<std::size_t>(base_.rows()), VarStatus::Basic);
      warm.rows.insert(warm.rows.end(), penalty_status_.begin(), penalty_status_.end());
      warm.rows.insert(warm.rows.end(), follower_status_.begin(), follower_status_.end());
    }
    const LpSolution sol = solve_lp(lp, opt, warm);
    if (!sol.optimal()) {
      std::ostringstream dump;
      write_lp_text(dump, lp);
      throw SolverError(std::string("master LP ended with status ") + to_string(sol.status) +
                            (sol.diagnostics.empty() ? "" : " (" + sol.diagnostics + ")"),
                        dump.str());
    }
    out.values = sol.primal;
    out.bound = sol.objective;
    column_status_ = sol.basis.columns;
    const auto cut_rows = sol.basis.rows.begin() + base_.rows();
    penalty_status_.assign(cut_rows, cut_rows + static_cast<std::ptrdiff_t>(penalty_cuts_.size()));
    follower_status_.assign(cut_rows + static_cast<std::ptrdiff_t>(penalty_cuts_.size()),
                            sol.basis.rows.end());
    return out;
  }
  MpecProgram mpec{std::move(b), pairs_, default_big_m(inst_)};
  if (cfg_.strategy == FollowerStrategy::Enumerate) {
    MpecSolution s = enumerate_complementarity(mpec, cfg_.enumerate_limit);
    out.values = std::move(s.values);
    out.bound = s.objective;
  } else {
    MpecSolution s = relax_complementarity(mpec, cfg_.relax);
    out.values = std::move(s.values);
    out.bound = s.lower_bound;
    out.tau = s.tau;
  }
  return out;
}

void Solver::add_penalty_cuts(std::span<const double> cov, double lambda,
                              const std::vector<double>* master) {
  const ShortfallWorstCase::Evaluation ev = wc_.evaluate(cov, lambda);
  std::vector<double> master_cov;
  double master_lambda = 0.0;
  if (master) {
    master_cov = coverage_of(*master);
    master_lambda = (*master)[static_cast<std::size_t>(lambda_)];
  }
  for (std::size_t j = 0; j < inst_.nodes(); ++j) {
    PenaltyCut cut{static_cast<int>(j), ev.cut_const[j], ev.cut_cov[j], ev.cut_lambda[j], 0};
    if (master) {
      const double theta = (*master)[static_cast<std::size_t>(theta_[j])];
      const double value = cut.constant - cut.cov_coef * master_cov[j] - cut.lambda_coef * master_lambda;
      if (value <= theta + 1e-9 * (1.0 + std::abs(theta))) continue;
    }
    const bool dup = std::any_of(penalty_cuts_.begin(), penalty_cuts_.end(),
                                 [&](const PenaltyCut& c) { return same_cut(c, cut); });
    if (!dup) {
      penalty_cuts_.push_back(cut);
      penalty_status_.push_back(VarStatus::Basic);
    }
  }
}

void Solver::add_follower_cut(FollowerCut cut) {
  if (phi_ < 0) return;
  const bool dup = std::any_of(follower_cuts_.begin(), follower_cuts_.end(),
                               [&](const FollowerCut& c) { return same_cut(c, cut); });
  if (!dup) {
    follower_cuts_.push_back(std::move(cut));
    follower_status_.push_back(VarStatus::Basic);
  }
}

void Solver::age_cuts(const std::vector<double>& values) {
  const std::vector<double> cov = coverage_of(values);
  const double lam = values[static_cast<std::size_t>(lambda_)];
  for (PenaltyCut& c : penalty_cuts_) {
    const double theta = values[static_cast<std::size_t>(theta_[static_cast<std::size_t>(c.node)])];
    const double rhs = c.constant - c.cov_coef * cov[static_cast<std::size_t>(c.node)] - c.lambda_coef * lam;
    c.inactive = theta - rhs > 1e-9 * (1.0 + std::abs(theta)) ? c.inactive + 1 : 0;
  }
  if (phi_ >= 0) {
    const double phi = values[static_cast<std::size_t>(phi_)];
    for (FollowerCut& c : follower_cuts_) {
      double rhs = c.constant;
      for (std::size_t i = 0; i < x_.size(); ++i) rhs += c.x_coef[i] * values[static_cast<std::size_t>(x_[i])];
      c.inactive = phi - rhs > 1e-9 * (1.0 + std::abs(phi)) ? c.inactive + 1 : 0;
    }
  }
  const int limit = cfg_.cut_drop_after;
  if (limit <= 0) return;
  drop_stale(penalty_cuts_, penalty_status_, limit);
  drop_stale(follower_cuts_, follower_status_, limit);
}

SolverReport Solver::run() {
  const auto start = Clock::now();
  const std::size_t n = inst_.nodes();
  const double cap = wc_.lambda_cap() > 0.0 ? wc_.lambda_cap() : 1.0;
  const double phi_scale = std::max(amb_.radius, 0.01);
  double mu_scale = 1.0;
  for (double p : inst_.penalty_cost) mu_scale = std::max(mu_scale, p);

  SolverReport report;

  // Cold start at the zero plan.
  LeaderDecision best = LeaderDecision::zeros(inst_);
  std::vector<double> cov0(n, 0.0);
  const auto opt0 = wc_.minimize(cov0);
  SampleEval f0 = evaluate_followers(inst_, amb_, best.inventory);
  double best_upper = opt0.value + f0.mean_value;
  double best_lambda = opt0.lambda;
  double best_lower = -kInf;
  add_penalty_cuts(cov0, 0.0);
  add_penalty_cuts(cov0, opt0.lambda);
  add_follower_cut(f0.cut);

  double lambda = 0.0;
  std::vector<double> mu(f0.multipliers.size(), 0.0);

  for (int t = 1; t <= cfg_.max_iters; ++t) {
    const double eta =
        cfg_.schedule == StepSchedule::Constant ? cfg_.eta0 : cfg_.eta0 / std::sqrt(double(t));

    const MasterPoint master = solve_master();
    best_lower = std::max(best_lower, master.bound);
    age_cuts(master.values);

    LeaderDecision x;
    for (int c : x_) x.inventory.push_back(std::clamp(master.values[static_cast<std::size_t>(c)], 0.0, kInf));
    for (int c : y_) x.shipment.push_back(std::clamp(master.values[static_cast<std::size_t>(c)], 0.0, kInf));
    for (std::size_t i = 0; i < n; ++i) x.inventory[i] = std::min(x.inventory[i], inst_.storage_cap[i]);
    for (std::size_t a = 0; a < inst_.arc_count(); ++a) {
      x.shipment[a] = std::min(x.shipment[a], inst_.transport_cap[a]);
    }
    const std::vector<double> cov = coverage(inst_, x);
    const double lambda_master = master.values[static_cast<std::size_t>(lambda_)];

    // Supremum evaluation at the new plan.
    const auto opt = wc_.minimize(cov);
    SampleEval fe = evaluate_followers(inst_, amb_, x.inventory);
    const double upper = first_stage_cost(inst_, x) + opt.value + fe.mean_value;
    if (upper < best_upper) {
      best_upper = upper;
      best = x;
      best_lambda = opt.lambda;
    }
    add_penalty_cuts(cov, lambda_master, &master.values);
    add_penalty_cuts(cov, opt.lambda, &master.values);
    add_follower_cut(fe.cut);

    // Proximal dual step in lambda / cap, Phi scaled by cap * max(radius, 0.01).
    double next_lambda;
    if (cfg_.dual_step == DualStep::Descent) {
      next_lambda = wc_.proximal_point(cov, lambda, eta, cap / phi_scale);
    } else {
      const double grad = wc_.slope(cov, lambda) / phi_scale;
      const std::vector<double> step = solve_box_qp_prox(std::vector<double>{lambda / cap},
                                                         std::vector<double>{-grad}, eta,
                                                         std::vector<double>{0.0});
      next_lambda = step[0] * cap;
    }
    next_lambda = std::min(next_lambda, cap);
    add_penalty_cuts(cov, next_lambda, &master.values);

    // mu <- argmin 1/2 |mu - mu_hat|^2 + 1/(2 eta) |mu - mu_t|^2
    double dual_sq = std::pow((next_lambda - lambda) / cap, 2);
    double mu_sq = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double next = std::max(0.0, (mu[k] + eta * fe.multipliers[k]) / (1.0 + eta));
      dual_sq += std::pow((next - mu[k]) / mu_scale, 2);
      mu[k] = next;
      mu_sq += next * next;
    }
    lambda = next_lambda;

    const double gap = std::max(0.0, best_upper - best_lower) / std::max(1.0, std::abs(best_upper));
    IterationRecord rec;
    rec.iter = t;
    rec.upper = best_upper;
    rec.lower = best_lower;
    rec.primal_res = std::max(gap, fe.infeasibility);
    rec.dual_res = std::sqrt(dual_sq) / eta;
    rec.lambda = lambda;
    rec.mu_norm = std::sqrt(mu_sq);
    rec.tau = master.tau;
    rec.ms = elapsed_ms(start);
    report.trajectory.push_back(rec);
    if (cfg_.on_iteration) cfg_.on_iteration(rec);
    report.iterations = t;

    if (std::max(rec.primal_res, rec.dual_res) < cfg_.tolerance) {
      report.termination = Termination::Residuals;
      break;
    }
    if (cfg_.stop_on_gap && gap < cfg_.tolerance) {
      report.termination = Termination::GapClosed;
      break;
    }
  }

  report.leader = best;
  report.objective = best_upper;
  report.lower_bound = best_lower;
  report.lambda = best_lambda;
  report.mu = std::move(mu);
  report.followers = evaluate_followers(inst_, amb_, best.inventory).decisions;
  report.penalty_cuts = penalty_cuts_;
  report.follower_cuts = follower_cuts_;
  report.wall_ms = elapsed_ms(start);
  return report;
}

}  // namespace

const char* to_string(FollowerStrategy s) {
  switch (s) {
    case FollowerStrategy::Enumerate: return "enumerate";
    case FollowerStrategy::Relax: return "relax";
    case FollowerStrategy::Decompose: return "decompose";
  }
  return "?";
}

FollowerStrategy parse_strategy(const std::string& text) {
  if (text == "enumerate") return FollowerStrategy::Enumerate;
  if (text == "relax") return FollowerStrategy::Relax;
  if (text == "decompose") return FollowerStrategy::Decompose;
  throw ValidationError("unknown follower strategy '" + text + "'");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Residuals: return "residuals";
    case Termination::GapClosed: return "gap";
    case Termination::IterationLimit: return "iteration-limit";
  }
  return "?";
}

void SolverConfig::validate() const {
  require(tolerance > 0.0, "tolerance must be > 0");
  require(max_iters >= 1, "max_iters must be >= 1");
  require(eta0 > 0.0 && std::isfinite(eta0), "step size eta0 must be > 0");
  require(cut_drop_after >= 0, "cut_drop_after must be >= 0");
}

PlanValue evaluate_plan(const NetworkInstance& inst, const AmbiguitySet& amb,
                        const LeaderDecision& x) {
  check_decision(inst, x);
  const ShortfallWorstCase wc(amb, inst.penalty_cost);
  const auto opt = wc.minimize(coverage(inst, x));
  PlanValue v;
  v.first_stage = first_stage_cost(inst, x);
  v.worst_penalty = opt.value;
  v.lambda = opt.lambda;
  v.follower = evaluate_followers(inst, amb, x.inventory).mean_value;
  v.total = v.first_stage + v.worst_penalty + v.follower;
  return v;
}

SolverReport solve(const NetworkInstance& inst, const AmbiguitySet& amb,
                   const SolverConfig& config) {
  inst.validate();
  amb.validate();
  config.validate();
  require(amb.dimension() == inst.nodes(), "ambiguity set dimension differs from the node count");
  if (config.strategy == FollowerStrategy::Enumerate) {
    // rows, lower bounds and upper bounds of every sample's follower
    const std::size_t pairs =
        amb.center.samples.size() * (inst.nodes() + 2 * (inst.nodes() + inst.arc_count()));
    require(pairs <= static_cast<std::size_t>(config.enumerate_limit),
            "enumeration would branch on " + std::to_string(pairs) + " complementarity pairs (limit " +
                std::to_string(config.enumerate_limit) + ")");
  }
  // Inputs are valid from here on; a data error now means the numbers broke
  // down inside the solve (overflow to inf, for instance).
  try {
    Solver solver(inst, amb, config);
    return solver.run();
  } catch (const ValidationError& err) {
    throw SolverError(std::string("numerical failure during the solve: ") + err.what());
  }
}

void write_trajectory_csv(std::ostream& out, const SolverReport& report) {
  out << "iter,upper,lower,primal_res,dual_res,lambda,mu_norm,tau,ms\n";
  out << std::setprecision(12);
  for (const IterationRecord& r : report.trajectory) {
    out << r.iter << ',' << r.upper << ',' << r.lower << ',' << r.primal_res << ',' << r.dual_res
        << ',' << r.lambda << ',' << r.mu_norm << ',' << r.tau << ',' << r.ms << '\n';
  }
}

MonolithicResult solve_monolithic(const NetworkInstance& inst, const AmbiguitySet& amb, int limit) {
  inst.validate();
  amb.validate();
  const std::size_t n = inst.nodes();
  const std::size_t m = inst.arc_count();
  require(n <= 10, "monolithic route enumerates 2^n loss pieces; at most 10 nodes");

  LpBuilder b;
  std::vector<int> x, y;
  for (std::size_t i = 0; i < n; ++i) x.push_back(b.add_column(0.0, inst.storage_cap[i], inst.inventory_cost[i]));
  for (std::size_t a = 0; a < m; ++a) y.push_back(b.add_column(0.0, inst.transport_cap[a], inst.transport_cost[a]));

  // sum_j p_j max(0, xi_j - cov_j) as the max over node subsets.
  PiecewiseAffineLoss loss;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    AffinePiece piece;
    piece.slope.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (!(mask >> j & 1)) continue;
      const double p = inst.penalty_cost[j];
      piece.slope[j] = p;
      piece.intercept.terms.emplace_back(x[j], -p);
      for (std::size_t a = 0; a < m; ++a) {
        if (inst.arcs[a].tail == static_cast<int>(j)) piece.intercept.terms.emplace_back(y[a], -p);
      }
    }
    loss.pieces.push_back(std::move(piece));
  }
  build_dro_constraints(b, loss, amb);

  MpecProgram mpec;
  const double w = amb.center.weight();
  for (const Demand& d : amb.center.samples) {
    const FollowerLp f = build_follower_lp(inst, d, x);
    const KktSystem k = build_kkt(b, f);
    for (std::size_t j = 0; j < f.vars(); ++j) b.add_cost(k.z[j], w * f.cost[j]);
    mpec.pairs.insert(mpec.pairs.end(), k.pairs.begin(), k.pairs.end());
  }
  mpec.builder = std::move(b);
  const MpecSolution s = enumerate_complementarity(mpec, limit);

  MonolithicResult out;
  for (int c : x) out.leader.inventory.push_back(s.values[static_cast<std::size_t>(c)]);
  for (int c : y) out.leader.shipment.push_back(s.values[static_cast<std::size_t>(c)]);
  out.objective = s.objective;
  out.lp_solves = s.lp_solves;
  return out;
}

}  // namespace bidro
