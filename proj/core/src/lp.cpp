#include "bidro/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "bidro/errors.hpp"

namespace bidro {

LinearProgram::LinearProgram(std::size_t rows, std::size_t cols)
    : objective(cols, 0.0),
      matrix(rows * cols, 0.0),
      senses(rows, RowSense::LessEqual),
      rhs(rows, 0.0),
      lower(cols, 0.0),
      upper(cols, kInf) {}

void LinearProgram::validate() const {
  const std::size_t m = rows();
  const std::size_t n = cols();
  if (matrix.size() != m * n || senses.size() != m || lower.size() != n ||
      upper.size() != n) {
    throw ValidationError("linear program: inconsistent dimensions");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) {
      throw ValidationError("linear program: non-finite objective coefficient");
    }
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] ||
        lower[j] == kInf || upper[j] == -kInf) {
      throw ValidationError("linear program: invalid bounds on column " +
                            std::to_string(j));
    }
  }
  for (double v : matrix) {
    if (!std::isfinite(v)) throw ValidationError("linear program: non-finite matrix entry");
  }
  for (double v : rhs) {
    if (!std::isfinite(v)) throw ValidationError("linear program: non-finite right-hand side");
  }
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

namespace {

enum class Outcome { Optimal, Unbounded, IterLimit, Singular };

// Working state of the bounded revised simplex. Columns are ordered
// structurals, then one slack per row, then artificials.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const LpOptions& opt) : lp_(lp), opt_(opt) {
    m_ = lp.rows();
    n_ = lp.cols();
    for (std::size_t j = 0; j < n_; ++j) {
      Column col;
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = lp.at(r, j);
        if (a != 0.0) col.push_back({r, a});
      }
      cols_.push_back(std::move(col));
      lb_.push_back(lp.lower[j]);
      ub_.push_back(lp.upper[j]);
    }
    for (std::size_t r = 0; r < m_; ++r) {
      cols_.push_back({{r, 1.0}});
      switch (lp.senses[r]) {
        case RowSense::LessEqual: lb_.push_back(0.0); ub_.push_back(kInf); break;
        case RowSense::GreaterEqual: lb_.push_back(-kInf); ub_.push_back(0.0); break;
        case RowSense::Equal: lb_.push_back(0.0); ub_.push_back(0.0); break;
      }
    }
  }

  LpSolution run(const LpBasis* warm = nullptr) {
    if (!warm || !warm_basis(*warm)) initial_basis();
    if (!artificials_.empty()) {
      cost_.assign(cols_.size(), 0.0);
      for (std::size_t a : artificials_) cost_[a] = 1.0;
      const Outcome phase1 = iterate();
      if (phase1 == Outcome::Singular) {
        return finish(LpStatus::IterLimit, "numerical breakdown: singular basis in phase 1");
      }
      if (phase1 == Outcome::IterLimit) {
        return finish(LpStatus::IterLimit, "iteration limit in phase 1");
      }
      double infeas = 0.0;
      for (std::size_t a : artificials_) infeas += x_[a];
      if (infeas > opt_.feas_tol) {
        return finish(LpStatus::Infeasible,
                      "phase 1 infeasibility " + std::to_string(infeas));
      }
      for (std::size_t a : artificials_) {
        ub_[a] = 0.0;
        if (!is_basic(a)) x_[a] = 0.0;
      }
    }
    cost_.assign(cols_.size(), 0.0);
    std::copy(lp_.objective.begin(), lp_.objective.end(), cost_.begin());
    bland_ = false;
    const Outcome phase2 = iterate();
    if (phase2 == Outcome::Unbounded) return finish(LpStatus::Unbounded, "");
    if (phase2 == Outcome::Singular) {
      return finish(LpStatus::IterLimit, "numerical breakdown: singular basis in phase 2");
    }
    if (phase2 == Outcome::IterLimit) {
      return finish(LpStatus::IterLimit, "iteration limit in phase 2");
    }
    if (!refactor()) return finish(LpStatus::IterLimit, "numerical breakdown: singular final basis");
    return finish(LpStatus::Optimal, "");
  }

 private:
  using Column = std::vector<std::pair<std::size_t, double>>;

  bool is_basic(std::size_t j) const { return pos_[j] >= 0; }

  void initial_basis() {
    const std::size_t total = cols_.size();
    x_.assign(total, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lb_[j])) x_[j] = lb_[j];
      else if (std::isfinite(ub_[j])) x_[j] = ub_[j];
    }
    std::vector<double> activity(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      if (x_[j] == 0.0) continue;
      for (auto [r, a] : cols_[j]) activity[r] += a * x_[j];
    }
    basis_.assign(m_, 0);
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t s = n_ + r;
      const double want = lp_.rhs[r] - activity[r];
      if (want >= lb_[s] - opt_.feas_tol && want <= ub_[s] + opt_.feas_tol) {
        x_[s] = want;
        basis_[r] = s;
        continue;
      }
      const double clamped = std::clamp(want, lb_[s], ub_[s]);
      x_[s] = clamped;
      const double residual = want - clamped;
      basis_[r] = add_artificial(r, residual);
    }
    pos_.assign(cols_.size(), -1);
    for (std::size_t r = 0; r < m_; ++r) pos_[basis_[r]] = static_cast<int>(r);
    refactor();
  }

  std::size_t add_artificial(std::size_t row, double residual) {
    const std::size_t a = cols_.size();
    cols_.push_back({{row, residual > 0 ? 1.0 : -1.0}});
    lb_.push_back(0.0);
    ub_.push_back(kInf);
    x_.push_back(std::abs(residual));
    artificials_.push_back(a);
    artificial_row_.push_back(row);
    return a;
  }

  static double nonbasic_value(VarStatus st, double lo, double hi) {
    if (st == VarStatus::Upper && std::isfinite(hi)) return hi;
    if (std::isfinite(lo)) return lo;
    return std::isfinite(hi) ? hi : 0.0;
  }

  // Leaves the artificial list untouched on failure so that initial_basis
  // can start over.
  bool warm_basis(const LpBasis& hint) {
    if (hint.columns.size() != n_ || hint.rows.size() != m_) return false;
    const std::size_t total = n_ + m_;
    x_.assign(total, 0.0);
    basis_.clear();
    for (std::size_t j = 0; j < total; ++j) {
      const VarStatus st = j < n_ ? hint.columns[j] : hint.rows[j - n_];
      if (st == VarStatus::Basic) {
        basis_.push_back(j);
      } else {
        x_[j] = nonbasic_value(st, lb_[j], ub_[j]);
      }
    }
    if (basis_.size() != m_) return false;
    pos_.assign(total, -1);
    for (std::size_t i = 0; i < m_; ++i) pos_[basis_[i]] = static_cast<int>(i);
    if (!refactor()) return false;
    std::vector<std::pair<std::size_t, double>> repairs;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t b = basis_[i];
      const double v = x_[b];
      if (v >= lb_[b] - opt_.feas_tol && v <= ub_[b] + opt_.feas_tol) continue;
      if (b < n_) return false;
      repairs.emplace_back(i, v);
    }
    for (auto [i, v] : repairs) {
      const std::size_t s = basis_[i];
      x_[s] = std::clamp(v, lb_[s], ub_[s]);
      pos_[s] = -1;
      basis_[i] = add_artificial(s - n_, v - x_[s]);
      pos_.push_back(static_cast<int>(i));
    }
    if (!repairs.empty() && !refactor()) {
      cols_.resize(total);
      lb_.resize(total);
      ub_.resize(total);
      artificials_.clear();
      artificial_row_.clear();
      return false;
    }
    return true;
  }

  LpBasis current_basis() const {
    LpBasis out;
    out.columns.resize(n_);
    out.rows.assign(m_, VarStatus::Lower);
    for (std::size_t j = 0; j < n_; ++j) {
      if (is_basic(j)) out.columns[j] = VarStatus::Basic;
      else out.columns[j] = (std::isfinite(ub_[j]) && x_[j] == ub_[j] && lb_[j] != ub_[j])
                                ? VarStatus::Upper : VarStatus::Lower;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      if (is_basic(n_ + r)) out.rows[r] = VarStatus::Basic;
    }
    for (std::size_t k = 0; k < artificials_.size(); ++k) {
      if (is_basic(artificials_[k])) out.rows[artificial_row_[k]] = VarStatus::Basic;
    }
    return out;
  }

  // Rebuilds the basis inverse by Gauss-Jordan elimination with partial
  // pivoting and recomputes basic values from the nonbasic ones.
  bool refactor() {
    std::vector<double> b(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (auto [r, a] : cols_[basis_[i]]) b[r * m_ + i] = a;
    }
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t piv = c;
      double best = std::abs(b[c * m_ + c]);
      for (std::size_t r = c + 1; r < m_; ++r) {
        if (std::abs(b[r * m_ + c]) > best) { best = std::abs(b[r * m_ + c]); piv = r; }
      }
      if (best < 1e-14) return false;
      if (piv != c) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(b[c * m_ + k], b[piv * m_ + k]);
          std::swap(binv_[c * m_ + k], binv_[piv * m_ + k]);
        }
      }
      const double inv = 1.0 / b[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) { b[c * m_ + k] *= inv; binv_[c * m_ + k] *= inv; }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = b[r * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          b[r * m_ + k] -= f * b[c * m_ + k];
          binv_[r * m_ + k] -= f * binv_[c * m_ + k];
        }
      }
    }
    std::vector<double> rhs(lp_.rhs.begin(), lp_.rhs.end());
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (is_basic(j) || x_[j] == 0.0) continue;
      for (auto [r, a] : cols_[j]) rhs[r] -= a * x_[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double v = 0.0;
      const double* row = &binv_[i * m_];
      for (std::size_t r = 0; r < m_; ++r) v += row[r] * rhs[r];
      x_[basis_[i]] = v;
    }
    return true;
  }

  void compute_duals() {
    y_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &binv_[i * m_];
      for (std::size_t r = 0; r < m_; ++r) y_[r] += cb * row[r];
    }
  }

  double reduced_cost(std::size_t j) const {
    double d = cost_[j];
    for (auto [r, a] : cols_[j]) d -= y_[r] * a;
    return d;
  }

  double objective() const {
    double v = 0.0;
    for (std::size_t j = 0; j < cols_.size(); ++j) v += cost_[j] * x_[j];
    return v;
  }

  Outcome iterate() {
    double best_obj = objective();
    int since_improve = 0;
    int since_refactor = 0;
    const int refactor_every = std::max<int>(opt_.refactor_every, static_cast<int>(m_ / 2));
    std::vector<double> alpha(m_);
    while (true) {
      if (iters_ >= opt_.max_iters) return Outcome::IterLimit;
      if (since_refactor >= refactor_every) {
        if (!refactor()) return Outcome::Singular;
        since_refactor = 0;
      }
      compute_duals();

      // Pricing.
      std::size_t enter = cols_.size();
      double enter_d = 0.0;
      double best_score = 0.0;
      for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (is_basic(j) || lb_[j] == ub_[j]) continue;
        const double d = reduced_cost(j);
        const bool can_up = x_[j] < ub_[j];
        const bool can_down = x_[j] > lb_[j];
        if (!((d < -opt_.optimality_tol && can_up) || (d > opt_.optimality_tol && can_down))) {
          continue;
        }
        if (bland_) { enter = j; enter_d = d; break; }
        if (std::abs(d) > best_score) { best_score = std::abs(d); enter = j; enter_d = d; }
      }
      if (enter == cols_.size()) return Outcome::Optimal;

      const double dir = enter_d < 0 ? 1.0 : -1.0;
      std::fill(alpha.begin(), alpha.end(), 0.0);
      for (auto [r, a] : cols_[enter]) {
        for (std::size_t i = 0; i < m_; ++i) alpha[i] += binv_[i * m_ + r] * a;
      }

      // Ratio test. theta is the step of the entering variable along dir.
      double theta = ub_[enter] - lb_[enter];
      std::size_t leave = m_;  // m_ marks a bound flip
      double leave_pivot = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double delta = -dir * alpha[i];
        const std::size_t b = basis_[i];
        double limit = kInf;
        if (delta < -opt_.pivot_tol && std::isfinite(lb_[b])) {
          limit = std::max(0.0, (x_[b] - lb_[b]) / -delta);
        } else if (delta > opt_.pivot_tol && std::isfinite(ub_[b])) {
          limit = std::max(0.0, (ub_[b] - x_[b]) / delta);
        } else {
          continue;
        }
        bool take = false;
        if (limit < theta - 1e-12) {
          take = true;
        } else if (limit <= theta + 1e-12 && leave < m_) {
          take = bland_ ? b < basis_[leave] : std::abs(alpha[i]) > leave_pivot;
        }
        if (take) { theta = limit; leave = i; leave_pivot = std::abs(alpha[i]); }
      }
      if (!std::isfinite(theta)) return Outcome::Unbounded;

      ++iters_;
      ++since_refactor;
      x_[enter] += dir * theta;
      for (std::size_t i = 0; i < m_; ++i) x_[basis_[i]] -= dir * theta * alpha[i];
      if (leave < m_) {
        const std::size_t out = basis_[leave];
        const double delta = -dir * alpha[leave];
        x_[out] = delta < 0 ? lb_[out] : ub_[out];
        const double inv = 1.0 / alpha[leave];
        double* prow = &binv_[leave * m_];
        for (std::size_t k = 0; k < m_; ++k) prow[k] *= inv;
        for (std::size_t i = 0; i < m_; ++i) {
          if (i == leave || alpha[i] == 0.0) continue;
          const double f = alpha[i];
          double* row = &binv_[i * m_];
          for (std::size_t k = 0; k < m_; ++k) row[k] -= f * prow[k];
        }
        pos_[out] = -1;
        pos_[enter] = static_cast<int>(leave);
        basis_[leave] = enter;
      } else {
        x_[enter] = dir > 0 ? ub_[enter] : lb_[enter];
      }

      const double obj = objective();
      if (obj < best_obj - 1e-12 * std::max(1.0, std::abs(best_obj))) {
        best_obj = obj;
        since_improve = 0;
        bland_ = false;
      } else if (++since_improve > opt_.stall_threshold) {
        bland_ = true;
      }
    }
  }

  LpSolution finish(LpStatus status, std::string diag) {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iters_;
    sol.diagnostics = std::move(diag);
    sol.primal.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    for (std::size_t j = 0; j < n_; ++j) {
      sol.primal[j] = std::clamp(sol.primal[j], lb_[j], ub_[j]);
    }
    if (status != LpStatus::Optimal) return sol;
    compute_duals();
    sol.duals = y_;
    sol.basis = current_basis();
    sol.reduced_costs.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) sol.reduced_costs[j] = reduced_cost(j);
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += lp_.objective[j] * sol.primal[j];
    double scale = 1.0;
    for (double r : lp_.rhs) scale = std::max(scale, std::abs(r));
    const double res = primal_residual(lp_, sol.primal);
    if (res > opt_.feas_tol * scale) {
      sol.status = LpStatus::IterLimit;
      sol.diagnostics = "numerical breakdown: primal residual " + std::to_string(res);
    }
    return sol;
  }

  const LinearProgram& lp_;
  LpOptions opt_;
  std::size_t m_ = 0, n_ = 0;
  std::vector<Column> cols_;
  std::vector<double> lb_, ub_, cost_, x_, y_, binv_;
  std::vector<std::size_t> basis_, artificials_, artificial_row_;
  std::vector<int> pos_;
  int iters_ = 0;
  bool bland_ = false;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  return solve_lp(lp, options, LpBasis{});
}

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options, const LpBasis& warm) {
  lp.validate();
  LpSolution sol = Simplex(lp, options).run(warm.empty() ? nullptr : &warm);
  if (sol.status == LpStatus::IterLimit && sol.diagnostics.rfind("numerical", 0) == 0) {
    // One retry that refuses small pivots and refactors more often.
    LpOptions strict = options;
    strict.pivot_tol = std::max(options.pivot_tol * 100.0, 1e-5);
    strict.refactor_every = std::max(8, options.refactor_every / 4);
    LpSolution again = Simplex(lp, strict).run();
    again.iterations += sol.iterations;
    return again;
  }
  return sol;
}

LpSolution solve_lp(const LinearProgram& lp, double feas_tol, int max_iters) {
  LpOptions opt;
  opt.feas_tol = feas_tol;
  opt.max_iters = max_iters;
  return solve_lp(lp, opt);
}

double primal_residual(const LinearProgram& lp, std::span<const double> x) {
  if (x.size() != lp.cols()) throw ValidationError("primal_residual: dimension mismatch");
  double worst = 0.0;
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
  }
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    double act = 0.0;
    for (std::size_t j = 0; j < lp.cols(); ++j) act += lp.at(r, j) * x[j];
    const double gap = act - lp.rhs[r];
    switch (lp.senses[r]) {
      case RowSense::LessEqual: worst = std::max(worst, gap); break;
      case RowSense::GreaterEqual: worst = std::max(worst, -gap); break;
      case RowSense::Equal: worst = std::max(worst, std::abs(gap)); break;
    }
  }
  return worst;
}

double complementarity_residual(const LinearProgram& lp, const LpSolution& sol) {
  double worst = 0.0;
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    if (lp.senses[r] == RowSense::Equal) continue;
    double act = 0.0;
    for (std::size_t j = 0; j < lp.cols(); ++j) act += lp.at(r, j) * sol.primal[j];
    worst = std::max(worst, std::abs(sol.duals[r]) * std::abs(lp.rhs[r] - act));
  }
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    const double d = sol.reduced_costs[j];
    double slack = 0.0;
    if (d > 0) slack = sol.primal[j] - lp.lower[j];
    else if (d < 0) slack = lp.upper[j] - sol.primal[j];
    if (!std::isfinite(slack)) slack = 1.0;
    worst = std::max(worst, std::abs(d) * slack);
  }
  return worst;
}

double dual_objective(const LinearProgram& lp, std::span<const double> duals) {
  double value = 0.0;
  for (std::size_t r = 0; r < lp.rows(); ++r) value += lp.rhs[r] * duals[r];
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    double d = lp.objective[j];
    for (std::size_t r = 0; r < lp.rows(); ++r) d -= lp.at(r, j) * duals[r];
    if (d > 0) value += d * lp.lower[j];
    else if (d < 0) value += d * lp.upper[j];
  }
  return value;
}

std::vector<double> solve_box_qp_prox(std::span<const double> center,
                                      std::span<const double> gradient, double eta,
                                      std::span<const double> lower_bounds) {
  if (!(eta > 0.0)) throw ValidationError("prox step requires eta > 0");
  if (center.size() != gradient.size() || center.size() != lower_bounds.size()) {
    throw ValidationError("prox step: dimension mismatch");
  }
  std::vector<double> out(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    out[i] = std::max(lower_bounds[i], center[i] - eta * gradient[i]);
  }
  return out;
}

void write_lp_text(std::ostream& out, const LinearProgram& lp) {
  const auto saved = out.precision(17);
  out << "LP " << lp.rows() << " rows x " << lp.cols() << " cols\n";
  out << "min";
  for (double c : lp.objective) out << ' ' << c;
  out << '\n';
  for (std::size_t r = 0; r < lp.rows(); ++r) {
    out << "r" << r << ':';
    for (std::size_t j = 0; j < lp.cols(); ++j) out << ' ' << lp.at(r, j);
    const char* s = lp.senses[r] == RowSense::LessEqual ? "<=" :
                    lp.senses[r] == RowSense::Equal ? "=" : ">=";
    out << ' ' << s << ' ' << lp.rhs[r] << '\n';
  }
  out << "bounds";
  for (std::size_t j = 0; j < lp.cols(); ++j) {
    out << " [" << lp.lower[j] << ',' << lp.upper[j] << ']';
  }
  out << '\n';
  out.precision(saved);
}

int LpBuilder::add_column(double lower, double upper, double cost) {
  costs_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return static_cast<int>(costs_.size()) - 1;
}

int LpBuilder::add_row(std::vector<Term> terms, RowSense sense, double rhs) {
  rows_.push_back({std::move(terms), sense, rhs});
  return static_cast<int>(rows_.size()) - 1;
}

void LpBuilder::set_bounds(int col, double lower, double upper) {
  lower_[col] = lower;
  upper_[col] = upper;
}

LinearProgram LpBuilder::build() const {
  LinearProgram lp(rows_.size(), costs_.size());
  lp.objective = costs_;
  lp.lower = lower_;
  lp.upper = upper_;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    lp.senses[r] = rows_[r].sense;
    lp.rhs[r] = rows_[r].rhs;
    for (auto [c, a] : rows_[r].terms) lp.at(r, static_cast<std::size_t>(c)) += a;
  }
  return lp;
}

}  // namespace bidro
