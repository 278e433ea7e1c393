#pragma once

// Dense linear programming subsolver.
//
// Every finite program built by the library (cutting-plane masters, follower
// problems, transport problems, the dualized Wasserstein blocks) is solved
// here. The algorithm is a revised bounded-variable primal simplex with an
// explicit basis inverse, Dantzig pricing, and a Bland fallback once the
// objective has stalled for a while.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bidro {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { LessEqual, Equal, GreaterEqual };

/// min c'x  s.t.  A x (sense) b,  lower <= x <= upper.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<double> matrix;  // row-major, rows() x cols()
  std::vector<RowSense> senses;
  std::vector<double> rhs;
  std::vector<double> lower;
  std::vector<double> upper;

  LinearProgram() = default;
  LinearProgram(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rhs.size(); }
  std::size_t cols() const { return objective.size(); }
  double& at(std::size_t r, std::size_t c) { return matrix[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return matrix[r * cols() + c]; }

  // Throws ValidationError on inconsistent dimensions, NaN data or
  // crossed bounds.
  void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

enum class VarStatus : signed char { Lower, Upper, Basic };

// Simplex basis by status. Nonbasic columns sit at the named bound (or at
// zero when that bound is infinite); a row is Basic when its slack is.
struct LpBasis {
  std::vector<VarStatus> columns;
  std::vector<VarStatus> rows;

  bool empty() const { return columns.empty() && rows.empty(); }
};

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::IterLimit;
  std::vector<double> primal;
  // Row duals, minimization convention: <= rows have duals <= 0, >= rows
  // have duals >= 0.
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  double objective = 0.0;
  int iterations = 0;
  std::string diagnostics;
  LpBasis basis;  // set when optimal

  bool optimal() const { return status == LpStatus::Optimal; }
};

struct LpOptions {
  double feas_tol = 1e-7;
  double pivot_tol = 1e-7;
  double optimality_tol = 1e-9;
  int max_iters = 200000;
  int refactor_every = 64;
  int stall_threshold = 50;
};

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options);
// Starts from `warm` when it gives a nonsingular basis whose basic
// structurals are within bounds; basic slacks out of bounds are repaired in
// phase 1. Falls back to a cold start otherwise.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options, const LpBasis& warm);
LpSolution solve_lp(const LinearProgram& lp, double feas_tol = 1e-7,
                    int max_iters = 200000);

// Residual checks used by tests and by callers that want to certify a
// solution independently of the solver's internal bookkeeping.
double primal_residual(const LinearProgram& lp, std::span<const double> x);
double complementarity_residual(const LinearProgram& lp, const LpSolution& sol);
// Lagrangian dual bound b'y + sum_j min over the box of d_j x_j. Equals the
// primal objective at an optimal basis and is a lower bound otherwise.
double dual_objective(const LinearProgram& lp, std::span<const double> duals);

/// argmin_{x >= lower} <g, x> + 1/(2 eta) ||x - center||^2, component-wise
/// max(lower, center - eta * g).
std::vector<double> solve_box_qp_prox(std::span<const double> center,
                                      std::span<const double> gradient,
                                      double eta,
                                      std::span<const double> lower_bounds);

// Plain-text tableau dump for bug reports.
void write_lp_text(std::ostream& out, const LinearProgram& lp);

using Term = std::pair<int, double>;

// Incremental model assembly; rows are kept sparse until build().
class LpBuilder {
 public:
  int add_column(double lower, double upper, double cost);
  int add_row(std::vector<Term> terms, RowSense sense, double rhs);

  void set_cost(int col, double cost) { costs_[col] = cost; }
  void add_cost(int col, double cost) { costs_[col] += cost; }
  void set_bounds(int col, double lower, double upper);
  double lower(int col) const { return lower_[col]; }
  double upper(int col) const { return upper_[col]; }

  int cols() const { return static_cast<int>(costs_.size()); }
  int rows() const { return static_cast<int>(rows_.size()); }

  LinearProgram build() const;

 private:
  struct Row {
    std::vector<Term> terms;
    RowSense sense;
    double rhs;
  };
  std::vector<double> costs_, lower_, upper_;
  std::vector<Row> rows_;
};

}  // namespace bidro
