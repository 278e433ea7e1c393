#pragma once

// Worst-case expectations over Wasserstein balls.
//
// Three routes to the same number:
//  * build_dro_constraints: the finite dual program for a max-of-affine loss
//    (one pair of dual vectors per sample and per piece), emitted as LP rows;
//  * worst_case_oracle: the primal transport LP over a grid of the support box,
//    with a certified gap;
//  * ShortfallWorstCase: closed-form per-coordinate evaluation for separable
//    shortfall losses under a weighted L1 ground metric, used by the solver.

#include <cstddef>
#include <span>
#include <vector>

#include "bidro/lp.hpp"
#include "bidro/problem.hpp"

namespace bidro {

// constant + sum coef * column, columns referring to an LpBuilder.
struct AffineForm {
  double constant = 0.0;
  std::vector<Term> terms;

  double evaluate(std::span<const double> columns) const;
};

struct AffinePiece {
  std::vector<double> slope;  // over xi
  AffineForm intercept;       // over decision columns
};

// loss(xi) = max_k <slope_k, xi> + intercept_k.
struct PiecewiseAffineLoss {
  std::vector<AffinePiece> pieces;

  std::size_t dimension() const { return pieces.empty() ? 0 : pieces.front().slope.size(); }
  double evaluate(std::span<const double> xi, std::span<const double> columns = {}) const;
  // max_k ||slope_k||_* under the ambiguity set's ground metric.
  double lipschitz(const AmbiguitySet& amb) const;
  void validate() const;
};

// sup over the box of <v, xi> = sum_j hi_j max(v_j, 0) + lo_j min(v_j, 0).
double support_function_box(std::span<const double> v, std::span<const double> lo,
                            std::span<const double> hi);

struct DroBlock {
  int lambda = -1;
  std::vector<int> epigraph;  // s_i, one per sample
};

// Appends the dualized worst-case expectation of `loss` over `amb` to the
// builder and adds lambda * radius + mean_i s_i to its objective. Pass an
// existing column in `lambda_col` to share the Wasserstein multiplier.
// Supports L1 and Linf ground norms (the L2 dual norm is not linear).
DroBlock build_dro_constraints(LpBuilder& builder, const PiecewiseAffineLoss& loss,
                               const AmbiguitySet& amb, int lambda_col = -1);

// Worst-case expectation of a loss with constant intercepts, via the block.
double dro_value(const PiecewiseAffineLoss& loss, const AmbiguitySet& amb);

struct OracleResult {
  double value = 0.0;       // exact optimum over grid-supported distributions
  double gap = 0.0;         // certified: value <= true sup <= value + gap (0 for L1)
  double grid_spacing = 0.0;
  std::size_t grid_points = 0;
  int columns_generated = 0;
};

// Maximizes E_P[loss] over distributions on a tensor grid of the support box
// (plus the sample coordinates) within transport budget `radius`. The LP is
// solved by column generation over the grid. `resolution` is the grid step
// as a fraction of each box width.
OracleResult worst_case_oracle(const PiecewiseAffineLoss& loss, const AmbiguitySet& amb,
                               double resolution);

struct DiscreteDistribution {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
};

// Optimal transport cost between two discrete distributions.
double wasserstein_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                            GroundNorm norm = GroundNorm::L1,
                            std::span<const double> metric_weights = {});

// Worst-case expected shortfall penalty
//   sup_{P in ball} E_P[ sum_j slope_j * max(0, xi_j - cov_j) ]
// for a weighted-L1 ball. Because both the loss and the metric separate over
// coordinates, the inner supremum is attained at xi_j in {sample_j, hi_j}.
class ShortfallWorstCase {
 public:
  ShortfallWorstCase(const AmbiguitySet& amb, std::vector<double> slopes);

  std::size_t dimension() const { return slopes_.size(); }
  // Smallest lambda beyond which the worst case stops growing.
  double lambda_cap() const { return lambda_cap_; }
  double radius() const { return amb_->radius; }

  struct Evaluation {
    double value = 0.0;       // lambda*radius + mean_s sum_j S_sj
    double transport = 0.0;   // mean_s sum_j w_j |xi*_sj - sample_sj|
    // Per coordinate: mean over samples of the cut coefficients
    //   S_j >= cut_const_j - cut_cov_j * cov_j - cut_lambda_j * lambda.
    std::vector<double> cut_const, cut_cov, cut_lambda, per_coordinate;
  };

  // Dual function Phi(cov, lambda) and a jointly valid linearization.
  Evaluation evaluate(std::span<const double> cov, double lambda) const;

  struct Optimum {
    double value = 0.0;
    double lambda = 0.0;
  };
  // min over lambda >= 0 of Phi(cov, lambda), i.e. the exact worst case.
  Optimum minimize(std::span<const double> cov) const;

  // argmin_{lambda>=0} scale_f * Phi(cov, lambda) + (lambda - center)^2 / (2 eta)
  double proximal_point(std::span<const double> cov, double center, double eta,
                        double scale_f) const;

  // Right derivative of Phi in lambda.
  double slope(std::span<const double> cov, double lambda) const;

 private:
  const AmbiguitySet* amb_;
  std::vector<double> slopes_;
  double lambda_cap_ = 0.0;
};

}  // namespace bidro
