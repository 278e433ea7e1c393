#include "bidro/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bidro/errors.hpp"

namespace bidro {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_constant_intercepts(const PiecewiseAffineLoss& loss) {
  for (const AffinePiece& piece : loss.pieces) {
    require(piece.intercept.terms.empty(), "loss intercepts must be constant here");
  }
}

double metric_length(const AmbiguitySet& amb, std::span<const double> per_dim) {
  double acc = 0.0;
  for (std::size_t j = 0; j < per_dim.size(); ++j) {
    const double d = amb.weight(j) * per_dim[j];
    switch (amb.ground_norm) {
      case GroundNorm::L1: acc += d; break;
      case GroundNorm::L2: acc += d * d; break;
      case GroundNorm::Linf: acc = std::max(acc, d); break;
    }
  }
  return amb.ground_norm == GroundNorm::L2 ? std::sqrt(acc) : acc;
}

}  // namespace

double AffineForm::evaluate(std::span<const double> columns) const {
  double v = constant;
  for (const auto& [col, coef] : terms) {
    require(col >= 0 && static_cast<std::size_t>(col) < columns.size(),
            "affine form refers to a missing column");
    v += coef * columns[static_cast<std::size_t>(col)];
  }
  return v;
}

double PiecewiseAffineLoss::evaluate(std::span<const double> xi,
                                     std::span<const double> columns) const {
  double best = -kInf;
  for (const AffinePiece& piece : pieces) {
    double v = piece.intercept.evaluate(columns);
    for (std::size_t j = 0; j < xi.size(); ++j) v += piece.slope[j] * xi[j];
    best = std::max(best, v);
  }
  return best;
}

double PiecewiseAffineLoss::lipschitz(const AmbiguitySet& amb) const {
  double lip = 0.0;
  for (const AffinePiece& piece : pieces) lip = std::max(lip, amb.dual_norm(piece.slope));
  return lip;
}

void PiecewiseAffineLoss::validate() const {
  require(!pieces.empty(), "loss needs at least one affine piece");
  const std::size_t dim = dimension();
  for (const AffinePiece& piece : pieces) {
    require(piece.slope.size() == dim, "loss pieces differ in dimension");
    for (double a : piece.slope) require(std::isfinite(a), "non-finite loss slope");
    require(std::isfinite(piece.intercept.constant), "non-finite loss intercept");
  }
}

double support_function_box(std::span<const double> v, std::span<const double> lo,
                            std::span<const double> hi) {
  require(v.size() == lo.size() && v.size() == hi.size(), "support function dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] > 0.0) s += hi[j] * v[j];
    else if (v[j] < 0.0) s += lo[j] * v[j];
  }
  return s;
}

DroBlock build_dro_constraints(LpBuilder& builder, const PiecewiseAffineLoss& loss,
                               const AmbiguitySet& amb, int lambda_col) {
  loss.validate();
  amb.validate();
  require(loss.dimension() == amb.dimension(), "loss and ambiguity set differ in dimension");
  require(amb.ground_norm != GroundNorm::L2,
          "L2 ground norm gives a second-order-cone dual; only L1 and Linf are supported");

  const std::size_t dim = amb.dimension();
  const std::size_t n = amb.center.size();
  const double inv_n = amb.center.weight();

  DroBlock block;
  if (lambda_col < 0) {
    block.lambda = builder.add_column(0.0, kInf, amb.radius);
  } else {
    block.lambda = lambda_col;
    builder.add_cost(lambda_col, amb.radius);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Demand& xi = amb.center.samples[i];
    const int s = builder.add_column(-kInf, kInf, inv_n);
    block.epigraph.push_back(s);

    for (const AffinePiece& piece : loss.pieces) {
      std::vector<int> vp(dim), vm(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        vp[j] = builder.add_column(0.0, kInf, 0.0);
        vm[j] = builder.add_column(0.0, kInf, 0.0);
      }

      // s_i >= b_k + <a_k - v, xi_i> + sigma(v), v = vp - vm.
      std::vector<Term> row{{s, 1.0}};
      for (const auto& [col, coef] : piece.intercept.terms) row.emplace_back(col, -coef);
      double rhs = piece.intercept.constant;
      for (std::size_t j = 0; j < dim; ++j) {
        rhs += piece.slope[j] * xi[j];
        row.emplace_back(vp[j], xi[j] - amb.hi[j]);
        row.emplace_back(vm[j], amb.lo[j] - xi[j]);
      }
      builder.add_row(std::move(row), RowSense::GreaterEqual, rhs);

      if (amb.ground_norm == GroundNorm::L1) {
        // |a_kj - v_j| <= lambda * w_j
        for (std::size_t j = 0; j < dim; ++j) {
          const double w = amb.weight(j);
          builder.add_row({{vp[j], -1.0}, {vm[j], 1.0}, {block.lambda, -w}}, RowSense::LessEqual,
                          -piece.slope[j]);
          builder.add_row({{vp[j], 1.0}, {vm[j], -1.0}, {block.lambda, -w}}, RowSense::LessEqual,
                          piece.slope[j]);
        }
      } else {
        // sum_j |a_kj - v_j| / w_j <= lambda
        std::vector<Term> budget{{block.lambda, -1.0}};
        for (std::size_t j = 0; j < dim; ++j) {
          const int e = builder.add_column(0.0, kInf, 0.0);
          builder.add_row({{vp[j], -1.0}, {vm[j], 1.0}, {e, -1.0}}, RowSense::LessEqual,
                          -piece.slope[j]);
          builder.add_row({{vp[j], 1.0}, {vm[j], -1.0}, {e, -1.0}}, RowSense::LessEqual,
                          piece.slope[j]);
          budget.emplace_back(e, 1.0 / amb.weight(j));
        }
        builder.add_row(std::move(budget), RowSense::LessEqual, 0.0);
      }
    }
  }
  return block;
}

double dro_value(const PiecewiseAffineLoss& loss, const AmbiguitySet& amb) {
  require_constant_intercepts(loss);
  LpBuilder builder;
  build_dro_constraints(builder, loss, amb);
  const LinearProgram lp = builder.build();
  const LpSolution sol = solve_lp(lp);
  if (!sol.optimal()) {
    throw SolverError(std::string("worst-case dual program ended with status ") +
                      to_string(sol.status));
  }
  return sol.objective;
}

namespace {

struct Grid {
  std::vector<std::vector<double>> coords;  // per dimension, sorted
  std::size_t size = 1;
  double delta = 0.0;                       // max distance from the box to the grid
  double spacing = 0.0;
};

Grid make_grid(const AmbiguitySet& amb, double resolution) {
  const std::size_t dim = amb.dimension();
  const int steps = static_cast<int>(std::ceil(1.0 / resolution - 1e-9));
  Grid grid;
  grid.coords.resize(dim);
  std::vector<double> half_gap(dim, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    auto& c = grid.coords[j];
    const double width = amb.hi[j] - amb.lo[j];
    if (width <= 0.0) {
      c.push_back(amb.lo[j]);
    } else {
      for (int k = 0; k <= steps; ++k) c.push_back(amb.lo[j] + width * k / steps);
      grid.spacing = std::max(grid.spacing, width / steps);
    }
    for (const Demand& d : amb.center.samples) c.push_back(std::clamp(d[j], amb.lo[j], amb.hi[j]));
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    for (std::size_t k = 1; k < c.size(); ++k) half_gap[j] = std::max(half_gap[j], (c[k] - c[k - 1]) / 2);
    const double limit = 5e7;
    require(static_cast<double>(grid.size) * static_cast<double>(c.size()) <= limit,
            "oracle grid too large; use a coarser resolution");
    grid.size *= c.size();
  }
  grid.delta = metric_length(amb, half_gap);
  return grid;
}

struct OracleColumn {
  std::size_t sample;
  std::vector<double> point;
};

// Column generation for the grid transport LP at a given budget.
double grid_transport_value(const PiecewiseAffineLoss& loss, const AmbiguitySet& amb,
                            const Grid& grid, double budget, int& generated) {
  const std::size_t n = amb.center.size();
  const std::size_t dim = amb.dimension();
  std::vector<OracleColumn> columns;
  for (std::size_t i = 0; i < n; ++i) columns.push_back({i, amb.center.samples[i]});

  std::vector<double> point(dim);
  std::vector<std::size_t> digit(dim);
  for (int round = 0; round < 10000; ++round) {
    LinearProgram lp(n + 1, columns.size());
    for (std::size_t i = 0; i < n; ++i) {
      lp.senses[i] = RowSense::Equal;
      lp.rhs[i] = amb.center.weight();
    }
    lp.senses[n] = RowSense::LessEqual;
    lp.rhs[n] = budget;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const OracleColumn& col = columns[c];
      lp.objective[c] = -loss.evaluate(col.point);
      lp.at(col.sample, c) = 1.0;
      lp.at(n, c) = amb.distance(col.point, amb.center.samples[col.sample]);
      lp.lower[c] = 0.0;
      lp.upper[c] = kInf;
    }
    const LpSolution sol = solve_lp(lp, 1e-10);
    if (!sol.optimal()) {
      throw SolverError(std::string("oracle transport LP ended with status ") +
                        to_string(sol.status));
    }

    // Price every grid point against every sample.
    const double yb = sol.duals[n];
    std::vector<double> best_rc(n, -1e-10);
    std::vector<std::vector<double>> best_point(n);
    std::fill(digit.begin(), digit.end(), 0);
    for (std::size_t g = 0; g < grid.size; ++g) {
      for (std::size_t j = 0; j < dim; ++j) point[j] = grid.coords[j][digit[j]];
      const double value = loss.evaluate(point);
      for (std::size_t i = 0; i < n; ++i) {
        const double rc = -value - sol.duals[i] - yb * amb.distance(point, amb.center.samples[i]);
        if (rc < best_rc[i]) {
          best_rc[i] = rc;
          best_point[i] = point;
        }
      }
      for (std::size_t j = 0; j < dim; ++j) {
        if (++digit[j] < grid.coords[j].size()) break;
        digit[j] = 0;
      }
    }
    bool added = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (best_point[i].empty()) continue;
      columns.push_back({i, best_point[i]});
      added = true;
      ++generated;
    }
    if (!added) return -sol.objective;
  }
  throw SolverError("oracle column generation did not converge");
}

}  // namespace

OracleResult worst_case_oracle(const PiecewiseAffineLoss& loss, const AmbiguitySet& amb,
                               double resolution) {
  loss.validate();
  amb.validate();
  require_constant_intercepts(loss);
  require(loss.dimension() == amb.dimension(), "loss and ambiguity set differ in dimension");
  require(resolution > 0.0 && resolution <= 1.0, "oracle resolution must lie in (0, 1]");

  const Grid grid = make_grid(amb, resolution);
  OracleResult out;
  out.grid_points = grid.size;
  out.grid_spacing = grid.spacing;
  out.value = grid_transport_value(loss, amb, grid, amb.radius, out.columns_generated);
  if (amb.ground_norm == GroundNorm::L1) {
    // For a fixed multiplier, sup_xi <a_k, xi> - lambda * sum_j w_j |xi_j - s_j|
    // separates over coordinates and is attained with xi_j in {lo_j, s_j, hi_j}.
    // The grid holds all of those, so the grid-supported optimum is exact.
    out.gap = 0.0;
  } else if (grid.delta > 0.0) {
    const double relaxed =
        grid_transport_value(loss, amb, grid, amb.radius + grid.delta, out.columns_generated);
    out.gap = std::max(0.0, relaxed + loss.lipschitz(amb) * grid.delta - out.value);
  }
  return out;
}

double wasserstein_distance(const DiscreteDistribution& p, const DiscreteDistribution& q,
                            GroundNorm norm, std::span<const double> metric_weights) {
  require(!p.points.empty() && !q.points.empty(), "distributions must be non-empty");
  require(p.points.size() == p.weights.size() && q.points.size() == q.weights.size(),
          "points and weights differ in length");
  const std::size_t dim = p.points.front().size();
  for (const auto& pt : p.points) require(pt.size() == dim, "points differ in dimension");
  for (const auto& pt : q.points) require(pt.size() == dim, "points differ in dimension");
  require(metric_weights.empty() || metric_weights.size() == dim, "metric weights dimension mismatch");
  for (double w : p.weights) require(w >= 0.0, "negative probability weight");
  for (double w : q.weights) require(w >= 0.0, "negative probability weight");
  const double mass_p = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  const double mass_q = std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
  require(std::abs(mass_p - mass_q) <= 1e-9 * std::max(1.0, mass_p),
          "distributions carry different total mass");

  AmbiguitySet metric;
  metric.ground_norm = norm;
  metric.metric_weights.assign(metric_weights.begin(), metric_weights.end());

  const std::size_t a = p.points.size();
  const std::size_t b = q.points.size();
  LinearProgram lp(a + b, a * b);
  for (std::size_t i = 0; i < a; ++i) {
    lp.senses[i] = RowSense::Equal;
    lp.rhs[i] = p.weights[i];
  }
  for (std::size_t k = 0; k < b; ++k) {
    lp.senses[a + k] = RowSense::Equal;
    lp.rhs[a + k] = q.weights[k];
  }
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t c = i * b + k;
      lp.objective[c] = metric.distance(p.points[i], q.points[k]);
      lp.at(i, c) = 1.0;
      lp.at(a + k, c) = 1.0;
      lp.lower[c] = 0.0;
      lp.upper[c] = kInf;
    }
  }
  const LpSolution sol = solve_lp(lp, 1e-10);
  if (!sol.optimal()) {
    throw SolverError(std::string("transport LP ended with status ") + to_string(sol.status));
  }
  return sol.objective;
}

ShortfallWorstCase::ShortfallWorstCase(const AmbiguitySet& amb, std::vector<double> slopes)
    : amb_(&amb), slopes_(std::move(slopes)) {
  amb.validate();
  require(amb.ground_norm == GroundNorm::L1,
          "separable worst-case evaluation needs a (weighted) L1 ground metric");
  require(slopes_.size() == amb.dimension(), "shortfall slopes dimension mismatch");
  for (std::size_t j = 0; j < slopes_.size(); ++j) {
    require(std::isfinite(slopes_[j]) && slopes_[j] >= 0.0, "shortfall slopes must be >= 0");
    lambda_cap_ = std::max(lambda_cap_, slopes_[j] / amb.weight(j));
  }
}

ShortfallWorstCase::Evaluation ShortfallWorstCase::evaluate(std::span<const double> cov,
                                                            double lambda) const {
  require(cov.size() == dimension(), "coverage dimension mismatch");
  const std::size_t dim = dimension();
  const double inv_n = amb_->center.weight();
  Evaluation ev;
  ev.cut_const.assign(dim, 0.0);
  ev.cut_cov.assign(dim, 0.0);
  ev.cut_lambda.assign(dim, 0.0);
  ev.per_coordinate.assign(dim, 0.0);
  for (const Demand& d : amb_->center.samples) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double p = slopes_[j];
      const double w = amb_->weight(j);
      const double up = amb_->hi[j];
      const double stay = p * std::max(0.0, d[j] - cov[j]);
      const double move = p * std::max(0.0, up - cov[j]) - lambda * w * (up - d[j]);
      const bool moved = move > stay;
      const double target = moved ? up : d[j];
      const double active = target > cov[j] ? p : 0.0;
      ev.per_coordinate[j] += inv_n * std::max(stay, move);
      ev.cut_const[j] += inv_n * active * target;
      ev.cut_cov[j] += inv_n * active;
      if (moved) {
        ev.cut_lambda[j] += inv_n * w * (up - d[j]);
        ev.transport += inv_n * w * (up - d[j]);
      }
    }
  }
  ev.value = lambda * amb_->radius;
  for (double v : ev.per_coordinate) ev.value += v;
  return ev;
}

namespace {

struct Breakpoint {
  double lambda;
  double weight;  // transport mass released past this point
};

std::vector<Breakpoint> breakpoints(const AmbiguitySet& amb, std::span<const double> slopes,
                                    std::span<const double> cov) {
  std::vector<Breakpoint> bps;
  const double inv_n = amb.center.weight();
  for (const Demand& d : amb.center.samples) {
    for (std::size_t j = 0; j < slopes.size(); ++j) {
      const double w = amb.weight(j);
      const double dist = w * (amb.hi[j] - d[j]);
      if (dist <= 0.0) continue;
      const double gain = slopes[j] * (std::max(0.0, amb.hi[j] - cov[j]) -
                                       std::max(0.0, d[j] - cov[j]));
      if (gain <= 0.0) continue;
      bps.push_back({gain / dist, inv_n * dist});
    }
  }
  std::sort(bps.begin(), bps.end(),
            [](const Breakpoint& a, const Breakpoint& b) { return a.lambda < b.lambda; });
  return bps;
}

// beyond[k] = total weight of breakpoints k, k+1, ...; beyond[size] = 0 exactly.
std::vector<double> mass_beyond(const std::vector<Breakpoint>& bps) {
  std::vector<double> beyond(bps.size() + 1, 0.0);
  for (std::size_t k = bps.size(); k-- > 0;) beyond[k] = beyond[k + 1] + bps[k].weight;
  return beyond;
}

}  // namespace

double ShortfallWorstCase::slope(std::span<const double> cov, double lambda) const {
  require(cov.size() == dimension(), "coverage dimension mismatch");
  double s = amb_->radius;
  for (const Breakpoint& bp : breakpoints(*amb_, slopes_, cov)) {
    if (bp.lambda > lambda) s -= bp.weight;
  }
  return s;
}

ShortfallWorstCase::Optimum ShortfallWorstCase::minimize(std::span<const double> cov) const {
  require(cov.size() == dimension(), "coverage dimension mismatch");
  const std::vector<Breakpoint> bps = breakpoints(*amb_, slopes_, cov);
  const std::vector<double> beyond = mass_beyond(bps);
  // Right slope just past breakpoint k is radius - beyond[k + 1].
  double lambda = 0.0;
  if (amb_->radius < beyond[0]) {
    for (std::size_t k = 0; k < bps.size(); ++k) {
      if (k + 1 < bps.size() && bps[k + 1].lambda == bps[k].lambda) continue;
      if (amb_->radius >= beyond[k + 1]) {
        lambda = bps[k].lambda;
        break;
      }
    }
  }
  return {evaluate(cov, lambda).value, lambda};
}

double ShortfallWorstCase::proximal_point(std::span<const double> cov, double center, double eta,
                                          double scale_f) const {
  require(cov.size() == dimension(), "coverage dimension mismatch");
  require(eta > 0.0 && scale_f >= 0.0, "proximal step needs eta > 0 and a nonnegative scale");
  const std::vector<Breakpoint> bps = breakpoints(*amb_, slopes_, cov);
  const std::vector<double> beyond = mass_beyond(bps);

  // Walk the linear pieces of Phi on [0, inf); on piece k the objective is
  // strictly convex with stationary point center - eta * scale_f * slope_k.
  double left = 0.0;
  std::size_t k = 0;
  while (k < bps.size() && bps[k].lambda <= 0.0) ++k;
  for (;;) {
    const double slope_k = amb_->radius - beyond[k];
    const double right = k < bps.size() ? bps[k].lambda : kInf;
    const double stationary = center - eta * scale_f * slope_k;
    if (stationary <= right) return std::max(left, stationary);
    left = right;
    const double at = bps[k].lambda;
    while (k < bps.size() && bps[k].lambda == at) ++k;
  }
}

}  // namespace bidro
