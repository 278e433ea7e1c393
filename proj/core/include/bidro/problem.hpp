#pragma once

// Domain types for the leader/follower supply-chain problem and exact
// evaluators for its costs.
//
// Naming follows the supply-chain scenario: the leader chooses inventory x_i
// and shipments y_ij, the follower chooses allocations z_i and flows z_ij.
// (In the generic bi-level model the follower variable is called y; here it
// is always the FollowerDecision.)

#include <cstddef>
#include <span>
#include <vector>

namespace bidro {

struct Arc {
  int tail = 0;
  int head = 0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

struct NetworkInstance {
  int node_count = 0;
  std::vector<Arc> arcs;
  // Per node.
  std::vector<double> inventory_cost;  // c_i
  std::vector<double> penalty_cost;    // p_i
  std::vector<double> alloc_cost;      // q_i
  std::vector<double> storage_cap;     // C_i
  // Per arc.
  std::vector<double> transport_cost;  // t_ij
  std::vector<double> flow_cost;       // r_ij
  std::vector<double> transport_cap;   // T_ij
  // Demand support box; both empty means "not given".
  std::vector<double> support_lo;
  std::vector<double> support_hi;

  std::size_t nodes() const { return static_cast<std::size_t>(node_count); }
  std::size_t arc_count() const { return arcs.size(); }
  bool has_support() const { return !support_lo.empty(); }

  // Throws ValidationError. Penalty dominance p_i >= c_i is checked unless
  // explicitly waived.
  void validate(bool require_penalty_dominance = true) const;

  friend bool operator==(const NetworkInstance&, const NetworkInstance&) = default;
};

struct LeaderDecision {
  std::vector<double> inventory;  // x_i
  std::vector<double> shipment;   // y_ij

  static LeaderDecision zeros(const NetworkInstance& inst);
};

struct FollowerDecision {
  std::vector<double> allocation;  // z_i
  std::vector<double> flow;        // z_ij

  static FollowerDecision zeros(const NetworkInstance& inst);
};

using Demand = std::vector<double>;  // one realization d(xi), per node

struct EmpiricalDistribution {
  std::vector<Demand> samples;

  std::size_t size() const { return samples.size(); }
  double weight() const { return 1.0 / static_cast<double>(samples.size()); }
  std::size_t dimension() const { return samples.empty() ? 0 : samples.front().size(); }
  std::vector<double> mean() const;

  void validate() const;
};

enum class GroundNorm { L1, L2, Linf };

const char* to_string(GroundNorm norm);
GroundNorm parse_ground_norm(const char* text);

// Wasserstein ball of radius `radius` around `center`, restricted to the box
// [lo, hi]. The ground metric is the chosen norm applied to w .* (a - b);
// `metric_weights` empty means all ones.
struct AmbiguitySet {
  EmpiricalDistribution center;
  double radius = 0.0;
  GroundNorm ground_norm = GroundNorm::L1;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> metric_weights;

  std::size_t dimension() const { return lo.size(); }
  double weight(std::size_t j) const { return metric_weights.empty() ? 1.0 : metric_weights[j]; }
  double distance(std::span<const double> a, std::span<const double> b) const;
  // Dual-norm of v with respect to the weighted ground metric.
  double dual_norm(std::span<const double> v) const;

  void validate() const;
};

// Box used when an instance carries no support: [0, 2 * max sample] per node.
void default_support(const EmpiricalDistribution& dist, std::vector<double>& lo,
                     std::vector<double>& hi);

AmbiguitySet make_ambiguity_set(const NetworkInstance& inst, EmpiricalDistribution center,
                                double radius, GroundNorm norm = GroundNorm::L1);

void check_decision(const NetworkInstance& inst, const LeaderDecision& x);
void check_decision(const NetworkInstance& inst, const FollowerDecision& z);

// x_i plus the shipments on arcs leaving i.
std::vector<double> coverage(const NetworkInstance& inst, const LeaderDecision& x);

double follower_cost(const NetworkInstance& inst, const FollowerDecision& z);

// c.x + t.y + sum_i p_i max(0, d_i - coverage_i) + follower_cost(z).
double leader_cost(const NetworkInstance& inst, const LeaderDecision& x,
                   const FollowerDecision& z, std::span<const double> demand);

// c.x + t.y only.
double first_stage_cost(const NetworkInstance& inst, const LeaderDecision& x);

// Unmet demand sum_i max(0, d_i - coverage_i).
double unmet_demand(const NetworkInstance& inst, const LeaderDecision& x,
                    std::span<const double> demand);

// 1 - total unmet / total demand over all samples; 1 when total demand is 0.
double service_level(const NetworkInstance& inst, const LeaderDecision& x,
                     std::span<const Demand> samples);

}  // namespace bidro
