#include "bidro/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "bidro/errors.hpp"

namespace bidro {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_size(const std::vector<double>& v, std::size_t n, const char* name) {
  require(v.size() == n, std::string("instance field '") + name + "' has length " +
                             std::to_string(v.size()) + ", expected " + std::to_string(n));
}

void require_nonnegative(const std::vector<double>& v, const char* name) {
  for (double e : v) {
    require(std::isfinite(e) && e >= 0.0,
            std::string("instance field '") + name + "' must be finite and >= 0");
  }
}

}  // namespace

void NetworkInstance::validate(bool require_penalty_dominance) const {
  require(node_count >= 1, "instance must have at least one node");
  const std::size_t n = nodes();
  const std::size_t m = arc_count();
  for (const Arc& a : arcs) {
    require(a.tail >= 0 && a.tail < node_count && a.head >= 0 && a.head < node_count,
            "arc endpoint out of range");
    require(a.tail != a.head, "self-loop arcs are not allowed");
  }
  require_size(inventory_cost, n, "c");
  require_size(penalty_cost, n, "p");
  require_size(alloc_cost, n, "q");
  require_size(storage_cap, n, "C");
  require_size(transport_cost, m, "t");
  require_size(flow_cost, m, "r");
  require_size(transport_cap, m, "T");
  require_nonnegative(inventory_cost, "c");
  require_nonnegative(penalty_cost, "p");
  require_nonnegative(alloc_cost, "q");
  require_nonnegative(storage_cap, "C");
  require_nonnegative(transport_cost, "t");
  require_nonnegative(flow_cost, "r");
  require_nonnegative(transport_cap, "T");
  if (require_penalty_dominance) {
    for (std::size_t i = 0; i < n; ++i) {
      require(penalty_cost[i] >= inventory_cost[i],
              "penalty cost p_i must be >= inventory cost c_i at node " + std::to_string(i));
    }
  }
  require(support_lo.size() == support_hi.size(), "support_lo and support_hi differ in length");
  if (has_support()) {
    require_size(support_lo, n, "support_lo");
    for (std::size_t i = 0; i < n; ++i) {
      require(std::isfinite(support_lo[i]) && std::isfinite(support_hi[i]) &&
                  support_lo[i] <= support_hi[i],
              "support box must be finite with lo <= hi");
    }
  }
}

LeaderDecision LeaderDecision::zeros(const NetworkInstance& inst) {
  return {std::vector<double>(inst.nodes(), 0.0), std::vector<double>(inst.arc_count(), 0.0)};
}

FollowerDecision FollowerDecision::zeros(const NetworkInstance& inst) {
  return {std::vector<double>(inst.nodes(), 0.0), std::vector<double>(inst.arc_count(), 0.0)};
}

std::vector<double> EmpiricalDistribution::mean() const {
  std::vector<double> out(dimension(), 0.0);
  for (const Demand& d : samples) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += d[j];
  }
  for (double& v : out) v /= static_cast<double>(samples.size());
  return out;
}

void EmpiricalDistribution::validate() const {
  require(!samples.empty(), "empirical distribution needs at least one sample");
  const std::size_t dim = samples.front().size();
  for (const Demand& d : samples) {
    require(d.size() == dim, "samples differ in dimension");
    for (double v : d) require(std::isfinite(v), "non-finite sample value");
  }
}

const char* to_string(GroundNorm norm) {
  switch (norm) {
    case GroundNorm::L1: return "L1";
    case GroundNorm::L2: return "L2";
    case GroundNorm::Linf: return "Linf";
  }
  return "?";
}

GroundNorm parse_ground_norm(const char* text) {
  if (std::strcmp(text, "L1") == 0) return GroundNorm::L1;
  if (std::strcmp(text, "L2") == 0) return GroundNorm::L2;
  if (std::strcmp(text, "Linf") == 0) return GroundNorm::Linf;
  throw ValidationError(std::string("unknown ground norm '") + text + "'");
}

double AmbiguitySet::distance(std::span<const double> a, std::span<const double> b) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = weight(j) * std::abs(a[j] - b[j]);
    switch (ground_norm) {
      case GroundNorm::L1: acc += d; break;
      case GroundNorm::L2: acc += d * d; break;
      case GroundNorm::Linf: acc = std::max(acc, d); break;
    }
  }
  return ground_norm == GroundNorm::L2 ? std::sqrt(acc) : acc;
}

double AmbiguitySet::dual_norm(std::span<const double> v) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double d = std::abs(v[j]) / weight(j);
    switch (ground_norm) {
      case GroundNorm::L1: acc = std::max(acc, d); break;
      case GroundNorm::L2: acc += d * d; break;
      case GroundNorm::Linf: acc += d; break;
    }
  }
  return ground_norm == GroundNorm::L2 ? std::sqrt(acc) : acc;
}

void AmbiguitySet::validate() const {
  center.validate();
  require(std::isfinite(radius) && radius >= 0.0, "Wasserstein radius must be >= 0");
  require(lo.size() == hi.size() && lo.size() == center.dimension(),
          "support box dimension does not match the samples");
  require(metric_weights.empty() || metric_weights.size() == lo.size(),
          "metric weights dimension mismatch");
  for (double w : metric_weights) require(std::isfinite(w) && w > 0.0, "metric weights must be > 0");
  for (std::size_t j = 0; j < lo.size(); ++j) {
    require(std::isfinite(lo[j]) && std::isfinite(hi[j]) && lo[j] <= hi[j],
            "support box must be finite with lo <= hi");
  }
  for (const Demand& d : center.samples) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      require(d[j] >= lo[j] - 1e-9 && d[j] <= hi[j] + 1e-9, "sample lies outside the support box");
    }
  }
}

void default_support(const EmpiricalDistribution& dist, std::vector<double>& lo,
                     std::vector<double>& hi) {
  const std::size_t dim = dist.dimension();
  lo.assign(dim, 0.0);
  hi.assign(dim, 0.0);
  for (const Demand& d : dist.samples) {
    for (std::size_t j = 0; j < dim; ++j) hi[j] = std::max(hi[j], 2.0 * d[j]);
  }
}

AmbiguitySet make_ambiguity_set(const NetworkInstance& inst, EmpiricalDistribution center,
                                double radius, GroundNorm norm) {
  AmbiguitySet amb;
  if (inst.has_support()) {
    amb.lo = inst.support_lo;
    amb.hi = inst.support_hi;
  } else {
    default_support(center, amb.lo, amb.hi);
  }
  amb.center = std::move(center);
  amb.radius = radius;
  amb.ground_norm = norm;
  amb.validate();
  return amb;
}

void check_decision(const NetworkInstance& inst, const LeaderDecision& x) {
  require(x.inventory.size() == inst.nodes() && x.shipment.size() == inst.arc_count(),
          "leader decision dimension mismatch");
  constexpr double tol = 1e-6;
  for (std::size_t i = 0; i < inst.nodes(); ++i) {
    require(x.inventory[i] >= -tol && x.inventory[i] <= inst.storage_cap[i] + tol,
            "inventory outside [0, C_i] at node " + std::to_string(i));
  }
  for (std::size_t a = 0; a < inst.arc_count(); ++a) {
    require(x.shipment[a] >= -tol && x.shipment[a] <= inst.transport_cap[a] + tol,
            "shipment outside [0, T_ij] on arc " + std::to_string(a));
  }
}

void check_decision(const NetworkInstance& inst, const FollowerDecision& z) {
  require(z.allocation.size() == inst.nodes() && z.flow.size() == inst.arc_count(),
          "follower decision dimension mismatch");
  for (double v : z.allocation) require(v >= -1e-6, "negative allocation");
  for (double v : z.flow) require(v >= -1e-6, "negative flow");
}

std::vector<double> coverage(const NetworkInstance& inst, const LeaderDecision& x) {
  std::vector<double> cov = x.inventory;
  for (std::size_t a = 0; a < inst.arc_count(); ++a) {
    cov[static_cast<std::size_t>(inst.arcs[a].tail)] += x.shipment[a];
  }
  return cov;
}

double follower_cost(const NetworkInstance& inst, const FollowerDecision& z) {
  check_decision(inst, z);
  double cost = 0.0;
  for (std::size_t i = 0; i < inst.nodes(); ++i) cost += inst.alloc_cost[i] * z.allocation[i];
  for (std::size_t a = 0; a < inst.arc_count(); ++a) cost += inst.flow_cost[a] * z.flow[a];
  return cost;
}

double first_stage_cost(const NetworkInstance& inst, const LeaderDecision& x) {
  check_decision(inst, x);
  double cost = 0.0;
  for (std::size_t i = 0; i < inst.nodes(); ++i) cost += inst.inventory_cost[i] * x.inventory[i];
  for (std::size_t a = 0; a < inst.arc_count(); ++a) cost += inst.transport_cost[a] * x.shipment[a];
  return cost;
}

double unmet_demand(const NetworkInstance& inst, const LeaderDecision& x,
                    std::span<const double> demand) {
  require(demand.size() == inst.nodes(), "demand dimension mismatch");
  const std::vector<double> cov = coverage(inst, x);
  double unmet = 0.0;
  for (std::size_t i = 0; i < inst.nodes(); ++i) unmet += std::max(0.0, demand[i] - cov[i]);
  return unmet;
}

double leader_cost(const NetworkInstance& inst, const LeaderDecision& x,
                   const FollowerDecision& z, std::span<const double> demand) {
  require(demand.size() == inst.nodes(), "demand dimension mismatch");
  const std::vector<double> cov = coverage(inst, x);
  double cost = first_stage_cost(inst, x);
  for (std::size_t i = 0; i < inst.nodes(); ++i) {
    cost += inst.penalty_cost[i] * std::max(0.0, demand[i] - cov[i]);
  }
  return cost + follower_cost(inst, z);
}

double service_level(const NetworkInstance& inst, const LeaderDecision& x,
                     std::span<const Demand> samples) {
  require(!samples.empty(), "service level needs at least one sample");
  check_decision(inst, x);
  const std::vector<double> cov = coverage(inst, x);
  double unmet = 0.0;
  double total = 0.0;
  for (const Demand& d : samples) {
    require(d.size() == inst.nodes(), "demand dimension mismatch");
    for (std::size_t i = 0; i < inst.nodes(); ++i) {
      unmet += std::max(0.0, d[i] - cov[i]);
      total += d[i];
    }
  }
  if (total <= 0.0) return 1.0;
  return std::clamp(1.0 - unmet / total, 0.0, 1.0);
}

}  // namespace bidro
