#pragma once

// Seeded instance and demand generation.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bidro/problem.hpp"

namespace bidro {

enum class Topology { SiouxFalls24, Ring, Tiny2 };

const char* to_string(Topology t);
Topology parse_topology(const std::string& text);

struct ScenarioSpec {
  Topology topology = Topology::SiouxFalls24;
  int ring_nodes = 6;  // Ring only
  std::uint64_t seed = 1;
  std::size_t samples = 50;
  double forecast_error = 0.0;  // multiplicative bias on the training draws

  void validate() const;
};

// Pure function of the topology. The demand box is part of the instance.
NetworkInstance gen_instance(const ScenarioSpec& spec);

// Per-node truncated normal. Every generated instance uses
//   mean = box centre, stddev = box width / 4,
// so the demand law can be recovered from any instance file.
struct DemandModel {
  std::vector<double> mean, stddev, lo, hi;

  void validate() const;
};

DemandModel demand_model(const NetworkInstance& inst);

// Mean, stddev and box all scaled by (1 + shift).
DemandModel shifted(const DemandModel& model, double shift);

// N draws from a counter-based generator keyed on (seed, stream, sample,
// node); draws are independent of evaluation order.
EmpiricalDistribution sample_demands(const DemandModel& model, std::size_t n, std::uint64_t seed,
                                     std::uint64_t stream = 0);

// Every sample scaled by (1 + bias) and clipped back into [lo, hi].
EmpiricalDistribution apply_forecast_error(const EmpiricalDistribution& dist, double bias,
                                           const std::vector<double>& lo,
                                           const std::vector<double>& hi);

// Keyed uniform in (0, 1).
double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t sample,
                     std::uint64_t node);

double normal_cdf(double z);
double normal_quantile(double p);

std::uint64_t fnv1a64(std::string_view bytes);

// The vendored Sioux Falls link table, as embedded at build time.
std::string_view sioux_falls_network_text();

}  // namespace bidro
