#pragma once

// Hand-built instances shared by the test suite. These are written out
// literally rather than taken from the generator so the generator can be
// checked against them.

#include <vector>

#include "bidro/problem.hpp"

namespace fixture {

// Fixture T1: two nodes, one arc 0 -> 1.
inline bidro::NetworkInstance t1() {
  bidro::NetworkInstance inst;
  inst.node_count = 2;
  inst.arcs = {{0, 1}};
  inst.inventory_cost = {1.0, 1.0};
  inst.penalty_cost = {4.0, 3.0};
  inst.alloc_cost = {0.5, 0.5};
  inst.storage_cap = {10.0, 8.0};
  inst.transport_cost = {0.5};
  inst.flow_cost = {0.2};
  inst.transport_cap = {4.0};
  inst.support_lo = {2.0, 2.0};
  inst.support_hi = {8.0, 6.0};
  return inst;
}

// One node, no arcs.
inline bidro::NetworkInstance single(double c, double p, double q, double cap, double lo,
                                     double hi) {
  bidro::NetworkInstance inst;
  inst.node_count = 1;
  inst.inventory_cost = {c};
  inst.penalty_cost = {p};
  inst.alloc_cost = {q};
  inst.storage_cap = {cap};
  inst.support_lo = {lo};
  inst.support_hi = {hi};
  return inst;
}

inline bidro::EmpiricalDistribution samples(std::vector<std::vector<double>> s) {
  return bidro::EmpiricalDistribution{std::move(s)};
}

}  // namespace fixture
