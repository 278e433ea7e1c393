#include "bidro/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bidro/errors.hpp"

namespace bidro {
namespace detail {
extern const std::string_view kSiouxFallsNetText;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// Spread of the demand box around its centre, in units of the mean.
constexpr double kRelativeStd = 0.25;
// Mean demand per node as a fraction of its outgoing link capacity.
constexpr double kDemandPerCapacity = 0.002;

struct Link {
  int tail, head;
  double capacity, fft;
};

std::vector<Link> parse_links(std::string_view text) {
  std::vector<Link> links;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Link l{};
    if (!(row >> l.tail >> l.head >> l.capacity >> l.fft)) {
      throw ValidationError("malformed network line: " + line);
    }
    links.push_back(l);
  }
  return links;
}

NetworkInstance from_links(int nodes, const std::vector<Link>& links) {
  NetworkInstance inst;
  inst.node_count = nodes;
  std::vector<double> out_cap(static_cast<std::size_t>(nodes), 0.0);
  for (const Link& l : links) {
    inst.arcs.push_back({l.tail, l.head});
    inst.transport_cost.push_back(0.1 * l.fft);
    inst.flow_cost.push_back(0.05 * l.fft);
    inst.transport_cap.push_back(0.002 * l.capacity);
    out_cap[static_cast<std::size_t>(l.tail)] += l.capacity;
  }
  for (int i = 0; i < nodes; ++i) {
    const double mean = kDemandPerCapacity * out_cap[static_cast<std::size_t>(i)];
    inst.inventory_cost.push_back(1.0);
    inst.penalty_cost.push_back(4.0);
    inst.alloc_cost.push_back(0.5);
    inst.storage_cap.push_back(1.5 * mean);
    inst.support_lo.push_back(mean * (1.0 - 2.0 * kRelativeStd));
    inst.support_hi.push_back(mean * (1.0 + 2.0 * kRelativeStd));
  }
  return inst;
}

NetworkInstance sioux_falls() {
  std::vector<Link> links = parse_links(detail::kSiouxFallsNetText);
  for (Link& l : links) {
    --l.tail;
    --l.head;
  }
  return from_links(24, links);
}

NetworkInstance ring(int n) {
  require(n >= 3, "ring topology needs at least 3 nodes");
  std::vector<Link> links;
  for (int i = 0; i < n; ++i) {
    const double cap = 5000.0 + 1000.0 * ((3 * i) % 4);
    const double fft = 1.0 + ((7 * i + 3) % 5);
    links.push_back({i, (i + 1) % n, cap, fft});
    links.push_back({i, (i + n - 1) % n, cap, fft});
  }
  return from_links(n, links);
}

NetworkInstance tiny2() {
  NetworkInstance inst;
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

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

const char* to_string(Topology t) {
  switch (t) {
    case Topology::SiouxFalls24: return "SiouxFalls24";
    case Topology::Ring: return "Ring";
    case Topology::Tiny2: return "Tiny2";
  }
  return "?";
}

Topology parse_topology(const std::string& text) {
  if (text == "SiouxFalls24") return Topology::SiouxFalls24;
  if (text == "Ring") return Topology::Ring;
  if (text == "Tiny2") return Topology::Tiny2;
  throw ValidationError("unknown topology '" + text + "' (expected SiouxFalls24, Ring or Tiny2)");
}

void ScenarioSpec::validate() const {
  require(samples >= 1, "sample count must be >= 1");
  require(std::abs(forecast_error) <= 0.5, "forecast error must lie in [-0.5, 0.5]");
  if (topology == Topology::Ring) require(ring_nodes >= 3, "ring topology needs at least 3 nodes");
}

NetworkInstance gen_instance(const ScenarioSpec& spec) {
  spec.validate();
  NetworkInstance inst;
  switch (spec.topology) {
    case Topology::SiouxFalls24: inst = sioux_falls(); break;
    case Topology::Ring: inst = ring(spec.ring_nodes); break;
    case Topology::Tiny2: inst = tiny2(); break;
  }
  inst.validate();
  return inst;
}

void DemandModel::validate() const {
  const std::size_t n = mean.size();
  require(stddev.size() == n && lo.size() == n && hi.size() == n, "demand model dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    require(stddev[i] >= 0.0 && lo[i] <= hi[i], "demand model needs stddev >= 0 and lo <= hi");
    require(mean[i] >= lo[i] && mean[i] <= hi[i], "demand mean must lie in its box");
  }
}

DemandModel demand_model(const NetworkInstance& inst) {
  require(inst.has_support(), "instance has no demand support box; the demand model is undefined");
  DemandModel m;
  m.lo = inst.support_lo;
  m.hi = inst.support_hi;
  for (std::size_t i = 0; i < inst.nodes(); ++i) {
    m.mean.push_back(0.5 * (m.lo[i] + m.hi[i]));
    m.stddev.push_back(0.25 * (m.hi[i] - m.lo[i]));
  }
  return m;
}

DemandModel shifted(const DemandModel& model, double shift) {
  require(shift > -1.0, "demand shift must be > -1");
  DemandModel m = model;
  for (auto* v : {&m.mean, &m.stddev, &m.lo, &m.hi}) {
    for (double& e : *v) e *= 1.0 + shift;
  }
  return m;
}

double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t sample,
                     std::uint64_t node) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ sample);
  h = splitmix64(h ^ node);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal quantile needs p in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

EmpiricalDistribution sample_demands(const DemandModel& model, std::size_t n, std::uint64_t seed,
                                     std::uint64_t stream) {
  model.validate();
  require(n >= 1, "sample count must be >= 1");
  const std::size_t dim = model.mean.size();
  EmpiricalDistribution dist;
  dist.samples.assign(n, Demand(dim, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double mu = model.mean[i];
      const double sd = model.stddev[i];
      if (sd <= 0.0) {
        dist.samples[s][i] = mu;
        continue;
      }
      const double fa = normal_cdf((model.lo[i] - mu) / sd);
      const double fb = normal_cdf((model.hi[i] - mu) / sd);
      const double u = fa + keyed_uniform(seed, stream, s, i) * (fb - fa);
      const double p = std::clamp(u, 1e-300, 1.0 - 1e-16);
      dist.samples[s][i] = std::clamp(mu + sd * normal_quantile(p), model.lo[i], model.hi[i]);
    }
  }
  return dist;
}

EmpiricalDistribution apply_forecast_error(const EmpiricalDistribution& dist, double bias,
                                           const std::vector<double>& lo,
                                           const std::vector<double>& hi) {
  require(std::abs(bias) <= 0.5, "forecast error must lie in [-0.5, 0.5]");
  require(lo.size() == dist.dimension() && hi.size() == dist.dimension(),
          "forecast error box dimension mismatch");
  EmpiricalDistribution out = dist;
  for (Demand& d : out.samples) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(d[i] * (1.0 + bias), lo[i], hi[i]);
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view sioux_falls_network_text() { return detail::kSiouxFallsNetText; }

}  // namespace bidro
