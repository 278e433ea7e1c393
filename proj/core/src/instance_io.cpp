#include "bidro/instance_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bidro/errors.hpp"

namespace bidro {
namespace {

using nlohmann::json;

json parse_or_throw(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

void check_fields(const json& doc, const std::set<std::string>& allowed,
                  std::string_view format) {
  if (!doc.is_object()) throw ValidationError("top-level JSON value must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.contains(key)) throw ValidationError("unknown top-level field '" + key + "'");
  }
  if (!doc.contains("format") || doc["format"] != format) {
    throw ValidationError("missing or wrong 'format' (expected " + std::string(format) + ")");
  }
}

std::vector<double> numbers(const json& doc, const char* key, bool required = true) {
  if (!doc.contains(key)) {
    if (required) throw ValidationError(std::string("missing field '") + key + "'");
    return {};
  }
  try {
    return doc.at(key).get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field '") + key + "' must be an array of numbers");
  }
}

}  // namespace

NetworkInstance parse_instance_json(std::string_view text, bool require_penalty_dominance) {
  const json doc = parse_or_throw(text);
  check_fields(doc,
               {"format", "nodes", "arcs", "c", "t", "p", "q", "r", "C", "T", "support_lo",
                "support_hi"},
               kInstanceFormat);
  NetworkInstance inst;
  try {
    inst.node_count = doc.at("nodes").get<int>();
    for (const auto& arc : doc.at("arcs")) {
      if (!arc.is_array() || arc.size() != 2) throw ValidationError("arcs must be [tail, head] pairs");
      inst.arcs.push_back({arc[0].get<int>(), arc[1].get<int>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad nodes/arcs: ") + e.what());
  }
  inst.inventory_cost = numbers(doc, "c");
  inst.transport_cost = numbers(doc, "t");
  inst.penalty_cost = numbers(doc, "p");
  inst.alloc_cost = numbers(doc, "q");
  inst.flow_cost = numbers(doc, "r");
  inst.storage_cap = numbers(doc, "C");
  inst.transport_cap = numbers(doc, "T");
  inst.support_lo = numbers(doc, "support_lo", false);
  inst.support_hi = numbers(doc, "support_hi", false);
  inst.validate(require_penalty_dominance);
  return inst;
}

std::string instance_to_json(const NetworkInstance& inst) {
  json doc;
  doc["format"] = kInstanceFormat;
  doc["nodes"] = inst.node_count;
  json arcs = json::array();
  for (const Arc& a : inst.arcs) arcs.push_back({a.tail, a.head});
  doc["arcs"] = arcs;
  doc["c"] = inst.inventory_cost;
  doc["t"] = inst.transport_cost;
  doc["p"] = inst.penalty_cost;
  doc["q"] = inst.alloc_cost;
  doc["r"] = inst.flow_cost;
  doc["C"] = inst.storage_cap;
  doc["T"] = inst.transport_cap;
  if (inst.has_support()) {
    doc["support_lo"] = inst.support_lo;
    doc["support_hi"] = inst.support_hi;
  }
  return doc.dump(1) + "\n";
}

NetworkInstance read_instance(const std::filesystem::path& path, bool require_penalty_dominance) {
  return parse_instance_json(read_text_file(path), require_penalty_dominance);
}

void write_instance(const std::filesystem::path& path, const NetworkInstance& inst) {
  write_text_file(path, instance_to_json(inst));
}

Plan parse_plan_json(std::string_view text) {
  const json doc = parse_or_throw(text);
  check_fields(doc, {"format", "method", "objective", "x", "y"}, kPlanFormat);
  Plan plan;
  plan.method = doc.value("method", std::string{});
  plan.objective = doc.value("objective", 0.0);
  plan.decision.inventory = numbers(doc, "x");
  plan.decision.shipment = numbers(doc, "y");
  return plan;
}

std::string plan_to_json(const Plan& plan) {
  json doc;
  doc["format"] = kPlanFormat;
  doc["method"] = plan.method;
  doc["objective"] = plan.objective;
  doc["x"] = plan.decision.inventory;
  doc["y"] = plan.decision.shipment;
  return doc.dump(1) + "\n";
}

Plan read_plan(const std::filesystem::path& path) { return parse_plan_json(read_text_file(path)); }

void write_plan(const std::filesystem::path& path, const Plan& plan) {
  write_text_file(path, plan_to_json(plan));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace bidro
