#pragma once

// `bidro-instance-v1` and `bidro-plan-v1` JSON documents.

#include <filesystem>
#include <string>
#include <string_view>

#include "bidro/problem.hpp"

namespace bidro {

inline constexpr std::string_view kInstanceFormat = "bidro-instance-v1";
inline constexpr std::string_view kPlanFormat = "bidro-plan-v1";

// Rejects unknown top-level fields, a wrong `format` tag, and anything that
// fails NetworkInstance::validate(). Throws ValidationError.
NetworkInstance parse_instance_json(std::string_view text, bool require_penalty_dominance = true);
std::string instance_to_json(const NetworkInstance& inst);

NetworkInstance read_instance(const std::filesystem::path& path,
                              bool require_penalty_dominance = true);
void write_instance(const std::filesystem::path& path, const NetworkInstance& inst);

struct Plan {
  std::string method;
  double objective = 0.0;
  LeaderDecision decision;
};

Plan parse_plan_json(std::string_view text);
std::string plan_to_json(const Plan& plan);
Plan read_plan(const std::filesystem::path& path);
void write_plan(const std::filesystem::path& path, const Plan& plan);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace bidro
