#pragma once

#include "rcw/conditional.hpp"
#include "rcw/simulator.hpp"

#include <json.hpp>

#include <ostream>
#include <string>

namespace rcw {

inline constexpr int kSchemaVersion = 1;

// Non-finite doubles become the strings "inf", "-inf" or "nan".
nlohmann::json number_or_sentinel(double x);

nlohmann::json to_json(const ConditionalResult& result);
nlohmann::json to_json(const ConfidenceSet& set);
nlohmann::json to_json(const ExperimentReport& report);
nlohmann::json to_json(const DGPDesign& design);

// Serializes with every floating-point value printed to 17 significant digits.
std::string dump_json(const nlohmann::json& j, int indent = 2);

}  // namespace rcw
