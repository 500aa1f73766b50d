#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace promptgate {

enum class Decision { kAllow, kBlock };

// One stage's verdict on a prompt, with whatever it matched on.
struct StageDecision {
  std::string stage_name;
  Decision decision = Decision::kAllow;
  std::optional<double> confidence;
  std::vector<std::string> matched_features;
  double elapsed_ms = 0.0;
  std::optional<std::string> error;  // set when fail_policy decided

  bool blocked() const { return decision == Decision::kBlock; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["stage"] = stage_name;
    j["decision"] = blocked() ? "block" : "allow";
    if (confidence) j["confidence"] = *confidence;
    j["matched_features"] = matched_features;
    j["elapsed_ms"] = elapsed_ms;
    if (error) j["error"] = *error;
    return j;
  }
};

// A defense stage: pure allow/block analysis over the raw prompt text.
class Stage {
 public:
  virtual ~Stage() = default;
  virtual const std::string& name() const = 0;
  virtual StageDecision analyse(std::string_view raw) const = 0;
};

}  // namespace promptgate
