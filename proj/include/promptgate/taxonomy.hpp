#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace promptgate {

// The three mutually exclusive prompt classes, in pinned order. Ties and
// serialized label tables follow this order everywhere.
enum class Label : int { kBenign = 0, kJailbreak = 1, kPromptInjection = 2 };

inline constexpr int kNumLabels = 3;

inline const std::array<std::string, 3>& label_names() {
  static const std::array<std::string, 3> kNames = {"benign", "jailbreak",
                                                    "prompt-injection"};
  return kNames;
}

inline const std::string& to_string(Label l) {
  return label_names()[static_cast<int>(l)];
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "benign") return Label::kBenign;
  if (s == "jailbreak") return Label::kJailbreak;
  if (s == "prompt-injection") return Label::kPromptInjection;
  return std::nullopt;
}

inline bool is_malicious(Label l) { return l != Label::kBenign; }

}  // namespace promptgate
