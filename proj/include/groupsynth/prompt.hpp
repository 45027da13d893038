#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "groupsynth/data.hpp"

namespace groupsynth {

inline constexpr std::string_view kRoleText =
    "You are a synthetic data generator. Your goal is to produce data which mirrors the given "
    "examples in causal structure and feature and label distributions but also produce as diverse "
    "samples as possible. I will give you real examples first.";

inline constexpr std::string_view kInstructionsText =
    "DO NOT COPY THE EXAMPLES but generate realistic but new and diverse samples which have the "
    "correct labels conditioned on the features. Use the same JSON format as above.";

// Shipped dataset descriptions; any other string can be supplied.
inline constexpr std::string_view kHospitalContext = "hospital admissions and readmission";
inline constexpr std::string_view kHeartContext = "heart disease risk factors and outcomes";

struct PromptVariant {
  // Empty for the generic prompt; the group label for a group-tailored prompt.
  std::optional<std::string> group_label;

  static PromptVariant generic() { return {}; }
  static PromptVariant tailored(std::string label) { return {std::move(label)}; }
  bool is_generic() const noexcept { return !group_label.has_value(); }

  friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

struct PromptSpec {
  std::string role_text;
  std::string context_text;
  std::string examples_json;
  std::string instructions_text;
  PromptVariant variant;
  std::size_t n_generate = 10;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

// Formats one value the way it appears in an examples payload: integers
// without a decimal point, other numbers with up to 6 significant digits.
std::string format_payload_number(double value);

// {"<feature>": [v1, v2, ...], ..., "<outcome>": [...]} in schema order, on a
// single line. Binary values are 0/1 integers, categories are strings.
// Throws EmptyExamples for zero rows.
std::string serialize_examples(std::span<const Row> rows, const Schema& schema);

PromptSpec build_prompt(const Schema& schema, std::span<const Row> examples,
                        std::string_view dataset_context, const PromptVariant& variant,
                        std::size_t n_generate = 10);

// Role, Context, Examples and Instructions separated by one blank line, with a
// trailing newline.
std::string render(const PromptSpec& prompt);

// Stable 64-bit hash of the rendered prompt, as 16 hex digits.
std::string prompt_hash(std::string_view rendered);

}  // namespace groupsynth
