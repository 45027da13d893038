#include "groupsynth/prompt.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "groupsynth/error.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

std::string format_payload_number(double value) {
  char buf[40];
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(value));
  } else {
    std::snprintf(buf, sizeof buf, "%.6g", value);
  }
  return buf;
}

std::string serialize_examples(std::span<const Row> rows, const Schema& schema) {
  if (rows.empty()) throw Error(ErrorKind::EmptyExamples, "no example rows to serialize");
  std::string out = "{";
  auto key = [&](const std::string& name) {
    if (out.size() > 1) out += ", ";
    out += nlohmann::json(name).dump();
    out += ": [";
  };
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto& f = schema.features[j];
    key(f.name);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out += ", ";
      const double v = rows[i].features[j];
      if (f.kind == FeatureKind::Categorical) {
        out += nlohmann::json(f.categories.at(static_cast<std::size_t>(v))).dump();
      } else if (f.kind == FeatureKind::Binary) {
        out += v != 0.0 ? "1" : "0";
      } else {
        out += format_payload_number(v);
      }
    }
    out += "]";
  }
  for (std::size_t o = 0; o < schema.outcomes.size(); ++o) {
    key(schema.outcomes[o]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) out += ", ";
      out += rows[i].outcomes[o] ? "1" : "0";
    }
    out += "]";
  }
  out += "}";
  return out;
}

PromptSpec build_prompt(const Schema& schema, std::span<const Row> examples, std::string_view dataset_context,
                        const PromptVariant& variant, std::size_t n_generate) {
  PromptSpec p;
  p.role_text = kRoleText;
  p.context_text = "Leverage your medical knowledge about " + std::string(dataset_context) + " to generate " +
                   std::to_string(n_generate) + " realistic but diverse samples";
  if (variant.group_label) p.context_text += " specifically for " + *variant.group_label + " patients";
  p.context_text += ".";
  p.examples_json = serialize_examples(examples, schema);
  p.instructions_text = kInstructionsText;
  p.variant = variant;
  p.n_generate = n_generate;
  return p;
}

std::string render(const PromptSpec& prompt) {
  std::string out;
  out.reserve(prompt.role_text.size() + prompt.context_text.size() + prompt.examples_json.size() +
              prompt.instructions_text.size() + 8);
  out += prompt.role_text;
  out += "\n\n";
  out += prompt.context_text;
  out += "\n\n";
  out += prompt.examples_json;
  out += "\n\n";
  out += prompt.instructions_text;
  out += "\n";
  return out;
}

std::string prompt_hash(std::string_view rendered) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(rendered)));
  return buf;
}

}  // namespace groupsynth
