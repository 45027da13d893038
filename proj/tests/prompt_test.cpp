#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "groupsynth/error.hpp"
#include "groupsynth/genclient.hpp"
#include "groupsynth/prompt.hpp"
#include "support.hpp"

using namespace groupsynth;
using namespace groupsynth::testing;

namespace {

Schema heart_schema() {
  Schema s;
  s.features.push_back({"Age", FeatureKind::Numeric, std::make_pair(0.0, 120.0), {}});
  s.features.push_back({"Sex (Male)", FeatureKind::Binary, std::nullopt, {}});
  s.features.push_back({"Systolic BP", FeatureKind::Numeric, std::make_pair(60.0, 260.0), {}});
  s.features.push_back({"Smoking", FeatureKind::Categorical, std::nullopt, {"never", "former", "current"}});
  s.group_column = "Race";
  s.group_labels = {"White", "Asian", "Black", "Hispanic"};
  s.outcomes = {"CVD", "CHD", "CHF"};
  return s;
}

std::vector<Row> heart_rows() {
  return {{{27, 1, 121.5, 0}, 1, {0, 0, 0}}, {{68, 0, 140, 2}, 1, {0, 1, 1}}, {{13, 0, 98.25, 1}, 1, {1, 0, 0}}};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(SerializeExamples, ColumnFragments) {
  const std::string json = serialize_examples(heart_rows(), heart_schema());
  EXPECT_NE(json.find("\"Age\": [27, 68, 13]"), std::string::npos) << json;
  EXPECT_NE(json.find("\"Sex (Male)\": [1, 0, 0]"), std::string::npos);
  EXPECT_NE(json.find("\"Smoking\": [\"never\", \"current\", \"former\"]"), std::string::npos);
}

TEST(SerializeExamples, SmallestCase) {
  Schema s;
  s.features.push_back({"Sex (Male)", FeatureKind::Binary, std::nullopt, {}});
  s.group_column = "g";
  s.group_labels = {"a", "b"};
  s.outcomes = {};
  const std::vector<Row> rows = {{{1}, 0, {}}};
  EXPECT_EQ(serialize_examples(rows, s), "{\"Sex (Male)\": [1]}");
}

TEST(SerializeExamples, ZeroRowsThrows) {
  try {
    serialize_examples({}, heart_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyExamples);
  }
}

TEST(SerializeExamples, NumberFormatting) {
  EXPECT_EQ(format_payload_number(27), "27");
  EXPECT_EQ(format_payload_number(-3), "-3");
  EXPECT_EQ(format_payload_number(98.25), "98.25");
  EXPECT_EQ(format_payload_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_payload_number(123456.789), "123457");
}

TEST(SerializeExamples, RoundTripThroughParser) {
  const Schema s = heart_schema();
  const auto rows = heart_rows();
  const auto parsed = parse_payload(serialize_examples(rows, s), s);
  ASSERT_EQ(parsed.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(parsed[i].features, rows[i].features);
    EXPECT_EQ(parsed[i].outcomes, rows[i].outcomes);
  }
  // Keys are exactly features then outcomes, arrays of equal length.
  const auto doc = nlohmann::json::parse(serialize_examples(rows, s));
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) {
    keys.push_back(k);
    EXPECT_EQ(v.size(), rows.size());
  }
  auto expected = s.payload_keys();
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(keys, expected);
}

TEST(BuildPrompt, TailoredContext) {
  const auto p = build_prompt(heart_schema(), heart_rows(), kHospitalContext, PromptVariant::tailored("Asian"), 10);
  EXPECT_NE(p.context_text.find("10 realistic but diverse samples specifically for Asian patients"), std::string::npos);
  EXPECT_NE(p.context_text.find(std::string(kHospitalContext)), std::string::npos);
  EXPECT_NE(p.instructions_text.find("DO NOT COPY THE EXAMPLES"), std::string::npos);
  EXPECT_FALSE(p.role_text.empty());
  EXPECT_FALSE(p.examples_json.empty());
}

TEST(BuildPrompt, GenericMentionsNoGroup) {
  const Schema s = heart_schema();
  const auto p = build_prompt(s, heart_rows(), kHeartContext, PromptVariant::generic(), 10);
  EXPECT_NE(p.context_text.find("10 realistic but diverse samples"), std::string::npos);
  const std::string text = render(p);
  for (const auto& label : s.group_labels) EXPECT_EQ(text.find(label), std::string::npos) << label;
  EXPECT_EQ(text.find("specifically for"), std::string::npos);
  EXPECT_NE(text.find("DO NOT COPY THE EXAMPLES"), std::string::npos);
}

TEST(Render, MatchesGoldenFiles) {
  const Schema s = heart_schema();
  const auto tailored = build_prompt(s, heart_rows(), kHeartContext, PromptVariant::tailored("Asian"), 10);
  const auto generic = build_prompt(s, heart_rows(), kHeartContext, PromptVariant::generic(), 10);
  EXPECT_EQ(render(tailored), slurp(golden_path("prompt_tailored.txt")));
  EXPECT_EQ(render(generic), slurp(golden_path("prompt_generic.txt")));
}

TEST(Render, SectionOrderAndPurity) {
  const auto p = build_prompt(heart_schema(), heart_rows(), kHeartContext, PromptVariant::tailored("Black"), 7);
  const std::string text = render(p);
  EXPECT_EQ(text, render(p));
  const auto role = text.find("You are a synthetic data generator.");
  const auto context = text.find("Leverage your medical knowledge");
  const auto examples = text.find("{\"Age\"");
  const auto instructions = text.find("DO NOT COPY THE EXAMPLES");
  EXPECT_EQ(role, 0u);
  EXPECT_LT(role, context);
  EXPECT_LT(context, examples);
  EXPECT_LT(examples, instructions);
  EXPECT_NE(text.find("Use the same JSON format as above"), std::string::npos);
  EXPECT_NE(text.find("generate 7 realistic"), std::string::npos);
  EXPECT_EQ(prompt_hash(text), prompt_hash(render(p)));
  EXPECT_EQ(prompt_hash(text).size(), 16u);
}

TEST(Render, GenericNeverLeaksLabelsOnRandomExamples) {
  const Schema s = small_schema();
  const Table t = small_table({200, 200, 200}, 9);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Row> ex;
    for (auto i : sample_without_replacement(t.size(), 20, rng)) ex.push_back(t.row(i));
    const std::string text = render(build_prompt(s, ex, kHospitalContext, PromptVariant::generic()));
    for (const auto& label : s.group_labels) ASSERT_EQ(text.find(label), std::string::npos);
  }
}
