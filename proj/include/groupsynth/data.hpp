#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "groupsynth/matrix.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

enum class FeatureKind { Numeric, Binary, Categorical };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::optional<std::pair<double, double>> bounds;  // numeric only
  std::vector<std::string> categories;              // categorical only

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct Schema {
  std::vector<FeatureSpec> features;
  std::string group_column;
  std::vector<std::string> group_labels;
  std::vector<std::string> outcomes;

  // Throws Error{InvalidSpec} describing the first broken invariant.
  void validate() const;

  std::optional<std::size_t> find_feature(std::string_view name) const;
  std::size_t feature_index(std::string_view name) const;
  std::size_t group_index(std::string_view label) const;
  std::size_t outcome_index(std::string_view name) const;

  // Feature names followed by outcome names: the keys of a generation payload.
  std::vector<std::string> payload_keys() const;

  static Schema from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

// Accepts either a bare schema document or one with a top-level "schema" key
// (so a fixture spec file doubles as the schema for its CSV).
Schema load_schema(const std::filesystem::path& path);

// Categorical features hold the category index; binary features hold 0 or 1.
struct Row {
  std::vector<double> features;
  std::size_t group = 0;
  std::vector<int> outcomes;

  friend bool operator==(const Row&, const Row&) = default;
};

// Throws BoundsViolation / DimensionMismatch. `row_number` only feeds messages.
void validate_row(const Schema& schema, const Row& row, std::size_t row_number);

// Immutable after construction; every row has been validated against the schema.
class Table {
 public:
  Table(std::shared_ptr<const Schema> schema, std::vector<Row> rows);

  const Schema& schema() const noexcept { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const noexcept { return schema_; }
  std::span<const Row> rows() const noexcept { return rows_; }
  const Row& row(std::size_t i) const { return rows_.at(i); }
  std::size_t size() const noexcept { return rows_.size(); }

  std::vector<std::size_t> rows_in_group(std::size_t group) const;

 private:
  std::shared_ptr<const Schema> schema_;
  std::vector<Row> rows_;
};

Table load_table(const std::filesystem::path& path, std::shared_ptr<const Schema> schema);
void write_rows(const std::filesystem::path& path, const Schema& schema, std::span<const Row> rows);
inline void write_table(const std::filesystem::path& path, const Table& table) {
  write_rows(path, table.schema(), table.rows());
}

// ---------------------------------------------------------------------------
// Group sampling

enum class PromptSource {
  Minority,  // group-tailored: examples come from the minority group
  AllRows,   // generic: examples come from anywhere outside the training rows
};

struct SampleRequest {
  std::string majority;
  std::string minority;
  std::size_t n_maj = 1000;
  std::size_t n_min = 100;
  std::size_t k_prompt = 20;
  std::uint64_t seed = 0;
  PromptSource prompt_source = PromptSource::Minority;
  // Outcomes that must have at least one positive among the prompt examples.
  std::vector<std::string> positive_outcomes;
  std::size_t max_redraws = 1000;
};

// Index sets into the source table. The four sets are pairwise disjoint and
// the holdout is every row not used for training or prompting.
struct GroupSample {
  std::vector<std::size_t> majority_rows;
  std::vector<std::size_t> minority_rows;
  std::vector<std::size_t> prompt_example_rows;
  std::vector<std::size_t> holdout_rows;
  std::uint64_t seed = 0;
  std::string majority_label;
  std::string minority_label;

  friend bool operator==(const GroupSample&, const GroupSample&) = default;
};

GroupSample sample_groups(const Table& table, const SampleRequest& request);

// Draws k rows from `pool` until every outcome has a positive among them.
// Throws ConstraintInfeasible when an outcome has no positive in the pool at
// all, or when max_redraws draws all fail.
std::vector<std::size_t> select_prompt_examples(const Table& table,
                                                std::span<const std::size_t> pool,
                                                std::span<const std::string> outcomes,
                                                std::size_t k, std::uint64_t seed,
                                                std::size_t max_redraws = 1000);

// ---------------------------------------------------------------------------
// Model-facing encoding

enum class ColumnKind { Continuous, Binary, OneHot };

struct EncodedColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::size_t feature = 0;  // source feature index
  int block = -1;           // one-hot block id (categorical feature index), else -1
};

// Numeric and binary features map to one column each; categorical features
// map to one-hot columns, with the first category dropped when drop_first.
class Encoder {
 public:
  explicit Encoder(const Schema& schema, bool drop_first = true);

  std::size_t width() const noexcept { return columns_.size(); }
  const std::vector<EncodedColumn>& columns() const noexcept { return columns_; }
  bool drop_first() const noexcept { return drop_first_; }

  void encode(const Row& row, std::span<double> out) const;
  Matrix encode(std::span<const Row> rows) const;
  Matrix encode(const Table& table, std::span<const std::size_t> indices) const;

 private:
  std::vector<EncodedColumn> columns_;
  std::vector<std::size_t> offsets_;  // first column of each feature
  std::vector<FeatureKind> kinds_;
  bool drop_first_;
};

// ---------------------------------------------------------------------------
// Calibrated fixture generation

struct FeatureDistribution {
  double mean = 0.0;          // numeric
  double sd = 1.0;            // numeric
  std::optional<int> decimals;  // numeric: round generated values
  double p = 0.5;             // binary
  std::vector<double> probs;  // categorical, one per category

  friend bool operator==(const FeatureDistribution&, const FeatureDistribution&) = default;
};

struct FeatureCorrelation {
  std::string a;
  std::string b;
  double rho = 0.0;

  friend bool operator==(const FeatureCorrelation&, const FeatureCorrelation&) = default;
};

// Logistic outcome model on raw feature values. Categorical features take
// coefficients keyed "feature=category". When target_prevalence is set, the
// intercept is recalibrated so the group's expected prevalence hits it.
struct OutcomeModel {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
  std::optional<double> target_prevalence;

  friend bool operator==(const OutcomeModel&, const OutcomeModel&) = default;
};

struct GroupFixture {
  std::string label;
  std::size_t size = 0;
  std::map<std::string, FeatureDistribution> features;
  std::vector<FeatureCorrelation> correlations;
  std::map<std::string, OutcomeModel> outcomes;

  friend bool operator==(const GroupFixture&, const GroupFixture&) = default;
};

struct FixtureSpec {
  Schema schema;
  std::vector<GroupFixture> groups;

  void validate() const;

  static FixtureSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

FixtureSpec load_fixture_spec(const std::filesystem::path& path);

// The "true" data-generating process behind a FixtureSpec. Intercepts for
// prevalence targets are calibrated once, against a fixed Monte Carlo sample,
// so the fixture table and oracle-mode generation share identical parameters.
class FixtureModel {
 public:
  explicit FixtureModel(FixtureSpec spec);

  const FixtureSpec& spec() const noexcept { return spec_; }
  const Schema& schema() const noexcept { return spec_.schema; }
  const std::shared_ptr<const Schema>& schema_ptr() const noexcept { return schema_; }

  // Index into spec().groups, or nullopt when the label has no fixture.
  std::optional<std::size_t> find_group(std::string_view label) const;

  double intercept(std::size_t fixture_group, std::size_t outcome) const;
  double expected_prevalence(std::size_t fixture_group, std::size_t outcome) const;

  std::vector<Row> sample(std::size_t fixture_group, std::size_t n, Rng& rng) const;

 private:
  struct GroupParams;
  FixtureSpec spec_;
  std::shared_ptr<const Schema> schema_;
  std::vector<std::shared_ptr<const GroupParams>> params_;

  std::vector<double> draw_features(const GroupParams& params, Rng& rng) const;
  double mean_probability(const GroupParams& params, std::size_t outcome, double intercept,
                          const std::vector<std::vector<double>>& draws) const;
};

Table make_fixture(const FixtureSpec& spec, std::uint64_t seed);
Table make_fixture(const FixtureModel& model, std::uint64_t seed);

}  // namespace groupsynth
