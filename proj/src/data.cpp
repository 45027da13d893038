#include "groupsynth/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "groupsynth/csv.hpp"
#include "groupsynth/error.hpp"

namespace groupsynth {

using nlohmann::json;

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Numeric: return "numeric";
    case FeatureKind::Binary: return "binary";
    case FeatureKind::Categorical: return "categorical";
  }
  return "numeric";
}

FeatureKind feature_kind_from_string(std::string_view text) {
  if (text == "numeric") return FeatureKind::Numeric;
  if (text == "binary") return FeatureKind::Binary;
  if (text == "categorical") return FeatureKind::Categorical;
  throw Error(ErrorKind::InvalidSpec, "unknown feature kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Schema

void Schema::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidSpec, msg); };
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) fail("feature with empty name");
    if (!names.insert(f.name).second) fail("duplicate feature '" + f.name + "'");
    switch (f.kind) {
      case FeatureKind::Numeric:
        if (f.bounds && !(f.bounds->first <= f.bounds->second)) {
          fail("feature '" + f.name + "' has min > max");
        }
        break;
      case FeatureKind::Categorical: {
        if (f.categories.size() < 2) fail("categorical feature '" + f.name + "' needs >= 2 categories");
        std::set<std::string> cats(f.categories.begin(), f.categories.end());
        if (cats.size() != f.categories.size()) fail("feature '" + f.name + "' repeats a category");
        break;
      }
      case FeatureKind::Binary:
        break;
    }
  }
  if (group_column.empty()) fail("group_column is empty");
  if (names.count(group_column)) fail("group column '" + group_column + "' is also a feature");
  if (group_labels.empty()) fail("no group labels");
  std::set<std::string> labels(group_labels.begin(), group_labels.end());
  if (labels.size() != group_labels.size()) fail("duplicate group label");
  if (outcomes.empty()) fail("schema needs at least one outcome");
  for (const auto& o : outcomes) {
    if (o.empty()) fail("outcome with empty name");
    if (o == group_column) fail("outcome '" + o + "' is the group column");
    if (!names.insert(o).second) fail("outcome '" + o + "' duplicates another column");
  }
}

std::optional<std::size_t> Schema::find_feature(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::feature_index(std::string_view name) const {
  if (auto i = find_feature(name)) return *i;
  throw Error(ErrorKind::SchemaMismatch, "unknown feature '" + std::string(name) + "'");
}

std::size_t Schema::group_index(std::string_view label) const {
  auto it = std::find(group_labels.begin(), group_labels.end(), label);
  if (it == group_labels.end()) {
    throw Error(ErrorKind::SchemaMismatch, "unknown group label '" + std::string(label) + "'");
  }
  return static_cast<std::size_t>(it - group_labels.begin());
}

std::size_t Schema::outcome_index(std::string_view name) const {
  auto it = std::find(outcomes.begin(), outcomes.end(), name);
  if (it == outcomes.end()) {
    throw Error(ErrorKind::SchemaMismatch, "unknown outcome '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - outcomes.begin());
}

std::vector<std::string> Schema::payload_keys() const {
  std::vector<std::string> keys;
  keys.reserve(features.size() + outcomes.size());
  for (const auto& f : features) keys.push_back(f.name);
  keys.insert(keys.end(), outcomes.begin(), outcomes.end());
  return keys;
}

Schema Schema::from_json(const json& doc) {
  Schema s;
  try {
    for (const auto& jf : doc.at("features")) {
      FeatureSpec f;
      f.name = jf.at("name").get<std::string>();
      f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
      if (jf.contains("bounds") && !jf["bounds"].is_null()) {
        const auto& b = jf["bounds"];
        if (!b.is_array() || b.size() != 2) {
          throw Error(ErrorKind::InvalidSpec, "bounds of '" + f.name + "' must be [min, max]");
        }
        f.bounds = std::make_pair(b[0].get<double>(), b[1].get<double>());
      }
      if (jf.contains("categories")) f.categories = jf["categories"].get<std::vector<std::string>>();
      s.features.push_back(std::move(f));
    }
    s.group_column = doc.at("group_column").get<std::string>();
    s.group_labels = doc.at("group_labels").get<std::vector<std::string>>();
    s.outcomes = doc.at("outcomes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("schema: ") + e.what());
  }
  s.validate();
  return s;
}

json Schema::to_json() const {
  json jf = json::array();
  for (const auto& f : features) {
    json item = {{"name", f.name}, {"kind", to_string(f.kind)}};
    if (f.bounds) item["bounds"] = {f.bounds->first, f.bounds->second};
    if (f.kind == FeatureKind::Categorical) item["categories"] = f.categories;
    jf.push_back(std::move(item));
  }
  return {{"features", jf},
          {"group_column", group_column},
          {"group_labels", group_labels},
          {"outcomes", outcomes}};
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, path.string() + ": " + e.what());
  }
}

}  // namespace

Schema load_schema(const std::filesystem::path& path) {
  json doc = read_json_file(path);
  if (doc.contains("schema")) return Schema::from_json(doc["schema"]);
  return Schema::from_json(doc);
}

// ---------------------------------------------------------------------------
// Rows and tables

void validate_row(const Schema& schema, const Row& row, std::size_t row_number) {
  if (row.features.size() != schema.features.size() || row.outcomes.size() != schema.outcomes.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "row " + std::to_string(row_number) + " does not match schema width");
  }
  auto violation = [&](const std::string& column, const std::string& detail) {
    throw Error(ErrorKind::BoundsViolation,
                "row " + std::to_string(row_number) + ", column '" + column + "': " + detail);
  };
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto& f = schema.features[j];
    const double v = row.features[j];
    if (!std::isfinite(v)) violation(f.name, "non-finite value");
    switch (f.kind) {
      case FeatureKind::Numeric:
        if (f.bounds && (v < f.bounds->first || v > f.bounds->second)) {
          violation(f.name, csv::format_exact(v) + " outside [" + csv::format_exact(f.bounds->first) +
                                ", " + csv::format_exact(f.bounds->second) + "]");
        }
        break;
      case FeatureKind::Binary:
        if (v != 0.0 && v != 1.0) violation(f.name, "binary value must be 0 or 1");
        break;
      case FeatureKind::Categorical:
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(f.categories.size())) {
          violation(f.name, "invalid category index");
        }
        break;
    }
  }
  if (row.group >= schema.group_labels.size()) violation(schema.group_column, "invalid group index");
  for (std::size_t o = 0; o < schema.outcomes.size(); ++o) {
    if (row.outcomes[o] != 0 && row.outcomes[o] != 1) violation(schema.outcomes[o], "outcome must be 0 or 1");
  }
}

Table::Table(std::shared_ptr<const Schema> schema, std::vector<Row> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  if (!schema_) throw Error(ErrorKind::InvalidSpec, "table without schema");
  for (std::size_t i = 0; i < rows_.size(); ++i) validate_row(*schema_, rows_[i], i + 1);
}

std::vector<std::size_t> Table::rows_in_group(std::size_t group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].group == group) out.push_back(i);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
  cell = trim(cell);
  if (cell.empty()) throw ParseError(row, column, "missing value");
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw ParseError(row, column, "'" + std::string(cell) + "' is not a number");
  }
  return value;
}

std::string format_feature(const FeatureSpec& f, double v) {
  switch (f.kind) {
    case FeatureKind::Categorical: return f.categories.at(static_cast<std::size_t>(v));
    case FeatureKind::Binary: return v != 0.0 ? "1" : "0";
    case FeatureKind::Numeric: return csv::format_exact(v);
  }
  return {};
}

}  // namespace

Table load_table(const std::filesystem::path& path, std::shared_ptr<const Schema> schema) {
  const csv::Document doc = csv::read(path);
  const Schema& s = *schema;
  if (doc.header.empty()) throw Error(ErrorKind::SchemaMismatch, path.string() + ": missing header row");

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < doc.header.size(); ++i) {
    std::string name(trim(doc.header[i]));
    if (!col.emplace(name, i).second) {
      throw Error(ErrorKind::SchemaMismatch, "duplicate column '" + name + "'");
    }
  }
  std::vector<std::string> expected;
  for (const auto& f : s.features) expected.push_back(f.name);
  expected.push_back(s.group_column);
  expected.insert(expected.end(), s.outcomes.begin(), s.outcomes.end());
  for (const auto& name : expected) {
    if (!col.count(name)) throw Error(ErrorKind::SchemaMismatch, "missing column '" + name + "'");
  }
  if (col.size() != expected.size()) {
    std::set<std::string> known(expected.begin(), expected.end());
    for (const auto& [name, _] : col) {
      if (!known.count(name)) throw Error(ErrorKind::SchemaMismatch, "unexpected column '" + name + "'");
    }
  }

  std::vector<Row> rows;
  rows.reserve(doc.rows.size());
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& cells = doc.rows[r];
    const std::size_t row_no = r + 1;
    if (cells.size() != doc.header.size()) {
      throw ParseError(row_no, "*", "expected " + std::to_string(doc.header.size()) + " fields, got " +
                                        std::to_string(cells.size()));
    }
    Row row;
    row.features.resize(s.features.size());
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      const auto& f = s.features[j];
      std::string_view cell = trim(cells[col[f.name]]);
      if (f.kind == FeatureKind::Categorical) {
        if (cell.empty()) throw ParseError(row_no, f.name, "missing value");
        auto it = std::find(f.categories.begin(), f.categories.end(), cell);
        if (it == f.categories.end()) {
          throw Error(ErrorKind::BoundsViolation, "row " + std::to_string(row_no) + ", column '" + f.name +
                                                      "': unknown category '" + std::string(cell) + "'");
        }
        row.features[j] = static_cast<double>(it - f.categories.begin());
      } else {
        row.features[j] = parse_number(cell, row_no, f.name);
      }
    }
    std::string_view label = trim(cells[col[s.group_column]]);
    if (label.empty()) throw ParseError(row_no, s.group_column, "missing value");
    auto git = std::find(s.group_labels.begin(), s.group_labels.end(), label);
    if (git == s.group_labels.end()) {
      throw Error(ErrorKind::BoundsViolation, "row " + std::to_string(row_no) + ", column '" +
                                                  s.group_column + "': unknown group '" +
                                                  std::string(label) + "'");
    }
    row.group = static_cast<std::size_t>(git - s.group_labels.begin());
    for (const auto& o : s.outcomes) {
      const double v = parse_number(cells[col[o]], row_no, o);
      row.outcomes.push_back(v == 1.0 ? 1 : (v == 0.0 ? 0 : -1));
    }
    validate_row(s, row, row_no);
    rows.push_back(std::move(row));
  }
  return Table(std::move(schema), std::move(rows));
}

void write_rows(const std::filesystem::path& path, const Schema& schema, std::span<const Row> rows) {
  csv::Document doc;
  for (const auto& f : schema.features) doc.header.push_back(f.name);
  doc.header.push_back(schema.group_column);
  doc.header.insert(doc.header.end(), schema.outcomes.begin(), schema.outcomes.end());
  doc.rows.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    cells.reserve(doc.header.size());
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      cells.push_back(format_feature(schema.features[j], row.features[j]));
    }
    cells.push_back(schema.group_labels.at(row.group));
    for (int o : row.outcomes) cells.push_back(std::to_string(o));
    doc.rows.push_back(std::move(cells));
  }
  csv::write(path, doc);
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

std::vector<std::size_t> pick(std::span<const std::size_t> pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i : sample_without_replacement(pool.size(), k, rng)) out.push_back(pool[i]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> minus(std::span<const std::size_t> all, std::span<const std::size_t> sorted_remove) {
  std::vector<std::size_t> out;
  for (std::size_t i : all) {
    if (!std::binary_search(sorted_remove.begin(), sorted_remove.end(), i)) out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> select_prompt_examples(const Table& table, std::span<const std::size_t> pool,
                                                std::span<const std::string> outcomes, std::size_t k,
                                                std::uint64_t seed, std::size_t max_redraws) {
  if (k > pool.size()) {
    throw Error(ErrorKind::ConstraintInfeasible, "cannot draw " + std::to_string(k) +
                                                     " prompt examples from " +
                                                     std::to_string(pool.size()) + " rows");
  }
  const Schema& s = table.schema();
  std::vector<std::size_t> outcome_idx;
  for (const auto& name : outcomes) {
    const std::size_t o = s.outcome_index(name);
    const bool any = std::any_of(pool.begin(), pool.end(),
                                 [&](std::size_t r) { return table.row(r).outcomes[o] == 1; });
    if (!any) {
      throw Error(ErrorKind::ConstraintInfeasible,
                  "outcome '" + name + "' has no positive rows to choose prompt examples from");
    }
    outcome_idx.push_back(o);
  }
  Rng rng(seed);
  for (std::size_t attempt = 0; attempt <= max_redraws; ++attempt) {
    std::vector<std::size_t> draw = pick(pool, k, rng);
    const bool ok = std::all_of(outcome_idx.begin(), outcome_idx.end(), [&](std::size_t o) {
      return std::any_of(draw.begin(), draw.end(), [&](std::size_t r) { return table.row(r).outcomes[o] == 1; });
    });
    if (ok) return draw;
  }
  throw Error(ErrorKind::ConstraintInfeasible,
              "no prompt-example draw had a positive for every outcome after " +
                  std::to_string(max_redraws) + " redraws");
}

GroupSample sample_groups(const Table& table, const SampleRequest& req) {
  const Schema& s = table.schema();
  const std::size_t gmaj = s.group_index(req.majority);
  const std::size_t gmin = s.group_index(req.minority);
  if (gmaj == gmin) throw Error(ErrorKind::InvalidSpec, "majority and minority are the same group");

  const auto maj = table.rows_in_group(gmaj);
  const auto min = table.rows_in_group(gmin);
  if (maj.size() < req.n_maj) throw InsufficientGroupError(req.majority, maj.size(), req.n_maj);
  const std::size_t min_needed = req.n_min + (req.prompt_source == PromptSource::Minority ? req.k_prompt : 0);
  if (min.size() < min_needed) throw InsufficientGroupError(req.minority, min.size(), min_needed);

  GroupSample out;
  out.seed = req.seed;
  out.majority_label = req.majority;
  out.minority_label = req.minority;

  Rng rng(req.seed);
  const std::uint64_t prompt_seed = mix_seed(req.seed, "prompt-examples");
  out.majority_rows = pick(maj, req.n_maj, rng);
  if (req.prompt_source == PromptSource::Minority) {
    out.prompt_example_rows =
        select_prompt_examples(table, min, req.positive_outcomes, req.k_prompt, prompt_seed, req.max_redraws);
    const auto remaining = minus(min, out.prompt_example_rows);
    out.minority_rows = pick(remaining, req.n_min, rng);
  } else {
    out.minority_rows = pick(min, req.n_min, rng);
    std::vector<std::size_t> used = out.majority_rows;
    used.insert(used.end(), out.minority_rows.begin(), out.minority_rows.end());
    std::sort(used.begin(), used.end());
    std::vector<std::size_t> all(table.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto pool = minus(all, used);
    if (pool.size() < req.k_prompt) throw InsufficientGroupError("(all rows)", pool.size(), req.k_prompt);
    out.prompt_example_rows =
        select_prompt_examples(table, pool, req.positive_outcomes, req.k_prompt, prompt_seed, req.max_redraws);
  }

  std::vector<char> used(table.size(), 0);
  for (auto* set : {&out.majority_rows, &out.minority_rows, &out.prompt_example_rows}) {
    for (std::size_t i : *set) used[i] = 1;
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!used[i]) out.holdout_rows.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(const Schema& schema, bool drop_first) : drop_first_(drop_first) {
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto& f = schema.features[j];
    offsets_.push_back(columns_.size());
    kinds_.push_back(f.kind);
    switch (f.kind) {
      case FeatureKind::Numeric:
        columns_.push_back({f.name, ColumnKind::Continuous, j, -1});
        break;
      case FeatureKind::Binary:
        columns_.push_back({f.name, ColumnKind::Binary, j, -1});
        break;
      case FeatureKind::Categorical:
        for (std::size_t c = drop_first ? 1 : 0; c < f.categories.size(); ++c) {
          columns_.push_back({f.name + "=" + f.categories[c], ColumnKind::OneHot, j, static_cast<int>(j)});
        }
        break;
    }
  }
}

void Encoder::encode(const Row& row, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < kinds_.size(); ++j) {
    const double v = row.features[j];
    if (kinds_[j] != FeatureKind::Categorical) {
      out[offsets_[j]] = v;
      continue;
    }
    auto c = static_cast<std::size_t>(v);
    if (drop_first_) {
      if (c > 0) out[offsets_[j] + c - 1] = 1.0;
    } else {
      out[offsets_[j] + c] = 1.0;
    }
  }
}

Matrix Encoder::encode(std::span<const Row> rows) const {
  Matrix m(rows.size(), width());
  for (std::size_t i = 0; i < rows.size(); ++i) encode(rows[i], m.row(i));
  return m;
}

Matrix Encoder::encode(const Table& table, std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), width());
  for (std::size_t i = 0; i < indices.size(); ++i) encode(table.row(indices[i]), m.row(i));
  return m;
}

// ---------------------------------------------------------------------------
// Fixture spec

void FixtureSpec::validate() const {
  schema.validate();
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidSpec, msg); };
  if (groups.empty()) fail("fixture has no groups");
  std::set<std::string> seen;
  for (const auto& g : groups) {
    if (!seen.insert(g.label).second) fail("duplicate fixture group '" + g.label + "'");
    schema.group_index(g.label);
    if (g.size == 0) fail("group '" + g.label + "' has size 0");
    for (const auto& [name, dist] : g.features) {
      const auto& f = schema.features[schema.feature_index(name)];
      if (f.kind == FeatureKind::Numeric && !(dist.sd >= 0)) fail("negative sd for '" + name + "'");
      if (f.kind == FeatureKind::Binary && !(dist.p >= 0 && dist.p <= 1)) fail("p outside [0,1] for '" + name + "'");
      if (f.kind == FeatureKind::Categorical && !dist.probs.empty()) {
        if (dist.probs.size() != f.categories.size()) fail("probs of '" + name + "' do not match categories");
        for (double p : dist.probs) {
          if (!(p >= 0)) fail("negative category probability for '" + name + "'");
        }
      }
    }
    for (const auto& c : g.correlations) {
      for (const auto* name : {&c.a, &c.b}) {
        if (schema.features[schema.feature_index(*name)].kind == FeatureKind::Categorical) {
          fail("correlation on categorical feature '" + *name + "'");
        }
      }
      if (c.a == c.b || !(c.rho > -1 && c.rho < 1)) fail("invalid correlation " + c.a + "/" + c.b);
    }
    for (const auto& [outcome, model] : g.outcomes) {
      schema.outcome_index(outcome);
      if (model.target_prevalence && !(*model.target_prevalence > 0 && *model.target_prevalence < 1)) {
        fail("prevalence target for '" + outcome + "' must be in (0, 1)");
      }
      for (const auto& [key, _] : model.coefficients) {
        const auto eq = key.find('=');
        const auto& f = schema.features[schema.feature_index(key.substr(0, eq))];
        if ((eq != std::string::npos) != (f.kind == FeatureKind::Categorical)) {
          fail("coefficient key '" + key + "' must be 'feature=category' exactly for categorical features");
        }
        if (eq != std::string::npos &&
            std::find(f.categories.begin(), f.categories.end(), key.substr(eq + 1)) == f.categories.end()) {
          fail("unknown category in coefficient key '" + key + "'");
        }
      }
    }
  }
}

FixtureSpec FixtureSpec::from_json(const json& doc) {
  FixtureSpec spec;
  try {
    spec.schema = Schema::from_json(doc.at("schema"));
    for (const auto& jg : doc.at("groups")) {
      GroupFixture g;
      g.label = jg.at("label").get<std::string>();
      g.size = jg.at("size").get<std::size_t>();
      if (jg.contains("features")) {
        for (const auto& [name, jd] : jg["features"].items()) {
          FeatureDistribution d;
          d.mean = jd.value("mean", 0.0);
          d.sd = jd.value("sd", 1.0);
          if (jd.contains("decimals")) d.decimals = jd["decimals"].get<int>();
          d.p = jd.value("p", 0.5);
          if (jd.contains("probs")) d.probs = jd["probs"].get<std::vector<double>>();
          g.features.emplace(name, std::move(d));
        }
      }
      if (jg.contains("correlations")) {
        for (const auto& jc : jg["correlations"]) {
          g.correlations.push_back(
              {jc.at("a").get<std::string>(), jc.at("b").get<std::string>(), jc.at("rho").get<double>()});
        }
      }
      if (jg.contains("outcomes")) {
        for (const auto& [name, jo] : jg["outcomes"].items()) {
          OutcomeModel m;
          m.intercept = jo.value("intercept", 0.0);
          if (jo.contains("coefficients")) m.coefficients = jo["coefficients"].get<std::map<std::string, double>>();
          if (jo.contains("target_prevalence")) m.target_prevalence = jo["target_prevalence"].get<double>();
          g.outcomes.emplace(name, std::move(m));
        }
      }
      spec.groups.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("fixture spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

json FixtureSpec::to_json() const {
  json jgroups = json::array();
  for (const auto& g : groups) {
    json jf = json::object();
    for (const auto& [name, d] : g.features) {
      const auto kind = schema.features[schema.feature_index(name)].kind;
      json item = json::object();
      if (kind == FeatureKind::Numeric) {
        item["mean"] = d.mean;
        item["sd"] = d.sd;
        if (d.decimals) item["decimals"] = *d.decimals;
      } else if (kind == FeatureKind::Binary) {
        item["p"] = d.p;
      } else if (!d.probs.empty()) {
        item["probs"] = d.probs;
      }
      jf[name] = std::move(item);
    }
    json jc = json::array();
    for (const auto& c : g.correlations) jc.push_back({{"a", c.a}, {"b", c.b}, {"rho", c.rho}});
    json jo = json::object();
    for (const auto& [name, m] : g.outcomes) {
      json item = {{"intercept", m.intercept}, {"coefficients", m.coefficients}};
      if (m.target_prevalence) item["target_prevalence"] = *m.target_prevalence;
      jo[name] = std::move(item);
    }
    jgroups.push_back(
        {{"label", g.label}, {"size", g.size}, {"features", jf}, {"correlations", jc}, {"outcomes", jo}});
  }
  return {{"schema", schema.to_json()}, {"groups", jgroups}};
}

FixtureSpec load_fixture_spec(const std::filesystem::path& path) {
  return FixtureSpec::from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Fixture model

namespace {

constexpr std::size_t kCalibrationDraws = 20000;
constexpr std::uint64_t kCalibrationSeed = 0x6a09e667f3bcc908ULL;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

struct FixtureModel::GroupParams {
  std::size_t schema_group = 0;
  std::vector<FeatureDistribution> dists;  // one per schema feature
  std::vector<std::size_t> latent;          // features driven by the Gaussian copula
  std::vector<double> chol;                 // lower-triangular, latent.size()^2
  struct Term {
    std::size_t feature;
    int category;  // -1 for numeric/binary
    double coef;
  };
  std::vector<std::vector<Term>> terms;  // per outcome
  std::vector<double> intercepts;        // per outcome
  std::vector<double> expected;          // per outcome, at calibrated intercept
};

FixtureModel::FixtureModel(FixtureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  schema_ = std::make_shared<const Schema>(spec_.schema);
  const Schema& s = spec_.schema;

  for (const auto& g : spec_.groups) {
    auto p = std::make_shared<GroupParams>();
    p->schema_group = s.group_index(g.label);
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      const auto& f = s.features[j];
      FeatureDistribution d;
      if (auto it = g.features.find(f.name); it != g.features.end()) {
        d = it->second;
      } else if (f.kind == FeatureKind::Numeric && f.bounds) {
        d.mean = 0.5 * (f.bounds->first + f.bounds->second);
        d.sd = (f.bounds->second - f.bounds->first) / 6.0;
      }
      if (f.kind == FeatureKind::Categorical && d.probs.empty()) {
        d.probs.assign(f.categories.size(), 1.0);
      }
      if (f.kind != FeatureKind::Categorical) p->latent.push_back(j);
      p->dists.push_back(std::move(d));
    }

    // Correlation matrix over latent features, then Cholesky.
    const std::size_t m = p->latent.size();
    std::vector<double> corr(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) corr[i * m + i] = 1.0;
    auto latent_pos = [&](const std::string& name) {
      const std::size_t j = s.feature_index(name);
      return static_cast<std::size_t>(std::find(p->latent.begin(), p->latent.end(), j) - p->latent.begin());
    };
    for (const auto& c : g.correlations) {
      const std::size_t a = latent_pos(c.a), b = latent_pos(c.b);
      corr[a * m + b] = corr[b * m + a] = c.rho;
    }
    p->chol.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = corr[i * m + j];
        for (std::size_t k = 0; k < j; ++k) sum -= p->chol[i * m + k] * p->chol[j * m + k];
        if (i == j) {
          if (sum <= 1e-12) {
            throw Error(ErrorKind::InvalidSpec, "correlations of group '" + g.label + "' are not positive definite");
          }
          p->chol[i * m + i] = std::sqrt(sum);
        } else {
          p->chol[i * m + j] = sum / p->chol[j * m + j];
        }
      }
    }

    p->terms.resize(s.outcomes.size());
    p->intercepts.assign(s.outcomes.size(), 0.0);
    p->expected.assign(s.outcomes.size(), 0.0);
    for (std::size_t o = 0; o < s.outcomes.size(); ++o) {
      auto it = g.outcomes.find(s.outcomes[o]);
      if (it == g.outcomes.end()) continue;
      for (const auto& [key, coef] : it->second.coefficients) {
        const auto eq = key.find('=');
        const std::size_t j = s.feature_index(key.substr(0, eq));
        int cat = -1;
        if (eq != std::string::npos) {
          const auto& cats = s.features[j].categories;
          cat = static_cast<int>(std::find(cats.begin(), cats.end(), key.substr(eq + 1)) - cats.begin());
        }
        p->terms[o].push_back({j, cat, coef});
      }
      p->intercepts[o] = it->second.intercept;
    }

    // Calibrate intercepts against a fixed Monte Carlo sample.
    Rng rng(mix_seed(kCalibrationSeed, g.label));
    std::vector<std::vector<double>> draws(kCalibrationDraws);
    for (auto& d : draws) d = draw_features(*p, rng);
    for (std::size_t o = 0; o < s.outcomes.size(); ++o) {
      auto it = g.outcomes.find(s.outcomes[o]);
      if (it != g.outcomes.end() && it->second.target_prevalence) {
        const double target = *it->second.target_prevalence;
        double lo = -40.0, hi = 40.0;
        for (int iter = 0; iter < 80; ++iter) {
          const double mid = 0.5 * (lo + hi);
          (mean_probability(*p, o, mid, draws) < target ? lo : hi) = mid;
        }
        p->intercepts[o] = 0.5 * (lo + hi);
      }
      p->expected[o] = mean_probability(*p, o, p->intercepts[o], draws);
    }
    params_.push_back(std::move(p));
  }
}

std::optional<std::size_t> FixtureModel::find_group(std::string_view label) const {
  for (std::size_t i = 0; i < spec_.groups.size(); ++i) {
    if (spec_.groups[i].label == label) return i;
  }
  return std::nullopt;
}

double FixtureModel::intercept(std::size_t fixture_group, std::size_t outcome) const {
  return params_.at(fixture_group)->intercepts.at(outcome);
}

double FixtureModel::expected_prevalence(std::size_t fixture_group, std::size_t outcome) const {
  return params_.at(fixture_group)->expected.at(outcome);
}

std::vector<double> FixtureModel::draw_features(const GroupParams& p, Rng& rng) const {
  const Schema& s = spec_.schema;
  std::vector<double> values(s.features.size(), 0.0);
  const std::size_t m = p.latent.size();
  std::vector<double> e(m);
  for (auto& x : e) x = rng.normal();
  for (std::size_t i = 0; i < m; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k <= i; ++k) z += p.chol[i * m + k] * e[k];
    const std::size_t j = p.latent[i];
    const auto& f = s.features[j];
    const auto& d = p.dists[j];
    if (f.kind == FeatureKind::Binary) {
      values[j] = normal_cdf(z) < d.p ? 1.0 : 0.0;
      continue;
    }
    double v = d.mean + d.sd * z;
    if (d.decimals) {
      const double scale = std::pow(10.0, *d.decimals);
      v = std::round(v * scale) / scale;
    }
    if (f.bounds) v = std::clamp(v, f.bounds->first, f.bounds->second);
    values[j] = v;
  }
  for (std::size_t j = 0; j < s.features.size(); ++j) {
    if (s.features[j].kind != FeatureKind::Categorical) continue;
    const auto& probs = p.dists[j].probs;
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    double u = rng.uniform() * total;
    std::size_t c = 0;
    while (c + 1 < probs.size() && u >= probs[c]) u -= probs[c++];
    values[j] = static_cast<double>(c);
  }
  return values;
}

namespace {

double linear_part(const std::vector<double>& values, const auto& terms) {
  double s = 0.0;
  for (const auto& t : terms) {
    if (t.category < 0) {
      s += t.coef * values[t.feature];
    } else if (static_cast<int>(values[t.feature]) == t.category) {
      s += t.coef;
    }
  }
  return s;
}

}  // namespace

double FixtureModel::mean_probability(const GroupParams& p, std::size_t outcome, double intercept,
                                      const std::vector<std::vector<double>>& draws) const {
  double sum = 0.0;
  for (const auto& d : draws) sum += sigmoid(intercept + linear_part(d, p.terms[outcome]));
  return sum / static_cast<double>(draws.size());
}

std::vector<Row> FixtureModel::sample(std::size_t fixture_group, std::size_t n, Rng& rng) const {
  const GroupParams& p = *params_.at(fixture_group);
  std::vector<Row> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Row row;
    row.features = draw_features(p, rng);
    row.group = p.schema_group;
    row.outcomes.resize(p.terms.size());
    for (std::size_t o = 0; o < p.terms.size(); ++o) {
      const double prob = sigmoid(p.intercepts[o] + linear_part(row.features, p.terms[o]));
      row.outcomes[o] = rng.bernoulli(prob) ? 1 : 0;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Table make_fixture(const FixtureModel& model, std::uint64_t seed) {
  std::vector<Row> rows;
  for (std::size_t g = 0; g < model.spec().groups.size(); ++g) {
    const auto& group = model.spec().groups[g];
    Rng rng(mix_seed(seed, group.label));
    auto part = model.sample(g, group.size, rng);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return Table(model.schema_ptr(), std::move(rows));
}

Table make_fixture(const FixtureSpec& spec, std::uint64_t seed) { return make_fixture(FixtureModel(spec), seed); }

}  // namespace groupsynth
