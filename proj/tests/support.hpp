#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "groupsynth/data.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth::testing {

inline std::filesystem::path test_root() { return GROUPSYNTH_TEST_ROOT; }
inline std::filesystem::path data_path(const std::string& name) { return test_root() / "data" / name; }
inline std::filesystem::path golden_path(const std::string& name) { return test_root() / "golden" / name; }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("groupsynth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// age (numeric, 0..100), smoker (binary), stage (categorical a/b/c); groups
// Maj/Min/Other; outcomes y1, y2.
inline Schema small_schema() {
  Schema s;
  s.features.push_back({"age", FeatureKind::Numeric, std::make_pair(0.0, 100.0), {}});
  s.features.push_back({"smoker", FeatureKind::Binary, std::nullopt, {}});
  s.features.push_back({"stage", FeatureKind::Categorical, std::nullopt, {"a", "b", "c"}});
  s.group_column = "group";
  s.group_labels = {"Maj", "Min", "Other"};
  s.outcomes = {"y1", "y2"};
  return s;
}

// Random rows for small_schema with the given group sizes and outcome rates.
inline Table small_table(const std::vector<std::size_t>& sizes, std::uint64_t seed, double p1 = 0.3, double p2 = 0.2) {
  auto schema = std::make_shared<const Schema>(small_schema());
  Rng rng(seed);
  std::vector<Row> rows;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      Row r;
      r.features = {std::round(rng.uniform(18, 90)), rng.bernoulli(0.4) ? 1.0 : 0.0,
                    static_cast<double>(rng.below(3))};
      r.group = g;
      r.outcomes = {rng.bernoulli(p1) ? 1 : 0, rng.bernoulli(p2) ? 1 : 0};
      rows.push_back(std::move(r));
    }
  }
  return Table(schema, std::move(rows));
}

}  // namespace groupsynth::testing
