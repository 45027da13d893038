#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "groupsynth/augment.hpp"
#include "groupsynth/data.hpp"
#include "groupsynth/diagnostics.hpp"
#include "groupsynth/error.hpp"
#include "groupsynth/genclient.hpp"
#include "groupsynth/metrics.hpp"
#include "groupsynth/model.hpp"

namespace groupsynth {

// ---------------------------------------------------------------------------
// Configuration

// Either a CSV plus schema, or a fixture spec rendered with fixture_seed
// (defaulting to the master seed).
struct DatasetSource {
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> schema;
  std::optional<std::filesystem::path> fixture;
  std::optional<std::uint64_t> fixture_seed;
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::string dataset_name = "dataset";
  std::string dataset_context = std::string(kHeartContext);
  std::string majority;
  std::vector<std::string> minorities;
  std::vector<std::string> outcomes;
  std::vector<MethodId> methods = {kAllMethods.begin(), kAllMethods.end()};
  std::size_t n_maj = 1000;
  std::size_t n_min = 100;
  std::size_t k_prompt = 20;
  std::size_t reps = 25;
  BackendConfig backend;
  bool oracle = false;  // mock answers from the dataset's own fixture model
  double temperature = 0.9;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "results";
  std::size_t batch_size = 10;
  std::optional<std::size_t> synthetic_target;  // default n_maj - n_min
  std::size_t smote_k = 5;
  LogisticConfig logistic;
  std::size_t workers = 1;

  std::size_t effective_synthetic_target() const;

  // Checks everything that does not need the dataset. Throws ConfigError.
  void validate() const;
  // Checks labels and outcomes against a schema. Throws ConfigError.
  void validate(const Schema& schema) const;

  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// A config with its dataset and backend materialized. Shared read-only by
// every cell; the generation cache is the only mutable part.
struct Experiment {
  ExperimentConfig config;
  std::shared_ptr<const FixtureModel> fixture;  // set when the dataset is a fixture
  std::shared_ptr<const Table> table;
  std::shared_ptr<Backend> backend;
  std::shared_ptr<GenerationCache> cache;  // null when caching is off
};

// Throws ConfigError, plus whatever loading the dataset raises.
Experiment load_experiment(ExperimentConfig config);
// Same, over a table already in memory. The fixture is used for oracle mode.
Experiment make_experiment(ExperimentConfig config, std::shared_ptr<const Table> table,
                           std::shared_ptr<const FixtureModel> fixture = nullptr);

// ---------------------------------------------------------------------------
// Results

struct CellKey {
  std::string group;
  std::string outcome;
  MethodId method = MethodId::Baseline;

  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct MetricStats {
  std::optional<double> mean;
  std::optional<double> std;  // sample sd, needs two values
  std::size_t n = 0;

  static MetricStats of(std::span<const double> values);
  friend bool operator==(const MetricStats&, const MetricStats&) = default;
};

enum class RepStatus { Ok, Skipped, Failed };

// Per-repetition record; kept in memory only.
struct RepRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  RepStatus status = RepStatus::Ok;
  std::string reason;
  std::optional<ErrorKind> error;
  std::optional<EvalResult> minority;
  std::optional<EvalResult> majority;
  std::size_t training_rows = 0;
  std::size_t synthetic_rows = 0;
};

inline constexpr const char* kMetricNames[] = {"auroc", "auprc", "auroc_majority", "auprc_majority"};

struct CellResult {
  CellKey key;
  MetricStats auroc;
  MetricStats auprc;
  MetricStats auroc_majority;
  MetricStats auprc_majority;
  std::size_t reps_completed = 0;
  bool skipped = false;
  std::optional<ErrorKind> failure;  // set when a rep aborted the cell
  std::string reason;
  std::vector<RepRecord> reps;

  const MetricStats& metric(std::string_view name) const;
  MetricStats& metric(std::string_view name);

  // Equality over the reported fields; the per-rep log is ignored.
  bool same_summary(const CellResult& other) const;
};

struct ResultsGrid {
  std::string dataset_name;
  std::vector<CellResult> cells;

  const CellResult* find(const CellKey& key) const;
  const CellResult& at(const CellKey& key) const;
  bool any_failed() const;
  bool same_summary(const ResultsGrid& other) const;
};

// ---------------------------------------------------------------------------
// Running

// Seed for one repetition of one cell.
std::uint64_t rep_seed(std::uint64_t master, const CellKey& key, std::size_t rep);

// One repetition: sample, generate when needed, assemble, fit, evaluate.
RepRecord run_rep(const Experiment& exp, const CellKey& key, std::size_t rep);

CellResult run_cell(const Experiment& exp, const CellKey& key);
// Every (minority, outcome, method) of the config in that order.
ResultsGrid run_grid(const Experiment& exp);

struct TemperatureSweep {
  std::vector<double> temperatures;
  std::vector<ResultsGrid> grids;
};
struct SizeSweep {
  std::vector<std::size_t> sizes;
  std::vector<ResultsGrid> grids;
};

// LLM methods only; throws ConfigError when the config has none.
TemperatureSweep sweep_temperature(const Experiment& exp, std::vector<double> temperatures = {0.5, 0.9, 1.2});
// Throws InsufficientGroup before any work when a minority group is smaller
// than size + k_prompt for some size.
SizeSweep sweep_minority_size(const Experiment& exp, std::vector<std::size_t> sizes = {50, 100, 200});

// 0 ok, 2 when some cell ran out of backend retries, 3 for other failures.
int exit_code_for(const ResultsGrid& grid);
int exit_code_for(std::span<const ResultsGrid> grids);

// ---------------------------------------------------------------------------
// Reports

std::string results_csv(const ResultsGrid& grid);
ResultsGrid parse_results_csv(std::string_view text, std::string dataset_name = "dataset");
ResultsGrid read_results_csv(const std::filesystem::path& path, std::string dataset_name = "dataset");

// "### AUROC" and "### AUPRC" tables, one row per (group, outcome), one
// column per method, the best mean in each row in bold.
std::string markdown_report(const ResultsGrid& grid);
std::string temperature_report(const TemperatureSweep& sweep);
std::string size_report(const SizeSweep& sweep);

// results.csv + results.md under dir. Throws IoError.
void write_report(const ResultsGrid& grid, const std::filesystem::path& dir);
void write_report(const TemperatureSweep& sweep, const std::filesystem::path& dir);
void write_report(const SizeSweep& sweep, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Diagnostics run

// One sample for `minority`, synthetic rows from a group-tailored and a
// generic prompt, then every analysis over them.
DiagnosticsReport run_diagnostics(const Experiment& exp, const std::string& minority, std::uint64_t seed);

}  // namespace groupsynth
