#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "groupsynth/data.hpp"
#include "groupsynth/prompt.hpp"

namespace groupsynth {

enum class BackendKind { Http, Mock };

struct BackoffPolicy {
  double base_seconds = 1.0;
  double factor = 2.0;
  double max_seconds = 60.0;
  double jitter = 0.5;  // delay is scaled by (1 + jitter * U[0,1))

  double delay_seconds(std::size_t attempt, double unit_draw) const;
};

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4-turbo";
  double temperature = 0.9;
  std::size_t max_retries_per_batch = 5;  // total attempts per batch
  std::size_t max_inflight = 1;
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 30.0;
  BackoffPolicy backoff;
  // Mock only: fixture spec whose group distributions back oracle mode.
  std::optional<std::filesystem::path> oracle_fixture;
  // Generation cache; unset means on for http, off for mock.
  std::optional<bool> cache;

  void validate() const;
  bool cache_enabled() const { return cache.value_or(kind == BackendKind::Http); }

  static BackendConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// A chat-completion-style generator: prompt text in, message content out.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  // `seed` drives the mock; live backends ignore it.
  virtual std::string request_batch(std::string_view prompt, double temperature, std::uint64_t seed) = 0;
};

// Offline backend. It reads the examples, requested count and (optional)
// group label back out of the rendered prompt and answers with mock_generate.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::shared_ptr<const Schema> schema, std::shared_ptr<const FixtureModel> oracle = nullptr);

  std::string id() const override { return oracle_ ? "mock-oracle" : "mock"; }
  std::string request_batch(std::string_view prompt, double temperature, std::uint64_t seed) override;

 private:
  std::shared_ptr<const Schema> schema_;
  std::shared_ptr<const FixtureModel> oracle_;
};

// POST {base_url}/chat/completions with a bearer token read from the
// configured environment variable.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);

  std::string id() const override { return "http:" + cfg_.model_name; }
  std::string request_batch(std::string_view prompt, double temperature, std::uint64_t seed) override;

  static nlohmann::json request_body(std::string_view model, double temperature, std::string_view prompt);

 private:
  BackendConfig cfg_;
};

// Oracle mode uses `oracle` when given, else loads cfg.oracle_fixture if set.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, std::shared_ptr<const Schema> schema,
                                      std::shared_ptr<const FixtureModel> oracle = nullptr);

// Parses a dict-of-lists payload. Exactly the schema's feature and outcome
// keys must be present, each an array of n_expected type-correct values.
// Numeric values beyond 20% of the bounds span outside the schema bounds
// raise RangeViolation; anything else raises MalformedResponse. Rows get
// group index 0.
std::vector<Row> parse_batch(std::string_view text, const Schema& schema, std::size_t n_expected);

// Same, but takes the row count from the payload itself.
std::vector<Row> parse_payload(std::string_view text, const Schema& schema);

struct MockOptions {
  double noise_fraction = 0.1;          // of the per-feature example sd, at the reference temperature
  double temperature = 0.9;
  double reference_temperature = 0.9;   // noise scales linearly with temperature / reference
  const FixtureModel* oracle = nullptr;  // enables oracle mode for labels it knows
};

// Bootstrap-resamples examples. Numeric features get Gaussian jitter truncated
// at 3 noise scales and clamped to schema bounds; binary and categorical
// features are drawn from the examples' empirical marginals; outcomes travel
// with the source row. In oracle mode with a known group label, rows come from
// that group's true fixture distribution instead. Throws TooFewExamples for
// fewer than two examples outside oracle mode.
std::vector<Row> mock_generate(std::span<const Row> examples, const Schema& schema,
                               const std::optional<std::string>& group_label, std::size_t n, std::uint64_t seed,
                               const MockOptions& options = {});

struct GenerationBatch {
  std::vector<Row> rows;
  std::string backend_id;
  double temperature = 0.0;
  std::string prompt_hash;
  std::vector<std::size_t> retries;  // failed attempts per batch request
  std::uint64_t seed = 0;
};

// Thread-safe, last write wins.
class GenerationCache {
 public:
  std::optional<GenerationBatch> get(const std::string& key) const;
  void put(const std::string& key, GenerationBatch batch);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, GenerationBatch> entries_;
};

struct GenerationOptions {
  std::uint64_t seed = 0;
  std::size_t group = 0;  // group index stamped on generated rows
  GenerationCache* cache = nullptr;
  // Backoff sleeps go through here; tests swap in a recorder.
  std::function<void(std::chrono::duration<double>)> sleep;
};

// Issues ceil(target_n / batch_size) requests (up to cfg.max_inflight at once),
// retrying each failed batch up to cfg.max_retries_per_batch attempts in
// total, and truncates the concatenation to exactly target_n rows.
// batch_size must equal prompt.n_generate. Throws BackendExhausted.
GenerationBatch generate_to_target(const PromptSpec& prompt, std::size_t target_n, std::size_t batch_size,
                                   const BackendConfig& cfg, Backend& backend, const Schema& schema,
                                   const GenerationOptions& options = {});

}  // namespace groupsynth
