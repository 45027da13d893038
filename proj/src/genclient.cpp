#include "groupsynth/genclient.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "groupsynth/error.hpp"
#include "groupsynth/parallel.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

using nlohmann::json;

double BackoffPolicy::delay_seconds(std::size_t attempt, double unit_draw) const {
  const double raw = base_seconds * std::pow(factor, static_cast<double>(attempt > 0 ? attempt - 1 : 0));
  return std::min(raw, max_seconds) * (1.0 + jitter * unit_draw);
}

// ---------------------------------------------------------------------------
// Config

void BackendConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature must lie in [0, 2]");
  if (max_retries_per_batch < 1) fail("max_retries_per_batch must be >= 1");
  if (max_inflight < 1) fail("max_inflight must be >= 1");
  if (!(timeout_seconds > 0)) fail("timeout_seconds must be positive");
  if (kind == BackendKind::Http) {
    if (base_url.empty()) fail("http backend needs base_url");
    if (api_key_env.empty()) fail("http backend needs api_key_env");
  }
}

BackendConfig BackendConfig::from_json(const json& doc) {
  BackendConfig c;
  try {
    const std::string kind = doc.value("kind", "mock");
    if (kind == "mock") {
      c.kind = BackendKind::Mock;
    } else if (kind == "http") {
      c.kind = BackendKind::Http;
    } else {
      throw Error(ErrorKind::ConfigError, "unknown backend kind '" + kind + "'");
    }
    c.base_url = doc.value("base_url", c.base_url);
    c.model_name = doc.value("model", c.model_name);
    c.temperature = doc.value("temperature", c.temperature);
    c.max_retries_per_batch = doc.value("max_retries_per_batch", c.max_retries_per_batch);
    c.max_inflight = doc.value("max_inflight", c.max_inflight);
    c.api_key_env = doc.value("api_key_env", c.api_key_env);
    c.timeout_seconds = doc.value("timeout_seconds", c.timeout_seconds);
    if (doc.contains("backoff")) {
      const auto& b = doc["backoff"];
      c.backoff.base_seconds = b.value("base_seconds", c.backoff.base_seconds);
      c.backoff.factor = b.value("factor", c.backoff.factor);
      c.backoff.max_seconds = b.value("max_seconds", c.backoff.max_seconds);
      c.backoff.jitter = b.value("jitter", c.backoff.jitter);
    }
    if (doc.contains("oracle_fixture") && !doc["oracle_fixture"].is_null()) {
      c.oracle_fixture = doc["oracle_fixture"].get<std::string>();
    }
    if (doc.contains("cache") && !doc["cache"].is_null()) c.cache = doc["cache"].get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

json BackendConfig::to_json() const {
  json j = {{"kind", kind == BackendKind::Http ? "http" : "mock"},
            {"base_url", base_url},
            {"model", model_name},
            {"temperature", temperature},
            {"max_retries_per_batch", max_retries_per_batch},
            {"max_inflight", max_inflight},
            {"api_key_env", api_key_env},
            {"timeout_seconds", timeout_seconds},
            {"backoff",
             {{"base_seconds", backoff.base_seconds},
              {"factor", backoff.factor},
              {"max_seconds", backoff.max_seconds},
              {"jitter", backoff.jitter}}}};
  if (oracle_fixture) j["oracle_fixture"] = oracle_fixture->string();
  if (cache) j["cache"] = *cache;
  return j;
}

// ---------------------------------------------------------------------------
// Payload parsing

namespace {

std::vector<Row> parse_impl(std::string_view text, const Schema& schema, std::optional<std::size_t> n_expected) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw MalformedResponseError("", -1, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw MalformedResponseError("", -1, "payload is not a JSON object");

  const auto keys = schema.payload_keys();
  for (const auto& key : keys) {
    if (!doc.contains(key)) throw MalformedResponseError(key, -1, "missing key");
  }
  for (const auto& item : doc.items()) {
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
      throw MalformedResponseError(item.key(), -1, "unexpected key");
    }
  }
  std::size_t n = 0;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& value = doc[keys[k]];
    if (!value.is_array()) throw MalformedResponseError(keys[k], -1, "value is not an array");
    if (k == 0) n = n_expected.value_or(value.size());
    if (value.size() != n) {
      throw MalformedResponseError(keys[k], -1,
                                   "expected " + std::to_string(n) + " values, got " + std::to_string(value.size()));
    }
  }

  auto as_flag = [](const json& v) -> int {
    if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
    if (v.is_number()) {
      const double d = v.get<double>();
      if (d == 0.0) return 0;
      if (d == 1.0) return 1;
    }
    return -1;
  };

  std::vector<Row> rows(n);
  for (auto& r : rows) {
    r.features.resize(schema.features.size());
    r.outcomes.resize(schema.outcomes.size());
  }
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto& f = schema.features[j];
    const auto& arr = doc[f.name];
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = arr[i];
      const long idx = static_cast<long>(i);
      switch (f.kind) {
        case FeatureKind::Numeric: {
          if (!v.is_number()) throw MalformedResponseError(f.name, idx, "expected a number");
          const double d = v.get<double>();
          if (!std::isfinite(d)) throw MalformedResponseError(f.name, idx, "non-finite number");
          if (f.bounds) {
            const double span = f.bounds->second - f.bounds->first;
            const double lo = f.bounds->first - 0.2 * span;
            const double hi = f.bounds->second + 0.2 * span;
            if (d < lo || d > hi) {
              throw MalformedResponseError(f.name, idx, "value outside accepted range",
                                           ErrorKind::RangeViolation);
            }
          }
          rows[i].features[j] = d;
          break;
        }
        case FeatureKind::Binary: {
          const int flag = as_flag(v);
          if (flag < 0) throw MalformedResponseError(f.name, idx, "expected 0 or 1");
          rows[i].features[j] = flag;
          break;
        }
        case FeatureKind::Categorical: {
          if (!v.is_string()) throw MalformedResponseError(f.name, idx, "expected a category string");
          const auto s = v.get<std::string>();
          auto it = std::find(f.categories.begin(), f.categories.end(), s);
          if (it == f.categories.end()) throw MalformedResponseError(f.name, idx, "unknown category '" + s + "'");
          rows[i].features[j] = static_cast<double>(it - f.categories.begin());
          break;
        }
      }
    }
  }
  for (std::size_t o = 0; o < schema.outcomes.size(); ++o) {
    const auto& arr = doc[schema.outcomes[o]];
    for (std::size_t i = 0; i < n; ++i) {
      const int flag = as_flag(arr[i]);
      if (flag < 0) throw MalformedResponseError(schema.outcomes[o], static_cast<long>(i), "expected 0 or 1");
      rows[i].outcomes[o] = flag;
    }
  }
  return rows;
}

}  // namespace

std::vector<Row> parse_batch(std::string_view text, const Schema& schema, std::size_t n_expected) {
  return parse_impl(text, schema, n_expected);
}

std::vector<Row> parse_payload(std::string_view text, const Schema& schema) {
  return parse_impl(text, schema, std::nullopt);
}

// ---------------------------------------------------------------------------
// Mock generation

std::vector<Row> mock_generate(std::span<const Row> examples, const Schema& schema,
                               const std::optional<std::string>& group_label, std::size_t n, std::uint64_t seed,
                               const MockOptions& options) {
  Rng rng(seed);
  if (group_label && options.oracle) {
    if (auto g = options.oracle->find_group(*group_label)) return options.oracle->sample(*g, n, rng);
  }
  const std::size_t m = examples.size();
  if (m < 2) throw Error(ErrorKind::TooFewExamples, "mock generation needs at least 2 examples");

  const double temp_scale =
      options.reference_temperature > 0 ? options.temperature / options.reference_temperature : 1.0;
  std::vector<double> noise_sd(schema.features.size(), 0.0);
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    if (schema.features[j].kind != FeatureKind::Numeric) continue;
    double mean = 0.0;
    for (const auto& r : examples) mean += r.features[j];
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (const auto& r : examples) ss += (r.features[j] - mean) * (r.features[j] - mean);
    noise_sd[j] = options.noise_fraction * std::sqrt(ss / static_cast<double>(m - 1)) * temp_scale;
  }

  std::vector<Row> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& src = examples[rng.below(m)];
    Row row;
    row.features.resize(schema.features.size());
    row.group = src.group;
    row.outcomes = src.outcomes;
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const auto& f = schema.features[j];
      if (f.kind != FeatureKind::Numeric) {
        row.features[j] = examples[rng.below(m)].features[j];
        continue;
      }
      double z;
      do {
        z = rng.normal();
      } while (std::fabs(z) > 3.0);
      double v = src.features[j] + noise_sd[j] * z;
      if (f.bounds) v = std::clamp(v, f.bounds->first, f.bounds->second);
      row.features[j] = v;
    }
    out.push_back(std::move(row));
  }
  return out;
}

MockBackend::MockBackend(std::shared_ptr<const Schema> schema, std::shared_ptr<const FixtureModel> oracle)
    : schema_(std::move(schema)), oracle_(std::move(oracle)) {}

std::string MockBackend::request_batch(std::string_view prompt, double temperature, std::uint64_t seed) {
  // Sections are separated by blank lines: role, context, examples, instructions.
  std::vector<std::string_view> sections;
  for (std::size_t pos = 0; pos <= prompt.size();) {
    const std::size_t next = prompt.find("\n\n", pos);
    sections.push_back(prompt.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 2;
  }
  if (sections.size() < 4) throw Error(ErrorKind::InvalidSpec, "mock backend: prompt does not have four sections");
  const std::string_view context = sections[1];

  std::size_t n = 0;
  constexpr std::string_view kGen = "to generate ";
  if (auto p = context.find(kGen); p != std::string_view::npos) {
    for (std::size_t i = p + kGen.size(); i < context.size() && context[i] >= '0' && context[i] <= '9'; ++i) {
      n = n * 10 + static_cast<std::size_t>(context[i] - '0');
    }
  }
  if (n == 0) throw Error(ErrorKind::InvalidSpec, "mock backend: no sample count in prompt context");

  std::optional<std::string> label;
  constexpr std::string_view kFor = " specifically for ";
  if (auto p = context.find(kFor); p != std::string_view::npos) {
    const std::size_t start = p + kFor.size();
    const std::size_t end = context.rfind(" patients");
    if (end != std::string_view::npos && end > start) label = std::string(context.substr(start, end - start));
  }

  const auto examples = parse_payload(sections[2], *schema_);
  MockOptions opts;
  opts.temperature = temperature;
  opts.oracle = oracle_.get();
  return serialize_examples(mock_generate(examples, *schema_, label, n, seed, opts), *schema_);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, std::shared_ptr<const Schema> schema,
                                      std::shared_ptr<const FixtureModel> oracle) {
  cfg.validate();
  if (cfg.kind == BackendKind::Http) return std::make_unique<HttpBackend>(cfg);
  if (!oracle && cfg.oracle_fixture) {
    oracle = std::make_shared<const FixtureModel>(load_fixture_spec(*cfg.oracle_fixture));
  }
  return std::make_unique<MockBackend>(std::move(schema), std::move(oracle));
}

// ---------------------------------------------------------------------------
// Cache

std::optional<GenerationBatch> GenerationCache::get(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::put(const std::string& key, GenerationBatch batch) {
  std::lock_guard lock(mutex_);
  entries_[key] = std::move(batch);
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Batch driver

GenerationBatch generate_to_target(const PromptSpec& prompt, std::size_t target_n, std::size_t batch_size,
                                   const BackendConfig& cfg, Backend& backend, const Schema& schema,
                                   const GenerationOptions& options) {
  cfg.validate();
  if (target_n == 0) throw Error(ErrorKind::ConfigError, "target_n must be >= 1");
  if (batch_size == 0 || batch_size != prompt.n_generate) {
    throw Error(ErrorKind::ConfigError, "batch_size " + std::to_string(batch_size) +
                                            " does not match the prompt's sample count " +
                                            std::to_string(prompt.n_generate));
  }

  const std::string text = render(prompt);
  GenerationBatch result;
  result.backend_id = backend.id();
  result.temperature = cfg.temperature;
  result.prompt_hash = prompt_hash(text);
  result.seed = options.seed;

  std::string cache_key;
  if (options.cache) {
    cache_key = result.backend_id + "|" + result.prompt_hash + "|" + std::to_string(cfg.temperature) + "|" +
                std::to_string(target_n) + "|" + std::to_string(batch_size) + "|" + std::to_string(options.seed);
    if (auto hit = options.cache->get(cache_key)) return *hit;
  }

  const std::size_t n_batches = (target_n + batch_size - 1) / batch_size;
  std::vector<std::vector<Row>> parts(n_batches);
  std::vector<std::size_t> retries(n_batches, 0);
  std::vector<std::string> failures(n_batches);

  parallel_for(n_batches, cfg.max_inflight, [&](std::size_t b) {
    std::string last_error;
    for (std::size_t attempt = 1; attempt <= cfg.max_retries_per_batch; ++attempt) {
      const std::uint64_t seed = mix_seed(mix_seed(options.seed, b), attempt);
      try {
        parts[b] = parse_batch(backend.request_batch(text, cfg.temperature, seed), schema, batch_size);
        return;
      } catch (const MalformedResponseError& e) {
        last_error = e.what();
      } catch (const TransportError& e) {
        if (!e.retryable()) throw;
        last_error = e.what();
        if (attempt < cfg.max_retries_per_batch) {
          Rng jitter(seed);
          const std::chrono::duration<double> delay(cfg.backoff.delay_seconds(attempt, jitter.uniform()));
          if (options.sleep) {
            options.sleep(delay);
          } else {
            std::this_thread::sleep_for(delay);
          }
        }
      }
      ++retries[b];
    }
    failures[b] = last_error.empty() ? "unknown failure" : last_error;
  });

  for (std::size_t b = 0; b < n_batches; ++b) {
    if (!failures[b].empty()) {
      throw Error(ErrorKind::BackendExhausted, "batch " + std::to_string(b) + " failed " +
                                                   std::to_string(cfg.max_retries_per_batch) +
                                                   " consecutive attempts; last error: " + failures[b]);
    }
  }

  result.rows.reserve(n_batches * batch_size);
  for (auto& part : parts) {
    for (auto& row : part) {
      if (result.rows.size() == target_n) break;
      row.group = options.group;
      result.rows.push_back(std::move(row));
    }
  }
  result.retries = std::move(retries);
  if (options.cache) options.cache->put(cache_key, result);
  return result;
}

}  // namespace groupsynth
