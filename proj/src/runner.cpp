#include "groupsynth/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "groupsynth/parallel.hpp"
#include "groupsynth/prompt.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

std::size_t ExperimentConfig::effective_synthetic_target() const {
  if (synthetic_target) return *synthetic_target;
  return n_maj > n_min ? n_maj - n_min : 0;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  const bool has_csv = dataset.csv.has_value() || dataset.schema.has_value();
  if (has_csv == dataset.fixture.has_value()) fail("dataset needs either {csv, schema} or {fixture}");
  if (has_csv && !(dataset.csv && dataset.schema)) fail("dataset.csv and dataset.schema go together");
  if (majority.empty()) fail("majority label is empty");
  if (minorities.empty()) fail("no minority groups configured");
  if (std::find(minorities.begin(), minorities.end(), majority) != minorities.end()) {
    fail("majority '" + majority + "' is also listed as a minority");
  }
  if (outcomes.empty()) fail("no outcomes configured");
  if (methods.empty()) fail("no methods configured");
  if (reps < 1) fail("reps must be >= 1");
  if (n_maj < 1) fail("n_maj must be >= 1");
  if (n_min < 2) fail("n_min must be >= 2");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (smote_k < 1) fail("smote_k must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature must lie in [0, 2]");
  const bool llm = std::any_of(methods.begin(), methods.end(), needs_synthetic);
  if (llm && k_prompt < 1) fail("k_prompt must be >= 1 for generation methods");
  if (llm && effective_synthetic_target() < 1) fail("synthetic target is 0; set synthetic_target or n_maj > n_min");
  if (!(logistic.l2 >= 0.0)) fail("logistic.l2 must be >= 0");
  backend.validate();
}

void ExperimentConfig::validate(const Schema& schema) const {
  validate();
  auto has_group = [&](const std::string& g) {
    return std::find(schema.group_labels.begin(), schema.group_labels.end(), g) != schema.group_labels.end();
  };
  if (!has_group(majority)) throw Error(ErrorKind::ConfigError, "unknown majority group '" + majority + "'");
  for (const auto& g : minorities) {
    if (!has_group(g)) throw Error(ErrorKind::ConfigError, "unknown minority group '" + g + "'");
  }
  for (const auto& o : outcomes) {
    if (std::find(schema.outcomes.begin(), schema.outcomes.end(), o) == schema.outcomes.end()) {
      throw Error(ErrorKind::ConfigError, "unknown outcome '" + o + "'");
    }
  }
}

namespace {

const std::set<std::string> kConfigKeys = {
    "dataset",  "dataset_name", "dataset_context", "majority", "minorities", "outcomes",   "methods",
    "n_maj",    "n_min",        "k_prompt",        "reps",     "backend",    "temperature", "seed",
    "output_dir", "batch_size", "synthetic_target", "smote_k", "logistic",   "workers"};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kConfigKeys.count(key)) throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    const auto& ds = doc.at("dataset");
    if (ds.contains("csv")) c.dataset.csv = resolve(base_dir, ds.at("csv").get<std::string>());
    if (ds.contains("schema")) c.dataset.schema = resolve(base_dir, ds.at("schema").get<std::string>());
    if (ds.contains("fixture")) c.dataset.fixture = resolve(base_dir, ds.at("fixture").get<std::string>());
    if (ds.contains("fixture_seed")) c.dataset.fixture_seed = ds.at("fixture_seed").get<std::uint64_t>();

    c.dataset_name = doc.value("dataset_name", c.dataset_name);
    c.dataset_context = doc.value("dataset_context", c.dataset_context);
    c.majority = doc.at("majority").get<std::string>();
    c.minorities = doc.at("minorities").get<std::vector<std::string>>();
    c.outcomes = doc.at("outcomes").get<std::vector<std::string>>();
    if (doc.contains("methods")) {
      c.methods.clear();
      for (const auto& m : doc["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    c.n_maj = doc.value("n_maj", c.n_maj);
    c.n_min = doc.value("n_min", c.n_min);
    c.k_prompt = doc.value("k_prompt", c.k_prompt);
    c.reps = doc.value("reps", c.reps);
    if (doc.contains("backend")) {
      json b = doc["backend"];
      c.oracle = b.value("oracle", false);
      b.erase("oracle");
      if (b.contains("oracle_fixture") && b["oracle_fixture"].is_string()) {
        b["oracle_fixture"] = resolve(base_dir, b["oracle_fixture"].get<std::string>()).string();
      }
      c.backend = BackendConfig::from_json(b);
    }
    c.temperature = doc.value("temperature", c.backend.temperature);
    c.backend.temperature = c.temperature;
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc["output_dir"].get<std::string>());
    c.batch_size = doc.value("batch_size", c.batch_size);
    if (doc.contains("synthetic_target") && !doc["synthetic_target"].is_null()) {
      c.synthetic_target = doc["synthetic_target"].get<std::size_t>();
    }
    c.smote_k = doc.value("smote_k", c.smote_k);
    if (doc.contains("logistic")) {
      const auto& l = doc["logistic"];
      c.logistic.l2 = l.value("l2", c.logistic.l2);
      c.logistic.tolerance = l.value("tolerance", c.logistic.tolerance);
      c.logistic.max_iterations = l.value("max_iterations", c.logistic.max_iterations);
    }
    c.workers = doc.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json ds = json::object();
  if (dataset.csv) ds["csv"] = dataset.csv->string();
  if (dataset.schema) ds["schema"] = dataset.schema->string();
  if (dataset.fixture) ds["fixture"] = dataset.fixture->string();
  if (dataset.fixture_seed) ds["fixture_seed"] = *dataset.fixture_seed;
  json methods_json = json::array();
  for (auto m : methods) methods_json.push_back(to_string(m));
  json b = backend.to_json();
  b["oracle"] = oracle;
  json j = {{"dataset", ds},
            {"dataset_name", dataset_name},
            {"dataset_context", dataset_context},
            {"majority", majority},
            {"minorities", minorities},
            {"outcomes", outcomes},
            {"methods", methods_json},
            {"n_maj", n_maj},
            {"n_min", n_min},
            {"k_prompt", k_prompt},
            {"reps", reps},
            {"backend", b},
            {"temperature", temperature},
            {"seed", seed},
            {"output_dir", output_dir.string()},
            {"batch_size", batch_size},
            {"synthetic_target", synthetic_target ? json(*synthetic_target) : json(nullptr)},
            {"smote_k", smote_k},
            {"logistic",
             {{"l2", logistic.l2}, {"tolerance", logistic.tolerance}, {"max_iterations", logistic.max_iterations}}},
            {"workers", workers}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, "config " + path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(doc, path.parent_path());
}

Experiment make_experiment(ExperimentConfig config, std::shared_ptr<const Table> table,
                           std::shared_ptr<const FixtureModel> fixture) {
  config.validate(table->schema());
  config.backend.temperature = config.temperature;
  Experiment exp;
  if (config.oracle && !fixture) {
    throw Error(ErrorKind::ConfigError, "oracle mode needs a fixture dataset");
  }
  if (config.oracle && config.backend.kind != BackendKind::Mock) {
    throw Error(ErrorKind::ConfigError, "oracle mode is only available on the mock backend");
  }
  exp.backend = make_backend(config.backend, table->schema_ptr(), config.oracle ? fixture : nullptr);
  if (config.backend.cache_enabled()) exp.cache = std::make_shared<GenerationCache>();
  exp.fixture = std::move(fixture);
  exp.table = std::move(table);
  exp.config = std::move(config);
  return exp;
}

Experiment load_experiment(ExperimentConfig config) {
  config.validate();
  if (config.dataset.fixture) {
    auto model = std::make_shared<const FixtureModel>(load_fixture_spec(*config.dataset.fixture));
    auto table = std::make_shared<const Table>(make_fixture(*model, config.dataset.fixture_seed.value_or(config.seed)));
    return make_experiment(std::move(config), std::move(table), std::move(model));
  }
  auto schema = std::make_shared<const Schema>(load_schema(*config.dataset.schema));
  auto table = std::make_shared<const Table>(load_table(*config.dataset.csv, schema));
  return make_experiment(std::move(config), std::move(table));
}

// ---------------------------------------------------------------------------
// Results

MetricStats MetricStats::of(std::span<const double> values) {
  MetricStats s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / double(values.size());
  s.mean = mean;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.std = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

const MetricStats& CellResult::metric(std::string_view name) const {
  if (name == "auroc") return auroc;
  if (name == "auprc") return auprc;
  if (name == "auroc_majority") return auroc_majority;
  if (name == "auprc_majority") return auprc_majority;
  throw Error(ErrorKind::InvalidSpec, "unknown metric '" + std::string(name) + "'");
}

MetricStats& CellResult::metric(std::string_view name) {
  return const_cast<MetricStats&>(std::as_const(*this).metric(name));
}

bool CellResult::same_summary(const CellResult& o) const {
  return key == o.key && auroc == o.auroc && auprc == o.auprc && auroc_majority == o.auroc_majority &&
         auprc_majority == o.auprc_majority && reps_completed == o.reps_completed && skipped == o.skipped &&
         failure == o.failure && reason == o.reason;
}

const CellResult* ResultsGrid::find(const CellKey& key) const {
  for (const auto& c : cells) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

const CellResult& ResultsGrid::at(const CellKey& key) const {
  if (const auto* c = find(key)) return *c;
  throw Error(ErrorKind::InvalidSpec,
              "no cell for " + key.group + " / " + key.outcome + " / " + std::string(to_string(key.method)));
}

bool ResultsGrid::any_failed() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.failure.has_value(); });
}

bool ResultsGrid::same_summary(const ResultsGrid& o) const {
  if (cells.size() != o.cells.size()) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].same_summary(o.cells[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Running

std::uint64_t rep_seed(std::uint64_t master, const CellKey& key, std::size_t rep) {
  std::uint64_t s = mix_seed(master, key.group);
  s = mix_seed(s, key.outcome);
  s = mix_seed(s, std::string_view(to_string(key.method)));
  return mix_seed(s, static_cast<std::uint64_t>(rep));
}

namespace {

std::size_t count_positives(const Table& table, std::span<const std::size_t> rows, std::size_t outcome) {
  std::size_t n = 0;
  for (auto i : rows) n += table.row(i).outcomes[outcome] == 1 ? 1 : 0;
  return n;
}

// Outcomes the prompt examples must cover: those with a positive in the pool.
std::vector<std::string> coverable_outcomes(const Table& table, std::span<const std::size_t> pool,
                                            std::span<const std::string> outcomes) {
  std::vector<std::string> out;
  for (const auto& o : outcomes) {
    if (count_positives(table, pool, table.schema().outcome_index(o)) > 0) out.push_back(o);
  }
  return out;
}

std::optional<std::string> cell_precheck(const Experiment& exp, const CellKey& key) {
  const Table& t = *exp.table;
  const auto rows = t.rows_in_group(t.schema().group_index(key.group));
  const std::size_t oi = t.schema().outcome_index(key.outcome);
  const std::size_t pos = count_positives(t, rows, oi);
  if (pos == 0) return "no positive " + key.outcome + " cases among " + std::to_string(rows.size()) + " " + key.group + " rows";
  if (pos == rows.size()) return "no negative " + key.outcome + " cases among " + key.group + " rows";
  return std::nullopt;
}

CellResult aggregate(const CellKey& key, std::vector<RepRecord> reps, std::size_t planned) {
  CellResult cell;
  cell.key = key;
  std::vector<double> a, p, am, pm;
  std::size_t skipped = 0;
  std::string first_skip;
  for (auto& r : reps) {
    if (r.status == RepStatus::Failed) {
      // Reps after the first failure are discarded: the cell stops there.
      cell.failure = r.error.value_or(ErrorKind::IoError);
      cell.reason = "rep " + std::to_string(r.rep) + " failed: " + r.reason;
      cell.reps.push_back(std::move(r));
      break;
    }
    if (r.status == RepStatus::Skipped) {
      ++skipped;
      if (first_skip.empty()) first_skip = r.reason;
    } else {
      a.push_back(r.minority->auroc);
      p.push_back(r.minority->auprc);
      if (r.majority) {
        am.push_back(r.majority->auroc);
        pm.push_back(r.majority->auprc);
      }
    }
    cell.reps.push_back(std::move(r));
  }
  cell.auroc = MetricStats::of(a);
  cell.auprc = MetricStats::of(p);
  cell.auroc_majority = MetricStats::of(am);
  cell.auprc_majority = MetricStats::of(pm);
  cell.reps_completed = a.size();
  if (!cell.failure && cell.reps_completed == 0) {
    cell.skipped = true;
    cell.reason = "all " + std::to_string(planned) + " reps skipped: " + first_skip;
  } else if (!cell.failure && skipped > 0) {
    cell.reason = std::to_string(skipped) + " of " + std::to_string(planned) + " reps skipped: " + first_skip;
  }
  return cell;
}

CellResult skipped_cell(const CellKey& key, std::string reason) {
  CellResult cell;
  cell.key = key;
  cell.skipped = true;
  cell.reason = std::move(reason);
  return cell;
}

}  // namespace

RepRecord run_rep(const Experiment& exp, const CellKey& key, std::size_t rep) {
  const auto& cfg = exp.config;
  const Table& table = *exp.table;
  const Schema& schema = table.schema();
  RepRecord rec;
  rec.rep = rep;
  rec.seed = rep_seed(cfg.seed, key, rep);
  try {
    const std::size_t gmin = schema.group_index(key.group);
    const std::size_t oi = schema.outcome_index(key.outcome);

    SampleRequest req;
    req.majority = cfg.majority;
    req.minority = key.group;
    req.n_maj = cfg.n_maj;
    req.n_min = cfg.n_min;
    req.k_prompt = cfg.k_prompt;
    req.seed = rec.seed;
    req.prompt_source = key.method == MethodId::GptGeneric ? PromptSource::AllRows : PromptSource::Minority;
    if (req.prompt_source == PromptSource::Minority) {
      req.positive_outcomes = coverable_outcomes(table, table.rows_in_group(gmin), cfg.outcomes);
    } else {
      std::vector<std::size_t> all(table.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      req.positive_outcomes = coverable_outcomes(table, all, cfg.outcomes);
    }
    const GroupSample sample = sample_groups(table, req);

    std::size_t hold_pos = 0, hold_n = 0;
    for (auto i : sample.holdout_rows) {
      const Row& r = table.row(i);
      if (r.group != gmin) continue;
      ++hold_n;
      hold_pos += r.outcomes[oi] == 1 ? 1 : 0;
    }
    if (hold_pos == 0 || hold_pos == hold_n) {
      rec.status = RepStatus::Skipped;
      rec.reason = key.group + " holdout has " + std::to_string(hold_pos) + " positive " + key.outcome +
                   " cases out of " + std::to_string(hold_n);
      return rec;
    }

    std::optional<GenerationBatch> synthetic;
    if (needs_synthetic(key.method)) {
      std::vector<Row> examples;
      for (auto i : sample.prompt_example_rows) examples.push_back(table.row(i));
      const auto variant =
          key.method == MethodId::GptGroup ? PromptVariant::tailored(key.group) : PromptVariant::generic();
      const PromptSpec prompt = build_prompt(schema, examples, cfg.dataset_context, variant, cfg.batch_size);
      BackendConfig bc = cfg.backend;
      bc.temperature = cfg.temperature;
      GenerationOptions opts;
      opts.seed = mix_seed(rec.seed, "generate");
      opts.group = gmin;
      opts.cache = exp.cache.get();
      synthetic = generate_to_target(prompt, cfg.effective_synthetic_target(), cfg.batch_size, bc, *exp.backend,
                                     schema, opts);
      rec.synthetic_rows = synthetic->rows.size();
    }

    const Encoder encoder(schema);
    AssembleOptions aopts;
    aopts.smote_k = cfg.smote_k;
    aopts.smote_target = cfg.n_min + cfg.effective_synthetic_target();
    aopts.seed = rec.seed;
    const auto sets = assemble(key.method, table, sample, key.outcome, synthetic ? &*synthetic : nullptr, encoder,
                               aopts);
    for (const auto& s : sets) rec.training_rows += s.size();

    FittedMethod fitted;
    try {
      fitted = fit_method(key.method, sets, sample, cfg.logistic);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingleClass) throw;
      rec.status = RepStatus::Skipped;
      rec.reason = std::string("training set has a single ") + key.outcome + " class";
      return rec;
    }
    rec.minority = evaluate_group(fitted, table, sample.holdout_rows, key.group, key.outcome, encoder);
    try {
      rec.majority = evaluate_group(fitted, table, sample.holdout_rows, cfg.majority, key.outcome, encoder);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SkippedCell) throw;
    }
  } catch (const Error& e) {
    rec.minority.reset();
    rec.majority.reset();
    rec.reason = e.what();
    if (e.kind() == ErrorKind::SkippedCell) {
      rec.status = RepStatus::Skipped;
    } else {
      rec.status = RepStatus::Failed;
      rec.error = e.kind();
    }
  } catch (const std::exception& e) {
    rec.minority.reset();
    rec.majority.reset();
    rec.status = RepStatus::Failed;
    rec.error = ErrorKind::IoError;
    rec.reason = e.what();
  }
  return rec;
}

CellResult run_cell(const Experiment& exp, const CellKey& key) {
  if (auto reason = cell_precheck(exp, key)) return skipped_cell(key, *reason);
  std::vector<RepRecord> reps;
  for (std::size_t r = 0; r < exp.config.reps; ++r) {
    reps.push_back(run_rep(exp, key, r));
    if (reps.back().status == RepStatus::Failed) break;
  }
  return aggregate(key, std::move(reps), exp.config.reps);
}

ResultsGrid run_grid(const Experiment& exp) {
  const auto& cfg = exp.config;
  ResultsGrid grid;
  grid.dataset_name = cfg.dataset_name;

  std::vector<CellKey> keys;
  for (const auto& g : cfg.minorities) {
    for (const auto& o : cfg.outcomes) {
      for (auto m : cfg.methods) keys.push_back({g, o, m});
    }
  }
  std::vector<std::optional<std::string>> pre(keys.size());
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (cell, rep)
  for (std::size_t c = 0; c < keys.size(); ++c) {
    pre[c] = cell_precheck(exp, keys[c]);
    if (pre[c]) continue;
    for (std::size_t r = 0; r < cfg.reps; ++r) slots.emplace_back(c, r);
  }

  std::vector<RepRecord> records(slots.size());
  parallel_for(slots.size(), cfg.workers,
               [&](std::size_t i) { records[i] = run_rep(exp, keys[slots[i].first], slots[i].second); });

  std::size_t next = 0;
  for (std::size_t c = 0; c < keys.size(); ++c) {
    if (pre[c]) {
      grid.cells.push_back(skipped_cell(keys[c], *pre[c]));
      continue;
    }
    std::vector<RepRecord> reps(std::make_move_iterator(records.begin() + static_cast<long>(next)),
                                std::make_move_iterator(records.begin() + static_cast<long>(next + cfg.reps)));
    next += cfg.reps;
    grid.cells.push_back(aggregate(keys[c], std::move(reps), cfg.reps));
  }
  return grid;
}

TemperatureSweep sweep_temperature(const Experiment& exp, std::vector<double> temperatures) {
  Experiment sub = exp;
  sub.config.methods.clear();
  for (auto m : exp.config.methods) {
    if (needs_synthetic(m)) sub.config.methods.push_back(m);
  }
  if (sub.config.methods.empty()) {
    throw Error(ErrorKind::ConfigError, "temperature sweep needs a generation method (gpt_group or gpt_generic)");
  }
  TemperatureSweep sweep;
  sweep.temperatures = std::move(temperatures);
  for (double t : sweep.temperatures) {
    if (!(t >= 0.0 && t <= 2.0)) throw Error(ErrorKind::ConfigError, "temperature must lie in [0, 2]");
  }
  for (double t : sweep.temperatures) {
    sub.config.temperature = t;
    sub.config.backend.temperature = t;
    sweep.grids.push_back(run_grid(sub));
  }
  return sweep;
}

SizeSweep sweep_minority_size(const Experiment& exp, std::vector<std::size_t> sizes) {
  const Table& t = *exp.table;
  for (std::size_t size : sizes) {
    for (const auto& g : exp.config.minorities) {
      const std::size_t available = t.rows_in_group(t.schema().group_index(g)).size();
      if (available < size + exp.config.k_prompt) throw InsufficientGroupError(g, available, size + exp.config.k_prompt);
    }
  }
  SizeSweep sweep;
  sweep.sizes = std::move(sizes);
  for (std::size_t size : sweep.sizes) {
    Experiment sub = exp;
    sub.config.n_min = size;
    sub.config.validate(t.schema());
    sweep.grids.push_back(run_grid(sub));
  }
  return sweep;
}

int exit_code_for(const ResultsGrid& grid) {
  return exit_code_for(std::span<const ResultsGrid>(&grid, 1));
}

int exit_code_for(std::span<const ResultsGrid> grids) {
  int code = 0;
  for (const auto& g : grids) {
    for (const auto& c : g.cells) {
      if (!c.failure) continue;
      if (*c.failure == ErrorKind::BackendExhausted) return 2;
      code = 3;
    }
  }
  return code;
}

// ---------------------------------------------------------------------------
// Diagnostics run

DiagnosticsReport run_diagnostics(const Experiment& exp, const std::string& minority, std::uint64_t seed) {
  const auto& cfg = exp.config;
  const Table& table = *exp.table;
  const Schema& schema = table.schema();
  const std::size_t gmin = schema.group_index(minority);
  const std::size_t gmaj = schema.group_index(cfg.majority);

  auto sample_for = [&](PromptSource source) {
    SampleRequest req;
    req.majority = cfg.majority;
    req.minority = minority;
    req.n_maj = cfg.n_maj;
    req.n_min = cfg.n_min;
    req.k_prompt = cfg.k_prompt;
    req.seed = seed;
    req.prompt_source = source;
    std::vector<std::size_t> pool;
    if (source == PromptSource::Minority) {
      pool = table.rows_in_group(gmin);
    } else {
      pool.resize(table.size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    }
    req.positive_outcomes = coverable_outcomes(table, pool, cfg.outcomes);
    return sample_groups(table, req);
  };
  auto rows_of = [&](std::span<const std::size_t> idx) {
    std::vector<Row> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(table.row(i));
    return out;
  };
  auto generate = [&](const GroupSample& s, const PromptVariant& variant, std::string_view tag) {
    const auto examples = rows_of(s.prompt_example_rows);
    const PromptSpec prompt = build_prompt(schema, examples, cfg.dataset_context, variant, cfg.batch_size);
    BackendConfig bc = cfg.backend;
    bc.temperature = cfg.temperature;
    GenerationOptions opts;
    opts.seed = mix_seed(seed, tag);
    opts.group = gmin;
    opts.cache = exp.cache.get();
    return generate_to_target(prompt, cfg.effective_synthetic_target(), cfg.batch_size, bc, *exp.backend, schema, opts)
        .rows;
  };

  const GroupSample tailored = sample_for(PromptSource::Minority);
  const GroupSample generic = sample_for(PromptSource::AllRows);
  const auto syn_group = generate(tailored, PromptVariant::tailored(minority), "diagnose-group");
  const auto syn_generic = generate(generic, PromptVariant::generic(), "diagnose-generic");
  const auto min_train = rows_of(tailored.minority_rows);
  const auto maj_train = rows_of(tailored.majority_rows);
  std::vector<Row> min_all, maj_all, min_hold;
  for (const auto& r : table.rows()) {
    if (r.group == gmin) min_all.push_back(r);
    if (r.group == gmaj) maj_all.push_back(r);
  }
  for (auto i : tailored.holdout_rows) {
    if (table.row(i).group == gmin) min_hold.push_back(table.row(i));
  }

  DiagnosticsReport report;
  report.nn_distances["group-to-minority"] = l1_nn_distances(schema, syn_group, min_train);
  report.nn_distances["group-to-majority"] = l1_nn_distances(schema, syn_group, maj_train);
  report.nn_distances["generic-to-minority"] = l1_nn_distances(schema, syn_generic, min_train);
  report.nn_distances["generic-to-majority"] = l1_nn_distances(schema, syn_generic, maj_train);
  // Distance to the rows the generator was shown: zero means a copied example.
  report.nn_distances["group-to-examples"] = l1_nn_distances(schema, syn_group, rows_of(tailored.prompt_example_rows));
  report.nn_distances["generic-to-examples"] =
      l1_nn_distances(schema, syn_generic, rows_of(generic.prompt_example_rows));
  if (!min_hold.empty()) report.nn_distances["holdout-to-minority"] = l1_nn_distances(schema, min_hold, min_train);

  std::vector<std::string> numeric, corr_features;
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::Numeric) numeric.push_back(f.name);
    if (f.kind != FeatureKind::Categorical) corr_features.push_back(f.name);
  }
  const std::map<std::string, const std::vector<Row>*> sources = {
      {"real-minority", &min_all}, {"real-majority", &maj_all}, {"synthetic-group", &syn_group},
      {"synthetic-generic", &syn_generic}};
  for (const auto& [name, rows] : sources) {
    if (rows->size() >= 2) report.correlation[name] = correlation_matrix(schema, *rows, corr_features);
  }

  for (std::size_t a = 0; a + 1 < numeric.size() && a < 3; ++a) {
    const auto pair = std::make_pair(numeric[a], numeric[a + 1]);
    const std::size_t ia = schema.feature_index(pair.first), ib = schema.feature_index(pair.second);
    for (const auto& [name, rows] : sources) {
      if (name == "real-majority" || rows->size() < 2) continue;
      std::vector<double> xs, ys;
      for (const auto& r : *rows) {
        xs.push_back(r.features[ia]);
        ys.push_back(r.features[ib]);
      }
      report.kde[pair][name] = kde2d(xs, ys);
    }
  }

  std::vector<Row> real_min_pool;
  {
    std::vector<char> prompt(table.size(), 0);
    for (auto i : tailored.prompt_example_rows) prompt[i] = 1;
    for (auto i : table.rows_in_group(gmin)) {
      if (!prompt[i]) real_min_pool.push_back(table.row(i));
    }
  }
  ForestConfig fc;
  fc.workers = cfg.workers;
  report.discriminator = discriminator_report(schema, real_min_pool, maj_train, syn_group, mix_seed(seed, "forest"), fc,
                                              {{"synthetic-generic", syn_generic}});
  return report;
}

}  // namespace groupsynth
