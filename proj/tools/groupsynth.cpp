// Command-line front end: fixture, generate, run, sweep-temp, sweep-size,
// diagnose, report.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "groupsynth/runner.hpp"

using namespace groupsynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitBackend = 2;
constexpr int kExitPartial = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend;
  std::optional<double> temperature;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, CommonFlags& f, bool needs_config = true) {
  auto* c = app->add_option("--config", f.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "master seed override");
  app->add_option("--out", f.out, "output path");
  app->add_option("--backend", f.backend, "mock, oracle or http")->check(CLI::IsMember({"mock", "oracle", "http"}));
  app->add_option("--temperature", f.temperature, "generation temperature")->check(CLI::Range(0.0, 2.0));
  app->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig configured(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.backend == "mock") {
    cfg.backend.kind = BackendKind::Mock;
    cfg.oracle = false;
  } else if (f.backend == "oracle") {
    cfg.backend.kind = BackendKind::Mock;
    cfg.oracle = true;
  } else if (f.backend == "http") {
    cfg.backend.kind = BackendKind::Http;
    cfg.oracle = false;
  }
  if (f.temperature) {
    cfg.temperature = *f.temperature;
    cfg.backend.temperature = *f.temperature;
  }
  if (f.workers) cfg.workers = *f.workers;
  cfg.validate();
  return cfg;
}

void summarize(const ResultsGrid& grid) {
  std::size_t ok = 0, skipped = 0, failed = 0;
  for (const auto& c : grid.cells) {
    if (c.failure) {
      ++failed;
      std::fprintf(stderr, "failed: %s / %s / %s: %s\n", c.key.group.c_str(), c.key.outcome.c_str(),
                   display_name(c.key.method), c.reason.c_str());
    } else if (c.skipped) {
      ++skipped;
    } else {
      ++ok;
    }
  }
  std::fprintf(stderr, "%zu cells: %zu complete, %zu skipped, %zu failed\n", grid.cells.size(), ok, skipped, failed);
}

std::vector<double> parse_list_d(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::size_t> parse_list_z(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(std::stoul(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-tailored synthetic data augmentation experiments"};
  app.require_subcommand(1);

  // fixture
  CommonFlags fx;
  auto* fixture = app.add_subcommand("fixture", "write a calibrated fixture table from a fixture spec");
  fixture->add_option("--config", fx.config, "fixture spec (JSON)")->required()->check(CLI::ExistingFile);
  fixture->add_option("--seed", fx.seed, "fixture seed (default 0)");
  fixture->add_option("--out", fx.out, "output CSV")->required();

  // generate
  CommonFlags gen;
  std::string gen_group;
  bool gen_generic = false;
  std::optional<std::size_t> gen_n;
  auto* generate = app.add_subcommand("generate", "one prompt, generated to target, written as CSV");
  add_common(generate, gen);
  generate->add_option("--group", gen_group, "minority group (default: first configured)");
  generate->add_flag("--generic", gen_generic, "use the generic prompt");
  generate->add_option("--n", gen_n, "rows to generate (default: synthetic target)");

  // run
  CommonFlags run;
  auto* run_cmd = app.add_subcommand("run", "full grid of groups, outcomes and methods");
  add_common(run_cmd, run);

  // sweeps
  CommonFlags st;
  std::string temps = "0.5,0.9,1.2";
  auto* sweep_temp = app.add_subcommand("sweep-temp", "generation methods across temperatures");
  add_common(sweep_temp, st);
  sweep_temp->add_option("--temps", temps, "comma-separated temperatures");

  CommonFlags ss;
  std::string sizes = "50,100,200";
  auto* sweep_size = app.add_subcommand("sweep-size", "all methods across minority training sizes");
  add_common(sweep_size, ss);
  sweep_size->add_option("--sizes", sizes, "comma-separated minority sizes");

  // diagnose
  CommonFlags dg;
  std::string dg_group;
  auto* diagnose = app.add_subcommand("diagnose", "synthetic data diagnostics files");
  add_common(diagnose, dg);
  diagnose->add_option("--group", dg_group, "minority group (default: first configured)");

  // report
  std::string rp_results, rp_out, rp_name = "dataset";
  auto* report = app.add_subcommand("report", "re-render markdown from a results CSV");
  report->add_option("--results", rp_results, "results CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--out", rp_out, "output markdown (default: stdout)");
  report->add_option("--dataset", rp_name, "dataset label for the Dataset column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  // Errors before any experiment work are configuration errors.
  int stage_code = kExitConfig;
  try {
    if (*fixture) {
      const FixtureModel model(load_fixture_spec(fx.config));
      const Table table = make_fixture(model, fx.seed.value_or(0));
      write_table(fx.out, table);
      std::filesystem::path schema_path(fx.out);
      schema_path.replace_extension(".schema.json");
      std::ofstream(schema_path) << model.schema().to_json().dump(2) << '\n';
      std::fprintf(stderr, "wrote %zu rows to %s and schema to %s\n", table.size(), fx.out.c_str(),
                   schema_path.c_str());
      return kExitOk;
    }

    if (*report) {
      const ResultsGrid grid = read_results_csv(rp_results, rp_name);
      const std::string md = markdown_report(grid);
      if (rp_out.empty()) {
        std::cout << md;
      } else {
        std::ofstream out(rp_out);
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + rp_out);
        out << md;
      }
      return kExitOk;
    }

    if (*generate) {
      ExperimentConfig cfg = configured(gen);
      const Experiment exp = load_experiment(cfg);
      const std::string group = gen_group.empty() ? exp.config.minorities.front() : gen_group;
      const Table& table = *exp.table;
      const Schema& schema = table.schema();
      const std::size_t gi = schema.group_index(group);
      std::vector<std::size_t> pool;
      if (gen_generic) {
        for (std::size_t i = 0; i < table.size(); ++i) pool.push_back(i);
      } else {
        pool = table.rows_in_group(gi);
      }
      std::vector<std::string> coverable;
      for (const auto& o : exp.config.outcomes) {
        const std::size_t oi = schema.outcome_index(o);
        for (auto i : pool) {
          if (table.row(i).outcomes[oi] == 1) {
            coverable.push_back(o);
            break;
          }
        }
      }
      const auto picked = select_prompt_examples(table, pool, coverable, exp.config.k_prompt, exp.config.seed);
      std::vector<Row> examples;
      for (auto i : picked) examples.push_back(table.row(i));
      const auto variant = gen_generic ? PromptVariant::generic() : PromptVariant::tailored(group);
      const PromptSpec prompt =
          build_prompt(schema, examples, exp.config.dataset_context, variant, exp.config.batch_size);
      GenerationOptions opts;
      opts.seed = exp.config.seed;
      opts.group = gi;
      stage_code = kExitPartial;
      const GenerationBatch batch =
          generate_to_target(prompt, gen_n.value_or(exp.config.effective_synthetic_target()), exp.config.batch_size,
                             exp.config.backend, *exp.backend, schema, opts);
      const std::string out = gen.out.empty() ? "synthetic.csv" : gen.out;
      write_rows(out, schema, batch.rows);
      std::fprintf(stderr, "wrote %zu rows to %s (prompt %s)\n", batch.rows.size(), out.c_str(),
                   batch.prompt_hash.c_str());
      return kExitOk;
    }

    if (*run_cmd) {
      const Experiment exp = load_experiment(configured(run));
      stage_code = kExitPartial;
      const ResultsGrid grid = run_grid(exp);
      write_report(grid, exp.config.output_dir);
      summarize(grid);
      std::fprintf(stderr, "report in %s\n", exp.config.output_dir.c_str());
      return exit_code_for(grid);
    }

    if (*sweep_temp) {
      const Experiment exp = load_experiment(configured(st));
      stage_code = kExitPartial;
      const TemperatureSweep sweep = sweep_temperature(exp, parse_list_d(temps));
      write_report(sweep, exp.config.output_dir);
      for (const auto& g : sweep.grids) summarize(g);
      return exit_code_for(sweep.grids);
    }

    if (*sweep_size) {
      const Experiment exp = load_experiment(configured(ss));
      const auto list = parse_list_z(sizes);
      stage_code = kExitPartial;
      const SizeSweep sweep = sweep_minority_size(exp, list);
      write_report(sweep, exp.config.output_dir);
      for (const auto& g : sweep.grids) summarize(g);
      return exit_code_for(sweep.grids);
    }

    if (*diagnose) {
      const Experiment exp = load_experiment(configured(dg));
      const std::string group = dg_group.empty() ? exp.config.minorities.front() : dg_group;
      stage_code = kExitPartial;
      const DiagnosticsReport rep = run_diagnostics(exp, group, exp.config.seed);
      const auto manifest = write_diagnostics(rep, exp.config.output_dir);
      std::fprintf(stderr, "manifest: %s\n", manifest.c_str());
      return kExitOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.kind()), e.what());
    if (e.kind() == ErrorKind::BackendExhausted) return kExitBackend;
    // Inside a run a short group becomes a failed cell; here it can only come
    // from the up-front size check, so the request itself is at fault.
    if (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::InsufficientGroup) return kExitConfig;
    return stage_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return stage_code;
  }
  return kExitOk;
}
