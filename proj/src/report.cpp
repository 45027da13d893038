#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "groupsynth/csv.hpp"
#include "groupsynth/runner.hpp"

namespace groupsynth {

namespace {

const std::vector<std::string> kCsvHeader = {"group", "outcome", "method", "metric", "mean",
                                             "std",   "reps",    "skipped", "failure", "reason"};

std::string opt_exact(const std::optional<double>& v) { return v ? csv::format_exact(*v) : ""; }

std::optional<double> parse_opt(const std::string& s, std::size_t row, const char* column) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw ParseError(row, column, "not a number: '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, std::size_t row, const char* column) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(row, column, "not a count: '" + s + "'");
  }
  return std::stoull(s);
}

ErrorKind error_kind_from_string(const std::string& s, std::size_t row) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::IoError); ++k) {
    if (s == to_string(static_cast<ErrorKind>(k))) return static_cast<ErrorKind>(k);
  }
  throw ParseError(row, "failure", "unknown error kind '" + s + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string short_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct RowKey {
  std::string group;
  std::string outcome;
  friend bool operator==(const RowKey&, const RowKey&) = default;
};

std::vector<RowKey> row_keys(const ResultsGrid& grid) {
  std::vector<RowKey> rows;
  for (const auto& c : grid.cells) {
    RowKey k{c.key.group, c.key.outcome};
    if (std::find(rows.begin(), rows.end(), k) == rows.end()) rows.push_back(k);
  }
  return rows;
}

std::vector<MethodId> grid_methods(std::span<const ResultsGrid> grids) {
  std::vector<MethodId> out;
  for (auto m : kAllMethods) {
    for (const auto& g : grids) {
      if (std::any_of(g.cells.begin(), g.cells.end(), [&](const CellResult& c) { return c.key.method == m; })) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

// Footnote numbering shared within one table.
class Notes {
 public:
  std::string mark(const std::string& text) {
    auto it = std::find(notes_.begin(), notes_.end(), text);
    std::size_t n = static_cast<std::size_t>(it - notes_.begin()) + 1;
    if (it == notes_.end()) notes_.push_back(text);
    return "[" + std::to_string(n) + "]";
  }
  void render(std::ostringstream& out) const {
    if (notes_.empty()) return;
    out << '\n';
    for (std::size_t i = 0; i < notes_.size(); ++i) out << "[" << i + 1 << "] " << notes_[i] << "  \n";
  }

 private:
  std::vector<std::string> notes_;
};

// One table row: the metric of each cell, bolding the strict maximum (all of
// them when tied).
std::vector<std::string> render_cells(const std::vector<const CellResult*>& cells, std::string_view metric,
                                      Notes& notes) {
  std::optional<double> best;
  for (const auto* c : cells) {
    if (!c) continue;
    const auto& m = c->metric(metric).mean;
    if (m && (!best || *m > *best)) best = *m;
  }
  std::vector<std::string> out;
  for (const auto* c : cells) {
    if (!c) {
      out.push_back("");
      continue;
    }
    const auto& m = c->metric(metric).mean;
    const std::string where = c->key.group + " / " + c->key.outcome + " / " + display_name(c->key.method);
    std::string text;
    if (!m) {
      text = "— " + notes.mark(where + ": " + (c->reason.empty() ? "no completed reps" : c->reason));
    } else {
      text = fixed(*m, 4);
      if (best && *m == *best) text = "**" + text + "**";
      if (c->failure) {
        text += " " + notes.mark(where + ": partial, " + std::to_string(c->reps_completed) + " reps; " + c->reason);
      }
    }
    out.push_back(std::move(text));
  }
  return out;
}

void table_header(std::ostringstream& out, const std::vector<std::string>& left, const std::vector<std::string>& right) {
  out << '|';
  for (const auto& h : left) out << ' ' << h << " |";
  for (const auto& h : right) out << ' ' << h << " |";
  out << "\n|";
  for (std::size_t i = 0; i < left.size(); ++i) out << "---|";
  for (std::size_t i = 0; i < right.size(); ++i) out << "---:|";
  out << '\n';
}

void table_row(std::ostringstream& out, const std::vector<std::string>& cells) {
  out << '|';
  for (const auto& c : cells) out << ' ' << c << " |";
  out << '\n';
}

constexpr std::pair<const char*, const char*> kTables[] = {{"AUROC", "auroc"}, {"AUPRC", "auprc"}};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

std::string results_csv(const ResultsGrid& grid) {
  std::ostringstream out;
  csv::write_row(out, kCsvHeader);
  for (const auto& c : grid.cells) {
    for (const char* metric : kMetricNames) {
      const auto& m = c.metric(metric);
      csv::write_row(out, {c.key.group, c.key.outcome, to_string(c.key.method), metric, opt_exact(m.mean),
                           opt_exact(m.std), std::to_string(m.n), c.skipped ? "1" : "0",
                           c.failure ? to_string(*c.failure) : "", c.reason});
    }
  }
  return out.str();
}

ResultsGrid parse_results_csv(std::string_view text, std::string dataset_name) {
  const auto doc = csv::parse(text);
  if (doc.header != kCsvHeader) throw Error(ErrorKind::SchemaMismatch, "results CSV header does not match");
  ResultsGrid grid;
  grid.dataset_name = std::move(dataset_name);
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& r = doc.rows[i];
    const std::size_t row = i + 1;
    if (r.size() != kCsvHeader.size()) throw ParseError(row, "group", "expected 10 fields");
    CellKey key{r[0], r[1], method_from_string(r[2])};
    if (grid.cells.empty() || !(grid.cells.back().key == key)) {
      if (grid.find(key)) throw ParseError(row, "group", "cell rows are not contiguous");
      CellResult cell;
      cell.key = key;
      if (r[7] != "0" && r[7] != "1") throw ParseError(row, "skipped", "expected 0 or 1");
      cell.skipped = r[7] == "1";
      if (!r[8].empty()) cell.failure = error_kind_from_string(r[8], row);
      cell.reason = r[9];
      grid.cells.push_back(std::move(cell));
    }
    auto& cell = grid.cells.back();
    MetricStats& m = cell.metric(r[3]);
    m.mean = parse_opt(r[4], row, "mean");
    m.std = parse_opt(r[5], row, "std");
    m.n = parse_count(r[6], row, "reps");
    if (r[3] == "auroc") cell.reps_completed = m.n;
  }
  return grid;
}

ResultsGrid read_results_csv(const std::filesystem::path& path, std::string dataset_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_results_csv(buf.str(), std::move(dataset_name));
}

std::string markdown_report(const ResultsGrid& grid) {
  const auto methods = grid_methods(std::span<const ResultsGrid>(&grid, 1));
  std::vector<std::string> headers;
  for (auto m : methods) headers.push_back(display_name(m));
  const auto rows = row_keys(grid);

  std::ostringstream out;
  out << "# Results: " << grid.dataset_name << "\n";
  for (const auto& [title, metric] : kTables) {
    Notes notes;
    out << "\n### " << title << "\n\n";
    table_header(out, {"Dataset", "Group", "Outcome"}, headers);
    for (const auto& rk : rows) {
      std::vector<const CellResult*> cells;
      for (auto m : methods) cells.push_back(grid.find({rk.group, rk.outcome, m}));
      std::vector<std::string> line = {grid.dataset_name, rk.group, rk.outcome};
      for (auto& s : render_cells(cells, metric, notes)) line.push_back(std::move(s));
      table_row(out, line);
    }
    notes.render(out);
  }
  return out.str();
}

std::string temperature_report(const TemperatureSweep& sweep) {
  const auto methods = grid_methods(sweep.grids);
  std::vector<std::string> headers;
  for (double t : sweep.temperatures) headers.push_back("Temp = " + short_number(t));
  const auto rows = sweep.grids.empty() ? std::vector<RowKey>{} : row_keys(sweep.grids.front());

  std::ostringstream out;
  out << "# Temperature sweep";
  if (!sweep.grids.empty()) out << ": " << sweep.grids.front().dataset_name;
  out << "\n";
  for (const auto& [title, metric] : kTables) {
    for (auto m : methods) {
      Notes notes;
      out << "\n### " << title << ": " << display_name(m) << "\n\n";
      table_header(out, {"Group", "Outcome"}, headers);
      for (const auto& rk : rows) {
        std::vector<const CellResult*> cells;
        for (const auto& g : sweep.grids) cells.push_back(g.find({rk.group, rk.outcome, m}));
        std::vector<std::string> line = {rk.group, rk.outcome};
        for (auto& s : render_cells(cells, metric, notes)) line.push_back(std::move(s));
        table_row(out, line);
      }
      notes.render(out);
    }
  }
  return out.str();
}

std::string size_report(const SizeSweep& sweep) {
  const auto methods = grid_methods(sweep.grids);
  std::vector<std::string> headers;
  for (auto m : methods) headers.push_back(display_name(m));
  const auto rows = sweep.grids.empty() ? std::vector<RowKey>{} : row_keys(sweep.grids.front());

  std::ostringstream out;
  out << "# Minority size sweep";
  if (!sweep.grids.empty()) out << ": " << sweep.grids.front().dataset_name;
  out << "\n";
  for (const auto& [title, metric] : kTables) {
    Notes notes;
    out << "\n### " << title << "\n\n";
    table_header(out, {"Group", "Outcome", "Size"}, headers);
    for (const auto& rk : rows) {
      for (std::size_t s = 0; s < sweep.sizes.size(); ++s) {
        std::vector<const CellResult*> cells;
        for (auto m : methods) cells.push_back(sweep.grids[s].find({rk.group, rk.outcome, m}));
        std::vector<std::string> line = {rk.group, rk.outcome, std::to_string(sweep.sizes[s])};
        for (auto& c : render_cells(cells, metric, notes)) line.push_back(std::move(c));
        table_row(out, line);
      }
    }
    notes.render(out);
  }
  return out.str();
}

void write_report(const ResultsGrid& grid, const std::filesystem::path& dir) {
  if (grid.cells.empty()) throw Error(ErrorKind::InvalidSpec, "nothing to report: the grid is empty");
  ensure_dir(dir);
  write_text(dir / "results.csv", results_csv(grid));
  write_text(dir / "results.md", markdown_report(grid));
}

void write_report(const TemperatureSweep& sweep, const std::filesystem::path& dir) {
  if (sweep.grids.empty()) throw Error(ErrorKind::InvalidSpec, "nothing to report: the sweep is empty");
  ensure_dir(dir);
  for (std::size_t i = 0; i < sweep.grids.size(); ++i) {
    write_text(dir / ("results_temp_" + short_number(sweep.temperatures[i]) + ".csv"), results_csv(sweep.grids[i]));
  }
  write_text(dir / "temperature.md", temperature_report(sweep));
}

void write_report(const SizeSweep& sweep, const std::filesystem::path& dir) {
  if (sweep.grids.empty()) throw Error(ErrorKind::InvalidSpec, "nothing to report: the sweep is empty");
  ensure_dir(dir);
  for (std::size_t i = 0; i < sweep.grids.size(); ++i) {
    write_text(dir / ("results_size_" + std::to_string(sweep.sizes[i]) + ".csv"), results_csv(sweep.grids[i]));
  }
  write_text(dir / "size.md", size_report(sweep));
}

}  // namespace groupsynth
