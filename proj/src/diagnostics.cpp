#include "groupsynth/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "groupsynth/csv.hpp"
#include "groupsynth/error.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Nearest-neighbor distances

std::vector<double> l1_nn_distances(const Matrix& synthetic, const Matrix& reference,
                                    std::span<const double> column_weights) {
  if (reference.rows() == 0) throw Error(ErrorKind::EmptyReference, "nearest-neighbor reference set is empty");
  const std::size_t d = reference.cols();
  if (synthetic.cols() != d || column_weights.size() != d) {
    throw Error(ErrorKind::DimensionMismatch, "synthetic, reference and weights disagree on column count");
  }
  std::vector<double> out(synthetic.rows());
  for (std::size_t i = 0; i < synthetic.rows(); ++i) {
    const auto s = synthetic.row(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      const auto ref = reference.row(r);
      double acc = 0.0;
      std::size_t j = 0;
      // Terms are non-negative, so a partial sum past the best can stop early.
      for (; j < d && acc < best; ++j) acc += column_weights[j] * std::fabs(s[j] - ref[j]);
      if (j == d && acc < best) best = acc;
    }
    out[i] = best;
  }
  return out;
}

std::vector<double> l1_nn_distances(const Schema& schema, std::span<const Row> synthetic,
                                    std::span<const Row> reference) {
  if (reference.empty()) throw Error(ErrorKind::EmptyReference, "nearest-neighbor reference set is empty");
  const Encoder enc(schema, /*drop_first=*/false);
  Matrix ref = enc.encode(reference);
  Matrix syn = enc.encode(synthetic);
  const std::size_t d = enc.width();
  std::vector<double> weights(d);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = ref(0, j), hi = ref(0, j);
    for (std::size_t r = 1; r < ref.rows(); ++r) {
      lo = std::min(lo, ref(r, j));
      hi = std::max(hi, ref(r, j));
    }
    const double range = hi > lo ? hi - lo : 1.0;
    for (std::size_t r = 0; r < ref.rows(); ++r) ref(r, j) = (ref(r, j) - lo) / range;
    for (std::size_t r = 0; r < syn.rows(); ++r) syn(r, j) = (syn(r, j) - lo) / range;
    weights[j] = enc.columns()[j].kind == ColumnKind::OneHot ? 0.5 : 1.0;
  }
  return l1_nn_distances(syn, ref, weights);
}

// ---------------------------------------------------------------------------
// Correlations

CorrelationMatrix correlation_matrix(const Schema& schema, std::span<const Row> rows,
                                     std::span<const std::string> features) {
  if (rows.size() < 2) throw Error(ErrorKind::TooFewRows, "correlations need at least 2 rows");
  const std::size_t p = features.size(), n = rows.size();
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t f = 0; f < p; ++f) {
    const std::size_t idx = schema.feature_index(features[f]);
    if (schema.features[idx].kind == FeatureKind::Categorical) {
      throw Error(ErrorKind::InvalidSpec, "correlation needs numeric or binary features; '" + features[f] +
                                              "' is categorical");
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += rows[i].features[idx];
    mean /= double(n);
    for (std::size_t i = 0; i < n; ++i) cols[f][i] = rows[i].features[idx] - mean;
  }
  std::vector<double> norm(p, 0.0);
  for (std::size_t f = 0; f < p; ++f) {
    for (double v : cols[f]) norm[f] += v * v;
    norm[f] = std::sqrt(norm[f]);
  }

  CorrelationMatrix out;
  out.features.assign(features.begin(), features.end());
  out.values.assign(p, std::vector<std::optional<double>>(p));
  for (std::size_t a = 0; a < p; ++a) {
    if (norm[a] == 0.0) continue;
    out.values[a][a] = 1.0;
    for (std::size_t b = a + 1; b < p; ++b) {
      if (norm[b] == 0.0) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += cols[a][i] * cols[b][i];
      const double r = std::clamp(s / (norm[a] * norm[b]), -1.0, 1.0);
      out.values[a][b] = r;
      out.values[b][a] = r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel density

double KdeGrid::cell_area() const {
  const double dx = xs.size() > 1 ? xs[1] - xs[0] : 0.0;
  const double dy = ys.size() > 1 ? ys[1] - ys[0] : 0.0;
  return dx * dy;
}

double KdeGrid::mass() const {
  double s = 0.0;
  for (double v : density.data()) s += v;
  return s * cell_area();
}

namespace {

struct Axis {
  std::vector<double> nodes;
  double bandwidth;
};

Axis make_axis(std::span<const double> v, std::size_t grid_size) {
  const double n = double(v.size());
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  Axis axis;
  axis.bandwidth = std::pow(n, -1.0 / 6.0) * sd;
  if (!(axis.bandwidth > 0.0)) axis.bandwidth = 1e-3 * std::max(1.0, std::fabs(mean));  // constant data
  double lo = *lo_it, hi = *hi_it;
  double margin = 0.1 * (hi - lo);
  if (!(margin > 0.0)) margin = 3.0 * axis.bandwidth;
  lo -= margin;
  hi += margin;
  axis.nodes.resize(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    axis.nodes[i] = grid_size == 1 ? lo : lo + (hi - lo) * double(i) / double(grid_size - 1);
  }
  return axis;
}

// kernel(i, k) = N(node_i; v_k, h)
Matrix kernel_matrix(const Axis& axis, std::span<const double> v) {
  Matrix k(axis.nodes.size(), v.size());
  const double norm = 1.0 / (axis.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < axis.nodes.size(); ++i) {
    for (std::size_t p = 0; p < v.size(); ++p) {
      const double u = (axis.nodes[i] - v[p]) / axis.bandwidth;
      k(i, p) = norm * std::exp(-0.5 * u * u);
    }
  }
  return k;
}

}  // namespace

KdeGrid kde2d(std::span<const double> x, std::span<const double> y, std::size_t grid_size) {
  if (x.size() != y.size()) throw Error(ErrorKind::DimensionMismatch, "KDE coordinates differ in length");
  if (x.size() < 2) throw Error(ErrorKind::TooFewPoints, "KDE needs at least 2 points");
  if (grid_size < 2) throw Error(ErrorKind::ConfigError, "KDE grid needs at least 2 nodes per axis");
  const Axis ax = make_axis(x, grid_size), ay = make_axis(y, grid_size);
  const Matrix kx = kernel_matrix(ax, x), ky = kernel_matrix(ay, y);
  const std::size_t n = x.size();
  KdeGrid g;
  g.xs = ax.nodes;
  g.ys = ay.nodes;
  g.bandwidth_x = ax.bandwidth;
  g.bandwidth_y = ay.bandwidth;
  g.density = Matrix(grid_size, grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) {
    const auto a = kx.row(i);
    for (std::size_t j = 0; j < grid_size; ++j) {
      const auto b = ky.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) s += a[p] * b[p];
      g.density(i, j) = s / double(n);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Discriminator

std::map<std::string, std::vector<double>> discriminator_report(const Schema& schema,
                                                                std::span<const Row> real_minority,
                                                                std::span<const Row> real_majority,
                                                                std::span<const Row> synthetic, std::uint64_t seed,
                                                                const ForestConfig& forest,
                                                                const std::map<std::string, std::vector<Row>>& extra_sources) {
  constexpr std::size_t kMinRows = 20;
  if (real_minority.size() < kMinRows || real_majority.size() < kMinRows) {
    throw Error(ErrorKind::TooFewRows, "discriminator needs at least 20 rows per real group (got " +
                                           std::to_string(real_minority.size()) + " minority, " +
                                           std::to_string(real_majority.size()) + " majority)");
  }
  const Encoder enc(schema, /*drop_first=*/false);

  auto split = [&](std::span<const Row> rows, std::string_view tag) {
    std::vector<std::size_t> idx(rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(mix_seed(seed, tag));
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.7 * double(rows.size())));
    std::vector<Row> train, hold;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? train : hold).push_back(rows[idx[i]]);
    return std::pair{std::move(train), std::move(hold)};
  };
  auto [min_train, min_hold] = split(real_minority, "split-minority");
  auto [maj_train, maj_hold] = split(real_majority, "split-majority");

  Matrix x = enc.encode(maj_train);
  x.append_rows(enc.encode(min_train));
  std::vector<double> y(maj_train.size(), 0.0);
  y.resize(maj_train.size() + min_train.size(), 1.0);
  const ForestModel model = fit_forest(x, y, forest, mix_seed(seed, "forest"));

  std::map<std::string, std::vector<double>> out;
  out[kSourceMinorityHoldout] = forest_predict_proba(model, enc.encode(min_hold));
  out[kSourceMajorityHoldout] = forest_predict_proba(model, enc.encode(maj_hold));
  out[kSourceSynthetic] = synthetic.empty() ? std::vector<double>{}
                                            : forest_predict_proba(model, enc.encode(synthetic));
  for (const auto& [name, rows] : extra_sources) {
    out[name] = rows.empty() ? std::vector<double>{} : forest_predict_proba(model, enc.encode(rows));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string file_token(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

std::filesystem::path write_diagnostics(const DiagnosticsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  json manifest = {{"nn_distances", json::object()},
                   {"correlation", json::object()},
                   {"kde", json::array()},
                   {"discriminator", nullptr}};

  for (const auto& [ref, dist] : report.nn_distances) {
    csv::Document doc{{"distance"}, {}};
    for (double d : dist) doc.rows.push_back({csv::format_exact(d)});
    const std::string name = "nn_distances_" + file_token(ref) + ".csv";
    csv::write(dir / name, doc);
    manifest["nn_distances"][ref] = name;
  }
  for (const auto& [source, corr] : report.correlation) {
    csv::Document doc;
    doc.header.push_back("feature");
    doc.header.insert(doc.header.end(), corr.features.begin(), corr.features.end());
    for (std::size_t a = 0; a < corr.features.size(); ++a) {
      std::vector<std::string> row{corr.features[a]};
      for (const auto& v : corr.values[a]) row.push_back(v ? csv::format_exact(*v) : "");
      doc.rows.push_back(std::move(row));
    }
    const std::string name = "corr_" + file_token(source) + ".csv";
    csv::write(dir / name, doc);
    manifest["correlation"][source] = name;
  }
  for (const auto& [pair, grids] : report.kde) {
    csv::Document doc{{"source", "x", "y", "density"}, {}};
    json sources = json::object();
    for (const auto& [source, grid] : grids) {
      for (std::size_t i = 0; i < grid.xs.size(); ++i) {
        for (std::size_t j = 0; j < grid.ys.size(); ++j) {
          doc.rows.push_back({source, csv::format_exact(grid.xs[i]), csv::format_exact(grid.ys[j]),
                              csv::format_exact(grid.density(i, j))});
        }
      }
      sources[source] = {{"bandwidth_x", grid.bandwidth_x}, {"bandwidth_y", grid.bandwidth_y}, {"mass", grid.mass()}};
    }
    const std::string name = "kde_" + file_token(pair.first) + "_" + file_token(pair.second) + ".csv";
    csv::write(dir / name, doc);
    manifest["kde"].push_back({{"x", pair.first}, {"y", pair.second}, {"file", name}, {"sources", sources}});
  }
  if (!report.discriminator.empty()) {
    csv::Document doc{{"source", "probability"}, {}};
    for (const auto& [source, probs] : report.discriminator) {
      for (double p : probs) doc.rows.push_back({source, csv::format_exact(p)});
    }
    csv::write(dir / "discriminator_probs.csv", doc);
    manifest["discriminator"] = "discriminator_probs.csv";
  }

  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

}  // namespace groupsynth
