#include "groupsynth/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "groupsynth/error.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

namespace {

struct MethodName {
  MethodId id;
  const char* key;
  const char* display;
};

constexpr MethodName kMethodNames[] = {
    {MethodId::Baseline, "baseline", "Baseline"},   {MethodId::Upweighted, "upweighted", "Upweighted"},
    {MethodId::Separate, "separate", "Separate"},   {MethodId::Smote, "smote", "SMOTE"},
    {MethodId::GptGroup, "gpt_group", "Group"},     {MethodId::GptGeneric, "gpt_generic", "Generic"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const char* to_string(MethodId method) {
  for (const auto& m : kMethodNames) {
    if (m.id == method) return m.key;
  }
  return "unknown";
}

const char* display_name(MethodId method) {
  for (const auto& m : kMethodNames) {
    if (m.id == method) return m.display;
  }
  return "unknown";
}

MethodId method_from_string(std::string_view text) {
  const std::string t = lower(text);
  for (const auto& m : kMethodNames) {
    if (t == m.key || t == lower(m.display)) return m.id;
  }
  throw Error(ErrorKind::ConfigError, "unknown method '" + std::string(text) + "'");
}

bool needs_synthetic(MethodId method) noexcept {
  return method == MethodId::GptGroup || method == MethodId::GptGeneric;
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::RealMajority: return "real-majority";
    case Provenance::RealMinority: return "real-minority";
    case Provenance::SyntheticSmote: return "synthetic-smote";
    case Provenance::SyntheticLlm: return "synthetic-llm";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// SMOTE

SmoteLayout SmoteLayout::continuous(std::size_t width) {
  SmoteLayout layout;
  layout.kinds.assign(width, ColumnKind::Continuous);
  layout.blocks.assign(width, -1);
  return layout;
}

SmoteLayout SmoteLayout::from_encoder(const Encoder& encoder) {
  SmoteLayout layout;
  for (const auto& c : encoder.columns()) {
    layout.kinds.push_back(c.kind);
    layout.blocks.push_back(c.block);
  }
  layout.implied_category = encoder.drop_first();
  return layout;
}

void SmoteLayout::append_passenger_binary() {
  if (in_distance.empty()) in_distance.assign(kinds.size(), true);
  kinds.push_back(ColumnKind::Binary);
  blocks.push_back(-1);
  in_distance.push_back(false);
}

namespace {

void round_row(std::span<double> row, const SmoteLayout& layout) {
  const std::size_t d = row.size();
  for (std::size_t j = 0; j < d; ++j) {
    if (layout.kinds[j] == ColumnKind::Binary) row[j] = row[j] >= 0.5 ? 1.0 : 0.0;
  }
  // One-hot blocks: argmax over the block, the implied category competing
  // with value 1 - sum. Ties go to the earlier category.
  std::vector<bool> done(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    if (layout.kinds[j] != ColumnKind::OneHot || done[j]) continue;
    const int block = layout.blocks[j];
    std::vector<std::size_t> members;
    for (std::size_t c = j; c < d; ++c) {
      if (layout.kinds[c] == ColumnKind::OneHot && layout.blocks[c] == block) members.push_back(c);
    }
    double best = -std::numeric_limits<double>::infinity();
    long winner = -1;
    if (layout.implied_category) {
      double sum = 0.0;
      for (auto c : members) sum += row[c];
      best = 1.0 - sum;
    }
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (row[members[m]] > best) {
        best = row[members[m]];
        winner = static_cast<long>(m);
      }
    }
    for (std::size_t m = 0; m < members.size(); ++m) {
      row[members[m]] = static_cast<long>(m) == winner ? 1.0 : 0.0;
      done[members[m]] = true;
    }
  }
}

}  // namespace

SmoteResult smote_upsample(const Matrix& minority, std::size_t target_n, std::size_t k, std::uint64_t seed,
                           const SmoteLayout& layout) {
  const std::size_t n = minority.rows(), d = minority.cols();
  if (k == 0) throw Error(ErrorKind::ConfigError, "SMOTE needs k >= 1");
  if (n < k + 1) {
    throw Error(ErrorKind::TooFewRows,
                "SMOTE with k=" + std::to_string(k) + " needs at least " + std::to_string(k + 1) + " rows, got " +
                    std::to_string(n));
  }
  if (target_n < n) {
    throw Error(ErrorKind::InvalidSpec, "SMOTE target " + std::to_string(target_n) + " is below the " +
                                            std::to_string(n) + " rows already present");
  }
  if (layout.kinds.size() != d || layout.blocks.size() != d ||
      (!layout.in_distance.empty() && layout.in_distance.size() != d)) {
    throw Error(ErrorKind::DimensionMismatch, "SMOTE layout does not match the column count");
  }

  // z-score the distance columns; constant columns carry no distance.
  std::vector<std::size_t> dist_cols;
  std::vector<double> mean, sd;
  for (std::size_t j = 0; j < d; ++j) {
    if (!layout.in_distance.empty() && !layout.in_distance[j]) continue;
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += minority(i, j);
    m /= double(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (minority(i, j) - m) * (minority(i, j) - m);
    v = std::sqrt(v / double(n));
    if (v > 0.0) {
      dist_cols.push_back(j);
      mean.push_back(m);
      sd.push_back(v);
    }
  }
  Matrix z(n, dist_cols.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dist_cols.size(); ++c) z(i, c) = (minority(i, dist_cols[c]) - mean[c]) / sd[c];
  }

  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t o = 0; o < n; ++o) {
      if (o == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double diff = z(i, c) - z(o, c);
        s += diff * diff;
      }
      dist.emplace_back(s, o);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
    for (std::size_t m = 0; m < k; ++m) neighbors[i].push_back(dist[m].second);
  }

  const std::size_t count = target_n - n;
  SmoteResult out;
  out.rows = Matrix(count, d);
  out.unrounded = Matrix(count, d);
  out.sources.reserve(count);
  out.lambda.reserve(count);
  Rng rng(seed);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t base = s % n;
    const std::size_t nn = neighbors[base][rng.below(k)];
    const double lambda = rng.uniform();
    const auto x = minority.row(base);
    const auto y = minority.row(nn);
    auto u = out.unrounded.row(s);
    for (std::size_t j = 0; j < d; ++j) u[j] = x[j] + lambda * (y[j] - x[j]);
    auto r = out.rows.row(s);
    std::copy(u.begin(), u.end(), r.begin());
    round_row(r, layout);
    out.sources.emplace_back(base, nn);
    out.lambda.push_back(lambda);
  }
  return out;
}

SmoteResult smote_upsample(const Matrix& minority, std::size_t target_n, std::size_t k, std::uint64_t seed) {
  return smote_upsample(minority, target_n, k, seed, SmoteLayout::continuous(minority.cols()));
}

// ---------------------------------------------------------------------------
// Weighting and assembly

std::vector<double> group_weights(std::span<const double> indicator) {
  std::size_t n_min = 0, n_maj = 0;
  for (double v : indicator) {
    if (v == 1.0) {
      ++n_min;
    } else if (v == 0.0) {
      ++n_maj;
    } else {
      throw Error(ErrorKind::InvalidSpec, "group indicator must be 0 or 1");
    }
  }
  if (n_min == 0 || n_maj == 0) throw Error(ErrorKind::SingleGroup, "group weights need both groups present");
  const double ratio = double(n_maj) / double(n_min);
  std::vector<double> w(indicator.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = indicator[i] == 1.0 ? ratio : 1.0;
  return w;
}

Matrix encode_with_indicator(const Encoder& encoder, std::span<const Row> rows, double indicator) {
  const std::size_t width = encoder.width();
  Matrix x(rows.size(), width + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = x.row(i);
    encoder.encode(rows[i], r.first(width));
    r[width] = indicator;
  }
  return x;
}

namespace {

std::vector<Row> gather(const Table& table, std::span<const std::size_t> indices) {
  std::vector<Row> rows;
  rows.reserve(indices.size());
  for (auto i : indices) rows.push_back(table.row(i));
  return rows;
}

void append(TrainingSet& set, const Matrix& x, std::span<const Row> rows, std::size_t outcome, Provenance tag) {
  if (set.x.cols() == 0 && set.x.rows() == 0) {
    set.x = x;
  } else {
    set.x.append_rows(x);
  }
  for (const auto& r : rows) {
    set.y.push_back(double(r.outcomes[outcome]));
    set.weights.push_back(1.0);
    set.provenance.push_back(tag);
  }
}

}  // namespace

std::vector<TrainingSet> assemble(MethodId method, const Table& table, const GroupSample& sample,
                                  std::string_view outcome, const GenerationBatch* synthetic, const Encoder& encoder,
                                  const AssembleOptions& options) {
  if (needs_synthetic(method) && synthetic == nullptr) {
    throw Error(ErrorKind::MissingSynthetic,
                std::string("method ") + display_name(method) + " needs generated rows but none were supplied");
  }
  const std::size_t oi = table.schema().outcome_index(outcome);
  const auto maj = gather(table, sample.majority_rows);
  const auto min = gather(table, sample.minority_rows);

  if (method == MethodId::Separate) {
    TrainingSet a, b;
    append(a, encoder.encode(maj), maj, oi, Provenance::RealMajority);
    append(b, encoder.encode(min), min, oi, Provenance::RealMinority);
    std::vector<TrainingSet> out;
    out.push_back(std::move(a));
    out.push_back(std::move(b));
    return out;
  }

  TrainingSet set;
  set.has_group_indicator = true;
  append(set, encode_with_indicator(encoder, maj, 0.0), maj, oi, Provenance::RealMajority);
  append(set, encode_with_indicator(encoder, min, 1.0), min, oi, Provenance::RealMinority);

  switch (method) {
    case MethodId::Baseline:
    case MethodId::Separate:
      break;
    case MethodId::Upweighted:
      set.weights = group_weights(set.x.column(set.x.cols() - 1));
      break;
    case MethodId::Smote: {
      const std::size_t width = encoder.width();
      Matrix m(min.size(), width + 1);
      for (std::size_t i = 0; i < min.size(); ++i) {
        auto r = m.row(i);
        encoder.encode(min[i], r.first(width));
        r[width] = double(min[i].outcomes[oi]);
      }
      SmoteLayout layout = SmoteLayout::from_encoder(encoder);
      layout.append_passenger_binary();
      const std::size_t target = options.smote_target ? options.smote_target : maj.size();
      const auto res = smote_upsample(m, target, options.smote_k, mix_seed(options.seed, "smote"), layout);
      std::vector<double> buf(width + 1);
      for (std::size_t s = 0; s < res.rows.rows(); ++s) {
        const auto r = res.rows.row(s);
        std::copy(r.begin(), r.begin() + static_cast<long>(width), buf.begin());
        buf[width] = 1.0;
        set.x.append_row(buf);
        set.y.push_back(r[width]);
        set.weights.push_back(1.0);
        set.provenance.push_back(Provenance::SyntheticSmote);
      }
      break;
    }
    case MethodId::GptGroup:
    case MethodId::GptGeneric:
      append(set, encode_with_indicator(encoder, synthetic->rows, 1.0), synthetic->rows, oi, Provenance::SyntheticLlm);
      break;
  }
  std::vector<TrainingSet> out;
  out.push_back(std::move(set));
  return out;
}

}  // namespace groupsynth
