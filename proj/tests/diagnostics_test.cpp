#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "groupsynth/diagnostics.hpp"
#include "groupsynth/error.hpp"
#include "groupsynth/rng.hpp"
#include "support.hpp"

using namespace groupsynth;
using namespace groupsynth::testing;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::IoError;
}

std::vector<Row> group_rows(const Table& t, std::size_t g) {
  std::vector<Row> out;
  for (auto i : t.rows_in_group(g)) out.push_back(t.row(i));
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

// Row-level distance computed straight from the schema, no encoder.
double brute_row_distance(const Schema& s, const Row& a, const Row& b, const std::vector<double>& lo,
                          const std::vector<double>& hi) {
  double d = 0;
  for (std::size_t f = 0; f < s.features.size(); ++f) {
    if (s.features[f].kind == FeatureKind::Categorical) {
      d += a.features[f] == b.features[f] ? 0.0 : 1.0;  // two one-hot columns differ, each weighted 1/2
    } else {
      const double range = hi[f] > lo[f] ? hi[f] - lo[f] : 1.0;
      d += std::fabs(a.features[f] - b.features[f]) / range;
    }
  }
  return d;
}

}  // namespace

TEST(NearestNeighbor, CopiesHaveZeroDistance) {
  const Table t = small_table({0, 200}, 3);
  const auto rows = group_rows(t, 1);
  const auto d = l1_nn_distances(t.schema(), rows, rows);
  for (double v : d) EXPECT_EQ(v, 0.0);
}

TEST(NearestNeighbor, MatchesBruteForce) {
  const Table ref_t = small_table({0, 150}, 4);
  const Table syn_t = small_table({0, 60}, 5);
  const auto ref = group_rows(ref_t, 1), syn = group_rows(syn_t, 1);
  const Schema& s = ref_t.schema();
  std::vector<double> lo(3, 1e300), hi(3, -1e300);
  for (const auto& r : ref)
    for (std::size_t f = 0; f < 3; ++f) lo[f] = std::min(lo[f], r.features[f]), hi[f] = std::max(hi[f], r.features[f]);
  const auto d = l1_nn_distances(s, syn, ref);
  ASSERT_EQ(d.size(), syn.size());
  for (std::size_t i = 0; i < syn.size(); ++i) {
    double best = 1e300;
    for (const auto& r : ref) best = std::min(best, brute_row_distance(s, syn[i], r, lo, hi));
    EXPECT_NEAR(d[i], best, 1e-12);
  }
}

TEST(NearestNeighbor, AddingReferenceRowsNeverIncreasesDistance) {
  Rng rng(2);
  Matrix syn(40, 3), ref(10, 3);
  for (auto* m : {&syn, &ref})
    for (std::size_t i = 0; i < m->rows(); ++i)
      for (std::size_t j = 0; j < 3; ++j) (*m)(i, j) = rng.normal();
  const std::vector<double> w = {1.0, 0.5, 2.0};
  auto prev = l1_nn_distances(syn, ref, w);
  for (int step = 0; step < 20; ++step) {
    const std::vector<double> extra = {rng.normal(), rng.normal(), rng.normal()};
    ref.append_row(extra);
    const auto next = l1_nn_distances(syn, ref, w);
    for (std::size_t i = 0; i < next.size(); ++i) EXPECT_LE(next[i], prev[i]);
    prev = next;
  }
}

TEST(NearestNeighbor, Errors) {
  EXPECT_EQ(kind_of([] { l1_nn_distances(Matrix(2, 2), Matrix(0, 2), std::vector<double>{1, 1}); }),
            ErrorKind::EmptyReference);
  EXPECT_EQ(kind_of([] { l1_nn_distances(Matrix(2, 3), Matrix(2, 2), std::vector<double>{1, 1}); }),
            ErrorKind::DimensionMismatch);
  const Table t = small_table({0, 5}, 1);
  EXPECT_EQ(kind_of([&] { l1_nn_distances(t.schema(), group_rows(t, 1), {}); }), ErrorKind::EmptyReference);
}

TEST(Correlation, DiagonalScaleAndConstantColumns) {
  Schema s;
  s.features.push_back({"a", FeatureKind::Numeric, std::nullopt, {}});
  s.features.push_back({"b", FeatureKind::Numeric, std::nullopt, {}});
  s.features.push_back({"c", FeatureKind::Numeric, std::nullopt, {}});
  s.features.push_back({"flag", FeatureKind::Binary, std::nullopt, {}});
  s.group_column = "g";
  s.group_labels = {"x", "y"};
  Rng rng(6);
  std::vector<Row> rows;
  for (int i = 0; i < 100; ++i) {
    const double a = rng.normal();
    rows.push_back({{a, 2 * a + 1, 4.0, rng.bernoulli(0.5) ? 1.0 : 0.0}, 0, {}});
  }
  const std::vector<std::string> names = {"a", "b", "c", "flag"};
  const auto m = correlation_matrix(s, rows, names);
  EXPECT_EQ(m.features, names);
  EXPECT_DOUBLE_EQ(*m.values[0][0], 1.0);
  EXPECT_NEAR(*m.values[0][1], 1.0, 1e-12);
  EXPECT_FALSE(m.values[2][2].has_value());
  EXPECT_FALSE(m.values[0][2].has_value());
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) EXPECT_EQ(m.values[a][b], m.values[b][a]);

  // Direct two-pass Pearson on a and flag.
  double ma = 0, mf = 0;
  for (const auto& r : rows) ma += r.features[0] / 100, mf += r.features[3] / 100;
  double sab = 0, saa = 0, sbb = 0;
  for (const auto& r : rows) {
    sab += (r.features[0] - ma) * (r.features[3] - mf);
    saa += (r.features[0] - ma) * (r.features[0] - ma);
    sbb += (r.features[3] - mf) * (r.features[3] - mf);
  }
  EXPECT_NEAR(*m.values[0][3], sab / std::sqrt(saa * sbb), 1e-12);
}

TEST(Correlation, Errors) {
  const Table t = small_table({0, 10}, 1);
  const auto rows = group_rows(t, 1);
  const std::vector<std::string> cat = {"age", "stage"};
  EXPECT_EQ(kind_of([&] { correlation_matrix(t.schema(), rows, cat); }), ErrorKind::InvalidSpec);
  const std::vector<std::string> ok = {"age", "smoker"};
  EXPECT_EQ(kind_of([&] { correlation_matrix(t.schema(), std::span<const Row>(rows).first(1), ok); }),
            ErrorKind::TooFewRows);
}

TEST(Kde, MassIsNearOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<double> x, y;
    for (int i = 0; i < 300; ++i) {
      x.push_back(rng.normal() * 3 + 10);
      y.push_back(rng.bernoulli(0.5) ? rng.normal() : rng.normal() + 6);
    }
    const auto g = kde2d(x, y, 100);
    EXPECT_EQ(g.xs.size(), 100u);
    EXPECT_GE(g.mass(), 0.95);
    EXPECT_LE(g.mass(), 1.0 + 1e-9);
    for (double v : g.density.data()) EXPECT_GE(v, 0.0);
  }
}

TEST(Kde, SwappingAxesTransposesTheGrid) {
  Rng rng(3);
  std::vector<double> x, y;
  for (int i = 0; i < 80; ++i) x.push_back(rng.normal()), y.push_back(rng.uniform(0, 5));
  const auto a = kde2d(x, y, 40), b = kde2d(y, x, 40);
  EXPECT_EQ(a.xs, b.ys);
  EXPECT_EQ(a.ys, b.xs);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 40; ++j) EXPECT_NEAR(a.density(i, j), b.density(j, i), 1e-15);
}

TEST(Kde, PeakSitsOnTheCluster) {
  Rng rng(8);
  std::vector<double> x, y;
  for (int i = 0; i < 400; ++i) {
    const bool big = i < 320;
    x.push_back(big ? 2 + 0.3 * rng.normal() : -4 + rng.normal());
    y.push_back(big ? 3 + 0.3 * rng.normal() : 8 + rng.normal());
  }
  const auto g = kde2d(x, y, 120);
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < 120; ++i)
    for (std::size_t j = 0; j < 120; ++j)
      if (g.density(i, j) > g.density(bi, bj)) bi = i, bj = j;
  EXPECT_NEAR(g.xs[bi], 2.0, 0.3);
  EXPECT_NEAR(g.ys[bj], 3.0, 0.3);
}

TEST(Kde, BandwidthRule) {
  std::vector<double> x = {0, 1, 2, 3, 4, 5, 6, 7}, y = {1, 1, 2, 2, 3, 3, 4, 4};
  const auto g = kde2d(x, y, 10);
  double m = 3.5, v = 0;
  for (double a : x) v += (a - m) * (a - m);
  EXPECT_NEAR(g.bandwidth_x, std::pow(8.0, -1.0 / 6.0) * std::sqrt(v / 7), 1e-12);
  EXPECT_NEAR(g.xs.front(), -0.7, 1e-12);
  EXPECT_NEAR(g.xs.back(), 7.7, 1e-12);
}

TEST(Kde, Errors) {
  const std::vector<double> one = {1.0}, two = {1.0, 2.0};
  EXPECT_EQ(kind_of([&] { kde2d(one, one); }), ErrorKind::TooFewPoints);
  EXPECT_EQ(kind_of([&] { kde2d(one, two); }), ErrorKind::DimensionMismatch);
}

namespace {

struct SignFlip {
  FixtureModel model{load_fixture_spec(data_path("signflip_fixture.json"))};
  std::vector<Row> sample(const char* group, std::size_t n, std::uint64_t seed) const {
    Rng rng(seed);
    return model.sample(*model.find_group(group), n, rng);
  }
};

ForestConfig small_forest() {
  ForestConfig f;
  f.trees = 60;
  return f;
}

}  // namespace

TEST(Discriminator, SeparatesDistinctGroups) {
  // Ages around 30 versus around 75: a forest should tell them apart.
  Rng rng(4);
  std::vector<Row> maj, min;
  for (int i = 0; i < 600; ++i) {
    maj.push_back({{std::round(30 + 5 * rng.normal()), rng.bernoulli(0.4) ? 1.0 : 0.0, double(rng.below(3))}, 0, {0, 0}});
    if (i < 300)
      min.push_back({{std::round(75 + 5 * rng.normal()), rng.bernoulli(0.4) ? 1.0 : 0.0, double(rng.below(3))}, 1, {0, 0}});
  }
  const auto r = discriminator_report(small_schema(), min, maj, {}, 3, small_forest());
  EXPECT_EQ(r.at(kSourceMinorityHoldout).size(), 90u);
  EXPECT_EQ(r.at(kSourceMajorityHoldout).size(), 180u);
  EXPECT_TRUE(r.at(kSourceSynthetic).empty());
  EXPECT_GT(mean_of(r.at(kSourceMinorityHoldout)), 0.9);
  EXPECT_LT(mean_of(r.at(kSourceMajorityHoldout)), 0.1);
}

TEST(Discriminator, OracleAndCopyControlsLookLikeTheMinority) {
  const SignFlip sf;
  const auto maj = sf.sample("A", 600, 1), min = sf.sample("B", 300, 2);
  const auto oracle = sf.sample("B", 300, 99);
  const std::map<std::string, std::vector<Row>> extra = {{"copy", min}, {"majority-draws", sf.sample("A", 300, 98)}};
  const auto r = discriminator_report(sf.model.schema(), min, maj, oracle, 3, small_forest(), extra);
  const double hold = mean_of(r.at(kSourceMinorityHoldout));
  EXPECT_NEAR(mean_of(r.at(kSourceSynthetic)), hold, 0.1);
  EXPECT_GE(mean_of(r.at("copy")), hold);
  EXPECT_NEAR(mean_of(r.at("majority-draws")), mean_of(r.at(kSourceMajorityHoldout)), 0.1);
}

TEST(Discriminator, DeterministicAndSeedSensitive) {
  const SignFlip sf;
  const auto maj = sf.sample("A", 200, 1), min = sf.sample("B", 100, 2), syn = sf.sample("B", 50, 3);
  const auto a = discriminator_report(sf.model.schema(), min, maj, syn, 5, small_forest());
  const auto b = discriminator_report(sf.model.schema(), min, maj, syn, 5, small_forest());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, discriminator_report(sf.model.schema(), min, maj, syn, 6, small_forest()));
}

TEST(Discriminator, TooFewRows) {
  const SignFlip sf;
  const auto maj = sf.sample("A", 200, 1), min = sf.sample("B", 19, 2);
  EXPECT_EQ(kind_of([&] { discriminator_report(sf.model.schema(), min, maj, {}, 1); }), ErrorKind::TooFewRows);
}

TEST(WriteDiagnostics, FilesAndManifest) {
  const auto dir = scratch_dir("diag_write");
  DiagnosticsReport rep;
  rep.nn_distances["minority-train"] = {0.0, 0.25, 1.5};
  CorrelationMatrix cm;
  cm.features = {"a", "b"};
  cm.values = {{1.0, 0.5}, {0.5, std::nullopt}};
  rep.correlation["synthetic"] = cm;
  std::vector<double> x = {0, 1, 2}, y = {1, 0, 2};
  rep.kde[{"a", "b"}]["synthetic"] = kde2d(x, y, 5);
  rep.discriminator[kSourceSynthetic] = {0.1, 0.9};
  const auto manifest_path = write_diagnostics(rep, dir);
  std::ifstream in(manifest_path);
  const auto manifest = nlohmann::json::parse(in);
  EXPECT_EQ(manifest["nn_distances"]["minority-train"], "nn_distances_minority-train.csv");
  EXPECT_EQ(manifest["correlation"]["synthetic"], "corr_synthetic.csv");
  EXPECT_EQ(manifest["kde"][0]["file"], "kde_a_b.csv");
  EXPECT_EQ(manifest["discriminator"], "discriminator_probs.csv");
  for (const char* f : {"nn_distances_minority-train.csv", "corr_synthetic.csv", "kde_a_b.csv",
                        "discriminator_probs.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream kde(dir / "kde_a_b.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(kde, line);) ++lines;
  EXPECT_EQ(lines, 26u);
}
