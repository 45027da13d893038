#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groupsynth/data.hpp"
#include "groupsynth/matrix.hpp"
#include "groupsynth/model.hpp"

namespace groupsynth {

// ---------------------------------------------------------------------------
// Nearest-neighbor distances

// For each synthetic row, the smallest weighted L1 distance to a reference
// row. Throws EmptyReference, DimensionMismatch.
std::vector<double> l1_nn_distances(const Matrix& synthetic, const Matrix& reference,
                                    std::span<const double> column_weights);

// Row-level variant: full one-hot encoding, every column min-max scaled by the
// reference range (a zero range divides by 1), one-hot columns weighted 1/2.
std::vector<double> l1_nn_distances(const Schema& schema, std::span<const Row> synthetic,
                                    std::span<const Row> reference);

// ---------------------------------------------------------------------------
// Correlations

struct CorrelationMatrix {
  std::vector<std::string> features;
  std::vector<std::vector<std::optional<double>>> values;  // nullopt where a column is constant
};

// Pearson correlations between numeric or binary features. Throws TooFewRows.
CorrelationMatrix correlation_matrix(const Schema& schema, std::span<const Row> rows,
                                     std::span<const std::string> features);

// ---------------------------------------------------------------------------
// Kernel density

struct KdeGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  Matrix density;  // density(i, j) at (xs[i], ys[j])
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;

  double cell_area() const;
  // Riemann sum of density times cell area.
  double mass() const;
};

// Product-Gaussian KDE on an n x n grid spanning the data range plus a 10%
// margin per side. Bandwidth per axis is n^(-1/6) times the sample sd.
// Throws TooFewPoints, DimensionMismatch.
KdeGrid kde2d(std::span<const double> x, std::span<const double> y, std::size_t grid_size = 100);

// ---------------------------------------------------------------------------
// Discriminator

inline constexpr const char* kSourceSynthetic = "synthetic";
inline constexpr const char* kSourceMinorityHoldout = "minority-holdout";
inline constexpr const char* kSourceMajorityHoldout = "majority-holdout";

// Forest trained on 70% of each real group (minority = class 1), then applied
// to both 30% holdouts and to every synthetic row. Extra sources are scored
// by the same forest under their own names. Throws TooFewRows when a real
// group has fewer than 20 rows.
std::map<std::string, std::vector<double>> discriminator_report(const Schema& schema,
                                                                std::span<const Row> real_minority,
                                                                std::span<const Row> real_majority,
                                                                std::span<const Row> synthetic, std::uint64_t seed,
                                                                const ForestConfig& forest = {},
                                                                const std::map<std::string, std::vector<Row>>& extra_sources = {});

// ---------------------------------------------------------------------------
// Bundle and files

struct DiagnosticsReport {
  std::map<std::string, std::vector<double>> nn_distances;       // by reference name
  std::map<std::string, CorrelationMatrix> correlation;          // by source name
  // (x feature, y feature) -> source name -> grid
  std::map<std::pair<std::string, std::string>, std::map<std::string, KdeGrid>> kde;
  std::map<std::string, std::vector<double>> discriminator;      // by source name
};

// Writes nn_distances_{ref}.csv, corr_{source}.csv, kde_{x}_{y}.csv (long
// form with a source column), discriminator_probs.csv and manifest.json.
// Returns the manifest path.
std::filesystem::path write_diagnostics(const DiagnosticsReport& report, const std::filesystem::path& dir);

}  // namespace groupsynth
