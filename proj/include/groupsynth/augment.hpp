#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "groupsynth/data.hpp"
#include "groupsynth/genclient.hpp"
#include "groupsynth/matrix.hpp"

namespace groupsynth {

enum class MethodId { Baseline, Upweighted, Separate, Smote, GptGroup, GptGeneric };

inline constexpr std::array<MethodId, 6> kAllMethods = {MethodId::Baseline, MethodId::Upweighted, MethodId::Separate,
                                                        MethodId::Smote,    MethodId::GptGroup,   MethodId::GptGeneric};

// Config/CSV key: "baseline", "upweighted", "separate", "smote", "gpt_group", "gpt_generic".
const char* to_string(MethodId method);
// Column header used in rendered tables.
const char* display_name(MethodId method);
// Accepts the key or the display name, case-insensitively. Throws ConfigError.
MethodId method_from_string(std::string_view text);
bool needs_synthetic(MethodId method) noexcept;

enum class Provenance { RealMajority, RealMinority, SyntheticSmote, SyntheticLlm };
const char* to_string(Provenance p);

struct TrainingSet {
  Matrix x;
  std::vector<double> y;
  std::vector<double> weights;
  std::vector<Provenance> provenance;
  bool has_group_indicator = false;  // when set, the last column of x is the indicator (minority = 1)

  std::size_t size() const noexcept { return y.size(); }
};

// ---------------------------------------------------------------------------
// SMOTE

// Per-column handling. Columns outside the distance set (e.g. an appended
// outcome) are interpolated and rounded but never steer neighbor search.
struct SmoteLayout {
  std::vector<ColumnKind> kinds;
  std::vector<int> blocks;         // one-hot block id per column, -1 otherwise
  std::vector<bool> in_distance;   // empty means every column
  bool implied_category = false;   // one-hot blocks omit a first category

  static SmoteLayout continuous(std::size_t width);
  static SmoteLayout from_encoder(const Encoder& encoder);
  // Adds a rounded 0/1 column that is excluded from the distance.
  void append_passenger_binary();
};

struct SmoteResult {
  Matrix rows;       // after rounding
  Matrix unrounded;  // x + lambda * (x_nn - x), before rounding
  std::vector<std::pair<std::size_t, std::size_t>> sources;  // (base, neighbor) row indices
  std::vector<double> lambda;
};

// Returns target_n - rows(minority) synthetic rows. Synthetic row i starts
// from minority row i mod n; its partner is one of that row's k nearest
// neighbors by Euclidean distance on z-scored columns (z-scored over the
// given minority rows). Throws TooFewRows when fewer than k + 1 rows.
SmoteResult smote_upsample(const Matrix& minority, std::size_t target_n, std::size_t k, std::uint64_t seed,
                           const SmoteLayout& layout);
SmoteResult smote_upsample(const Matrix& minority, std::size_t target_n, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Weighting and assembly

// indicator[i] is 1 for minority rows. Minority rows get n_maj / n_min,
// majority rows get 1. Throws SingleGroup.
std::vector<double> group_weights(std::span<const double> indicator);

struct AssembleOptions {
  std::size_t smote_k = 5;
  std::size_t smote_target = 0;  // minority size after up-sampling; 0 means the majority size
  std::uint64_t seed = 0;
};

// Pooled sets list majority rows, then minority rows, then synthetic rows.
// Separate yields {majority set, minority set}. Throws MissingSynthetic.
std::vector<TrainingSet> assemble(MethodId method, const Table& table, const GroupSample& sample,
                                  std::string_view outcome, const GenerationBatch* synthetic, const Encoder& encoder,
                                  const AssembleOptions& options = {});

// Encodes rows and appends the group indicator column for pooled models.
Matrix encode_with_indicator(const Encoder& encoder, std::span<const Row> rows, double indicator);

}  // namespace groupsynth
