#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groupsynth/augment.hpp"
#include "groupsynth/data.hpp"
#include "groupsynth/model.hpp"

namespace groupsynth {

// Mann-Whitney statistic with midranks for ties. Throws SingleClass,
// DimensionMismatch.
double auroc(std::span<const double> labels, std::span<const double> scores);

// Average precision over descending unique score thresholds. Throws
// NoPositives, DimensionMismatch.
double auprc(std::span<const double> labels, std::span<const double> scores);

struct EvalResult {
  std::string group;
  std::string outcome;
  MethodId method = MethodId::Baseline;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// A method's fitted logistic models. Pooled methods hold one model trained
// with the group indicator; Separate holds {majority model, minority model}.
struct FittedMethod {
  MethodId method = MethodId::Baseline;
  std::vector<LogisticModel> models;
  std::string majority_label;
  std::string minority_label;

  // Decision scores for rows of the named group.
  std::vector<double> score(const Encoder& encoder, std::span<const Row> rows, std::string_view group) const;
};

FittedMethod fit_method(MethodId method, std::span<const TrainingSet> sets, const GroupSample& sample,
                        const LogisticConfig& config = {});

// Restricts the holdout rows to `group` and scores them with the right model.
// Throws SkippedCell when that slice lacks an outcome class.
EvalResult evaluate_group(const FittedMethod& fitted, const Table& table, std::span<const std::size_t> holdout,
                          std::string_view group, std::string_view outcome, const Encoder& encoder);

}  // namespace groupsynth
