#include "groupsynth/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "groupsynth/error.hpp"

namespace groupsynth {

namespace {

void check_lengths(std::span<const double> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw Error(ErrorKind::DimensionMismatch, "labels and scores differ in length (" +
                                                  std::to_string(labels.size()) + " vs " +
                                                  std::to_string(scores.size()) + ")");
  }
}

}  // namespace

double auroc(std::span<const double> labels, std::span<const double> scores) {
  check_lengths(labels, scores);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1.0) {
        n_pos += 1.0;
        rank_sum += midrank;
      }
    }
    i = j;
  }
  const double n_neg = double(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw Error(ErrorKind::SingleClass, "AUROC needs both classes");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auprc(std::span<const double> labels, std::span<const double> scores) {
  check_lengths(labels, scores);
  const std::size_t n = labels.size();
  double total_pos = 0.0;
  for (double v : labels) total_pos += v == 1.0 ? 1.0 : 0.0;
  if (total_pos == 0.0) throw Error(ErrorKind::NoPositives, "AUPRC needs at least one positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    for (; j < n && scores[order[j]] == scores[order[i]]; ++j) {
      (labels[order[j]] == 1.0 ? tp : fp) += 1.0;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

std::vector<double> FittedMethod::score(const Encoder& encoder, std::span<const Row> rows,
                                        std::string_view group) const {
  const bool minority = group == minority_label;
  if (!minority && group != majority_label) {
    throw Error(ErrorKind::InvalidSpec, "group '" + std::string(group) + "' is neither '" + majority_label +
                                            "' nor '" + minority_label + "'");
  }
  if (method == MethodId::Separate) {
    return decision_function(models.at(minority ? 1 : 0), encoder.encode(rows));
  }
  return decision_function(models.at(0), encode_with_indicator(encoder, rows, minority ? 1.0 : 0.0));
}

FittedMethod fit_method(MethodId method, std::span<const TrainingSet> sets, const GroupSample& sample,
                        const LogisticConfig& config) {
  FittedMethod fitted;
  fitted.method = method;
  fitted.majority_label = sample.majority_label;
  fitted.minority_label = sample.minority_label;
  for (const auto& s : sets) fitted.models.push_back(fit_logistic(s.x, s.y, s.weights, config));
  return fitted;
}

EvalResult evaluate_group(const FittedMethod& fitted, const Table& table, std::span<const std::size_t> holdout,
                          std::string_view group, std::string_view outcome, const Encoder& encoder) {
  const auto& schema = table.schema();
  const std::size_t gi = schema.group_index(group);
  const std::size_t oi = schema.outcome_index(outcome);

  std::vector<Row> rows;
  std::vector<double> labels;
  for (auto i : holdout) {
    const Row& r = table.row(i);
    if (r.group != gi) continue;
    rows.push_back(r);
    labels.push_back(double(r.outcomes[oi]));
  }
  EvalResult res;
  res.group = std::string(group);
  res.outcome = std::string(outcome);
  res.method = fitted.method;
  for (double v : labels) (v == 1.0 ? res.n_pos : res.n_neg) += 1;
  if (res.n_pos == 0 || res.n_neg == 0) {
    throw Error(ErrorKind::SkippedCell, "holdout for " + res.group + " has " + std::to_string(res.n_pos) +
                                            " positive and " + std::to_string(res.n_neg) + " negative " +
                                            res.outcome + " rows");
  }
  const auto scores = fitted.score(encoder, rows, group);
  res.auroc = auroc(labels, scores);
  res.auprc = auprc(labels, scores);
  return res;
}

}  // namespace groupsynth
