#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groupsynth/matrix.hpp"

namespace groupsynth {

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticConfig {
  double l2 = 1e-4;  // penalty on coefficients; the intercept is unpenalized
  double tolerance = 1e-8;
  std::size_t max_iterations = 1000;
};

struct ConvergenceReport {
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each accepted step, starting at the origin
};

// Coefficients live on the standardized scale; mean/sd hold the transform.
// Features with zero spread are dropped: their coefficient stays 0.
struct LogisticModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> dropped;
  LogisticConfig config;
  ConvergenceReport report;
  std::vector<std::string> warnings;

  std::size_t n_features() const noexcept { return coefficients.size(); }
  // [intercept, coefficients...], the layout LogisticObjective expects.
  std::vector<double> parameters() const;
  double decision(std::span<const double> x) const;

  nlohmann::json to_json() const;
};

// Weighted negative log-likelihood plus (l2/2)*||beta||^2 on standardized
// features. Weighted mean/sd are used for the standardization so integer
// weights and row duplication define the same problem.
class LogisticObjective {
 public:
  LogisticObjective(const Matrix& x, std::span<const double> y, std::span<const double> weights, double l2);

  std::size_t dimension() const noexcept { return standardized_.cols() + 1; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<double>& sd() const noexcept { return sd_; }
  const std::vector<bool>& dropped() const noexcept { return dropped_; }
  const Matrix& standardized() const noexcept { return standardized_; }

  double value(std::span<const double> params) const;
  void gradient(std::span<const double> params, std::span<double> out) const;

 private:
  Matrix standardized_;
  std::vector<double> y_;
  std::vector<double> w_;
  std::vector<double> mean_;
  std::vector<double> sd_;
  std::vector<bool> dropped_;
  double l2_;

  friend LogisticModel fit_logistic(const Matrix&, std::span<const double>, std::span<const double>,
                                    const LogisticConfig&);
};

// Gradient descent with Armijo backtracking. An empty weight span means unit
// weights. Throws SingleClass, DimensionMismatch, TooFewRows.
LogisticModel fit_logistic(const Matrix& x, std::span<const double> y, std::span<const double> weights = {},
                           const LogisticConfig& config = {});

std::vector<double> decision_function(const LogisticModel& model, const Matrix& x);
// Sigmoid of the decision score, kept strictly inside (0, 1).
std::vector<double> predict_proba(const LogisticModel& model, const Matrix& x);

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t feature_subsample = 0;  // 0 means floor(sqrt(d)), at least 1
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  std::size_t workers = 1;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf: fraction of class 1
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  std::size_t feature_subsample = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Tree t of a forest seeded with `seed` trains on bootstrap_counts(n,
// mix_seed(seed, t)) and draws split candidates from mix_seed(seed, t) mixed
// with "split". Both depend only on (n, seed, t), never on row contents.
std::vector<std::size_t> bootstrap_counts(std::size_t n, std::uint64_t seed);

// CART tree on Gini impurity. `multiplicity[i]` is how many times row i is
// present. Split search depends only on values and counts, so permuting rows
// together with their multiplicities yields the same tree. Ties prefer the
// lower feature index, then the lower threshold.
DecisionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> multiplicity,
                      std::size_t feature_subsample, std::size_t min_leaf, std::uint64_t seed);

ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& config, std::uint64_t seed);

// Mean of the per-tree leaf fractions.
std::vector<double> forest_predict_proba(const ForestModel& model, const Matrix& x);

}  // namespace groupsynth
