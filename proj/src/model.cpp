#include "groupsynth/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "groupsynth/error.hpp"
#include "groupsynth/parallel.hpp"
#include "groupsynth/rng.hpp"

namespace groupsynth {

using nlohmann::json;

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression

std::vector<double> LogisticModel::parameters() const {
  std::vector<double> p;
  p.reserve(coefficients.size() + 1);
  p.push_back(intercept);
  p.insert(p.end(), coefficients.begin(), coefficients.end());
  return p;
}

double LogisticModel::decision(std::span<const double> x) const {
  double z = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    if (!dropped[j]) z += coefficients[j] * (x[j] - mean[j]) / sd[j];
  }
  return z;
}

json LogisticModel::to_json() const {
  return {{"intercept", intercept},
          {"coefficients", coefficients},
          {"mean", mean},
          {"sd", sd},
          {"dropped", dropped},
          {"l2", config.l2},
          {"iterations", report.iterations},
          {"gradient_norm", report.gradient_norm},
          {"converged", report.converged}};
}

LogisticObjective::LogisticObjective(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                                     double l2)
    : y_(y.begin(), y.end()), l2_(l2) {
  const std::size_t n = x.rows(), d = x.cols();
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "label count does not match row count");
  if (!weights.empty() && weights.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "weight count does not match row count");
  }
  w_.assign(n, 1.0);
  if (!weights.empty()) std::copy(weights.begin(), weights.end(), w_.begin());
  for (double w : w_) {
    if (!(w > 0)) throw Error(ErrorKind::InvalidSpec, "sample weights must be strictly positive");
  }
  const double total = std::accumulate(w_.begin(), w_.end(), 0.0);

  mean_.assign(d, 0.0);
  sd_.assign(d, 0.0);
  dropped_.assign(d, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean_[j] += w_[i] * x(i, j);
  }
  for (auto& m : mean_) m /= total;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(i, j) - mean_[j];
      sd_[j] += w_[i] * c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    sd_[j] = std::sqrt(sd_[j] / total);
    if (!(sd_[j] > 1e-12 * std::max(1.0, std::fabs(mean_[j])))) {
      dropped_[j] = true;
      sd_[j] = 1.0;
    }
  }
  standardized_ = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      standardized_(i, j) = dropped_[j] ? 0.0 : (x(i, j) - mean_[j]) / sd_[j];
    }
  }
}

double LogisticObjective::value(std::span<const double> params) const {
  const std::size_t n = standardized_.rows(), d = standardized_.cols();
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = standardized_.row(i);
    double z = params[0];
    for (std::size_t j = 0; j < d; ++j) z += params[j + 1] * row[j];
    f += w_[i] * (softplus(z) - y_[i] * z);
  }
  double penalty = 0.0;
  for (std::size_t j = 1; j <= d; ++j) penalty += params[j] * params[j];
  return f + 0.5 * l2_ * penalty;
}

void LogisticObjective::gradient(std::span<const double> params, std::span<double> out) const {
  const std::size_t n = standardized_.rows(), d = standardized_.cols();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = standardized_.row(i);
    double z = params[0];
    for (std::size_t j = 0; j < d; ++j) z += params[j + 1] * row[j];
    const double r = w_[i] * (sigmoid(z) - y_[i]);
    out[0] += r;
    for (std::size_t j = 0; j < d; ++j) out[j + 1] += r * row[j];
  }
  for (std::size_t j = 1; j <= d; ++j) out[j] += l2_ * params[j];
}

LogisticModel fit_logistic(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                           const LogisticConfig& config) {
  if (x.rows() < 2) throw Error(ErrorKind::TooFewRows, "logistic regression needs at least 2 rows");
  if (y.size() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "label count does not match row count");
  bool has0 = false, has1 = false;
  for (double v : y) {
    if (v == 0.0) {
      has0 = true;
    } else if (v == 1.0) {
      has1 = true;
    } else {
      throw Error(ErrorKind::InvalidSpec, "labels must be 0 or 1");
    }
  }
  if (!has0 || !has1) throw Error(ErrorKind::SingleClass, "logistic regression needs both classes");

  const LogisticObjective obj(x, y, weights, config.l2);
  const Matrix& z = obj.standardized_;
  const std::size_t n = z.rows(), d = z.cols(), dim = d + 1;
  const auto& w = obj.w_;
  const auto& yy = obj.y_;
  const double l2 = config.l2;

  std::vector<double> params(dim, 0.0), grad(dim), scores(n), probs(n), direction_scores(n);

  LogisticModel model;
  model.config = config;
  auto& report = model.report;

  double step = 1.0;
  std::vector<double> prev_params(dim, 0.0), prev_grad(dim, 0.0);
  double f = obj.value(params);
  report.objective_trace.push_back(f);
  for (std::size_t iter = 0;; ++iter) {
    // Fresh scores and gradient at the current point.
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = z.row(i);
      double s = params[0];
      for (std::size_t j = 0; j < d; ++j) s += params[j + 1] * row[j];
      scores[i] = s;
      const double e = std::exp(-std::fabs(s));
      const double p = s >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      probs[i] = p;
      const double r = w[i] * (p - yy[i]);
      grad[0] += r;
      for (std::size_t j = 0; j < d; ++j) grad[j + 1] += r * row[j];
    }
    for (std::size_t j = 1; j < dim; ++j) grad[j] += l2 * params[j];
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    report.gradient_norm = std::sqrt(gnorm2);
    report.iterations = iter;
    if (report.gradient_norm <= config.tolerance) {
      report.converged = true;
      break;
    }
    if (iter >= config.max_iterations) break;

    // Scores move linearly along the search direction -grad.
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = z.row(i);
      double s = -grad[0];
      for (std::size_t j = 0; j < d; ++j) s -= grad[j + 1] * row[j];
      direction_scores[i] = s;
    }
    // First trial step: Barzilai-Borwein from the last accepted move, else
    // double the previous step. Backtracking below keeps every move monotone.
    if (iter > 0) {
      double sy = 0.0, ss = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double sk = params[k] - prev_params[k];
        sy += sk * (grad[k] - prev_grad[k]);
        ss += sk * sk;
      }
      step = (sy > 0.0 && std::isfinite(ss / sy)) ? ss / sy : step * 2.0;
    }
    step = std::min(step, 1e6);
    prev_params = params;
    prev_grad = grad;
    bool accepted = false;
    std::vector<double> candidate(dim);
    while (step > 1e-300) {
      // The change in objective is summed row by row as
      // softplus(s + t) - softplus(s) = log1p(sigmoid(s) * expm1(t)), which
      // stays accurate long after f_new - f would cancel to zero.
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = step * direction_scores[i];
        double term = std::log1p(probs[i] * std::expm1(t));
        if (!std::isfinite(term)) term = softplus(scores[i] + t) - softplus(scores[i]);
        change += w[i] * (term - yy[i] * t);
      }
      for (std::size_t k = 0; k < dim; ++k) candidate[k] = params[k] - step * grad[k];
      for (std::size_t j = 1; j < dim; ++j) change += 0.5 * l2 * (candidate[j] - params[j]) * (candidate[j] + params[j]);
      if (change <= -1e-4 * step * gnorm2) {
        params = candidate;
        f += change;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent step left
    report.objective_trace.push_back(f);
  }

  model.intercept = params[0];
  model.coefficients.assign(params.begin() + 1, params.end());
  model.mean = obj.mean_;
  model.sd = obj.sd_;
  model.dropped = obj.dropped_;
  for (std::size_t j = 0; j < d; ++j) {
    if (model.dropped[j]) model.warnings.push_back("feature " + std::to_string(j) + " is constant and was dropped");
  }
  return model;
}

std::vector<double> decision_function(const LogisticModel& model, const Matrix& x) {
  if (x.cols() != model.n_features()) {
    throw Error(ErrorKind::DimensionMismatch, "model expects " + std::to_string(model.n_features()) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = model.decision(x.row(i));
  return out;
}

std::vector<double> predict_proba(const LogisticModel& model, const Matrix& x) {
  auto out = decision_function(model, x);
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  for (auto& v : out) v = std::clamp(sigmoid(v), lo, hi);
  return out;
}

// ---------------------------------------------------------------------------
// Random forest

double DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return nodes[i].value;
}

json ForestModel::to_json() const {
  json jt = json::array();
  for (const auto& t : trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    }
    jt.push_back(std::move(nodes));
  }
  return {{"n_features", n_features}, {"feature_subsample", feature_subsample}, {"seed", seed}, {"trees", jt}};
}

std::vector<std::size_t> bootstrap_counts(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> counts(n, 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) ++counts[rng.below(n)];
  return counts;
}

namespace {

struct Sample {
  std::size_t row;
  double weight;
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = std::numeric_limits<double>::infinity();
};

double gini_sum(double w, double w1) {
  // w * gini(node) = w * (1 - p^2 - q^2) = 2 * w1 * (w - w1) / w
  return w > 0 ? 2.0 * w1 * (w - w1) / w : 0.0;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> y, std::size_t mtry, std::size_t min_leaf, std::uint64_t seed)
      : x_(x), y_(y), mtry_(mtry), min_leaf_(static_cast<double>(min_leaf)), rng_(seed) {}

  DecisionTree build(std::vector<Sample> samples) {
    grow(std::move(samples));
    return std::move(tree_);
  }

 private:
  const Matrix& x_;
  std::span<const double> y_;
  std::size_t mtry_;
  double min_leaf_;
  Rng rng_;
  DecisionTree tree_;

  int grow(std::vector<Sample> samples) {
    double w = 0.0, w1 = 0.0;
    for (const auto& s : samples) {
      w += s.weight;
      w1 += s.weight * y_[s.row];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].value = w > 0 ? w1 / w : 0.0;
    if (w1 == 0.0 || w1 == w || w < 2.0 * min_leaf_) return id;

    const std::size_t d = x_.cols();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial shuffle: the first mtry entries are the sampled candidates.
    const std::size_t m = std::min(mtry_, d);
    for (std::size_t i = 0; i < m; ++i) std::swap(order[i], order[i + rng_.below(d - i)]);

    std::vector<std::size_t> candidates(order.begin(), order.begin() + static_cast<long>(m));
    std::sort(candidates.begin(), candidates.end());
    SplitChoice best = best_split(samples, candidates, w, w1);
    if (best.feature < 0 && m < d) {
      std::vector<std::size_t> rest(order.begin() + static_cast<long>(m), order.end());
      std::sort(rest.begin(), rest.end());
      best = best_split(samples, rest, w, w1);
    }
    if (best.feature < 0) return id;

    std::vector<Sample> left, right;
    for (const auto& s : samples) {
      (x_(s.row, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    const int l = grow(std::move(left));
    tree_.nodes[id].left = l;
    const int r = grow(std::move(right));
    tree_.nodes[id].right = r;
    return id;
  }

  SplitChoice best_split(const std::vector<Sample>& samples, const std::vector<std::size_t>& features, double w,
                         double w1) const {
    SplitChoice best;
    std::vector<std::pair<double, std::size_t>> sorted(samples.size());
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < samples.size(); ++i) sorted[i] = {x_(samples[i].row, f), i};
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double lw = 0.0, lw1 = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const auto& s = samples[sorted[i].second];
        lw += s.weight;
        lw1 += s.weight * y_[s.row];
        const double v = sorted[i].first, next = sorted[i + 1].first;
        if (v == next) continue;
        if (lw < min_leaf_ || w - lw < min_leaf_) continue;
        const double score = gini_sum(lw, lw1) + gini_sum(w - lw, w1 - lw1);
        if (score < best.score) {
          double threshold = v + (next - v) / 2.0;
          if (!(threshold < next)) threshold = v;
          best = {static_cast<int>(f), threshold, score};
        }
      }
    }
    return best;
  }
};

}  // namespace

DecisionTree fit_tree(const Matrix& x, std::span<const double> y, std::span<const std::size_t> multiplicity,
                      std::size_t feature_subsample, std::size_t min_leaf, std::uint64_t seed) {
  if (y.size() != x.rows() || multiplicity.size() != x.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "labels/multiplicities do not match row count");
  }
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (multiplicity[i] > 0) samples.push_back({i, static_cast<double>(multiplicity[i])});
  }
  TreeBuilder builder(x, y, std::max<std::size_t>(1, feature_subsample), std::max<std::size_t>(1, min_leaf), seed);
  return builder.build(std::move(samples));
}

ForestModel fit_forest(const Matrix& x, std::span<const double> y, const ForestConfig& config, std::uint64_t seed) {
  if (x.rows() < 2) throw Error(ErrorKind::TooFewRows, "forest needs at least 2 rows");
  if (y.size() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "label count does not match row count");
  if (config.trees == 0) throw Error(ErrorKind::ConfigError, "forest needs at least one tree");
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw Error(ErrorKind::InvalidSpec, "labels must be 0 or 1");
  }
  ForestModel model;
  model.n_features = x.cols();
  model.feature_subsample = config.feature_subsample
                                ? config.feature_subsample
                                : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(x.cols()))));
  model.seed = seed;
  model.trees.resize(config.trees);
  parallel_for(config.trees, config.workers, [&](std::size_t t) {
    const std::uint64_t tree_seed = mix_seed(seed, t);
    const auto counts =
        config.bootstrap ? bootstrap_counts(x.rows(), tree_seed) : std::vector<std::size_t>(x.rows(), 1);
    model.trees[t] = fit_tree(x, y, counts, model.feature_subsample, config.min_leaf, mix_seed(tree_seed, "split"));
  });
  return model;
}

std::vector<double> forest_predict_proba(const ForestModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw Error(ErrorKind::DimensionMismatch, "forest expects " + std::to_string(model.n_features) +
                                                  " features, got " + std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (const auto& t : model.trees) sum += t.predict(x.row(i));
    out[i] = sum / static_cast<double>(model.trees.size());
  }
  return out;
}

}  // namespace groupsynth
