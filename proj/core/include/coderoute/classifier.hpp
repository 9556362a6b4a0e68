#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coderoute/artifact.hpp"
#include "coderoute/rng.hpp"

namespace coderoute {

struct BoostingConfig {
  int rounds = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 2;
  // Recorded for provenance; exact greedy fitting draws no random numbers.
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf score

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const noexcept;
  // Requires a non-empty tree.
  std::size_t leaf_index(std::span<const double> x) const noexcept;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

// Multi-class gradient boosting with a softmax objective. Each round fits one
// regression tree per class to the residuals (one-hot - probability) by exact
// greedy variance reduction; leaves then take a single Newton step. Trees are
// stored round-major: trees[round * num_classes + class_index].
struct BoostedForest {
  std::vector<std::string> classes;
  std::size_t feature_dim = 0;
  int rounds = 0;
  double learning_rate = 0.1;
  int max_depth = 4;
  double base_score = 0.0;
  std::vector<RegressionTree> trees;

  std::size_t num_classes() const noexcept { return classes.size(); }
  // Summed leaf scores per class (before softmax). Throws DimensionMismatch.
  std::vector<double> margins(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
  // argmax with ties going to the lowest class index.
  std::size_t predict(std::span<const double> x) const;

  friend bool operator==(const BoostedForest&, const BoostedForest&) = default;
};

std::vector<double> softmax(std::span<const double> z);

// Mean multi-class log loss.
double log_loss(const BoostedForest& forest, std::span<const std::vector<double>> features,
                std::span<const int> labels);

struct BoostingReport {
  // Training log loss before the first round and after each round.
  std::vector<double> loss_curve;
};

// Throws EmptyTrainingSet, DimensionMismatch or InvalidArgument.
BoostedForest fit_forest(std::span<const std::vector<double>> features, std::span<const int> labels,
                         std::vector<std::string> classes, const BoostingConfig& config,
                         BoostingReport* report = nullptr);

// One regression tree on a residual target; exposed for tests.
RegressionTree fit_regression_tree(std::span<const std::vector<double>> features,
                                   std::span<const double> target, int max_depth,
                                   std::size_t min_samples_leaf);

Json to_json(const BoostedForest& forest);
BoostedForest forest_from_json(const Json& doc, std::string_view where);

// Seeded Fisher-Yates shuffle, then the first floor(ratio * n) items train.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(std::vector<T> items, double ratio,
                                                        std::uint64_t seed) {
  if (items.size() < 2) {
    throw DataError(ErrorCode::InvalidArgument, "split needs at least two items");
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw DataError(ErrorCode::InvalidArgument, "split ratio must lie in [0, 1]");
  }
  SplitMix64 rng(seed);
  rng.shuffle(items);
  // The epsilon absorbs products like 0.7 * 10 = 7.000000000000001 and
  // their mirror images just below an integer.
  const auto n_train = std::min(
      items.size(),
      static_cast<std::size_t>(std::floor(ratio * static_cast<double>(items.size()) + 1e-9)));
  std::vector<T> test(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                      std::make_move_iterator(items.end()));
  items.resize(n_train);
  return {std::move(items), std::move(test)};
}

}  // namespace coderoute
