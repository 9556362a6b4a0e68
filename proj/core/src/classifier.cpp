#include "coderoute/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coderoute/numeric.hpp"

namespace coderoute {

std::size_t RegressionTree::leaf_index(std::span<const double> x) const noexcept {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

double RegressionTree::predict(std::span<const double> x) const noexcept {
  return nodes.empty() ? 0.0 : nodes[leaf_index(x)].value;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> BoostedForest::margins(std::span<const double> x) const {
  if (x.size() != feature_dim) {
    throw DataError(ErrorCode::DimensionMismatch, "classifier input has length " +
                                                      std::to_string(x.size()) + ", expected " +
                                                      std::to_string(feature_dim));
  }
  const std::size_t k = num_classes();
  std::vector<double> z(k, base_score);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    z[t % k] += learning_rate * trees[t].predict(x);
  }
  return z;
}

std::vector<double> BoostedForest::predict_proba(std::span<const double> x) const {
  return softmax(margins(x));
}

std::size_t BoostedForest::predict(std::span<const double> x) const {
  const auto p = predict_proba(x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double log_loss(const BoostedForest& forest, std::span<const std::vector<double>> features,
                std::span<const int> labels) {
  CompensatedSum total;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto z = forest.margins(features[i]);
    const double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    total.add(mx + std::log(lse) - z[static_cast<std::size_t>(labels[i])]);
  }
  return features.empty() ? 0.0 : total.value() / static_cast<double>(features.size());
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x, std::span<const double> target,
              const std::vector<std::vector<std::size_t>>& sorted, int max_depth,
              std::size_t min_leaf)
      : x_(x), y_(target), sorted_(sorted), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(1, min_leaf)),
        in_node_(x.size(), 0) {}

  RegressionTree build() {
    std::vector<std::size_t> all(x_.size());
    std::iota(all.begin(), all.end(), 0);
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(const std::vector<std::size_t>& members, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    CompensatedSum sum;
    for (auto i : members) sum.add(y_[i]);
    const double mean = sum.value() / static_cast<double>(members.size());

    Split split;
    if (depth < max_depth_ && members.size() >= 2 * min_leaf_) split = best_split(members, sum.value());
    if (split.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = mean;
      return id;
    }
    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(split.feature);
    for (auto i : members) (x_[i][f] <= split.threshold ? left : right).push_back(i);
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Maximizes the drop in squared error; scanning features and thresholds in
  // ascending order with a strict comparison keeps the lowest on ties.
  Split best_split(const std::vector<std::size_t>& members, double total) {
    for (auto i : members) in_node_[i] = 1;
    const double n = static_cast<double>(members.size());
    const double parent = total * total / n;
    Split best;
    best.gain = kMinGain;
    for (std::size_t f = 0; f < sorted_.size(); ++f) {
      double left_sum = 0.0;
      std::size_t left_n = 0;
      std::size_t prev = 0;
      for (auto i : sorted_[f]) {
        if (!in_node_[i]) continue;
        if (left_n > 0 && x_[prev][f] < x_[i][f] && left_n >= min_leaf_ &&
            members.size() - left_n >= min_leaf_) {
          const double right_sum = total - left_sum;
          const double nl = static_cast<double>(left_n);
          const double gain = left_sum * left_sum / nl + right_sum * right_sum / (n - nl) - parent;
          if (gain > best.gain) {
            best.gain = gain;
            best.feature = static_cast<int>(f);
            best.threshold = 0.5 * (x_[prev][f] + x_[i][f]);
            // Guard against the midpoint rounding onto the upper value.
            if (!(best.threshold < x_[i][f])) best.threshold = x_[prev][f];
          }
        }
        left_sum += y_[i];
        ++left_n;
        prev = i;
      }
    }
    for (auto i : members) in_node_[i] = 0;
    return best;
  }

  static constexpr double kMinGain = 1e-12;

  std::span<const std::vector<double>> x_;
  std::span<const double> y_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  int max_depth_;
  std::size_t min_leaf_;
  std::vector<char> in_node_;
  RegressionTree tree_;
};

std::vector<std::vector<std::size_t>> presort(std::span<const std::vector<double>> x, std::size_t dim) {
  std::vector<std::vector<std::size_t>> sorted(dim);
  for (std::size_t f = 0; f < dim; ++f) {
    auto& order = sorted[f];
    order.resize(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
  }
  return sorted;
}

void check_features(std::span<const std::vector<double>> x, std::size_t dim) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != dim) {
      throw DataError(ErrorCode::DimensionMismatch, "feature row " + std::to_string(i) + " has length " +
                                                        std::to_string(x[i].size()) + ", expected " +
                                                        std::to_string(dim));
    }
  }
}

}  // namespace

RegressionTree fit_regression_tree(std::span<const std::vector<double>> features,
                                   std::span<const double> target, int max_depth,
                                   std::size_t min_samples_leaf) {
  if (features.empty()) throw DataError(ErrorCode::EmptyTrainingSet, "no training rows");
  const std::size_t dim = features.front().size();
  check_features(features, dim);
  const auto sorted = presort(features, dim);
  return TreeBuilder(features, target, sorted, max_depth, min_samples_leaf).build();
}

namespace {

constexpr double kMinHessian = 1e-12;
constexpr double kMaxLeaf = 10.0;
constexpr int kMaxBacktracks = 40;

}  // namespace

BoostedForest fit_forest(std::span<const std::vector<double>> features, std::span<const int> labels,
                         std::vector<std::string> classes, const BoostingConfig& config,
                         BoostingReport* report) {
  if (features.empty()) throw DataError(ErrorCode::EmptyTrainingSet, "no training rows");
  if (features.size() != labels.size()) {
    throw DataError(ErrorCode::DimensionMismatch, "features and labels differ in length");
  }
  if (classes.empty()) throw DataError(ErrorCode::InvalidArgument, "no classes");
  if (config.rounds < 0 || config.max_depth < 1 ||
      !(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw DataError(ErrorCode::InvalidArgument, "invalid boosting config");
  }
  const std::size_t k = classes.size();
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw DataError(ErrorCode::InvalidArgument, "label " + std::to_string(y) + " out of range");
    }
  }
  const std::size_t dim = features.front().size();
  check_features(features, dim);

  BoostedForest forest;
  forest.classes = std::move(classes);
  forest.feature_dim = dim;
  forest.rounds = config.rounds;
  forest.learning_rate = config.learning_rate;
  forest.max_depth = config.max_depth;
  forest.base_score = 0.0;

  const std::size_t n = features.size();
  const auto sorted = presort(features, dim);
  std::vector<std::vector<double>> scores(n, std::vector<double>(k, forest.base_score));
  std::vector<double> residual(n);

  auto current_loss = [&] {
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& z = scores[i];
      const double mx = *std::max_element(z.begin(), z.end());
      double lse = 0.0;
      for (double v : z) lse += std::exp(v - mx);
      total.add(mx + std::log(lse) - z[static_cast<std::size_t>(labels[i])]);
    }
    return total.value() / static_cast<double>(n);
  };
  if (report) report->loss_curve = {current_loss()};

  std::vector<std::vector<double>> probs(n);
  std::vector<std::vector<std::size_t>> leaf_of(k, std::vector<std::size_t>(n));
  std::vector<std::vector<double>> trial = scores;
  const double newton_scale = static_cast<double>(k - 1) / static_cast<double>(k);
  double loss = current_loss();
  for (int round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax(scores[i]);
    std::vector<RegressionTree> round_trees;
    round_trees.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        residual[i] = (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0) - probs[i][c];
      }
      auto tree = TreeBuilder(features, residual, sorted, config.max_depth, config.min_samples_leaf).build();
      // The tree shape comes from the residuals; each leaf then takes one
      // Newton step on the softmax loss, (K-1)/K * sum(r) / sum(|r|(1-|r|)).
      std::vector<CompensatedSum> num(tree.nodes.size()), den(tree.nodes.size());
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t leaf = tree.leaf_index(features[i]);
        leaf_of[c][i] = leaf;
        const double r = residual[i];
        num[leaf].add(r);
        den[leaf].add(std::fabs(r) * (1.0 - std::fabs(r)));
      }
      for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
        auto& node = tree.nodes[j];
        if (!node.is_leaf()) continue;
        const double d = std::max(den[j].value(), kMinHessian);
        node.value = k == 1 ? 0.0 : std::clamp(newton_scale * num[j].value() / d, -kMaxLeaf, kMaxLeaf);
      }
      round_trees.push_back(std::move(tree));
    }

    // Halve the round's step until the training loss does not increase, then
    // fold the accepted factor into the leaves.
    double factor = 1.0;
    double next = loss;
    for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
          const double leaf = round_trees[c].nodes[leaf_of[c][i]].value * factor;
          trial[i][c] = scores[i][c] + forest.learning_rate * leaf;
        }
      }
      std::swap(trial, scores);
      next = current_loss();
      std::swap(trial, scores);
      if (next <= loss) break;
      factor = attempt == kMaxBacktracks - 1 ? 0.0 : factor * 0.5;
    }
    if (factor != 1.0) {
      for (auto& t : round_trees) {
        for (auto& node : t.nodes) {
          if (node.is_leaf()) node.value *= factor;
        }
      }
    }
    std::swap(trial, scores);
    loss = next;
    for (auto& t : round_trees) forest.trees.push_back(std::move(t));
    if (report) report->loss_curve.push_back(loss);
  }
  return forest;
}

Json to_json(const BoostedForest& forest) {
  Json doc = make_artifact("classifier");
  doc["classes"] = forest.classes;
  doc["feature_dim"] = forest.feature_dim;
  doc["rounds"] = forest.rounds;
  doc["eta"] = forest.learning_rate;
  doc["max_depth"] = forest.max_depth;
  doc["base_score"] = forest.base_score;
  Json trees = Json::array();
  const std::size_t k = std::max<std::size_t>(1, forest.num_classes());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    Json nodes = Json::array();
    for (const auto& node : forest.trees[t].nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", node.value}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
      }
    }
    trees.push_back({{"round", t / k}, {"class_index", t % k}, {"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

BoostedForest forest_from_json(const Json& doc, std::string_view where) {
  check_artifact(doc, "classifier", where);
  BoostedForest forest;
  forest.classes = require<std::vector<std::string>>(doc, "classes", where);
  forest.feature_dim = require<std::size_t>(doc, "feature_dim", where);
  forest.rounds = require<int>(doc, "rounds", where);
  forest.learning_rate = require<double>(doc, "eta", where);
  forest.max_depth = optional_field<int>(doc, "max_depth", 0, where);
  forest.base_score = optional_field<double>(doc, "base_score", 0.0, where);
  const std::size_t k = forest.classes.size();
  if (k == 0) throw DataError(ErrorCode::SchemaError, std::string(where) + ": no classes");

  const auto& trees = require<Json>(doc, "trees", where);
  if (trees.size() != static_cast<std::size_t>(forest.rounds) * k) {
    throw DataError(ErrorCode::SchemaError, std::string(where) + ": expected rounds x classes trees");
  }
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& jt = trees[t];
    if (require<std::size_t>(jt, "round", where) != t / k ||
        require<std::size_t>(jt, "class_index", where) != t % k) {
      throw DataError(ErrorCode::SchemaError, std::string(where) + ": trees out of order");
    }
    RegressionTree tree;
    const auto& nodes = require<Json>(jt, "nodes", where);
    for (const auto& jn : nodes) {
      TreeNode node;
      if (jn.contains("leaf")) {
        node.value = require<double>(jn, "leaf", where);
        if (!std::isfinite(node.value)) {
          throw DataError(ErrorCode::SchemaError, std::string(where) + ": non-finite leaf");
        }
      } else {
        node.feature = require<int>(jn, "feature", where);
        node.threshold = require<double>(jn, "threshold", where);
        node.left = require<int>(jn, "left", where);
        node.right = require<int>(jn, "right", where);
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw DataError(ErrorCode::SchemaError, std::string(where) + ": empty tree");
    const auto size = static_cast<int>(tree.nodes.size());
    for (int i = 0; i < size; ++i) {
      const auto& node = tree.nodes[static_cast<std::size_t>(i)];
      if (node.is_leaf()) continue;
      // Children must come after their parent so traversal terminates.
      if (node.left <= i || node.right <= i || node.left >= size || node.right >= size ||
          node.feature >= static_cast<int>(forest.feature_dim)) {
        throw DataError(ErrorCode::SchemaError, std::string(where) + ": node index out of range");
      }
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace coderoute
