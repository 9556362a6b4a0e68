#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coderoute/corpus.hpp"

namespace coderoute {

// Reasoning-model generation cap; traces that hit it are recorded with length 0.
inline constexpr std::int64_t kCotTokenCap = 16384;

struct CotLength {
  std::string problem_id;
  std::int64_t length = 0;  // lower median of non-truncated samples, >= 1
  int n_samples_used = 0;

  friend bool operator==(const CotLength&, const CotLength&) = default;
};

struct CotAggregate {
  std::string reasoning_model_id;
  std::vector<CotLength> lengths;       // sorted by problem_id
  std::vector<std::string> exclusions;  // every sample truncated

  friend bool operator==(const CotAggregate&, const CotAggregate&) = default;
};

// Element at index (n-1)/2 of the sorted values. Requires a non-empty input.
std::int64_t lower_median(std::vector<std::int64_t> values);

// Samples that are truncated or have zero length are dropped. Throws NoCotData
// when the reasoning model has no records at all.
CotAggregate aggregate_cot(const Corpus& corpus, std::string_view reasoning_model_id);

Json to_json(const CotAggregate& agg);
CotAggregate cot_aggregate_from_json(const Json& doc, std::string_view where);

// Tier 0 is the easiest. For k = 3 the names are easy < medium < hard.
std::string tier_name(int k, int tier);

class DifficultyModel {
 public:
  DifficultyModel() = default;
  // Throws SchemaError unless centroids are finite and strictly ascending.
  explicit DifficultyModel(std::vector<double> centroids, double sse = 0.0);

  int k() const noexcept { return static_cast<int>(centroids_.size()); }
  std::span<const double> centroids() const noexcept { return centroids_; }
  std::span<const double> boundaries() const noexcept { return boundaries_; }
  double sse() const noexcept { return sse_; }

  // Nearest centroid; a length exactly on a boundary goes to the lower tier.
  int assign(double length) const noexcept;

  std::string reasoning_model_id;
  std::vector<std::string> exclusions;

  friend bool operator==(const DifficultyModel&, const DifficultyModel&) = default;

 private:
  std::vector<double> centroids_;
  std::vector<double> boundaries_;
  double sse_ = 0.0;
};

// Globally optimal 1-D k-means (minimum within-cluster sum of squares) by
// dynamic programming over the sorted values. Equal values always share a
// cluster. Throws TooFewDistinctValues when fewer than k distinct values exist.
DifficultyModel fit_kmeans_1d(std::span<const double> values, int k);

// Fits on `values` and returns each value's tier, in input order.
std::vector<int> cluster_labels(std::span<const double> values, int k);

Json to_json(const DifficultyModel& model);
DifficultyModel difficulty_from_json(const Json& doc, std::string_view where);

// (v - mean) / population stddev. Throws DegenerateDistribution for fewer
// than two values or zero spread.
std::vector<double> zscore(std::span<const double> values);

struct ClusterComparison {
  std::vector<int> row_labels;  // distinct labels of the first labeling
  std::vector<int> col_labels;  // distinct labels of the second labeling
  std::vector<std::vector<std::int64_t>> confusion;
  double ari = 0.0;
  double fmi = 0.0;
};

// Pair-counting agreement between two labelings of the same items. When both
// labelings put every item in its own cluster FMI is defined as 1.
ClusterComparison compare_clusterings(std::span<const int> a, std::span<const int> b);

using Labeling = std::map<std::string, int>;
// Throws ItemSetMismatch unless both labelings cover the same item ids.
ClusterComparison compare_clusterings(const Labeling& a, const Labeling& b);

}  // namespace coderoute
