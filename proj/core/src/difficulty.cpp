#include "coderoute/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "coderoute/numeric.hpp"

namespace coderoute {

std::int64_t lower_median(std::vector<std::int64_t> values) {
  if (values.empty()) throw DataError(ErrorCode::InvalidArgument, "median of empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

CotAggregate aggregate_cot(const Corpus& corpus, std::string_view reasoning_model_id) {
  CotAggregate agg;
  agg.reasoning_model_id = std::string(reasoning_model_id);
  bool any = false;
  for (const auto& p : corpus.problems()) {
    auto samples = corpus.cots_for(p.problem_id, reasoning_model_id);
    if (samples.empty()) continue;
    any = true;
    std::vector<std::int64_t> valid;
    for (const auto& c : samples) {
      if (!c.truncated && c.reasoning_tokens > 0) valid.push_back(c.reasoning_tokens);
    }
    if (valid.empty()) {
      agg.exclusions.push_back(p.problem_id);
      continue;
    }
    const int used = static_cast<int>(valid.size());
    agg.lengths.push_back({p.problem_id, lower_median(std::move(valid)), used});
  }
  if (!any) {
    throw DataError(ErrorCode::NoCotData, "no CoT records for reasoning model",
                    {std::string(reasoning_model_id)});
  }
  return agg;
}

Json to_json(const CotAggregate& agg) {
  Json doc = make_artifact("cot_lengths");
  doc["reasoning_model_id"] = agg.reasoning_model_id;
  Json rows = Json::array();
  for (const auto& l : agg.lengths) {
    rows.push_back({{"problem_id", l.problem_id},
                    {"length", l.length},
                    {"n_samples_used", l.n_samples_used}});
  }
  doc["lengths"] = std::move(rows);
  doc["exclusions"] = agg.exclusions;
  return doc;
}

CotAggregate cot_aggregate_from_json(const Json& doc, std::string_view where) {
  check_artifact(doc, "cot_lengths", where);
  CotAggregate agg;
  agg.reasoning_model_id = require<std::string>(doc, "reasoning_model_id", where);
  for (const auto& row : require<Json>(doc, "lengths", where)) {
    CotLength l;
    l.problem_id = require<std::string>(row, "problem_id", where);
    l.length = require<std::int64_t>(row, "length", where);
    l.n_samples_used = require<int>(row, "n_samples_used", where);
    agg.lengths.push_back(std::move(l));
  }
  agg.exclusions = require<std::vector<std::string>>(doc, "exclusions", where);
  return agg;
}

std::string tier_name(int k, int tier) {
  if (k == 3) {
    static constexpr const char* kNames[] = {"easy", "medium", "hard"};
    if (tier >= 0 && tier < 3) return kNames[tier];
  }
  if (k == 2 && (tier == 0 || tier == 1)) return tier == 0 ? "easy" : "hard";
  return "tier" + std::to_string(tier);
}

// ---------------------------------------------------------------------------
// DifficultyModel

DifficultyModel::DifficultyModel(std::vector<double> centroids, double sse)
    : centroids_(std::move(centroids)), sse_(sse) {
  if (centroids_.empty()) throw DataError(ErrorCode::SchemaError, "difficulty model: no centroids");
  for (std::size_t i = 0; i < centroids_.size(); ++i) {
    if (!std::isfinite(centroids_[i]) || (i > 0 && !(centroids_[i - 1] < centroids_[i]))) {
      throw DataError(ErrorCode::SchemaError,
                      "difficulty model: centroids must be finite and strictly ascending");
    }
    if (i > 0) boundaries_.push_back(0.5 * (centroids_[i - 1] + centroids_[i]));
  }
}

int DifficultyModel::assign(double length) const noexcept {
  int tier = 0;
  for (double b : boundaries_) {
    if (length > b) ++tier;
  }
  return tier;
}

DifficultyModel fit_kmeans_1d(std::span<const double> values, int k) {
  if (k < 1) throw DataError(ErrorCode::InvalidArgument, "k must be >= 1");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const std::size_t distinct =
      x.empty() ? 0 : 1 + static_cast<std::size_t>(std::count_if(
                              x.begin() + 1, x.end(),
                              [&, prev = x.front()](double v) mutable {
                                const bool fresh = v != prev;
                                prev = v;
                                return fresh;
                              }));
  if (distinct < static_cast<std::size_t>(k)) {
    throw DataError(ErrorCode::TooFewDistinctValues,
                    std::to_string(distinct) + " distinct values for k=" + std::to_string(k));
  }

  const std::size_t n = x.size();
  const double shift = compensated_mean(x);
  std::vector<double> s(n + 1, 0.0), q(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] - shift;
    s[i + 1] = s[i] + v;
    q[i + 1] = q[i] + v * v;
  }
  auto cost = [&](std::size_t i, std::size_t j) {
    const double sum = s[j] - s[i];
    const double c = (q[j] - q[i]) - sum * sum / static_cast<double>(j - i);
    return std::max(0.0, c);
  };
  // A cluster may start at i only if it does not split a run of equal values.
  auto cut_ok = [&](std::size_t i) { return i == 0 || x[i - 1] < x[i]; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto kk = static_cast<std::size_t>(k);
  // best[m][j]: optimal cost of the first j values in m+1 clusters.
  std::vector<std::vector<double>> best(kk, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<std::size_t>> start(kk, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t j = 1; j <= n; ++j) best[0][j] = cost(0, j);
  for (std::size_t m = 1; m < kk; ++m) {
    for (std::size_t j = m + 1; j <= n; ++j) {
      if (j < n && !cut_ok(j)) continue;
      for (std::size_t i = m; i < j; ++i) {
        if (!cut_ok(i) || best[m - 1][i] == kInf) continue;
        const double c = best[m - 1][i] + cost(i, j);
        if (c < best[m][j]) {
          best[m][j] = c;
          start[m][j] = i;
        }
      }
    }
  }

  std::vector<std::size_t> bounds(kk + 1);
  bounds[kk] = n;
  for (std::size_t m = kk - 1; m > 0; --m) bounds[m] = start[m][bounds[m + 1]];
  bounds[0] = 0;

  std::vector<double> centroids;
  CompensatedSum total_sse;
  for (std::size_t m = 0; m < kk; ++m) {
    std::span<const double> cluster(x.data() + bounds[m], bounds[m + 1] - bounds[m]);
    const double mean = compensated_mean(cluster);
    centroids.push_back(mean);
    for (double v : cluster) total_sse.add((v - mean) * (v - mean));
  }
  return DifficultyModel(std::move(centroids), total_sse.value());
}

std::vector<int> cluster_labels(std::span<const double> values, int k) {
  const auto model = fit_kmeans_1d(values, k);
  std::vector<int> labels;
  labels.reserve(values.size());
  for (double v : values) labels.push_back(model.assign(v));
  return labels;
}

Json to_json(const DifficultyModel& model) {
  Json doc = make_artifact("difficulty");
  doc["k"] = model.k();
  doc["centroids"] = std::vector<double>(model.centroids().begin(), model.centroids().end());
  doc["boundaries"] = std::vector<double>(model.boundaries().begin(), model.boundaries().end());
  doc["sse"] = model.sse();
  std::vector<std::string> names;
  for (int t = 0; t < model.k(); ++t) names.push_back(tier_name(model.k(), t));
  doc["tier_names"] = names;
  doc["reasoning_model_id"] = model.reasoning_model_id;
  doc["exclusions"] = model.exclusions;
  return doc;
}

DifficultyModel difficulty_from_json(const Json& doc, std::string_view where) {
  check_artifact(doc, "difficulty", where);
  DifficultyModel model(require<std::vector<double>>(doc, "centroids", where),
                        optional_field<double>(doc, "sse", 0.0, where));
  if (require<int>(doc, "k", where) != model.k()) {
    throw DataError(ErrorCode::SchemaError, std::string(where) + ": k does not match centroids");
  }
  model.reasoning_model_id = optional_field<std::string>(doc, "reasoning_model_id", "", where);
  model.exclusions =
      optional_field<std::vector<std::string>>(doc, "exclusions", {}, where);
  return model;
}

// ---------------------------------------------------------------------------
// RQ-style analysis

std::vector<double> zscore(std::span<const double> values) {
  if (values.size() < 2) {
    throw DataError(ErrorCode::DegenerateDistribution, "zscore needs at least two values");
  }
  const double mean = compensated_mean(values);
  CompensatedSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  const double sd = std::sqrt(ss.value() / static_cast<double>(values.size()));
  if (!(sd > 0.0)) throw DataError(ErrorCode::DegenerateDistribution, "zero standard deviation");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back((v - mean) / sd);
  return out;
}

namespace {

std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

}  // namespace

ClusterComparison compare_clusterings(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw DataError(ErrorCode::ItemSetMismatch, "labelings cover " + std::to_string(a.size()) +
                                                    " and " + std::to_string(b.size()) + " items");
  }
  ClusterComparison out;
  std::set<int> ra(a.begin(), a.end()), rb(b.begin(), b.end());
  out.row_labels.assign(ra.begin(), ra.end());
  out.col_labels.assign(rb.begin(), rb.end());
  out.confusion.assign(out.row_labels.size(), std::vector<std::int64_t>(out.col_labels.size(), 0));
  auto index = [](const std::vector<int>& labels, int v) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), v) - labels.begin());
  };
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++out.confusion[index(out.row_labels, a[i])][index(out.col_labels, b[i])];
  }

  std::int64_t same_both = 0, same_a = 0, same_b = 0;
  std::vector<std::int64_t> col_sums(out.col_labels.size(), 0);
  for (const auto& row : out.confusion) {
    std::int64_t row_sum = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      same_both += pairs(row[j]);
      row_sum += row[j];
      col_sums[j] += row[j];
    }
    same_a += pairs(row_sum);
  }
  for (auto c : col_sums) same_b += pairs(c);
  const auto total = pairs(static_cast<std::int64_t>(a.size()));

  const double index_v = static_cast<double>(same_both);
  const double expected =
      total > 0 ? static_cast<double>(same_a) * static_cast<double>(same_b) / static_cast<double>(total) : 0.0;
  const double max_index = 0.5 * (static_cast<double>(same_a) + static_cast<double>(same_b));
  // The denominator vanishes only when both labelings are the same trivial
  // partition (all-in-one or all-singletons).
  out.ari = max_index == expected ? 1.0 : (index_v - expected) / (max_index - expected);

  if (same_a == 0 && same_b == 0) {
    out.fmi = 1.0;
  } else if (same_a == 0 || same_b == 0) {
    out.fmi = 0.0;
  } else {
    out.fmi = index_v / std::sqrt(static_cast<double>(same_a) * static_cast<double>(same_b));
  }
  return out;
}

ClusterComparison compare_clusterings(const Labeling& a, const Labeling& b) {
  std::vector<std::string> mismatched;
  for (const auto& [id, _] : a) {
    if (!b.count(id) && mismatched.size() < DataError::kMaxOffenders) mismatched.push_back(id);
  }
  for (const auto& [id, _] : b) {
    if (!a.count(id) && mismatched.size() < DataError::kMaxOffenders) mismatched.push_back(id);
  }
  if (!mismatched.empty()) {
    throw DataError(ErrorCode::ItemSetMismatch, "labelings cover different items", mismatched);
  }
  std::vector<int> la, lb;
  for (const auto& [id, label] : a) {
    la.push_back(label);
    lb.push_back(b.at(id));
  }
  return compare_clusterings(la, lb);
}

}  // namespace coderoute
