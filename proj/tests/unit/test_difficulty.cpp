#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "coderoute/difficulty.hpp"
#include "coderoute/rng.hpp"

using namespace coderoute;

namespace {

Corpus cot_corpus(const std::map<std::string, std::vector<std::int64_t>>& samples,
                  const std::string& reasoner = "r1") {
  std::vector<Problem> problems;
  std::vector<CotRecord> cots;
  for (const auto& [pid, lengths] : samples) {
    problems.push_back(fixtures::problem(pid));
    for (std::size_t s = 0; s < lengths.size(); ++s) {
      const bool truncated = lengths[s] == 0;
      cots.push_back({pid, reasoner, static_cast<int>(s), lengths[s], 20, truncated});
    }
  }
  return Corpus(problems, {}, cots, CandidatePool{});
}

std::vector<int> random_labels(SplitMix64& rng, std::size_t n, int max_label) {
  std::vector<int> out(n);
  for (auto& v : out) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_label)));
  return out;
}

}  // namespace

TEST_CASE("lower median of an even count") {
  CHECK(lower_median({10, 20, 30, 40, 50, 60, 70, 80, 90, 100}) == 50);
  CHECK(lower_median({100, 10, 90, 20, 80, 30, 70, 40, 60, 50}) == 50);
  CHECK(lower_median({7}) == 7);
  CHECK(lower_median({3, 1, 2}) == 2);
  CHECK_THROWS_AS(lower_median({}), DataError);
}

TEST_CASE("aggregate_cot drops truncated samples and excludes all-truncated problems") {
  const auto corpus = cot_corpus({
      {"all-cut", std::vector<std::int64_t>(10, 0)},
      {"mixed", {0, 0, 12, 14, 16, 18, 20, 22, 24, 26}},
      {"plain", {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}},
  });
  const auto agg = aggregate_cot(corpus, "r1");
  CHECK(agg.exclusions == std::vector<std::string>{"all-cut"});
  REQUIRE(agg.lengths.size() == 2);
  // Sorted valid values 12..26 (8 of them); index 3 is 18.
  CHECK(agg.lengths[0] == CotLength{"mixed", 18, 8});
  CHECK(agg.lengths[1] == CotLength{"plain", 50, 10});

  CHECK_THROWS_AS(aggregate_cot(corpus, "someone-else"), DataError);
}

TEST_CASE("aggregate_cot ignores sample order") {
  SplitMix64 rng(4);
  std::map<std::string, std::vector<std::int64_t>> base;
  for (int p = 0; p < 8; ++p) {
    std::vector<std::int64_t> v;
    for (int s = 0; s < 10; ++s) v.push_back(rng.below(4) == 0 ? 0 : rng.between(1, 16000));
    base["p" + std::to_string(p)] = v;
  }
  const auto expected = aggregate_cot(cot_corpus(base), "r1");
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = base;
    for (auto& [_, v] : shuffled) rng.shuffle(v);
    CHECK(aggregate_cot(cot_corpus(shuffled), "r1") == expected);
  }
}

TEST_CASE("cot aggregate round-trips through JSON") {
  const auto agg = aggregate_cot(cot_corpus({{"a", {0, 5, 9}}, {"b", {0}}}), "r1");
  CHECK(cot_aggregate_from_json(to_json(agg), "test") == agg);
}

TEST_CASE("k-means separates zero-variance groups") {
  const std::vector<double> xs{900, 5, 100, 5, 100, 5};
  const auto model = fit_kmeans_1d(xs, 3);
  CHECK(std::vector<double>(model.centroids().begin(), model.centroids().end()) ==
        std::vector<double>{5, 100, 900});
  CHECK(model.sse() == 0.0);
  CHECK(cluster_labels(xs, 3) == std::vector<int>{2, 0, 1, 0, 1, 0});
}

TEST_CASE("k-means on the three reported tier averages gives singletons") {
  const std::vector<double> xs{24806, 41058, 6832};
  const auto model = fit_kmeans_1d(xs, 3);
  CHECK(std::vector<double>(model.centroids().begin(), model.centroids().end()) ==
        std::vector<double>{6832, 24806, 41058});
  CHECK(tier_name(3, model.assign(6832)) == "easy");
  CHECK(tier_name(3, model.assign(24806)) == "medium");
  CHECK(tier_name(3, model.assign(41058)) == "hard");
}

TEST_CASE("k-means needs k distinct values") {
  const std::vector<double> xs{1, 1, 2, 2};
  CHECK_NOTHROW(fit_kmeans_1d(xs, 2));
  try {
    fit_kmeans_1d(xs, 3);
    FAIL("no throw");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::TooFewDistinctValues);
  }
}

TEST_CASE("k-means equals the exhaustive contiguous optimum") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<double> xs(n);
    for (auto& v : xs) v = static_cast<double>(rng.between(1, 200));
    const int k = 2 + static_cast<int>(rng.below(2));
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < k) continue;
    const auto best = oracle::best_contiguous_partition(xs, k);
    const auto model = fit_kmeans_1d(xs, k);
    CHECK(model.sse() == doctest::Approx(best.sse).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("k-means beats random contiguous partitions") {
  SplitMix64 rng(31);
  std::vector<double> xs(40);
  for (auto& v : xs) v = rng.unit() * 1000.0;
  const auto model = fit_kmeans_1d(xs, 3);
  for (int i = 0; i < 1000; ++i) {
    std::size_t a = 1 + rng.below(xs.size() - 2);
    std::size_t b = 1 + rng.below(xs.size() - 2);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK(model.sse() <= oracle::partition_sse(xs, {a, b}) + 1e-6);
  }
}

TEST_CASE("assign follows the nearest centroid with lower-tier ties") {
  const DifficultyModel model({100, 200, 400});
  CHECK(std::vector<double>(model.boundaries().begin(), model.boundaries().end()) ==
        std::vector<double>{150, 300});
  CHECK(model.assign(100) == 0);
  CHECK(model.assign(150) == 0);
  CHECK(model.assign(150.0001) == 1);
  CHECK(model.assign(300) == 1);
  CHECK(model.assign(1e9) == 2);
  CHECK(model.assign(-5) == 0);

  double prev_tier = 0;
  for (double x = 0; x < 600; x += 0.5) {
    const int t = model.assign(x);
    CHECK(t >= prev_tier);
    prev_tier = t;
  }
  CHECK_THROWS_AS(DifficultyModel({2, 1}), DataError);
  CHECK_THROWS_AS(DifficultyModel({1, 1}), DataError);
}

TEST_CASE("difficulty model round-trips exactly") {
  DifficultyModel model({0.1 + 0.2, 1234.5678901234567, 1e5 / 3.0}, 42.125);
  model.reasoning_model_id = "r1";
  model.exclusions = {"x", "y"};
  fixtures::TempDir dir;
  write_json_file(dir / "difficulty.json", to_json(model));
  CHECK(difficulty_from_json(read_artifact(dir / "difficulty.json", "difficulty"), "t") == model);
}

TEST_CASE("zscore") {
  CHECK_THROWS_AS(zscore(std::vector<double>{1, 1, 1}), DataError);
  CHECK_THROWS_AS(zscore(std::vector<double>{1}), DataError);
  CHECK(zscore(std::vector<double>{-1, 1}) == std::vector<double>{-1, 1});

  SplitMix64 rng(2);
  std::vector<double> xs(20);
  for (auto& v : xs) v = rng.unit() * 50000.0;
  const auto z = zscore(xs);
  double mean = 0;
  for (double v : xs) mean += v;
  mean /= 20;
  double var = 0;
  for (double v : xs) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 20);
  double zm = 0, zv = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(z[i] == doctest::Approx((xs[i] - mean) / sd).epsilon(1e-12));
    zm += z[i];
  }
  zm /= 20;
  for (double v : z) zv += (v - zm) * (v - zm);
  CHECK(std::abs(zm) < 1e-12);
  CHECK(std::abs(std::sqrt(zv / 20) - 1.0) < 1e-12);
}

TEST_CASE("identical labelings agree perfectly") {
  const std::vector<int> a{0, 0, 1, 2, 2, 2};
  const auto cmp = compare_clusterings(a, a);
  CHECK(cmp.ari == 1.0);
  CHECK(cmp.fmi == 1.0);
  for (std::size_t i = 0; i < cmp.confusion.size(); ++i) {
    for (std::size_t j = 0; j < cmp.confusion[i].size(); ++j) {
      if (i != j) CHECK(cmp.confusion[i][j] == 0);
    }
  }
  CHECK(cmp.confusion[2][2] == 3);
}

TEST_CASE("all-one-cluster reference gives zero ARI") {
  SplitMix64 rng(6);
  for (int t = 0; t < 20; ++t) {
    auto a = random_labels(rng, 10, 4);
    if (std::all_of(a.begin(), a.end(), [&](int v) { return v == a[0]; })) continue;
    const std::vector<int> one(a.size(), 7);
    CHECK(compare_clusterings(a, one).ari == 0.0);
  }
}

TEST_CASE("ARI and FMI match pair enumeration") {
  SplitMix64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = t < 50 ? 6 : 2 + rng.below(19);
    const auto a = random_labels(rng, n, 1 + static_cast<int>(rng.below(5)));
    const auto b = random_labels(rng, n, 1 + static_cast<int>(rng.below(5)));
    const auto got = compare_clusterings(a, b);
    const auto want = oracle::pair_counting(a, b);
    CHECK(std::abs(got.ari - want.ari) <= 1e-10);
    CHECK(std::abs(got.fmi - want.fmi) <= 1e-10);
  }
}

TEST_CASE("ARI and FMI are symmetric and permutation invariant") {
  SplitMix64 rng(13);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(15);
    const auto a = random_labels(rng, n, 4);
    const auto b = random_labels(rng, n, 3);
    const auto ab = compare_clusterings(a, b);
    const auto ba = compare_clusterings(b, a);
    CHECK(ab.ari == ba.ari);
    CHECK(ab.fmi == ba.fmi);
    std::vector<int> perm{3, 0, 2, 1};
    auto a2 = a;
    for (auto& v : a2) v = perm[static_cast<std::size_t>(v)] + 10;
    const auto pa = compare_clusterings(a2, b);
    CHECK(pa.ari == doctest::Approx(ab.ari).epsilon(1e-12));
    CHECK(pa.fmi == doctest::Approx(ab.fmi).epsilon(1e-12));
  }
}

TEST_CASE("degenerate labelings follow the pair-counting conventions") {
  const std::vector<int> singletons{0, 1, 2, 3};
  const std::vector<int> one{0, 0, 0, 0};
  CHECK(compare_clusterings(singletons, singletons).ari == 1.0);
  CHECK(compare_clusterings(singletons, singletons).fmi == 1.0);
  CHECK(compare_clusterings(singletons, one).fmi == 0.0);
  CHECK(compare_clusterings(one, one).ari == 1.0);
  CHECK(compare_clusterings(one, one).fmi == 1.0);
}

TEST_CASE("keyed labelings must cover the same items") {
  const Labeling a{{"p1", 0}, {"p2", 1}, {"p3", 1}};
  const Labeling b{{"p1", 5}, {"p2", 6}, {"p3", 6}};
  CHECK(compare_clusterings(a, b).ari == 1.0);
  const Labeling c{{"p1", 0}, {"p2", 1}, {"p4", 1}};
  try {
    compare_clusterings(a, c);
    FAIL("no throw");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::ItemSetMismatch);
  }
  CHECK_THROWS_AS(compare_clusterings(std::vector<int>{1, 2}, std::vector<int>{1}), DataError);
}

TEST_CASE("binary re-clustering reuses the same fit") {
  const std::vector<double> xs{1, 2, 3, 50, 51, 52, 99, 100};
  const auto labels = cluster_labels(xs, 2);
  CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 1, 1, 1});
  CHECK(tier_name(2, 0) == "easy");
  CHECK(tier_name(2, 1) == "hard");
  CHECK(tier_name(5, 4) == "tier4");
}
