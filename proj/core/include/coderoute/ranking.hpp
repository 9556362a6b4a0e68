#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coderoute/corpus.hpp"

namespace coderoute {

// Accuracy reward minus log cost penalty:
//   ln(max_tokens_over_pool * max_price_over_pool) * pass_rate - ln(mean_tokens * price)
// Prices are $/Mtok. Throws NonPositiveArgument when a log argument is <= 0.
double score(double pass_rate, double mean_tokens, double price, double max_tokens_over_pool,
             double max_price_over_pool);

struct RankingConfig {
  TokenAccounting tokens = TokenAccounting::Completion;
  // Multiplies every $/Mtok price before it enters the score. 1.0 keeps the
  // $/Mtok units; 1e-6 would switch to $/token.
  double price_scale = 1.0;
};

struct ModelOutcome {
  std::string model_id;
  double pass_rate = 0.0;
  double mean_tokens = 1.0;  // clamped to >= 1
  double score = 0.0;

  friend bool operator==(const ModelOutcome&, const ModelOutcome&) = default;
};

struct RankedProblem {
  std::string problem_id;
  std::vector<ModelOutcome> outcomes;  // pool order
  std::string optimal_model_id;
  std::vector<std::string> ranking;  // best first

  friend bool operator==(const RankedProblem&, const RankedProblem&) = default;
};

// Throws MissingSamples if any pool model lacks exactly n_s records.
RankedProblem rank_problem(std::string_view problem_id, const Corpus& corpus,
                           const RankingConfig& config = {});

struct SkipEntry {
  std::string problem_id;
  std::string reason;
};

struct RankingDataset {
  std::vector<RankedProblem> ranked;  // sorted by problem_id
  std::vector<SkipEntry> skipped;
};

RankingDataset build_ranking_dataset(const Corpus& corpus, const RankingConfig& config = {});

Json to_json(const RankedProblem& r);
RankedProblem ranked_from_json(const Json& j, std::string_view where);

void save_ranked(const std::filesystem::path& path, const std::vector<RankedProblem>& ranked);
std::vector<RankedProblem> load_ranked(const std::filesystem::path& path);

}  // namespace coderoute
