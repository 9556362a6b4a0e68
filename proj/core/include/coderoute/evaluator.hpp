#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coderoute/corpus.hpp"
#include "coderoute/ranking.hpp"

namespace coderoute {

// Exact binomial coefficient; throws DomainError on overflow or bad arguments.
std::uint64_t binomial(int n, int k);

// Unbiased pass@k estimator 1 - C(n-c, k) / C(n, k), evaluated as
// (C(n,k) - C(n-c,k)) / C(n,k) with exact integer binomials.
double pass_at_k(int n, int c, int k);

enum class PassOneTokens {
  MeanPerResponse,  // mean over the n_s recorded samples
  FirstResponse,    // sample_index 0 only
};

struct EvalConfig {
  TokenAccounting tokens = TokenAccounting::Completion;
  PassOneTokens pass1_tokens = PassOneTokens::MeanPerResponse;
};

struct MetricsAtK {
  int k = 1;
  double score = 0.0;   // in [0, 1]
  double tokens = 0.0;  // per problem
  double price = 0.0;   // $ per problem
};

// Which model a policy picked for each problem.
using Selections = std::map<std::string, std::string>;

struct PolicyResult {
  std::string policy;
  std::size_t problems = 0;
  std::vector<MetricsAtK> metrics;  // k = 1, then k = n_s
  Selections selections;

  const MetricsAtK& at(int k) const;
};

// Replays the recorded samples of each selected model. Per problem, pass@n_s
// tokens sum every sample; pass@1 tokens follow `config.pass1_tokens`. Prices
// are tokens * price_per_mtok / 1e6. All averages run over `selections`.
// Throws MissingSamples or UnknownReference.
PolicyResult evaluate_policy(std::string name, const Selections& selections, const Corpus& corpus,
                             const EvalConfig& config = {});

Selections fixed_policy(std::string_view model_id, std::span<const std::string> problem_ids);
// Reads the optimal-model label; every id must be present in `ranked`.
Selections oracle_policy(std::span<const RankedProblem> ranked, std::span<const std::string> problem_ids);
Selections random_policy(const CandidatePool& pool, std::span<const std::string> problem_ids,
                         std::uint64_t seed);

// Pearson correlation; throws DegenerateDistribution for fewer than two points
// or zero variance in either coordinate.
double pearson(std::span<const double> x, std::span<const double> y);

// Correlates params_b with pass@1 over models that declare params_b.
double correlate_size_performance(const CandidatePool& pool,
                                  const std::map<std::string, double>& pass_at_1);

Json to_json(const PolicyResult& result);
// Columns follow the usual pass@1 / pass@n comparison layout.
std::string format_comparison_table(std::span<const PolicyResult> results);
std::string format_comparison_csv(std::span<const PolicyResult> results);

}  // namespace coderoute
