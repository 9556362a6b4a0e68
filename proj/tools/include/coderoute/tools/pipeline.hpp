#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coderoute/classifier.hpp"
#include "coderoute/corpus.hpp"
#include "coderoute/difficulty.hpp"
#include "coderoute/embedding.hpp"
#include "coderoute/evaluator.hpp"
#include "coderoute/ranking.hpp"
#include "coderoute/synth.hpp"

// Offline pipeline stages. Every stage reads and writes conventional file
// names inside one working directory, so stages can run as separate
// processes and re-runs with the same flags rewrite identical bytes.
namespace coderoute::tools {

namespace files {
inline constexpr const char* kProblems = "problems.jsonl";
inline constexpr const char* kResponses = "responses.jsonl";
inline constexpr const char* kCots = "cots.jsonl";
inline constexpr const char* kPricing = "pricing.json";
inline constexpr const char* kManifest = "corpus.json";
inline constexpr const char* kSynthSpec = "synth_spec.json";
inline constexpr const char* kRanked = "ranked.jsonl";
inline constexpr const char* kRankSkips = "rank_skips.json";
inline constexpr const char* kCotLengths = "cot_lengths.json";
inline constexpr const char* kDifficulty = "difficulty.json";
inline constexpr const char* kEmbeddings = "embeddings.jsonl";
inline constexpr const char* kProjection = "projection.json";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kClassifier = "classifier.json";
inline constexpr const char* kTierClassifier = "tier_classifier.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kComparison = "comparison.txt";
}  // namespace files

struct Split {
  double ratio = 0.7;
  std::uint64_t seed = 0;
  std::vector<std::string> train;  // sorted
  std::vector<std::string> test;   // sorted

  friend bool operator==(const Split&, const Split&) = default;
};

Json to_json(const Split& split);
Split split_from_json(const Json& doc, std::string_view where);
// Splits the ranked problem ids of the working directory.
Split make_split(const std::vector<RankedProblem>& ranked, double ratio, std::uint64_t seed);

// Corpus stored in the working directory. n_s is read from corpus.json,
// written by ingest and synth.
Corpus load_workdir_corpus(const std::filesystem::path& dir);

struct IngestOptions {
  std::filesystem::path problems;
  std::filesystem::path responses;
  std::optional<std::filesystem::path> cots;
  std::filesystem::path pricing;
  int sample_count = 5;
};
// Validates the inputs and stores them in canonical order.
Corpus run_ingest(const std::filesystem::path& dir, const IngestOptions& options);

Corpus run_synth(const std::filesystem::path& dir, const SynthSpec& spec, std::uint64_t seed);

RankingDataset run_rank(const std::filesystem::path& dir, const RankingConfig& config = {});

// With no reasoning model given, the corpus must name exactly one.
CotAggregate run_cot_aggregate(const std::filesystem::path& dir,
                               std::optional<std::string> reasoning_model_id = std::nullopt);

DifficultyModel run_cluster(const std::filesystem::path& dir, int k = 3);

struct EmbeddingStageOptions {
  EmbedderProvider provider = EmbedderProvider::Hashed;
  std::optional<std::filesystem::path> embeddings;  // copied into the workdir
  std::size_t dim = 768;
  std::size_t max_tokens = 512;
  std::size_t proj_dim = 128;
  double margin = 1.0;
  ProjectionTrainConfig train;
  std::size_t triplets = 0;  // 0: eight per anchor
  double split = 0.7;
  std::uint64_t split_seed = 0;
  bool untrained = false;  // keep the identity-slice initialization
};

ProjectionHead run_train_embedding(const std::filesystem::path& dir,
                                   const EmbeddingStageOptions& options);

struct ClassifierStageOptions {
  BoostingConfig boosting;
  double split = 0.7;
  std::uint64_t split_seed = 0;
  bool tier_model = false;  // also fit embeddings -> difficulty tier
};

BoostedForest run_train_classifier(const std::filesystem::path& dir,
                                   const ClassifierStageOptions& options);

struct EvaluateOptions {
  // learned, oracle, random, fixed:<model>. Empty: learned, oracle, random
  // and one fixed policy per pool model.
  std::vector<std::string> policies;
  EvalConfig eval;
  std::uint64_t random_seed = 0;
  std::optional<std::filesystem::path> csv;
};

struct EvaluationReport {
  std::vector<PolicyResult> results;
  std::optional<double> size_performance;  // Pearson r of params_b vs pass@1
  std::string table;
};

EvaluationReport run_evaluate(const std::filesystem::path& dir, const EvaluateOptions& options);

}  // namespace coderoute::tools
