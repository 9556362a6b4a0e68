#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coderoute/artifact.hpp"

namespace coderoute {

enum class ProblemSource { HumanEval, LeetCodeSample, CodeContests, Other };

std::string_view source_name(ProblemSource source);
std::optional<ProblemSource> parse_source(std::string_view name);

struct Problem {
  std::string problem_id;
  ProblemSource source = ProblemSource::Other;
  std::string prompt;
  // Unitless human signal such as 1 - acRate or cf_rating.
  std::optional<double> human_difficulty;

  friend bool operator==(const Problem&, const Problem&) = default;
};

struct ModelProfile {
  std::string model_id;
  double price_per_mtok = 0.0;  // $ per 1e6 tokens
  std::optional<double> params_b;

  friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

// The candidate models, ordered by model_id. The order defines class indices
// for the classifier and never changes for a given pricing file.
class CandidatePool {
 public:
  CandidatePool() = default;
  CandidatePool(std::vector<ModelProfile> models, int sample_count = 5);

  std::span<const ModelProfile> models() const noexcept { return models_; }
  std::size_t size() const noexcept { return models_.size(); }
  int sample_count() const noexcept { return sample_count_; }

  std::optional<std::size_t> index_of(std::string_view model_id) const;
  const ModelProfile& at(std::string_view model_id) const;  // MissingPrice if absent
  double max_price() const noexcept { return max_price_; }
  std::vector<std::string> model_ids() const;

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;

 private:
  std::vector<ModelProfile> models_;
  int sample_count_ = 5;
  double max_price_ = 0.0;
};

struct ResponseRecord {
  std::string problem_id;
  std::string model_id;
  int sample_index = 0;
  bool passed = false;
  std::int64_t completion_tokens = 0;
  std::int64_t prompt_tokens = 0;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct CotRecord {
  std::string problem_id;
  std::string reasoning_model_id;
  int sample_index = 0;
  std::int64_t reasoning_tokens = 0;  // 0 when truncated
  std::int64_t answer_tokens = 0;
  bool truncated = false;

  friend bool operator==(const CotRecord&, const CotRecord&) = default;
};

enum class TokenAccounting { Completion, Total };

std::string_view token_accounting_name(TokenAccounting mode);
std::optional<TokenAccounting> parse_token_accounting(std::string_view name);

inline std::int64_t billed_tokens(const ResponseRecord& r, TokenAccounting mode) noexcept {
  return mode == TokenAccounting::Total ? r.completion_tokens + r.prompt_tokens
                                        : r.completion_tokens;
}

// Immutable, cross-validated view of every record the pipeline consumes.
// Records are held in canonical sorted order, so construction is independent
// of input order.
class Corpus {
 public:
  Corpus() = default;
  // Throws DuplicateKey, UnknownReference or SchemaError.
  Corpus(std::vector<Problem> problems, std::vector<ResponseRecord> responses,
         std::vector<CotRecord> cots, CandidatePool pool);

  std::span<const Problem> problems() const noexcept { return problems_; }
  std::span<const ResponseRecord> responses() const noexcept { return responses_; }
  std::span<const CotRecord> cots() const noexcept { return cots_; }
  const CandidatePool& pool() const noexcept { return pool_; }

  const Problem* find_problem(std::string_view problem_id) const;
  std::span<const ResponseRecord> responses_for(std::string_view problem_id,
                                                std::string_view model_id) const;
  std::span<const CotRecord> cots_for(std::string_view problem_id,
                                      std::string_view reasoning_model_id) const;
  std::vector<std::string> reasoning_models() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<Problem> problems_;
  std::vector<ResponseRecord> responses_;
  std::vector<CotRecord> cots_;
  CandidatePool pool_;
};

struct CorpusPaths {
  std::filesystem::path problems;
  std::filesystem::path responses;
  std::optional<std::filesystem::path> cots;
  std::filesystem::path pricing;
  int sample_count = 5;

  // problems.jsonl, responses.jsonl, cots.jsonl (if present), pricing.json
  static CorpusPaths in_directory(const std::filesystem::path& dir, int sample_count = 5);
};

Corpus load_corpus(const CorpusPaths& paths);
CandidatePool load_pricing(const std::filesystem::path& path, int sample_count = 5);

Json to_json(const Problem& p);
Json to_json(const ResponseRecord& r);
Json to_json(const CotRecord& c);
Json pricing_to_json(const CandidatePool& pool);

// `where` names the record for error reports (typically "file:line").
Problem problem_from_json(const Json& j, std::string_view where);
ResponseRecord response_from_json(const Json& j, std::string_view where);
CotRecord cot_from_json(const Json& j, std::string_view where);

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace coderoute
