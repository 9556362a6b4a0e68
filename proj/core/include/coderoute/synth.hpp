#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "coderoute/corpus.hpp"

namespace coderoute {

// Desk-scale stand-in for recorded benchmark runs. Each tier draws prompt
// words from its own vocabulary, so tiers are separable from text alone, and
// CoT lengths from a tier-specific range.
struct SynthTier {
  std::string name;
  ProblemSource source = ProblemSource::Other;
  int count = 20;
  std::string vocab_prefix;
  int vocab_size = 40;
  std::array<int, 2> prompt_words{12, 20};
  std::array<std::int64_t, 2> cot_range{1000, 2000};
  double truncation_prob = 0.0;
  std::array<double, 2> human_difficulty{0.0, 1.0};
};

struct SynthModel {
  std::string model_id;
  double price_per_mtok = 1.0;
  double params_b = 1.0;
  std::vector<double> pass_prob;                         // per tier
  std::vector<std::array<std::int64_t, 2>> tokens;       // per tier, completion tokens
  std::array<std::int64_t, 2> prompt_tokens{40, 120};
};

struct SynthSpec {
  int sample_count = 5;
  int cot_samples = 10;
  std::string reasoning_model_id = "synthetic-reasoner";
  std::vector<std::string> shared_vocabulary;
  double shared_word_prob = 0.3;
  std::vector<SynthTier> tiers;
  std::vector<SynthModel> models;
};

// Three tiers (20 problems each) and four priced models whose optimal choice
// is the cheapest model in the easy tier and progressively larger ones above.
SynthSpec default_synth_spec();

Json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const Json& doc, std::string_view where);

// Throws SpecError unless the spec is well formed and, for every tier, one
// model wins the ranking score under every token draw the spec allows.
// Returns that model per tier.
std::vector<std::string> validate_synth_spec(const SynthSpec& spec);

// Each (problem, model) passes exactly round(pass_prob * n_s) of its samples,
// so the per-tier optimum above holds for the generated data.
Corpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed);

}  // namespace coderoute
