#include "coderoute/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "coderoute/rng.hpp"

namespace coderoute {

SynthSpec default_synth_spec() {
  SynthSpec spec;
  spec.shared_vocabulary = {"write", "a", "function", "that", "returns", "the", "given",
                            "input", "list", "of", "integers", "and", "string", "output"};
  spec.tiers = {
      {"easy", ProblemSource::HumanEval, 20, "lex", 40, {12, 20}, {800, 2400}, 0.0, {0.05, 0.4}},
      {"medium", ProblemSource::LeetCodeSample, 20, "dyn", 40, {14, 24}, {6000, 9000}, 0.02, {0.3, 0.7}},
      {"hard", ProblemSource::CodeContests, 20, "flw", 40, {16, 28}, {12000, 15500}, 0.1, {0.6, 0.95}},
  };
  spec.models = {
      {"tiny-coder-1.5b", 0.14, 1.5, {1.0, 0.2, 0.0}, {{{180, 260}}, {{220, 320}}, {{260, 380}}}, {40, 120}},
      {"small-coder-7b", 0.42, 7.0, {1.0, 0.4, 0.2}, {{{200, 300}}, {{250, 350}}, {{300, 420}}}, {40, 120}},
      {"mid-coder-22b", 0.95, 22.0, {1.0, 1.0, 0.4}, {{{250, 350}}, {{300, 420}}, {{350, 480}}}, {40, 120}},
      {"large-coder-32b", 1.26, 32.0, {1.0, 1.0, 1.0}, {{{300, 450}}, {{400, 600}}, {{500, 800}}}, {40, 120}},
  };
  return spec;
}

Json to_json(const SynthSpec& spec) {
  Json tiers = Json::array();
  for (const auto& t : spec.tiers) {
    tiers.push_back({{"name", t.name},
                     {"source", std::string(source_name(t.source))},
                     {"count", t.count},
                     {"vocab_prefix", t.vocab_prefix},
                     {"vocab_size", t.vocab_size},
                     {"prompt_words", t.prompt_words},
                     {"cot_range", t.cot_range},
                     {"truncation_prob", t.truncation_prob},
                     {"human_difficulty", t.human_difficulty}});
  }
  Json models = Json::array();
  for (const auto& m : spec.models) {
    models.push_back({{"model_id", m.model_id},
                      {"price_per_mtok", m.price_per_mtok},
                      {"params_b", m.params_b},
                      {"pass_prob", m.pass_prob},
                      {"tokens", m.tokens},
                      {"prompt_tokens", m.prompt_tokens}});
  }
  return {{"sample_count", spec.sample_count},
          {"cot_samples", spec.cot_samples},
          {"reasoning_model_id", spec.reasoning_model_id},
          {"shared_vocabulary", spec.shared_vocabulary},
          {"shared_word_prob", spec.shared_word_prob},
          {"tiers", std::move(tiers)},
          {"models", std::move(models)}};
}

SynthSpec synth_spec_from_json(const Json& doc, std::string_view where) {
  try {
    SynthSpec spec;
    spec.sample_count = optional_field<int>(doc, "sample_count", 5, where);
    spec.cot_samples = optional_field<int>(doc, "cot_samples", 10, where);
    spec.reasoning_model_id =
        optional_field<std::string>(doc, "reasoning_model_id", spec.reasoning_model_id, where);
    spec.shared_vocabulary =
        optional_field<std::vector<std::string>>(doc, "shared_vocabulary", {}, where);
    spec.shared_word_prob = optional_field<double>(doc, "shared_word_prob", 0.3, where);
    for (const auto& jt : require<Json>(doc, "tiers", where)) {
      SynthTier t;
      t.name = require<std::string>(jt, "name", where);
      const auto src = optional_field<std::string>(jt, "source", "Other", where);
      auto parsed = parse_source(src);
      if (!parsed) throw DataError(ErrorCode::SpecError, std::string(where) + ": unknown source " + src);
      t.source = *parsed;
      t.count = require<int>(jt, "count", where);
      t.vocab_prefix = require<std::string>(jt, "vocab_prefix", where);
      t.vocab_size = require<int>(jt, "vocab_size", where);
      t.prompt_words = optional_field<std::array<int, 2>>(jt, "prompt_words", t.prompt_words, where);
      t.cot_range = require<std::array<std::int64_t, 2>>(jt, "cot_range", where);
      t.truncation_prob = optional_field<double>(jt, "truncation_prob", 0.0, where);
      t.human_difficulty =
          optional_field<std::array<double, 2>>(jt, "human_difficulty", t.human_difficulty, where);
      spec.tiers.push_back(std::move(t));
    }
    for (const auto& jm : require<Json>(doc, "models", where)) {
      SynthModel m;
      m.model_id = require<std::string>(jm, "model_id", where);
      m.price_per_mtok = require<double>(jm, "price_per_mtok", where);
      m.params_b = optional_field<double>(jm, "params_b", 1.0, where);
      m.pass_prob = require<std::vector<double>>(jm, "pass_prob", where);
      m.tokens = require<std::vector<std::array<std::int64_t, 2>>>(jm, "tokens", where);
      m.prompt_tokens =
          optional_field<std::array<std::int64_t, 2>>(jm, "prompt_tokens", m.prompt_tokens, where);
      spec.models.push_back(std::move(m));
    }
    return spec;
  } catch (const DataError& e) {
    if (e.code() == ErrorCode::SpecError) throw;
    throw DataError(ErrorCode::SpecError, e.detail());
  }
}

namespace {

int passing_count(double prob, int n_s) {
  return static_cast<int>(std::lround(prob * n_s));
}

[[noreturn]] void spec_error(const std::string& what) { throw DataError(ErrorCode::SpecError, what); }

}  // namespace

std::vector<std::string> validate_synth_spec(const SynthSpec& spec) {
  if (spec.sample_count < 1) spec_error("sample_count must be >= 1");
  if (spec.cot_samples < 1) spec_error("cot_samples must be >= 1");
  if (spec.tiers.empty()) spec_error("at least one tier is required");
  if (spec.models.empty()) spec_error("at least one model is required");
  if (spec.reasoning_model_id.empty()) spec_error("reasoning_model_id is empty");
  const std::size_t n_tiers = spec.tiers.size();

  std::vector<std::string> prefixes;
  for (const auto& t : spec.tiers) {
    if (t.name.empty() || t.count < 1 || t.vocab_size < 1 || t.vocab_prefix.empty()) {
      spec_error("tier '" + t.name + "': needs a name, count >= 1 and a vocabulary");
    }
    for (char c : t.vocab_prefix) {
      if (!std::isalpha(static_cast<unsigned char>(c))) spec_error("vocab_prefix must be letters");
    }
    if (t.prompt_words[0] < 1 || t.prompt_words[0] > t.prompt_words[1]) spec_error("bad prompt_words");
    if (t.cot_range[0] < 1 || t.cot_range[0] > t.cot_range[1]) spec_error("bad cot_range");
    if (!(t.truncation_prob >= 0.0 && t.truncation_prob < 1.0)) spec_error("bad truncation_prob");
    if (t.human_difficulty[0] > t.human_difficulty[1]) spec_error("bad human_difficulty");
    prefixes.push_back(t.vocab_prefix);
  }
  // Vocabulary words are prefix + digits; distinct letter prefixes keep the
  // tier vocabularies disjoint.
  std::sort(prefixes.begin(), prefixes.end());
  if (std::adjacent_find(prefixes.begin(), prefixes.end()) != prefixes.end()) {
    spec_error("tier vocab_prefix values must be distinct");
  }
  for (const auto& w : spec.shared_vocabulary) {
    for (const auto& p : prefixes) {
      if (w.rfind(p, 0) == 0) spec_error("shared word '" + w + "' overlaps a tier vocabulary");
    }
  }

  std::vector<std::string> ids;
  for (const auto& m : spec.models) {
    if (m.model_id.empty() || !(m.price_per_mtok > 0.0)) spec_error("model needs an id and price > 0");
    if (m.pass_prob.size() != n_tiers || m.tokens.size() != n_tiers) {
      spec_error("model '" + m.model_id + "': pass_prob and tokens need one entry per tier");
    }
    for (std::size_t t = 0; t < n_tiers; ++t) {
      if (!(m.pass_prob[t] >= 0.0 && m.pass_prob[t] <= 1.0)) spec_error("pass_prob outside [0, 1]");
      if (m.tokens[t][0] < 1 || m.tokens[t][0] > m.tokens[t][1]) spec_error("bad token range");
    }
    if (m.prompt_tokens[0] < 0 || m.prompt_tokens[0] > m.prompt_tokens[1]) spec_error("bad prompt_tokens");
    ids.push_back(m.model_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) spec_error("duplicate model_id");

  double max_price = 0.0;
  for (const auto& m : spec.models) max_price = std::max(max_price, m.price_per_mtok);

  // Bound score(a) - score(b) from below over every admissible draw of mean
  // tokens: each mean lies in its model's range, and so does the pool max.
  std::vector<std::string> optimal;
  for (std::size_t t = 0; t < n_tiers; ++t) {
    double max_lo = 0.0, max_hi = 0.0;
    for (const auto& m : spec.models) {
      max_lo = std::max(max_lo, static_cast<double>(m.tokens[t][0]));
      max_hi = std::max(max_hi, static_cast<double>(m.tokens[t][1]));
    }
    const double reward_lo = std::log(max_lo * max_price);
    const double reward_hi = std::log(max_hi * max_price);
    std::string winner;
    for (const auto& a : spec.models) {
      const double pa = static_cast<double>(passing_count(a.pass_prob[t], spec.sample_count)) / spec.sample_count;
      bool dominates = true;
      for (const auto& b : spec.models) {
        if (&a == &b) continue;
        const double pb = static_cast<double>(passing_count(b.pass_prob[t], spec.sample_count)) / spec.sample_count;
        const double reward = (pa >= pb ? reward_lo : reward_hi) * (pa - pb);
        const double worst = reward - std::log(static_cast<double>(a.tokens[t][1]) * a.price_per_mtok) +
                             std::log(static_cast<double>(b.tokens[t][0]) * b.price_per_mtok);
        if (!(worst > 0.0)) {
          dominates = false;
          break;
        }
      }
      if (dominates) {
        winner = a.model_id;
        break;
      }
    }
    if (winner.empty() && spec.models.size() == 1) winner = spec.models.front().model_id;
    if (winner.empty()) {
      spec_error("tier '" + spec.tiers[t].name + "': no model is optimal for every admissible draw");
    }
    optimal.push_back(winner);
  }
  return optimal;
}

Corpus generate_synthetic_corpus(const SynthSpec& spec, std::uint64_t seed) {
  validate_synth_spec(spec);
  SplitMix64 rng(seed);
  const int n_s = spec.sample_count;

  std::vector<Problem> problems;
  std::vector<ResponseRecord> responses;
  std::vector<CotRecord> cots;
  for (std::size_t t = 0; t < spec.tiers.size(); ++t) {
    const auto& tier = spec.tiers[t];
    for (int i = 0; i < tier.count; ++i) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%04d", i);
      Problem p;
      p.problem_id = tier.name + "/" + idx;
      p.source = tier.source;

      const auto words = rng.between(tier.prompt_words[0], tier.prompt_words[1]);
      std::string prompt;
      for (std::int64_t w = 0; w < words; ++w) {
        if (!prompt.empty()) prompt += ' ';
        if (!spec.shared_vocabulary.empty() && rng.unit() < spec.shared_word_prob) {
          prompt += spec.shared_vocabulary[rng.below(spec.shared_vocabulary.size())];
        } else {
          prompt += tier.vocab_prefix + std::to_string(rng.below(static_cast<std::uint64_t>(tier.vocab_size)));
        }
      }
      p.prompt = prompt + ".";
      p.human_difficulty =
          tier.human_difficulty[0] + (tier.human_difficulty[1] - tier.human_difficulty[0]) * rng.unit();

      for (const auto& m : spec.models) {
        const int passing = passing_count(m.pass_prob[t], n_s);
        std::vector<bool> passed(static_cast<std::size_t>(n_s), false);
        std::fill_n(passed.begin(), passing, true);
        rng.shuffle(passed);
        for (int s = 0; s < n_s; ++s) {
          ResponseRecord r;
          r.problem_id = p.problem_id;
          r.model_id = m.model_id;
          r.sample_index = s;
          r.passed = passed[static_cast<std::size_t>(s)];
          r.completion_tokens = rng.between(m.tokens[t][0], m.tokens[t][1]);
          r.prompt_tokens = rng.between(m.prompt_tokens[0], m.prompt_tokens[1]);
          responses.push_back(std::move(r));
        }
      }

      for (int s = 0; s < spec.cot_samples; ++s) {
        CotRecord c;
        c.problem_id = p.problem_id;
        c.reasoning_model_id = spec.reasoning_model_id;
        c.sample_index = s;
        const auto length = rng.between(tier.cot_range[0], tier.cot_range[1]);
        c.truncated = rng.unit() < tier.truncation_prob;
        c.reasoning_tokens = c.truncated ? 0 : length;
        c.answer_tokens = rng.between(200, 600);
        cots.push_back(std::move(c));
      }
      problems.push_back(std::move(p));
    }
  }

  std::vector<ModelProfile> models;
  for (const auto& m : spec.models) models.push_back({m.model_id, m.price_per_mtok, m.params_b});
  return Corpus(std::move(problems), std::move(responses), std::move(cots),
                CandidatePool(std::move(models), n_s));
}

}  // namespace coderoute
