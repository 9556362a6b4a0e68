#include "coderoute/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

namespace coderoute {

std::string_view source_name(ProblemSource source) {
  switch (source) {
    case ProblemSource::HumanEval: return "HumanEval";
    case ProblemSource::LeetCodeSample: return "LeetCodeSample";
    case ProblemSource::CodeContests: return "CodeContests";
    case ProblemSource::Other: return "Other";
  }
  return "Other";
}

std::optional<ProblemSource> parse_source(std::string_view name) {
  for (auto s : {ProblemSource::HumanEval, ProblemSource::LeetCodeSample,
                 ProblemSource::CodeContests, ProblemSource::Other}) {
    if (source_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view token_accounting_name(TokenAccounting mode) {
  return mode == TokenAccounting::Total ? "total" : "completion";
}

std::optional<TokenAccounting> parse_token_accounting(std::string_view name) {
  if (name == "completion") return TokenAccounting::Completion;
  if (name == "total") return TokenAccounting::Total;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CandidatePool

CandidatePool::CandidatePool(std::vector<ModelProfile> models, int sample_count)
    : models_(std::move(models)), sample_count_(sample_count) {
  if (sample_count_ < 1) {
    throw DataError(ErrorCode::SchemaError, "sample_count must be >= 1");
  }
  std::sort(models_.begin(), models_.end(),
            [](const auto& a, const auto& b) { return a.model_id < b.model_id; });
  OffenderList dups(ErrorCode::DuplicateKey);
  OffenderList prices(ErrorCode::MissingPrice);
  for (std::size_t i = 0; i < models_.size(); ++i) {
    const auto& m = models_[i];
    if (m.model_id.empty()) throw DataError(ErrorCode::SchemaError, "empty model_id in pool");
    if (i > 0 && models_[i - 1].model_id == m.model_id) dups.add(m.model_id);
    if (!(m.price_per_mtok > 0.0) || !std::isfinite(m.price_per_mtok)) prices.add(m.model_id);
    max_price_ = std::max(max_price_, m.price_per_mtok);
  }
  dups.throw_if_any("candidate pool");
  prices.throw_if_any("candidate pool: price_per_mtok must be a finite value > 0");
}

std::optional<std::size_t> CandidatePool::index_of(std::string_view model_id) const {
  auto it = std::lower_bound(models_.begin(), models_.end(), model_id,
                             [](const ModelProfile& m, std::string_view id) { return m.model_id < id; });
  if (it == models_.end() || it->model_id != model_id) return std::nullopt;
  return static_cast<std::size_t>(it - models_.begin());
}

const ModelProfile& CandidatePool::at(std::string_view model_id) const {
  auto idx = index_of(model_id);
  if (!idx) {
    throw DataError(ErrorCode::MissingPrice, "no pricing for model", {std::string(model_id)});
  }
  return models_[*idx];
}

std::vector<std::string> CandidatePool::model_ids() const {
  std::vector<std::string> ids;
  ids.reserve(models_.size());
  for (const auto& m : models_) ids.push_back(m.model_id);
  return ids;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

auto response_key(const ResponseRecord& r) {
  return std::tie(r.problem_id, r.model_id, r.sample_index);
}
auto cot_key(const CotRecord& c) {
  return std::tie(c.problem_id, c.reasoning_model_id, c.sample_index);
}

std::string response_id(const ResponseRecord& r) {
  return r.problem_id + "/" + r.model_id + "#" + std::to_string(r.sample_index);
}
std::string cot_id(const CotRecord& c) {
  return c.problem_id + "/" + c.reasoning_model_id + "#" + std::to_string(c.sample_index);
}

}  // namespace

Corpus::Corpus(std::vector<Problem> problems, std::vector<ResponseRecord> responses,
               std::vector<CotRecord> cots, CandidatePool pool)
    : problems_(std::move(problems)),
      responses_(std::move(responses)),
      cots_(std::move(cots)),
      pool_(std::move(pool)) {
  std::sort(problems_.begin(), problems_.end(),
            [](const auto& a, const auto& b) { return a.problem_id < b.problem_id; });
  std::sort(responses_.begin(), responses_.end(),
            [](const auto& a, const auto& b) { return response_key(a) < response_key(b); });
  std::sort(cots_.begin(), cots_.end(),
            [](const auto& a, const auto& b) { return cot_key(a) < cot_key(b); });

  OffenderList schema(ErrorCode::SchemaError);
  for (const auto& p : problems_) {
    if (p.problem_id.empty() || p.prompt.empty()) schema.add(p.problem_id.empty() ? "<empty id>" : p.problem_id);
  }
  for (const auto& r : responses_) {
    if (r.sample_index < 0 || r.sample_index >= pool_.sample_count() || r.completion_tokens < 0 ||
        r.prompt_tokens < 0) {
      schema.add(response_id(r));
    }
  }
  for (const auto& c : cots_) {
    if (c.sample_index < 0 || c.reasoning_tokens < 0 || c.answer_tokens < 0) schema.add(cot_id(c));
  }
  schema.throw_if_any("corpus: field constraint violated");

  OffenderList dups(ErrorCode::DuplicateKey);
  for (std::size_t i = 1; i < problems_.size(); ++i) {
    if (problems_[i].problem_id == problems_[i - 1].problem_id) dups.add(problems_[i].problem_id);
  }
  for (std::size_t i = 1; i < responses_.size(); ++i) {
    if (response_key(responses_[i]) == response_key(responses_[i - 1])) dups.add(response_id(responses_[i]));
  }
  for (std::size_t i = 1; i < cots_.size(); ++i) {
    if (cot_key(cots_[i]) == cot_key(cots_[i - 1])) dups.add(cot_id(cots_[i]));
  }
  dups.throw_if_any("corpus: duplicate keys");

  OffenderList unknown(ErrorCode::UnknownReference);
  std::set<std::string> seen;
  auto flag = [&](const std::string& id) {
    if (seen.insert(id).second) unknown.add(id);
  };
  for (const auto& r : responses_) {
    if (!find_problem(r.problem_id)) flag(r.problem_id);
    if (!pool_.index_of(r.model_id)) flag(r.model_id);
  }
  for (const auto& c : cots_) {
    if (!find_problem(c.problem_id)) flag(c.problem_id);
  }
  unknown.throw_if_any("corpus: records reference unknown problems or models");
}

const Problem* Corpus::find_problem(std::string_view problem_id) const {
  auto it = std::lower_bound(problems_.begin(), problems_.end(), problem_id,
                             [](const Problem& p, std::string_view id) { return p.problem_id < id; });
  if (it == problems_.end() || it->problem_id != problem_id) return nullptr;
  return &*it;
}

std::span<const ResponseRecord> Corpus::responses_for(std::string_view problem_id,
                                                      std::string_view model_id) const {
  auto lo = std::lower_bound(responses_.begin(), responses_.end(), 0,
                             [&](const ResponseRecord& r, int) {
                               return std::tie(r.problem_id, r.model_id) <
                                      std::make_tuple(problem_id, model_id);
                             });
  auto hi = lo;
  while (hi != responses_.end() && hi->problem_id == problem_id && hi->model_id == model_id) ++hi;
  return {lo, hi};
}

std::span<const CotRecord> Corpus::cots_for(std::string_view problem_id,
                                            std::string_view reasoning_model_id) const {
  auto lo = std::lower_bound(cots_.begin(), cots_.end(), 0, [&](const CotRecord& c, int) {
    return std::make_tuple(std::string_view(c.problem_id), std::string_view(c.reasoning_model_id)) <
           std::make_tuple(problem_id, reasoning_model_id);
  });
  auto hi = lo;
  while (hi != cots_.end() && hi->problem_id == problem_id &&
         hi->reasoning_model_id == reasoning_model_id) {
    ++hi;
  }
  return {lo, hi};
}

std::vector<std::string> Corpus::reasoning_models() const {
  std::set<std::string> ids;
  for (const auto& c : cots_) ids.insert(c.reasoning_model_id);
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const Problem& p) {
  Json j = {{"problem_id", p.problem_id},
            {"source", std::string(source_name(p.source))},
            {"prompt", p.prompt}};
  if (p.human_difficulty) j["human_difficulty"] = *p.human_difficulty;
  return j;
}

Json to_json(const ResponseRecord& r) {
  return {{"problem_id", r.problem_id},       {"model_id", r.model_id},
          {"sample_index", r.sample_index},   {"passed", r.passed},
          {"completion_tokens", r.completion_tokens}, {"prompt_tokens", r.prompt_tokens}};
}

Json to_json(const CotRecord& c) {
  return {{"problem_id", c.problem_id},
          {"reasoning_model_id", c.reasoning_model_id},
          {"sample_index", c.sample_index},
          {"reasoning_tokens", c.reasoning_tokens},
          {"answer_tokens", c.answer_tokens},
          {"truncated", c.truncated}};
}

Json pricing_to_json(const CandidatePool& pool) {
  Json j = Json::object();
  for (const auto& m : pool.models()) {
    Json entry = {{"price_per_mtok", m.price_per_mtok}};
    if (m.params_b) entry["params_b"] = *m.params_b;
    j[m.model_id] = entry;
  }
  return j;
}

namespace {

// Record-level schema violations are reported as MalformedLine against the
// record's location.
template <typename Fn>
auto as_malformed(std::string_view where, Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(ErrorCode::MalformedLine, e.detail(), {std::string(where)});
  }
}

}  // namespace

Problem problem_from_json(const Json& j, std::string_view where) {
  return as_malformed(where, [&] {
    Problem p;
    p.problem_id = require<std::string>(j, "problem_id", where);
    p.prompt = require<std::string>(j, "prompt", where);
    const auto src = optional_field<std::string>(j, "source", "Other", where);
    auto parsed = parse_source(src);
    if (!parsed) throw DataError(ErrorCode::SchemaError, std::string(where) + ": unknown source " + src);
    p.source = *parsed;
    if (j.contains("human_difficulty") && !j.at("human_difficulty").is_null()) {
      p.human_difficulty = require<double>(j, "human_difficulty", where);
    }
    if (p.problem_id.empty() || p.prompt.empty()) {
      throw DataError(ErrorCode::SchemaError, std::string(where) + ": empty problem_id or prompt");
    }
    return p;
  });
}

ResponseRecord response_from_json(const Json& j, std::string_view where) {
  return as_malformed(where, [&] {
    ResponseRecord r;
    r.problem_id = require<std::string>(j, "problem_id", where);
    r.model_id = require<std::string>(j, "model_id", where);
    r.sample_index = require<int>(j, "sample_index", where);
    r.passed = require<bool>(j, "passed", where);
    r.completion_tokens = require<std::int64_t>(j, "completion_tokens", where);
    r.prompt_tokens = optional_field<std::int64_t>(j, "prompt_tokens", 0, where);
    if (r.completion_tokens < 0 || r.prompt_tokens < 0 || r.sample_index < 0) {
      throw DataError(ErrorCode::SchemaError, std::string(where) + ": negative count");
    }
    return r;
  });
}

CotRecord cot_from_json(const Json& j, std::string_view where) {
  return as_malformed(where, [&] {
    CotRecord c;
    c.problem_id = require<std::string>(j, "problem_id", where);
    c.reasoning_model_id = require<std::string>(j, "reasoning_model_id", where);
    c.sample_index = require<int>(j, "sample_index", where);
    c.reasoning_tokens = require<std::int64_t>(j, "reasoning_tokens", where);
    c.answer_tokens = optional_field<std::int64_t>(j, "answer_tokens", 0, where);
    c.truncated = optional_field<bool>(j, "truncated", false, where);
    if (c.reasoning_tokens < 0 || c.answer_tokens < 0 || c.sample_index < 0) {
      throw DataError(ErrorCode::SchemaError, std::string(where) + ": negative count");
    }
    // A truncated trace carries no usable length.
    if (c.truncated) c.reasoning_tokens = 0;
    return c;
  });
}

CandidatePool load_pricing(const std::filesystem::path& path, int sample_count) {
  const Json doc = read_json_file(path);
  if (!doc.is_object()) {
    throw DataError(ErrorCode::SchemaError, path.string() + ": expected an object keyed by model_id");
  }
  std::vector<ModelProfile> models;
  OffenderList missing(ErrorCode::MissingPrice);
  for (const auto& [model_id, entry] : doc.items()) {
    const std::string where = path.filename().string() + ":" + model_id;
    if (!entry.is_object() || !entry.contains("price_per_mtok") || entry["price_per_mtok"].is_null()) {
      missing.add(model_id);
      continue;
    }
    ModelProfile m;
    m.model_id = model_id;
    m.price_per_mtok = require<double>(entry, "price_per_mtok", where);
    if (entry.contains("params_b") && !entry["params_b"].is_null()) {
      m.params_b = require<double>(entry, "params_b", where);
    }
    models.push_back(std::move(m));
  }
  missing.throw_if_any(path.string());
  return CandidatePool(std::move(models), sample_count);
}

namespace {

template <typename Record, typename Parse>
std::vector<Record> load_records(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Record> out;
  OffenderList bad(ErrorCode::MalformedLine);
  const std::string name = path.filename().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    try {
      out.push_back(parse(Json::parse(line), where));
    } catch (const nlohmann::json::parse_error&) {
      bad.add(where);
    } catch (const DataError&) {
      bad.add(where);
    }
  }
  bad.throw_if_any(path.string());
  return out;
}

}  // namespace

CorpusPaths CorpusPaths::in_directory(const std::filesystem::path& dir, int sample_count) {
  CorpusPaths paths;
  paths.problems = dir / "problems.jsonl";
  paths.responses = dir / "responses.jsonl";
  if (std::filesystem::exists(dir / "cots.jsonl")) paths.cots = dir / "cots.jsonl";
  paths.pricing = dir / "pricing.json";
  paths.sample_count = sample_count;
  return paths;
}

Corpus load_corpus(const CorpusPaths& paths) {
  auto problems = load_records<Problem>(paths.problems, problem_from_json);
  auto responses = load_records<ResponseRecord>(paths.responses, response_from_json);
  std::vector<CotRecord> cots;
  if (paths.cots) cots = load_records<CotRecord>(*paths.cots, cot_from_json);
  auto pool = load_pricing(paths.pricing, paths.sample_count);
  return Corpus(std::move(problems), std::move(responses), std::move(cots), std::move(pool));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::vector<Json> rows;
  for (const auto& p : corpus.problems()) rows.push_back(to_json(p));
  write_jsonl(dir / "problems.jsonl", rows);
  rows.clear();
  for (const auto& r : corpus.responses()) rows.push_back(to_json(r));
  write_jsonl(dir / "responses.jsonl", rows);
  rows.clear();
  for (const auto& c : corpus.cots()) rows.push_back(to_json(c));
  write_jsonl(dir / "cots.jsonl", rows);
  write_json_file(dir / "pricing.json", pricing_to_json(corpus.pool()));
}

}  // namespace coderoute
