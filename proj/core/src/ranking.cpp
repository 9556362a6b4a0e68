#include "coderoute/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coderoute/numeric.hpp"

namespace coderoute {

double score(double pass_rate, double mean_tokens, double price, double max_tokens_over_pool,
             double max_price_over_pool) {
  const double reward_arg = max_tokens_over_pool * max_price_over_pool;
  const double cost_arg = mean_tokens * price;
  if (!(reward_arg > 0.0) || !(cost_arg > 0.0)) {
    throw DataError(ErrorCode::NonPositiveArgument,
                    "score: log argument must be > 0 (reward " + std::to_string(reward_arg) +
                        ", cost " + std::to_string(cost_arg) + ")");
  }
  return std::log(reward_arg) * pass_rate - std::log(cost_arg);
}

RankedProblem rank_problem(std::string_view problem_id, const Corpus& corpus,
                           const RankingConfig& config) {
  const auto& pool = corpus.pool();
  const int n_s = pool.sample_count();
  if (pool.size() == 0) {
    throw DataError(ErrorCode::SchemaError, "rank_problem: empty candidate pool");
  }

  RankedProblem out;
  out.problem_id = std::string(problem_id);
  std::vector<double> costs;
  for (const auto& model : pool.models()) {
    auto samples = corpus.responses_for(problem_id, model.model_id);
    if (static_cast<int>(samples.size()) != n_s) {
      throw DataError(ErrorCode::MissingSamples,
                      std::string(problem_id) + ": model " + model.model_id + " has " +
                          std::to_string(samples.size()) + " samples, expected " +
                          std::to_string(n_s),
                      {model.model_id});
    }
    int passing = 0;
    CompensatedSum tokens;
    for (const auto& r : samples) {
      passing += r.passed ? 1 : 0;
      tokens.add(static_cast<double>(billed_tokens(r, config.tokens)));
    }
    ModelOutcome o;
    o.model_id = model.model_id;
    o.pass_rate = static_cast<double>(passing) / n_s;
    o.mean_tokens = std::max(1.0, tokens.value() / n_s);
    out.outcomes.push_back(std::move(o));
  }

  double max_tokens = 0.0;
  for (const auto& o : out.outcomes) max_tokens = std::max(max_tokens, o.mean_tokens);
  const double max_price = pool.max_price() * config.price_scale;
  for (std::size_t i = 0; i < out.outcomes.size(); ++i) {
    auto& o = out.outcomes[i];
    const double price = pool.models()[i].price_per_mtok * config.price_scale;
    o.score = score(o.pass_rate, o.mean_tokens, price, max_tokens, max_price);
    costs.push_back(o.mean_tokens * price);
  }

  std::vector<std::size_t> order(out.outcomes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = out.outcomes[a];
    const auto& ob = out.outcomes[b];
    if (oa.score != ob.score) return oa.score > ob.score;
    if (oa.pass_rate != ob.pass_rate) return oa.pass_rate > ob.pass_rate;
    if (costs[a] != costs[b]) return costs[a] < costs[b];
    return oa.model_id < ob.model_id;
  });
  for (auto i : order) out.ranking.push_back(out.outcomes[i].model_id);
  out.optimal_model_id = out.ranking.front();
  return out;
}

RankingDataset build_ranking_dataset(const Corpus& corpus, const RankingConfig& config) {
  RankingDataset ds;
  for (const auto& p : corpus.problems()) {
    try {
      ds.ranked.push_back(rank_problem(p.problem_id, corpus, config));
    } catch (const DataError& e) {
      if (e.code() != ErrorCode::MissingSamples) throw;
      ds.skipped.push_back({p.problem_id, e.detail()});
    }
  }
  return ds;
}

Json to_json(const RankedProblem& r) {
  Json outcomes = Json::array();
  for (const auto& o : r.outcomes) {
    outcomes.push_back({{"model_id", o.model_id},
                        {"pass_rate", o.pass_rate},
                        {"mean_tokens", o.mean_tokens},
                        {"score", o.score}});
  }
  return {{"problem_id", r.problem_id},
          {"optimal_model_id", r.optimal_model_id},
          {"ranking", r.ranking},
          {"outcomes", outcomes}};
}

RankedProblem ranked_from_json(const Json& j, std::string_view where) {
  RankedProblem r;
  r.problem_id = require<std::string>(j, "problem_id", where);
  r.optimal_model_id = require<std::string>(j, "optimal_model_id", where);
  r.ranking = require<std::vector<std::string>>(j, "ranking", where);
  for (const auto& o : require<Json>(j, "outcomes", where)) {
    ModelOutcome m;
    m.model_id = require<std::string>(o, "model_id", where);
    m.pass_rate = require<double>(o, "pass_rate", where);
    m.mean_tokens = require<double>(o, "mean_tokens", where);
    m.score = require<double>(o, "score", where);
    r.outcomes.push_back(std::move(m));
  }
  if (r.ranking.empty() || r.ranking.front() != r.optimal_model_id) {
    throw DataError(ErrorCode::SchemaError, std::string(where) + ": optimal_model_id != ranking[0]");
  }
  return r;
}

void save_ranked(const std::filesystem::path& path, const std::vector<RankedProblem>& ranked) {
  std::vector<Json> rows;
  rows.reserve(ranked.size());
  for (const auto& r : ranked) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

std::vector<RankedProblem> load_ranked(const std::filesystem::path& path) {
  std::vector<RankedProblem> out;
  std::size_t i = 0;
  for (const auto& row : read_jsonl(path)) {
    out.push_back(ranked_from_json(row, path.filename().string() + "#" + std::to_string(++i)));
  }
  return out;
}

}  // namespace coderoute
