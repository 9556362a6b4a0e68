#include "coderoute/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "coderoute/numeric.hpp"
#include "coderoute/rng.hpp"

namespace coderoute {

namespace {
__extension__ using u128 = unsigned __int128;
}  // namespace

std::uint64_t binomial(int n, int k) {
  if (n < 0 || k < 0) throw DataError(ErrorCode::DomainError, "binomial of negative argument");
  if (k > n) return 0;
  k = std::min(k, n - k);
  u128 r = 1;
  for (int i = 0; i < k; ++i) {
    // r == C(n, i) here, so r * (n - i) is divisible by i + 1.
    r = r * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    if (r > std::numeric_limits<std::uint64_t>::max()) {
      throw DataError(ErrorCode::DomainError, "binomial(" + std::to_string(n) + ", " +
                                                  std::to_string(k) + ") overflows");
    }
  }
  return static_cast<std::uint64_t>(r);
}

double pass_at_k(int n, int c, int k) {
  if (!(0 <= c && c <= n) || !(1 <= k && k <= n)) {
    throw DataError(ErrorCode::DomainError, "pass_at_k needs 0 <= c <= n and 1 <= k <= n (n=" +
                                                std::to_string(n) + ", c=" + std::to_string(c) +
                                                ", k=" + std::to_string(k) + ")");
  }
  const std::uint64_t total = binomial(n, k);
  const std::uint64_t all_fail = binomial(n - c, k);
  return static_cast<double>(total - all_fail) / static_cast<double>(total);
}

const MetricsAtK& PolicyResult::at(int k) const {
  for (const auto& m : metrics) {
    if (m.k == k) return m;
  }
  throw DataError(ErrorCode::InvalidArgument, "no metrics for k=" + std::to_string(k));
}

PolicyResult evaluate_policy(std::string name, const Selections& selections, const Corpus& corpus,
                             const EvalConfig& config) {
  const auto& pool = corpus.pool();
  const int n_s = pool.sample_count();
  std::vector<int> ks = {1};
  if (n_s > 1) ks.push_back(n_s);

  std::vector<CompensatedSum> score(ks.size()), tokens(ks.size()), price(ks.size());
  for (const auto& [problem_id, model_id] : selections) {
    if (!corpus.find_problem(problem_id)) {
      throw DataError(ErrorCode::UnknownReference, "policy selects for unknown problem", {problem_id});
    }
    const auto& model = pool.at(model_id);
    auto samples = corpus.responses_for(problem_id, model_id);
    if (static_cast<int>(samples.size()) != n_s) {
      throw DataError(ErrorCode::MissingSamples,
                      problem_id + ": model " + model_id + " has " + std::to_string(samples.size()) +
                          " samples, expected " + std::to_string(n_s),
                      {model_id});
    }
    int passing = 0;
    CompensatedSum spent;
    for (const auto& r : samples) {
      passing += r.passed ? 1 : 0;
      spent.add(static_cast<double>(billed_tokens(r, config.tokens)));
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const int k = ks[i];
      double t = 0.0;
      if (k == 1) {
        t = config.pass1_tokens == PassOneTokens::FirstResponse
                ? static_cast<double>(billed_tokens(samples.front(), config.tokens))
                : spent.value() / n_s;
      } else {
        t = spent.value();
      }
      score[i].add(pass_at_k(n_s, passing, k));
      tokens[i].add(t);
      price[i].add(t * model.price_per_mtok / 1e6);
    }
  }

  PolicyResult result;
  result.policy = std::move(name);
  result.problems = selections.size();
  result.selections = selections;
  const double count = static_cast<double>(std::max<std::size_t>(1, selections.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    result.metrics.push_back(
        {ks[i], score[i].value() / count, tokens[i].value() / count, price[i].value() / count});
  }
  return result;
}

Selections fixed_policy(std::string_view model_id, std::span<const std::string> problem_ids) {
  Selections s;
  for (const auto& id : problem_ids) s.emplace(id, std::string(model_id));
  return s;
}

Selections oracle_policy(std::span<const RankedProblem> ranked, std::span<const std::string> problem_ids) {
  std::map<std::string_view, std::string_view> labels;
  for (const auto& r : ranked) labels.emplace(r.problem_id, r.optimal_model_id);
  Selections s;
  for (const auto& id : problem_ids) {
    auto it = labels.find(id);
    if (it == labels.end()) {
      throw DataError(ErrorCode::UnknownReference, "no optimal-model label", {id});
    }
    s.emplace(id, std::string(it->second));
  }
  return s;
}

Selections random_policy(const CandidatePool& pool, std::span<const std::string> problem_ids,
                         std::uint64_t seed) {
  if (pool.size() == 0) throw DataError(ErrorCode::InvalidArgument, "empty candidate pool");
  std::vector<std::string> ids(problem_ids.begin(), problem_ids.end());
  std::sort(ids.begin(), ids.end());
  SplitMix64 rng(seed);
  Selections s;
  for (const auto& id : ids) s.emplace(id, pool.models()[rng.below(pool.size())].model_id);
  return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError(ErrorCode::DimensionMismatch, "pearson: length mismatch");
  if (x.size() < 2) throw DataError(ErrorCode::DegenerateDistribution, "pearson needs two points");
  const double mx = compensated_mean(x);
  const double my = compensated_mean(y);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  if (!(sxx.value() > 0.0) || !(syy.value() > 0.0)) {
    throw DataError(ErrorCode::DegenerateDistribution, "pearson: zero variance");
  }
  return sxy.value() / std::sqrt(sxx.value() * syy.value());
}

double correlate_size_performance(const CandidatePool& pool,
                                  const std::map<std::string, double>& pass_at_1) {
  std::vector<double> size, perf;
  for (const auto& m : pool.models()) {
    auto it = pass_at_1.find(m.model_id);
    if (!m.params_b || it == pass_at_1.end()) continue;
    size.push_back(*m.params_b);
    perf.push_back(it->second);
  }
  return pearson(size, perf);
}

Json to_json(const PolicyResult& result) {
  Json metrics = Json::array();
  for (const auto& m : result.metrics) {
    metrics.push_back({{"k", m.k}, {"score", m.score}, {"tokens", m.tokens}, {"price", m.price}});
  }
  return {{"policy", result.policy},
          {"problems", result.problems},
          {"metrics", std::move(metrics)},
          {"selections", result.selections}};
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// 4.61e-05 style: two decimals on a fixed e-05 scale, matching how the
// per-problem prices are customarily reported.
std::string price_e05(double price) { return fmt("%.2fe-05", price * 1e5); }

}  // namespace

std::string format_comparison_table(std::span<const PolicyResult> results) {
  std::set<int> ks_set;
  for (const auto& r : results) {
    for (const auto& m : r.metrics) ks_set.insert(m.k);
  }
  const std::vector<int> ks(ks_set.begin(), ks_set.end());
  std::size_t name_w = 6;
  for (const auto& r : results) name_w = std::max(name_w, r.policy.size());

  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  std::string header = "policy" + std::string(name_w - 6, ' ');
  for (int k : ks) {
    const std::string p = "pass@" + std::to_string(k);
    header += " | " + pad(p + " score", 13) + " " + pad(p + " token", 13) + " " + pad(p + " price($)", 16);
  }
  out << header << "\n" << std::string(header.size(), '-') << "\n";
  for (const auto& r : results) {
    std::string row = r.policy + std::string(name_w - r.policy.size(), ' ');
    for (int k : ks) {
      const MetricsAtK* m = nullptr;
      for (const auto& x : r.metrics) {
        if (x.k == k) m = &x;
      }
      if (!m) {
        row += " | " + pad("-", 13) + " " + pad("-", 13) + " " + pad("-", 16);
        continue;
      }
      row += " | " + pad(fmt("%.2f%%", m->score * 100.0), 13) + " " + pad(fmt("%.2f", m->tokens), 13) +
             " " + pad(price_e05(m->price), 16);
    }
    out << row << "\n";
  }
  return out.str();
}

std::string format_comparison_csv(std::span<const PolicyResult> results) {
  std::ostringstream out;
  out << "policy,problems,k,score,tokens,price\n";
  for (const auto& r : results) {
    for (const auto& m : r.metrics) {
      out << r.policy << ',' << r.problems << ',' << m.k << ',' << fmt("%.17g", m.score) << ','
          << fmt("%.17g", m.tokens) << ',' << fmt("%.17g", m.price) << '\n';
    }
  }
  return out.str();
}

}  // namespace coderoute
