// One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "coderoute/artifact.hpp"
#include "coderoute/classifier.hpp"
#include "coderoute/difficulty.hpp"
#include "coderoute/embedding.hpp"
#include "coderoute/evaluator.hpp"
#include "coderoute/rng.hpp"
#include "coderoute/synth.hpp"
#include "coderoute/tools/cli.hpp"
#include "coderoute/tools/pipeline.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coderoute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  const char* name;
  double limit_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Tokens are spread so the per-response mean equals `mean_tokens` exactly.
Corpus constant_mean_corpus(const std::string& model, double price, double mean_tokens,
                            std::vector<std::string>& ids) {
  const int problems = 100, n_s = 5;
  const auto total = static_cast<std::int64_t>(std::llround(mean_tokens * problems * n_s));
  const std::int64_t base = total / (problems * n_s);
  std::int64_t extra = total % (problems * n_s);
  std::vector<Problem> ps;
  std::vector<ResponseRecord> rs;
  for (int p = 0; p < problems; ++p) {
    const std::string id = "p" + std::to_string(p);
    ps.push_back(fixtures::problem(id));
    ids.push_back(id);
    for (int s = 0; s < n_s; ++s) {
      rs.push_back({id, model, s, (p + s) % 3 == 0, base + (extra-- > 0 ? 1 : 0), 50});
    }
  }
  return Corpus(ps, rs, {}, CandidatePool({{model, price, std::nullopt}}, n_s));
}

Outcome table_rows() {
  struct Row {
    const char* model;
    double tokens, price, reference;
  };
  Outcome out;
  double worst = 0.0;
  for (const auto& row : {Row{"yi-coder-1.5b", 329.02, 0.14, 4.61e-05},
                          Row{"qwen2.5-coder-32b", 763.57, 1.26, 96.21e-05},
                          Row{"codestral-22b", 476.48, 0.95, 45.27e-05}}) {
    std::vector<std::string> ids;
    const auto corpus = constant_mean_corpus(row.model, row.price, row.tokens, ids);
    const auto r = evaluate_policy("fixed", fixed_policy(row.model, ids), corpus);
    const double rel = std::abs(r.at(1).price - row.reference) / row.reference;
    worst = std::max(worst, rel);
    if (!(rel <= 0.005)) out.ok = false;
  }
  out.detail = "3 rows, max relative error " + fmt("%.3g", worst);
  return out;
}

Outcome pass_at_k_exact() {
  Outcome out;
  int cases = 0;
  for (int n = 1; n <= 6; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        ++cases;
        if (pass_at_k(n, c, k) != oracle::pass_at_k_enumerated(n, c, k)) out.ok = false;
      }
    }
  }
  out.detail = std::to_string(cases) + " (n, c, k) triples";
  return out;
}

Outcome kmeans_brute_force() {
  Outcome out;
  SplitMix64 rng(2001);
  int instances = 0;
  double worst = 0.0;
  while (instances < 200) {
    const std::size_t n = 2 + rng.below(11);
    const int k = 2 + static_cast<int>(rng.below(2));
    std::vector<double> xs(n);
    for (auto& v : xs) v = static_cast<double>(rng.between(1, 60));
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < k) continue;
    ++instances;
    const auto best = oracle::best_contiguous_partition(xs, k);
    const auto model = fit_kmeans_1d(xs, k);
    // The labels must realize the optimum too, not just the reported SSE.
    const auto labels = cluster_labels(xs, k);
    std::vector<double> sums(k, 0.0), counts(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[labels[i]] += xs[i];
      counts[labels[i]] += 1.0;
    }
    double label_sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = sums[labels[i]] / counts[labels[i]];
      label_sse += (xs[i] - m) * (xs[i] - m);
    }
    const double scale = std::max(1.0, best.sse);
    const double err = std::max(std::abs(model.sse() - best.sse), std::abs(label_sse - best.sse)) / scale;
    worst = std::max(worst, err);
    if (!(err <= 1e-9)) out.ok = false;
  }
  out.detail = "200 instances, max relative SSE gap " + fmt("%.3g", worst);
  return out;
}

std::vector<double> random_vector(SplitMix64& rng, std::size_t d) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.unit() * 2.0 - 1.0;
  return v;
}

Outcome gradient_check() {
  Outcome out;
  SplitMix64 rng(4242);
  const double h = 1e-4;
  double worst = 0.0;
  int active = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ProjectionHead head(6, 4, 1.0);
    for (auto& w : head.weights()) w = rng.unit() * 2.0 - 1.0;
    std::vector<TripletVectors> batch;
    for (int i = 0; i < 8; ++i) {
      batch.push_back({random_vector(rng, 6), random_vector(rng, 6), random_vector(rng, 6)});
    }
    std::vector<double> grad;
    if (mean_triplet_loss(head, batch, &grad) > 0.0) ++active;
    double diff2 = 0.0, fd2 = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      ProjectionHead plus = head, minus = head;
      plus.weights()[i] += h;
      minus.weights()[i] -= h;
      const double fd = (mean_triplet_loss(plus, batch) - mean_triplet_loss(minus, batch)) / (2 * h);
      diff2 += (fd - grad[i]) * (fd - grad[i]);
      fd2 += fd * fd;
    }
    const double rel = fd2 == 0.0 ? std::sqrt(diff2) : std::sqrt(diff2 / fd2);
    worst = std::max(worst, rel);
    if (!(rel <= 1e-3)) out.ok = false;
  }
  if (active < 40) out.ok = false;  // a vacuous check would pass on zero gradients
  out.detail = "50 batches (" + std::to_string(active) + " with active hinges), max relative error " +
               fmt("%.3g", worst);
  return out;
}

Outcome memorization() {
  Outcome out;
  SplitMix64 rng(50);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  while (x.size() < 50) {
    std::vector<double> p = {rng.unit(), rng.unit(), rng.unit(), rng.unit()};
    x.push_back(std::move(p));
    y.push_back(static_cast<int>(rng.below(3)));
  }
  BoostingConfig cfg;
  cfg.rounds = 300;
  cfg.max_depth = 6;
  cfg.learning_rate = 0.3;
  cfg.min_samples_leaf = 1;
  BoostingReport report;
  const auto forest = fit_forest(x, y, {"a", "b", "c"}, cfg, &report);
  int correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += static_cast<int>(forest.predict(x[i])) == y[i];
  std::size_t rises = 0;
  for (std::size_t i = 1; i < report.loss_curve.size(); ++i) {
    if (report.loss_curve[i] > report.loss_curve[i - 1]) ++rises;
  }
  out.ok = correct == 50 && rises == 0 && report.loss_curve.size() == 301;
  out.detail = std::to_string(correct) + "/50 correct, " + std::to_string(rises) + " loss increases, final loss " +
               fmt("%.3g", report.loss_curve.back());
  return out;
}

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "coderoute");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = tools::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (err) *err = e.str();
  return code;
}

std::vector<std::vector<std::string>> cli_pipeline(const fs::path& dir) {
  const std::string w = dir.string();
  return {
      {"-w", w, "synth", "--seed", "42"},
      {"-w", w, "rank"},
      {"-w", w, "cot-aggregate"},
      {"-w", w, "cluster", "--k", "3"},
      {"-w", w, "train-embedding", "--seed", "0"},
      {"-w", w, "train-classifier", "--split", "0.7", "--seed", "0"},
      {"-w", w, "evaluate"},
  };
}

bool run_pipeline(const fs::path& dir, std::string& failure) {
  for (const auto& step : cli_pipeline(dir)) {
    std::string err;
    if (cli(step, &err) != 0) {
      failure = step[2] + ": " + err;
      return false;
    }
  }
  return true;
}

const Json* policy(const Json& report, const std::string& name) {
  for (const auto& p : report["policies"]) {
    if (p["policy"] == name) return &p;
  }
  return nullptr;
}

Outcome end_to_end() {
  Outcome out;
  fixtures::TempDir dir("coderoute-accept");
  std::string failure;
  if (!run_pipeline(dir.path(), failure)) return {false, failure};
  const auto report = read_artifact(dir / tools::files::kReport, "report");

  const auto spec = default_synth_spec();
  const auto largest = std::max_element(spec.models.begin(), spec.models.end(),
                                        [](const auto& a, const auto& b) { return a.params_b < b.params_b; });
  const Json* learned = policy(report, "learned");
  const Json* oracle = policy(report, "oracle");
  const Json* big = policy(report, "fixed:" + largest->model_id);
  if (!learned || !oracle || !big) return {false, "report lacks a policy"};
  const double l1 = (*learned)["metrics"][0]["score"].get<double>();
  const double o1 = (*oracle)["metrics"][0]["score"].get<double>();
  const double lp = (*learned)["metrics"][0]["price"].get<double>();
  const double bp = (*big)["metrics"][0]["price"].get<double>();
  out.ok = l1 >= 0.9 * o1 && lp <= bp;
  out.detail = "learned pass@1 " + fmt("%.4f", l1) + " vs oracle " + fmt("%.4f", o1) + ", price " +
               fmt("%.3e", lp) + " vs always-" + largest->model_id + " " + fmt("%.3e", bp);
  return out;
}

// Test pass@1 of the learned policy on a synthetic corpus, with or without
// triplet training of the projection.
double learned_pass1(std::uint64_t seed, bool trained) {
  fixtures::TempDir dir("coderoute-ablation");
  tools::run_synth(dir.path(), default_synth_spec(), seed);
  tools::run_rank(dir.path());
  tools::run_cot_aggregate(dir.path());
  tools::run_cluster(dir.path(), 3);
  tools::EmbeddingStageOptions emb;
  emb.train.seed = seed;
  emb.split_seed = seed;
  emb.untrained = !trained;
  tools::run_train_embedding(dir.path(), emb);
  tools::ClassifierStageOptions clf;
  clf.split_seed = seed;
  tools::run_train_classifier(dir.path(), clf);
  tools::EvaluateOptions ev;
  ev.policies = {"learned"};
  return tools::run_evaluate(dir.path(), ev).results.front().at(1).score;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome ablation() {
  std::vector<double> trained, untrained;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    trained.push_back(learned_pass1(seed, true));
    untrained.push_back(learned_pass1(seed, false));
  }
  const double mt = median(trained), mu = median(untrained);
  return {mt >= mu - 0.01, "median test pass@1 over 5 seeds: trained " + fmt("%.4f", mt) + ", untrained " +
                               fmt("%.4f", mu)};
}

std::vector<int> random_labels(SplitMix64& rng, std::size_t n) {
  const std::uint64_t clusters = 1 + rng.below(std::min<std::size_t>(n, 6));
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.below(clusters)) * 7 - 3;  // arbitrary label values
  return v;
}

Outcome cluster_indices() {
  Outcome out;
  SplitMix64 rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(19);
    const auto a = random_labels(rng, n);
    const auto b = random_labels(rng, n);
    const auto got = compare_clusterings(a, b);
    const auto want = oracle::pair_counting(a, b);
    worst = std::max({worst, std::abs(got.ari - want.ari), std::abs(got.fmi - want.fmi)});
    const auto same = compare_clusterings(a, a);
    if (same.ari != 1.0 || same.fmi != 1.0) out.ok = false;
  }
  if (!(worst <= 1e-10)) out.ok = false;
  out.detail = "100 pairs, max deviation " + fmt("%.3g", worst) + ", identical partitions exactly 1.0";
  return out;
}

Outcome determinism() {
  fixtures::TempDir a("coderoute-det"), b("coderoute-det");
  std::string failure;
  if (!run_pipeline(a.path(), failure) || !run_pipeline(b.path(), failure)) return {false, failure};
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a.path())) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  const auto count_b = std::distance(fs::directory_iterator(b.path()), fs::directory_iterator());
  std::vector<std::string> differing;
  for (const auto& name : names) {
    if (!fs::exists(b / name) || read_text_file(a / name) != read_text_file(b / name)) differing.push_back(name);
  }
  Outcome out;
  out.ok = differing.empty() && static_cast<std::size_t>(count_b) == names.size();
  out.detail = std::to_string(names.size()) + " artifacts compared";
  for (const auto& d : differing) out.detail += ", differs: " + d;
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"reference-price-arithmetic", 1.0, table_rows},
      {"pass-at-k-exact-enumeration", 1.0, pass_at_k_exact},
      {"kmeans-brute-force-optimum", 10.0, kmeans_brute_force},
      {"triplet-gradient-finite-difference", 5.0, gradient_check},
      {"classifier-memorization-monotone-loss", 10.0, memorization},
      {"end-to-end-synthetic-routing", 60.0, end_to_end},
      {"ablation-trained-vs-untrained-projection", 0.0, ablation},
      {"ari-fmi-pair-counting", 0.0, cluster_indices},
      {"cli-pipeline-determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.3fs", secs);
    if (c.limit_s > 0.0) {
      timing += fmt(" < %.0fs", c.limit_s);
      if (!(secs < c.limit_s)) {
        out.ok = false;
        timing += " EXCEEDED";
      }
    }
    if (!out.ok) ++failed;
    std::printf("%s %s: %s [%s]\n", out.ok ? "PASS" : "FAIL", c.name, out.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
