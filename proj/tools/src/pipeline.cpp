#include "coderoute/tools/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "coderoute/difficulty.hpp"
#include "coderoute/router.hpp"

namespace coderoute::tools {

namespace fs = std::filesystem;

Json to_json(const Split& split) {
  Json doc = make_artifact("split");
  doc["ratio"] = split.ratio;
  doc["seed"] = split.seed;
  doc["train"] = split.train;
  doc["test"] = split.test;
  return doc;
}

Split split_from_json(const Json& doc, std::string_view where) {
  check_artifact(doc, "split", where);
  Split s;
  s.ratio = require<double>(doc, "ratio", where);
  s.seed = require<std::uint64_t>(doc, "seed", where);
  s.train = require<std::vector<std::string>>(doc, "train", where);
  s.test = require<std::vector<std::string>>(doc, "test", where);
  return s;
}

Split make_split(const std::vector<RankedProblem>& ranked, double ratio, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& r : ranked) ids.push_back(r.problem_id);
  std::sort(ids.begin(), ids.end());
  auto [train, test] = split_dataset(std::move(ids), ratio, seed);
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ratio, seed, std::move(train), std::move(test)};
}

namespace {

void write_manifest(const fs::path& dir, const Corpus& corpus) {
  Json doc = make_artifact("corpus");
  doc["sample_count"] = corpus.pool().sample_count();
  doc["problems"] = corpus.problems().size();
  doc["responses"] = corpus.responses().size();
  doc["cots"] = corpus.cots().size();
  write_json_file(dir / files::kManifest, doc);
}

// The split shared by both training stages. An existing split.json with the
// same ratio and seed is reused as is; otherwise it is recomputed.
Split shared_split(const fs::path& dir, double ratio, std::uint64_t seed) {
  const auto path = dir / files::kSplit;
  const auto ranked = load_ranked(dir / files::kRanked);
  Split split = make_split(ranked, ratio, seed);
  if (fs::exists(path)) {
    const auto existing = split_from_json(read_json_file(path), path.string());
    if (existing == split) return existing;
    spdlog::warn("{} had ratio {} seed {}; rewriting it for ratio {} seed {}, so earlier stages saw another split",
                 path.string(), existing.ratio, existing.seed, ratio, seed);
  }
  write_json_file(path, to_json(split));
  return split;
}

std::map<std::string, int> tier_labels(const fs::path& dir) {
  const auto agg = cot_aggregate_from_json(read_artifact(dir / files::kCotLengths, "cot_lengths"),
                                           files::kCotLengths);
  const auto model = difficulty_from_json(read_artifact(dir / files::kDifficulty, "difficulty"),
                                          files::kDifficulty);
  std::map<std::string, int> out;
  for (const auto& l : agg.lengths) out[l.problem_id] = model.assign(static_cast<double>(l.length));
  return out;
}

}  // namespace

Corpus load_workdir_corpus(const fs::path& dir) {
  const auto manifest = read_artifact(dir / files::kManifest, "corpus");
  const int n_s = require<int>(manifest, "sample_count", files::kManifest);
  return load_corpus(CorpusPaths::in_directory(dir, n_s));
}

Corpus run_ingest(const fs::path& dir, const IngestOptions& options) {
  CorpusPaths paths{options.problems, options.responses, options.cots, options.pricing,
                    options.sample_count};
  auto corpus = load_corpus(paths);
  fs::create_directories(dir);
  save_corpus(corpus, dir);
  write_manifest(dir, corpus);
  return corpus;
}

Corpus run_synth(const fs::path& dir, const SynthSpec& spec, std::uint64_t seed) {
  auto corpus = generate_synthetic_corpus(spec, seed);
  fs::create_directories(dir);
  save_corpus(corpus, dir);
  write_manifest(dir, corpus);
  Json doc = make_artifact("synth_spec");
  doc["seed"] = seed;
  doc["spec"] = to_json(spec);
  write_json_file(dir / files::kSynthSpec, doc);
  return corpus;
}

RankingDataset run_rank(const fs::path& dir, const RankingConfig& config) {
  const auto corpus = load_workdir_corpus(dir);
  auto ds = build_ranking_dataset(corpus, config);
  save_ranked(dir / files::kRanked, ds.ranked);
  Json doc = make_artifact("rank_skips");
  doc["tokens"] = std::string(token_accounting_name(config.tokens));
  doc["price_scale"] = config.price_scale;
  doc["ranked"] = ds.ranked.size();
  Json skipped = Json::array();
  for (const auto& s : ds.skipped) skipped.push_back({{"problem_id", s.problem_id}, {"reason", s.reason}});
  doc["skipped"] = std::move(skipped);
  write_json_file(dir / files::kRankSkips, doc);
  return ds;
}

CotAggregate run_cot_aggregate(const fs::path& dir, std::optional<std::string> reasoning_model_id) {
  const auto corpus = load_workdir_corpus(dir);
  if (!reasoning_model_id) {
    const auto models = corpus.reasoning_models();
    if (models.size() != 1) {
      throw DataError(ErrorCode::NoCotData,
                      models.empty() ? "corpus has no CoT records"
                                     : "corpus has several reasoning models; pick one",
                      models);
    }
    reasoning_model_id = models.front();
  }
  auto agg = aggregate_cot(corpus, *reasoning_model_id);
  write_json_file(dir / files::kCotLengths, to_json(agg));
  return agg;
}

DifficultyModel run_cluster(const fs::path& dir, int k) {
  const auto agg = cot_aggregate_from_json(read_artifact(dir / files::kCotLengths, "cot_lengths"),
                                           files::kCotLengths);
  std::vector<double> lengths;
  for (const auto& l : agg.lengths) lengths.push_back(static_cast<double>(l.length));
  auto model = fit_kmeans_1d(lengths, k);
  model.reasoning_model_id = agg.reasoning_model_id;
  model.exclusions = agg.exclusions;
  write_json_file(dir / files::kDifficulty, to_json(model));
  return model;
}

ProjectionHead run_train_embedding(const fs::path& dir, const EmbeddingStageOptions& options) {
  const auto corpus = load_workdir_corpus(dir);
  const auto split = shared_split(dir, options.split, options.split_seed);
  const auto difficulty = difficulty_from_json(read_artifact(dir / files::kDifficulty, "difficulty"),
                                               files::kDifficulty);

  BaseEmbedder base = BaseEmbedder::hashed(options.dim, options.max_tokens);
  if (options.provider == EmbedderProvider::Imported) {
    if (!options.embeddings) {
      throw DataError(ErrorCode::MissingEmbedding, "imported provider needs an embeddings file");
    }
    auto vectors = std::make_shared<const ImportedEmbeddings>(ImportedEmbeddings::load(*options.embeddings));
    if (fs::absolute(*options.embeddings) != fs::absolute(dir / files::kEmbeddings)) {
      vectors->save(dir / files::kEmbeddings);
    }
    base = BaseEmbedder::imported(std::move(vectors), options.max_tokens);
  } else if (fs::exists(dir / files::kEmbeddings)) {
    // A stale imported file would otherwise be picked up by the router.
    fs::remove(dir / files::kEmbeddings);
  }

  if (options.proj_dim > base.dim()) {
    throw DataError(ErrorCode::InvalidArgument, "proj-dim must not exceed the base dimension");
  }
  ProjectionHead head(base.dim(), options.proj_dim, options.margin);
  head.embedder = base.describe();

  // Triplets come from training problems only, so test prompts never shape
  // the projection.
  const auto agg = cot_aggregate_from_json(read_artifact(dir / files::kCotLengths, "cot_lengths"),
                                           files::kCotLengths);
  std::vector<TierMember> members;
  const std::set<std::string> train(split.train.begin(), split.train.end());
  for (const auto& l : agg.lengths) {
    if (!train.count(l.problem_id) || !corpus.find_problem(l.problem_id)) continue;
    const auto length = static_cast<double>(l.length);
    members.push_back({l.problem_id, length, difficulty.assign(length)});
  }

  if (!options.untrained) {
    const std::size_t count = options.triplets > 0 ? options.triplets : 8 * members.size();
    const auto triplets = sample_triplets(members, difficulty.k(), count, options.train.seed);
    std::map<std::string, Vector> cache;
    auto vec = [&](const std::string& id) -> const Vector& {
      auto it = cache.find(id);
      if (it == cache.end()) it = cache.emplace(id, base.embed(*corpus.find_problem(id))).first;
      return it->second;
    };
    std::vector<TripletVectors> batch;
    batch.reserve(triplets.size());
    for (const auto& t : triplets) batch.push_back({vec(t.anchor), vec(t.positive), vec(t.negative)});
    train_projection(head, batch, options.train);
  } else {
    head.meta.seed = options.train.seed;
  }
  write_json_file(dir / files::kProjection, to_json(head));
  return head;
}

BoostedForest run_train_classifier(const fs::path& dir, const ClassifierStageOptions& options) {
  const auto corpus = load_workdir_corpus(dir);
  const auto split = shared_split(dir, options.split, options.split_seed);
  const auto ranked = load_ranked(dir / files::kRanked);
  const auto head = projection_from_json(read_artifact(dir / files::kProjection, "projection"),
                                         files::kProjection);
  std::optional<fs::path> embeddings;
  if (fs::exists(dir / files::kEmbeddings)) embeddings = dir / files::kEmbeddings;
  const auto base = embedder_for(head, std::nullopt, embeddings);

  std::map<std::string, const RankedProblem*> by_id;
  for (const auto& r : ranked) by_id[r.problem_id] = &r;
  const auto& pool = corpus.pool();

  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::map<std::string, std::size_t> row_of;
  for (const auto& id : split.train) {
    const auto* r = by_id.at(id);
    const auto index = pool.index_of(r->optimal_model_id);
    if (!index) throw DataError(ErrorCode::MissingPrice, "ranked label without a price", {r->optimal_model_id});
    row_of[id] = features.size();
    features.push_back(head.forward(base.embed(*corpus.find_problem(id))));
    labels.push_back(static_cast<int>(*index));
  }
  auto forest = fit_forest(features, labels, pool.model_ids(), options.boosting);
  write_json_file(dir / files::kClassifier, to_json(forest));

  const auto tier_path = dir / files::kTierClassifier;
  if (options.tier_model) {
    const auto tiers = tier_labels(dir);
    const auto difficulty = difficulty_from_json(read_artifact(dir / files::kDifficulty, "difficulty"),
                                                 files::kDifficulty);
    std::vector<std::vector<double>> tx;
    std::vector<int> ty;
    for (const auto& id : split.train) {
      auto it = tiers.find(id);
      if (it == tiers.end()) continue;
      tx.push_back(features[row_of.at(id)]);
      ty.push_back(it->second);
    }
    std::vector<std::string> names;
    for (int t = 0; t < difficulty.k(); ++t) names.push_back(tier_name(difficulty.k(), t));
    write_json_file(tier_path, to_json(fit_forest(tx, ty, names, options.boosting)));
  } else if (fs::exists(tier_path)) {
    fs::remove(tier_path);
  }
  return forest;
}

EvaluationReport run_evaluate(const fs::path& dir, const EvaluateOptions& options) {
  const auto corpus = load_workdir_corpus(dir);
  const auto ranked = load_ranked(dir / files::kRanked);
  const auto split = split_from_json(read_json_file(dir / files::kSplit), files::kSplit);
  const auto& pool = corpus.pool();
  const std::vector<std::string>& ids = split.test;

  std::vector<std::string> policies = options.policies;
  if (policies.empty()) {
    policies = {"learned", "oracle", "random"};
    for (const auto& m : pool.model_ids()) policies.push_back("fixed:" + m);
  }

  std::optional<Router> router;
  EvaluationReport report;
  for (const auto& name : policies) {
    Selections sel;
    if (name == "learned") {
      if (!router) router.emplace(Router::load(RouterArtifactPaths::in_directory(dir)));
      sel = learned_policy(*router, corpus, ids);
    } else if (name == "oracle") {
      sel = oracle_policy(ranked, ids);
    } else if (name == "random") {
      sel = random_policy(pool, ids, options.random_seed);
    } else if (name.rfind("fixed:", 0) == 0) {
      const auto model = name.substr(6);
      (void)pool.at(model);
      sel = fixed_policy(model, ids);
    } else {
      throw DataError(ErrorCode::InvalidArgument, "unknown policy '" + name + "'");
    }
    report.results.push_back(evaluate_policy(name, sel, corpus, options.eval));
  }

  // Size vs accuracy over the fixed policies that were evaluated.
  std::map<std::string, double> pass1;
  for (const auto& r : report.results) {
    if (r.policy.rfind("fixed:", 0) == 0) pass1[r.policy.substr(6)] = r.at(1).score;
  }
  try {
    report.size_performance = correlate_size_performance(pool, pass1);
  } catch (const DataError& e) {
    if (e.code() != ErrorCode::DegenerateDistribution) throw;
  }

  report.table = format_comparison_table(report.results);
  Json doc = make_artifact("report");
  doc["split"] = {{"ratio", split.ratio}, {"seed", split.seed}, {"test_problems", ids.size()}};
  doc["tokens"] = std::string(token_accounting_name(options.eval.tokens));
  doc["pass1_tokens"] =
      options.eval.pass1_tokens == PassOneTokens::FirstResponse ? "first_response" : "mean_per_response";
  Json results = Json::array();
  for (const auto& r : report.results) results.push_back(to_json(r));
  doc["policies"] = std::move(results);
  doc["size_performance_pearson"] = report.size_performance ? Json(*report.size_performance) : Json(nullptr);
  write_json_file(dir / files::kReport, doc);
  write_text_file(dir / files::kComparison, report.table);
  if (options.csv) write_text_file(*options.csv, format_comparison_csv(report.results));
  return report;
}

}  // namespace coderoute::tools
