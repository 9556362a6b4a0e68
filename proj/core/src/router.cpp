#include "coderoute/router.hpp"

#include <algorithm>

#include "coderoute/hash.hpp"

namespace coderoute {

RouterArtifactPaths RouterArtifactPaths::in_directory(const std::filesystem::path& dir) {
  RouterArtifactPaths p;
  p.projection = dir / "projection.json";
  p.classifier = dir / "classifier.json";
  p.pricing = dir / "pricing.json";
  auto maybe = [&](const char* name) -> std::optional<std::filesystem::path> {
    if (std::filesystem::exists(dir / name)) return dir / name;
    return std::nullopt;
  };
  p.difficulty = maybe("difficulty.json");
  p.embeddings = maybe("embeddings.jsonl");
  p.tier_classifier = maybe("tier_classifier.json");
  return p;
}

Json to_json(const RouteDecision& d) {
  Json j = {{"model_id", d.model_id},
            {"probabilities", d.probabilities},
            {"embedder", d.embedder},
            {"embedder_fallback", d.embedder_fallback},
            {"fingerprints", d.fingerprints}};
  j["difficulty_tier"] = d.difficulty_tier ? Json(*d.difficulty_tier) : Json(nullptr);
  return j;
}

Router::Router(BaseEmbedder embedder, ProjectionHead projection, BoostedForest classifier,
               CandidatePool pool)
    : embedder_(std::move(embedder)),
      projection_(std::move(projection)),
      classifier_(std::move(classifier)),
      pool_(std::move(pool)) {
  if (projection_.input_dim() != embedder_.dim()) {
    throw DataError(ErrorCode::DimensionMismatch,
                    "projection expects d=" + std::to_string(projection_.input_dim()) +
                        " but the embedder produces " + std::to_string(embedder_.dim()));
  }
  if (classifier_.feature_dim != projection_.output_dim()) {
    throw DataError(ErrorCode::DimensionMismatch,
                    "classifier expects " + std::to_string(classifier_.feature_dim) +
                        " features but the projection produces " +
                        std::to_string(projection_.output_dim()));
  }
  if (classifier_.classes.empty()) throw DataError(ErrorCode::SchemaError, "classifier has no classes");
  OffenderList unpriced(ErrorCode::MissingPrice);
  for (const auto& c : classifier_.classes) {
    if (!pool_.index_of(c)) unpriced.add(c);
  }
  unpriced.throw_if_any("classifier classes missing from pricing");
}

void Router::set_tier_model(BoostedForest tier_classifier) {
  if (tier_classifier.feature_dim != projection_.output_dim()) {
    throw DataError(ErrorCode::DimensionMismatch, "tier classifier feature_dim mismatch");
  }
  tier_classifier_ = std::move(tier_classifier);
}

BaseEmbedder embedder_for(const ProjectionHead& head, std::optional<EmbedderProvider> provider,
                          const std::optional<std::filesystem::path>& embeddings) {
  const auto& desc = head.embedder;
  const std::string recorded = optional_field<std::string>(desc, "provider", "hashed", "projection.embedder");
  auto chosen = provider ? provider : parse_provider(recorded);
  if (!chosen) throw DataError(ErrorCode::SchemaError, "unknown embedder provider '" + recorded + "'");
  const auto dim = optional_field<std::size_t>(desc, "dim", head.input_dim(), "projection.embedder");
  const auto max_tokens = optional_field<std::size_t>(desc, "max_tokens", 512, "projection.embedder");
  if (*chosen == EmbedderProvider::Imported) {
    if (!embeddings) {
      throw DataError(ErrorCode::MissingEmbedding, "imported provider selected but no embeddings file");
    }
    auto vectors = std::make_shared<const ImportedEmbeddings>(ImportedEmbeddings::load(*embeddings));
    return BaseEmbedder::imported(std::move(vectors), max_tokens);
  }
  return BaseEmbedder::hashed(dim, max_tokens);
}

Router Router::load(const RouterArtifactPaths& paths, std::optional<EmbedderProvider> provider) {
  auto projection = projection_from_json(read_artifact(paths.projection, "projection"),
                                         paths.projection.string());
  auto classifier = forest_from_json(read_artifact(paths.classifier, "classifier"),
                                     paths.classifier.string());
  auto pool = load_pricing(paths.pricing);
  auto embedder = embedder_for(projection, provider, paths.embeddings);

  std::map<std::string, std::string> fingerprints = {
      {"projection", fingerprint_file(paths.projection.string())},
      {"classifier", fingerprint_file(paths.classifier.string())},
      {"pricing", fingerprint_file(paths.pricing.string())},
  };
  Router router(std::move(embedder), std::move(projection), std::move(classifier), std::move(pool));
  if (paths.difficulty) {
    router.set_difficulty(difficulty_from_json(read_artifact(*paths.difficulty, "difficulty"),
                                               paths.difficulty->string()));
    fingerprints["difficulty"] = fingerprint_file(paths.difficulty->string());
  }
  if (paths.tier_classifier) {
    router.set_tier_model(forest_from_json(read_artifact(*paths.tier_classifier, "classifier"),
                                           paths.tier_classifier->string()));
    fingerprints["tier_classifier"] = fingerprint_file(paths.tier_classifier->string());
  }
  if (paths.embeddings && router.embedder().provider() == EmbedderProvider::Imported) {
    fingerprints["embeddings"] = fingerprint_file(paths.embeddings->string());
  }
  router.set_fingerprints(std::move(fingerprints));
  return router;
}

RouteDecision Router::route(std::string_view prompt, std::optional<std::string_view> problem_id) const {
  const auto base = embedder_.embed_text(prompt, problem_id);
  const Vector features = projection_.forward(base.vector);
  const auto proba = classifier_.predict_proba(features);

  RouteDecision d;
  std::size_t best = 0;
  for (std::size_t c = 0; c < proba.size(); ++c) {
    d.probabilities[classifier_.classes[c]] = proba[c];
    if (proba[c] > proba[best] ||
        (proba[c] == proba[best] && classifier_.classes[c] < classifier_.classes[best])) {
      best = c;
    }
  }
  d.model_id = classifier_.classes[best];
  if (tier_classifier_) {
    d.difficulty_tier = tier_classifier_->classes[tier_classifier_->predict(features)];
  }
  d.embedder = std::string(provider_name(base.provider));
  d.embedder_fallback = base.fell_back;
  d.fingerprints = fingerprints_;
  return d;
}

Vector Router::features(const Problem& problem) const {
  return projection_.forward(embedder_.embed(problem));
}

Selections learned_policy(const Router& router, const Corpus& corpus,
                          std::span<const std::string> problem_ids) {
  Selections s;
  for (const auto& id : problem_ids) {
    const Problem* p = corpus.find_problem(id);
    if (!p) throw DataError(ErrorCode::UnknownReference, "unknown problem", {id});
    s.emplace(id, router.route(p->prompt, p->problem_id).model_id);
  }
  return s;
}

}  // namespace coderoute
