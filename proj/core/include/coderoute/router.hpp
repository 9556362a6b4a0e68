#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "coderoute/classifier.hpp"
#include "coderoute/corpus.hpp"
#include "coderoute/difficulty.hpp"
#include "coderoute/embedding.hpp"
#include "coderoute/evaluator.hpp"

namespace coderoute {

struct RouterArtifactPaths {
  std::filesystem::path projection;
  std::filesystem::path classifier;
  std::filesystem::path pricing;
  std::optional<std::filesystem::path> difficulty;
  std::optional<std::filesystem::path> embeddings;       // imported provider vectors
  std::optional<std::filesystem::path> tier_classifier;  // embeddings -> difficulty tier

  // Conventional names inside a pipeline working directory; optional files
  // are picked up only when they exist.
  static RouterArtifactPaths in_directory(const std::filesystem::path& dir);
};

struct RouteDecision {
  std::string model_id;
  std::map<std::string, double> probabilities;
  std::optional<std::string> difficulty_tier;
  std::string embedder;           // provider that produced the base vector
  bool embedder_fallback = false;  // imported provider had no vector
  std::map<std::string, std::string> fingerprints;  // artifact name -> FNV-1a of file bytes

  friend bool operator==(const RouteDecision&, const RouteDecision&) = default;
};

Json to_json(const RouteDecision& decision);

// Embedding -> projection -> classifier, over immutable artifacts. `route` is
// const and safe to call from many threads at once.
class Router {
 public:
  Router(BaseEmbedder embedder, ProjectionHead projection, BoostedForest classifier,
         CandidatePool pool);

  // Version-checks every artifact, verifies classifier classes are priced and
  // that dimensions line up. `provider` overrides the provider recorded in
  // projection.json.
  static Router load(const RouterArtifactPaths& paths,
                     std::optional<EmbedderProvider> provider = std::nullopt);

  RouteDecision route(std::string_view prompt,
                      std::optional<std::string_view> problem_id = std::nullopt) const;

  // Projected features of a known problem (imported vectors are looked up by id).
  Vector features(const Problem& problem) const;

  const CandidatePool& pool() const noexcept { return pool_; }
  const BaseEmbedder& embedder() const noexcept { return embedder_; }
  const ProjectionHead& projection() const noexcept { return projection_; }
  const BoostedForest& classifier() const noexcept { return classifier_; }

  void set_tier_model(BoostedForest tier_classifier);
  void set_difficulty(DifficultyModel difficulty) { difficulty_ = std::move(difficulty); }
  const std::optional<DifficultyModel>& difficulty() const noexcept { return difficulty_; }
  void set_fingerprints(std::map<std::string, std::string> f) { fingerprints_ = std::move(f); }
  const std::map<std::string, std::string>& fingerprints() const noexcept { return fingerprints_; }

 private:
  BaseEmbedder embedder_;
  ProjectionHead projection_;
  BoostedForest classifier_;
  CandidatePool pool_;
  std::optional<BoostedForest> tier_classifier_;
  std::optional<DifficultyModel> difficulty_;
  std::map<std::string, std::string> fingerprints_;
};

// Routes every listed problem through the router.
Selections learned_policy(const Router& router, const Corpus& corpus,
                          std::span<const std::string> problem_ids);

// Builds the base embedder a projection head was trained over.
BaseEmbedder embedder_for(const ProjectionHead& head, std::optional<EmbedderProvider> provider,
                          const std::optional<std::filesystem::path>& embeddings);

}  // namespace coderoute
