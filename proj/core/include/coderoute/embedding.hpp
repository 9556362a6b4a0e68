#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coderoute/corpus.hpp"

namespace coderoute {

using Vector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm(std::span<const double> a) noexcept;
// In place; the zero vector stays zero.
void normalize(std::span<double> v) noexcept;

// Lowercases ASCII, splits on ASCII non-alphanumerics (bytes >= 0x80 are kept
// inside tokens, so UTF-8 words survive intact) and keeps the first
// `max_tokens` tokens.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_tokens);

// Feature-hashing bag of unigrams and adjacent bigrams with FNV-1a 64 buckets,
// tf counts, L2-normalized.
class HashedEmbedder {
 public:
  explicit HashedEmbedder(std::size_t dim = 768, std::size_t max_tokens = 512);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t max_tokens() const noexcept { return max_tokens_; }

  Vector embed(std::string_view text) const;

  // Bigram features are "left right"; tokens never contain a space, so the
  // two feature kinds cannot collide as strings.
  static std::vector<std::string> features(std::span<const std::string> tokens);
  std::size_t bucket(std::string_view feature) const noexcept;

 private:
  std::size_t dim_;
  std::size_t max_tokens_;
};

// Vectors produced offline by an external encoder, keyed by problem_id.
//
// File layout: a JSON header line {format_version, dim, count, provider_name,
// ...} followed by `count` lines {problem_id, vector}. Extra header members
// (pooling, encoder, truncation) are kept verbatim in `header`.
class ImportedEmbeddings {
 public:
  ImportedEmbeddings() = default;
  ImportedEmbeddings(std::size_t dim, std::string provider_name, std::map<std::string, Vector> rows,
                     Json header = Json::object());

  static ImportedEmbeddings load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return rows_.size(); }
  const std::string& provider_name() const noexcept { return provider_name_; }
  const Json& header() const noexcept { return header_; }
  bool contains(std::string_view problem_id) const;
  const Vector& at(std::string_view problem_id) const;  // MissingEmbedding

 private:
  std::size_t dim_ = 0;
  std::string provider_name_;
  std::map<std::string, Vector, std::less<>> rows_;
  Json header_ = Json::object();
};

enum class EmbedderProvider { Hashed, Imported };

std::string_view provider_name(EmbedderProvider p);
std::optional<EmbedderProvider> parse_provider(std::string_view name);

struct TextEmbedding {
  Vector vector;
  EmbedderProvider provider = EmbedderProvider::Hashed;
  bool fell_back = false;  // imported provider had no vector for this input
};

// Base (frozen) embedding stage in front of the projection head.
class BaseEmbedder {
 public:
  static BaseEmbedder hashed(std::size_t dim = 768, std::size_t max_tokens = 512);
  static BaseEmbedder imported(std::shared_ptr<const ImportedEmbeddings> vectors,
                               std::size_t max_tokens = 512);

  EmbedderProvider provider() const noexcept { return provider_; }
  std::size_t dim() const noexcept { return hashed_.dim(); }
  std::size_t max_tokens() const noexcept { return hashed_.max_tokens(); }

  // Imported provider: exact lookup by problem_id (MissingEmbedding if absent).
  Vector embed(const Problem& problem) const;
  // Ad-hoc text. With the imported provider a known problem_id is looked up;
  // anything else falls back to hashing at the same dimension.
  TextEmbedding embed_text(std::string_view text,
                           std::optional<std::string_view> problem_id = std::nullopt) const;

  Json describe() const;

 private:
  BaseEmbedder(EmbedderProvider provider, HashedEmbedder hashed,
               std::shared_ptr<const ImportedEmbeddings> vectors);

  EmbedderProvider provider_;
  HashedEmbedder hashed_;
  std::shared_ptr<const ImportedEmbeddings> vectors_;
};

struct ProjectionTrainConfig {
  int epochs = 20;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct ProjectionMeta {
  int epochs = 0;
  double lr = 0.0;
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  std::size_t triplets = 0;
  std::vector<double> loss_curve;

  friend bool operator==(const ProjectionMeta&, const ProjectionMeta&) = default;
};

// Linear map R^d -> R^p followed by L2 normalization. Weights are row-major
// p x d and start as rows 0..p-1 of the d x d identity.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t input_dim, std::size_t output_dim, double margin = 1.0);
  ProjectionHead(std::size_t input_dim, std::size_t output_dim, std::vector<double> weights,
                 double margin);

  std::size_t input_dim() const noexcept { return d_; }
  std::size_t output_dim() const noexcept { return p_; }
  double margin() const noexcept { return margin_; }
  std::span<const double> weights() const noexcept { return w_; }
  std::span<double> weights() noexcept { return w_; }

  // W x, unnormalized. Throws DimensionMismatch.
  Vector linear(std::span<const double> x) const;
  // Normalized W x (zero vector when W x = 0).
  Vector forward(std::span<const double> x) const;

  ProjectionMeta meta;
  Json embedder = Json::object();  // base embedder the head was trained over

  friend bool operator==(const ProjectionHead& a, const ProjectionHead& b) {
    return a.d_ == b.d_ && a.p_ == b.p_ && a.margin_ == b.margin_ && a.w_ == b.w_ &&
           a.meta == b.meta && a.embedder == b.embedder;
  }

 private:
  std::size_t d_ = 0;
  std::size_t p_ = 0;
  double margin_ = 1.0;
  std::vector<double> w_;
};

Json to_json(const ProjectionHead& head);
ProjectionHead projection_from_json(const Json& doc, std::string_view where);

// max(0, a.n - a.p + margin) over already-normalized vectors.
double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin) noexcept;

struct Triplet {
  std::string anchor;
  std::string positive;
  std::string negative;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TierMember {
  std::string problem_id;
  double length = 0.0;
  int tier = 0;
};

// Anchors cycle over every member whose tier has at least two members, in
// problem_id order. The positive is uniform among the `nearest` same-tier
// members closest in length; the negative picks one of the other tiers
// uniformly, then a uniform member of it. Throws InsufficientCluster if a tier
// in [0, k) is empty or no tier can supply a positive.
std::vector<Triplet> sample_triplets(std::span<const TierMember> members, int k, std::size_t count,
                                     std::uint64_t seed, std::size_t nearest = 5);

struct TripletVectors {
  Vector anchor;
  Vector positive;
  Vector negative;
};

// Mean triplet loss of the batch through the head; accumulates d(mean)/dW into
// `gradient` (p x d row-major, overwritten) when non-null.
double mean_triplet_loss(const ProjectionHead& head, std::span<const TripletVectors> batch,
                         std::vector<double>* gradient = nullptr);

// Mini-batch gradient descent on the mean triplet loss. Batches are reshuffled
// every epoch from `config.seed`. Returns the per-epoch mean loss (also kept
// in head.meta). Throws NonFiniteLoss.
std::vector<double> train_projection(ProjectionHead& head, std::span<const TripletVectors> triplets,
                                     const ProjectionTrainConfig& config);

}  // namespace coderoute
