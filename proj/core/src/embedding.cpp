#include "coderoute/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "coderoute/difficulty.hpp"
#include "coderoute/hash.hpp"
#include "coderoute/numeric.hpp"
#include "coderoute/rng.hpp"

namespace coderoute {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

void normalize(std::span<double> v) noexcept {
  const double r = norm(v);
  if (r == 0.0) return;
  for (double& x : v) x /= r;
}

// ---------------------------------------------------------------------------
// Hashed provider

std::vector<std::string> tokenize(std::string_view text, std::size_t max_tokens) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (tokens.size() >= max_tokens) break;
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else {
      flush();
    }
  }
  if (tokens.size() < max_tokens) flush();
  return tokens;
}

HashedEmbedder::HashedEmbedder(std::size_t dim, std::size_t max_tokens)
    : dim_(dim), max_tokens_(max_tokens) {
  if (dim_ == 0) throw DataError(ErrorCode::InvalidArgument, "embedding dim must be >= 1");
}

std::vector<std::string> HashedEmbedder::features(std::span<const std::string> tokens) {
  std::vector<std::string> out(tokens.begin(), tokens.end());
  for (std::size_t i = 1; i < tokens.size(); ++i) out.push_back(tokens[i - 1] + " " + tokens[i]);
  return out;
}

std::size_t HashedEmbedder::bucket(std::string_view feature) const noexcept {
  return static_cast<std::size_t>(fnv1a64(feature) % dim_);
}

Vector HashedEmbedder::embed(std::string_view text) const {
  Vector v(dim_, 0.0);
  const auto tokens = tokenize(text, max_tokens_);
  for (const auto& f : features(tokens)) v[bucket(f)] += 1.0;
  normalize(v);
  return v;
}

// ---------------------------------------------------------------------------
// Imported provider

ImportedEmbeddings::ImportedEmbeddings(std::size_t dim, std::string provider_name,
                                       std::map<std::string, Vector> rows, Json header)
    : dim_(dim), provider_name_(std::move(provider_name)), header_(std::move(header)) {
  for (auto& [id, vec] : rows) {
    if (vec.size() != dim_) {
      throw DataError(ErrorCode::SchemaError, "imported embedding has wrong dimension", {id});
    }
    rows_.emplace(id, std::move(vec));
  }
}

ImportedEmbeddings ImportedEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::IoError, "cannot open " + path.string());
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) throw DataError(ErrorCode::SchemaError, where + ": missing header");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(ErrorCode::SchemaError, where + ": bad header: " + e.what());
  }
  const int version = require<int>(header, "format_version", where);
  if (version != kFormatVersion) {
    throw DataError(ErrorCode::VersionMismatch,
                    where + ": format_version " + std::to_string(version));
  }
  const auto dim = require<std::size_t>(header, "dim", where);
  const auto count = require<std::size_t>(header, "count", where);
  const auto name = require<std::string>(header, "provider_name", where);

  std::map<std::string, Vector> rows;
  OffenderList bad(ErrorCode::MalformedLine);
  OffenderList dups(ErrorCode::DuplicateKey);
  OffenderList shape(ErrorCode::SchemaError);
  std::size_t line_no = 1;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++seen;
    const std::string at = path.filename().string() + ":" + std::to_string(line_no);
    Json row;
    try {
      row = Json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      bad.add(at);
      continue;
    }
    if (!row.is_object() || !row.contains("problem_id") || !row.contains("vector") ||
        !row["problem_id"].is_string() || !row["vector"].is_array()) {
      bad.add(at);
      continue;
    }
    Vector vec;
    bool ok = true;
    for (const auto& x : row["vector"]) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        ok = false;
        break;
      }
      vec.push_back(x.get<double>());
    }
    if (!ok || vec.size() != dim) {
      shape.add(at);
      continue;
    }
    auto id = row["problem_id"].get<std::string>();
    if (rows.count(id)) {
      dups.add(id);
      continue;
    }
    rows.emplace(std::move(id), std::move(vec));
  }
  bad.throw_if_any(where);
  shape.throw_if_any(where + ": vectors must be finite with length dim");
  dups.throw_if_any(where);
  if (seen != count) {
    throw DataError(ErrorCode::SchemaError, where + ": header count " + std::to_string(count) +
                                                " but " + std::to_string(seen) + " rows");
  }
  return ImportedEmbeddings(dim, name, std::move(rows), std::move(header));
}

void ImportedEmbeddings::save(const std::filesystem::path& path) const {
  Json header = header_;
  header["format_version"] = kFormatVersion;
  header["dim"] = dim_;
  header["count"] = rows_.size();
  header["provider_name"] = provider_name_;
  std::string text = header.dump() + "\n";
  for (const auto& [id, vec] : rows_) {
    text += Json{{"problem_id", id}, {"vector", vec}}.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

bool ImportedEmbeddings::contains(std::string_view problem_id) const {
  return rows_.find(problem_id) != rows_.end();
}

const Vector& ImportedEmbeddings::at(std::string_view problem_id) const {
  auto it = rows_.find(problem_id);
  if (it == rows_.end()) {
    throw DataError(ErrorCode::MissingEmbedding, "no imported vector", {std::string(problem_id)});
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// BaseEmbedder

std::string_view provider_name(EmbedderProvider p) {
  return p == EmbedderProvider::Imported ? "imported" : "hashed";
}

std::optional<EmbedderProvider> parse_provider(std::string_view name) {
  if (name == "hashed") return EmbedderProvider::Hashed;
  if (name == "imported") return EmbedderProvider::Imported;
  return std::nullopt;
}

BaseEmbedder::BaseEmbedder(EmbedderProvider provider, HashedEmbedder hashed,
                           std::shared_ptr<const ImportedEmbeddings> vectors)
    : provider_(provider), hashed_(hashed), vectors_(std::move(vectors)) {}

BaseEmbedder BaseEmbedder::hashed(std::size_t dim, std::size_t max_tokens) {
  return BaseEmbedder(EmbedderProvider::Hashed, HashedEmbedder(dim, max_tokens), nullptr);
}

BaseEmbedder BaseEmbedder::imported(std::shared_ptr<const ImportedEmbeddings> vectors,
                                    std::size_t max_tokens) {
  if (!vectors) throw DataError(ErrorCode::InvalidArgument, "imported provider without vectors");
  const auto dim = vectors->dim();
  return BaseEmbedder(EmbedderProvider::Imported, HashedEmbedder(dim, max_tokens), std::move(vectors));
}

Vector BaseEmbedder::embed(const Problem& problem) const {
  if (provider_ == EmbedderProvider::Imported) return vectors_->at(problem.problem_id);
  return hashed_.embed(problem.prompt);
}

TextEmbedding BaseEmbedder::embed_text(std::string_view text,
                                       std::optional<std::string_view> problem_id) const {
  if (provider_ == EmbedderProvider::Imported) {
    if (problem_id && vectors_->contains(*problem_id)) {
      return {vectors_->at(*problem_id), EmbedderProvider::Imported, false};
    }
    return {hashed_.embed(text), EmbedderProvider::Hashed, true};
  }
  return {hashed_.embed(text), EmbedderProvider::Hashed, false};
}

Json BaseEmbedder::describe() const {
  Json j = {{"provider", std::string(provider_name(provider_))},
            {"dim", dim()},
            {"max_tokens", max_tokens()}};
  if (vectors_) j["provider_name"] = vectors_->provider_name();
  return j;
}

// ---------------------------------------------------------------------------
// Projection head

ProjectionHead::ProjectionHead(std::size_t input_dim, std::size_t output_dim, double margin)
    : d_(input_dim), p_(output_dim), margin_(margin), w_(input_dim * output_dim, 0.0) {
  if (d_ == 0 || p_ == 0) throw DataError(ErrorCode::InvalidArgument, "projection dims must be >= 1");
  if (!(margin_ > 0.0)) throw DataError(ErrorCode::InvalidArgument, "margin must be > 0");
  for (std::size_t i = 0; i < std::min(d_, p_); ++i) w_[i * d_ + i] = 1.0;
}

ProjectionHead::ProjectionHead(std::size_t input_dim, std::size_t output_dim,
                               std::vector<double> weights, double margin)
    : d_(input_dim), p_(output_dim), margin_(margin), w_(std::move(weights)) {
  if (d_ == 0 || p_ == 0) throw DataError(ErrorCode::InvalidArgument, "projection dims must be >= 1");
  if (w_.size() != d_ * p_) {
    throw DataError(ErrorCode::DimensionMismatch, "projection weights are not p x d");
  }
  if (!(margin_ > 0.0)) throw DataError(ErrorCode::InvalidArgument, "margin must be > 0");
}

Vector ProjectionHead::linear(std::span<const double> x) const {
  if (x.size() != d_) {
    throw DataError(ErrorCode::DimensionMismatch, "projection input has length " +
                                                      std::to_string(x.size()) + ", expected " +
                                                      std::to_string(d_));
  }
  Vector y(p_, 0.0);
  for (std::size_t r = 0; r < p_; ++r) {
    y[r] = dot(std::span<const double>(w_.data() + r * d_, d_), x);
  }
  return y;
}

Vector ProjectionHead::forward(std::span<const double> x) const {
  Vector y = linear(x);
  normalize(y);
  return y;
}

Json to_json(const ProjectionHead& head) {
  Json doc = make_artifact("projection");
  doc["d"] = head.input_dim();
  doc["p"] = head.output_dim();
  doc["margin"] = head.margin();
  doc["W"] = std::vector<double>(head.weights().begin(), head.weights().end());
  doc["training"] = {{"epochs", head.meta.epochs},     {"lr", head.meta.lr},
                     {"batch", head.meta.batch},       {"seed", head.meta.seed},
                     {"triplets", head.meta.triplets}, {"loss_curve", head.meta.loss_curve}};
  doc["embedder"] = head.embedder;
  return doc;
}

ProjectionHead projection_from_json(const Json& doc, std::string_view where) {
  check_artifact(doc, "projection", where);
  ProjectionHead head(require<std::size_t>(doc, "d", where), require<std::size_t>(doc, "p", where),
                      require<std::vector<double>>(doc, "W", where),
                      require<double>(doc, "margin", where));
  if (doc.contains("training")) {
    const auto& t = doc["training"];
    head.meta.epochs = optional_field<int>(t, "epochs", 0, where);
    head.meta.lr = optional_field<double>(t, "lr", 0.0, where);
    head.meta.batch = optional_field<std::size_t>(t, "batch", 0, where);
    head.meta.seed = optional_field<std::uint64_t>(t, "seed", 0, where);
    head.meta.triplets = optional_field<std::size_t>(t, "triplets", 0, where);
    head.meta.loss_curve = optional_field<std::vector<double>>(t, "loss_curve", {}, where);
  }
  head.embedder = optional_field<Json>(doc, "embedder", Json::object(), where);
  return head;
}

// ---------------------------------------------------------------------------
// Triplets

double triplet_loss(std::span<const double> a, std::span<const double> p,
                    std::span<const double> n, double margin) noexcept {
  const double h = dot(a, n) - dot(a, p) + margin;
  // NaN must survive so training can report it.
  return std::isnan(h) || h > 0.0 ? h : 0.0;
}

std::vector<Triplet> sample_triplets(std::span<const TierMember> members, int k, std::size_t count,
                                     std::uint64_t seed, std::size_t nearest) {
  if (k < 2) throw DataError(ErrorCode::InsufficientCluster, "triplets need at least two tiers");
  std::vector<std::vector<const TierMember*>> tiers(static_cast<std::size_t>(k));
  for (const auto& m : members) {
    if (m.tier < 0 || m.tier >= k) {
      throw DataError(ErrorCode::InvalidArgument, "tier out of range", {m.problem_id});
    }
    tiers[static_cast<std::size_t>(m.tier)].push_back(&m);
  }
  for (int t = 0; t < k; ++t) {
    if (tiers[static_cast<std::size_t>(t)].empty()) {
      throw DataError(ErrorCode::InsufficientCluster, "empty tier", {tier_name(k, t)});
    }
  }
  auto by_id = [](const TierMember* a, const TierMember* b) { return a->problem_id < b->problem_id; };
  for (auto& tier : tiers) std::sort(tier.begin(), tier.end(), by_id);

  std::vector<const TierMember*> anchors;
  for (const auto& m : members) {
    if (tiers[static_cast<std::size_t>(m.tier)].size() >= 2) anchors.push_back(&m);
  }
  if (anchors.empty()) {
    throw DataError(ErrorCode::InsufficientCluster, "no tier has two members to pair");
  }
  std::sort(anchors.begin(), anchors.end(), by_id);

  SplitMix64 rng(seed);
  std::vector<Triplet> out;
  out.reserve(count);
  std::vector<const TierMember*> candidates;
  for (std::size_t t = 0; t < count; ++t) {
    const TierMember& anchor = *anchors[t % anchors.size()];
    const auto& own = tiers[static_cast<std::size_t>(anchor.tier)];

    candidates.clear();
    for (const auto* m : own) {
      if (m != &anchor) candidates.push_back(m);
    }
    std::sort(candidates.begin(), candidates.end(), [&](const TierMember* a, const TierMember* b) {
      const double da = std::fabs(a->length - anchor.length);
      const double db = std::fabs(b->length - anchor.length);
      if (da != db) return da < db;
      return a->problem_id < b->problem_id;
    });
    const std::size_t pool = std::min(std::max<std::size_t>(nearest, 1), candidates.size());
    const TierMember& positive = *candidates[rng.below(pool)];

    auto other = static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
    if (other >= anchor.tier) ++other;
    const auto& neg_tier = tiers[static_cast<std::size_t>(other)];
    const TierMember& negative = *neg_tier[rng.below(neg_tier.size())];

    out.push_back({anchor.problem_id, positive.problem_id, negative.problem_id});
  }
  return out;
}

namespace {

// d(loss)/dy for y -> y/|y|, given d(loss)/du at u = y/|y|.
void backprop_normalize(std::span<const double> y, std::span<const double> grad_u,
                        std::span<double> grad_y) {
  const double r = norm(y);
  if (r == 0.0) {
    std::fill(grad_y.begin(), grad_y.end(), 0.0);
    return;
  }
  double ug = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ug += (y[i] / r) * grad_u[i];
  for (std::size_t i = 0; i < y.size(); ++i) grad_y[i] = (grad_u[i] - (y[i] / r) * ug) / r;
}

}  // namespace

double mean_triplet_loss(const ProjectionHead& head, std::span<const TripletVectors> batch,
                         std::vector<double>* gradient) {
  const std::size_t p = head.output_dim();
  const std::size_t d = head.input_dim();
  if (gradient) gradient->assign(p * d, 0.0);
  if (batch.empty()) return 0.0;

  CompensatedSum total;
  Vector ga(p), gp(p), gn(p), dy(p);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const Vector ya = head.linear(t.anchor);
    const Vector yp = head.linear(t.positive);
    const Vector yn = head.linear(t.negative);
    Vector ua = ya, up = yp, un = yn;
    normalize(ua);
    normalize(up);
    normalize(un);
    const double loss = triplet_loss(ua, up, un, head.margin());
    total.add(loss);
    if (!gradient || loss <= 0.0) continue;

    for (std::size_t i = 0; i < p; ++i) {
      ga[i] = un[i] - up[i];
      gp[i] = -ua[i];
      gn[i] = ua[i];
    }
    auto accumulate = [&](const Vector& y, const Vector& gu, const Vector& x) {
      backprop_normalize(y, gu, dy);
      for (std::size_t r = 0; r < p; ++r) {
        const double g = dy[r] * scale;
        if (g == 0.0) continue;
        double* row = gradient->data() + r * d;
        for (std::size_t c = 0; c < d; ++c) row[c] += g * x[c];
      }
    };
    accumulate(ya, ga, t.anchor);
    accumulate(yp, gp, t.positive);
    accumulate(yn, gn, t.negative);
  }
  return total.value() * scale;
}

std::vector<double> train_projection(ProjectionHead& head, std::span<const TripletVectors> triplets,
                                     const ProjectionTrainConfig& config) {
  if (!(config.lr > 0.0)) throw DataError(ErrorCode::InvalidArgument, "lr must be > 0");
  if (config.batch == 0) throw DataError(ErrorCode::InvalidArgument, "batch must be >= 1");
  head.meta.epochs = config.epochs;
  head.meta.lr = config.lr;
  head.meta.batch = config.batch;
  head.meta.seed = config.seed;
  head.meta.triplets = triplets.size();
  head.meta.loss_curve.clear();
  if (triplets.empty()) return {};

  SplitMix64 rng(config.seed);
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TripletVectors> batch;
  std::vector<double> grad;
  auto w = head.weights();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    CompensatedSum epoch_loss;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(triplets[order[i]]);
      const double loss = mean_triplet_loss(head, batch, &grad);
      if (!std::isfinite(loss)) {
        throw DataError(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch at " +
                                                      std::to_string(start) +
                                                      ": loss is not finite");
      }
      epoch_loss.add(loss * static_cast<double>(end - start));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.lr * grad[i];
    }
    head.meta.loss_curve.push_back(epoch_loss.value() / static_cast<double>(order.size()));
  }
  return head.meta.loss_curve;
}

}  // namespace coderoute
