#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

#include "coderoute/difficulty.hpp"
#include "coderoute/embedding.hpp"
#include "coderoute/hash.hpp"
#include "coderoute/rng.hpp"

using namespace coderoute;

namespace {

// Reference FNV-1a 64 written out from its published parameters.
std::uint64_t reference_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Bucket counts for a whitespace-tokenized lowercase text.
std::map<std::size_t, double> reference_buckets(const std::vector<std::string>& tokens, std::size_t d) {
  std::map<std::size_t, double> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out[reference_fnv(tokens[i]) % d] += 1.0;
    if (i > 0) out[reference_fnv(tokens[i - 1] + " " + tokens[i]) % d] += 1.0;
  }
  return out;
}

double reference_cosine(const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (const auto& [k, v] : a) {
    aa += v * v;
    if (auto it = b.find(k); it != b.end()) ab += v * it->second;
  }
  for (const auto& [k, v] : b) bb += v * v;
  return ab / std::sqrt(aa * bb);
}

Vector random_unit(SplitMix64& rng, std::size_t n) {
  Vector v(n);
  for (auto& x : v) x = rng.unit() * 2.0 - 1.0;
  normalize(v);
  return v;
}

Vector random_vector(SplitMix64& rng, std::size_t n) {
  Vector v(n);
  for (auto& x : v) x = rng.unit() * 2.0 - 1.0;
  return v;
}

std::vector<TierMember> members_fixture() {
  std::vector<TierMember> m;
  const std::int64_t base[3] = {1000, 7000, 13000};
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 7; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s/%02d", tier_name(3, t).c_str(), i);
      m.push_back({id, static_cast<double>(base[t] + 137 * ((i * 5) % 7)), t});
    }
  }
  return m;
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("tokenize lowercases, splits and truncates") {
  CHECK(tokenize("Hello, World_42 foo-bar", 512) ==
        std::vector<std::string>{"hello", "world", "42", "foo", "bar"});
  CHECK(tokenize("a b c d e", 3) == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize("naïve café", 512) == std::vector<std::string>{"naïve", "café"});
  CHECK(tokenize("  ...  ", 512).empty());
}

TEST_CASE("hashed embedder basics") {
  const HashedEmbedder e(768, 512);
  const auto v = e.embed("Write a function that reverses a list");
  CHECK(v.size() == 768);
  CHECK(v == e.embed("Write a function that reverses a list"));
  CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-12));
  const auto z = e.embed("");
  CHECK(z.size() == 768);
  CHECK(std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; }));
  CHECK(HashedEmbedder::features(std::vector<std::string>{"a", "b", "c"}) ==
        std::vector<std::string>{"a", "b", "c", "a b", "b c"});
}

TEST_CASE("hashed embedding dot products equal the bucket-enumeration oracle") {
  SplitMix64 rng(21);
  for (std::size_t d : {7u, 64u, 768u}) {
    const HashedEmbedder e(d, 512);
    for (int t = 0; t < 40; ++t) {
      std::vector<std::string> ta, tb;
      for (std::uint64_t i = 0, n = 1 + rng.below(12); i < n; ++i) ta.push_back("a" + std::to_string(rng.below(30)));
      for (std::uint64_t i = 0, n = 1 + rng.below(12); i < n; ++i) tb.push_back("b" + std::to_string(rng.below(30)));
      std::string sa, sb;
      for (const auto& s : ta) sa += s + " ";
      for (const auto& s : tb) sb += s + " ";
      const auto va = e.embed(sa);
      const auto vb = e.embed(sb);
      const double want = reference_cosine(reference_buckets(ta, d), reference_buckets(tb, d));
      CHECK(dot(va, vb) == doctest::Approx(want).epsilon(1e-12));
      if (d == 768) CHECK(want < 0.5);  // disjoint vocabularies only meet through collisions
    }
  }
}

TEST_CASE("triplet loss examples") {
  const Vector a{1, 0, 0}, orth{0, 1, 0};
  CHECK(triplet_loss(a, a, orth, 1.0) == 0.0);
  CHECK(triplet_loss(a, orth, a, 1.0) == 2.0);

  SplitMix64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_unit(rng, 5), y = random_unit(rng, 5), z = random_unit(rng, 5);
    double cxz = 0, cxy = 0;
    for (int j = 0; j < 5; ++j) {
      cxz += x[j] * z[j];
      cxy += x[j] * y[j];
    }
    CHECK(std::abs(triplet_loss(x, y, z, 0.7) - std::max(0.0, cxz - cxy + 0.7)) <= 1e-12);
  }
}

TEST_CASE("projection head starts as the identity slice and normalizes") {
  const ProjectionHead head(6, 4);
  const Vector x{1, 2, 3, 4, 5, 6};
  CHECK(head.linear(x) == Vector{1, 2, 3, 4});
  const auto y = head.forward(x);
  CHECK(norm(y) == doctest::Approx(1.0).epsilon(1e-12));
  const auto z = head.forward(Vector{0, 0, 0, 0, 9, 9});
  CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
  CHECK_THROWS_AS(head.linear(Vector{1, 2}), DataError);

  SplitMix64 rng(1);
  ProjectionHead random(6, 4);
  for (auto& w : random.weights()) w = rng.unit() - 0.5;
  for (int i = 0; i < 100; ++i) {
    const auto out = random.forward(random_vector(rng, 6));
    CHECK(std::abs(norm(out) - 1.0) <= 1e-9);
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  SplitMix64 rng(77);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    ProjectionHead head(6, 4, 1.0);
    for (auto& w : head.weights()) w = rng.unit() * 2.0 - 1.0;
    std::vector<TripletVectors> batch;
    for (int i = 0; i < 8; ++i) {
      batch.push_back({random_vector(rng, 6), random_vector(rng, 6), random_vector(rng, 6)});
    }
    std::vector<double> grad;
    mean_triplet_loss(head, batch, &grad);
    double max_err = 0, max_g = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      ProjectionHead plus = head, minus = head;
      plus.weights()[i] += h;
      minus.weights()[i] -= h;
      const double fd = (mean_triplet_loss(plus, batch) - mean_triplet_loss(minus, batch)) / (2 * h);
      max_err = std::max(max_err, std::abs(fd - grad[i]));
      max_g = std::max(max_g, std::abs(fd));
    }
    CHECK(max_err <= 1e-3 * std::max(max_g, 1e-8));
  }
}

TEST_CASE("triplet loss is rotation invariant") {
  SplitMix64 rng(15);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_unit(rng, 3), p = random_unit(rng, 3), n = random_unit(rng, 3);
    const double t = rng.unit() * 6.283, s = rng.unit() * 6.283;
    // Rotation about z then about x.
    auto rot = [&](const Vector& v) {
      const double x1 = std::cos(t) * v[0] - std::sin(t) * v[1];
      const double y1 = std::sin(t) * v[0] + std::cos(t) * v[1];
      const double z1 = v[2];
      return Vector{x1, std::cos(s) * y1 - std::sin(s) * z1, std::sin(s) * y1 + std::cos(s) * z1};
    };
    CHECK(triplet_loss(rot(a), rot(p), rot(n), 1.0) ==
          doctest::Approx(triplet_loss(a, p, n, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("training edge cases") {
  SUBCASE("empty triplet list leaves W unchanged") {
    ProjectionHead head(6, 4);
    const auto before = std::vector<double>(head.weights().begin(), head.weights().end());
    CHECK(train_projection(head, {}, {}).empty());
    CHECK(std::vector<double>(head.weights().begin(), head.weights().end()) == before);
  }
  SUBCASE("inactive hinge gives zero gradient") {
    ProjectionHead head(3, 3);
    std::vector<TripletVectors> batch{{{1, 0, 0}, {1, 0, 0}, {-1, 0, 0}}};
    std::vector<double> grad;
    CHECK(mean_triplet_loss(head, batch, &grad) == 0.0);
    CHECK(std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; }));
    const auto before = std::vector<double>(head.weights().begin(), head.weights().end());
    train_projection(head, batch, {1, 0.1, 1, 0});
    CHECK(std::vector<double>(head.weights().begin(), head.weights().end()) == before);
  }
  SUBCASE("one active step decreases the loss") {
    ProjectionHead head(3, 3);
    std::vector<TripletVectors> batch{{{1, 0.2, 0}, {0, 1, 0.3}, {1, 0.1, 0.1}}};
    const double before = mean_triplet_loss(head, batch);
    REQUIRE(before > 0.0);
    train_projection(head, batch, {1, 0.05, 1, 0});
    CHECK(mean_triplet_loss(head, batch) < before);
  }
  SUBCASE("bad configuration") {
    ProjectionHead head(3, 3);
    CHECK_THROWS_AS(train_projection(head, {}, {1, 0.0, 1, 0}), DataError);
    CHECK_THROWS_AS(train_projection(head, {}, {1, 0.1, 0, 0}), DataError);
  }
  SUBCASE("non-finite input aborts") {
    ProjectionHead head(2, 2);
    std::vector<TripletVectors> batch{{{NAN, 0}, {0, 1}, {1, 0}}};
    try {
      train_projection(head, batch, {1, 0.1, 1, 0});
      FAIL("no throw");
    } catch (const DataError& e) {
      CHECK(e.code() == ErrorCode::NonFiniteLoss);
    }
  }
}

TEST_CASE("training separates disjoint-vocabulary tiers") {
  // Tier vocabularies are disjoint but every prompt also carries shared
  // words, which is what the projection learns to suppress.
  SplitMix64 rng(3);
  const HashedEmbedder e(64, 512);
  std::vector<Vector> xs;
  std::vector<int> tier;
  for (int t = 0; t < 3; ++t) {
    for (int i = 0; i < 12; ++i) {
      std::string text;
      for (int w = 0; w < 6; ++w) text += "t" + std::to_string(t) + "w" + std::to_string(rng.below(10)) + " ";
      for (int w = 0; w < 10; ++w) text += "shared" + std::to_string(rng.below(8)) + " ";
      xs.push_back(e.embed(text));
      tier.push_back(t);
    }
  }
  auto gap = [&](const ProjectionHead& head) {
    double intra = 0, inter = 0;
    int ni = 0, no = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        const double c = dot(head.forward(xs[i]), head.forward(xs[j]));
        if (tier[i] == tier[j]) {
          intra += c;
          ++ni;
        } else {
          inter += c;
          ++no;
        }
      }
    }
    return intra / ni - inter / no;
  };
  std::vector<TripletVectors> triplets;
  for (int r = 0; r < 200; ++r) {
    const auto a = rng.below(xs.size());
    std::size_t p, n;
    do p = rng.below(xs.size()); while (p == a || tier[p] != tier[a]);
    do n = rng.below(xs.size()); while (tier[n] == tier[a]);
    triplets.push_back({xs[a], xs[p], xs[n]});
  }
  ProjectionHead head(64, 16);
  const double before = gap(head);
  const auto curve = train_projection(head, triplets, {20, 0.05, 32, 5});
  CHECK(curve.size() == 20);
  CHECK(curve.back() < curve.front());
  CHECK(gap(head) > before);
}

TEST_CASE("sample_triplets respects tiers and is seed-deterministic") {
  const auto members = members_fixture();
  const auto triplets = sample_triplets(members, 3, 60, 7);
  REQUIRE(triplets.size() == 60);
  std::map<std::string, const TierMember*> by_id;
  for (const auto& m : members) by_id[m.problem_id] = &m;
  for (const auto& t : triplets) {
    CHECK(t.anchor != t.positive);
    CHECK(by_id[t.anchor]->tier == by_id[t.positive]->tier);
    CHECK(by_id[t.anchor]->tier != by_id[t.negative]->tier);
    // Positive is among the 5 nearest in length.
    std::vector<double> dists;
    for (const auto& m : members) {
      if (m.tier == by_id[t.anchor]->tier && m.problem_id != t.anchor) {
        dists.push_back(std::abs(m.length - by_id[t.anchor]->length));
      }
    }
    std::sort(dists.begin(), dists.end());
    CHECK(std::abs(by_id[t.positive]->length - by_id[t.anchor]->length) <= dists[4]);
  }
  // Anchors cycle in problem_id order.
  CHECK(triplets[0].anchor == "easy/00");
  CHECK(triplets[21].anchor == "easy/00");
  CHECK(sample_triplets(members, 3, 60, 7) == triplets);
  CHECK(sample_triplets(members, 3, 60, 8) != triplets);
}

TEST_CASE("sample_triplets frozen fixture") {
  const auto triplets = sample_triplets(members_fixture(), 3, 8, 2024);
  std::string flat;
  for (const auto& t : triplets) flat += t.anchor + "," + t.positive + "," + t.negative + ";";
  // Recorded once from the SplitMix64 stream; any change to sampling order or
  // the generator shows up here.
  CHECK(flat ==
        "easy/00,easy/06,medium/03;easy/01,easy/04,medium/00;easy/02,easy/06,medium/00;"
        "easy/03,easy/00,hard/04;easy/04,easy/02,hard/03;easy/05,easy/02,hard/00;"
        "easy/06,easy/00,hard/01;hard/00,hard/05,easy/03;");
}

TEST_CASE("sample_triplets small tiers") {
  SUBCASE("two-member tier forces the positive") {
    const std::vector<TierMember> m{{"a", 1, 0}, {"b", 2, 0}, {"c", 100, 1}, {"d", 101, 1}};
    for (const auto& t : sample_triplets(m, 2, 8, 1)) {
      if (t.anchor == "a") CHECK(t.positive == "b");
      if (t.anchor == "b") CHECK(t.positive == "a");
    }
  }
  SUBCASE("singleton tier is still a valid negative") {
    const std::vector<TierMember> m{{"a", 1, 0}, {"b", 2, 0}, {"c", 100, 1}, {"d", 101, 1}, {"z", 999, 2}};
    std::set<std::string> negatives, anchors;
    for (const auto& t : sample_triplets(m, 3, 200, 4)) {
      negatives.insert(t.negative);
      anchors.insert(t.anchor);
    }
    CHECK(negatives.count("z") == 1);
    CHECK(anchors.count("z") == 0);
  }
  SUBCASE("empty tier or no pairable tier") {
    const std::vector<TierMember> gap{{"a", 1, 0}, {"b", 2, 0}, {"z", 999, 2}};
    try {
      sample_triplets(gap, 3, 4, 1);
      FAIL("no throw");
    } catch (const DataError& e) {
      CHECK(e.code() == ErrorCode::InsufficientCluster);
      CHECK(e.offenders() == std::vector<std::string>{"medium"});
    }
    const std::vector<TierMember> lonely{{"a", 1, 0}, {"z", 999, 1}};
    CHECK_THROWS_AS(sample_triplets(lonely, 2, 4, 1), DataError);
  }
}

TEST_CASE("projection head round-trips exactly") {
  SplitMix64 rng(44);
  ProjectionHead head(6, 4, 0.75);
  for (auto& w : head.weights()) w = rng.unit() - 0.5;
  head.meta = {20, 0.05, 32, 9, 100, {0.9, 0.5, 1.0 / 3.0}};
  head.embedder = Json{{"provider", "hashed"}, {"dim", 6}, {"max_tokens", 512}};
  fixtures::TempDir dir;
  write_json_file(dir / "projection.json", to_json(head));
  CHECK(projection_from_json(read_artifact(dir / "projection.json", "projection"), "t") == head);
}

TEST_CASE("portable embedding file") {
  fixtures::TempDir dir;
  auto write = [&](const std::vector<std::string>& lines) {
    std::ofstream out(dir / "emb.jsonl", std::ios::binary);
    for (const auto& l : lines) out << l << "\n";
  };
  SUBCASE("loads header and rows") {
    write({R"({"format_version":1,"dim":3,"count":2,"provider_name":"codebert-mean","pooling":"mean"})",
           R"({"problem_id":"p1","vector":[0.5,-1.25,3]})", R"({"problem_id":"p2","vector":[0,0,1e-3]})"});
    const auto emb = ImportedEmbeddings::load(dir / "emb.jsonl");
    CHECK(emb.dim() == 3);
    CHECK(emb.count() == 2);
    CHECK(emb.provider_name() == "codebert-mean");
    CHECK(emb.header()["pooling"] == "mean");
    CHECK(emb.at("p1") == Vector{0.5, -1.25, 3});
    CHECK_FALSE(emb.contains("p3"));
    try {
      (void)emb.at("p3");
      FAIL("no throw");
    } catch (const DataError& e) {
      CHECK(e.code() == ErrorCode::MissingEmbedding);
    }
    emb.save(dir / "copy.jsonl");
    const auto again = ImportedEmbeddings::load(dir / "copy.jsonl");
    CHECK(again.at("p2") == emb.at("p2"));
    CHECK(again.header() == emb.header());
  }
  SUBCASE("dimension mismatch") {
    write({R"({"format_version":1,"dim":3,"count":1,"provider_name":"x"})",
           R"({"problem_id":"p1","vector":[1,2]})"});
    CHECK_THROWS_AS(ImportedEmbeddings::load(dir / "emb.jsonl"), DataError);
  }
  SUBCASE("count mismatch") {
    write({R"({"format_version":1,"dim":2,"count":2,"provider_name":"x"})",
           R"({"problem_id":"p1","vector":[1,2]})"});
    CHECK_THROWS_AS(ImportedEmbeddings::load(dir / "emb.jsonl"), DataError);
  }
  SUBCASE("duplicate id") {
    write({R"({"format_version":1,"dim":2,"count":2,"provider_name":"x"})",
           R"({"problem_id":"p1","vector":[1,2]})", R"({"problem_id":"p1","vector":[1,2]})"});
    try {
      ImportedEmbeddings::load(dir / "emb.jsonl");
      FAIL("no throw");
    } catch (const DataError& e) {
      CHECK(e.code() == ErrorCode::DuplicateKey);
    }
  }
  SUBCASE("foreign version") {
    write({R"({"format_version":2,"dim":2,"count":0,"provider_name":"x"})"});
    try {
      ImportedEmbeddings::load(dir / "emb.jsonl");
      FAIL("no throw");
    } catch (const DataError& e) {
      CHECK(e.code() == ErrorCode::VersionMismatch);
    }
  }
}

TEST_CASE("imported base embedder falls back to hashing for unknown text") {
  auto vectors = std::make_shared<ImportedEmbeddings>(
      4, "enc", std::map<std::string, Vector>{{"p1", {1, 2, 3, 4}}});
  const auto base = BaseEmbedder::imported(vectors);
  CHECK(base.dim() == 4);
  CHECK(base.embed(fixtures::problem("p1")) == Vector{1, 2, 3, 4});
  CHECK_THROWS_AS(base.embed(fixtures::problem("p2")), DataError);
  const auto known = base.embed_text("anything", "p1");
  CHECK_FALSE(known.fell_back);
  CHECK(known.vector == Vector{1, 2, 3, 4});
  const auto adhoc = base.embed_text("reverse a list");
  CHECK(adhoc.fell_back);
  CHECK(adhoc.vector == HashedEmbedder(4).embed("reverse a list"));
}
