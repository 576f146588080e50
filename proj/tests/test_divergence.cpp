#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "divrep/divergence.hpp"

using namespace divrep;

namespace {

Embedding basis(std::size_t dim, std::size_t idx) {
  Embedding e;
  e.v.assign(dim, 0.0);
  e.v[idx] = 1.0;
  e.normalized = true;
  return e;
}

// Unit vector with a prescribed cosine against basis(dim, 0).
Embedding with_cos(double c) {
  Embedding e;
  e.v = {c, std::sqrt(1.0 - c * c), 0.0};
  e.normalized = true;
  return e;
}

PromptRecord record_with_sims(std::vector<double> sims_a, std::vector<double> sims_b) {
  PromptRecord rec;
  rec.id = "r";
  rec.text = "r";
  for (double s : sims_a) rec.emb_a.push_back(with_cos(s));
  for (double s : sims_b) rec.emb_b.push_back(with_cos(s));
  return rec;
}

Attribute attr3() {
  Attribute a;
  a.text = "attr";
  a.embedding = basis(3, 0);
  return a;
}

Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Embedding e;
  e.v.resize(dim);
  for (auto& x : e.v) x = gauss(rng);
  normalize(e);
  return e;
}

}  // namespace

TEST_CASE("cosine on hand-computed values") {
  Embedding u{{1, 2, 3}, false};
  Embedding v{{4, 5, 6}, false};
  // 32 / (sqrt(14) * sqrt(77))
  const double expected = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
  REQUIRE_THAT(cosine(u, v), Catch::Matchers::WithinAbs(expected, 1e-12));
  REQUIRE_THAT(cosine(u, v), Catch::Matchers::WithinAbs(0.97463, 1e-5));

  SECTION("orthonormal basis vectors give zero") {
    REQUIRE(cosine(basis(4, 1), basis(4, 2)) == 0.0);
  }
  SECTION("identical vector gives one") {
    REQUIRE_THAT(cosine(u, u), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("dim mismatch throws") {
    Embedding w{{1, 0}, false};
    REQUIRE_THROWS_AS(cosine(u, w), DimMismatch);
  }
  SECTION("normalized inputs reduce to the dot product") {
    Embedding nu = u, nv = v;
    normalize(nu);
    normalize(nv);
    REQUIRE_THAT(cosine(nu, nv), Catch::Matchers::WithinAbs(expected, 1e-12));
  }
}

TEST_CASE("set_similarity aggregates per-image cosines") {
  auto a = attr3();
  SECTION("single image equals plain cosine") {
    std::vector<Embedding> imgs = {with_cos(0.37)};
    REQUIRE_THAT(set_similarity(a.embedding, imgs), Catch::Matchers::WithinAbs(0.37, 1e-12));
  }
  SECTION("mean of 0.1, 0.2, 0.3 is 0.2") {
    std::vector<Embedding> imgs = {with_cos(0.1), with_cos(0.2), with_cos(0.3)};
    REQUIRE_THAT(set_similarity(a.embedding, imgs), Catch::Matchers::WithinAbs(0.2, 1e-12));
  }
  SECTION("max aggregation picks the largest") {
    std::vector<Embedding> imgs = {with_cos(0.1), with_cos(0.5), with_cos(0.3)};
    REQUIRE_THAT(set_similarity(a.embedding, imgs, SetAggregation::max),
                 Catch::Matchers::WithinAbs(0.5, 1e-12));
  }
  SECTION("empty set throws") {
    std::vector<Embedding> imgs;
    REQUIRE_THROWS_AS(set_similarity(a.embedding, imgs), EmptySet);
  }
}

TEST_CASE("divergence indicator matches the stated threshold cases") {
  Thresholds th{0.2, 0.05};
  REQUIRE(divergence_indicator(0.30, 0.10, th) == 1);
  REQUIRE(divergence_indicator(0.30, 0.27, th) == 0);  // gap 0.03 <= 0.05
  REQUIRE(divergence_indicator(0.15, -1.0, th) == 0);  // presence fails
  SECTION("strict inequalities") {
    REQUIRE(divergence_indicator(0.2, 0.0, th) == 0);       // s_a == t
    REQUIRE(divergence_indicator(0.30, 0.25, th) == 0);     // gap == delta
    REQUIRE(divergence_indicator(0.2000001, 0.0, th) == 1);
  }
}

TEST_CASE("divergence_score over records") {
  Thresholds th{0.2, 0.05};
  auto a = attr3();
  auto rec = record_with_sims({0.30, 0.30, 0.30}, {0.10, 0.10, 0.10});
  REQUIRE(divergence_score(a, rec, th) == 1);

  auto rec2 = record_with_sims({0.30}, {0.27});
  REQUIRE(divergence_score(a, rec2, th) == 0);

  PromptRecord empty;
  empty.id = "e";
  REQUIRE_THROWS_AS(divergence_score(a, empty, th), EmptySet);
}

TEST_CASE("multi-model divergence") {
  Thresholds th{0.2, 0.05};
  auto a = attr3();

  SECTION("two sets reduce to the pairwise score") {
    std::vector<std::vector<Embedding>> sets = {{with_cos(0.30)}, {with_cos(0.10)}};
    auto rec = record_with_sims({0.30}, {0.10});
    REQUIRE(divergence_score_multi(a, sets, th) == divergence_score(a, rec, th));
  }
  SECTION("gap is measured against the strongest competitor") {
    std::vector<std::vector<Embedding>> sets = {{with_cos(0.4)}, {with_cos(0.1)}, {with_cos(0.38)}};
    REQUIRE(divergence_score_multi(a, sets, th) == 0);  // gap to max competitor 0.02
  }
  SECTION("clear margin over every competitor scores 1") {
    std::vector<std::vector<Embedding>> sets = {{with_cos(0.4)}, {with_cos(0.2)}, {with_cos(0.15)}};
    REQUIRE(divergence_score_multi(a, sets, th) == 1);
  }
  SECTION("fewer than two sets throws") {
    std::vector<std::vector<Embedding>> sets = {{with_cos(0.4)}};
    REQUIRE_THROWS_AS(divergence_score_multi(a, sets, th), EmptySet);
  }
}

TEST_CASE("classify_diverging uses a strict per-pair majority") {
  Thresholds th{0.2, 0.05};
  auto a = attr3();

  auto make = [&](std::vector<int> pair_z) {
    // pair_z[i] == 1 -> (0.30, 0.10); else (0.10, 0.10)
    std::vector<double> sa, sb;
    for (int z : pair_z) {
      sa.push_back(z ? 0.30 : 0.10);
      sb.push_back(0.10);
    }
    return record_with_sims(sa, sb);
  };

  SECTION("n=3 with two diverging pairs is diverging") {
    std::vector<PromptRecord> recs = {make({1, 1, 0})};
    auto part = classify_diverging(a, recs, th);
    REQUIRE(part.div == std::vector<std::size_t>{0});
    REQUIRE(part.non.empty());
  }
  SECTION("n=3 with one diverging pair is not") {
    std::vector<PromptRecord> recs = {make({1, 0, 0})};
    auto part = classify_diverging(a, recs, th);
    REQUIRE(part.div.empty());
    REQUIRE(part.non == std::vector<std::size_t>{0});
  }
  SECTION("even split is non-diverging (strict majority)") {
    std::vector<PromptRecord> recs = {make({1, 0})};
    auto part = classify_diverging(a, recs, th);
    REQUIRE(part.div.empty());
    REQUIRE(part.non.size() == 1);
  }
  SECTION("ragged image counts throw") {
    std::vector<PromptRecord> recs = {make({1, 1, 0}), make({1, 0})};
    REQUIRE_THROWS_AS(classify_diverging(a, recs, th), RaggedRecord);
  }
  SECTION("partition is exhaustive and disjoint") {
    std::mt19937_64 rng(17);
    std::vector<PromptRecord> recs;
    for (int i = 0; i < 40; ++i) {
      std::vector<int> z;
      for (int k = 0; k < 3; ++k) z.push_back(rng() % 2 ? 1 : 0);
      recs.push_back(make(z));
      recs.back().id = "r" + std::to_string(i);
    }
    auto part = classify_diverging(a, recs, th);
    REQUIRE(part.div.size() + part.non.size() == recs.size());
    std::vector<std::size_t> all = part.div;
    all.insert(all.end(), part.non.begin(), part.non.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
  }
}

TEST_CASE("rank_attributes sorts by mean divergence with lexicographic ties") {
  Thresholds th{0.2, 0.05};
  std::vector<PromptRecord> recs;
  for (int i = 0; i < 4; ++i) {
    recs.push_back(record_with_sims({0.30, 0.30, 0.30}, {0.10, 0.10, 0.10}));
    recs.back().id = "r" + std::to_string(i);
  }

  Attribute always = attr3();
  always.text = "always";
  Attribute never;
  never.text = "never";
  never.embedding = basis(3, 2);  // orthogonal to every image
  Attribute always2 = attr3();
  always2.text = "also-always";

  auto ranked = rank_attributes({always, never, always2}, recs, th);
  REQUIRE(ranked.size() == 3);
  REQUIRE(ranked[0].text == "also-always");  // tie with "always", lexicographic
  REQUIRE(ranked[0].mean_divergence == 1.0);
  REQUIRE(ranked[1].text == "always");
  REQUIRE(ranked[1].mean_divergence == 1.0);
  REQUIRE(ranked[2].text == "never");
  REQUIRE(ranked[2].mean_divergence == 0.0);
}

TEST_CASE("raising thresholds never flips a score to 1") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> sim(-0.2, 0.9);
  std::uniform_real_distribution<double> tdist(-0.1, 0.5);
  std::uniform_real_distribution<double> ddist(0.01, 0.3);
  for (int i = 0; i < 2000; ++i) {
    const double s_a = sim(rng), s_b = sim(rng);
    Thresholds lo{tdist(rng), ddist(rng)};
    Thresholds hi{lo.t + std::abs(tdist(rng)), lo.delta + ddist(rng)};
    REQUIRE(divergence_indicator(s_a, s_b, hi) <= divergence_indicator(s_a, s_b, lo));
  }
}

TEST_CASE("ranking is invariant to pre-normalization scaling of image embeddings") {
  Thresholds th{0.1, 0.05};
  std::mt19937_64 rng(7);
  const std::size_t dim = 6;

  std::vector<PromptRecord> recs, scaled;
  for (int i = 0; i < 10; ++i) {
    PromptRecord rec;
    rec.id = "r" + std::to_string(i);
    for (int k = 0; k < 3; ++k) {
      rec.emb_a.push_back(random_unit(rng, dim));
      rec.emb_b.push_back(random_unit(rng, dim));
    }
    PromptRecord sc = rec;
    for (auto* side : {&sc.emb_a, &sc.emb_b}) {
      for (auto& e : *side) {
        Embedding raw = e;
        for (auto& x : raw.v) x *= 37.5;  // scale, then renormalize
        raw.normalized = false;
        normalize(raw);
        e = raw;
      }
    }
    recs.push_back(rec);
    scaled.push_back(sc);
  }

  std::vector<Attribute> attrs;
  for (int i = 0; i < 5; ++i) {
    Attribute a;
    a.text = "a" + std::to_string(i);
    a.embedding = random_unit(rng, dim);
    attrs.push_back(a);
  }

  auto r1 = rank_attributes(attrs, recs, th);
  auto r2 = rank_attributes(attrs, scaled, th);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    REQUIRE(r1[i].text == r2[i].text);
    REQUIRE_THAT(r1[i].mean_divergence, Catch::Matchers::WithinAbs(r2[i].mean_divergence, 1e-9));
  }
}

TEST_CASE("batch scorer equals the scalar reference") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> tdist(-0.1, 0.4);
  std::uniform_real_distribution<double> ddist(0.01, 0.2);
  const std::size_t dim = 8;

  for (int round = 0; round < 5; ++round) {
    Thresholds th{tdist(rng), ddist(rng)};
    std::vector<PromptRecord> recs;
    for (int i = 0; i < 20; ++i) {
      PromptRecord rec;
      rec.id = "r" + std::to_string(i);
      for (int k = 0; k < 3; ++k) {
        rec.emb_a.push_back(random_unit(rng, dim));
        rec.emb_b.push_back(random_unit(rng, dim));
      }
      recs.push_back(rec);
    }
    std::vector<Attribute> attrs;
    for (int i = 0; i < 10; ++i) {
      Attribute a;
      a.text = "a" + std::to_string(i);
      a.embedding = random_unit(rng, dim);
      attrs.push_back(a);
    }

    const auto agg = round % 2 ? SetAggregation::max : SetAggregation::mean;
    auto batch = divergence_scores_batch(attrs, recs, th, agg);
    for (std::size_t ai = 0; ai < attrs.size(); ++ai) {
      for (std::size_t ri = 0; ri < recs.size(); ++ri) {
        REQUIRE(batch[ai][ri] == divergence_score(attrs[ai], recs[ri], th, agg));
      }
    }
  }
}

TEST_CASE("swap_sides flips the direction of every score") {
  Thresholds th{0.1, 0.05};
  auto a = attr3();
  std::vector<PromptRecord> recs = {record_with_sims({0.5, 0.5, 0.5}, {0.1, 0.1, 0.1})};
  REQUIRE(divergence_score(a, recs[0], th) == 1);
  auto swapped = swap_sides(recs);
  REQUIRE(divergence_score(a, swapped[0], th) == 0);
}
