#include <catch2/catch_amalgamated.hpp>

#include "divrep/discovery.hpp"
#include "divrep/records.hpp"
#include "divrep/sim_backends.hpp"

using namespace divrep;

namespace {

RgbImage solid(int w, int h, unsigned char value) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(w) * h * 3, value);
  return img;
}

ImageHandle raster_handle(const RgbImage& img, ModelTag tag) {
  ImageHandle h;
  h.raster = encode_ppm(img);
  h.id = sha256_hex(h.raster);
  h.model_tag = tag;
  return h;
}

// Text backend scripted to return a fixed reply, for dedup contract tests.
class ScriptedText : public TextBackend {
 public:
  explicit ScriptedText(std::string reply) : reply_(std::move(reply)) {}
  int calls = 0;

 protected:
  std::string do_generate(const std::vector<ChatMessage>&, const BackendConfig&) override {
    ++calls;
    return reply_;
  }

 private:
  std::string reply_;
};

class FailingText : public TextBackend {
 protected:
  std::string do_generate(const std::vector<ChatMessage>&, const BackendConfig&) override {
    throw AuthError("no key");
  }
};

std::vector<PromptRecord> sim_records(const SimWorld& w, Backends& backends, int n,
                                      const std::string& salt = "p0") {
  std::vector<std::pair<std::string, std::string>> id_texts;
  const auto prompts_list = sim_gen_prompts(w, n, salt);
  for (int i = 0; i < n; ++i) {
    id_texts.emplace_back("p" + std::to_string(i), prompts_list[static_cast<std::size_t>(i)].text());
  }
  return materialize_records(id_texts, backends, 3);
}

}  // namespace

TEST_CASE("build_grid composes rasters with the stated geometry") {
  GridSpec spec;
  spec.cell_px = 16;

  PromptRecord rec;
  rec.id = "r0";
  rec.text = "a prompt";
  for (int i = 0; i < 3; ++i) {
    rec.images_a.push_back(raster_handle(solid(7 + i, 9, 200), model_a));
    rec.images_b.push_back(raster_handle(solid(5, 11 + i, 40), model_b));
  }

  const auto grid = build_grid(rec, spec);
  REQUIRE(grid.has_raster());
  const auto img = decode_ppm(grid.raster);
  REQUIRE(img.width == 3 * 16);   // columns * cell_px
  REQUIRE(img.height == 2 * 16);  // two rows
  // top-left pixel comes from side a, bottom-left from side b
  REQUIRE(static_cast<int>(img.pixels[0]) == 200);
  const std::size_t bottom = (static_cast<std::size_t>(16) * img.width) * 3;
  REQUIRE(static_cast<int>(img.pixels[bottom]) == 40);
  REQUIRE(grid.id == sha256_hex(grid.raster));

  SECTION("a partially missing raster is an error") {
    rec.images_b[1].raster.clear();
    REQUIRE_THROWS_AS(build_grid(rec, spec), MissingRaster);
  }
  SECTION("no images at all is an error") {
    PromptRecord empty;
    empty.id = "e";
    REQUIRE_THROWS_AS(build_grid(empty, spec), MissingRaster);
  }
}

TEST_CASE("build_grid emits a context handle for offline records") {
  auto w = make_world(50, 3, 7, 0.0, 0.0);
  auto backends = make_sim_backends(w);
  const auto rec = materialize_record("p5", w.concepts[0] + " " + w.vocab[5], backends, 3);

  const auto grid = build_grid(rec, GridSpec{});
  const auto ctx = GridContext::try_decode(grid);
  REQUIRE(ctx.has_value());
  REQUIRE(ctx->prompt_id == "p5");
  REQUIRE(ctx->rows.size() == 2);
  REQUIRE(ctx->rows[0].prompt_text == rec.text);
  REQUIRE(ctx->rows[0].tag == model_a);
  REQUIRE(ctx->rows[1].tag == model_b);
}

TEST_CASE("propose_attributes surfaces the planted attribute at the expected frequency") {
  auto w = make_world(120, 3, 19, 0.0, 0.0);
  auto backends = make_sim_backends(w);
  const auto records = sim_records(w, backends, 50);

  // independent oracle: run the proposal rule directly over the same batch
  int expected_hits = 0;
  for (const auto& rec : records) {
    GridContext ctx{rec.id, {{rec.text, model_a}, {rec.text, model_b}}};
    const auto prop = sim_propose_attributes(w, ctx);
    expected_hits += static_cast<int>(
        std::count(prop.model_a.begin(), prop.model_a.end(), w.attribute_token));
  }
  REQUIRE(expected_hits > 0);

  const auto pool = propose_attributes(records, backends, GridSpec{});
  const auto actual_hits = std::count_if(pool.begin(), pool.end(), [&](const RawAttribute& r) {
    return r.text == w.attribute_token;
  });
  REQUIRE(actual_hits == expected_hits);

  // at zero error rate the frequency equals the brute-force trigger count
  int triggering = 0;
  for (const auto& rec : records) {
    if (w.triggers(split_whitespace(rec.text))) ++triggering;
  }
  REQUIRE(actual_hits == triggering);
}

TEST_CASE("dedup_attributes") {
  BackendConfig cfg;
  std::vector<RawAttribute> raw = {{"flames", "p0"}, {"fire", "p1"}, {"flames", "p2"}};

  SECTION("exact duplicates always merge, even without a text model") {
    const auto attrs = dedup_attributes(raw, nullptr, cfg);
    REQUIRE(attrs.size() == 2);
    REQUIRE(attrs[0].text == "flames");
    REQUIRE(attrs[1].text == "fire");
  }
  SECTION("the text model can merge semantic duplicates") {
    ScriptedText merging("* flames\n");
    const auto attrs = dedup_attributes(raw, &merging, cfg);
    REQUIRE(attrs.size() == 1);
    REQUIRE(attrs[0].text == "flames");
  }
  SECTION("outputs are constrained to the input pool") {
    ScriptedText inventing("* flames\n* lens flare\n");
    const auto attrs = dedup_attributes(raw, &inventing, cfg);
    REQUIRE(attrs.size() == 1);  // "lens flare" was invented, dropped
    REQUIRE(attrs[0].text == "flames");
  }
  SECTION("backend failure falls back to exact dedup") {
    FailingText failing;
    const auto attrs = dedup_attributes(raw, &failing, cfg);
    REQUIRE(attrs.size() == 2);
  }
  SECTION("singleton pool passes through unchanged") {
    const auto attrs = dedup_attributes({{"wet streets", "p0"}}, nullptr, cfg);
    REQUIRE(attrs.size() == 1);
    REQUIRE(attrs[0].text == "wet streets");
    REQUIRE_FALSE(attrs[0].over_length);
  }
  SECTION("over-length attributes are kept but flagged") {
    const auto attrs =
        dedup_attributes({{"a very long attribute of many words", "p0"}}, nullptr, cfg);
    REQUIRE(attrs.size() == 1);
    REQUIRE(attrs[0].over_length);
  }
}

TEST_CASE("discover recovers the planted attribute") {
  auto w = make_world(120, 3, 23, 0.0, 0.0);
  auto backends = make_sim_backends(w);
  const auto records = sim_records(w, backends, 120);
  Thresholds th{0.0, 0.05};
  DiscoveryConfig cfg;
  cfg.batch_size = 50;
  cfg.seed = 1;

  const auto ranked = discover(records, th, backends, cfg);
  REQUIRE_FALSE(ranked.empty());
  REQUIRE(ranked[0].text == w.attribute_token);

  SECTION("top score matches the brute-force trigger count") {
    int triggering = 0;
    for (const auto& rec : records) {
      if (w.triggers(split_whitespace(rec.text))) ++triggering;
    }
    const double expected = static_cast<double>(triggering) / records.size();
    REQUIRE_THAT(ranked[0].mean_divergence, Catch::Matchers::WithinAbs(expected, 0.02));
  }
  SECTION("discovery is repeatable with fixed seeds") {
    const auto again = discover(records, th, backends, cfg);
    REQUIRE(again.size() == ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      REQUIRE(again[i].text == ranked[i].text);
      REQUIRE(again[i].mean_divergence == ranked[i].mean_divergence);
    }
  }
}

TEST_CASE("discover stays quiet on distractor records") {
  auto w = make_world(120, 3, 29, 0.0, 0.0);
  auto backends = make_sim_backends(w);

  // same model on both sides, different seeds: no planted signal
  std::vector<PromptRecord> records;
  const auto prompts_list = sim_gen_prompts(w, 60, "distractors");
  for (int i = 0; i < 60; ++i) {
    records.push_back(materialize_record("d" + std::to_string(i),
                                         prompts_list[static_cast<std::size_t>(i)].text(),
                                         backends, 3, {}, model_a, model_a, 3));
  }

  Thresholds th{0.0, 0.05};
  DiscoveryConfig cfg;
  cfg.batch_size = 50;
  const auto ranked = discover(records, th, backends, cfg);
  for (const auto& a : ranked) {
    REQUIRE(a.mean_divergence < 0.05);
  }
}

TEST_CASE("discover tolerates proposal noise") {
  auto w = make_world(120, 3, 31, 0.25, 0.0);
  auto backends = make_sim_backends(w);
  const auto records = sim_records(w, backends, 120);
  Thresholds th{0.0, 0.05};
  DiscoveryConfig cfg;
  cfg.batch_size = 50;

  const auto ranked = discover(records, th, backends, cfg);
  REQUIRE_FALSE(ranked.empty());
  REQUIRE(ranked[0].text == w.attribute_token);
}
