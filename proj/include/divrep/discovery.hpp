#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "divrep/backends.hpp"
#include "divrep/divergence.hpp"
#include "divrep/handles.hpp"
#include "divrep/prompts.hpp"
#include "divrep/raster.hpp"
#include "divrep/rng.hpp"

// Stage 1: batch prompts, build two-row comparison grids, harvest candidate
// attributes from the vision model, deduplicate, and rank.

namespace divrep {

struct GridSpec {
  static constexpr int rows = 2;  // side a on top, side b on the bottom
  int cell_px = 512;
};

struct RawAttribute {
  std::string text;
  std::string source_prompt_id;
};

struct AttributePool {
  std::vector<RawAttribute> raw;
  std::vector<Attribute> deduped;
};

namespace detail {

// The generation prompt a handle was synthesized from, when the handle is an
// offline one; falls back to the record text for raster-backed handles.
inline std::string handle_prompt_text(const ImageHandle& h, const std::string& fallback) {
  if (const auto info = decode_offline_image_id(h.id)) return info->prompt_text;
  return fallback;
}

}  // namespace detail

// Builds the two-row comparison grid for one record. With rasters present the
// result is a composed P6 raster; offline handles produce a context handle
// that names the rows instead.
inline ImageHandle build_grid(const PromptRecord& rec, const GridSpec& spec) {
  if (rec.images_a.empty() || rec.images_b.empty()) {
    throw MissingRaster("record " + rec.id + " has no images to grid");
  }
  std::size_t with_raster = 0;
  for (const auto* side : {&rec.images_a, &rec.images_b}) {
    for (const auto& h : *side) {
      if (h.has_raster()) ++with_raster;
    }
  }
  const std::size_t total = rec.images_a.size() + rec.images_b.size();

  if (with_raster == 0) {
    GridContext ctx;
    ctx.prompt_id = rec.id;
    ctx.rows.push_back({detail::handle_prompt_text(rec.images_a[0], rec.text),
                        rec.images_a[0].model_tag});
    ctx.rows.push_back({detail::handle_prompt_text(rec.images_b[0], rec.text),
                        rec.images_b[0].model_tag});
    return ctx.to_handle();
  }
  if (with_raster != total) {
    throw MissingRaster("record " + rec.id + " is missing rasters for some images");
  }

  std::vector<std::vector<RgbImage>> rows(2);
  for (const auto& h : rec.images_a) rows[0].push_back(decode_ppm(h.raster));
  for (const auto& h : rec.images_b) rows[1].push_back(decode_ppm(h.raster));
  ImageHandle grid;
  grid.raster = encode_ppm(compose_grid(rows, spec.cell_px));
  grid.id = sha256_hex(grid.raster);
  grid.source_prompt_id = rec.id;
  return grid;
}

// Single-row context for captioning one model's image set.
inline ImageHandle build_set_context(const PromptRecord& rec, bool side_a) {
  const auto& side = side_a ? rec.images_a : rec.images_b;
  if (side.empty()) throw MissingRaster("record " + rec.id + " has no images");
  GridContext ctx;
  ctx.prompt_id = rec.id;
  ctx.rows.push_back({detail::handle_prompt_text(side[0], rec.text), side[0].model_tag});
  return ctx.to_handle();
}

// Asks the vision model for per-record attribute lists and aggregates the
// "side a" items. Records whose reply cannot be parsed are logged and
// skipped.
inline std::vector<RawAttribute> propose_attributes(std::span<const PromptRecord> batch,
                                                    Backends& backends, const GridSpec& spec) {
  std::vector<std::vector<RawAttribute>> per_record(batch.size());
  parallel_for(batch.size(), backends.vision_cfg.max_parallel, [&](std::size_t i) {
    const auto& rec = batch[i];
    const auto grid = build_grid(rec, spec);
    const auto reply = with_retries(backends.vision_cfg, [&] {
      return backends.vision->describe_image_grid(
          grid, prompts::attribute_discovery_instruction(rec.text), backends.vision_cfg);
    });
    try {
      const auto sections = parse::attribute_sections(reply);
      for (const auto& item : sections.model_a) {
        per_record[i].push_back({item, rec.id});
      }
    } catch (const ParseError& e) {
      log_warn("attribute reply for " + rec.id + " skipped: " + e.what() +
               "; raw reply: " + reply);
    }
  });
  std::vector<RawAttribute> pool;
  for (auto& items : per_record) {
    for (auto& item : items) pool.push_back(std::move(item));
  }
  return pool;
}

// Exact-string dedup runs first and is the guaranteed floor; the text model
// then merges semantic duplicates, constrained to return a subset of its
// input. Any backend failure falls back to the exact pass.
inline std::vector<Attribute> dedup_attributes(const std::vector<RawAttribute>& raw,
                                               TextBackend* text, const BackendConfig& cfg) {
  std::vector<std::string> unique;
  std::unordered_set<std::string> seen;
  for (const auto& r : raw) {
    const auto canon = normalize_whitespace(to_lower(r.text));
    if (canon.empty()) continue;
    if (seen.insert(canon).second) unique.push_back(normalize_whitespace(r.text));
  }

  std::vector<std::string> kept = unique;
  if (text != nullptr && unique.size() > 1) {
    try {
      BackendConfig dedup_cfg = cfg;
      dedup_cfg.temperature = 0.0;
      const auto reply = with_retries(dedup_cfg, [&] {
        return text->generate_text("", prompts::dedup_prompt(unique), dedup_cfg);
      });
      std::unordered_set<std::string> allowed;
      for (const auto& u : unique) allowed.insert(normalize_whitespace(to_lower(u)));
      std::vector<std::string> filtered;
      std::unordered_set<std::string> emitted;
      for (const auto& item : parse::bullet_items(reply)) {
        const auto canon = normalize_whitespace(to_lower(item));
        if (!allowed.count(canon)) continue;  // the model invented this one
        if (emitted.insert(canon).second) filtered.push_back(normalize_whitespace(item));
      }
      if (!filtered.empty()) kept = filtered;
    } catch (const Error& e) {
      log_warn(std::string("semantic dedup unavailable, exact dedup only: ") + e.what());
    }
  }

  std::vector<Attribute> out;
  out.reserve(kept.size());
  for (const auto& text_value : kept) {
    Attribute a;
    a.text = text_value;
    a.provenance = Provenance::vlm;
    a.over_length = word_count(text_value) > 5;
    out.push_back(std::move(a));
  }
  return out;
}

struct DiscoveryConfig {
  int batch_size = 50;
  GridSpec grid;
  SetAggregation aggregation = SetAggregation::mean;
  std::uint64_t seed = 0;
  // Template applied to attribute text before embedding ("{}" is the slot).
  std::string embed_template = "{}";
};

inline std::string apply_embed_template(const std::string& tmpl, const std::string& attribute) {
  const auto slot = tmpl.find("{}");
  if (slot == std::string::npos) return tmpl + attribute;
  return tmpl.substr(0, slot) + attribute + tmpl.substr(slot + 2);
}

inline void embed_attributes(std::vector<Attribute>& attrs, Backends& backends,
                             const std::string& embed_template) {
  parallel_for(attrs.size(), backends.embed_cfg.max_parallel, [&](std::size_t i) {
    attrs[i].embedding = backends.embed->embed(
        apply_embed_template(embed_template, attrs[i].text), backends.embed_cfg);
  });
}

// End-to-end stage 1: propose on a seeded sample, dedup, then rank against
// the full prompt set. Only attributes with positive mean divergence are
// returned, strongest first.
inline std::vector<Attribute> discover(std::span<const PromptRecord> records,
                                       const Thresholds& th, Backends& backends,
                                       const DiscoveryConfig& cfg) {
  if (records.empty()) return {};
  auto rng = make_rng(cfg.seed, "discover-batch");
  const auto pick = sample_without_replacement(
      rng, records.size(), static_cast<std::size_t>(std::max(1, cfg.batch_size)));
  std::vector<PromptRecord> batch;
  batch.reserve(pick.size());
  for (const auto idx : pick) batch.push_back(records[idx]);

  const auto pool = propose_attributes(batch, backends, cfg.grid);
  auto attrs = dedup_attributes(pool, backends.text.get(), backends.text_cfg);
  embed_attributes(attrs, backends, cfg.embed_template);

  auto ranked = rank_attributes(std::move(attrs), records, th, cfg.aggregation);
  std::erase_if(ranked, [](const Attribute& a) { return a.mean_divergence <= 0.0; });
  return ranked;
}

}  // namespace divrep
