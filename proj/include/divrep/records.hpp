#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divrep/backends.hpp"
#include "divrep/divergence.hpp"

namespace divrep {

// Synthesizes and embeds both models' images for one prompt. Seeds follow the
// fixed per-side convention so reruns address the same cache entries.
inline PromptRecord materialize_record(const std::string& id, const std::string& text,
                                       Backends& backends, int images_per_prompt,
                                       Origin origin = {},
                                       ModelTag side_a = model_a, ModelTag side_b = model_b,
                                       std::int64_t side_b_seed_offset = 0) {
  std::vector<std::int64_t> seeds;
  for (int i = 0; i < images_per_prompt; ++i) seeds.push_back(i);
  std::vector<std::int64_t> seeds_b;
  for (int i = 0; i < images_per_prompt; ++i) seeds_b.push_back(i + side_b_seed_offset);

  PromptRecord rec;
  rec.id = id;
  rec.text = text;
  rec.origin = origin;
  rec.images_a = backends.image->synthesize_images(text, side_a, images_per_prompt, seeds,
                                                   backends.image_cfg(side_a));
  rec.images_b = backends.image->synthesize_images(text, side_b, images_per_prompt, seeds_b,
                                                   backends.image_cfg(side_b));
  for (const auto& h : rec.images_a) {
    rec.emb_a.push_back(backends.embed->embed(h, backends.embed_cfg));
  }
  for (const auto& h : rec.images_b) {
    rec.emb_b.push_back(backends.embed->embed(h, backends.embed_cfg));
  }
  return rec;
}

// Fans record materialization out across prompts; failed prompts are skipped
// with a warning rather than aborting the batch.
inline std::vector<PromptRecord> materialize_records(
    const std::vector<std::pair<std::string, std::string>>& id_texts, Backends& backends,
    int images_per_prompt, Origin origin = {}) {
  std::vector<PromptRecord> out(id_texts.size());
  std::vector<char> ok(id_texts.size(), 0);
  parallel_for(id_texts.size(), backends.embed_cfg.max_parallel, [&](std::size_t i) {
    try {
      out[i] = materialize_record(id_texts[i].first, id_texts[i].second, backends,
                                  images_per_prompt, origin);
      ok[i] = 1;
    } catch (const ContentRefused& e) {
      log_warn("prompt refused by service, dropped: " + id_texts[i].first + ": " + e.what());
    }
  });
  std::vector<PromptRecord> kept;
  kept.reserve(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (ok[i]) kept.push_back(std::move(out[i]));
  }
  return kept;
}

}  // namespace divrep
