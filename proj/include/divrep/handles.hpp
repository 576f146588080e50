#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "divrep/backends.hpp"
#include "divrep/hash.hpp"

// Encoding rules for the two kinds of handles that exist without a raster:
//
//  * offline image handles: the id is the hex encoding of a tiny JSON record
//    {m, p, s}, so the id is a pure function of (prompt, model, seed) and any
//    consumer can recover the generation context without shared state.
//
//  * grid handles: the payload is a JSON context naming the rows (prompt text
//    plus model tag per row); the id is the content hash of that payload.

namespace divrep {

inline std::string offline_image_id(const std::string& prompt_text, ModelTag tag,
                                    std::int64_t seed) {
  nlohmann::json j{{"m", tag.index}, {"p", prompt_text}, {"s", seed}};
  return to_hex(j.dump());
}

struct OfflineImageInfo {
  std::string prompt_text;
  ModelTag tag;
  std::int64_t seed = 0;
};

inline std::optional<OfflineImageInfo> decode_offline_image_id(const std::string& id) {
  std::string raw;
  try {
    raw = from_hex(id);
  } catch (const Error&) {
    return std::nullopt;
  }
  const auto j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("m") || !j.contains("p") ||
      !j.contains("s")) {
    return std::nullopt;
  }
  OfflineImageInfo info;
  info.prompt_text = j["p"].get<std::string>();
  info.tag = ModelTag{j["m"].get<int>()};
  info.seed = j["s"].get<std::int64_t>();
  return info;
}

struct GridRow {
  std::string prompt_text;
  ModelTag tag;
};

// Context describing what a grid (or single-set) handle shows. Grids carry
// two rows, caption contexts one.
struct GridContext {
  std::string prompt_id;
  std::vector<GridRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
      rows_json.push_back({{"prompt", r.prompt_text}, {"tag", r.tag.index}});
    }
    return {{"kind", "grid-context"}, {"prompt_id", prompt_id}, {"rows", rows_json}};
  }

  ImageHandle to_handle() const {
    ImageHandle h;
    h.raster = to_json().dump();
    h.id = sha256_hex(h.raster);
    h.source_prompt_id = prompt_id;
    return h;
  }

  static std::optional<GridContext> try_decode(const ImageHandle& h) {
    if (h.raster.empty()) return std::nullopt;
    const auto j = nlohmann::json::parse(h.raster, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("kind", "") != "grid-context") {
      return std::nullopt;
    }
    GridContext ctx;
    ctx.prompt_id = j.value("prompt_id", "");
    for (const auto& r : j["rows"]) {
      ctx.rows.push_back({r.value("prompt", ""), ModelTag{r.value("tag", 0)}});
    }
    return ctx;
  }
};

}  // namespace divrep
