#pragma once

#include <memory>
#include <string>
#include <vector>

#include "divrep/backends.hpp"
#include "divrep/handles.hpp"
#include "divrep/prompts.hpp"
#include "divrep/sim.hpp"

// Offline implementations of the four capability interfaces. Each request is
// answered from the SimWorld's planted rule; the reply is a deterministic
// function of (world, request), so journaled runs replay byte-for-byte.

namespace divrep {

namespace detail {

// Consecutive "- " bullet lines following the first line that contains the
// marker.
inline std::vector<std::string> bullets_after_marker(const std::string& text,
                                                     const std::string& marker) {
  std::vector<std::string> out;
  bool in_section = false;
  bool collecting = false;
  for (const auto& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (!in_section) {
      if (contains_ci(line, marker)) in_section = true;
      continue;
    }
    const bool is_bullet = line.size() >= 2 && line[0] == '-' && line[1] == ' ';
    if (is_bullet) {
      collecting = true;
      out.push_back(trim(line.substr(2)));
    } else if (collecting || !line.empty()) {
      break;  // section ended
    }
  }
  return out;
}

inline std::string quoted_after(const std::string& text, const std::string& marker) {
  const std::string lower = to_lower(text);
  const auto pos = lower.find(to_lower(marker));
  if (pos == std::string::npos) return {};
  const auto open = text.find('"', pos + marker.size() - 1);
  if (open == std::string::npos) return {};
  const auto close = text.find('"', open + 1);
  if (close == std::string::npos) return {};
  return text.substr(open + 1, close - open - 1);
}

inline std::vector<std::string> single_quoted_strings(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto open = text.find('\'', pos);
    if (open == std::string::npos) break;
    const auto close = text.find('\'', open + 1);
    if (close == std::string::npos) break;
    out.push_back(text.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

inline int first_int_after(const std::string& text, const std::string& marker, int fallback) {
  const std::string lower = to_lower(text);
  const auto pos = lower.find(to_lower(marker));
  if (pos == std::string::npos) return fallback;
  std::size_t i = pos + marker.size();
  while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i >= text.size()) return fallback;
  int value = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    value = value * 10 + (text[i] - '0');
    ++i;
  }
  return value > 0 ? value : fallback;
}

}  // namespace detail

class SimTextBackend : public TextBackend {
 public:
  explicit SimTextBackend(SimWorld world) : world_(std::move(world)) {}

  const SimWorld& world() const { return world_; }

 protected:
  std::string do_generate(const std::vector<ChatMessage>& messages,
                          const BackendConfig& cfg) override;

 private:
  std::string reply_mutation(const std::string& request) const;
  std::string reply_candidates(const std::string& request, const std::string& salt) const;
  std::string reply_dedup(const std::string& request) const;
  std::string reply_judge(const std::string& request) const;
  std::string reply_dataset_pairs(const std::string& request, const std::string& salt) const;
  std::string reply_llm_only(const std::string& request) const;
  std::string reply_visdiff(const std::string& request) const;
  std::string reply_fallback(const std::string& salt) const;

  SimWorld world_;
};

inline std::string SimTextBackend::do_generate(const std::vector<ChatMessage>& messages,
                                               const BackendConfig& cfg) {
  (void)cfg;
  std::string transcript;
  for (const auto& m : messages) transcript += m.role + "\x1f" + m.content + "\x1e";
  const std::string salt = sha256_hex(transcript);
  const std::string& request = messages.back().content;

  if (contains_ci(request, "unintended artifact of")) return reply_mutation(request);
  if (contains_ci(request, "text-2-image prompts which are likely to be diverging")) {
    return reply_candidates(request, salt);
  }
  if (contains_ci(request, "remove semantically equivalent attributes")) {
    return reply_dedup(request);
  }
  if (contains_ci(request, "rate on a scale of 1-3")) return reply_judge(request);
  if (contains_ci(request, "original and altered version")) {
    return reply_dataset_pairs(request, salt);
  }
  if (contains_ci(request, "visual attributes that are present in model A but not in model B")) {
    return reply_llm_only(request);
  }
  if (contains_ci(request, "captioning two groups of images")) return reply_visdiff(request);
  return reply_fallback(salt);
}

inline std::string SimTextBackend::reply_mutation(const std::string& request) const {
  const std::string attribute = detail::quoted_after(request, "unintended artifact of ");
  const auto diverging = detail::bullets_after_marker(request, "Here are the diverging prompts:");
  const auto non_diverging = detail::bullets_after_marker(request, "(non-diverging prompts):");
  const Description d = sim_describe(world_, diverging, non_diverging, attribute);
  return "Thought Process: " + d.thought + "\n\nDescription: " + d.text +
         "\n\nKey Concepts: [" + join(d.key_concepts, ", ") + "]";
}

inline std::string SimTextBackend::reply_candidates(const std::string& request,
                                                    const std::string& salt) const {
  const int k = detail::first_int_after(request, "generate", 25);
  std::vector<std::string> desc_tokens;
  try {
    desc_tokens = parse::description(request).key_concepts;
  } catch (const ParseError&) {
    // no embedded key-concepts list; fall back to vocabulary words in the text
    for (const auto& t : split_whitespace(request)) {
      if (world_.token_index.count(t)) desc_tokens.push_back(t);
    }
  }
  const auto prompts = sim_candidates(world_, desc_tokens, k, salt);
  std::string out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    out += std::to_string(i + 1) + ". " + prompts[i] + "\n";
  }
  return out;
}

inline std::string SimTextBackend::reply_dedup(const std::string& request) const {
  const auto items = detail::bullets_after_marker(request, "Attributes:");
  std::vector<std::string> kept;
  std::unordered_set<std::string> seen;
  for (const auto& it : items) {
    if (seen.insert(normalize_whitespace(to_lower(it))).second) kept.push_back(it);
  }
  std::string out;
  for (const auto& k : kept) out += "* " + k + "\n";
  return out;
}

inline std::string SimTextBackend::reply_judge(const std::string& request) const {
  int rating = 1;
  if (contains_ci(request, "sets of semantic concepts")) {
    const std::string lower = to_lower(request);
    const auto s1 = lower.find("set 1:");
    const auto s2 = lower.find("set 2:");
    if (s1 == std::string::npos || s2 == std::string::npos) {
      throw MalformedResponse("sim judge: concept sets not found in request");
    }
    rating = sim_judge_rating_sets(parse::bracket_list(request, s1),
                                   parse::bracket_list(request, s2));
  } else {
    const std::string first = detail::quoted_after(request, "Attribute 1:");
    const std::string second = detail::quoted_after(request, "Attribute 2:");
    if (first.empty() || second.empty()) {
      throw MalformedResponse("sim judge: attributes not found in request");
    }
    rating = sim_judge_rating(first, second);
  }
  return "<rating>" + std::to_string(rating) + "</rating>";
}

inline std::string SimTextBackend::reply_dataset_pairs(const std::string& request,
                                                       const std::string& salt) const {
  const std::string lower = to_lower(request);
  const auto tuple_pos = lower.find("visual attribute tuple:");
  if (tuple_pos == std::string::npos) {
    throw MalformedResponse("sim dataset: tuple marker not found");
  }
  const auto line_end = request.find('\n', request.find('[', tuple_pos));
  const auto tuple_text = request.substr(
      tuple_pos, (line_end == std::string::npos ? request.size() : line_end) - tuple_pos);
  auto quoted = detail::single_quoted_strings(tuple_text);
  if (quoted.size() < 2) throw MalformedResponse("sim dataset: tuple needs concepts + attribute");
  const std::string attribute = quoted.back();
  quoted.pop_back();
  const std::vector<std::string> concepts = quoted;

  std::vector<std::string> filler_pool;
  for (const auto& t : world_.vocab) {
    if (t == attribute) continue;
    if (std::find(concepts.begin(), concepts.end(), t) != concepts.end()) continue;
    filler_pool.push_back(t);
  }
  if (filler_pool.empty()) throw MalformedResponse("sim dataset: world has no filler tokens");

  std::string out;
  for (int i = 0; i < 5; ++i) {
    auto rng = make_rng(world_.rng_seed, "dataset-pairs", salt + "\x1f" + std::to_string(i));
    std::vector<std::string> tokens;
    const int n_concepts = 1 + static_cast<int>(rand_index(rng, 2));
    for (const auto idx : sample_without_replacement(rng, concepts.size(),
                                                     static_cast<std::size_t>(n_concepts))) {
      tokens.push_back(concepts[idx]);
    }
    for (int f = 0; f < 6; ++f) {
      tokens.push_back(filler_pool[rand_index(rng, filler_pool.size())]);
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    const std::string original = join(tokens, " ");
    const std::string altered = original + " " + attribute;
    out += std::to_string(i + 1) + "a. " + original + "\n";
    out += std::to_string(i + 1) + "b. " + altered + "\n\n";
  }
  return out;
}

inline std::string SimTextBackend::reply_llm_only(const std::string& request) const {
  // Recover the (prompt, caption A, caption B) triples and count tokens that
  // appear on side A but not side B of the same triple.
  struct Triple {
    std::vector<std::string> prompt, cap_a, cap_b;
  };
  std::vector<Triple> triples;
  for (const auto& raw : split_lines(request)) {
    const std::string line = trim(raw);
    if (starts_with_ci(line, "prompt:")) {
      triples.push_back({split_whitespace(line.substr(7)), {}, {}});
    } else if (starts_with_ci(line, "caption a:") && !triples.empty()) {
      triples.back().cap_a = split_whitespace(line.substr(10));
    } else if (starts_with_ci(line, "caption b:") && !triples.empty()) {
      triples.back().cap_b = split_whitespace(line.substr(10));
    }
  }
  std::map<std::string, int> gap_counts;
  std::map<std::string, std::map<std::string, int>> prompt_tokens_for;
  for (const auto& t : triples) {
    const std::set<std::string> a(t.cap_a.begin(), t.cap_a.end());
    const std::set<std::string> b(t.cap_b.begin(), t.cap_b.end());
    for (const auto& tok : a) {
      if (b.count(tok)) continue;
      gap_counts[tok] += 1;
      for (const auto& p : t.prompt) {
        if (p != tok) prompt_tokens_for[tok][p] += 1;
      }
    }
  }
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [tok, c] : gap_counts) ranked.emplace_back(c, tok);
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });

  std::string out = "Thought process: counted caption tokens unique to model A.\n\n";
  const int n = std::min<std::size_t>(5, ranked.size());
  for (int i = 0; i < n; ++i) {
    const auto& attr = ranked[static_cast<std::size_t>(i)].second;
    std::vector<std::pair<int, std::string>> assoc;
    for (const auto& [p, c] : prompt_tokens_for[attr]) assoc.emplace_back(c, p);
    std::sort(assoc.begin(), assoc.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::vector<std::string> concepts;
    for (int j = 0; j < 3 && j < static_cast<int>(assoc.size()); ++j) {
      concepts.push_back("'" + assoc[static_cast<std::size_t>(j)].second + "'");
    }
    out += std::to_string(i + 1) + ". Visual Attribute: '" + attr + "'\n";
    out += "Semantic Attributes: [" + join(concepts, ", ") + "]\n\n";
  }
  return out;
}

inline std::string SimTextBackend::reply_visdiff(const std::string& request) const {
  std::map<std::string, int> count_a, count_b;
  for (const auto& raw : split_lines(request)) {
    const std::string line = trim(raw);
    if (starts_with_ci(line, "group a:")) {
      for (const auto& t : split_whitespace(line.substr(8))) count_a[t] += 1;
    } else if (starts_with_ci(line, "group b:")) {
      for (const auto& t : split_whitespace(line.substr(8))) count_b[t] += 1;
    }
  }
  std::vector<std::pair<int, std::string>> ranked;
  for (const auto& [tok, c] : count_a) {
    const auto it = count_b.find(tok);
    const int gap = c - (it == count_b.end() ? 0 : it->second);
    if (gap > 0) ranked.emplace_back(gap, tok);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::string out;
  const int n = std::min<std::size_t>(8, ranked.size());
  for (int i = 0; i < n; ++i) {
    out += "* " + ranked[static_cast<std::size_t>(i)].second + "\n";
  }
  return out;
}

inline std::string SimTextBackend::reply_fallback(const std::string& salt) const {
  auto rng = make_rng(world_.rng_seed, "fallback", salt);
  std::vector<std::string> tokens;
  for (int i = 0; i < 4; ++i) {
    tokens.push_back(world_.vocab.empty() ? salt.substr(static_cast<std::size_t>(i) * 4, 4)
                                          : world_.vocab[rand_index(rng, world_.vocab.size())]);
  }
  return join(tokens, " ");
}

class SimVisionBackend : public VisionBackend {
 public:
  explicit SimVisionBackend(SimWorld world) : world_(std::move(world)) {}

 protected:
  std::string do_describe(const ImageHandle& grid, const std::string& instruction,
                          const BackendConfig& cfg) override {
    (void)cfg;
    const auto ctx = GridContext::try_decode(grid);
    if (!ctx) {
      throw PayloadTooLarge("grid handle carries no decodable context: " + grid.id);
    }
    if (starts_with_ci(trim(instruction), "caption")) {
      if (ctx->rows.empty()) throw MalformedResponse("caption context has no rows");
      return sim_caption(world_, ctx->rows[0]);
    }
    const auto proposal = sim_propose_attributes(world_, *ctx);
    std::string out = "Model A contains:\n";
    for (const auto& a : proposal.model_a) out += "* " + a + "\n";
    out += "\nModel B contains:\n";
    for (const auto& b : proposal.model_b) out += "* " + b + "\n";
    return out;
  }

 private:
  SimWorld world_;
};

class SimImageBackend : public ImageBackend {
 public:
  explicit SimImageBackend(SimWorld world) : world_(std::move(world)) {}

 protected:
  std::vector<ImageHandle> do_synthesize(const std::string& prompt, ModelTag tag, int n,
                                         const std::vector<std::int64_t>& seeds,
                                         const BackendConfig& cfg) override {
    (void)cfg;
    std::vector<ImageHandle> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      ImageHandle h;
      h.id = offline_image_id(prompt, tag, seeds[static_cast<std::size_t>(i)]);
      h.model_tag = tag;
      h.seed = seeds[static_cast<std::size_t>(i)];
      out.push_back(std::move(h));
    }
    return out;
  }

 private:
  SimWorld world_;
};

class SimEmbedBackend : public EmbedBackend {
 public:
  explicit SimEmbedBackend(SimWorld world) : world_(std::move(world)) {}

 protected:
  Embedding do_embed(const EmbedPayload& payload, const BackendConfig& cfg) override {
    (void)cfg;
    if (const auto* text = std::get_if<std::string>(&payload)) {
      return sim_text_embedding(world_, *text);
    }
    const auto& handle = std::get<ImageHandle>(payload);
    const auto info = decode_offline_image_id(handle.id);
    if (!info) {
      throw MalformedResponse("cannot embed handle without offline context: " + handle.id);
    }
    return sim_image_embedding(world_, SimPrompt::from_text(info->prompt_text), info->tag,
                               info->seed);
  }

 private:
  SimWorld world_;
};

inline Backends make_sim_backends(const SimWorld& world) {
  Backends b;
  b.text = std::make_shared<SimTextBackend>(world);
  b.vision = std::make_shared<SimVisionBackend>(world);
  b.image = std::make_shared<SimImageBackend>(world);
  b.embed = std::make_shared<SimEmbedBackend>(world);

  BackendConfig generation;
  generation.model_id = "sim-text";
  generation.temperature = 1.0;
  b.text_cfg = generation;

  BackendConfig vision = generation;
  vision.model_id = "sim-vision";
  vision.temperature = 0.0;
  b.vision_cfg = vision;

  BackendConfig embed = vision;
  embed.model_id = "sim-embed";
  b.embed_cfg = embed;

  BackendConfig image = vision;
  image.model_id = "sim-image";
  b.image_cfgs = {image, image};
  return b;
}

}  // namespace divrep
