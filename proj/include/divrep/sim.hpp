#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "divrep/backends.hpp"
#include "divrep/common.hpp"
#include "divrep/handles.hpp"
#include "divrep/prompts.hpp"
#include "divrep/rng.hpp"
#include "divrep/textproc.hpp"

// A deterministic planted-truth world. One vocabulary token plays the role of
// a visual attribute that model A renders whenever the prompt matches a hidden
// concept rule; everything the four backends would normally ask remote models
// is answered from that rule, so the whole pipeline runs offline and every
// expected value can be counted by hand.

namespace divrep {

struct InvalidSize : Error {
  using Error::Error;
};
struct EmptyBank : Error {
  using Error::Error;
};

struct SimPrompt {
  std::vector<std::string> tokens;

  std::string text() const { return join(tokens, " "); }

  static SimPrompt from_text(std::string_view s) {
    SimPrompt p{split_whitespace(s)};
    if (p.tokens.empty()) throw Error("sim prompt must have at least one token");
    return p;
  }
};

struct SimWorld {
  std::vector<std::string> vocab;
  std::vector<std::string> concepts;   // the hidden rule's tokens, subset of vocab
  std::string attribute_token;         // rendered by model A when the rule fires
  int trigger_min = 1;                 // rule fires at >= this many distinct concept tokens
  double attribute_weight = 2.0;
  double noise_sigma = 0.0;
  double proposal_error_rate = 0.0;
  std::uint64_t rng_seed = 0;

  // derived
  std::unordered_map<std::string, std::size_t> token_index;
  std::unordered_set<std::string> concept_set;

  void rebuild_index() {
    token_index.clear();
    for (std::size_t i = 0; i < vocab.size(); ++i) token_index[vocab[i]] = i;
    concept_set = std::unordered_set<std::string>(concepts.begin(), concepts.end());
  }

  std::size_t embedding_dim() const { return vocab.size() + 1; }  // +1 unknown bucket

  std::size_t index_of(const std::string& token) const {
    const auto it = token_index.find(token);
    return it == token_index.end() ? vocab.size() : it->second;
  }

  bool triggers(const std::vector<std::string>& tokens) const {
    std::unordered_set<std::string> seen;
    int hits = 0;
    for (const auto& t : tokens) {
      if (concept_set.count(t) && seen.insert(t).second) ++hits;
    }
    return hits >= trigger_min;
  }

  // Whether one row of images would actually show the attribute: model A with
  // a rule-matching prompt, or any model when the prompt itself names it.
  bool exhibits(const std::vector<std::string>& tokens, ModelTag tag) const {
    if (std::find(tokens.begin(), tokens.end(), attribute_token) != tokens.end()) return true;
    return tag.index == 0 && triggers(tokens);
  }

  nlohmann::json to_json() const {
    return {{"vocab", vocab},
            {"concepts", concepts},
            {"attribute_token", attribute_token},
            {"trigger_min", trigger_min},
            {"attribute_weight", attribute_weight},
            {"noise_sigma", noise_sigma},
            {"proposal_error_rate", proposal_error_rate},
            {"rng_seed", rng_seed}};
  }

  static SimWorld from_json(const nlohmann::json& j) {
    SimWorld w;
    w.vocab = j.at("vocab").get<std::vector<std::string>>();
    w.concepts = j.at("concepts").get<std::vector<std::string>>();
    w.attribute_token = j.at("attribute_token").get<std::string>();
    w.trigger_min = j.at("trigger_min").get<int>();
    w.attribute_weight = j.at("attribute_weight").get<double>();
    w.noise_sigma = j.at("noise_sigma").get<double>();
    w.proposal_error_rate = j.at("proposal_error_rate").get<double>();
    w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    w.validate();
    w.rebuild_index();
    return w;
  }

  void validate() const {
    std::unordered_set<std::string> vset(vocab.begin(), vocab.end());
    if (vset.size() != vocab.size()) throw InvalidSize("vocab tokens must be distinct");
    for (const auto& c : concepts) {
      if (!vset.count(c)) throw InvalidSize("concept token not in vocab: " + c);
    }
    if (!vset.count(attribute_token)) throw InvalidSize("attribute token not in vocab");
    for (const auto& c : concepts) {
      if (c == attribute_token) throw InvalidSize("attribute token must not be a concept");
    }
    if (trigger_min < 1 || trigger_min > static_cast<int>(concepts.size())) {
      throw InvalidSize("trigger_min must be in [1, |concepts|]");
    }
    if (proposal_error_rate < 0.0 || proposal_error_rate > 1.0) {
      throw InvalidSize("proposal_error_rate must be in [0, 1]");
    }
    if (attribute_weight <= 0.0) throw InvalidSize("attribute_weight must be > 0");
    if (noise_sigma < 0.0) throw InvalidSize("noise_sigma must be >= 0");
  }
};

namespace detail {

// Pronounceable pseudo-words keep sim prompts readable in traces.
inline std::string pseudo_word(std::mt19937_64& rng) {
  static const char* syllables[] = {"ba", "ko", "ra", "mi", "ta", "lu", "ve", "so",
                                    "ne", "pi", "da", "fu", "ri", "mo", "ke", "za",
                                    "ti", "ga", "no", "su", "le", "wa", "hi", "po"};
  const int n = 2 + static_cast<int>(rand_index(rng, 3));
  std::string w;
  for (int i = 0; i < n; ++i) w += syllables[rand_index(rng, std::size(syllables))];
  return w;
}

}  // namespace detail

inline SimWorld make_world(int v_size, int c_size, std::uint64_t seed, double error_rate,
                           double noise_sigma) {
  if (v_size < 10) throw InvalidSize("vocab size must be at least 10");
  if (c_size < 1 || c_size >= v_size) {
    throw InvalidSize("concept count must be in [1, vocab size)");
  }
  SimWorld w;
  w.rng_seed = seed;
  w.proposal_error_rate = error_rate;
  w.noise_sigma = noise_sigma;

  auto rng = make_rng(seed, "make-world");
  std::unordered_set<std::string> used;
  w.vocab.reserve(static_cast<std::size_t>(v_size));
  while (w.vocab.size() < static_cast<std::size_t>(v_size)) {
    std::string word = detail::pseudo_word(rng);
    if (!used.insert(word).second) {
      word += std::to_string(w.vocab.size());
      if (!used.insert(word).second) continue;
    }
    w.vocab.push_back(word);
  }

  const auto special = sample_without_replacement(rng, w.vocab.size(),
                                                  static_cast<std::size_t>(c_size) + 1);
  for (int i = 0; i < c_size; ++i) w.concepts.push_back(w.vocab[special[i]]);
  w.attribute_token = w.vocab[special[static_cast<std::size_t>(c_size)]];

  w.validate();
  w.rebuild_index();
  return w;
}

// ---- embeddings ----

// Bag-of-tokens vector; model A additionally receives the attribute component
// when the hidden rule fires. Jitter is seeded per (prompt, model, seed) so
// replays are exact.
inline Embedding sim_image_embedding(const SimWorld& w, const SimPrompt& prompt, ModelTag tag,
                                     std::int64_t seed) {
  Embedding e;
  e.v.assign(w.embedding_dim(), 0.0);
  for (const auto& t : prompt.tokens) e.v[w.index_of(t)] += 1.0;
  if (tag.index == 0 && w.triggers(prompt.tokens)) {
    e.v[w.index_of(w.attribute_token)] += w.attribute_weight;
  }
  if (w.noise_sigma > 0.0) {
    auto rng = make_rng(w.rng_seed, "img-emb",
                        prompt.text() + "\x1f" + tag.str() + "\x1f" + std::to_string(seed));
    std::normal_distribution<double> gauss(0.0, w.noise_sigma);
    for (auto& x : e.v) x += gauss(rng);
  }
  normalize(e);
  return e;
}

inline Embedding sim_text_embedding(const SimWorld& w, std::string_view text) {
  Embedding e;
  e.v.assign(w.embedding_dim(), 0.0);
  for (const auto& t : split_whitespace(text)) e.v[w.index_of(t)] += 1.0;
  if (l2_norm(e) == 0.0) e.v[w.vocab.size()] = 1.0;  // empty text -> unknown bucket
  normalize(e);
  return e;
}

// ---- proposal, description, candidate surrogates ----

struct SimProposal {
  std::vector<std::string> model_a;
  std::vector<std::string> model_b;
};

inline std::vector<std::string> sim_distractors(const SimWorld& w, std::mt19937_64& rng, int n) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  int guard = 0;
  while (static_cast<int>(out.size()) < n && guard++ < 1000) {
    const auto& tok = w.vocab[rand_index(rng, w.vocab.size())];
    if (tok == w.attribute_token || w.concept_set.count(tok)) continue;
    if (!seen.insert(tok).second) continue;
    out.push_back(tok);
  }
  return out;
}

// What the vision model reports for a two-row grid. Identical rows produce an
// empty report; otherwise the true attribute is surfaced for the side that
// exhibits it, with probability proposal_error_rate of being swapped for a
// random token (the injected-error path), plus a couple of distractors.
inline SimProposal sim_propose_attributes(const SimWorld& w, const GridContext& ctx) {
  if (ctx.rows.size() != 2) throw Error("attribute proposal needs a two-row grid");
  const auto top = SimPrompt::from_text(ctx.rows[0].prompt_text);
  const auto bottom = SimPrompt::from_text(ctx.rows[1].prompt_text);

  SimProposal out;
  const bool identical = ctx.rows[0].prompt_text == ctx.rows[1].prompt_text &&
                         ctx.rows[0].tag == ctx.rows[1].tag;
  if (identical) return out;

  auto rng = make_rng(w.rng_seed, "propose",
                      ctx.rows[0].prompt_text + "\x1f" + ctx.rows[0].tag.str() + "\x1f" +
                          ctx.rows[1].prompt_text + "\x1f" + ctx.rows[1].tag.str());

  const bool top_shows = w.exhibits(top.tokens, ctx.rows[0].tag);
  const bool bottom_shows = w.exhibits(bottom.tokens, ctx.rows[1].tag);

  auto surface = [&](std::vector<std::string>& into) {
    std::string tok = w.attribute_token;
    if (rand_unit(rng) < w.proposal_error_rate) {
      // error injection: report a random token instead of the real attribute
      do {
        tok = w.vocab[rand_index(rng, w.vocab.size())];
      } while (tok == w.attribute_token);
    }
    into.push_back(tok);
  };

  if (top_shows && !bottom_shows) surface(out.model_a);
  for (auto& d : sim_distractors(w, rng, 2)) out.model_a.push_back(std::move(d));
  if (bottom_shows && !top_shows) surface(out.model_b);
  for (auto& d : sim_distractors(w, rng, 2)) out.model_b.push_back(std::move(d));
  return out;
}

inline std::string sim_caption(const SimWorld& w, const GridRow& row) {
  const auto prompt = SimPrompt::from_text(row.prompt_text);
  std::string caption = row.prompt_text;
  if (w.exhibits(prompt.tokens, row.tag)) caption += " " + w.attribute_token;
  return caption;
}

// Description surrogate: tokens ranked by how much more often they appear in
// diverging prompts than non-diverging ones, the attribute itself excluded.
inline Description sim_describe(const SimWorld& w, const std::vector<std::string>& diverging,
                                const std::vector<std::string>& non_diverging,
                                const std::string& exclude_attribute, int top_k = 3) {
  if (diverging.empty() && non_diverging.empty()) {
    throw EmptyBank("cannot describe an empty prompt bank");
  }
  auto presence = [](const std::vector<std::string>& texts) {
    std::map<std::string, int> counts;
    for (const auto& text : texts) {
      std::set<std::string> seen;
      for (const auto& t : split_whitespace(text)) seen.insert(t);
      for (const auto& t : seen) counts[t] += 1;
    }
    return counts;
  };
  const auto div_counts = presence(diverging);
  const auto non_counts = presence(non_diverging);
  const double div_n = std::max<std::size_t>(diverging.size(), 1);
  const double non_n = std::max<std::size_t>(non_diverging.size(), 1);

  std::vector<std::pair<double, std::string>> scored;
  for (const auto& [tok, c] : div_counts) {
    if (tok == w.attribute_token || tok == exclude_attribute) continue;
    const auto it = non_counts.find(tok);
    const double gap =
        c / div_n - (it == non_counts.end() ? 0.0 : it->second / non_n);
    scored.emplace_back(gap, tok);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });

  Description d;
  for (int i = 0; i < top_k && i < static_cast<int>(scored.size()); ++i) {
    d.key_concepts.push_back(scored[static_cast<std::size_t>(i)].second);
  }
  d.thought = "Compared " + std::to_string(diverging.size()) + " diverging prompts against " +
              std::to_string(non_diverging.size()) + " non-diverging prompts by token frequency.";
  d.text = "Prompts that mention " + join(d.key_concepts, ", ") + ".";
  return d;
}

// Candidate surrogate: each prompt carries one or two description tokens plus
// random filler, mirroring prompts written to match a description.
inline std::vector<std::string> sim_candidates(const SimWorld& w,
                                               const std::vector<std::string>& description_tokens,
                                               int k, const std::string& salt,
                                               int filler_count = 6) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto rng = make_rng(w.rng_seed, "candidates", salt + "\x1f" + std::to_string(i));
    std::vector<std::string> tokens;
    if (!description_tokens.empty()) {
      const int want = 1 + static_cast<int>(rand_index(rng, 2));
      for (const auto idx :
           sample_without_replacement(rng, description_tokens.size(),
                                      static_cast<std::size_t>(want))) {
        tokens.push_back(description_tokens[idx]);
      }
    }
    const std::size_t target = tokens.size() + static_cast<std::size_t>(filler_count);
    int guard = 0;
    while (tokens.size() < target && guard++ < 1000) {
      const auto& tok = w.vocab[rand_index(rng, w.vocab.size())];
      if (tok == w.attribute_token) continue;
      tokens.push_back(tok);
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    out.push_back(join(tokens, " "));
  }
  return out;
}

// Random world prompts: a controlled fraction contains exactly one concept
// token, so the planted trigger rate is known up front and brute-force
// counting over the emitted set stays the ground truth.
inline std::vector<SimPrompt> sim_gen_prompts(const SimWorld& w, int n, const std::string& salt,
                                              int length = 12, double concept_rate = 0.25) {
  std::vector<std::string> filler_pool;
  for (const auto& t : w.vocab) {
    if (t != w.attribute_token && !w.concept_set.count(t)) filler_pool.push_back(t);
  }
  if (filler_pool.empty()) throw InvalidSize("world has no filler tokens");

  std::vector<SimPrompt> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(w.rng_seed, "gen-prompts", salt + "\x1f" + std::to_string(i));
    SimPrompt p;
    int fillers = length;
    if (!w.concepts.empty() && rand_unit(rng) < concept_rate) {
      p.tokens.push_back(w.concepts[rand_index(rng, w.concepts.size())]);
      fillers -= 1;
    }
    for (int f = 0; f < fillers; ++f) {
      p.tokens.push_back(filler_pool[rand_index(rng, filler_pool.size())]);
    }
    std::shuffle(p.tokens.begin(), p.tokens.end(), rng);
    out.push_back(std::move(p));
  }
  return out;
}

// ---- deterministic judge ----

namespace detail {

inline const std::map<std::string, std::set<std::string>>& judge_relations() {
  // tiny lexical-relatedness table backing the "related but not equal" rating
  static const std::map<std::string, std::set<std::string>> rel = {
      {"cat", {"animal", "feline", "pet", "kitten"}},
      {"dog", {"animal", "puppy", "pet", "canine"}},
      {"nature", {"landscapes", "landscape", "outdoors", "wilderness"}},
      {"fire", {"flames", "flame", "burning"}},
      {"rain", {"wet", "storm", "drizzle"}},
  };
  return rel;
}

inline bool tokens_related(const std::string& x, const std::string& y) {
  if (x == y) return true;
  const auto& rel = judge_relations();
  const auto itx = rel.find(x);
  if (itx != rel.end() && itx->second.count(y)) return true;
  const auto ity = rel.find(y);
  if (ity != rel.end() && ity->second.count(x)) return true;
  return false;
}

}  // namespace detail

// Exact content-token match -> 3, any overlapping or related token -> 2,
// otherwise 1.
inline int sim_judge_rating(const std::string& first, const std::string& second) {
  const auto x = content_token_set(first);
  const auto y = content_token_set(second);
  if (!x.empty() && x == y) return 3;
  for (const auto& a : x) {
    for (const auto& b : y) {
      if (detail::tokens_related(a, b)) return 2;
    }
  }
  return 1;
}

inline int sim_judge_rating_sets(const std::vector<std::string>& first,
                                 const std::vector<std::string>& second) {
  return sim_judge_rating(join(first, " "), join(second, " "));
}

}  // namespace divrep
