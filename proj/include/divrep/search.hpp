#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "divrep/backends.hpp"
#include "divrep/divergence.hpp"
#include "divrep/prompts.hpp"
#include "divrep/records.hpp"
#include "divrep/rng.hpp"

// Evolutionary search for the prompt description that maximizes the fraction
// of its candidate prompts confirmed diverging. Each iteration mutates the
// description from a sample of the prompt bank, produces candidates (by
// generation or retrieval), scores them, and grows the bank.

namespace divrep {

struct NoDiverging : Error {
  using Error::Error;
};

// Growing partition of evaluated prompt ids. Sides never shrink and stay
// disjoint; the iteration tag records when an id entered.
class PromptBank {
 public:
  void add_div(const std::string& id, int iteration) {
    if (non_set_.count(id) || !div_set_.insert(id).second) return;
    div_ids_.push_back(id);
    iteration_tag_[id] = iteration;
  }

  void add_non(const std::string& id, int iteration) {
    if (div_set_.count(id) || !non_set_.insert(id).second) return;
    non_ids_.push_back(id);
    iteration_tag_[id] = iteration;
  }

  const std::vector<std::string>& div_ids() const { return div_ids_; }
  const std::vector<std::string>& non_ids() const { return non_ids_; }
  bool in_div(const std::string& id) const { return div_set_.count(id) > 0; }
  bool in_non(const std::string& id) const { return non_set_.count(id) > 0; }

  int tag_of(const std::string& id) const {
    const auto it = iteration_tag_.find(id);
    return it == iteration_tag_.end() ? -1 : it->second;
  }

 private:
  std::vector<std::string> div_ids_, non_ids_;
  std::unordered_set<std::string> div_set_, non_set_;
  std::unordered_map<std::string, int> iteration_tag_;
};

struct SearchConfig {
  int iterations = 10;          // N
  int sample_size = 25;         // B
  int candidates_per_iter = 25; // k
  enum class Mode { generate, retrieve };
  Mode mode = Mode::generate;
  struct EarlyStop {
    int window = 5;
    double floor = 0.1;
  } early_stop;
  Thresholds thresholds;
  SetAggregation aggregation = SetAggregation::mean;
  int images_per_prompt = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 1) throw ConfigError("search.iterations must be >= 1");
    if (sample_size < 1) throw ConfigError("search.sample_size must be >= 1");
    if (candidates_per_iter < 1) throw ConfigError("search.candidates_per_iter must be >= 1");
    if (early_stop.floor <= 0.0 || early_stop.floor >= 1.0) {
      throw ConfigError("search.early_stop.floor must be in (0, 1)");
    }
    if (early_stop.window < 1) throw ConfigError("search.early_stop.window must be >= 1");
    if (images_per_prompt < 1) throw ConfigError("search.images_per_prompt must be >= 1");
    thresholds.validate();
  }

  static const char* mode_name(Mode m) {
    return m == Mode::generate ? "generate" : "retrieve";
  }
};

struct CandidateOutcome {
  std::string id;
  std::string text;
  Origin origin;
  bool diverging = false;
  bool refused = false;
};

struct IterationTrace {
  int index = 0;
  Description description;
  std::vector<CandidateOutcome> candidates;
  int n_diverging = 0;
  int n_scored = 0;
  double sigma = 0.0;
};

struct SearchTrace {
  std::string attribute;
  std::string mode;
  std::vector<IterationTrace> iterations;
  int best_index = -1;
  bool terminated_early = false;

  nlohmann::json to_json() const {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& it : iterations) {
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& c : it.candidates) {
        cands.push_back({{"id", c.id},
                         {"text", c.text},
                         {"diverging", c.diverging},
                         {"refused", c.refused}});
      }
      iters.push_back({{"index", it.index},
                       {"description",
                        {{"thought", it.description.thought},
                         {"text", it.description.text},
                         {"key_concepts", it.description.key_concepts}}},
                       {"candidates", cands},
                       {"n_diverging", it.n_diverging},
                       {"n_scored", it.n_scored},
                       {"sigma", it.sigma}});
    }
    return {{"attribute", attribute},
            {"mode", mode},
            {"iterations", iters},
            {"best_index", best_index},
            {"terminated_early", terminated_early}};
  }
};

// Bank seeding: classify the initial records once; diverging prompts become
// H^div and everything else H^non.
inline PromptBank seed_bank(const Attribute& a, std::span<const PromptRecord> records,
                            const Thresholds& th) {
  PromptBank bank;
  const auto part = classify_diverging(a, records, th);
  for (const auto idx : part.div) bank.add_div(records[idx].id, -1);
  for (const auto idx : part.non) bank.add_non(records[idx].id, -1);
  if (bank.div_ids().empty()) {
    throw NoDiverging("no diverging prompts for attribute '" + a.text + "'");
  }
  return bank;
}

namespace detail {

// Sample up to B ids from one side. After the first iteration the prompts
// added in the previous iteration are taken first, the remainder uniformly.
inline std::vector<std::string> sample_side(const PromptBank& bank,
                                            const std::vector<std::string>& side_ids, int budget,
                                            int iteration, std::mt19937_64& rng) {
  std::vector<std::string> out;
  std::unordered_set<std::string> taken;

  if (iteration > 0) {
    std::vector<std::string> fresh;
    for (const auto& id : side_ids) {
      if (bank.tag_of(id) == iteration - 1) fresh.push_back(id);
    }
    if (static_cast<int>(fresh.size()) > budget) {
      for (const auto idx : sample_without_replacement(rng, fresh.size(),
                                                       static_cast<std::size_t>(budget))) {
        out.push_back(fresh[idx]);
      }
    } else {
      out = fresh;
    }
    for (const auto& id : out) taken.insert(id);
  }

  if (static_cast<int>(out.size()) < budget) {
    std::vector<std::string> rest;
    for (const auto& id : side_ids) {
      if (!taken.count(id)) rest.push_back(id);
    }
    const int need = budget - static_cast<int>(out.size());
    for (const auto idx :
         sample_without_replacement(rng, rest.size(), static_cast<std::size_t>(need))) {
      out.push_back(rest[idx]);
    }
  }
  return out;
}

}  // namespace detail

inline std::pair<std::vector<std::string>, std::vector<std::string>> sample_bank(
    const PromptBank& bank, int budget, int iteration, std::mt19937_64& rng) {
  if (bank.div_ids().empty()) throw NoDiverging("bank has no diverging prompts to sample");
  auto div = detail::sample_side(bank, bank.div_ids(), budget, iteration, rng);
  auto non = detail::sample_side(bank, bank.non_ids(), budget, iteration, rng);
  return {std::move(div), std::move(non)};
}

struct DescribeResult {
  Description description;
  std::vector<ChatMessage> transcript;  // request + reply, for follow-up turns
};

// One mutation step. A malformed reply is retried once with a format nudge;
// if that also fails the previous iteration's description is reused.
inline DescribeResult describe_diverging(const std::vector<std::string>& diverging_texts,
                                         const std::vector<std::string>& non_diverging_texts,
                                         const Attribute& a, TextBackend& text,
                                         const BackendConfig& cfg,
                                         const Description* previous = nullptr) {
  if (diverging_texts.empty()) throw NoDiverging("describe needs at least one diverging prompt");
  const std::string request = prompts::mutation_prompt(a.text, diverging_texts,
                                                       non_diverging_texts);

  auto attempt = [&](const std::string& req) {
    const auto reply = with_retries(cfg, [&] { return text.generate_text("", req, cfg); });
    DescribeResult res;
    res.description = parse::description(reply);
    res.transcript = {{"user", req}, {"assistant", reply}};
    return res;
  };

  DescribeResult result;
  try {
    result = attempt(request);
  } catch (const ParseError& first) {
    log_warn(std::string("description reply unparseable, retrying once: ") + first.what());
    try {
      result = attempt(request + "\n\nPlease follow the exact output format.");
    } catch (const ParseError& second) {
      if (previous == nullptr) throw;
      log_warn(std::string("retry also unparseable, reusing previous description: ") +
               second.what());
      result.description = *previous;
      result.transcript = {{"user", request}};
    }
  }

  // concepts naming the attribute verbatim defeat the point of the search
  std::erase_if(result.description.key_concepts, [&](const std::string& c) {
    return contains_ci(c, a.text) || contains_ci(a.text, c);
  });
  return result;
}

struct CandidateSet {
  std::vector<CandidateOutcome> candidates;
  bool generated = false;  // true when texts are new and need synthesis
};

// Candidate prompts for one iteration. Generation asks the text model in the
// same conversation as the mutation; retrieval ranks bank prompts by text
// embedding similarity to the description, excluding the just-sampled ids.
inline CandidateSet get_new_diverging(const DescribeResult& described, const Attribute& a,
                                      const PromptBank& bank,
                                      const std::unordered_map<std::string, PromptRecord>& store,
                                      const std::vector<std::string>& sampled_ids,
                                      const SearchConfig& cfg, Backends& backends,
                                      int iteration) {
  CandidateSet out;
  const int k = cfg.candidates_per_iter;

  if (cfg.mode == SearchConfig::Mode::generate) {
    out.generated = true;
    std::vector<ChatMessage> messages = described.transcript;
    messages.push_back({"user", prompts::candidate_prompt(k, described.description, a.text)});
    const auto reply = with_retries(backends.text_cfg, [&] {
      return backends.text->generate_text_chat(messages, backends.text_cfg);
    });
    int idx = 0;
    for (const auto& item : parse::numbered_items(reply)) {
      if (static_cast<int>(out.candidates.size()) >= k) break;
      if (contains_ci(item, a.text)) continue;  // names the attribute, rejected
      CandidateOutcome c;
      c.id = "gen-" + std::to_string(iteration) + "-" + std::to_string(idx++);
      c.text = item;
      c.origin = {Origin::Kind::generated, iteration};
      out.candidates.push_back(std::move(c));
    }
    if (static_cast<int>(out.candidates.size()) < k) {
      log_warn("iteration " + std::to_string(iteration) + ": only " +
               std::to_string(out.candidates.size()) + " of " + std::to_string(k) +
               " candidates survived generation");
    }
    return out;
  }

  // retrieval mode
  const auto query = backends.embed->embed(described.description.retrieval_text(),
                                           backends.embed_cfg);
  std::unordered_set<std::string> excluded(sampled_ids.begin(), sampled_ids.end());
  std::vector<std::pair<double, std::string>> scored;
  auto consider = [&](const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
      if (excluded.count(id)) continue;
      const auto it = store.find(id);
      if (it == store.end()) continue;
      const auto emb = backends.embed->embed(it->second.text, backends.embed_cfg);
      scored.emplace_back(cosine(query, emb), id);
    }
  };
  consider(bank.div_ids());
  consider(bank.non_ids());
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i) {
    const auto& id = scored[static_cast<std::size_t>(i)].second;
    CandidateOutcome c;
    c.id = id;
    c.text = store.at(id).text;
    c.origin = {Origin::Kind::retrieved, iteration};
    out.candidates.push_back(std::move(c));
  }
  if (static_cast<int>(out.candidates.size()) < k) {
    log_warn("iteration " + std::to_string(iteration) + ": bank only provided " +
             std::to_string(out.candidates.size()) + " retrieval candidates");
  }
  return out;
}

struct SearchResult {
  Description best;
  SearchTrace trace;
};

inline SearchResult search(const Attribute& a, std::span<const PromptRecord> records,
                           const SearchConfig& cfg, Backends& backends) {
  cfg.validate();
  if (a.embedding.v.empty()) throw Error("attribute must be embedded before search");

  std::unordered_map<std::string, PromptRecord> store;
  for (const auto& rec : records) store[rec.id] = rec;

  PromptBank bank = seed_bank(a, records, cfg.thresholds);

  SearchTrace trace;
  trace.attribute = a.text;
  trace.mode = SearchConfig::mode_name(cfg.mode);

  Description previous;
  bool has_previous = false;
  double max_sigma = -1.0;

  for (int i = 0; i < cfg.iterations; ++i) {
    auto rng = make_rng(cfg.seed, "sample-bank", a.text + "\x1f" + std::to_string(i));
    const auto [div_ids, non_ids] = sample_bank(bank, cfg.sample_size, i, rng);

    std::vector<std::string> div_texts, non_texts;
    for (const auto& id : div_ids) div_texts.push_back(store.at(id).text);
    for (const auto& id : non_ids) non_texts.push_back(store.at(id).text);

    const auto described = describe_diverging(div_texts, non_texts, a, *backends.text,
                                              backends.text_cfg,
                                              has_previous ? &previous : nullptr);

    std::vector<std::string> sampled = div_ids;
    sampled.insert(sampled.end(), non_ids.begin(), non_ids.end());
    auto cand_set = get_new_diverging(described, a, bank, store, sampled, cfg, backends, i);

    IterationTrace iter;
    iter.index = i;
    iter.description = described.description;
    iter.candidates = std::move(cand_set.candidates);

    // Materialize any new candidate records; refusals drop out of sigma.
    std::vector<PromptRecord> scored_records;
    std::vector<std::size_t> scored_pos;
    if (cand_set.generated) {
      std::vector<char> refused(iter.candidates.size(), 0);
      std::vector<PromptRecord> recs(iter.candidates.size());
      parallel_for(iter.candidates.size(), backends.embed_cfg.max_parallel, [&](std::size_t ci) {
        auto& cand = iter.candidates[ci];
        try {
          recs[ci] = materialize_record(cand.id, cand.text, backends, cfg.images_per_prompt,
                                        cand.origin);
        } catch (const ContentRefused& e) {
          refused[ci] = 1;
          log_warn("candidate refused: " + cand.text + ": " + e.what());
        }
      });
      for (std::size_t ci = 0; ci < iter.candidates.size(); ++ci) {
        if (refused[ci]) {
          iter.candidates[ci].refused = true;
          continue;
        }
        store[recs[ci].id] = recs[ci];
        scored_records.push_back(std::move(recs[ci]));
        scored_pos.push_back(ci);
      }
    } else {
      for (std::size_t ci = 0; ci < iter.candidates.size(); ++ci) {
        scored_records.push_back(store.at(iter.candidates[ci].id));
        scored_pos.push_back(ci);
      }
    }

    const auto part = classify_diverging(a, scored_records, cfg.thresholds);
    for (const auto idx : part.div) {
      iter.candidates[scored_pos[idx]].diverging = true;
      bank.add_div(scored_records[idx].id, i);
    }
    for (const auto idx : part.non) {
      bank.add_non(scored_records[idx].id, i);
    }
    iter.n_diverging = static_cast<int>(part.div.size());
    iter.n_scored = static_cast<int>(scored_records.size());
    iter.sigma = iter.n_scored == 0
                     ? 0.0
                     : static_cast<double>(iter.n_diverging) / iter.n_scored;

    trace.iterations.push_back(std::move(iter));
    const auto& stored = trace.iterations.back();
    if (stored.sigma > max_sigma) {
      max_sigma = stored.sigma;
      trace.best_index = i;  // first maximum wins ties
    }
    previous = stored.description;
    has_previous = true;

    if (i + 1 == cfg.early_stop.window && max_sigma < cfg.early_stop.floor) {
      trace.terminated_early = true;
      log_info("early stop for '" + a.text + "': max sigma " + std::to_string(max_sigma) +
               " below " + std::to_string(cfg.early_stop.floor) + " after " +
               std::to_string(cfg.early_stop.window) + " iterations");
      break;
    }
  }

  SearchResult result;
  result.trace = std::move(trace);
  result.best = result.trace.iterations[static_cast<std::size_t>(result.trace.best_index)]
                    .description;
  return result;
}

}  // namespace divrep
