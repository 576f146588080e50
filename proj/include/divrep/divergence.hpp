#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "divrep/backends.hpp"
#include "divrep/common.hpp"

namespace divrep {

struct EmptySet : Error {
  using Error::Error;
};
struct RaggedRecord : Error {
  using Error::Error;
};

// Presence threshold t and gap threshold delta for the 0/1 divergence score.
struct Thresholds {
  double t = 0.0;
  double delta = 0.05;

  void validate() const {
    if (delta <= 0.0) throw ConfigError("thresholds.delta must be > 0");
  }
};

struct Origin {
  enum class Kind { initial, generated, retrieved };
  Kind kind = Kind::initial;
  int iteration = -1;  // meaningful for generated/retrieved

  friend bool operator==(const Origin&, const Origin&) = default;
};

// One prompt with both models' images and their embeddings. Side "a" is the
// side scored for attribute presence; side "b" is the reference.
struct PromptRecord {
  std::string id;
  std::string text;
  std::vector<ImageHandle> images_a;
  std::vector<ImageHandle> images_b;
  std::vector<Embedding> emb_a;
  std::vector<Embedding> emb_b;
  Origin origin;
};

enum class Provenance { vlm, tfidf, visdiff, llm_only, manual };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::vlm: return "vlm";
    case Provenance::tfidf: return "tfidf";
    case Provenance::visdiff: return "visdiff";
    case Provenance::llm_only: return "llm_only";
    case Provenance::manual: return "manual";
  }
  return "unknown";
}

struct Attribute {
  std::string text;
  Embedding embedding;
  double mean_divergence = 0.0;
  Provenance provenance = Provenance::vlm;
  bool over_length = false;  // proposal exceeded the word limit; kept, flagged
};

// How per-image similarities collapse to a set similarity.
enum class SetAggregation { mean, max };

inline double dot(const Embedding& u, const Embedding& v) {
  if (u.dim() != v.dim()) {
    throw DimMismatch("cosine over mismatched dims: " + std::to_string(u.dim()) + " vs " +
                      std::to_string(v.dim()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.v.size(); ++i) acc += u.v[i] * v.v[i];
  return acc;
}

inline double cosine(const Embedding& u, const Embedding& v) {
  if (u.normalized && v.normalized) return dot(u, v);
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot(u, v) / (nu * nv);
}

inline double set_similarity(const Embedding& attribute, std::span<const Embedding> images,
                             SetAggregation agg = SetAggregation::mean) {
  if (images.empty()) throw EmptySet("set_similarity over empty image set");
  if (agg == SetAggregation::max) {
    double best = cosine(attribute, images[0]);
    for (std::size_t i = 1; i < images.size(); ++i) {
      best = std::max(best, cosine(attribute, images[i]));
    }
    return best;
  }
  double acc = 0.0;
  for (const auto& img : images) acc += cosine(attribute, img);
  return acc / static_cast<double>(images.size());
}

// The 0/1 divergence indicator over already-computed set similarities:
// present on side a (s_a > t) and absent on side b (s_a - s_b > delta).
// Both inequalities are strict.
inline int divergence_indicator(double s_a, double s_b, const Thresholds& th) {
  return (s_a > th.t && (s_a - s_b) > th.delta) ? 1 : 0;
}

inline int divergence_score(const Attribute& a, const PromptRecord& rec, const Thresholds& th,
                            SetAggregation agg = SetAggregation::mean) {
  const double s_a = set_similarity(a.embedding, rec.emb_a, agg);
  const double s_b = set_similarity(a.embedding, rec.emb_b, agg);
  return divergence_indicator(s_a, s_b, th);
}

// One-vs-many variant: the attribute must be present in the first set and
// clear the gap against the strongest of the remaining sets.
inline int divergence_score_multi(const Attribute& a,
                                  std::span<const std::vector<Embedding>> emb_sets,
                                  const Thresholds& th,
                                  SetAggregation agg = SetAggregation::mean) {
  if (emb_sets.size() < 2) throw EmptySet("multi-model score needs at least two image sets");
  const double s_first = set_similarity(a.embedding, emb_sets[0], agg);
  double s_best_other = set_similarity(a.embedding, emb_sets[1], agg);
  for (std::size_t i = 2; i < emb_sets.size(); ++i) {
    s_best_other = std::max(s_best_other, set_similarity(a.embedding, emb_sets[i], agg));
  }
  return divergence_indicator(s_first, s_best_other, th);
}

struct Partition {
  std::vector<std::size_t> div;
  std::vector<std::size_t> non;
};

// Pairs images index-wise and requires a strict majority of the per-pair
// scores to be 1. Ties on even counts classify as non-diverging.
inline bool record_diverges(const Attribute& a, const PromptRecord& rec, const Thresholds& th) {
  if (rec.emb_a.size() != rec.emb_b.size()) {
    throw RaggedRecord("record " + rec.id + " has unequal image counts");
  }
  if (rec.emb_a.empty()) throw EmptySet("record " + rec.id + " has no embeddings");
  const std::size_t n = rec.emb_a.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s_a = cosine(a.embedding, rec.emb_a[i]);
    const double s_b = cosine(a.embedding, rec.emb_b[i]);
    hits += static_cast<std::size_t>(divergence_indicator(s_a, s_b, th));
  }
  return 2 * hits > n;
}

inline Partition classify_diverging(const Attribute& a, std::span<const PromptRecord> records,
                                    const Thresholds& th) {
  Partition out;
  std::size_t expected = records.empty() ? 0 : records[0].emb_a.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.emb_a.size() != expected || rec.emb_b.size() != expected) {
      throw RaggedRecord("record " + rec.id + " breaks the uniform image count " +
                         std::to_string(expected));
    }
    if (record_diverges(a, rec, th)) {
      out.div.push_back(i);
    } else {
      out.non.push_back(i);
    }
  }
  return out;
}

inline double mean_divergence(const Attribute& a, std::span<const PromptRecord> records,
                              const Thresholds& th, SetAggregation agg = SetAggregation::mean) {
  if (records.empty()) return 0.0;
  std::size_t acc = 0;
  for (const auto& rec : records) {
    acc += static_cast<std::size_t>(divergence_score(a, rec, th, agg));
  }
  return static_cast<double>(acc) / static_cast<double>(records.size());
}

// Scores every attribute over the prompt set and sorts by mean divergence,
// descending; ties break lexicographically by attribute text so reports are
// deterministic.
inline std::vector<Attribute> rank_attributes(std::vector<Attribute> attrs,
                                              std::span<const PromptRecord> records,
                                              const Thresholds& th,
                                              SetAggregation agg = SetAggregation::mean) {
  for (auto& a : attrs) {
    a.mean_divergence = mean_divergence(a, records, th, agg);
  }
  std::stable_sort(attrs.begin(), attrs.end(), [](const Attribute& x, const Attribute& y) {
    if (x.mean_divergence != y.mean_divergence) return x.mean_divergence > y.mean_divergence;
    return x.text < y.text;
  });
  return attrs;
}

// Batch scorer: computes the full attribute x record score matrix in one pass
// over flattened embedding storage. Must agree with the scalar path exactly;
// the acceptance suite checks this on randomized inputs.
inline std::vector<std::vector<int>> divergence_scores_batch(
    std::span<const Attribute> attrs, std::span<const PromptRecord> records, const Thresholds& th,
    SetAggregation agg = SetAggregation::mean) {
  std::vector<std::vector<int>> scores(attrs.size(), std::vector<int>(records.size(), 0));
  if (attrs.empty() || records.empty()) return scores;

  const std::size_t dim = attrs[0].embedding.dim();
  for (const auto& a : attrs) {
    if (a.embedding.dim() != dim) throw DimMismatch("batch scorer: attribute dims differ");
    if (!a.embedding.normalized) {
      throw Error("batch scorer requires normalized embeddings (attribute '" + a.text + "')");
    }
  }

  // Flatten both sides into contiguous matrices once; every attribute then
  // scans plain double rows instead of walking Embedding objects.
  std::size_t total_images = 0;
  for (const auto& rec : records) {
    if (rec.emb_a.size() != rec.emb_b.size()) {
      throw RaggedRecord("record " + rec.id + " has unequal image counts");
    }
    if (rec.emb_a.empty()) throw EmptySet("record " + rec.id + " has no embeddings");
    total_images += rec.emb_a.size();
  }
  std::vector<double> flat_a(total_images * dim);
  std::vector<double> flat_b(total_images * dim);
  std::vector<std::size_t> offsets(records.size());
  std::vector<std::size_t> counts(records.size());
  std::size_t cursor = 0;
  for (std::size_t ri = 0; ri < records.size(); ++ri) {
    const auto& rec = records[ri];
    offsets[ri] = cursor;
    counts[ri] = rec.emb_a.size();
    for (std::size_t k = 0; k < rec.emb_a.size(); ++k) {
      if (rec.emb_a[k].dim() != dim || rec.emb_b[k].dim() != dim) {
        throw DimMismatch("batch scorer: image dims differ from attribute dims");
      }
      if (!rec.emb_a[k].normalized || !rec.emb_b[k].normalized) {
        throw Error("batch scorer requires normalized embeddings (record " + rec.id + ")");
      }
      std::copy(rec.emb_a[k].v.begin(), rec.emb_a[k].v.end(), flat_a.begin() +
                static_cast<std::ptrdiff_t>((cursor + k) * dim));
      std::copy(rec.emb_b[k].v.begin(), rec.emb_b[k].v.end(), flat_b.begin() +
                static_cast<std::ptrdiff_t>((cursor + k) * dim));
    }
    cursor += rec.emb_a.size();
  }

  // Per-image dot then the aggregation, in the same order as set_similarity,
  // so both paths produce bit-identical similarities.
  auto dot_row = [dim](const double* q, const double* img) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += q[d] * img[d];
    return acc;
  };
  for (std::size_t ai = 0; ai < attrs.size(); ++ai) {
    const double* q = attrs[ai].embedding.v.data();
    auto& row = scores[ai];
    for (std::size_t ri = 0; ri < records.size(); ++ri) {
      const std::size_t n = counts[ri];
      const double* base_a = flat_a.data() + offsets[ri] * dim;
      const double* base_b = flat_b.data() + offsets[ri] * dim;
      double s_a, s_b;
      if (agg == SetAggregation::max) {
        s_a = dot_row(q, base_a);
        s_b = dot_row(q, base_b);
        for (std::size_t k = 1; k < n; ++k) {
          s_a = std::max(s_a, dot_row(q, base_a + k * dim));
          s_b = std::max(s_b, dot_row(q, base_b + k * dim));
        }
      } else {
        double acc_a = 0.0, acc_b = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          acc_a += dot_row(q, base_a + k * dim);
          acc_b += dot_row(q, base_b + k * dim);
        }
        s_a = acc_a / static_cast<double>(n);
        s_b = acc_b / static_cast<double>(n);
      }
      row[ri] = divergence_indicator(s_a, s_b, th);
    }
  }
  return scores;
}

// Swaps the two sides of every record; used to search the opposite direction.
inline std::vector<PromptRecord> swap_sides(std::span<const PromptRecord> records) {
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    PromptRecord s = rec;
    std::swap(s.images_a, s.images_b);
    std::swap(s.emb_a, s.emb_b);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace divrep
