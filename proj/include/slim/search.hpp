// Copyright 2026-present the slim project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Two-stage retrieval: fused-query first stage over the pooled inverted
// index, then exact late-interaction refinement against the document store.
// Also the exhaustive exact search and the per-token scatter search used to
// cross-check it.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "slim/error.hpp"
#include "slim/index.hpp"
#include "slim/model.hpp"

namespace slim {

struct SearchConfig {
  double beta = 0.01;
  std::size_t first_stage_k = 4000;
  std::size_t final_k = 1000;
  bool refine = true;
  std::size_t max_query_tokens = 256;

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    if (first_stage_k == 0) throw std::invalid_argument("first_stage_k must be positive");
    if (final_k == 0) throw std::invalid_argument("final_k must be positive");
    if (refine && final_k > first_stage_k) {
      throw std::invalid_argument("final_k must not exceed first_stage_k when refining");
    }
  }
};

/// Σ_i (β·argmax_mask(φ_i) + (1−β)·φ_i), kept in double.
struct FusedQuery {
  AccumVector vector;
};

struct ScoredHit {
  DocOrdinal ordinal = 0;
  std::string doc_id;
  Score score;
  std::uint32_t rank = 0;

  friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

using HitList = std::vector<ScoredHit>;

/// Sum-of-per-query-token-maxima over the original token vectors.
inline double exact_score(const TokenMatrix& query, const TokenMatrix& doc) noexcept {
  double total = 0.0;
  for (const auto& q : query.rows) {
    double best = 0.0;
    for (const auto& d : doc.rows) best = std::max(best, dot(q, d));
    total += best;
  }
  return total;
}

inline FusedQuery fuse_query(const TokenMatrix& q, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  const auto lower = sum_argmax_masks<double>(q);
  const auto upper = sum_rows<double>(q);
  auto el = lower.entries();
  auto eu = upper.entries();
  std::vector<BasicEntry<double>> out;
  out.reserve(eu.size());
  // Argmax terms are a subset of the row-sum terms.
  std::size_t i = 0;
  for (const auto& u : eu) {
    double l = 0.0;
    if (i < el.size() && el[i].term == u.term) l = el[i++].weight;
    const double w = beta * l + (1.0 - beta) * u.weight;
    if (w > 0) out.push_back({u.term, w});
  }
  return FusedQuery{AccumVector::adopt_unchecked(std::move(out))};
}

struct Bounds {
  Score lower{0.0, ScoreKind::lower};
  Score upper{0.0, ScoreKind::upper};
};

inline Bounds bounds(const TokenMatrix& q, const TokenMatrix& doc) {
  const auto pooled = max_pool(doc);
  return {{dot(sum_argmax_masks<double>(q), pooled.vector), ScoreKind::lower},
          {dot(sum_rows<double>(q), pooled.vector), ScoreKind::upper}};
}

inline Bounds bounds(const DocStore& store, const TokenMatrix& q, DocOrdinal ord) {
  return bounds(q, store.at(ord));
}

namespace detail {

inline bool better(double sa, DocOrdinal a, double sb, DocOrdinal b) noexcept {
  return sa != sb ? sa > sb : a < b;
}

// Selects the top k of (score, ordinal) pairs, ordered by score desc then
// ordinal asc.
inline void select_top(std::vector<std::pair<double, DocOrdinal>>& v, std::size_t k) {
  auto cmp = [](const auto& x, const auto& y) { return better(x.first, x.second, y.first, y.second); };
  if (v.size() > k) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), cmp);
    v.resize(k);
  }
  std::sort(v.begin(), v.end(), cmp);
}

inline HitList to_hits(const std::vector<std::pair<double, DocOrdinal>>& v, ScoreKind kind,
                       const std::vector<std::string>* doc_table) {
  HitList hits;
  hits.reserve(v.size());
  for (std::size_t r = 0; r < v.size(); ++r) {
    ScoredHit h;
    h.ordinal = v[r].second;
    if (doc_table) h.doc_id = (*doc_table)[h.ordinal];
    h.score = {v[r].first, kind};
    h.rank = static_cast<std::uint32_t>(r + 1);
    hits.push_back(std::move(h));
  }
  return hits;
}

}  // namespace detail

/// Per-thread scratch for first-stage accumulation. Reusing one across
/// queries avoids re-zeroing the whole accumulator array.
struct Stage1Workspace {
  void prepare(std::size_t num_docs) {
    if (acc_.size() != num_docs) {
      acc_.assign(num_docs, 0.0);
      touched_.clear();
    }
  }

  std::vector<double> acc_;
  std::vector<DocOrdinal> touched_;
  std::vector<std::pair<double, DocOrdinal>> scored_;
};

namespace detail {

// Term-at-a-time accumulation into ws.scored_, leaving the top k sorted.
inline std::vector<std::pair<double, DocOrdinal>>& accumulate(const InvertedIndex& index,
                                                              const FusedQuery& fq, std::size_t k,
                                                              Stage1Workspace& ws) {
  if (!fq.vector.empty() && fq.vector.max_term() >= index.vocab_size) {
    throw ContractError("query term " + std::to_string(fq.vector.max_term()) +
                        " >= vocab_size " + std::to_string(index.vocab_size));
  }
  ws.prepare(index.num_docs());
  auto& acc = ws.acc_;
  auto& touched = ws.touched_;
  for (const auto& qe : fq.vector.entries()) {
    const double qw = qe.weight;
    for (const auto& p : index.postings(qe.term)) {
      double& a = acc[p.doc];
      if (a == 0.0) touched.push_back(p.doc);
      a += qw * static_cast<double>(p.impact);
    }
  }
  auto& scored = ws.scored_;
  scored.clear();
  scored.reserve(touched.size());
  for (auto d : touched) {
    scored.emplace_back(acc[d], d);
    acc[d] = 0.0;
  }
  touched.clear();
  select_top(scored, k);
  return scored;
}

inline std::vector<std::pair<double, DocOrdinal>> rescore(
    const DocStore& store, const TokenMatrix& q,
    const std::vector<std::pair<double, DocOrdinal>>& candidates, std::size_t final_k) {
  std::vector<std::pair<double, DocOrdinal>> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) scored.emplace_back(exact_score(q, store.at(c.second)), c.second);
  select_top(scored, final_k);
  return scored;
}

}  // namespace detail

/// Term-at-a-time accumulation of dot(fused query, pooled summary). Only
/// documents with a positive score are returned.
inline HitList stage1(const InvertedIndex& index, const FusedQuery& fq, std::size_t k,
                      Stage1Workspace& ws) {
  return detail::to_hits(detail::accumulate(index, fq, k, ws), ScoreKind::fused, &index.doc_table);
}

inline HitList stage1(const InvertedIndex& index, const FusedQuery& fq, std::size_t k) {
  Stage1Workspace ws;
  return stage1(index, fq, k, ws);
}

/// Rescores candidates exactly against the unpruned token matrices, keeps
/// the best final_k. doc_id is carried over from the candidates.
inline HitList refine(const DocStore& store, const TokenMatrix& q, const HitList& candidates,
                      std::size_t final_k) {
  std::vector<std::pair<double, DocOrdinal>> ords;
  ords.reserve(candidates.size());
  for (const auto& c : candidates) ords.emplace_back(c.score.value, c.ordinal);
  HitList out = detail::to_hits(detail::rescore(store, q, ords, final_k), ScoreKind::exact, nullptr);
  // Candidates are few; a sort-and-search lookup keeps ids without a map.
  std::vector<std::pair<DocOrdinal, const std::string*>> by_ord;
  by_ord.reserve(candidates.size());
  for (const auto& c : candidates) by_ord.emplace_back(c.ordinal, &c.doc_id);
  std::sort(by_ord.begin(), by_ord.end());
  for (auto& h : out) {
    auto it = std::lower_bound(by_ord.begin(), by_ord.end(), h.ordinal,
                               [](const auto& e, DocOrdinal o) { return e.first < o; });
    h.doc_id = *it->second;
  }
  return out;
}

/// Exhaustive exact search over every stored document, zero scores
/// included.
inline HitList oracle_search(const DocStore& store, const TokenMatrix& q, std::size_t k,
                             const std::vector<std::string>* doc_table = nullptr) {
  std::vector<std::pair<double, DocOrdinal>> scored;
  scored.reserve(store.size());
  for (std::size_t d = 0; d < store.size(); ++d) {
    scored.emplace_back(exact_score(q, store.matrices[d]), static_cast<DocOrdinal>(d));
  }
  detail::select_top(scored, k);
  return detail::to_hits(scored, ScoreKind::exact, doc_table);
}

/// Token-level inverted index: every document token is its own
/// sub-document.
struct TokenIndex {
  struct Entry {
    std::uint32_t subdoc = 0;
    Weight weight = 0;
  };
  std::vector<std::vector<Entry>> lists;       // by term
  std::vector<DocOrdinal> subdoc_owner;        // subdoc -> document
  std::size_t num_docs = 0;

  static TokenIndex build(const DocStore& store, std::uint32_t vocab_size) {
    TokenIndex ti;
    ti.lists.resize(vocab_size);
    ti.num_docs = store.size();
    for (std::size_t d = 0; d < store.size(); ++d) {
      for (const auto& row : store.matrices[d].rows) {
        const auto sub = static_cast<std::uint32_t>(ti.subdoc_owner.size());
        ti.subdoc_owner.push_back(static_cast<DocOrdinal>(d));
        for (const auto& e : row.entries()) {
          if (e.term >= vocab_size) throw ContractError("document term exceeds vocab_size");
          ti.lists[e.term].push_back({sub, e.weight});
        }
      }
    }
    return ti;
  }
};

/// Each query token is a sub-query against the token index; per-document
/// maxima are scattered out of sub-document scores, then summed across
/// query tokens.
inline HitList naive_search(const TokenIndex& ti, const TokenMatrix& q, std::size_t k,
                            const std::vector<std::string>* doc_table = nullptr) {
  std::vector<double> total(ti.num_docs, 0.0);
  std::vector<double> sub_score(ti.subdoc_owner.size(), 0.0);
  std::vector<double> doc_max(ti.num_docs, 0.0);
  std::vector<std::uint32_t> touched_sub;
  std::vector<DocOrdinal> touched_doc;
  for (const auto& row : q.rows) {
    for (const auto& e : row.entries()) {
      if (e.term >= ti.lists.size()) continue;
      for (const auto& p : ti.lists[e.term]) {
        double& s = sub_score[p.subdoc];
        if (s == 0.0) touched_sub.push_back(p.subdoc);
        s += static_cast<double>(e.weight) * static_cast<double>(p.weight);
      }
    }
    // scatter-max
    for (auto sub : touched_sub) {
      const auto d = ti.subdoc_owner[sub];
      if (doc_max[d] == 0.0) touched_doc.push_back(d);
      doc_max[d] = std::max(doc_max[d], sub_score[sub]);
      sub_score[sub] = 0.0;
    }
    // scatter-sum
    for (auto d : touched_doc) {
      total[d] += doc_max[d];
      doc_max[d] = 0.0;
    }
    touched_sub.clear();
    touched_doc.clear();
  }
  std::vector<std::pair<double, DocOrdinal>> scored;
  scored.reserve(ti.num_docs);
  for (std::size_t d = 0; d < ti.num_docs; ++d) scored.emplace_back(total[d], static_cast<DocOrdinal>(d));
  detail::select_top(scored, k);
  return detail::to_hits(scored, ScoreKind::exact, doc_table);
}

struct SearchTiming {
  double stage1_ms = 0.0;
  double refine_ms = 0.0;
};

/// The full two-stage pipeline over a (possibly pruned) index and the
/// unpruned store. Read-only; one Searcher per thread.
class Searcher {
 public:
  Searcher(const InvertedIndex& index, const DocStore& store, SearchConfig cfg)
      : index_(&index), store_(&store), cfg_(cfg) {
    cfg_.validate();
    if (index.num_docs() != store.size()) {
      throw InconsistencyError("index has " + std::to_string(index.num_docs()) +
                               " docs, store has " + std::to_string(store.size()));
    }
  }

  const SearchConfig& config() const noexcept { return cfg_; }

  HitList search(const TokenMatrix& q, SearchTiming* timing = nullptr) {
    if (q.num_tokens() > cfg_.max_query_tokens) {
      throw ContractError("query has " + std::to_string(q.num_tokens()) + " tokens, limit is " +
                          std::to_string(cfg_.max_query_tokens));
    }
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto fq = fuse_query(q, cfg_.beta);
    auto& top = detail::accumulate(*index_, fq, cfg_.first_stage_k, ws_);
    const auto t1 = clock::now();
    HitList hits;
    if (cfg_.refine) {
      hits = detail::to_hits(detail::rescore(*store_, q, top, cfg_.final_k), ScoreKind::exact,
                             &index_->doc_table);
    } else {
      if (top.size() > cfg_.final_k) top.resize(cfg_.final_k);
      hits = detail::to_hits(top, ScoreKind::fused, &index_->doc_table);
    }
    const auto t2 = clock::now();
    if (timing) {
      timing->stage1_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      timing->refine_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    }
    return hits;
  }

 private:
  const InvertedIndex* index_;
  const DocStore* store_;
  SearchConfig cfg_;
  Stage1Workspace ws_;
};

/// TREC run line: "qid Q0 docid rank score tag".
inline void write_run(std::ostream& out, const std::string& qid, const HitList& hits,
                      const std::string& tag) {
  for (const auto& h : hits) {
    out << fmt::format("{} Q0 {} {} {:.6f} {}\n", qid, h.doc_id, h.rank, h.score.value, tag);
  }
}

}  // namespace slim
