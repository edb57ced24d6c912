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

// Impact-scored inverted index over max-pooled document summaries, the
// document store of raw token matrices used for refinement, and post-hoc
// pruning of the inverted index.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "slim/error.hpp"
#include "slim/ingest.hpp"
#include "slim/model.hpp"

namespace slim {

/// Dense document ordinal, assigned in arrival order.
using DocOrdinal = std::uint32_t;

struct Posting {
  DocOrdinal doc = 0;
  Weight impact = 0;

  friend bool operator==(const Posting&, const Posting&) = default;
};

using PostingList = std::vector<Posting>;

/// Thresholds for post-hoc pruning. Zero disables the respective step.
struct PruneConfig {
  double weight_threshold = 0.5;
  double idf_threshold = 3.0;

  static constexpr PruneConfig none() noexcept { return {0.0, 0.0}; }

  void validate() const {
    if (!(weight_threshold >= 0) || !std::isfinite(weight_threshold)) {
      throw std::invalid_argument("weight_threshold must be a finite value >= 0");
    }
    if (!(idf_threshold >= 0) || !std::isfinite(idf_threshold)) {
      throw std::invalid_argument("idf_threshold must be a finite value >= 0");
    }
  }

  friend bool operator==(const PruneConfig&, const PruneConfig&) = default;
};

struct InvertedIndex {
  std::uint32_t vocab_size = 0;
  /// Indexed by term id; size == vocab_size. Each list ascending by ordinal.
  std::vector<PostingList> lists;
  /// ordinal -> external doc id.
  std::vector<std::string> doc_table;
  /// Pruning that has been applied (component-wise max over prune calls).
  PruneConfig pruned_with = PruneConfig::none();

  std::size_t num_docs() const noexcept { return doc_table.size(); }

  std::span<const Posting> postings(TermId t) const noexcept {
    if (t >= lists.size()) return {};
    return lists[t];
  }

  std::size_t posting_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : lists) n += l.size();
    return n;
  }

  std::size_t num_terms() const noexcept {
    std::size_t n = 0;
    for (const auto& l : lists) n += !l.empty();
    return n;
  }

  friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;
};

/// Raw per-document token matrices, unpruned, addressed by ordinal.
struct DocStore {
  std::vector<TokenMatrix> matrices;

  std::size_t size() const noexcept { return matrices.size(); }

  const TokenMatrix& at(DocOrdinal ord) const {
    if (ord >= matrices.size()) {
      throw InconsistencyError("ordinal " + std::to_string(ord) + " missing from document store");
    }
    return matrices[ord];
  }

  friend bool operator==(const DocStore&, const DocStore&) = default;
};

struct Collection {
  InvertedIndex index;
  DocStore store;

  friend bool operator==(const Collection&, const Collection&) = default;
};

struct BuildOptions {
  /// Upper bound on the estimated in-memory size of index + store.
  std::size_t memory_budget_bytes = std::numeric_limits<std::size_t>::max();
};

/// Streams documents into an inverted index over pooled summaries plus a
/// document store.
class IndexBuilder {
 public:
  explicit IndexBuilder(std::uint32_t vocab_size, BuildOptions opts = {})
      : opts_(opts) {
    if (vocab_size == 0) throw std::invalid_argument("vocab_size must be >= 1");
    out_.index.vocab_size = vocab_size;
    out_.index.lists.resize(vocab_size);
    charge(static_cast<std::size_t>(vocab_size) * sizeof(PostingList));
  }

  void add(const DocumentRecord& doc) {
    if (doc.id.empty()) throw ContractError("empty doc id");
    if (doc.id.find_first_of("\t\n\r") != std::string::npos) {
      throw ContractError("doc id \"" + doc.id + "\" contains tab or newline");
    }
    if (!ids_.insert(doc.id).second) throw ContractError("duplicate doc id \"" + doc.id + "\"");
    if (out_.index.doc_table.size() >= std::numeric_limits<DocOrdinal>::max()) {
      throw BudgetError("too many documents for 32-bit ordinals");
    }
    for (const auto& row : doc.matrix.rows) {
      if (!row.empty() && row.max_term() >= out_.index.vocab_size) {
        throw ContractError("doc \"" + doc.id + "\": term " + std::to_string(row.max_term()) +
                            " >= vocab_size " + std::to_string(out_.index.vocab_size));
      }
    }
    const auto pooled = max_pool(doc.matrix);
    charge(pooled.vector.size() * sizeof(Posting) + doc.matrix.nnz() * sizeof(BasicEntry<Weight>) +
           doc.matrix.num_tokens() * sizeof(SparseVector) + sizeof(TokenMatrix) +
           doc.id.size() + sizeof(std::string));

    const auto ord = static_cast<DocOrdinal>(out_.index.doc_table.size());
    for (const auto& e : pooled.vector.entries()) out_.index.lists[e.term].push_back({ord, e.weight});
    out_.index.doc_table.push_back(doc.id);
    out_.store.matrices.push_back(doc.matrix);
  }

  std::size_t estimated_bytes() const noexcept { return bytes_; }

  Collection finish() && { return std::move(out_); }

 private:
  void charge(std::size_t n) {
    bytes_ += n;
    if (bytes_ > opts_.memory_budget_bytes) {
      throw BudgetError("corpus exceeds memory budget of " +
                        std::to_string(opts_.memory_budget_bytes) + " bytes");
    }
  }

  BuildOptions opts_;
  Collection out_;
  std::unordered_set<std::string> ids_;
  std::size_t bytes_ = 0;
};

template <typename Range>
Collection build(std::uint32_t vocab_size, const Range& docs, BuildOptions opts = {}) {
  IndexBuilder b(vocab_size, opts);
  for (const auto& d : docs) b.add(d);
  return std::move(b).finish();
}

/// Reconstructs the unpruned inverted index from the document store. Equals
/// what build() produced for the same documents.
inline InvertedIndex rebuild_from_store(const DocStore& store, std::vector<std::string> doc_table,
                                        std::uint32_t vocab_size) {
  if (doc_table.size() != store.size()) {
    throw InconsistencyError("doc table and document store sizes differ");
  }
  InvertedIndex idx;
  idx.vocab_size = vocab_size;
  idx.lists.resize(vocab_size);
  idx.doc_table = std::move(doc_table);
  for (std::size_t ord = 0; ord < store.size(); ++ord) {
    const auto pooled = max_pool(store.matrices[ord]);
    for (const auto& e : pooled.vector.entries()) {
      if (e.term >= vocab_size) throw InconsistencyError("stored term " + std::to_string(e.term) + " exceeds vocab_size " + std::to_string(vocab_size));
      idx.lists[e.term].push_back({static_cast<DocOrdinal>(ord), e.weight});
    }
  }
  return idx;
}

/// ln(num_docs / df).
inline double inverse_document_frequency(std::size_t num_docs, std::size_t df) noexcept {
  return std::log(static_cast<double>(num_docs) / static_cast<double>(df));
}

/// Weight pruning (drop postings with impact < weight_threshold), then IDF
/// pruning (drop lists whose IDF, with df counted after weight pruning, is
/// below idf_threshold). Returns a new index.
inline InvertedIndex prune(const InvertedIndex& index, const PruneConfig& cfg) {
  cfg.validate();
  InvertedIndex out;
  out.vocab_size = index.vocab_size;
  out.doc_table = index.doc_table;
  out.lists.resize(index.lists.size());
  out.pruned_with = {std::max(index.pruned_with.weight_threshold, cfg.weight_threshold),
                     std::max(index.pruned_with.idf_threshold, cfg.idf_threshold)};
  const std::size_t n = index.num_docs();
  for (std::size_t t = 0; t < index.lists.size(); ++t) {
    PostingList kept;
    for (const auto& p : index.lists[t]) {
      if (static_cast<double>(p.impact) >= cfg.weight_threshold) kept.push_back(p);
    }
    if (kept.empty()) continue;
    if (cfg.idf_threshold > 0 && inverse_document_frequency(n, kept.size()) < cfg.idf_threshold) {
      continue;
    }
    out.lists[t] = std::move(kept);
  }
  return out;
}

}  // namespace slim
