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

// Core sparse types over the lexical vocabulary and the element-wise algebra
// (dot, max-pool, row sum, argmax mask) the retrieval stages are built from.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slim/error.hpp"

namespace slim {

/// Index into the lexical vocabulary.
using TermId = std::uint32_t;

/// Stored impact / token weight.
using Weight = float;

template <typename W>
struct BasicEntry {
  TermId term = 0;
  W weight = 0;

  friend bool operator==(const BasicEntry&, const BasicEntry&) = default;
};

/// Sparse non-negative vector, entries strictly ascending by term, no zero
/// weights stored. Immutable once built.
template <typename W>
class BasicSparseVector {
 public:
  using weight_type = W;
  using entry_type = BasicEntry<W>;

  BasicSparseVector() = default;

  /// Validates sortedness, uniqueness and non-negativity; drops zeros.
  /// Throws ContractError naming the violated invariant.
  static BasicSparseVector from_entries(std::vector<entry_type> entries) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (!std::isfinite(static_cast<double>(e.weight))) {
        throw ContractError("non-finite weight for term " + std::to_string(e.term));
      }
      if (e.weight < 0) {
        throw ContractError("negative weight for term " + std::to_string(e.term));
      }
      if (i > 0) {
        if (e.term == entries[i - 1].term) {
          throw ContractError("duplicate term " + std::to_string(e.term));
        }
        if (e.term < entries[i - 1].term) {
          throw ContractError("terms not sorted ascending at term " + std::to_string(e.term));
        }
      }
      if (e.weight > 0) entries[out++] = e;
    }
    entries.resize(out);
    return BasicSparseVector(std::move(entries));
  }

  /// Convenience for literals in tests and generators.
  static BasicSparseVector from_pairs(std::initializer_list<std::pair<TermId, W>> pairs) {
    std::vector<entry_type> entries;
    entries.reserve(pairs.size());
    for (const auto& [t, w] : pairs) entries.push_back({t, w});
    return from_entries(std::move(entries));
  }

  /// Adopts entries already known to satisfy the invariants. No checks.
  static BasicSparseVector adopt_unchecked(std::vector<entry_type> entries) {
    return BasicSparseVector(std::move(entries));
  }

  std::span<const entry_type> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Weight of `term`, 0 when absent.
  W at(TermId term) const noexcept {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                               [](const entry_type& e, TermId t) { return e.term < t; });
    return (it != entries_.end() && it->term == term) ? it->weight : W{0};
  }

  /// Largest stored term id; requires !empty().
  TermId max_term() const noexcept { return entries_.back().term; }

  friend bool operator==(const BasicSparseVector&, const BasicSparseVector&) = default;

 private:
  explicit BasicSparseVector(std::vector<entry_type> entries) : entries_(std::move(entries)) {}

  std::vector<entry_type> entries_;
};

using SparseVector = BasicSparseVector<Weight>;
/// Query-side sums are kept in double so fused scores stay within 1e-6 of
/// their factored form.
using AccumVector = BasicSparseVector<double>;

/// One text's token vectors in position order. May be empty.
struct TokenMatrix {
  std::vector<SparseVector> rows;

  std::size_t num_tokens() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
  std::size_t nnz() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
  }

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;
};

/// Element-wise maximum over a TokenMatrix.
struct PooledSummary {
  SparseVector vector;

  friend bool operator==(const PooledSummary&, const PooledSummary&) = default;
};

enum class ScoreKind { exact, lower, upper, fused };

inline const char* to_string(ScoreKind k) noexcept {
  switch (k) {
    case ScoreKind::exact: return "exact";
    case ScoreKind::lower: return "lower";
    case ScoreKind::upper: return "upper";
    case ScoreKind::fused: return "fused";
  }
  return "unknown";
}

struct Score {
  double value = 0.0;
  ScoreKind kind = ScoreKind::exact;

  friend bool operator==(const Score&, const Score&) = default;
};

/// Inner product over shared terms, accumulated in double in ascending term
/// order.
template <typename A, typename B>
double dot(const BasicSparseVector<A>& a, const BasicSparseVector<B>& b) noexcept {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  double sum = 0.0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].term < eb[j].term) {
      ++i;
    } else if (eb[j].term < ea[i].term) {
      ++j;
    } else {
      sum += static_cast<double>(ea[i].weight) * static_cast<double>(eb[j].weight);
      ++i;
      ++j;
    }
  }
  return sum;
}

namespace detail {

// Gathers every (term, weight) of the matrix ordered by term, row order kept
// within a term.
template <typename W>
std::vector<BasicEntry<W>> gather_by_term(const TokenMatrix& m) {
  std::vector<BasicEntry<W>> all;
  all.reserve(m.nnz());
  for (const auto& row : m.rows) {
    for (const auto& e : row.entries()) all.push_back({e.term, static_cast<W>(e.weight)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& x, const auto& y) { return x.term < y.term; });
  return all;
}

}  // namespace detail

inline PooledSummary max_pool(const TokenMatrix& m) {
  auto all = detail::gather_by_term<Weight>(m);
  std::vector<BasicEntry<Weight>> out;
  for (const auto& e : all) {
    if (!out.empty() && out.back().term == e.term) {
      out.back().weight = std::max(out.back().weight, e.weight);
    } else {
      out.push_back(e);
    }
  }
  return PooledSummary{SparseVector::adopt_unchecked(std::move(out))};
}

/// Per-term sum across rows; each term's summands are added in row order.
template <typename Acc = double>
BasicSparseVector<Acc> sum_rows(const TokenMatrix& m) {
  auto all = detail::gather_by_term<Acc>(m);
  std::vector<BasicEntry<Acc>> out;
  for (const auto& e : all) {
    if (!out.empty() && out.back().term == e.term) {
      out.back().weight += e.weight;
    } else {
      out.push_back(e);
    }
  }
  return BasicSparseVector<Acc>::adopt_unchecked(std::move(out));
}

/// Keeps only the maximum-weight entry; ties go to the smallest term.
template <typename W>
BasicSparseVector<W> argmax_mask(const BasicSparseVector<W>& v) {
  auto entries = v.entries();
  if (entries.empty()) return {};
  const auto* best = &entries[0];
  for (const auto& e : entries) {
    if (e.weight > best->weight) best = &e;
  }
  return BasicSparseVector<W>::adopt_unchecked(std::vector<BasicEntry<W>>{*best});
}

/// Σ_i argmax_mask(row_i), accumulated in `Acc`.
template <typename Acc = double>
BasicSparseVector<Acc> sum_argmax_masks(const TokenMatrix& m) {
  TokenMatrix masks;
  masks.rows.reserve(m.rows.size());
  for (const auto& row : m.rows) masks.rows.push_back(argmax_mask(row));
  return sum_rows<Acc>(masks);
}

}  // namespace slim
