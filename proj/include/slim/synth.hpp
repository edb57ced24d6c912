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

// Synthetic text collections: Zipfian word streams pushed through the toy
// encoder, with queries drawn from a source document and graded judgments
// (source document grade 2, a perturbed sibling grade 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "slim/eval.hpp"
#include "slim/ingest.hpp"

namespace slim {

struct SynthParams {
  std::size_t num_docs = 1000;
  std::uint32_t vocab_size = 30522;
  /// Distinct words of the text generator, Zipf-distributed.
  std::size_t num_words = 10000;
  double zipf_exponent = 1.0;
  std::size_t min_doc_tokens = 16;
  std::size_t max_doc_tokens = 64;
  std::size_t num_queries = 100;
  std::size_t min_query_tokens = 3;
  std::size_t max_query_tokens = 8;
  /// Probability that a sibling keeps each token of its source document.
  double sibling_keep = 0.75;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_docs == 0) throw std::invalid_argument("num_docs must be positive");
    if (vocab_size == 0) throw std::invalid_argument("vocab_size must be positive");
    if (num_words == 0) throw std::invalid_argument("num_words must be positive");
    if (min_doc_tokens == 0 || min_doc_tokens > max_doc_tokens) {
      throw std::invalid_argument("need 1 <= min_doc_tokens <= max_doc_tokens");
    }
    if (min_query_tokens == 0 || min_query_tokens > max_query_tokens) {
      throw std::invalid_argument("need 1 <= min_query_tokens <= max_query_tokens");
    }
    if (2 * num_queries > num_docs) {
      throw std::invalid_argument("num_queries must be at most num_docs / 2");
    }
  }
};

struct SynthCollection {
  CorpusManifest manifest;
  std::vector<std::string> doc_texts;
  std::vector<DocumentRecord> docs;
  std::vector<std::string> query_texts;
  std::vector<QueryRecord> queries;
  Qrels qrels;
};

inline std::string synth_word(std::size_t rank) { return "w" + std::to_string(rank); }

inline SynthCollection generate_synthetic(const SynthParams& p) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  std::vector<double> zipf(p.num_words);
  for (std::size_t r = 0; r < p.num_words; ++r) {
    zipf[r] = 1.0 / std::pow(static_cast<double>(r + 1), p.zipf_exponent);
  }
  std::discrete_distribution<std::size_t> word_dist(zipf.begin(), zipf.end());
  std::uniform_int_distribution<std::size_t> len_dist(p.min_doc_tokens, p.max_doc_tokens);

  std::vector<std::vector<std::size_t>> words(p.num_docs);
  for (auto& doc : words) {
    doc.resize(len_dist(rng));
    for (auto& w : doc) w = word_dist(rng);
  }

  std::vector<std::size_t> order(p.num_docs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  SynthCollection out;
  out.manifest = {p.vocab_size, p.num_docs};
  std::uniform_int_distribution<std::size_t> qlen_dist(p.min_query_tokens, p.max_query_tokens);
  std::bernoulli_distribution keep(p.sibling_keep);
  std::vector<std::vector<std::size_t>> query_words(p.num_queries);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(p.num_queries);
  for (std::size_t q = 0; q < p.num_queries; ++q) {
    const std::size_t source = order[2 * q];
    const std::size_t sibling = order[2 * q + 1];
    pairs[q] = {source, sibling};
    auto& sib = words[sibling];
    sib = words[source];
    for (auto& w : sib) {
      if (!keep(rng)) w = word_dist(rng);
    }
    // Query words favour the rarer words of the source, as content words do.
    const auto& src = words[source];
    std::vector<double> pick(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) pick[i] = std::log(2.0 + static_cast<double>(src[i]));
    const std::size_t n = std::min(qlen_dist(rng), src.size());
    auto& qw = query_words[q];
    for (std::size_t i = 0; i < n; ++i) {
      std::discrete_distribution<std::size_t> d(pick.begin(), pick.end());
      const std::size_t at = d(rng);
      qw.push_back(src[at]);
      pick[at] = 0.0;
    }
  }

  auto to_text = [](const std::vector<std::size_t>& ws) {
    std::string s;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (i) s += ' ';
      s += synth_word(ws[i]);
    }
    return s;
  };
  out.doc_texts.reserve(p.num_docs);
  out.docs.reserve(p.num_docs);
  for (std::size_t d = 0; d < p.num_docs; ++d) {
    out.doc_texts.push_back(to_text(words[d]));
    out.docs.push_back({"d" + std::to_string(d), toy_encode(out.doc_texts.back(), p.vocab_size)});
  }
  for (std::size_t q = 0; q < p.num_queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    out.query_texts.push_back(to_text(query_words[q]));
    out.queries.push_back({qid, toy_encode(out.query_texts.back(), p.vocab_size)});
    out.qrels.add(qid, out.docs[pairs[q].first].id, 2);
    out.qrels.add(qid, out.docs[pairs[q].second].id, 1);
  }
  return out;
}

}  // namespace slim
