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

// TREC qrels/run files, MRR / nDCG / Recall at k, and the pruning
// effectiveness-efficiency sweep.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "slim/error.hpp"
#include "slim/index.hpp"
#include "slim/ingest.hpp"
#include "slim/search.hpp"

namespace slim {

/// qid -> doc id -> relevance grade (>= 0).
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  void add(const std::string& qid, const std::string& doc_id, int grade) {
    if (grade < 0) throw ContractError("negative relevance grade for " + qid + "/" + doc_id);
    judgments[qid][doc_id] = grade;
  }

  const std::map<std::string, int>* find(const std::string& qid) const {
    auto it = judgments.find(qid);
    return it == judgments.end() ? nullptr : &it->second;
  }

  friend bool operator==(const Qrels&, const Qrels&) = default;
};

struct RunEntry {
  std::string doc_id;
  std::uint32_t rank = 0;
  double score = 0.0;
};

/// qid -> entries in rank order.
using Run = std::map<std::string, std::vector<RunEntry>>;

inline Qrels read_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open qrels " + path);
  Qrels q;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string qid, iter, doc;
    long long grade = 0;
    if (!(ss >> qid)) continue;
    if (!(ss >> iter >> doc >> grade)) {
      throw ContractError(fmt::format("{}:{}: expected \"qid 0 docid grade\"", path, line_no));
    }
    if (grade < 0 || grade > std::numeric_limits<int>::max()) {
      throw ContractError(fmt::format("{}:{}: grade out of range", path, line_no));
    }
    q.add(qid, doc, static_cast<int>(grade));
  }
  return q;
}

inline void write_qrels(std::ostream& out, const Qrels& q) {
  for (const auto& [qid, docs] : q.judgments) {
    for (const auto& [doc, grade] : docs) out << qid << " 0 " << doc << ' ' << grade << '\n';
  }
}

inline Run read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run " + path);
  Run run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string qid, q0, doc, tag;
    long long rank = 0;
    double score = 0;
    if (!(ss >> qid)) continue;
    if (!(ss >> q0 >> doc >> rank >> score)) {
      throw ContractError(fmt::format("{}:{}: expected \"qid Q0 docid rank score tag\"", path, line_no));
    }
    if (rank < 1 || rank > std::numeric_limits<std::uint32_t>::max()) {
      throw ContractError(fmt::format("{}:{}: rank must be positive", path, line_no));
    }
    run[qid].push_back({doc, static_cast<std::uint32_t>(rank), score});
  }
  for (auto& [qid, entries] : run) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
  }
  return run;
}

inline std::vector<RunEntry> to_run_entries(const HitList& hits) {
  std::vector<RunEntry> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back({h.doc_id, h.rank, h.score.value});
  return out;
}

/// Mean over evaluated queries; `value` is empty when none were evaluated.
struct MetricResult {
  std::optional<double> value;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

namespace detail {

template <typename PerQuery>
MetricResult mean_over_run(const Run& run, const Qrels& qrels, bool require_relevant,
                           PerQuery&& per_query) {
  MetricResult r;
  double sum = 0.0;
  for (const auto& [qid, entries] : run) {
    const auto* judged = qrels.find(qid);
    if (!judged) {
      ++r.skipped;
      continue;
    }
    if (require_relevant &&
        std::none_of(judged->begin(), judged->end(), [](const auto& kv) { return kv.second > 0; })) {
      ++r.skipped;
      continue;
    }
    sum += per_query(entries, *judged);
    ++r.evaluated;
  }
  if (r.evaluated > 0) r.value = sum / static_cast<double>(r.evaluated);
  return r;
}

inline int grade_of(const std::map<std::string, int>& judged, const std::string& doc) {
  auto it = judged.find(doc);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace detail

/// Reciprocal rank of the first relevant (grade > 0) document in the top k.
/// Queries missing from qrels are skipped.
inline MetricResult mrr_at_k(const Run& run, const Qrels& qrels, std::size_t k = 10) {
  return detail::mean_over_run(run, qrels, false, [k](const auto& entries, const auto& judged) {
    const std::size_t n = std::min(k, entries.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (detail::grade_of(judged, entries[i].doc_id) > 0) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
  });
}

/// Graded nDCG, gain 2^grade - 1, discount log2(position + 1). Queries with
/// no relevant document are skipped.
inline MetricResult ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k = 10) {
  return detail::mean_over_run(run, qrels, true, [k](const auto& entries, const auto& judged) {
    auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
    double dcg = 0.0;
    std::set<std::string> seen;
    const std::size_t n = std::min(k, entries.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen.insert(entries[i].doc_id).second) continue;
      dcg += gain(detail::grade_of(judged, entries[i].doc_id)) / std::log2(static_cast<double>(i) + 2.0);
    }
    std::vector<int> grades;
    for (const auto& [doc, g] : judged) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
      idcg += gain(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
    }
    return idcg > 0 ? dcg / idcg : 0.0;
  });
}

/// |relevant ∩ top k| / |relevant|; queries with no relevant document are
/// skipped.
inline MetricResult recall_at_k(const Run& run, const Qrels& qrels, std::size_t k = 1000) {
  return detail::mean_over_run(run, qrels, true, [k](const auto& entries, const auto& judged) {
    std::size_t relevant = 0;
    for (const auto& [doc, g] : judged) relevant += g > 0;
    std::set<std::string> found;
    const std::size_t n = std::min(k, entries.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (detail::grade_of(judged, entries[i].doc_id) > 0) found.insert(entries[i].doc_id);
    }
    return static_cast<double>(found.size()) / static_cast<double>(relevant);
  });
}

// --- sweep ---------------------------------------------------------------

struct SweepSetting {
  double idf_threshold = 0.0;
  std::size_t first_stage_k = 4000;
};

struct SweepOptions {
  double weight_threshold = 0.5;
  double beta = 0.01;
  std::size_t final_k = 1000;
  std::size_t warmup_passes = 1;
  /// Each query's latency is the minimum over this many timed passes.
  std::size_t timed_passes = 1;
  std::size_t max_query_tokens = 256;
};

struct SweepPoint {
  double idf_threshold = 0.0;
  std::size_t first_stage_k = 0;
  bool refine = false;
  double mrr10 = 0.0;
  double recall1000 = 0.0;
  double mean_latency_ms = 0.0;
  /// First-stage share of the latency, same per-query minimum.
  double mean_stage1_ms = 0.0;
};

struct SweepReport {
  std::vector<SweepPoint> points;
  /// Posting count of the pruned index behind points[i].
  std::vector<std::size_t> posting_counts;
};

inline constexpr const char* kSweepCsvHeader =
    "idf_threshold,first_stage_k,refine,mrr10,recall1000,mean_latency_ms";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << kSweepCsvHeader << '\n';
  for (const auto& p : points) {
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}\n", p.idf_threshold, p.first_stage_k,
                       p.refine ? "true" : "false", p.mrr10, p.recall1000, p.mean_latency_ms);
  }
}

/// Runs every grid point with and without refinement. The unpruned index is
/// rebuilt once from the document store; each point prunes a copy of it.
/// Sequential and single-threaded so latencies are comparable.
inline SweepReport sweep(const Collection& collection, const std::vector<QueryRecord>& queries,
                         const Qrels& qrels, const std::vector<SweepSetting>& grid,
                         const SweepOptions& opts) {
  if (opts.timed_passes == 0) throw std::invalid_argument("timed_passes must be positive");
  if (queries.empty()) throw ContractError("sweep needs at least one query");
  const InvertedIndex base = rebuild_from_store(collection.store, collection.index.doc_table,
                                                collection.index.vocab_size);
  SweepReport report;
  std::map<std::pair<std::size_t, double>, std::size_t> counts;  // (k, idf) -> postings
  for (const auto& setting : grid) {
    const InvertedIndex pruned = prune(base, {opts.weight_threshold, setting.idf_threshold});
    const std::size_t postings = pruned.posting_count();
    counts[{setting.first_stage_k, setting.idf_threshold}] = postings;
    for (bool refine : {false, true}) {
      SearchConfig cfg;
      cfg.beta = opts.beta;
      cfg.first_stage_k = setting.first_stage_k;
      cfg.final_k = opts.final_k;
      cfg.refine = refine;
      cfg.max_query_tokens = opts.max_query_tokens;
      Searcher searcher(pruned, collection.store, cfg);

      for (std::size_t w = 0; w < opts.warmup_passes; ++w) {
        for (const auto& q : queries) (void)searcher.search(q.matrix);
      }
      std::vector<double> best(queries.size(), std::numeric_limits<double>::infinity());
      std::vector<double> best_stage1(queries.size(), std::numeric_limits<double>::infinity());
      Run run;
      for (std::size_t pass = 0; pass < opts.timed_passes; ++pass) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
          const auto t0 = std::chrono::steady_clock::now();
          SearchTiming timing;
          HitList hits = searcher.search(queries[i].matrix, &timing);
          const auto t1 = std::chrono::steady_clock::now();
          best[i] = std::min(best[i], std::chrono::duration<double, std::milli>(t1 - t0).count());
          best_stage1[i] = std::min(best_stage1[i], timing.stage1_ms);
          if (pass + 1 == opts.timed_passes) run[queries[i].id] = to_run_entries(hits);
        }
      }
      double total = 0.0;
      double total_stage1 = 0.0;
      for (std::size_t i = 0; i < queries.size(); ++i) {
        total += best[i];
        total_stage1 += best_stage1[i];
      }
      const auto nq = static_cast<double>(queries.size());

      const auto mrr = mrr_at_k(run, qrels, 10);
      const auto rec = recall_at_k(run, qrels, 1000);
      if (!mrr.value || !rec.value) throw ContractError("sweep: no query has relevance judgments");
      report.points.push_back({setting.idf_threshold, setting.first_stage_k, refine, *mrr.value,
                               *rec.value, total / nq, total_stage1 / nq});
      report.posting_counts.push_back(postings);
    }
  }
  // Raising the IDF threshold at fixed k must never grow the index.
  std::size_t prev_k = 0;
  std::size_t prev_count = 0;
  bool have_prev = false;
  for (const auto& [key, count] : counts) {
    if (have_prev && key.first == prev_k && count > prev_count) {
      throw InconsistencyError("posting count increased with a higher IDF threshold");
    }
    prev_k = key.first;
    prev_count = count;
    have_prev = true;
  }
  return report;
}

}  // namespace slim
