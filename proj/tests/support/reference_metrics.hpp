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

// Straightforward metric re-implementation over flat tuples with linear
// scans, used only to cross-check slim/eval.hpp.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace slim::testing {

struct FlatRun {
  std::vector<std::tuple<std::string, unsigned, std::string>> rows;  // qid, rank, doc
};
struct FlatQrels {
  std::vector<std::tuple<std::string, std::string, int>> rows;  // qid, doc, grade
};

struct RefMetrics {
  std::optional<double> mrr, ndcg, recall;
};

inline RefMetrics reference_metrics(const FlatRun& run, const FlatQrels& qrels, unsigned mrr_k,
                                    unsigned ndcg_k, unsigned recall_k) {
  auto judged = [&](const std::string& q) {
    return std::any_of(qrels.rows.begin(), qrels.rows.end(), [&](auto& r) { return std::get<0>(r) == q; });
  };
  auto grade = [&](const std::string& q, const std::string& d) {
    int g = 0;
    for (const auto& [qq, dd, gg] : qrels.rows)
      if (qq == q && dd == d) g = gg;
    return g;
  };
  std::vector<std::string> qids;
  for (const auto& r : run.rows) qids.push_back(std::get<0>(r));
  std::sort(qids.begin(), qids.end());
  qids.erase(std::unique(qids.begin(), qids.end()), qids.end());

  double mrr_sum = 0, ndcg_sum = 0, rec_sum = 0;
  int mrr_n = 0, ndcg_n = 0, rec_n = 0;
  for (const auto& q : qids) {
    if (!judged(q)) continue;
    std::vector<std::pair<unsigned, std::string>> ranked;
    for (const auto& [qq, rank, d] : run.rows)
      if (qq == q) ranked.emplace_back(rank, d);
    std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.first < b.first; });

    double rr = 0;
    for (unsigned i = 0; i < ranked.size() && i < mrr_k; ++i) {
      if (grade(q, ranked[i].second) > 0) {
        rr = 1.0 / (i + 1);
        break;
      }
    }
    mrr_sum += rr;
    ++mrr_n;

    // Histogram of judged grades yields the ideal ordering.
    std::map<int, int, std::greater<>> hist;
    int relevant = 0;
    for (const auto& [qq, d, g] : qrels.rows) {
      if (qq != q) continue;
      ++hist[g];
      relevant += g > 0;
    }
    if (relevant == 0) continue;
    double dcg = 0;
    std::vector<std::string> seen;
    for (unsigned i = 0; i < ranked.size() && i < ndcg_k; ++i) {
      if (std::find(seen.begin(), seen.end(), ranked[i].second) != seen.end()) continue;
      seen.push_back(ranked[i].second);
      dcg += (std::pow(2.0, grade(q, ranked[i].second)) - 1) / std::log2(i + 2.0);
    }
    double idcg = 0;
    unsigned pos = 0;
    for (const auto& [g, count] : hist) {
      for (int c = 0; c < count && pos < ndcg_k; ++c, ++pos) idcg += (std::pow(2.0, g) - 1) / std::log2(pos + 2.0);
    }
    ndcg_sum += idcg > 0 ? dcg / idcg : 0;
    ++ndcg_n;

    std::vector<std::string> hit;
    for (unsigned i = 0; i < ranked.size() && i < recall_k; ++i) {
      if (grade(q, ranked[i].second) > 0 &&
          std::find(hit.begin(), hit.end(), ranked[i].second) == hit.end()) {
        hit.push_back(ranked[i].second);
      }
    }
    rec_sum += static_cast<double>(hit.size()) / relevant;
    ++rec_n;
  }
  RefMetrics m;
  if (mrr_n) m.mrr = mrr_sum / mrr_n;
  if (ndcg_n) m.ndcg = ndcg_sum / ndcg_n;
  if (rec_n) m.recall = rec_sum / rec_n;
  return m;
}

}  // namespace slim::testing
