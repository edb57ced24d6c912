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
#include "slim/eval.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "slim/synth.hpp"
#include "support/generators.hpp"
#include "support/reference_metrics.hpp"
#include "support/tempdir.hpp"

namespace slim {
namespace {

Run one_query_run(std::vector<std::string> docs) {
  slim::Run run;
  for (std::size_t i = 0; i < docs.size(); ++i) run["q"].push_back({docs[i], static_cast<std::uint32_t>(i + 1), 0.0});
  return run;
}

std::vector<std::string> filler(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

Qrels single(const std::string& doc, int grade = 1) {
  Qrels q;
  q.add("q", doc, grade);
  return q;
}

TEST(MrrTest, Examples) {
  EXPECT_DOUBLE_EQ(*mrr_at_k(one_query_run({"rel", "a", "b"}), single("rel")).value, 1.0);
  auto docs = filler(3);
  docs.push_back("rel");
  EXPECT_DOUBLE_EQ(*mrr_at_k(one_query_run(docs), single("rel")).value, 0.25);
  docs = filler(10);
  docs.push_back("rel");
  EXPECT_DOUBLE_EQ(*mrr_at_k(one_query_run(docs), single("rel"), 10).value, 0.0);
}

TEST(MrrTest, QueryMissingFromQrelsIsSkipped) {
  slim::Run run = one_query_run({"rel"});
  run["other"].push_back({"rel", 1, 0.0});
  const auto r = mrr_at_k(run, single("rel"));
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(*r.value, 1.0);
}

TEST(MetricsTest, EmptyQuerySetIsAbsent) {
  EXPECT_FALSE(mrr_at_k({}, single("x")).value.has_value());
  EXPECT_FALSE(ndcg_at_k({}, single("x")).value.has_value());
  EXPECT_FALSE(recall_at_k(one_query_run({"a"}), Qrels{}).value.has_value());
}

TEST(NdcgTest, Examples) {
  Qrels q;
  q.add("q", "a", 2);
  q.add("q", "b", 1);
  EXPECT_DOUBLE_EQ(*ndcg_at_k(one_query_run({"a", "b", "c"}), q).value, 1.0);

  Qrels zero;
  zero.add("q", "a", 0);
  zero.add("q", "z", 1);
  EXPECT_DOUBLE_EQ(*ndcg_at_k(one_query_run({"a", "b"}), zero).value, 0.0);

  // Grades [0, 1] by rank, one relevant doc: DCG = 1/log2(3), IDCG = 1.
  const double expect = 1.0 / std::log2(3.0);
  EXPECT_NEAR(expect, 0.6309, 1e-4);
  EXPECT_NEAR(*ndcg_at_k(one_query_run({"x", "rel"}), single("rel")).value, expect, 1e-12);
}

TEST(NdcgTest, QueryWithoutRelevantDocsIsSkipped) {
  Qrels q;
  q.add("q", "a", 0);
  const auto r = ndcg_at_k(one_query_run({"a"}), q);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_FALSE(r.value.has_value());
}

TEST(RecallTest, Examples) {
  Qrels q;
  q.add("q", "a", 1);
  q.add("q", "b", 2);
  EXPECT_DOUBLE_EQ(*recall_at_k(one_query_run({"b", "x", "a"}), q).value, 1.0);
  EXPECT_DOUBLE_EQ(*recall_at_k(one_query_run({"x", "a"}), q).value, 0.5);
  EXPECT_DOUBLE_EQ(*recall_at_k(one_query_run({"x", "y"}), q).value, 0.0);
  EXPECT_DOUBLE_EQ(*recall_at_k(one_query_run({"x", "a", "b"}), q, 2).value, 0.5);
}

TEST(MetricsTest, AgreeWithReferenceOnRandomFixtures) {
  std::mt19937_64 rng(2024);
  for (int fixture = 0; fixture < 50; ++fixture) {
    slim::Run run;
    Qrels qrels;
    testing::FlatRun frun;
    testing::FlatQrels fqrels;
    const int nq = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int q = 0; q < nq; ++q) {
      const std::string qid = "q" + std::to_string(q);
      const int len = std::uniform_int_distribution<int>(0, 40)(rng);
      for (int r = 0; r < len; ++r) {
        const std::string doc = "d" + std::to_string(std::uniform_int_distribution<int>(0, 60)(rng));
        run[qid].push_back({doc, static_cast<std::uint32_t>(r + 1), 0.0});
        frun.rows.emplace_back(qid, r + 1, doc);
      }
      if (std::bernoulli_distribution(0.85)(rng)) {
        const int nj = std::uniform_int_distribution<int>(1, 15)(rng);
        for (int j = 0; j < nj; ++j) {
          const std::string doc = "d" + std::to_string(std::uniform_int_distribution<int>(0, 60)(rng));
          const int g = std::uniform_int_distribution<int>(0, 3)(rng);
          if (qrels.find(qid) && qrels.find(qid)->count(doc)) continue;
          qrels.add(qid, doc, g);
          fqrels.rows.emplace_back(qid, doc, g);
        }
      }
    }
    const auto ref = testing::reference_metrics(frun, fqrels, 10, 10, 20);
    const auto mrr = mrr_at_k(run, qrels, 10);
    const auto ndcg = ndcg_at_k(run, qrels, 10);
    const auto rec = recall_at_k(run, qrels, 20);
    ASSERT_EQ(mrr.value.has_value(), ref.mrr.has_value());
    ASSERT_EQ(ndcg.value.has_value(), ref.ndcg.has_value());
    ASSERT_EQ(rec.value.has_value(), ref.recall.has_value());
    if (ref.mrr) EXPECT_NEAR(*mrr.value, *ref.mrr, 1e-6);
    if (ref.ndcg) EXPECT_NEAR(*ndcg.value, *ref.ndcg, 1e-6);
    if (ref.recall) EXPECT_NEAR(*rec.value, *ref.recall, 1e-6);
    for (const auto* m : {&mrr, &ndcg, &rec}) {
      if (m->value) {
        EXPECT_GE(*m->value, 0.0);
        EXPECT_LE(*m->value, 1.0);
      }
    }
  }
}

TEST(TrecFilesTest, ReadRunAndQrels) {
  testing::TempDir dir;
  testing::write_text(dir.file("run"), "q1 Q0 b 2 1.0 t\nq1 Q0 a 1 2.0 t\n\nq2 Q0 c 1 0.5 t\n");
  const auto run = read_run(dir.file("run"));
  ASSERT_EQ(run.at("q1").size(), 2u);
  EXPECT_EQ(run.at("q1")[0].doc_id, "a");
  EXPECT_EQ(run.at("q2")[0].doc_id, "c");
  testing::write_text(dir.file("qrels"), "q1 0 a 2\nq1 0 b 0\n");
  const auto qrels = read_qrels(dir.file("qrels"));
  EXPECT_EQ(qrels.find("q1")->at("a"), 2);
  std::ostringstream out;
  write_qrels(out, qrels);
  EXPECT_EQ(out.str(), "q1 0 a 2\nq1 0 b 0\n");

  testing::write_text(dir.file("bad"), "q1 0 a -1\n");
  EXPECT_THROW(read_qrels(dir.file("bad")), ContractError);
  testing::write_text(dir.file("badrun"), "q1 Q0 a zero 1.0 t\n");
  EXPECT_THROW(read_run(dir.file("badrun")), ContractError);
  EXPECT_THROW(read_run(dir.file("missing")), IoError);
}

TEST(SweepTest, OnePointGivesTwoRows) {
  SynthParams p;
  p.num_docs = 300;
  p.num_queries = 20;
  p.vocab_size = 2000;
  p.num_words = 800;
  const auto s = generate_synthetic(p);
  const auto c = build(p.vocab_size, s.docs);
  SweepOptions opts;
  opts.final_k = 100;
  const auto report = sweep(c, s.queries, s.qrels, {{1.0, 200}}, opts);
  ASSERT_EQ(report.points.size(), 2u);
  EXPECT_FALSE(report.points[0].refine);
  EXPECT_TRUE(report.points[1].refine);
  for (const auto& pt : report.points) {
    EXPECT_GT(pt.mean_latency_ms, 0.0);
    EXPECT_LE(pt.mean_stage1_ms, pt.mean_latency_ms);
    EXPECT_GE(pt.mrr10, 0.0);
    EXPECT_LE(pt.mrr10, 1.0);
    EXPECT_GE(pt.recall1000, 0.0);
    EXPECT_LE(pt.recall1000, 1.0);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, report.points);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "idf_threshold,first_stage_k,refine,mrr10,recall1000,mean_latency_ms");
}

TEST(SweepTest, UnprunedRecallMatchesOracleAndPostingsShrink) {
  SynthParams p;
  p.num_docs = 400;
  p.num_queries = 30;
  p.vocab_size = 3000;
  p.num_words = 1000;
  p.seed = 3;
  const auto s = generate_synthetic(p);
  // Even a pruned stored index sweeps from the unpruned reconstruction.
  auto c = build(p.vocab_size, s.docs);
  c.index = prune(c.index, {0.5, 3.0});

  slim::Run oracle_run;
  for (const auto& q : s.queries) {
    auto hits = oracle_search(c.store, q.matrix, 1000, &c.index.doc_table);
    while (!hits.empty() && hits.back().score.value == 0) hits.pop_back();
    oracle_run[q.id] = to_run_entries(hits);
  }
  const double oracle_recall = *recall_at_k(oracle_run, s.qrels, 1000).value;

  SweepOptions opts;
  opts.weight_threshold = 0.0;
  opts.final_k = 400;
  std::vector<SweepSetting> grid;
  for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) grid.push_back({t, 400});
  const auto report = sweep(c, s.queries, s.qrels, grid, opts);
  ASSERT_EQ(report.points.size(), 14u);
  EXPECT_NEAR(report.points[0].recall1000, oracle_recall, 1e-9);
  EXPECT_NEAR(report.points[1].recall1000, oracle_recall, 1e-9);
  for (std::size_t i = 2; i < report.points.size(); ++i) {
    EXPECT_LE(report.posting_counts[i], report.posting_counts[i - 2]);
  }
  EXPECT_LT(report.posting_counts.back(), report.posting_counts.front());
}

TEST(SweepTest, RejectsEmptyQueries) {
  const auto c = build(2, std::vector<DocumentRecord>{});
  EXPECT_THROW(sweep(c, {}, Qrels{}, {{0.0, 10}}, {}), ContractError);
}

TEST(SynthTest, DeterministicAndJudged) {
  SynthParams p;
  p.num_docs = 100;
  p.num_queries = 10;
  p.vocab_size = 500;
  const auto a = generate_synthetic(p);
  const auto b = generate_synthetic(p);
  EXPECT_EQ(a.docs, b.docs);
  EXPECT_EQ(a.queries, b.queries);
  EXPECT_EQ(a.qrels, b.qrels);
  ASSERT_EQ(a.qrels.judgments.size(), 10u);
  for (const auto& [qid, docs] : a.qrels.judgments) {
    std::multiset<int> grades;
    for (const auto& [d, g] : docs) grades.insert(g);
    EXPECT_EQ(grades, (std::multiset<int>{1, 2}));
  }
  p.num_queries = 60;
  EXPECT_THROW(generate_synthetic(p), std::invalid_argument);
}

}  // namespace
}  // namespace slim
