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

// Command-line front end: synth, index, search, eval, sweep.
//
// Exit codes: 0 ok, 2 bad arguments, 3 I/O failure, 4 data-contract
// violation, 5 internal inconsistency. Every successful command prints one
// JSON summary line on stdout; diagnostics go to stderr. SLIM_LOG sets the
// log level (trace, debug, info, warn, error, off; default warn).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "slim/slim.hpp"

namespace slim::cli {

enum ExitCode : int {
  kOk = 0,
  kBadArguments = 2,
  kIoFailure = 3,
  kContractViolation = 4,
  kInconsistency = 5,
};

/// Flag defaults. These mirror the reference retrieval protocol.
struct Defaults {
  static constexpr double beta = 0.01;
  static constexpr double weight_threshold = 0.5;
  static constexpr double idf_threshold = 3.0;
  static constexpr std::size_t first_stage_k = 4000;
  static constexpr std::size_t final_k = 1000;
};

inline const std::vector<double>& default_idf_grid() {
  static const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  return grid;
}

struct IndexArgs {
  std::string corpus;
  std::string manifest;
  std::string out;
  double weight_threshold = Defaults::weight_threshold;
  double idf_threshold = Defaults::idf_threshold;
  std::size_t memory_budget_mb = 16384;
};

struct SearchArgs {
  std::string index;
  std::string queries;
  std::string run;
  std::string tag = "slim";
  double beta = Defaults::beta;
  std::size_t first_stage_k = Defaults::first_stage_k;
  std::size_t final_k = Defaults::final_k;
  bool no_refine = false;
  std::size_t threads = 1;
  std::size_t max_query_tokens = 256;
};

struct EvalArgs {
  std::string run;
  std::string qrels;
  std::size_t mrr_k = 10;
  std::size_t ndcg_k = 10;
  std::size_t recall_k = 1000;
};

struct SweepArgs {
  std::string index;
  std::string queries;
  std::string qrels;
  std::string csv;
  std::vector<double> idf_grid = default_idf_grid();
  std::vector<std::size_t> k_grid{Defaults::first_stage_k};
  bool paired = false;
  double beta = Defaults::beta;
  double weight_threshold = Defaults::weight_threshold;
  std::size_t final_k = Defaults::final_k;
  std::size_t warmup = 1;
  std::size_t repeats = 1;
};

struct SynthArgs {
  std::string out_dir;
  std::size_t num_docs = 1000;
  std::uint32_t vocab_size = 30522;
  std::size_t num_words = 10000;
  std::size_t num_queries = 100;
  std::uint64_t seed = 7;
};

namespace detail {

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("slim", sink);
  log->set_pattern("[%l] %v");
  const char* env = std::getenv("SLIM_LOG");
  log->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  return log;
}

inline void check_positive(std::size_t v, const char* name) {
  if (v == 0) throw std::invalid_argument(std::string(name) + " must be positive");
}

inline std::string corpus_manifest_for(const std::string& corpus) {
  return corpus + ".manifest.json";
}

}  // namespace detail

inline int cmd_synth(const SynthArgs& a, std::ostream& out, spdlog::logger& log) {
  SynthParams p;
  p.num_docs = a.num_docs;
  p.vocab_size = a.vocab_size;
  p.num_words = a.num_words;
  p.num_queries = a.num_queries;
  p.seed = a.seed;
  p.validate();
  const auto synth = generate_synthetic(p);

  std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto corpus = (dir / "corpus.jsonl").string();
  write_records(corpus, synth.docs);
  write_corpus_manifest(detail::corpus_manifest_for(corpus), synth.manifest);
  write_records((dir / "queries.jsonl").string(), synth.queries);
  {
    std::ofstream q(dir / "qrels.txt", std::ios::trunc);
    if (!q) throw IoError("cannot create " + (dir / "qrels.txt").string());
    write_qrels(q, synth.qrels);
    if (!q) throw IoError("write failure on qrels.txt");
  }
  log.info("wrote {} docs and {} queries to {}", synth.docs.size(), synth.queries.size(), dir.string());
  out << nlohmann::json{{"command", "synth"},
                        {"num_docs", synth.docs.size()},
                        {"num_queries", synth.queries.size()},
                        {"vocab_size", p.vocab_size},
                        {"seed", p.seed},
                        {"corpus", corpus},
                        {"queries", (dir / "queries.jsonl").string()},
                        {"qrels", (dir / "qrels.txt").string()}}
             .dump()
      << '\n';
  return kOk;
}

inline int cmd_index(const IndexArgs& a, std::ostream& out, spdlog::logger& log) {
  const PruneConfig cfg{a.weight_threshold, a.idf_threshold};
  cfg.validate();
  detail::check_positive(a.memory_budget_mb, "--memory-budget-mb");
  const auto manifest_path = a.manifest.empty() ? detail::corpus_manifest_for(a.corpus) : a.manifest;
  const auto manifest = read_corpus_manifest(manifest_path);

  BuildOptions opts;
  opts.memory_budget_bytes = a.memory_budget_mb * (std::size_t{1} << 20);
  IndexBuilder builder(manifest.vocab_size, opts);
  RecordReader reader(a.corpus, manifest.vocab_size);
  while (auto doc = reader.next()) builder.add(*doc);
  Collection c = std::move(builder).finish();
  if (c.index.num_docs() != manifest.num_docs) {
    log.warn("manifest declares {} docs, corpus has {}", manifest.num_docs, c.index.num_docs());
  }
  const std::size_t before = c.index.posting_count();
  c.index = prune(c.index, cfg);
  write_index(c, a.out);
  log.info("indexed {} docs, {} -> {} postings", c.index.num_docs(), before, c.index.posting_count());
  out << nlohmann::json{{"command", "index"},
                        {"num_docs", c.index.num_docs()},
                        {"vocab_size", c.index.vocab_size},
                        {"postings_before_prune", before},
                        {"postings", c.index.posting_count()},
                        {"terms", c.index.num_terms()},
                        {"weight_threshold", cfg.weight_threshold},
                        {"idf_threshold", cfg.idf_threshold},
                        {"out", a.out}}
             .dump()
      << '\n';
  return kOk;
}

inline SearchConfig to_config(const SearchArgs& a) {
  SearchConfig cfg;
  cfg.beta = a.beta;
  cfg.first_stage_k = a.first_stage_k;
  cfg.final_k = a.final_k;
  cfg.refine = !a.no_refine;
  cfg.max_query_tokens = a.max_query_tokens;
  cfg.validate();
  return cfg;
}

inline int cmd_search(const SearchArgs& a, std::ostream& out, spdlog::logger& log) {
  const SearchConfig cfg = to_config(a);
  detail::check_positive(a.threads, "--threads");
  const Collection c = read_index(a.index);
  const auto queries = read_records(a.queries, c.index.vocab_size);

  std::vector<HitList> results(queries.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(a.threads);
  auto worker = [&](std::size_t w) {
    try {
      Searcher s(c.index, c.store, cfg);
      for (std::size_t i = next++; i < queries.size(); i = next++) {
        results[i] = s.search(queries[i].matrix);
      }
    } catch (...) {
      errors[w] = std::current_exception();
      next = queries.size();
    }
  };
  if (a.threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < a.threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ofstream run(a.run, std::ios::trunc);
  if (!run) throw IoError("cannot create " + a.run);
  std::size_t lines = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    write_run(run, queries[i].id, results[i], a.tag);
    lines += results[i].size();
  }
  if (!run) throw IoError("write failure on " + a.run);
  log.info("searched {} queries", queries.size());
  out << nlohmann::json{{"command", "search"},
                        {"num_queries", queries.size()},
                        {"run_lines", lines},
                        {"beta", cfg.beta},
                        {"first_stage_k", cfg.first_stage_k},
                        {"final_k", cfg.final_k},
                        {"refine", cfg.refine},
                        {"run", a.run}}
             .dump()
      << '\n';
  return kOk;
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out, spdlog::logger& log) {
  detail::check_positive(a.mrr_k, "--mrr-k");
  detail::check_positive(a.ndcg_k, "--ndcg-k");
  detail::check_positive(a.recall_k, "--recall-k");
  const Run run = read_run(a.run);
  const Qrels qrels = read_qrels(a.qrels);
  const auto mrr = mrr_at_k(run, qrels, a.mrr_k);
  const auto ndcg = ndcg_at_k(run, qrels, a.ndcg_k);
  const auto recall = recall_at_k(run, qrels, a.recall_k);
  auto value = [](const MetricResult& m) -> nlohmann::json {
    return m.value ? nlohmann::json(*m.value) : nlohmann::json(nullptr);
  };
  const std::size_t warnings = mrr.skipped + ndcg.skipped + recall.skipped;
  if (warnings) log.warn("{} query evaluations skipped (missing or empty judgments)", warnings);
  out << nlohmann::json{{"command", "eval"},
                        {"queries", run.size()},
                        {"mrr@" + std::to_string(a.mrr_k), value(mrr)},
                        {"ndcg@" + std::to_string(a.ndcg_k), value(ndcg)},
                        {"recall@" + std::to_string(a.recall_k), value(recall)},
                        {"warnings",
                         {{"mrr", mrr.skipped}, {"ndcg", ndcg.skipped}, {"recall", recall.skipped}}}}
             .dump()
      << '\n';
  return kOk;
}

inline int cmd_sweep(const SweepArgs& a, std::ostream& out, spdlog::logger& log) {
  if (a.idf_grid.empty() || a.k_grid.empty()) throw std::invalid_argument("grids must be non-empty");
  if (a.paired && a.idf_grid.size() != a.k_grid.size()) {
    throw std::invalid_argument("--paired needs grids of equal length");
  }
  for (double t : a.idf_grid) PruneConfig{a.weight_threshold, t}.validate();
  for (auto k : a.k_grid) {
    detail::check_positive(k, "--k-grid");
    if (k < a.final_k) throw std::invalid_argument("every --k-grid value must be >= --final-k");
  }
  detail::check_positive(a.repeats, "--repeats");
  std::vector<SweepSetting> grid;
  if (a.paired) {
    for (std::size_t i = 0; i < a.idf_grid.size(); ++i) grid.push_back({a.idf_grid[i], a.k_grid[i]});
  } else {
    for (auto k : a.k_grid) {
      for (double t : a.idf_grid) grid.push_back({t, k});
    }
  }
  const Collection c = read_index(a.index);
  const auto queries = read_records(a.queries, c.index.vocab_size);
  const Qrels qrels = read_qrels(a.qrels);
  SweepOptions opts;
  opts.beta = a.beta;
  opts.weight_threshold = a.weight_threshold;
  opts.final_k = a.final_k;
  opts.warmup_passes = a.warmup;
  opts.timed_passes = a.repeats;
  const auto report = sweep(c, queries, qrels, grid, opts);

  std::ofstream csv(a.csv, std::ios::trunc);
  if (!csv) throw IoError("cannot create " + a.csv);
  write_sweep_csv(csv, report.points);
  if (!csv) throw IoError("write failure on " + a.csv);
  log.info("sweep wrote {} rows", report.points.size());
  out << nlohmann::json{{"command", "sweep"},
                        {"rows", report.points.size()},
                        {"num_queries", queries.size()},
                        {"csv", a.csv}}
             .dump()
      << '\n';
  return kOk;
}

/// Parses argv and dispatches. Never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto log = detail::make_logger(err);
  CLI::App app{"Sparse late-interaction retrieval over inverted indexes"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus, queries and qrels");
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s->add_option("--num-docs", synth.num_docs, "Documents")->capture_default_str();
  s->add_option("--vocab-size", synth.vocab_size, "Lexical vocabulary size")->capture_default_str();
  s->add_option("--num-words", synth.num_words, "Distinct generator words")->capture_default_str();
  s->add_option("--num-queries", synth.num_queries, "Queries")->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();

  IndexArgs index;
  auto* ix = app.add_subcommand("index", "Build, prune and persist an index");
  ix->add_option("--corpus", index.corpus, "Corpus file (JSON lines)")->required();
  ix->add_option("--manifest", index.manifest, "Corpus manifest (default <corpus>.manifest.json)");
  ix->add_option("--out", index.out, "Index directory")->required();
  ix->add_option("--weight-threshold", index.weight_threshold, "Drop postings below this impact")
      ->capture_default_str();
  ix->add_option("--idf-threshold", index.idf_threshold, "Drop posting lists with IDF below this")
      ->capture_default_str();
  ix->add_option("--memory-budget-mb", index.memory_budget_mb, "Abort above this estimate")
      ->capture_default_str();

  SearchArgs search;
  auto* se = app.add_subcommand("search", "Two-stage retrieval to a TREC run file");
  se->add_option("--index", search.index, "Index directory")->required();
  se->add_option("--queries", search.queries, "Query file (JSON lines)")->required();
  se->add_option("--run", search.run, "Output run file")->required();
  se->add_option("--tag", search.tag, "Run tag")->capture_default_str();
  se->add_option("--beta", search.beta, "Lower/upper bound interpolation")->capture_default_str();
  se->add_option("--first-stage-k", search.first_stage_k, "First-stage candidates")->capture_default_str();
  se->add_option("--final-k", search.final_k, "Results per query")->capture_default_str();
  se->add_flag("--no-refine", search.no_refine, "Skip exact refinement");
  se->add_option("--threads", search.threads, "Worker threads across queries")->capture_default_str();
  se->add_option("--max-query-tokens", search.max_query_tokens, "Reject longer queries")
      ->capture_default_str();

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Score a run against qrels");
  ev->add_option("--run", eval.run, "TREC run file")->required();
  ev->add_option("--qrels", eval.qrels, "TREC qrels file")->required();
  ev->add_option("--mrr-k", eval.mrr_k, "MRR cutoff")->capture_default_str();
  ev->add_option("--ndcg-k", eval.ndcg_k, "nDCG cutoff")->capture_default_str();
  ev->add_option("--recall-k", eval.recall_k, "Recall cutoff")->capture_default_str();

  SweepArgs sw;
  auto* sp = app.add_subcommand("sweep", "Pruning effectiveness/latency sweep to CSV");
  sp->add_option("--index", sw.index, "Index directory")->required();
  sp->add_option("--queries", sw.queries, "Query file")->required();
  sp->add_option("--qrels", sw.qrels, "Qrels file")->required();
  sp->add_option("--csv", sw.csv, "Output CSV")->required();
  sp->add_option("--idf-grid", sw.idf_grid, "IDF thresholds")->delimiter(',')->capture_default_str();
  sp->add_option("--k-grid", sw.k_grid, "First-stage k values")->delimiter(',')->capture_default_str();
  sp->add_flag("--paired", sw.paired, "Zip the grids instead of taking their product");
  sp->add_option("--beta", sw.beta, "Interpolation")->capture_default_str();
  sp->add_option("--weight-threshold", sw.weight_threshold, "Impact pruning")->capture_default_str();
  sp->add_option("--final-k", sw.final_k, "Results per query")->capture_default_str();
  sp->add_option("--warmup", sw.warmup, "Warm-up passes")->capture_default_str();
  sp->add_option("--repeats", sw.repeats, "Timed passes (per-query minimum)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kBadArguments;
  }

  try {
    if (*s) return cmd_synth(synth, out, *log);
    if (*ix) return cmd_index(index, out, *log);
    if (*se) return cmd_search(search, out, *log);
    if (*ev) return cmd_eval(eval, out, *log);
    if (*sp) return cmd_sweep(sw, out, *log);
  } catch (const std::invalid_argument& e) {
    log->error("{}", e.what());
    return kBadArguments;
  } catch (const IndexFileError& e) {
    log->error("{}", e.what());
    return (e.code() == IndexErrc::missing_manifest || e.code() == IndexErrc::io) ? kIoFailure
                                                                                  : kContractViolation;
  } catch (const IoError& e) {
    log->error("{}", e.what());
    return kIoFailure;
  } catch (const ContractError& e) {
    log->error("{}", e.what());
    return kContractViolation;
  } catch (const BudgetError& e) {
    log->error("{}", e.what());
    return kContractViolation;
  } catch (const InconsistencyError& e) {
    log->error("{}", e.what());
    return kInconsistency;
  } catch (const std::exception& e) {
    log->error("internal error: {}", e.what());
    return kInconsistency;
  }
  return kBadArguments;
}

}  // namespace slim::cli
