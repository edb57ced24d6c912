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

// Line-delimited corpus/query files, the corpus manifest, and a deterministic
// toy encoder standing in for a neural sparse encoder.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "slim/error.hpp"
#include "slim/model.hpp"

namespace slim {

/// A document or query: external id plus its token matrix.
struct TextRecord {
  std::string id;
  TokenMatrix matrix;

  friend bool operator==(const TextRecord&, const TextRecord&) = default;
};

using DocumentRecord = TextRecord;
using QueryRecord = TextRecord;

struct CorpusManifest {
  std::uint32_t vocab_size = 0;
  std::uint64_t num_docs = 0;

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

namespace detail {

[[noreturn]] inline void line_error(std::size_t line_no, const std::string& what) {
  throw ContractError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace detail

/// Parses one record line:
///   {"id": "...", "vectors": [[[term_id, weight], ...], ...]}
/// Pairs within a token may arrive unsorted; they are sorted, zero weights
/// dropped, and duplicates rejected.
inline TextRecord parse_record(std::string_view line, std::uint32_t vocab_size,
                               std::size_t line_no = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    detail::line_error(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) detail::line_error(line_no, "record is not an object");
  auto id_it = j.find("id");
  if (id_it == j.end() || !id_it->is_string()) detail::line_error(line_no, "missing string \"id\"");
  TextRecord rec;
  rec.id = id_it->get<std::string>();
  if (rec.id.empty()) detail::line_error(line_no, "empty id");

  auto vec_it = j.find("vectors");
  if (vec_it == j.end() || !vec_it->is_array()) {
    detail::line_error(line_no, "missing array \"vectors\"");
  }
  rec.matrix.rows.reserve(vec_it->size());
  for (const auto& token : *vec_it) {
    if (!token.is_array()) detail::line_error(line_no, "token is not an array of pairs");
    std::vector<BasicEntry<Weight>> entries;
    entries.reserve(token.size());
    for (const auto& pair : token) {
      if (!pair.is_array() || pair.size() != 2) {
        detail::line_error(line_no, "entry is not a [term_id, weight] pair");
      }
      const auto& t = pair[0];
      const auto& w = pair[1];
      if (!t.is_number_integer()) detail::line_error(line_no, "term_id is not an integer");
      if (t.is_number_unsigned() ? false : t.get<std::int64_t>() < 0) {
        detail::line_error(line_no, "negative term_id");
      }
      const auto term = t.get<std::uint64_t>();
      if (term >= vocab_size) {
        detail::line_error(line_no, fmt::format("term {} >= vocab_size {}", term, vocab_size));
      }
      if (!w.is_number()) detail::line_error(line_no, "weight is not a number");
      const double weight = w.get<double>();
      if (weight < 0) detail::line_error(line_no, fmt::format("negative weight {} for term {}", weight, term));
      entries.push_back({static_cast<TermId>(term), static_cast<Weight>(weight)});
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.term < b.term; });
    try {
      rec.matrix.rows.push_back(SparseVector::from_entries(std::move(entries)));
    } catch (const ContractError& e) {
      detail::line_error(line_no, e.what());
    }
  }
  return rec;
}

/// Serializes a record as one line (no trailing newline). Weights use the
/// shortest representation that parses back to the same float.
inline std::string format_record(const TextRecord& rec) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{{\"id\":{},\"vectors\":[", nlohmann::json(rec.id).dump());
  for (std::size_t i = 0; i < rec.matrix.rows.size(); ++i) {
    if (i) buf.push_back(',');
    buf.push_back('[');
    bool first = true;
    for (const auto& e : rec.matrix.rows[i].entries()) {
      if (!first) buf.push_back(',');
      first = false;
      fmt::format_to(std::back_inserter(buf), "[{},{}]", e.term, e.weight);
    }
    buf.push_back(']');
  }
  buf.append(std::string_view("]}"));
  return fmt::to_string(buf);
}

/// Single-consumer stream over a record file. Validates every record and
/// rejects duplicate ids.
class RecordReader {
 public:
  RecordReader(const std::string& path, std::uint32_t vocab_size)
      : in_(path), path_(path), vocab_size_(vocab_size) {
    if (!in_) throw IoError("cannot open " + path);
  }

  std::optional<TextRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto rec = parse_record(line, vocab_size_, line_no_);
      if (!seen_.insert(rec.id).second) {
        detail::line_error(line_no_, "duplicate id \"" + rec.id + "\"");
      }
      return rec;
    }
    if (in_.bad()) throw IoError("read failure on " + path_);
    return std::nullopt;
  }

  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint32_t vocab_size_;
  std::size_t line_no_ = 0;
  std::unordered_set<std::string> seen_;
};

inline std::vector<TextRecord> read_records(const std::string& path, std::uint32_t vocab_size) {
  RecordReader reader(path, vocab_size);
  std::vector<TextRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

inline void write_records(const std::string& path, const std::vector<TextRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  for (const auto& r : records) out << format_record(r) << '\n';
  if (!out) throw IoError("write failure on " + path);
}

inline CorpusManifest read_corpus_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError("malformed manifest " + path + ": " + e.what());
  }
  CorpusManifest m;
  try {
    const auto vocab = j.at("vocab_size").get<std::int64_t>();
    const auto docs = j.at("num_docs").get<std::int64_t>();
    if (vocab < 1 || vocab > static_cast<std::int64_t>(UINT32_MAX)) {
      throw ContractError("manifest vocab_size out of range");
    }
    if (docs < 0) throw ContractError("manifest num_docs negative");
    m.vocab_size = static_cast<std::uint32_t>(vocab);
    m.num_docs = static_cast<std::uint64_t>(docs);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError("malformed manifest " + path + ": " + e.what());
  }
  return m;
}

inline void write_corpus_manifest(const std::string& path, const CorpusManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out << nlohmann::json{{"vocab_size", m.vocab_size}, {"num_docs", m.num_docs}}.dump() << '\n';
  if (!out) throw IoError("write failure on " + path);
}

// --- toy encoder -----------------------------------------------------------

/// 64-bit FNV-1a; stable across platforms.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr int kToyMaxTermsPerToken = 4;
inline constexpr Weight kToyMinWeight = 0.1F;
inline constexpr Weight kToyMaxWeight = 3.0F;

/// Encodes a single word: 1-4 hashed terms, weights in [0.1, 3.0]. Slot
/// collisions keep the larger weight.
inline SparseVector toy_encode_token(std::string_view token, std::uint32_t vocab_size) {
  const std::uint64_t h = fnv1a64(token);
  const int n = 1 + static_cast<int>(splitmix64(h) % kToyMaxTermsPerToken);
  std::vector<BasicEntry<Weight>> entries;
  for (int slot = 0; slot < n; ++slot) {
    const std::uint64_t hs = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(slot) + 1));
    const auto term = static_cast<TermId>(hs % vocab_size);
    const double unit = static_cast<double>(splitmix64(hs) >> 11) * 0x1.0p-53;
    const auto w = static_cast<Weight>(kToyMinWeight + (kToyMaxWeight - kToyMinWeight) * unit);
    entries.push_back({term, w});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.term != b.term ? a.term < b.term : a.weight > b.weight;
  });
  entries.erase(std::unique(entries.begin(), entries.end(),
                            [](const auto& a, const auto& b) { return a.term == b.term; }),
                entries.end());
  return SparseVector::from_entries(std::move(entries));
}

/// Whitespace-tokenizes `text` and encodes each word independently.
inline TokenMatrix toy_encode(std::string_view text, std::uint32_t vocab_size) {
  if (vocab_size == 0) throw std::invalid_argument("vocab_size must be >= 1");
  TokenMatrix m;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find_first_not_of(" \t\r\n\f\v", pos);
    if (start == std::string_view::npos) break;
    auto end = text.find_first_of(" \t\r\n\f\v", start);
    if (end == std::string_view::npos) end = text.size();
    m.rows.push_back(toy_encode_token(text.substr(start, end - start), vocab_size));
    pos = end;
  }
  return m;
}

}  // namespace slim
