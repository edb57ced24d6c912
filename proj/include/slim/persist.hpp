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

// On-disk index directory:
//   manifest.json  {"version":1,"num_docs":N,"vocab_size":V,"prune":{...},
//                   "files":{name:{"crc32":c,"size":s}},"manifest_crc32":c}
//   postings.bin   per non-empty term: u32 term, u32 df, df x (u32 ord, f32 impact)
//   docstore.bin   per doc: u32 ord, u32 num_tokens, per token u32 nnz then
//                  nnz x (u32 term, f32 weight)
//   ids.tsv        "<ordinal>\t<doc id>\n" per doc
// All integers little-endian. The manifest is written in canonical compact
// form and must read back byte-identical to its re-serialization.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "slim/error.hpp"
#include "slim/index.hpp"

namespace slim {

inline constexpr int kIndexFormatVersion = 1;

enum class IndexErrc {
  missing_manifest,
  version_mismatch,
  truncated,
  checksum_mismatch,
  malformed,
  io,
};

inline const char* to_string(IndexErrc c) noexcept {
  switch (c) {
    case IndexErrc::missing_manifest: return "missing manifest";
    case IndexErrc::version_mismatch: return "version mismatch";
    case IndexErrc::truncated: return "truncated file";
    case IndexErrc::checksum_mismatch: return "checksum mismatch";
    case IndexErrc::malformed: return "malformed index";
    case IndexErrc::io: return "I/O failure";
  }
  return "unknown";
}

class IndexFileError : public Error {
 public:
  IndexFileError(IndexErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  IndexErrc code() const noexcept { return code_; }

 private:
  IndexErrc code_;
};

namespace io_detail {

inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kPostings = "postings.bin";
inline constexpr const char* kDocStore = "docstore.bin";
inline constexpr const char* kIds = "ids.tsv";

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto len = static_cast<uInt>(std::min(kChunk, bytes.size() - off));
    c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), len);
  }
  return static_cast<std::uint32_t>(c);
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string& bytes() noexcept { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const char* file) : bytes_(bytes), file_(file) {}

  std::uint32_t u32() {
    if (bytes_.size() - pos_ < 4) throw IndexFileError(IndexErrc::truncated, file_);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  const char* file_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IndexFileError(IndexErrc::io, "cannot create " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IndexFileError(IndexErrc::io, "write failure on " + p.string());
}

inline std::string read_file(const std::filesystem::path& p, IndexErrc missing) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IndexFileError(missing, p.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IndexFileError(IndexErrc::io, "read failure on " + p.string());
  return s;
}

inline std::string encode_postings(const InvertedIndex& index) {
  Writer w;
  for (std::size_t t = 0; t < index.lists.size(); ++t) {
    const auto& list = index.lists[t];
    if (list.empty()) continue;
    w.u32(static_cast<std::uint32_t>(t));
    w.u32(static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      w.u32(p.doc);
      w.f32(p.impact);
    }
  }
  return std::move(w.bytes());
}

inline std::string encode_store(const DocStore& store) {
  Writer w;
  for (std::size_t ord = 0; ord < store.size(); ++ord) {
    const auto& m = store.matrices[ord];
    w.u32(static_cast<std::uint32_t>(ord));
    w.u32(static_cast<std::uint32_t>(m.num_tokens()));
    for (const auto& row : m.rows) {
      w.u32(static_cast<std::uint32_t>(row.size()));
      for (const auto& e : row.entries()) {
        w.u32(e.term);
        w.f32(e.weight);
      }
    }
  }
  return std::move(w.bytes());
}

inline std::string encode_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += ids[i];
    out += '\n';
  }
  return out;
}

[[noreturn]] inline void malformed(const std::string& what) {
  throw IndexFileError(IndexErrc::malformed, what);
}

inline std::vector<PostingList> decode_postings(std::string_view bytes, std::uint32_t vocab_size,
                                                std::size_t num_docs) {
  std::vector<PostingList> lists(vocab_size);
  Reader r(bytes, kPostings);
  std::int64_t prev_term = -1;
  while (!r.done()) {
    const auto term = r.u32();
    const auto df = r.u32();
    if (term >= vocab_size) malformed("posting term exceeds vocab_size");
    if (static_cast<std::int64_t>(term) <= prev_term) malformed("posting terms not ascending");
    if (df == 0 || df > num_docs) malformed("posting list df out of range");
    if (r.remaining() / 8 < df) throw IndexFileError(IndexErrc::truncated, kPostings);
    prev_term = term;
    auto& list = lists[term];
    list.reserve(df);
    for (std::uint32_t i = 0; i < df; ++i) {
      const auto doc = r.u32();
      const auto impact = r.f32();
      if (doc >= num_docs) malformed("posting ordinal out of range");
      if (!list.empty() && doc <= list.back().doc) malformed("posting ordinals not ascending");
      if (!(impact > 0) || !std::isfinite(impact)) malformed("non-positive impact");
      list.push_back({doc, impact});
    }
  }
  return lists;
}

inline DocStore decode_store(std::string_view bytes, std::uint32_t vocab_size,
                             std::size_t num_docs) {
  DocStore store;
  store.matrices.reserve(num_docs);
  Reader r(bytes, kDocStore);
  while (!r.done()) {
    const auto ord = r.u32();
    if (ord != store.size()) malformed("docstore ordinals not dense");
    if (ord >= num_docs) malformed("docstore has more docs than manifest");
    const auto ntok = r.u32();
    if (r.remaining() / 4 < ntok) throw IndexFileError(IndexErrc::truncated, kDocStore);
    TokenMatrix m;
    m.rows.reserve(ntok);
    for (std::uint32_t i = 0; i < ntok; ++i) {
      const auto nnz = r.u32();
      if (r.remaining() / 8 < nnz) throw IndexFileError(IndexErrc::truncated, kDocStore);
      std::vector<BasicEntry<Weight>> entries;
      entries.reserve(nnz);
      for (std::uint32_t k = 0; k < nnz; ++k) {
        const auto term = r.u32();
        const auto w = r.f32();
        if (term >= vocab_size) malformed("docstore term exceeds vocab_size");
        if (!(w > 0)) malformed("docstore weight not positive");
        entries.push_back({term, w});
      }
      try {
        m.rows.push_back(SparseVector::from_entries(std::move(entries)));
      } catch (const ContractError& e) {
        malformed(std::string("docstore: ") + e.what());
      }
    }
    store.matrices.push_back(std::move(m));
  }
  if (store.size() != num_docs) throw IndexFileError(IndexErrc::truncated, kDocStore);
  return store;
}

inline std::vector<std::string> decode_ids(std::string_view bytes, std::size_t num_docs) {
  std::vector<std::string> ids;
  ids.reserve(num_docs);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw IndexFileError(IndexErrc::truncated, kIds);
    const auto line = bytes.substr(pos, nl - pos);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) malformed("ids.tsv line without tab");
    if (line.substr(0, tab) != std::to_string(ids.size())) malformed("ids.tsv ordinals not dense");
    ids.emplace_back(line.substr(tab + 1));
    if (ids.back().empty()) malformed("ids.tsv empty id");
    pos = nl + 1;
  }
  if (ids.size() != num_docs) throw IndexFileError(IndexErrc::truncated, kIds);
  return ids;
}

// CRC of the canonical manifest with the self-checksum field removed.
inline std::uint32_t manifest_self_crc(nlohmann::json m) {
  m.erase("manifest_crc32");
  return crc32_of(m.dump());
}

}  // namespace io_detail

inline void write_index(const InvertedIndex& index, const DocStore& store,
                        const std::filesystem::path& dir) {
  using namespace io_detail;
  if (index.num_docs() != store.size()) {
    throw InconsistencyError("index and document store sizes differ");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IndexFileError(IndexErrc::io, "cannot create " + dir.string() + ": " + ec.message());

  const std::string postings = encode_postings(index);
  const std::string docstore = encode_store(store);
  const std::string ids = encode_ids(index.doc_table);

  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, bytes] : {std::pair<const char*, const std::string*>{kPostings, &postings},
                                    {kDocStore, &docstore},
                                    {kIds, &ids}}) {
    files[name] = {{"crc32", crc32_of(*bytes)}, {"size", bytes->size()}};
  }
  nlohmann::json manifest = {
      {"version", kIndexFormatVersion},
      {"num_docs", index.num_docs()},
      {"vocab_size", index.vocab_size},
      {"prune",
       {{"weight_threshold", index.pruned_with.weight_threshold},
        {"idf_threshold", index.pruned_with.idf_threshold}}},
      {"files", files},
  };
  manifest["manifest_crc32"] = manifest_self_crc(manifest);

  write_file(dir / kPostings, postings);
  write_file(dir / kDocStore, docstore);
  write_file(dir / kIds, ids);
  // Manifest last: a directory without one is never mistaken for complete.
  write_file(dir / kManifest, manifest.dump());
}

inline void write_index(const Collection& c, const std::filesystem::path& dir) {
  write_index(c.index, c.store, dir);
}

inline Collection read_index(const std::filesystem::path& dir) {
  using namespace io_detail;
  const std::string raw = read_file(dir / kManifest, IndexErrc::missing_manifest);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    throw IndexFileError(IndexErrc::checksum_mismatch, "manifest.json does not parse");
  }
  if (!m.is_object() || !m.contains("version")) {
    throw IndexFileError(IndexErrc::checksum_mismatch, "manifest.json has no version");
  }
  if (m["version"] != kIndexFormatVersion) {
    throw IndexFileError(IndexErrc::version_mismatch,
                         "expected version " + std::to_string(kIndexFormatVersion) + ", found " +
                             m["version"].dump());
  }
  if (m.dump() != raw) {
    throw IndexFileError(IndexErrc::checksum_mismatch, "manifest.json is not canonical");
  }

  Collection c;
  std::uint64_t num_docs = 0;
  try {
    if (m.at("manifest_crc32").get<std::uint32_t>() != manifest_self_crc(m)) {
      throw IndexFileError(IndexErrc::checksum_mismatch, "manifest.json");
    }
    num_docs = m.at("num_docs").get<std::uint64_t>();
    c.index.vocab_size = m.at("vocab_size").get<std::uint32_t>();
    c.index.pruned_with.weight_threshold = m.at("prune").at("weight_threshold").get<double>();
    c.index.pruned_with.idf_threshold = m.at("prune").at("idf_threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IndexFileError(IndexErrc::malformed, std::string("manifest.json: ") + e.what());
  }

  auto load = [&](const char* name) {
    std::string bytes = read_file(dir / name, IndexErrc::truncated);
    std::uint64_t size = 0;
    std::uint32_t crc = 0;
    try {
      size = m.at("files").at(name).at("size").get<std::uint64_t>();
      crc = m.at("files").at(name).at("crc32").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
      throw IndexFileError(IndexErrc::malformed, std::string("manifest.json: ") + e.what());
    }
    if (bytes.size() < size) throw IndexFileError(IndexErrc::truncated, name);
    if (bytes.size() != size || crc32_of(bytes) != crc) {
      throw IndexFileError(IndexErrc::checksum_mismatch, name);
    }
    return bytes;
  };

  const std::string ids = load(kIds);
  const std::string postings = load(kPostings);
  const std::string docstore = load(kDocStore);
  c.index.doc_table = decode_ids(ids, num_docs);
  c.index.lists = decode_postings(postings, c.index.vocab_size, num_docs);
  c.store = decode_store(docstore, c.index.vocab_size, num_docs);
  return c;
}

}  // namespace slim
