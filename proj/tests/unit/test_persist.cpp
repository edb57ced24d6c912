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
#include "slim/persist.hpp"

#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "support/tempdir.hpp"

namespace slim {
namespace {

using testing::TempDir;

Collection two_doc_collection() {
  std::vector<DocumentRecord> docs{
      {"d1", TokenMatrix{{SparseVector::from_pairs({{0, 1.0F}})}}},
      {"d2", TokenMatrix{{SparseVector::from_pairs({{0, 2.0F}}), SparseVector::from_pairs({{1, 1.0F}})}}}};
  return build(2, docs);
}

IndexErrc read_error(const std::filesystem::path& dir) {
  try {
    read_index(dir);
  } catch (const IndexFileError& e) {
    return e.code();
  }
  ADD_FAILURE() << "read_index succeeded";
  return IndexErrc::io;
}

TEST(PersistTest, TwoDocRoundTrip) {
  TempDir dir;
  const auto c = two_doc_collection();
  write_index(c, dir.path());
  EXPECT_EQ(read_index(dir.path()), c);
}

TEST(PersistTest, PrunedIndexKeepsUnprunedStore) {
  TempDir dir;
  auto c = two_doc_collection();
  c.index = prune(c.index, {1.5, 0.0});
  write_index(c, dir.path());
  const auto back = read_index(dir.path());
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.index.pruned_with, (PruneConfig{1.5, 0.0}));
  EXPECT_EQ(back.store.matrices[0].nnz(), 1u);
}

TEST(PersistTest, EmptyDirIsMissingManifest) {
  TempDir dir;
  EXPECT_EQ(read_error(dir.path()), IndexErrc::missing_manifest);
  EXPECT_EQ(read_error(dir.path() / "nope"), IndexErrc::missing_manifest);
}

TEST(PersistTest, VersionMismatch) {
  TempDir dir;
  write_index(two_doc_collection(), dir.path());
  auto m = nlohmann::json::parse(testing::read_text(dir.file("manifest.json")));
  m["version"] = 2;
  m["manifest_crc32"] = io_detail::manifest_self_crc(m);
  testing::write_text(dir.file("manifest.json"), m.dump());
  EXPECT_EQ(read_error(dir.path()), IndexErrc::version_mismatch);
}

TEST(PersistTest, TruncatedFile) {
  TempDir dir;
  write_index(two_doc_collection(), dir.path());
  const auto bytes = testing::read_text(dir.file("postings.bin"));
  testing::write_text(dir.file("postings.bin"), bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(read_error(dir.path()), IndexErrc::truncated);
  std::filesystem::remove(dir.path() / "docstore.bin");
  EXPECT_EQ(read_error(dir.path()), IndexErrc::truncated);
}

TEST(PersistTest, FlippedPostingsByteIsChecksumError) {
  TempDir dir;
  write_index(two_doc_collection(), dir.path());
  auto bytes = testing::read_text(dir.file("postings.bin"));
  bytes[bytes.size() / 2] ^= 0x01;
  testing::write_text(dir.file("postings.bin"), bytes);
  EXPECT_EQ(read_error(dir.path()), IndexErrc::checksum_mismatch);
}

TEST(PersistTest, WireLayoutIsLittleEndian) {
  TempDir dir;
  write_index(two_doc_collection(), dir.path());
  const auto p = testing::read_text(dir.file("postings.bin"));
  // term 0, df 2, (0, 1.0f), (1, 2.0f), term 1, df 1, (1, 1.0f)
  const std::string expect = {0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, '\x80', 0x3f,
                              1, 0, 0, 0, 0, 0, 0, 0x40, 1, 0, 0, 0, 1, 0, 0, 0,
                              1, 0, 0, 0, 0, 0, '\x80', 0x3f};
  EXPECT_EQ(p, expect);
  EXPECT_EQ(testing::read_text(dir.file("ids.tsv")), "0\td1\n1\td2\n");
}

TEST(PersistTest, RandomRoundTripsAreBitIdentical) {
  TempDir dir;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto corpus = testing::random_corpus(seed, {.min_docs = 0, .max_docs = 80});
    auto c = build(corpus.vocab, corpus.docs);
    if (seed % 2) c.index = prune(c.index, {0.5, 1.0});
    const auto sub = dir.path() / std::to_string(seed);
    write_index(c, sub);
    const auto back = read_index(sub);
    ASSERT_EQ(back, c) << "seed " << seed;
    write_index(back, dir.path() / "again");
    for (const char* f : {"manifest.json", "postings.bin", "docstore.bin", "ids.tsv"}) {
      EXPECT_EQ(testing::read_text((sub / f).string()), testing::read_text((dir.path() / "again" / f).string()));
    }
  }
}

TEST(PersistTest, EverySingleByteFlipIsDetected) {
  TempDir dir;
  const auto c = two_doc_collection();
  write_index(c, dir.path());
  for (const char* name : {"manifest.json", "postings.bin", "docstore.bin", "ids.tsv"}) {
    const auto path = dir.file(name);
    const auto original = testing::read_text(path);
    for (std::size_t i = 0; i < original.size(); ++i) {
      auto bytes = original;
      bytes[i] ^= 0x20;
      testing::write_text(path, bytes);
      EXPECT_THROW(read_index(dir.path()), IndexFileError) << name << " byte " << i;
    }
    testing::write_text(path, original);
  }
  EXPECT_EQ(read_index(dir.path()), c);
}

}  // namespace
}  // namespace slim
