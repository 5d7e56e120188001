// Copyright 2026 The aflm Authors. All Rights Reserved.
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


#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "aflm/corpus.hpp"
#include "aflm/errors.hpp"
#include "aflm/random.hpp"
#include "test_util.hpp"

namespace {

using namespace aflm;
using aflm::testing::TempDir;
using aflm::testing::write_file;

LanguageSpec synth_language(std::string id, std::uint8_t lo, std::uint8_t hi,
                            LanguageClass cls = LanguageClass::pretraining) {
  LanguageSpec spec;
  spec.lang_id = std::move(id);
  spec.cls = cls;
  SynthParams p;
  p.alphabet_lo = lo;
  p.alphabet_hi = hi;
  spec.synth = p;
  return spec;
}

std::set<unsigned char> byte_set(const std::vector<std::string>& docs) {
  std::set<unsigned char> out;
  for (const auto& d : docs) out.insert(d.begin(), d.end());
  return out;
}

TEST(SyntheticCorpus, DeterministicPerSeed) {
  const auto spec = synth_language("xa", 0x61, 0x6A);
  const auto a = generate_synthetic_corpus(spec, 2, 7);
  const auto b = generate_synthetic_corpus(spec, 2, 7);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a, b);
}

TEST(SyntheticCorpus, DifferentSeedDiffers) {
  const auto spec = synth_language("xa", 0x61, 0x6A);
  EXPECT_NE(generate_synthetic_corpus(spec, 2, 7), generate_synthetic_corpus(spec, 2, 8));
}

TEST(SyntheticCorpus, DisjointAlphabetsGiveDisjointBytes) {
  const auto a = generate_synthetic_corpus(synth_language("xa", 0x61, 0x6A), 20, 3);
  const auto b = generate_synthetic_corpus(synth_language("xb", 0x6B, 0x74), 20, 3);
  const auto sa = byte_set(a);
  const auto sb = byte_set(b);
  std::vector<unsigned char> common;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
  EXPECT_TRUE(common.empty());
  EXPECT_GE(*sa.begin(), 0x61);
  EXPECT_LE(*sa.rbegin(), 0x6A);
}

TEST(SyntheticCorpus, MissingSynthParamsIsConfigError) {
  LanguageSpec spec;
  spec.lang_id = "plain";
  EXPECT_THROW(generate_synthetic_corpus(spec, 1, 0), ConfigError);
}

TEST(SyntheticCorpus, ZeroDocsIsConfigError) {
  EXPECT_THROW(generate_synthetic_corpus(synth_language("xa", 0x61, 0x6A), 0, 0), ConfigError);
}

TEST(SyntheticCorpus, TinyAlphabetRejected) {
  EXPECT_THROW(generate_synthetic_corpus(synth_language("xa", 0x61, 0x63), 1, 0), ConfigError);
}

TEST(SyntheticCorpus, ParallelPairsShareStructure) {
  const auto src = synth_language("en", 0x61, 0x6A);
  const auto tgt = synth_language("xb", 0x6B, 0x74);
  const auto pairs = generate_parallel_pairs(src, tgt, 30, 5);
  ASSERT_EQ(pairs.size(), 30u);
  for (const auto& p : pairs) {
    const auto words = [](const std::string& s, char sep) {
      return std::count(s.begin(), s.end(), sep) + 1;
    };
    EXPECT_EQ(words(p.source, 0x61), words(p.target, 0x6B));
  }
  EXPECT_EQ(pairs.front().source, generate_parallel_pairs(src, synth_language("xc", 0x75, 0x7E), 30, 5).front().source);
}

TEST(Ingest, DirectoryWithThreeFiles) {
  TempDir dir;
  write_file(dir / "a.txt", "alpha");
  write_file(dir / "b.txt", "beta");
  write_file(dir / "c.txt", "gamma");
  const auto docs = ingest_text_corpus(dir.path(), "en");
  ASSERT_EQ(docs.size(), 3u);
  EXPECT_EQ(docs[0].text, "alpha");
  EXPECT_EQ(docs[2].text, "gamma");
  EXPECT_EQ(docs[1].lang_id, "en");
}

TEST(Ingest, EmptyDirectoryIsEmptyList) {
  TempDir dir;
  EXPECT_TRUE(ingest_text_corpus(dir.path(), "en").empty());
}

TEST(Ingest, RecordSplittingOnBlankLines) {
  TempDir dir;
  write_file(dir / "f.txt", "hello\n\nworld");
  const auto docs = ingest_text_corpus(dir / "f.txt", "en", IngestOptions{true});
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].text, "hello");
  EXPECT_EQ(docs[1].text, "world");
  EXPECT_NE(docs[0].doc_id, docs[1].doc_id);
}

TEST(Ingest, MissingPathIsIoError) {
  EXPECT_THROW(ingest_text_corpus("/nonexistent/aflm/path", "en"), IoError);
}

TEST(Ingest, InvalidUtf8NamesTheFile) {
  TempDir dir;
  write_file(dir / "bad.txt", std::string("ok \xff\xfe"));
  try {
    ingest_text_corpus(dir.path(), "en");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt"), std::string::npos);
  }
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(is_valid_utf8("h\xc3\xa9llo \xe4\xb8\x96\xe7\x95\x8c"));
  EXPECT_TRUE(is_valid_utf8("\xf0\x9f\x98\x80"));
  EXPECT_FALSE(is_valid_utf8("\xc0\x80"));          // overlong
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));      // surrogate
  EXPECT_FALSE(is_valid_utf8("\xe4\xb8"));          // truncated
  EXPECT_FALSE(is_valid_utf8("\xf4\x90\x80\x80"));  // > U+10FFFF
}

TEST(PackBlocks, HandExample) {
  const std::vector<std::vector<TokenId>> docs{{10, 11, 12}, {20, 21, 22, 23}};
  const auto s = pack_blocks(docs, 4, 0);
  ASSERT_EQ(s.blocks.size(), 2u);
  EXPECT_EQ(s.blocks[0], (std::vector<TokenId>{10, 11, 12, 0}));
  EXPECT_EQ(s.blocks[1], (std::vector<TokenId>{20, 21, 22, 23}));
}

TEST(PackBlocks, SingleDocOneShortOfBlock) {
  const auto s = pack_blocks({{5, 6, 7}}, 4, 0);
  ASSERT_EQ(s.blocks.size(), 1u);
  EXPECT_EQ(s.blocks[0].back(), 0u);
}

TEST(PackBlocks, ShorterThanBlockIsEmpty) {
  EXPECT_TRUE(pack_blocks({{5, 6}}, 8, 0).blocks.empty());
}

TEST(PackBlocks, BlockSizeBelowTwoRejected) {
  EXPECT_THROW(pack_blocks({{5}}, 1, 0), ConfigError);
}

TEST(PackBlocks, ConservationProperty) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_docs = rng.uniform_index(8);
    const std::size_t block = 2 + rng.uniform_index(9);
    std::vector<std::vector<TokenId>> docs(n_docs);
    std::size_t total = 0;
    for (auto& d : docs) {
      d.resize(rng.uniform_index(12));
      for (auto& t : d) t = static_cast<TokenId>(4 + rng.uniform_index(100));
      total += d.size();
    }
    const auto s = pack_blocks(docs, block, 0);
    std::size_t sum = 0;
    for (const auto& b : s.blocks) {
      ASSERT_EQ(b.size(), block);
      sum += b.size();
    }
    EXPECT_EQ(sum, (total + n_docs) / block * block);
  }
}

CorpusManifest sample_manifest() {
  return CorpusManifest::parse(R"({
    "split": 0.2, "seed": 3, "source_language": "en",
    "languages": [
      {"lang_id": "en", "class": "pretraining", "n_docs": 40,
       "synthetic": {"alphabet": ["0x61", "0x6a"], "seed_offset": 1}},
      {"lang_id": "xb", "class": "adapting", "n_docs": 30, "parallel_pairs": 12,
       "synthetic": {"alphabet": [107, 116], "seed_offset": 2}},
      {"lang_id": "xc", "class": "other", "n_docs": 20,
       "synthetic": {"alphabet": [117, 126], "seed_offset": 3, "sentence_words": [3, 6]}}
    ]})");
}

TEST(Manifest, ParseAndQuery) {
  const auto m = sample_manifest();
  EXPECT_EQ(m.lang_ids(), (std::vector<std::string>{"en", "xb", "xc"}));
  EXPECT_EQ(m.lang_ids(LanguageClass::adapting), (std::vector<std::string>{"xb"}));
  ASSERT_NE(m.find("xc"), nullptr);
  EXPECT_EQ(m.find("xc")->spec.synth->min_sentence_words, 3u);
  EXPECT_EQ(m.find("nope"), nullptr);
}

TEST(Manifest, JsonRoundTrip) {
  const auto m = sample_manifest();
  const auto again = CorpusManifest::parse(m.to_json());
  EXPECT_EQ(again.to_json(), m.to_json());
}

TEST(Manifest, ValidationListsEveryProblem) {
  try {
    CorpusManifest::parse(R"({"split": 1.5, "source_language": "zz", "languages": [
      {"lang_id": "a", "class": "pretraining"},
      {"lang_id": "a", "class": "other", "n_docs": 1, "synthetic": {"alphabet": [97, 106]}}]})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("split"), std::string::npos);
    EXPECT_NE(msg.find("duplicate"), std::string::npos);
    EXPECT_NE(msg.find("neither"), std::string::npos);
    EXPECT_NE(msg.find("zz"), std::string::npos);
  }
}

TEST(Manifest, UnknownClassRejected) {
  EXPECT_THROW(CorpusManifest::parse(R"({"languages": [{"lang_id": "a", "class": "weird",
      "n_docs": 1, "synthetic": {"alphabet": [97, 106]}}]})"),
               ConfigError);
}

TEST(Split, DeterministicAndPartitioning) {
  const auto m = sample_manifest();
  const auto docs = materialize_corpus(m);
  EXPECT_EQ(docs.size(), 90u);
  const auto s1 = split_corpus(docs, m.split);
  const auto s2 = split_corpus(materialize_corpus(m), m.split);
  EXPECT_EQ(s1.train.size() + s1.validation.size(), docs.size());
  ASSERT_EQ(s1.validation.size(), s2.validation.size());
  for (std::size_t i = 0; i < s1.validation.size(); ++i) {
    EXPECT_EQ(s1.validation[i].doc_id, s2.validation[i].doc_id);
  }
  EXPECT_GT(s1.validation.size(), 0u);
  EXPECT_GT(s1.train.size(), s1.validation.size());
}

TEST(ParallelPairs, GeneratedFromManifest) {
  const auto m = sample_manifest();
  const auto pairs = load_parallel_pairs(m, *m.find("xb"));
  EXPECT_EQ(pairs.size(), 12u);
  EXPECT_TRUE(load_parallel_pairs(m, *m.find("xc")).empty());
}

TEST(ParallelPairs, JsonlFileWithLineNumbers) {
  TempDir dir;
  write_file(dir / "p.jsonl", "{\"source\": \"a b\", \"target\": \"c d\"}\n\nnot json\n");
  write_file(dir / "x.txt", "hello");
  const auto m = CorpusManifest::parse(R"({"languages": [
      {"lang_id": "x", "class": "other", "path": "x.txt", "parallel_path": "p.jsonl"}]})",
                                       dir.path());
  try {
    load_parallel_pairs(m, m.languages[0]);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
}

}  // namespace
