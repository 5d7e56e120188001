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

#include <set>
#include <string>
#include <vector>

#include "aflm/corpus.hpp"
#include "aflm/errors.hpp"
#include "aflm/random.hpp"
#include "aflm/tokenizer.hpp"
#include "test_util.hpp"

namespace {

using namespace aflm;

TokenId byte_id(const TokenizerModel& m, char c) { return m.byte_token(static_cast<std::uint8_t>(c)); }

std::vector<std::string> one(std::string s) { return {std::move(s)}; }

// Random valid UTF-8 mixing ASCII, 2-, 3- and 4-byte code points.
std::string random_utf8(Rng& rng, std::size_t max_chars) {
  std::string s;
  const auto n = rng.uniform_index(max_chars + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t cp = 0;
    switch (rng.uniform_index(4)) {
      case 0: cp = static_cast<std::uint32_t>(rng.uniform_index(0x80)); break;
      case 1: cp = 0x80 + static_cast<std::uint32_t>(rng.uniform_index(0x800 - 0x80)); break;
      case 2:
        do {
          cp = 0x800 + static_cast<std::uint32_t>(rng.uniform_index(0x10000 - 0x800));
        } while (cp >= 0xD800 && cp <= 0xDFFF);
        break;
      default: cp = 0x10000 + static_cast<std::uint32_t>(rng.uniform_index(0x110000 - 0x10000));
    }
    if (cp < 0x80) {
      s.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      s.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      s.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      s.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return s;
}

TEST(ByteLevel, LayoutAndSpecials) {
  const auto m = TokenizerModel::byte_level();
  EXPECT_EQ(m.size(), 260u);
  EXPECT_TRUE(m.has_chat_tokens());
  EXPECT_EQ(m.vocab().special_id("<|endoftext|>"), SpecialTokens::eos);
  EXPECT_EQ(m.vocab().special_id("<|im_end|>"), SpecialTokens::im_end);
  for (int b = 0; b < 256; ++b) {
    EXPECT_EQ(m.vocab().id_of(std::string(1, static_cast<char>(b))), static_cast<TokenId>(4 + b));
  }
  // Special names are not reachable through the byte namespace.
  EXPECT_FALSE(m.vocab().id_of("<|im_end|>").has_value());
}

TEST(TrainBpe, FirstMergeIsMostFrequentPair) {
  const auto m = train_bpe(one("aaabdaaabac"), 261);
  ASSERT_EQ(m.merges().size(), 1u);
  EXPECT_EQ(m.merges()[0].left, byte_id(m, 'a'));
  EXPECT_EQ(m.merges()[0].right, byte_id(m, 'a'));
  EXPECT_EQ(m.vocab().bytes(m.merges()[0].result), "aa");
}

TEST(TrainBpe, MinimumTargetLearnsNothing) {
  const auto m = train_bpe(one("aaabdaaabac"), 260);
  EXPECT_TRUE(m.merges().empty());
  EXPECT_EQ(m, TokenizerModel::byte_level());
}

TEST(TrainBpe, RepeatedWordLearnsItsPair) {
  const auto m = train_bpe(one("ab ab ab"), 300);
  ASSERT_FALSE(m.merges().empty());
  EXPECT_EQ(m.vocab().bytes(m.merges()[0].result), "ab");
}

TEST(TrainBpe, TiesBrokenByBytes) {
  const auto m = train_bpe(one("cdcd abab"), 262);
  ASSERT_EQ(m.merges().size(), 2u);
  EXPECT_EQ(m.vocab().bytes(m.merges()[0].result), "ab");
  EXPECT_EQ(m.vocab().bytes(m.merges()[1].result), "cd");
}

TEST(TrainBpe, StopsWhenNoPairRepeats) {
  const auto m = train_bpe(one("abcdefg"), 1000);
  EXPECT_TRUE(m.merges().empty());
}

TEST(TrainBpe, OverlappingPairsCountedOnce) {
  // "aaa" holds two overlapping "aa" occurrences; only one can merge.
  const auto m = train_bpe(one("aaa"), 300);
  ASSERT_EQ(m.merges().size(), 1u);
  EXPECT_EQ(m.encode("aaa").size(), 2u);
}

TEST(TrainBpe, Errors) {
  EXPECT_THROW(train_bpe(one("abc"), 259), ConfigError);
  EXPECT_THROW(train_bpe(std::vector<std::string>{}, 300), DataError);
  EXPECT_THROW(train_bpe(std::vector<std::string>{"", ""}, 300), DataError);
}

TEST(TrainBpe, Deterministic) {
  LanguageSpec spec;
  spec.lang_id = "x";
  spec.synth = SynthParams{};
  const auto docs = generate_synthetic_corpus(spec, 50, 4);
  const auto a = train_bpe(docs, 400);
  const auto b = train_bpe(docs, 400);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(a.size(), 400u);
}

TEST(TrainBpe, ReproducesTrainingSegmentation) {
  // Naive reference: apply merges in learned order to the byte split.
  LanguageSpec spec;
  spec.lang_id = "x";
  spec.synth = SynthParams{};
  const auto docs = generate_synthetic_corpus(spec, 20, 9);
  const auto m = train_bpe(docs, 350);
  for (const auto& doc : docs) {
    std::vector<TokenId> expected;
    for (const auto piece : split_pieces(doc)) {
      std::vector<TokenId> sym;
      for (unsigned char c : piece) sym.push_back(m.byte_token(c));
      for (const auto& mg : m.merges()) {
        std::vector<TokenId> next;
        for (std::size_t i = 0; i < sym.size();) {
          if (i + 1 < sym.size() && sym[i] == mg.left && sym[i + 1] == mg.right) {
            next.push_back(mg.result);
            i += 2;
          } else {
            next.push_back(sym[i++]);
          }
        }
        sym.swap(next);
      }
      expected.insert(expected.end(), sym.begin(), sym.end());
    }
    EXPECT_EQ(m.encode(doc), expected);
  }
}

TEST(Encode, IdentityTokenizer) {
  const auto m = TokenizerModel::byte_level();
  EXPECT_EQ(m.encode("ab"), (std::vector<TokenId>{byte_id(m, 'a'), byte_id(m, 'b')}));
  EXPECT_TRUE(m.encode("").empty());
}

TEST(Encode, AppliesMerge) {
  auto m = TokenizerModel::byte_level();
  const auto ab = m.add_merge(byte_id(m, 'a'), byte_id(m, 'b'));
  EXPECT_EQ(m.encode("ab"), (std::vector<TokenId>{ab}));
  EXPECT_EQ(m.encode("abab"), (std::vector<TokenId>{ab, ab}));
}

TEST(Encode, MergesNeverCrossWhitespace) {
  auto m = TokenizerModel::byte_level();
  m.add_merge(byte_id(m, 'b'), byte_id(m, ' '));
  EXPECT_EQ(m.encode("ab c").size(), 4u);
}

TEST(Decode, RoundTripUnicode) {
  LanguageSpec spec;
  spec.lang_id = "x";
  spec.synth = SynthParams{};
  const auto m = train_bpe(generate_synthetic_corpus(spec, 30, 1), 320);
  const std::string s = "h\xc3\xa9llo \xe4\xb8\x96\xe7\x95\x8c";
  EXPECT_EQ(m.decode(m.encode(s)), s);
  EXPECT_EQ(m.decode(std::vector<TokenId>{}), "");
}

TEST(Decode, OutOfRangeIsDataError) {
  const auto m = TokenizerModel::byte_level();
  EXPECT_THROW(m.decode(std::vector<TokenId>{260}), DataError);
}

TEST(Decode, RandomUtf8RoundTrip) {
  auto m = train_bpe(std::vector<std::string>{"the cat sat on the mat", "h\xc3\xa9h\xc3\xa9 \xe4\xb8\x96\xe4\xb8\x96"}, 290);
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_utf8(rng, 24);
    ASSERT_EQ(m.decode(m.encode(s)), s);
  }
}

TEST(Decode, ArbitraryBytesRoundTrip) {
  const auto m = train_bpe(one("xyxyxy zz zz"), 280);
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    std::string s(rng.uniform_index(30), '\0');
    for (auto& c : s) c = static_cast<char>(rng.uniform_index(256));
    ASSERT_EQ(m.decode(m.encode(s)), s);
  }
}

TEST(Serialize, RoundTripAndHash) {
  LanguageSpec spec;
  spec.lang_id = "x";
  spec.synth = SynthParams{};
  const auto m = train_bpe(generate_synthetic_corpus(spec, 30, 2), 330);
  const auto again = TokenizerModel::deserialize(m.serialize());
  EXPECT_EQ(again, m);
  EXPECT_EQ(again.serialize(), m.serialize());
  EXPECT_EQ(again.hash(), m.hash());
  EXPECT_EQ(m.hash().size(), 16u);
  EXPECT_NE(m.hash(), TokenizerModel::byte_level().hash());

  aflm::testing::TempDir dir;
  m.save(dir / "tok.txt");
  EXPECT_EQ(TokenizerModel::load(dir / "tok.txt"), m);
}

TEST(Serialize, RejectsGarbage) {
  EXPECT_THROW(TokenizerModel::deserialize("nonsense"), DataError);
  auto text = TokenizerModel::byte_level().serialize();
  text.replace(text.find("aflm-tokenizer 1"), 16, "aflm-tokenizer 9");
  EXPECT_THROW(TokenizerModel::deserialize(text), DataError);
}

TEST(Merge, IdempotentOnItself) {
  const auto base = train_bpe(one("ab ab ab cd cd cd"), 270);
  const auto merged = merge_vocabularies(base, base);
  EXPECT_EQ(merged.merged, base);
  EXPECT_TRUE(merged.new_token_ids.empty());
}

TEST(Merge, AddsOnlyMissingTokens) {
  auto base = TokenizerModel::byte_level();
  base.add_merge(byte_id(base, 'a'), byte_id(base, 'b'));
  base.add_merge(byte_id(base, 'b'), byte_id(base, 'c'));
  auto adapting = TokenizerModel::byte_level();
  adapting.add_merge(byte_id(adapting, 'b'), byte_id(adapting, 'c'));
  const auto cd = adapting.add_merge(byte_id(adapting, 'c'), byte_id(adapting, 'd'));
  (void)cd;
  const auto merged = merge_vocabularies(base, adapting);
  EXPECT_EQ(merged.merged.size(), 263u);
  const auto cd_id = merged.merged.vocab().id_of("cd");
  ASSERT_TRUE(cd_id.has_value());
  EXPECT_EQ(merged.new_token_ids, (std::set<TokenId>{*cd_id}));
  EXPECT_EQ(*cd_id, 262u);
}

TEST(Merge, FullScaleSizes) {
  // 32000-token base plus 16000 learned tokens of a disjoint adapting
  // vocabulary.
  auto base = TokenizerModel::byte_level();
  auto adapting = TokenizerModel::byte_level();
  std::size_t pair = 0;
  auto next_pair = [&pair](TokenizerModel& m) {
    const auto a = static_cast<std::uint8_t>(pair / 256);
    const auto b = static_cast<std::uint8_t>(pair % 256);
    ++pair;
    m.add_merge(m.byte_token(a), m.byte_token(b));
  };
  while (base.size() < 32000) next_pair(base);
  while (adapting.size() < 260 + 16000) next_pair(adapting);
  const auto merged = merge_vocabularies(base, adapting);
  EXPECT_EQ(merged.merged.size(), 48000u);
  EXPECT_EQ(merged.new_token_ids.size(), 16000u);
  EXPECT_EQ(*merged.new_token_ids.begin(), 32000u);
  for (TokenId id = 0; id < base.size(); id += 97) {
    EXPECT_EQ(merged.merged.vocab().entry(id), base.vocab().entry(id));
  }
}

TEST(Merge, SpecialMismatchIsConfigError) {
  const auto base = TokenizerModel::byte_level();
  auto text = base.serialize();
  // Rename a special token (hex of "<|pad|>" -> "<|pid|>").
  const auto pos = text.find("3c7c7061647c3e");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 14, "3c7c7069647c3e");
  const auto other = TokenizerModel::deserialize(text);
  EXPECT_THROW(merge_vocabularies(base, other), ConfigError);
}

class MergeProperties : public ::testing::Test {
 protected:
  void SetUp() override {
    LanguageSpec a;
    a.lang_id = "a";
    a.synth = SynthParams{};
    LanguageSpec b = a;
    b.lang_id = "b";
    b.synth->alphabet_lo = 0x61;
    b.synth->alphabet_hi = 0x72;
    b.synth->seed_offset = 5;
    base_docs = generate_synthetic_corpus(a, 40, 1);
    adapt_docs = generate_synthetic_corpus(b, 40, 2);
    base = train_bpe(base_docs, 360);
    adapting = train_bpe(adapt_docs, 260 + 50);
    merged = merge_vocabularies(base, adapting);
  }
  std::vector<std::string> base_docs, adapt_docs;
  TokenizerModel base, adapting;
  MergedTokenizer merged;
};

TEST_F(MergeProperties, BaseIdsStable) {
  for (TokenId id = 0; id < base.size(); ++id) {
    const auto& e = base.vocab().entry(id);
    if (e.special) {
      EXPECT_EQ(merged.merged.vocab().special_id(e.bytes), id);
    } else {
      EXPECT_EQ(merged.merged.vocab().id_of(e.bytes), id);
    }
  }
  EXPECT_LE(merged.merged.size(), base.size() + 50);
}

TEST_F(MergeProperties, MonotoneCoverage) {
  for (const auto* docs : {&base_docs, &adapt_docs}) {
    for (const auto& d : *docs) {
      EXPECT_LE(merged.merged.encode(d).size(), base.encode(d).size());
      EXPECT_EQ(merged.merged.decode(merged.merged.encode(d)), d);
    }
  }
}

TEST_F(MergeProperties, BaseSegmentationPreservedOnBaseText) {
  // Shared-alphabet overlap can only add merges after the base ones.
  for (const auto& d : base_docs) {
    const auto ids = merged.merged.encode(d);
    for (const auto id : ids) ASSERT_LT(id, merged.merged.size());
  }
}

}  // namespace
