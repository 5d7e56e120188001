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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aflm/types.hpp"

namespace aflm {

// Reserved special tokens, always at IDs 0..3 in this order.
struct SpecialTokens {
  static constexpr std::string_view kEos = "<|endoftext|>";
  static constexpr std::string_view kPad = "<|pad|>";
  static constexpr std::string_view kImStart = "<|im_start|>";
  static constexpr std::string_view kImEnd = "<|im_end|>";

  static constexpr TokenId eos = 0;
  static constexpr TokenId pad = 1;
  static constexpr TokenId im_start = 2;
  static constexpr TokenId im_end = 3;
  static constexpr std::size_t count = 4;
};

// Byte-level BPE vocabulary. Special tokens live in their own namespace so
// they can never collide with learned byte sequences.
class Vocabulary {
 public:
  struct Entry {
    std::string bytes;
    bool special = false;
    bool operator==(const Entry&) const = default;
  };

  std::size_t size() const noexcept { return entries_.size(); }
  const Entry& entry(TokenId id) const { return entries_.at(id); }
  const std::string& bytes(TokenId id) const { return entries_.at(id).bytes; }

  std::optional<TokenId> id_of(std::string_view bytes) const;
  std::optional<TokenId> special_id(std::string_view name) const;

  // Appends a token; returns the existing ID when already present.
  TokenId add(std::string bytes, bool special = false);

  bool operator==(const Vocabulary& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, TokenId> normal_;
  std::unordered_map<std::string, TokenId> special_;
};

struct Merge {
  TokenId left = 0;
  TokenId right = 0;
  TokenId result = 0;
  bool operator==(const Merge&) const = default;
};

class TokenizerModel {
 public:
  // Specials followed by the 256 single-byte tokens; no merges.
  static TokenizerModel byte_level();

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::span<const Merge> merges() const noexcept { return merges_; }
  std::size_t size() const noexcept { return vocab_.size(); }

  TokenId byte_token(std::uint8_t byte) const noexcept {
    return static_cast<TokenId>(SpecialTokens::count + byte);
  }
  bool has_chat_tokens() const;

  // Byte split per whitespace-delimited piece, then merges in learned order.
  std::vector<TokenId> encode(std::string_view text) const;
  // Throws DataError on an out-of-range ID.
  std::string decode(std::span<const TokenId> ids) const;

  // Appends a merge of two existing tokens; the result token is created if
  // absent. Used by training and vocabulary merging.
  TokenId add_merge(TokenId left, TokenId right);

  std::string serialize() const;
  static TokenizerModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TokenizerModel load(const std::filesystem::path& path);
  // FNV-1a of serialize(), 16 hex digits.
  std::string hash() const;

  bool operator==(const TokenizerModel& other) const {
    return vocab_ == other.vocab_ && merges_ == other.merges_;
  }

 private:
  static std::uint64_t pair_key(TokenId a, TokenId b) noexcept {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
  void encode_piece(std::string_view piece, std::vector<TokenId>& out) const;

  Vocabulary vocab_;
  std::vector<Merge> merges_;
  std::unordered_map<std::uint64_t, std::size_t> rank_;  // pair -> merge index
};

// Pieces start at every ASCII whitespace byte; merges never cross pieces.
std::vector<std::string_view> split_pieces(std::string_view text);

// Greedy BPE: merge the most frequent adjacent pair (ties broken by the
// smallest (left bytes, right bytes)) until the vocabulary reaches
// target_size or no pair occurs at least twice.
TokenizerModel train_bpe(std::span<const std::string> documents,
                         std::size_t target_size);

struct MergedTokenizer {
  TokenizerModel merged;
  std::set<TokenId> new_token_ids;
};

// Base tokens keep their IDs; tokens of `adapting` missing from `base` are
// appended in `adapting`'s order. Base merges run before the adapting ones.
MergedTokenizer merge_vocabularies(const TokenizerModel& base,
                                   const TokenizerModel& adapting);

}  // namespace aflm
