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

#include "aflm/tokenizer.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "aflm/errors.hpp"
#include "aflm/random.hpp"

namespace aflm {

namespace {

constexpr std::string_view kFormatMagic = "aflm-tokenizer";
constexpr int kFormatVersion = 1;

bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\v' || c == '\f';
}

std::string to_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0xF]);
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::string from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw DataError("odd-length hex token");
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = hex_value(hex[i]);
    const int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) throw DataError("invalid hex digit in tokenizer file");
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

}  // namespace

std::optional<TokenId> Vocabulary::id_of(std::string_view bytes) const {
  const auto it = normal_.find(std::string(bytes));
  if (it == normal_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> Vocabulary::special_id(std::string_view name) const {
  const auto it = special_.find(std::string(name));
  if (it == special_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::add(std::string bytes, bool special) {
  auto& index = special ? special_ : normal_;
  if (const auto it = index.find(bytes); it != index.end()) return it->second;
  if (!special && bytes.empty()) throw DataError("empty token");
  const auto id = static_cast<TokenId>(entries_.size());
  index.emplace(bytes, id);
  entries_.push_back({std::move(bytes), special});
  return id;
}

TokenizerModel TokenizerModel::byte_level() {
  TokenizerModel m;
  m.vocab_.add(std::string(SpecialTokens::kEos), true);
  m.vocab_.add(std::string(SpecialTokens::kPad), true);
  m.vocab_.add(std::string(SpecialTokens::kImStart), true);
  m.vocab_.add(std::string(SpecialTokens::kImEnd), true);
  for (int b = 0; b < 256; ++b) m.vocab_.add(std::string(1, static_cast<char>(b)));
  return m;
}

bool TokenizerModel::has_chat_tokens() const {
  return vocab_.special_id(SpecialTokens::kImStart) == SpecialTokens::im_start &&
         vocab_.special_id(SpecialTokens::kImEnd) == SpecialTokens::im_end;
}

TokenId TokenizerModel::add_merge(TokenId left, TokenId right) {
  if (left >= vocab_.size() || right >= vocab_.size() ||
      vocab_.entry(left).special || vocab_.entry(right).special) {
    throw DataError("merge references an invalid token");
  }
  const auto result = vocab_.add(vocab_.bytes(left) + vocab_.bytes(right));
  rank_.try_emplace(pair_key(left, right), merges_.size());
  merges_.push_back({left, right, result});
  return result;
}

std::vector<std::string_view> split_pieces(std::string_view text) {
  std::vector<std::string_view> pieces;
  std::size_t start = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (is_ascii_space(text[i])) {
      pieces.push_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size()) pieces.push_back(text.substr(start));
  return pieces;
}

void TokenizerModel::encode_piece(std::string_view piece,
                                  std::vector<TokenId>& out) const {
  std::vector<TokenId> symbols;
  symbols.reserve(piece.size());
  for (unsigned char c : piece) symbols.push_back(byte_token(c));
  if (merges_.empty()) {
    out.insert(out.end(), symbols.begin(), symbols.end());
    return;
  }
  std::vector<TokenId> next;
  next.reserve(symbols.size());
  while (symbols.size() > 1) {
    // Lowest-rank pair first; equivalent to applying merges in order since
    // a merge can only create pairs of higher rank.
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const auto it = rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const auto& m = merges_[best_rank];
    next.clear();
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == m.left && symbols[i + 1] == m.right) {
        next.push_back(m.result);
        i += 2;
      } else {
        next.push_back(symbols[i]);
        ++i;
      }
    }
    symbols.swap(next);
  }
  out.insert(out.end(), symbols.begin(), symbols.end());
}

std::vector<TokenId> TokenizerModel::encode(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (const auto piece : split_pieces(text)) encode_piece(piece, out);
  return out;
}

std::string TokenizerModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (const auto id : ids) {
    if (id >= vocab_.size()) {
      throw DataError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                      std::to_string(vocab_.size()));
    }
    out += vocab_.bytes(id);
  }
  return out;
}

std::string TokenizerModel::serialize() const {
  std::size_t specials = 0;
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    specials += vocab_.entry(static_cast<TokenId>(i)).special ? 1 : 0;
  }
  std::ostringstream out;
  out << kFormatMagic << ' ' << kFormatVersion << '\n';
  out << "size " << vocab_.size() << '\n';
  out << "specials " << specials << '\n';
  out << "merges " << merges_.size() << '\n';
  for (const auto& m : merges_) {
    out << "merge " << m.left << ' ' << m.right << ' ' << m.result << '\n';
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const auto& e = vocab_.entry(static_cast<TokenId>(i));
    out << (e.special ? "special " : "token ") << i << ' ' << to_hex(e.bytes) << '\n';
  }
  return out.str();
}

TokenizerModel TokenizerModel::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kFormatMagic) throw DataError("not a tokenizer file");
  if (version != kFormatVersion) {
    throw DataError("unsupported tokenizer format version " + std::to_string(version));
  }
  std::string key;
  std::size_t size = 0, specials = 0, n_merges = 0;
  if (!(in >> key >> size) || key != "size" || !(in >> key >> specials) ||
      key != "specials" || !(in >> key >> n_merges) || key != "merges") {
    throw DataError("malformed tokenizer header");
  }
  std::vector<Merge> merges(n_merges);
  for (auto& m : merges) {
    if (!(in >> key >> m.left >> m.right >> m.result) || key != "merge") {
      throw DataError("malformed merge line");
    }
  }
  TokenizerModel model;
  for (std::size_t i = 0; i < size; ++i) {
    std::size_t id = 0;
    std::string hex;
    if (!(in >> key >> id) || id != i || (key != "token" && key != "special")) {
      throw DataError("malformed vocabulary line " + std::to_string(i));
    }
    // Entries never contain spaces in hex form; an empty token has no field.
    std::getline(in, hex);
    if (!hex.empty() && hex.front() == ' ') hex.erase(0, 1);
    const auto bytes = from_hex(hex);
    const auto got = model.vocab_.add(bytes, key == "special");
    if (got != id) throw DataError("duplicate vocabulary entry at id " + std::to_string(id));
  }
  for (std::size_t r = 0; r < merges.size(); ++r) {
    const auto& m = merges[r];
    if (m.left >= size || m.right >= size || m.result >= size ||
        model.vocab_.bytes(m.result) != model.vocab_.bytes(m.left) + model.vocab_.bytes(m.right)) {
      throw DataError("inconsistent merge at rank " + std::to_string(r));
    }
    model.rank_.try_emplace(pair_key(m.left, m.right), r);
  }
  model.merges_ = std::move(merges);
  return model;
}

void TokenizerModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto text = serialize();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("error writing " + path.string());
}

TokenizerModel TokenizerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

std::string TokenizerModel::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(serialize()));
  return buf;
}

TokenizerModel train_bpe(std::span<const std::string> documents,
                         std::size_t target_size) {
  auto model = TokenizerModel::byte_level();
  if (target_size < model.size()) {
    throw ConfigError("target_size must be at least " + std::to_string(model.size()));
  }
  std::unordered_map<std::string_view, std::int64_t> piece_counts;
  std::size_t total_bytes = 0;
  for (const auto& doc : documents) {
    total_bytes += doc.size();
    for (const auto piece : split_pieces(doc)) ++piece_counts[piece];
  }
  if (total_bytes == 0) throw DataError("cannot train BPE on an empty corpus");

  struct Word {
    std::vector<TokenId> symbols;
    std::int64_t count = 0;
  };
  // Sorted so that the word order, and thus every container walk, is
  // independent of hash-map iteration order.
  std::vector<std::pair<std::string_view, std::int64_t>> sorted(piece_counts.begin(),
                                                                piece_counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Word> words;
  words.reserve(sorted.size());
  for (const auto& [piece, count] : sorted) {
    Word w;
    w.count = count;
    for (unsigned char c : piece) w.symbols.push_back(model.byte_token(c));
    words.push_back(std::move(w));
  }

  auto key = [](TokenId a, TokenId b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::unordered_set<std::size_t>> where;
  auto add_word = [&](std::size_t w, std::int64_t sign) {
    const auto& s = words[w].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const auto k = key(s[i], s[i + 1]);
      pair_counts[k] += sign * words[w].count;
      if (sign > 0) {
        where[k].insert(w);
      } else if (auto it = where.find(k); it != where.end()) {
        it->second.erase(w);
      }
    }
  };
  for (std::size_t w = 0; w < words.size(); ++w) add_word(w, +1);

  const auto& vocab = model.vocab();
  while (model.size() < target_size) {
    std::uint64_t best = 0;
    std::int64_t best_count = 0;
    for (const auto& [k, count] : pair_counts) {
      if (count < best_count || count <= 0) continue;
      if (count > best_count) {
        best = k;
        best_count = count;
        continue;
      }
      const auto l = static_cast<TokenId>(k >> 32), r = static_cast<TokenId>(k);
      const auto bl = static_cast<TokenId>(best >> 32), br = static_cast<TokenId>(best);
      const auto& lb = vocab.bytes(l);
      const auto& blb = vocab.bytes(bl);
      if (lb < blb || (lb == blb && vocab.bytes(r) < vocab.bytes(br))) best = k;
    }
    if (best_count < 2) break;

    const auto left = static_cast<TokenId>(best >> 32);
    const auto right = static_cast<TokenId>(best);
    const auto result = model.add_merge(left, right);

    auto affected_set = where[best];
    std::vector<std::size_t> affected(affected_set.begin(), affected_set.end());
    std::sort(affected.begin(), affected.end());
    for (const auto w : affected) {
      add_word(w, -1);
      auto& s = words[w].symbols;
      std::vector<TokenId> merged;
      merged.reserve(s.size());
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          merged.push_back(result);
          i += 2;
        } else {
          merged.push_back(s[i++]);
        }
      }
      s.swap(merged);
      add_word(w, +1);
    }
    for (auto it = pair_counts.begin(); it != pair_counts.end();) {
      it = it->second == 0 ? pair_counts.erase(it) : std::next(it);
    }
  }
  return model;
}

MergedTokenizer merge_vocabularies(const TokenizerModel& base,
                                   const TokenizerModel& adapting) {
  auto specials_of = [](const TokenizerModel& m) {
    std::vector<std::pair<TokenId, std::string>> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto& e = m.vocab().entry(static_cast<TokenId>(i));
      if (e.special) out.emplace_back(static_cast<TokenId>(i), e.bytes);
    }
    return out;
  };
  if (specials_of(base) != specials_of(adapting)) {
    throw ConfigError("special tokens differ between base and adapting tokenizers");
  }
  for (int b = 0; b < 256; ++b) {
    const std::string byte(1, static_cast<char>(b));
    if (!base.vocab().id_of(byte) || !adapting.vocab().id_of(byte)) {
      throw ConfigError("both tokenizers must be byte-level");
    }
  }

  MergedTokenizer out{base, {}};
  auto& merged = out.merged;
  const auto base_size = base.size();
  // Walk `adapting` merges in rank order; a merge survives only when its
  // output token is new, which also appends tokens in adapting's order
  // (every non-byte token is the output of exactly one earlier merge).
  std::vector<bool> appended(adapting.size(), false);
  for (std::size_t i = 0; i < adapting.size(); ++i) {
    const auto& e = adapting.vocab().entry(static_cast<TokenId>(i));
    if (e.special || merged.vocab().id_of(e.bytes)) continue;
    appended[i] = true;
  }
  for (const auto& m : adapting.merges()) {
    if (!appended[m.result]) continue;
    const auto& v = adapting.vocab();
    const auto left = merged.vocab().id_of(v.bytes(m.left));
    const auto right = merged.vocab().id_of(v.bytes(m.right));
    if (!left || !right) throw DataError("adapting merge references an unknown token");
    merged.add_merge(*left, *right);
    appended[m.result] = false;  // first merge producing the token wins
  }
  for (auto id = static_cast<TokenId>(base_size); id < merged.size(); ++id) {
    out.new_token_ids.insert(id);
  }
  return out;
}

}  // namespace aflm
