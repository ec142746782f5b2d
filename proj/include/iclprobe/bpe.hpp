// Rank-based byte-pair encoding over a Vocabulary.
//
// A token's id doubles as its merge rank: encoding repeatedly merges the
// adjacent pair whose concatenation has the smallest id, the same rule used
// by tiktoken-style tokenizers. No separate merges table is needed, which
// lets any id-ordered vocabulary file drive the encoder.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "iclprobe/common.hpp"
#include "iclprobe/vocab.hpp"

namespace iclprobe {

namespace detail {

inline bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
inline bool is_letter_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}
inline bool is_digit_byte(char c) { return c >= '0' && c <= '9'; }

inline std::size_t contraction_length(std::string_view s, std::size_t i) {
  if (s[i] != '\'') return 0;
  static constexpr std::string_view forms[] = {"'re", "'ve", "'ll", "'s", "'t", "'m", "'d"};
  for (auto f : forms) {
    if (s.substr(i, f.size()) == f) return f.size();
  }
  return 0;
}

}  // namespace detail

/// GPT-2 style pre-tokenization: contractions, optionally space-prefixed
/// letter runs, digit runs and punctuation runs, and whitespace runs that
/// leave their final space to the following word.
inline std::vector<std::string_view> pretokenize(std::string_view text) {
  using namespace detail;
  std::vector<std::string_view> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (const auto len = contraction_length(text, i)) {
      out.push_back(text.substr(i, len));
      i += len;
      continue;
    }
    std::size_t j = i;
    if (text[i] == ' ' && i + 1 < n && !is_space_byte(text[i + 1])) j = i + 1;
    if (!is_space_byte(text[j])) {
      std::size_t k = j;
      if (is_letter_byte(text[k])) {
        while (k < n && is_letter_byte(text[k])) ++k;
      } else if (is_digit_byte(text[k])) {
        while (k < n && is_digit_byte(text[k])) ++k;
      } else {
        while (k < n && !is_space_byte(text[k]) && !is_letter_byte(text[k]) &&
               !is_digit_byte(text[k])) {
          ++k;
        }
      }
      out.push_back(text.substr(i, k - i));
      i = k;
      continue;
    }
    std::size_t m = i;
    while (m < n && is_space_byte(text[m])) ++m;
    if (m == n || m - i == 1) {
      out.push_back(text.substr(i, m - i));
      i = m;
    } else {
      out.push_back(text.substr(i, m - 1 - i));
      i = m - 1;
    }
  }
  return out;
}

/// Splits into UTF-8 characters; invalid bytes stand alone.
inline std::vector<std::string> split_characters(std::string_view chunk) {
  std::vector<std::string> chars;
  std::size_t i = 0;
  while (i < chunk.size()) {
    std::size_t len = detail::utf8_sequence_length(chunk, i);
    if (len == 0) len = 1;
    chars.emplace_back(chunk.substr(i, len));
    i += len;
  }
  return chars;
}

class BpeEncoder {
 public:
  explicit BpeEncoder(const Vocabulary& vocab) : vocab_(&vocab) {}

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (auto chunk : pretokenize(text)) encode_chunk(chunk, ids);
    return ids;
  }

  /// Encodes and checks that decoding restores the input exactly.
  std::vector<TokenId> encode_exact(std::string_view text) const {
    auto ids = encode(text);
    if (vocab_->decode(ids) != text) {
      fail(ErrorCode::UnknownSymbol, "\"" + std::string(text) + "\" does not round-trip");
    }
    return ids;
  }

  const Vocabulary& vocab() const noexcept { return *vocab_; }

 private:
  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
    std::vector<std::string> pieces = split_characters(chunk);
    for (const auto& p : pieces) {
      if (!vocab_->find(p)) {
        fail(ErrorCode::UnknownSymbol, "symbol \"" + escape_token(p) + "\" not in vocabulary");
      }
    }
    while (pieces.size() > 1) {
      TokenId best = std::numeric_limits<TokenId>::max();
      std::size_t at = 0;
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        if (auto id = vocab_->find(pieces[i] + pieces[i + 1]); id && *id < best) {
          best = *id;
          at = i;
        }
      }
      if (best == std::numeric_limits<TokenId>::max()) break;
      pieces[at] += pieces[at + 1];
      pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    }
    for (const auto& p : pieces) out.push_back(*vocab_->find(p));
  }

  const Vocabulary* vocab_;
};

struct BpeTrainOptions {
  std::size_t max_merges = 8000;
  std::uint64_t min_pair_count = 1;
  std::vector<std::string> special_tokens = {"<|endoftext|>", "<|padding|>"};
};

/// Adds every pre-token of `text` to `counts` with the given weight.
inline void count_chunks(std::string_view text, std::uint64_t weight,
                         std::map<std::string, std::uint64_t>& counts) {
  for (auto chunk : pretokenize(text)) counts[std::string(chunk)] += weight;
}

/// Classic frequency-driven BPE training. Ids are assigned as specials, then
/// the base alphabet by descending frequency, then merges in the order they
/// were learned, so lower ids mean more frequent units.
inline Vocabulary train_bpe(const std::map<std::string, std::uint64_t>& chunk_counts,
                            const BpeTrainOptions& options = {}) {
  struct Word {
    std::vector<std::string> symbols;
    std::uint64_t count;
  };
  std::vector<Word> words;
  std::map<std::string, std::uint64_t> char_freq;
  for (const auto& [chunk, count] : chunk_counts) {
    Word w{split_characters(chunk), count};
    for (const auto& c : w.symbols) char_freq[c] += count;
    words.push_back(std::move(w));
  }

  std::vector<std::string> tokens = options.special_tokens;
  std::vector<std::pair<std::string, std::uint64_t>> alphabet(char_freq.begin(), char_freq.end());
  std::stable_sort(alphabet.begin(), alphabet.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, bool> known;
  for (const auto& t : tokens) known[t] = true;
  for (const auto& [c, _] : alphabet) {
    if (!known[c]) {
      tokens.push_back(c);
      known[c] = true;
    }
  }

  using Pair = std::pair<std::string, std::string>;
  std::map<Pair, std::int64_t> pair_counts;
  std::map<Pair, std::set<std::size_t>> where;
  auto add_pairs = [&](std::size_t wi, std::int64_t sign) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      Pair p{w.symbols[i], w.symbols[i + 1]};
      auto& c = pair_counts[p];
      c += sign * static_cast<std::int64_t>(w.count);
      if (sign > 0) where[p].insert(wi);
      if (c == 0) pair_counts.erase(p);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_pairs(wi, +1);

  for (std::size_t merge = 0; merge < options.max_merges; ++merge) {
    const Pair* best = nullptr;
    std::int64_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      // Lexicographic map order keeps the smallest pair among equal counts.
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr || static_cast<std::uint64_t>(best_count) < options.min_pair_count) break;
    const Pair chosen = *best;
    const std::string merged = chosen.first + chosen.second;
    if (!known[merged]) {
      tokens.push_back(merged);
      known[merged] = true;
    }
    const std::set<std::size_t> affected = where[chosen];
    where.erase(chosen);
    for (std::size_t wi : affected) {
      auto& w = words[wi];
      add_pairs(wi, -1);
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == chosen.first &&
            w.symbols[i + 1] == chosen.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
      add_pairs(wi, +1);
    }
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace iclprobe
