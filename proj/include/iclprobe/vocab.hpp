// Token vocabularies: dense id -> string tables loaded from TSV.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iclprobe/common.hpp"

namespace iclprobe {

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

/// Length of the valid UTF-8 sequence starting at s[i], or 0 if invalid.
inline std::size_t utf8_sequence_length(std::string_view s, std::size_t i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0 && lead >= 0xC2) len = 2;
  else if ((lead & 0xF0) == 0xE0) len = 3;
  else if ((lead & 0xF8) == 0xF0 && lead <= 0xF4) len = 4;
  else return 0;
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
  }
  return len;
}

}  // namespace detail

/// Escapes a token string for the vocabulary TSV: JSON escapes for control
/// characters and backslash, \xHH for bytes that are not valid UTF-8.
inline std::string escape_token(std::string_view raw) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == '\\') { out += "\\\\"; ++i; continue; }
    if (c == '\n') { out += "\\n"; ++i; continue; }
    if (c == '\t') { out += "\\t"; ++i; continue; }
    if (c == '\r') { out += "\\r"; ++i; continue; }
    if (c < 0x20 || c == 0x7F) {
      out += "\\u00";
      out += digits[c >> 4];
      out += digits[c & 0xF];
      ++i;
      continue;
    }
    const std::size_t len = detail::utf8_sequence_length(raw, i);
    if (len == 0) {
      out += "\\x";
      out += digits[c >> 4];
      out += digits[c & 0xF];
      ++i;
      continue;
    }
    out.append(raw.substr(i, len));
    i += len;
  }
  return out;
}

inline std::string unescape_token(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (++i >= text.size()) fail(ErrorCode::Malformed, "dangling backslash");
    switch (text[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case '/': out += '/'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'x': {
        const int hi = i + 1 < text.size() ? detail::hex_value(text[i + 1]) : -1;
        const int lo = i + 2 < text.size() ? detail::hex_value(text[i + 2]) : -1;
        if (hi < 0 || lo < 0) fail(ErrorCode::Malformed, "bad \\x escape");
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        break;
      }
      case 'u': {
        auto read4 = [&](std::size_t at) -> std::uint32_t {
          if (at + 4 > text.size()) fail(ErrorCode::Malformed, "short \\u escape");
          std::uint32_t v = 0;
          for (std::size_t k = 0; k < 4; ++k) {
            const int h = detail::hex_value(text[at + k]);
            if (h < 0) fail(ErrorCode::Malformed, "bad \\u escape");
            v = v * 16 + static_cast<std::uint32_t>(h);
          }
          return v;
        };
        std::uint32_t cp = read4(i + 1);
        i += 4;
        if (cp >= 0xD800 && cp <= 0xDBFF) {
          if (i + 2 < text.size() && text[i + 1] == '\\' && text[i + 2] == 'u') {
            const std::uint32_t low = read4(i + 3);
            if (low < 0xDC00 || low > 0xDFFF) fail(ErrorCode::Malformed, "unpaired surrogate");
            cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
            i += 6;
          } else {
            fail(ErrorCode::Malformed, "unpaired surrogate");
          }
        }
        detail::append_utf8(out, cp);
        break;
      }
      default: fail(ErrorCode::Malformed, std::string("unknown escape \\") + text[i]);
    }
  }
  return out;
}

inline bool looks_special(std::string_view token) {
  if (token.size() >= 4 && token.substr(0, 2) == "<|" && token.substr(token.size() - 2) == "|>") {
    return true;
  }
  static constexpr std::string_view fixed[] = {"<s>",   "</s>",  "<unk>", "<pad>", "<mask>",
                                               "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  for (auto f : fixed) {
    if (token == f) return true;
  }
  return false;
}

/// Dense id -> token string table. Token ids follow BPE merge order, which
/// is what makes index ranges usable as a frequency proxy.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Non-empty strings must be unique; empty strings (unused padding ids)
  /// may repeat.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    special_.assign(tokens_.size(), false);
    for (std::size_t id = 0; id < tokens_.size(); ++id) {
      const auto& tok = tokens_[id];
      special_[id] = looks_special(tok);
      if (tok.empty()) continue;
      auto [it, inserted] = index_.emplace(tok, static_cast<TokenId>(id));
      if (!inserted) {
        fail(ErrorCode::DuplicateString, "token string \"" + escape_token(tok) + "\" has ids " +
                                             std::to_string(it->second) + " and " +
                                             std::to_string(id));
      }
    }
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  const std::string& token(TokenId id) const {
    if (!contains(id)) fail(ErrorCode::OutOfRange, "token id " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::optional<TokenId> find(std::string_view text) const {
    auto it = index_.find(std::string(text));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_special(TokenId id) const { return contains(id) && special_[static_cast<std::size_t>(id)]; }
  void mark_special(TokenId id) { special_.at(static_cast<std::size_t>(id)) = true; }

  std::string decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) out += token(id);
    return out;
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<bool> special_;
  std::unordered_map<std::string, TokenId> index_;
};

inline Vocabulary parse_vocab(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<std::string> tokens;
  std::vector<bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorCode::Malformed, origin + ":" + std::to_string(line_no) + ": missing tab");
    }
    std::int64_t id = -1;
    const auto id_text = std::string_view(line).substr(0, tab);
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc{} || ptr != id_text.data() + id_text.size() || id < 0) {
      fail(ErrorCode::Malformed, origin + ":" + std::to_string(line_no) + ": bad id");
    }
    const auto uid = static_cast<std::size_t>(id);
    if (uid < seen.size() && seen[uid]) {
      fail(ErrorCode::DuplicateId, origin + ": id " + std::to_string(id) + " repeated");
    }
    if (uid != tokens.size()) {
      fail(ErrorCode::NonDenseIds, origin + ": expected id " + std::to_string(tokens.size()) +
                                       ", found " + std::to_string(id));
    }
    seen.push_back(true);
    tokens.push_back(unescape_token(std::string_view(line).substr(tab + 1)));
  }
  return Vocabulary(std::move(tokens));
}

inline Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open vocabulary " + path);
  return parse_vocab(in, path);
}

inline void write_vocab(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    out << id << '\t' << escape_token(vocab.tokens()[id]) << '\n';
  }
}

}  // namespace iclprobe
