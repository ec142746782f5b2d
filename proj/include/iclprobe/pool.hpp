// Candidate token pools for the random-token tasks.
#pragma once

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "iclprobe/bpe.hpp"
#include "iclprobe/common.hpp"
#include "iclprobe/vocab.hpp"

namespace iclprobe {

struct WordListSource {
  std::string name;
  bool operator==(const WordListSource&) const = default;
};

struct IndexRangeSource {
  TokenId lo = 0;
  TokenId hi = 0;
  bool filter_special = true;
  bool operator==(const IndexRangeSource&) const = default;
};

using PoolSource = std::variant<WordListSource, IndexRangeSource>;

struct TokenPool {
  std::vector<TokenId> ids;  // sorted, unique
  PoolSource source;

  std::size_t size() const noexcept { return ids.size(); }
};

inline nlohmann::json pool_source_to_json(const PoolSource& source) {
  if (const auto* w = std::get_if<WordListSource>(&source)) {
    return {{"kind", "wordlist"}, {"name", w->name}};
  }
  const auto& r = std::get<IndexRangeSource>(source);
  return {{"kind", "index_range"}, {"lo", r.lo}, {"hi", r.hi}, {"filter_special", r.filter_special}};
}

inline PoolSource pool_source_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "wordlist") return WordListSource{j.value("name", std::string("frequent_en"))};
  if (kind == "index_range") {
    return IndexRangeSource{j.at("lo").get<TokenId>(), j.at("hi").get<TokenId>(),
                            j.value("filter_special", true)};
  }
  fail(ErrorCode::InvalidConfig, "unknown pool kind " + kind);
}

/// All ids in [lo, hi), minus empty and special tokens when filtering.
inline TokenPool build_pool_index_range(const Vocabulary& vocab, TokenId lo, TokenId hi,
                                        bool filter_special = true) {
  if (lo < 0 || lo >= hi || static_cast<std::size_t>(hi) > vocab.size()) {
    fail(ErrorCode::InvalidRange, "[" + std::to_string(lo) + ", " + std::to_string(hi) +
                                      ") outside vocabulary of size " + std::to_string(vocab.size()));
  }
  TokenPool pool{{}, IndexRangeSource{lo, hi, filter_special}};
  for (TokenId id = lo; id < hi; ++id) {
    if (filter_special && (vocab.token(id).empty() || vocab.is_special(id))) continue;
    pool.ids.push_back(id);
  }
  if (pool.ids.empty()) fail(ErrorCode::EmptyPool, "no usable tokens in index range");
  return pool;
}

struct WordPoolBuild {
  TokenPool pool;
  std::vector<std::string> skipped;
};

/// Maps each word to the single token encoding " " + word. Words that encode
/// to more than one token (or contain unknown symbols) are skipped and
/// reported.
inline WordPoolBuild build_pool_wordlist(const Vocabulary& vocab, const std::vector<std::string>& words,
                                         std::string name = "custom") {
  if (words.empty()) fail(ErrorCode::EmptyInput, "word list is empty");
  BpeEncoder encoder(vocab);
  WordPoolBuild build{{{}, WordListSource{std::move(name)}}, {}};
  for (const auto& word : words) {
    std::vector<TokenId> ids;
    try {
      ids = encoder.encode(" " + word);
    } catch (const Error&) {
      build.skipped.push_back(word);
      continue;
    }
    if (ids.size() != 1) {
      build.skipped.push_back(word);
      continue;
    }
    build.pool.ids.push_back(ids.front());
  }
  std::sort(build.pool.ids.begin(), build.pool.ids.end());
  build.pool.ids.erase(std::unique(build.pool.ids.begin(), build.pool.ids.end()), build.pool.ids.end());
  if (build.pool.ids.empty()) {
    std::string list;
    for (const auto& w : build.skipped) list += (list.empty() ? "" : ", ") + w;
    fail(ErrorCode::EmptyPool, "every word was skipped: " + list);
  }
  return build;
}

}  // namespace iclprobe
