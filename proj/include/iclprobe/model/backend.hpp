// The scoring contract shared by every model backend, plus the two oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iclprobe/common.hpp"

namespace iclprobe {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ScoreRequest {
  std::vector<TokenId> prompt;
  int top_k = 2;
  bool want_hidden = false;
  // Ground truth for backends that read it (the metadata oracle). Never sent
  // over the wire.
  std::optional<TokenId> answer_hint;
};

struct AnswerLogprob {
  double value = kNegInf;
  bool floor = false;  // true when the answer fell outside a truncated top-k
};

struct ScoreResult {
  std::vector<std::pair<TokenId, double>> topk;  // non-increasing, ties by lower id
  std::optional<std::vector<double>> full_logprobs;
  // Tokens absent from topk have probability zero.
  bool exhaustive = false;
  std::optional<std::vector<double>> hidden_last;

  AnswerLogprob answer_logprob_of(TokenId t) const {
    for (const auto& [id, lp] : topk) {
      if (id == t) return {lp, false};
    }
    if (full_logprobs) {
      if (t < 0 || static_cast<std::size_t>(t) >= full_logprobs->size()) {
        fail(ErrorCode::OutOfRange, "token " + std::to_string(t) + " outside the distribution");
      }
      return {(*full_logprobs)[static_cast<std::size_t>(t)], false};
    }
    if (exhaustive || topk.empty()) return {kNegInf, false};
    return {topk.back().second, true};
  }

  /// Correct iff t is the single most probable token; a tie for first place
  /// counts as incorrect.
  bool top1_is(TokenId t) const {
    if (topk.empty() || topk.front().first != t) return false;
    return topk.size() < 2 || topk[1].second < topk[0].second;
  }
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ScoreResult score(const ScoreRequest& req) const = 0;
  virtual std::string kind() const = 0;
};

inline void check_request(const ScoreRequest& req, std::size_t vocab_size) {
  if (req.prompt.empty()) fail(ErrorCode::InvalidConfig, "prompt is empty");
  if (req.top_k < 1) fail(ErrorCode::InvalidConfig, "top_k must be >= 1");
  if (vocab_size && static_cast<std::size_t>(req.top_k) > vocab_size) {
    fail(ErrorCode::InvalidConfig, "top_k exceeds vocabulary size");
  }
  for (TokenId id : req.prompt) {
    if (id < 0 || (vocab_size && static_cast<std::size_t>(id) >= vocab_size)) {
      fail(ErrorCode::VocabMismatch, "prompt token " + std::to_string(id) + " outside vocabulary of size " +
                                         std::to_string(vocab_size));
    }
  }
}

/// Top-k of a full log-probability vector, ties broken toward lower ids.
inline std::vector<std::pair<TokenId, double>> top_k_of(std::span<const double> logprobs, int k) {
  std::vector<TokenId> ids(logprobs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  auto before = [&](TokenId a, TokenId b) {
    const double la = logprobs[static_cast<std::size_t>(a)], lb = logprobs[static_cast<std::size_t>(b)];
    return la != lb ? la > lb : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(kk), ids.end(), before);
  std::vector<std::pair<TokenId, double>> out;
  for (std::size_t i = 0; i < kk; ++i) out.emplace_back(ids[i], logprobs[static_cast<std::size_t>(ids[i])]);
  return out;
}

/// Longest suffix of the prompt that occurred earlier; returns the token that
/// followed the most recent such occurrence, or the last token when no suffix
/// recurs. Linear time via the Z-function of the reversed prompt.
inline TokenId induction_oracle_predict(std::span<const TokenId> prompt) {
  if (prompt.empty()) fail(ErrorCode::InvalidConfig, "prompt is empty");
  const std::size_t n = prompt.size();
  std::vector<TokenId> r(prompt.rbegin(), prompt.rend());
  std::vector<std::size_t> z(n, 0);
  std::size_t l = 0, rr = 0;
  std::size_t best_len = 0, best_j = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (j < rr) z[j] = std::min(rr - j, z[j - l]);
    while (j + z[j] < n && r[z[j]] == r[j + z[j]]) ++z[j];
    if (j + z[j] > rr) {
      l = j;
      rr = j + z[j];
    }
    if (z[j] > best_len) {
      best_len = z[j];
      best_j = j;
    }
  }
  if (best_len == 0) return prompt.back();
  // The match ends at prompt index n - 1 - best_j; its successor follows.
  return prompt[n - best_j];
}

/// Puts all probability on the instance answer.
class MetadataOracle final : public Backend {
 public:
  explicit MetadataOracle(std::size_t vocab_size = 0) : vocab_size_(vocab_size) {}

  ScoreResult score(const ScoreRequest& req) const override {
    check_request(req, vocab_size_);
    if (!req.answer_hint) fail(ErrorCode::InvalidConfig, "metadata oracle needs the answer in the request");
    ScoreResult res;
    res.topk = {{*req.answer_hint, 0.0}};
    res.exhaustive = true;
    return res;
  }
  std::string kind() const override { return "metadata"; }

 private:
  std::size_t vocab_size_;
};

/// Puts all probability on the longest-suffix-match continuation.
class InductionOracle final : public Backend {
 public:
  explicit InductionOracle(std::size_t vocab_size = 0) : vocab_size_(vocab_size) {}

  ScoreResult score(const ScoreRequest& req) const override {
    check_request(req, vocab_size_);
    ScoreResult res;
    res.topk = {{induction_oracle_predict(req.prompt), 0.0}};
    res.exhaustive = true;
    return res;
  }
  std::string kind() const override { return "induction"; }

 private:
  std::size_t vocab_size_;
};

}  // namespace iclprobe
