// Procedural generation of the in-context-learning probe tasks.
//
// Instances are composed directly as token-id sequences: pool tokens plus the
// fixed delimiter sequences for " ->" and ";". Nothing is re-tokenized, so an
// index-range pool stays exact and the copy tasks keep their unique-match
// property. Every instance is a pure function of (pool, config, seed,
// sample_id); suites can be produced by independent workers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "json.hpp"

#include "iclprobe/assets.hpp"
#include "iclprobe/bpe.hpp"
#include "iclprobe/common.hpp"
#include "iclprobe/pool.hpp"
#include "iclprobe/rng.hpp"
#include "iclprobe/vocab.hpp"

namespace iclprobe {

enum class TaskKind { LSC, LSCG, WC, WI, TT, CF, CountryCapital };

inline std::string_view task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::LSC: return "lsc";
    case TaskKind::LSCG: return "lscg";
    case TaskKind::WC: return "wc";
    case TaskKind::WI: return "wi";
    case TaskKind::TT: return "tt";
    case TaskKind::CF: return "cf";
    case TaskKind::CountryCapital: return "country_capital";
  }
  return "?";
}

inline TaskKind parse_task(std::string_view name) {
  for (auto k : {TaskKind::LSC, TaskKind::LSCG, TaskKind::WC, TaskKind::WI, TaskKind::TT, TaskKind::CF,
                 TaskKind::CountryCapital}) {
    if (task_name(k) == name) return k;
  }
  fail(ErrorCode::InvalidConfig, "unknown task " + std::string(name));
}

inline bool uses_token_pool(TaskKind kind) {
  return kind == TaskKind::LSC || kind == TaskKind::LSCG || kind == TaskKind::WC || kind == TaskKind::WI;
}

struct LscConfig {
  int pattern_len = 5;
  int gap_len = 5;
};

struct LscgConfig {
  int pattern_len = 5;
  int gap_len = 10;
  int inner_gap_len = 2;
};

struct WcConfig {
  int n_features = 3;
  int n_labels = 2;
  int n_distractors = 7;
  int n_demos_per_feature = 5;
};

struct WiConfig {
  int seq_len = 5;
  int target_index = 1;
  int n_demos = 5;
};

struct TtConfig {
  Language src_lang = Language::EN;
  Language tgt_lang = Language::DE;
  int n_demos = 5;
};

struct CfConfig {};
struct CountryCapitalConfig {};

using TaskConfig =
    std::variant<LscConfig, LscgConfig, WcConfig, WiConfig, TtConfig, CfConfig, CountryCapitalConfig>;

inline TaskKind config_task(const TaskConfig& config) {
  static constexpr TaskKind kinds[] = {TaskKind::LSC, TaskKind::LSCG, TaskKind::WC, TaskKind::WI,
                                       TaskKind::TT,  TaskKind::CF,   TaskKind::CountryCapital};
  return kinds[config.index()];
}

inline void validate(const LscConfig& c) {
  if (c.pattern_len < 1 || c.pattern_len > 64) fail(ErrorCode::InvalidConfig, "pattern_len must be in [1, 64]");
  if (c.gap_len < 0 || c.gap_len > 64) fail(ErrorCode::InvalidConfig, "gap_len must be in [0, 64]");
}
inline void validate(const LscgConfig& c) {
  validate(LscConfig{c.pattern_len, c.gap_len});
  if (c.inner_gap_len < 0 || c.inner_gap_len > 32) {
    fail(ErrorCode::InvalidConfig, "inner_gap_len must be in [0, 32]");
  }
}
inline void validate(const WcConfig& c) {
  if (c.n_features < 1 || c.n_labels < 1 || c.n_distractors < 0 || c.n_demos_per_feature < 1) {
    fail(ErrorCode::InvalidConfig, "wc needs n_features >= 1, n_labels >= 1, n_distractors >= 0, demos >= 1");
  }
  if (c.n_features < c.n_labels) fail(ErrorCode::InvalidConfig, "wc needs n_features >= n_labels");
}
inline void validate(const WiConfig& c) {
  if (c.seq_len < 2) fail(ErrorCode::InvalidConfig, "seq_len must be >= 2");
  if (c.target_index < 0 || c.target_index >= c.seq_len) {
    fail(ErrorCode::InvalidConfig, "target_index must be in [0, seq_len)");
  }
  if (c.n_demos < 1) fail(ErrorCode::InvalidConfig, "n_demos must be >= 1");
}
inline void validate(const TtConfig& c) {
  if (c.src_lang == c.tgt_lang) fail(ErrorCode::InvalidConfig, "source and target language must differ");
  if (c.n_demos < 1) fail(ErrorCode::InvalidConfig, "n_demos must be >= 1");
}
inline void validate(const CfConfig&) {}
inline void validate(const CountryCapitalConfig&) {}
inline void validate(const TaskConfig& config) {
  std::visit([](const auto& c) { validate(c); }, config);
}

using OrderedJson = nlohmann::ordered_json;

inline OrderedJson config_to_json(const TaskConfig& config) {
  struct Visitor {
    OrderedJson operator()(const LscConfig& c) const {
      return {{"pattern_len", c.pattern_len}, {"gap_len", c.gap_len}};
    }
    OrderedJson operator()(const LscgConfig& c) const {
      return {{"pattern_len", c.pattern_len}, {"gap_len", c.gap_len}, {"inner_gap_len", c.inner_gap_len}};
    }
    OrderedJson operator()(const WcConfig& c) const {
      return {{"n_features", c.n_features},
              {"n_labels", c.n_labels},
              {"n_distractors", c.n_distractors},
              {"n_demos_per_feature", c.n_demos_per_feature}};
    }
    OrderedJson operator()(const WiConfig& c) const {
      return {{"seq_len", c.seq_len}, {"target_index", c.target_index}, {"n_demos", c.n_demos}};
    }
    OrderedJson operator()(const TtConfig& c) const {
      return {{"src_lang", std::string(language_code(c.src_lang))},
              {"tgt_lang", std::string(language_code(c.tgt_lang))},
              {"n_demos", c.n_demos}};
    }
    OrderedJson operator()(const CfConfig&) const { return OrderedJson::object(); }
    OrderedJson operator()(const CountryCapitalConfig&) const { return OrderedJson::object(); }
  };
  return std::visit(Visitor{}, config);
}

/// Missing keys fall back to the defaults above.
template <typename Json>
TaskConfig config_from_json(TaskKind kind, const Json& j) {
  switch (kind) {
    case TaskKind::LSC: {
      LscConfig c;
      c.pattern_len = j.value("pattern_len", c.pattern_len);
      c.gap_len = j.value("gap_len", c.gap_len);
      return c;
    }
    case TaskKind::LSCG: {
      LscgConfig c;
      c.pattern_len = j.value("pattern_len", c.pattern_len);
      c.gap_len = j.value("gap_len", c.gap_len);
      c.inner_gap_len = j.value("inner_gap_len", c.inner_gap_len);
      return c;
    }
    case TaskKind::WC: {
      WcConfig c;
      c.n_features = j.value("n_features", c.n_features);
      c.n_labels = j.value("n_labels", c.n_labels);
      c.n_distractors = j.value("n_distractors", c.n_distractors);
      c.n_demos_per_feature = j.value("n_demos_per_feature", c.n_demos_per_feature);
      return c;
    }
    case TaskKind::WI: {
      WiConfig c;
      c.seq_len = j.value("seq_len", c.seq_len);
      c.target_index = j.value("target_index", c.target_index);
      c.n_demos = j.value("n_demos", c.n_demos);
      return c;
    }
    case TaskKind::TT: {
      TtConfig c;
      c.src_lang = parse_language(j.value("src_lang", std::string("en")));
      c.tgt_lang = parse_language(j.value("tgt_lang", std::string("de")));
      c.n_demos = j.value("n_demos", c.n_demos);
      return c;
    }
    case TaskKind::CF: return CfConfig{};
    case TaskKind::CountryCapital: return CountryCapitalConfig{};
  }
  fail(ErrorCode::InvalidConfig, "unknown task");
}

struct LayoutSpan {
  std::string role;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const LayoutSpan&) const = default;
};

struct TaskInstance {
  TaskKind kind = TaskKind::LSC;
  std::uint64_t sample_id = 0;
  std::uint64_t seed = 0;
  TaskConfig config;
  std::optional<PoolSource> pool;
  std::vector<TokenId> prompt;
  TokenId answer = 0;
  std::vector<LayoutSpan> layout;  // in prompt order
  bool multi_token_answer = false;

  const LayoutSpan* span(std::string_view role) const {
    for (const auto& s : layout) {
      if (s.role == role) return &s;
    }
    return nullptr;
  }
};

/// The fixed token sequences that separate input and label (" ->") and
/// demonstrations (";").
struct Delimiters {
  std::vector<TokenId> arrow;
  std::vector<TokenId> semicolon;

  static Delimiters from(const BpeEncoder& encoder) {
    return {encoder.encode_exact(" ->"), encoder.encode_exact(";")};
  }
};

namespace detail {

class PromptBuilder {
 public:
  void add(std::string role, std::span<const TokenId> tokens) {
    const std::size_t begin = prompt.size();
    prompt.insert(prompt.end(), tokens.begin(), tokens.end());
    layout.push_back({std::move(role), begin, prompt.size()});
  }
  void add(std::string role, TokenId token) { add(std::move(role), std::span<const TokenId>(&token, 1)); }

  std::vector<TokenId> prompt;
  std::vector<LayoutSpan> layout;
};

/// k distinct pool tokens in draw order, skipping `excluded`. Draws are
/// prefix-consistent: the first j tokens of a k-draw equal a j-draw.
inline std::vector<TokenId> sample_distinct(const TokenPool& pool, std::size_t k, Rng& rng,
                                            const std::unordered_set<TokenId>& excluded = {}) {
  std::vector<TokenId> out;
  out.reserve(k);
  std::unordered_set<TokenId> taken;
  while (out.size() < k) {
    const TokenId id = pool.ids[static_cast<std::size_t>(rng.uniform_index(pool.ids.size()))];
    if (excluded.count(id) || !taken.insert(id).second) continue;
    out.push_back(id);
  }
  return out;
}

inline void require_pool(const TokenPool& pool, std::size_t needed, std::string_view task) {
  if (pool.size() < needed) {
    fail(ErrorCode::PoolTooSmall, std::string(task) + " needs " + std::to_string(needed) +
                                      " distinct tokens, pool has " + std::to_string(pool.size()));
  }
}

inline std::span<const TokenId> slice(const std::vector<TokenId>& v, std::size_t from, std::size_t count) {
  return std::span<const TokenId>(v).subspan(from, count);
}

}  // namespace detail

struct Composition {
  std::vector<TokenId> prompt;
  std::vector<LayoutSpan> layout;
};

/// P* T R* P*, answer T.
inline Composition compose_lsc(std::span<const TokenId> pattern, TokenId target,
                               std::span<const TokenId> gap) {
  detail::PromptBuilder b;
  b.add("P1", pattern);
  b.add("T", target);
  b.add("R", gap);
  b.add("P2", pattern);
  return {std::move(b.prompt), std::move(b.layout)};
}

/// P* U* X T R* P* V* X, answer T.
inline Composition compose_lscg(std::span<const TokenId> pattern, std::span<const TokenId> first_gap,
                                TokenId anchor, TokenId target, std::span<const TokenId> gap,
                                std::span<const TokenId> second_gap) {
  detail::PromptBuilder b;
  b.add("P1", pattern);
  b.add("U", first_gap);
  b.add("X1", anchor);
  b.add("T", target);
  b.add("R", gap);
  b.add("P2", pattern);
  b.add("V", second_gap);
  b.add("X2", anchor);
  return {std::move(b.prompt), std::move(b.layout)};
}

/// Demonstration lines "input -> label ;" followed by a query "input ->".
struct LabeledLine {
  std::vector<TokenId> input;
  std::vector<TokenId> label;
};

inline Composition compose_demo_prompt(const std::vector<LabeledLine>& demos,
                                       std::span<const TokenId> query, const Delimiters& delims) {
  detail::PromptBuilder b;
  for (std::size_t j = 0; j < demos.size(); ++j) {
    std::vector<TokenId> line = demos[j].input;
    line.insert(line.end(), delims.arrow.begin(), delims.arrow.end());
    line.insert(line.end(), demos[j].label.begin(), demos[j].label.end());
    line.insert(line.end(), delims.semicolon.begin(), delims.semicolon.end());
    b.add("demo/" + std::to_string(j), line);
  }
  std::vector<TokenId> last(query.begin(), query.end());
  last.insert(last.end(), delims.arrow.begin(), delims.arrow.end());
  b.add("query", last);
  return {std::move(b.prompt), std::move(b.layout)};
}

inline std::string cf_prompt_text(const CountryCapital& a, const CountryCapital& b) {
  return "If we switch the capital of " + a.country + " and " + b.country + ", then " + a.country +
         "'s capital is " + b.capital + " and " + b.country + "'s capital is";
}

inline std::string country_capital_prompt_text(const CountryCapital& entry) {
  return "The capital city of " + entry.country + " is";
}

// ---------------------------------------------------------------------------
// Single instances
// ---------------------------------------------------------------------------

inline TaskInstance make_lsc_instance(const TokenPool& pool, const LscConfig& cfg, std::uint64_t seed,
                                      std::uint64_t sample_id) {
  validate(cfg);
  const auto p = static_cast<std::size_t>(cfg.pattern_len);
  const auto r = static_cast<std::size_t>(cfg.gap_len);
  detail::require_pool(pool, p + 1 + r, "lsc");
  Rng rng(derive_seed(seed, sample_id));
  const auto drawn = detail::sample_distinct(pool, p + 1 + r, rng);
  auto comp = compose_lsc(detail::slice(drawn, 0, p), drawn[p], detail::slice(drawn, p + 1, r));
  return {TaskKind::LSC, sample_id, seed, cfg, pool.source, std::move(comp.prompt), drawn[p],
          std::move(comp.layout), false};
}

/// Draw order is P, X, T, R, U, V so that |G| = 0 reproduces the LSC draw
/// with pattern P·X.
inline TaskInstance make_lscg_instance(const TokenPool& pool, const LscgConfig& cfg, std::uint64_t seed,
                                       std::uint64_t sample_id) {
  validate(cfg);
  const auto p = static_cast<std::size_t>(cfg.pattern_len);
  const auto r = static_cast<std::size_t>(cfg.gap_len);
  const auto g = static_cast<std::size_t>(cfg.inner_gap_len);
  detail::require_pool(pool, p + 2 * g + 2 + r, "lscg");
  Rng rng(derive_seed(seed, sample_id));
  const auto drawn = detail::sample_distinct(pool, p + 2 * g + 2 + r, rng);
  const TokenId anchor = drawn[p];
  const TokenId target = drawn[p + 1];
  auto comp = compose_lscg(detail::slice(drawn, 0, p), detail::slice(drawn, p + 2 + r, g), anchor, target,
                           detail::slice(drawn, p + 2, r), detail::slice(drawn, p + 2 + r + g, g));
  return {TaskKind::LSCG, sample_id, seed, cfg, pool.source, std::move(comp.prompt), target,
          std::move(comp.layout), false};
}

inline TaskInstance make_wc_instance(const TokenPool& pool, const WcConfig& cfg, const Delimiters& delims,
                                     std::uint64_t seed, std::uint64_t sample_id) {
  validate(cfg);
  const auto nf = static_cast<std::size_t>(cfg.n_features);
  const auto nl = static_cast<std::size_t>(cfg.n_labels);
  const auto nd = static_cast<std::size_t>(cfg.n_distractors);
  detail::require_pool(pool, nf + nl + nd, "wc");
  Rng rng(derive_seed(seed, sample_id));
  const auto drawn = detail::sample_distinct(pool, nf + nl, rng);
  const std::unordered_set<TokenId> reserved(drawn.begin(), drawn.end());

  // Every label appears at least once; the remaining features get uniform labels.
  std::vector<std::size_t> label_of(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    label_of[i] = i < nl ? i : static_cast<std::size_t>(rng.uniform_index(nl));
  }
  rng.shuffle(std::span<std::size_t>(label_of));

  auto make_line = [&](std::size_t feature) {
    auto tokens = detail::sample_distinct(pool, nd, rng, reserved);
    const auto pos = static_cast<std::size_t>(rng.uniform_index(nd + 1));
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), drawn[feature]);
    return tokens;
  };

  std::vector<std::size_t> order;
  for (std::size_t f = 0; f < nf; ++f) {
    for (int k = 0; k < cfg.n_demos_per_feature; ++k) order.push_back(f);
  }
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<LabeledLine> demos;
  for (std::size_t f : order) demos.push_back({make_line(f), {drawn[nf + label_of[f]]}});
  const auto query_feature = static_cast<std::size_t>(rng.uniform_index(nf));
  const auto query = make_line(query_feature);
  auto comp = compose_demo_prompt(demos, query, delims);
  return {TaskKind::WC, sample_id, seed, cfg, pool.source, std::move(comp.prompt),
          drawn[nf + label_of[query_feature]], std::move(comp.layout), false};
}

inline TaskInstance make_wi_instance(const TokenPool& pool, const WiConfig& cfg, const Delimiters& delims,
                                     std::uint64_t seed, std::uint64_t sample_id) {
  validate(cfg);
  const auto s = static_cast<std::size_t>(cfg.seq_len);
  const auto d = static_cast<std::size_t>(cfg.n_demos);
  const auto i = static_cast<std::size_t>(cfg.target_index);
  detail::require_pool(pool, (d + 1) * s, "wi");
  Rng rng(derive_seed(seed, sample_id));
  const auto drawn = detail::sample_distinct(pool, (d + 1) * s, rng);
  std::vector<LabeledLine> demos;
  for (std::size_t j = 0; j < d; ++j) {
    const auto seq = detail::slice(drawn, j * s, s);
    demos.push_back({{seq.begin(), seq.end()}, {seq[i]}});
  }
  const auto query = detail::slice(drawn, d * s, s);
  auto comp = compose_demo_prompt(demos, query, delims);
  return {TaskKind::WI, sample_id, seed, cfg, pool.source, std::move(comp.prompt), query[i],
          std::move(comp.layout), false};
}

inline TaskInstance make_tt_instance(const Lexicon& lexicon, const BpeEncoder& encoder,
                                     const Delimiters& delims, const TtConfig& cfg, std::uint64_t seed,
                                     std::uint64_t sample_id) {
  validate(cfg);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < lexicon.size(); ++r) {
    if (!lexicon.word(r, cfg.src_lang).empty() && !lexicon.word(r, cfg.tgt_lang).empty()) rows.push_back(r);
  }
  const auto d = static_cast<std::size_t>(cfg.n_demos);
  if (rows.size() < d + 1) {
    fail(ErrorCode::InsufficientData, "tt needs " + std::to_string(d + 1) + " word pairs, lexicon has " +
                                          std::to_string(rows.size()));
  }
  Rng rng(derive_seed(seed, sample_id));
  std::vector<std::size_t> chosen;
  std::unordered_set<std::size_t> taken;
  while (chosen.size() < d + 1) {
    const auto r = rows[static_cast<std::size_t>(rng.uniform_index(rows.size()))];
    if (taken.insert(r).second) chosen.push_back(r);
  }
  auto encode_word = [&](std::size_t row, Language lang) {
    return encoder.encode(" " + lexicon.word(row, lang));
  };
  std::vector<LabeledLine> demos;
  for (std::size_t j = 0; j < d; ++j) {
    demos.push_back({encode_word(chosen[j], cfg.src_lang), encode_word(chosen[j], cfg.tgt_lang)});
  }
  const auto query = encode_word(chosen[d], cfg.src_lang);
  const auto target = encode_word(chosen[d], cfg.tgt_lang);
  auto comp = compose_demo_prompt(demos, query, delims);
  return {TaskKind::TT, sample_id, seed, cfg, std::nullopt, std::move(comp.prompt), target.front(),
          std::move(comp.layout), target.size() > 1};
}

namespace detail {

inline std::vector<std::size_t> distinct_capital_rows(const std::vector<CountryCapital>& table) {
  std::vector<std::size_t> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (seen.insert(table[r].capital).second) rows.push_back(r);
  }
  return rows;
}

}  // namespace detail

/// Pairs whose answer token leaks into the prompt (e.g. a capital sharing its
/// first token with a country name) are redrawn.
inline TaskInstance make_cf_instance(const std::vector<CountryCapital>& table, const BpeEncoder& encoder,
                                     std::uint64_t seed, std::uint64_t sample_id) {
  const auto rows = detail::distinct_capital_rows(table);
  if (rows.size() < 2) fail(ErrorCode::InsufficientData, "cf needs two entries with distinct capitals");
  Rng rng(derive_seed(seed, sample_id));
  constexpr int kMaxAttempts = 256;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto ia = rows[static_cast<std::size_t>(rng.uniform_index(rows.size()))];
    auto ib = rows[static_cast<std::size_t>(rng.uniform_index(rows.size() - 1))];
    if (ib == ia) ib = rows.back();
    const auto& a = table[ia];
    const auto& b = table[ib];
    auto prompt = encoder.encode(cf_prompt_text(a, b));
    const auto answer = encoder.encode(" " + a.capital);
    if (std::find(prompt.begin(), prompt.end(), answer.front()) != prompt.end()) continue;
    std::vector<LayoutSpan> layout{{"context", 0, prompt.size()}};
    return {TaskKind::CF, sample_id, seed, CfConfig{}, std::nullopt, std::move(prompt), answer.front(),
            std::move(layout), answer.size() > 1};
  }
  fail(ErrorCode::InsufficientData, "could not draw a cf pair whose answer stays out of the prompt");
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

template <typename Make>
std::vector<TaskInstance> generate_n(std::size_t n_samples, Make make) {
  std::vector<TaskInstance> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) out.push_back(make(static_cast<std::uint64_t>(i)));
  return out;
}

inline std::vector<TaskInstance> gen_lsc(const TokenPool& pool, const LscConfig& cfg, std::uint64_t seed,
                                         std::size_t n_samples) {
  return generate_n(n_samples, [&](std::uint64_t i) { return make_lsc_instance(pool, cfg, seed, i); });
}

inline std::vector<TaskInstance> gen_lscg(const TokenPool& pool, const LscgConfig& cfg, std::uint64_t seed,
                                          std::size_t n_samples) {
  return generate_n(n_samples, [&](std::uint64_t i) { return make_lscg_instance(pool, cfg, seed, i); });
}

inline std::vector<TaskInstance> gen_wc(const TokenPool& pool, const WcConfig& cfg, const Delimiters& delims,
                                        std::uint64_t seed, std::size_t n_samples) {
  return generate_n(n_samples,
                    [&](std::uint64_t i) { return make_wc_instance(pool, cfg, delims, seed, i); });
}

inline std::vector<TaskInstance> gen_wi(const TokenPool& pool, const WiConfig& cfg, const Delimiters& delims,
                                        std::uint64_t seed, std::size_t n_samples) {
  return generate_n(n_samples,
                    [&](std::uint64_t i) { return make_wi_instance(pool, cfg, delims, seed, i); });
}

inline std::vector<TaskInstance> gen_tt(const Lexicon& lexicon, const BpeEncoder& encoder, const TtConfig& cfg,
                                        std::uint64_t seed, std::size_t n_samples) {
  const auto delims = Delimiters::from(encoder);
  return generate_n(n_samples, [&](std::uint64_t i) {
    return make_tt_instance(lexicon, encoder, delims, cfg, seed, i);
  });
}

inline std::vector<TaskInstance> gen_cf(const std::vector<CountryCapital>& table, const BpeEncoder& encoder,
                                        std::uint64_t seed, std::size_t n_samples) {
  return generate_n(n_samples, [&](std::uint64_t i) { return make_cf_instance(table, encoder, seed, i); });
}

/// Countries are drawn without replacement across the suite.
inline std::vector<TaskInstance> gen_country_capital(const std::vector<CountryCapital>& table,
                                                     const BpeEncoder& encoder, std::uint64_t seed,
                                                     std::size_t n_samples) {
  if (table.empty()) fail(ErrorCode::InsufficientData, "country-capital table is empty");
  if (n_samples > table.size()) {
    fail(ErrorCode::InsufficientData, "requested " + std::to_string(n_samples) + " samples from a table of " +
                                          std::to_string(table.size()));
  }
  std::vector<std::size_t> order(table.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "country_capital"));
  rng.shuffle(std::span<std::size_t>(order));
  return generate_n(n_samples, [&](std::uint64_t i) {
    const auto& entry = table[order[static_cast<std::size_t>(i)]];
    auto prompt = encoder.encode(country_capital_prompt_text(entry));
    const auto answer = encoder.encode(" " + entry.capital);
    std::vector<LayoutSpan> layout{{"context", 0, prompt.size()}};
    return TaskInstance{TaskKind::CountryCapital, i, seed, CountryCapitalConfig{}, std::nullopt, std::move(prompt),
                        answer.front(), std::move(layout), answer.size() > 1};
  });
}

/// Everything a generator might need beyond its config.
struct GenerationContext {
  const Vocabulary* vocab = nullptr;
  const TokenPool* pool = nullptr;
  const Lexicon* lexicon = nullptr;
  const std::vector<CountryCapital>* capitals = nullptr;
};

inline std::vector<TaskInstance> generate_suite(const TaskConfig& config, const GenerationContext& ctx,
                                                std::uint64_t seed, std::size_t n_samples) {
  const TaskKind kind = config_task(config);
  if (uses_token_pool(kind) && ctx.pool == nullptr) {
    fail(ErrorCode::InvalidConfig, std::string(task_name(kind)) + " needs a token pool");
  }
  if (ctx.vocab == nullptr) fail(ErrorCode::InvalidConfig, "generation needs a vocabulary");
  BpeEncoder encoder(*ctx.vocab);
  switch (kind) {
    case TaskKind::LSC: return gen_lsc(*ctx.pool, std::get<LscConfig>(config), seed, n_samples);
    case TaskKind::LSCG: return gen_lscg(*ctx.pool, std::get<LscgConfig>(config), seed, n_samples);
    case TaskKind::WC:
      return gen_wc(*ctx.pool, std::get<WcConfig>(config), Delimiters::from(encoder), seed, n_samples);
    case TaskKind::WI:
      return gen_wi(*ctx.pool, std::get<WiConfig>(config), Delimiters::from(encoder), seed, n_samples);
    case TaskKind::TT:
      if (ctx.lexicon == nullptr) fail(ErrorCode::InvalidConfig, "tt needs a lexicon");
      return gen_tt(*ctx.lexicon, encoder, std::get<TtConfig>(config), seed, n_samples);
    case TaskKind::CF:
      if (ctx.capitals == nullptr) fail(ErrorCode::InvalidConfig, "cf needs a capital table");
      return gen_cf(*ctx.capitals, encoder, seed, n_samples);
    case TaskKind::CountryCapital:
      if (ctx.capitals == nullptr) fail(ErrorCode::InvalidConfig, "country_capital needs a capital table");
      return gen_country_capital(*ctx.capitals, encoder, seed, n_samples);
  }
  fail(ErrorCode::InvalidConfig, "unknown task");
}

// ---------------------------------------------------------------------------
// Suite files (JSONL)
// ---------------------------------------------------------------------------

/// The pool descriptor travels inside "config" under "pool".
inline OrderedJson instance_to_json(const TaskInstance& inst) {
  OrderedJson config = config_to_json(inst.config);
  if (inst.pool) {
    const auto pool = pool_source_to_json(*inst.pool);
    config["pool"] = OrderedJson::parse(pool.dump());
  }
  OrderedJson layout = OrderedJson::object();
  for (const auto& s : inst.layout) layout[s.role] = {s.begin, s.end};
  return OrderedJson{{"task", std::string(task_name(inst.kind))},
                     {"sample_id", inst.sample_id},
                     {"seed", inst.seed},
                     {"config", std::move(config)},
                     {"prompt", inst.prompt},
                     {"answer", inst.answer},
                     {"layout", std::move(layout)},
                     {"multi_token_answer", inst.multi_token_answer}};
}

inline TaskInstance instance_from_json(const OrderedJson& j) {
  TaskInstance inst;
  inst.kind = parse_task(j.at("task").get<std::string>());
  inst.sample_id = j.at("sample_id").get<std::uint64_t>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  const auto& config = j.at("config");
  inst.config = config_from_json(inst.kind, config);
  if (config.contains("pool")) inst.pool = pool_source_from_json(nlohmann::json::parse(config.at("pool").dump()));
  inst.prompt = j.at("prompt").get<std::vector<TokenId>>();
  inst.answer = j.at("answer").get<TokenId>();
  for (const auto& [role, range] : j.at("layout").items()) {
    inst.layout.push_back({role, range.at(0).get<std::size_t>(), range.at(1).get<std::size_t>()});
  }
  std::sort(inst.layout.begin(), inst.layout.end(), [](const LayoutSpan& a, const LayoutSpan& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
  });
  inst.multi_token_answer = j.at("multi_token_answer").get<bool>();
  if (inst.prompt.empty()) fail(ErrorCode::Malformed, "instance with empty prompt");
  return inst;
}

inline void write_suite(std::ostream& out, const std::vector<TaskInstance>& instances) {
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

inline std::vector<TaskInstance> read_suite(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<TaskInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(OrderedJson::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Malformed, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace iclprobe
