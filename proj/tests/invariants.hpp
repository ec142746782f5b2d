// Structural checks on generated instances, written against the task
// templates rather than against the generator code.
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iclprobe/tasks.hpp"

namespace iclprobe::test {

struct InstanceChecker {
  const std::set<TokenId>* pool = nullptr;  // null for tasks without a pool
  Delimiters delims;
  std::vector<std::string> problems;

  void expect(bool ok, const TaskInstance& inst, const std::string& what) {
    if (!ok) problems.push_back(std::string(task_name(inst.kind)) + " #" + std::to_string(inst.sample_id) + ": " + what);
  }

  std::vector<TokenId> tokens(const TaskInstance& inst, const std::string& role) {
    const auto* s = inst.span(role);
    if (!s) return {};
    return {inst.prompt.begin() + static_cast<std::ptrdiff_t>(s->begin),
            inst.prompt.begin() + static_cast<std::ptrdiff_t>(s->end)};
  }

  bool tiles(const TaskInstance& inst, const std::vector<std::string>& roles) {
    std::size_t at = 0;
    for (const auto& role : roles) {
      const auto* s = inst.span(role);
      if (!s || s->begin != at || s->end < s->begin) return false;
      at = s->end;
    }
    return at == inst.prompt.size() && inst.layout.size() == roles.size();
  }

  std::map<TokenId, int> counts(const std::vector<TokenId>& v) {
    std::map<TokenId, int> c;
    for (auto t : v) ++c[t];
    return c;
  }

  void check_lsc(const TaskInstance& inst, const LscConfig& cfg) {
    expect(tiles(inst, {"P1", "T", "R", "P2"}), inst, "layout does not tile P1 T R P2");
    const auto p1 = tokens(inst, "P1"), p2 = tokens(inst, "P2"), t = tokens(inst, "T"), r = tokens(inst, "R");
    expect(static_cast<int>(p1.size()) == cfg.pattern_len && p1 == p2, inst, "pattern copies differ");
    expect(static_cast<int>(r.size()) == cfg.gap_len, inst, "gap length");
    expect(t.size() == 1 && t[0] == inst.answer, inst, "answer is not T");
    const auto c = counts(inst.prompt);
    for (auto x : p1) expect(c.at(x) == 2, inst, "pattern token not exactly twice");
    for (auto x : r) expect(c.at(x) == 1, inst, "gap token not exactly once");
    expect(c.at(inst.answer) == 1, inst, "T not exactly once in prompt");
    expect(c.size() == p1.size() + 1 + r.size(), inst, "tokens not distinct");
  }

  void check_lscg(const TaskInstance& inst, const LscgConfig& cfg) {
    expect(tiles(inst, {"P1", "U", "X1", "T", "R", "P2", "V", "X2"}), inst, "layout does not tile P U X T R P V X");
    const auto p1 = tokens(inst, "P1"), p2 = tokens(inst, "P2"), u = tokens(inst, "U"), v = tokens(inst, "V");
    const auto x1 = tokens(inst, "X1"), x2 = tokens(inst, "X2"), t = tokens(inst, "T"), r = tokens(inst, "R");
    expect(static_cast<int>(p1.size()) == cfg.pattern_len && p1 == p2, inst, "pattern copies differ");
    expect(static_cast<int>(u.size()) == cfg.inner_gap_len && static_cast<int>(v.size()) == cfg.inner_gap_len, inst,
           "inner gap length");
    expect(static_cast<int>(r.size()) == cfg.gap_len, inst, "gap length");
    expect(x1.size() == 1 && x1 == x2, inst, "anchor differs");
    expect(t.size() == 1 && t[0] == inst.answer, inst, "answer is not T");
    const auto c = counts(inst.prompt);
    for (auto x : p1) expect(c.at(x) == 2, inst, "pattern token not exactly twice");
    expect(c.at(x1[0]) == 2, inst, "anchor not exactly twice");
    expect(c.at(inst.answer) == 1, inst, "T not exactly once in prompt");
    for (const auto* span : {&u, &v, &r}) {
      for (auto x : *span) expect(c.at(x) == 1, inst, "gap token not exactly once");
    }
    expect(c.size() == p1.size() + 2 * u.size() + 2 + r.size(), inst, "tokens not distinct");
  }

  struct Line {
    std::vector<TokenId> input;
    std::vector<TokenId> label;
  };

  /// Splits "input ARROW label SEMI" lines and the final "input ARROW".
  bool split_demo_prompt(const TaskInstance& inst, std::vector<Line>& demos, std::vector<TokenId>& query) {
    std::vector<std::string> roles;
    for (std::size_t j = 0; inst.span("demo/" + std::to_string(j)); ++j) roles.push_back("demo/" + std::to_string(j));
    roles.push_back("query");
    if (!tiles(inst, roles)) return false;
    auto find = [](const std::vector<TokenId>& hay, const std::vector<TokenId>& needle, std::size_t from) {
      auto it = std::search(hay.begin() + static_cast<std::ptrdiff_t>(from), hay.end(), needle.begin(), needle.end());
      return static_cast<std::size_t>(it - hay.begin());
    };
    for (std::size_t j = 0; j + 1 < roles.size(); ++j) {
      const auto line = tokens(inst, roles[j]);
      const auto arrow = find(line, delims.arrow, 0);
      if (arrow >= line.size()) return false;
      const auto label_begin = arrow + delims.arrow.size();
      if (line.size() < label_begin + delims.semicolon.size()) return false;
      const auto label_end = line.size() - delims.semicolon.size();
      if (!std::equal(delims.semicolon.begin(), delims.semicolon.end(), line.begin() + static_cast<std::ptrdiff_t>(label_end))) {
        return false;
      }
      demos.push_back({{line.begin(), line.begin() + static_cast<std::ptrdiff_t>(arrow)},
                       {line.begin() + static_cast<std::ptrdiff_t>(label_begin),
                        line.begin() + static_cast<std::ptrdiff_t>(label_end)}});
    }
    const auto q = tokens(inst, "query");
    if (q.size() < delims.arrow.size() ||
        !std::equal(delims.arrow.begin(), delims.arrow.end(), q.end() - static_cast<std::ptrdiff_t>(delims.arrow.size()))) {
      return false;
    }
    query.assign(q.begin(), q.end() - static_cast<std::ptrdiff_t>(delims.arrow.size()));
    return true;
  }

  void check_wc(const TaskInstance& inst, const WcConfig& cfg) {
    std::vector<Line> demos;
    std::vector<TokenId> query;
    if (!split_demo_prompt(inst, demos, query)) return expect(false, inst, "demo layout");
    expect(static_cast<int>(demos.size()) == cfg.n_features * cfg.n_demos_per_feature, inst, "demo count");
    std::set<TokenId> labels;
    for (const auto& d : demos) {
      expect(static_cast<int>(d.input.size()) == cfg.n_distractors + 1, inst, "line width");
      expect(d.label.size() == 1, inst, "label width");
      expect(counts(d.input).size() == d.input.size(), inst, "repeated token within a line");
      if (d.label.size() == 1) labels.insert(d.label[0]);
    }
    expect(static_cast<int>(labels.size()) == cfg.n_labels, inst, "not every label used");
    expect(labels.count(inst.answer) == 1, inst, "answer is not a label");
    for (const auto& d : demos) {
      for (auto t : d.input) expect(!labels.count(t), inst, "label token inside an input");
    }
    for (auto t : query) expect(!labels.count(t), inst, "label token inside the query");
    expect(static_cast<int>(query.size()) == cfg.n_distractors + 1, inst, "query width");
    // The query feature: a query token seen in n_demos_per_feature lines that
    // all carry the answer label.
    bool found = false;
    for (auto t : query) {
      int seen = 0;
      bool consistent = true;
      for (const auto& d : demos) {
        if (std::find(d.input.begin(), d.input.end(), t) == d.input.end()) continue;
        ++seen;
        consistent = consistent && d.label[0] == inst.answer;
      }
      found = found || (seen >= cfg.n_demos_per_feature && consistent);
    }
    expect(found, inst, "no query feature consistent with the answer");
  }

  void check_wi(const TaskInstance& inst, const WiConfig& cfg) {
    std::vector<Line> demos;
    std::vector<TokenId> query;
    if (!split_demo_prompt(inst, demos, query)) return expect(false, inst, "demo layout");
    expect(static_cast<int>(demos.size()) == cfg.n_demos, inst, "demo count");
    std::vector<TokenId> all;
    for (const auto& d : demos) {
      expect(static_cast<int>(d.input.size()) == cfg.seq_len, inst, "sequence length");
      expect(d.label.size() == 1 && d.label[0] == d.input[static_cast<std::size_t>(cfg.target_index)], inst,
             "demo label is not the target index");
      all.insert(all.end(), d.input.begin(), d.input.end());
    }
    expect(static_cast<int>(query.size()) == cfg.seq_len, inst, "query length");
    if (static_cast<int>(query.size()) == cfg.seq_len) {
      expect(query[static_cast<std::size_t>(cfg.target_index)] == inst.answer, inst, "answer is not the query target");
    }
    all.insert(all.end(), query.begin(), query.end());
    expect(counts(all).size() == all.size(), inst, "sequence tokens not distinct");
  }

  void check_tt(const TaskInstance& inst, const TtConfig& cfg) {
    std::vector<Line> demos;
    std::vector<TokenId> query;
    if (!split_demo_prompt(inst, demos, query)) return expect(false, inst, "demo layout");
    expect(static_cast<int>(demos.size()) == cfg.n_demos, inst, "demo count");
    for (const auto& d : demos) expect(d.input != query, inst, "query word also demonstrated");
  }

  void check_cf(const TaskInstance& inst) {
    expect(tiles(inst, {"context"}), inst, "layout");
    expect(std::find(inst.prompt.begin(), inst.prompt.end(), inst.answer) == inst.prompt.end(), inst,
           "answer appears in the prompt");
  }

  void check_pool(const TaskInstance& inst) {
    if (!pool) return;
    std::vector<TokenId> content = inst.prompt;
    content.push_back(inst.answer);
    std::multiset<TokenId> delimiter_ids(delims.arrow.begin(), delims.arrow.end());
    delimiter_ids.insert(delims.semicolon.begin(), delims.semicolon.end());
    for (auto t : content) {
      if (inst.kind != TaskKind::LSC && inst.kind != TaskKind::LSCG && delimiter_ids.count(t)) continue;
      expect(pool->count(t) == 1, inst, "token " + std::to_string(t) + " outside the pool");
    }
  }

  void check(const TaskInstance& inst) {
    std::visit(
        [&](const auto& cfg) {
          using C = std::decay_t<decltype(cfg)>;
          if constexpr (std::is_same_v<C, LscConfig>) check_lsc(inst, cfg);
          if constexpr (std::is_same_v<C, LscgConfig>) check_lscg(inst, cfg);
          if constexpr (std::is_same_v<C, WcConfig>) check_wc(inst, cfg);
          if constexpr (std::is_same_v<C, WiConfig>) check_wi(inst, cfg);
          if constexpr (std::is_same_v<C, TtConfig>) check_tt(inst, cfg);
          if constexpr (std::is_same_v<C, CfConfig>) check_cf(inst);
        },
        inst.config);
    check_pool(inst);
  }
};

}  // namespace iclprobe::test
