// Per-sample scoring of a suite against one backend, and the two metrics.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "iclprobe/model/backend.hpp"
#include "iclprobe/parallel.hpp"
#include "iclprobe/tasks.hpp"

namespace iclprobe {

struct SampleResult {
  std::string suite;
  std::string checkpoint;
  std::uint64_t sample_id = 0;
  bool correct = false;
  double answer_logprob = kNegInf;
  bool floor = false;
  double latency_ms = 0.0;  // never persisted with the results
};

/// -inf has no JSON spelling and is written as null.
inline nlohmann::ordered_json result_to_json(const SampleResult& r) {
  nlohmann::ordered_json lp = nullptr;
  if (std::isfinite(r.answer_logprob)) lp = r.answer_logprob;
  return {{"suite", r.suite},  {"checkpoint", r.checkpoint}, {"sample_id", r.sample_id},
          {"correct", r.correct}, {"answer_logprob", lp},     {"floor", r.floor}};
}

inline SampleResult result_from_json(const nlohmann::json& j) {
  SampleResult r;
  r.suite = j.at("suite").get<std::string>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.sample_id = j.at("sample_id").get<std::uint64_t>();
  r.correct = j.at("correct").get<bool>();
  const auto& lp = j.at("answer_logprob");
  r.answer_logprob = lp.is_null() ? kNegInf : lp.get<double>();
  r.floor = j.at("floor").get<bool>();
  return r;
}

struct RunOptions {
  std::string suite_key;
  std::string checkpoint_key;
  int top_k = 2;
  int jobs = 1;
  bool want_hidden = false;
  std::unordered_set<std::uint64_t> skip;  // sample ids already done
  // Called once per scored instance; calls are serialized.
  std::function<void(const TaskInstance&, const ScoreResult&, const SampleResult&)> on_result;
};

/// Scores every instance not in opt.skip. Results come back sorted by
/// sample_id regardless of the order in which workers finished.
inline std::vector<SampleResult> run_suite(const Backend& backend, const std::vector<TaskInstance>& instances,
                                           const RunOptions& opt = {}) {
  if (instances.empty()) fail(ErrorCode::EmptySuite, "suite has no instances");
  {
    std::unordered_set<std::uint64_t> ids;
    for (const auto& inst : instances) {
      if (!ids.insert(inst.sample_id).second) {
        fail(ErrorCode::Malformed, "duplicate sample_id " + std::to_string(inst.sample_id));
      }
    }
  }
  std::vector<const TaskInstance*> todo;
  for (const auto& inst : instances) {
    if (!opt.skip.count(inst.sample_id)) todo.push_back(&inst);
  }
  std::vector<SampleResult> results(todo.size());
  std::mutex sink;
  parallel_for(todo.size(), opt.jobs, [&](std::size_t i) {
    const auto& inst = *todo[i];
    ScoreRequest req{inst.prompt, opt.top_k, opt.want_hidden, inst.answer};
    const auto start = std::chrono::steady_clock::now();
    const ScoreResult score = backend.score(req);
    const auto stop = std::chrono::steady_clock::now();
    const auto lp = score.answer_logprob_of(inst.answer);
    SampleResult r{opt.suite_key,
                   opt.checkpoint_key,
                   inst.sample_id,
                   score.top1_is(inst.answer),
                   lp.value,
                   lp.floor,
                   std::chrono::duration<double, std::milli>(stop - start).count()};
    if (opt.on_result) {
      std::lock_guard lock(sink);
      opt.on_result(inst, score, r);
    }
    results[i] = std::move(r);
  });
  std::sort(results.begin(), results.end(),
            [](const SampleResult& a, const SampleResult& b) { return a.sample_id < b.sample_id; });
  return results;
}

inline double accuracy(const std::vector<SampleResult>& results) {
  if (results.empty()) fail(ErrorCode::EmptyInput, "accuracy of no results");
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.correct ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

enum class FloorPolicy { Include, Exclude };

/// Arithmetic mean of answer log-probabilities. A single -inf makes the mean
/// -inf.
inline double mean_logprob(const std::vector<SampleResult>& results, FloorPolicy policy = FloorPolicy::Include) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : results) {
    if (policy == FloorPolicy::Exclude && r.floor) continue;
    sum += r.answer_logprob;
    ++n;
  }
  if (n == 0) fail(ErrorCode::EmptyInput, "no results left for mean log-probability");
  return sum / static_cast<double>(n);
}

}  // namespace iclprobe
