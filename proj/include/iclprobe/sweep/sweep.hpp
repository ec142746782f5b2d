// Checkpoint sweeps: every (suite, checkpoint) cell of a manifest is scored,
// persisted and indexed. Finished cells are skipped on rerun and interrupted
// ones resume from their partial file.
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iclprobe/assets.hpp"
#include "iclprobe/model/descriptor.hpp"
#include "iclprobe/parallel.hpp"
#include "iclprobe/sweep/manifest.hpp"
#include "iclprobe/sweep/results.hpp"
#include "iclprobe/sweep/store.hpp"

namespace iclprobe {

struct CellOptions {
  int top_k = 2;
  int jobs = 1;  // workers inside the cell
  int retry_limit = 2;
  bool want_hidden = false;
  bool force = false;  // ignore finished and partial results
  std::function<void(const TaskInstance&, const ScoreResult&, const SampleResult&)> on_result;
};

/// Scores one cell, retrying failures up to opt.retry_limit times. Each retry
/// resumes from whatever the previous attempt flushed.
inline CellRecord evaluate_cell(ResultStore& store, CellRecord rec, const Backend& backend,
                                const std::vector<TaskInstance>& instances, const CellOptions& opt) {
  if (!opt.force && store.is_complete(rec.cell_id)) {
    fill_metrics(rec, store.read_cell(rec.cell_id));
    rec.resumed = true;
    return rec;
  }
  if (opt.force) {
    std::error_code ec;
    fs::remove(store.partial_path(rec.cell_id), ec);
  }
  for (int attempt = 0; attempt <= opt.retry_limit; ++attempt) {
    const auto done = store.read_partial(rec.cell_id);
    RunOptions run;
    run.suite_key = rec.suite;
    run.checkpoint_key = rec.checkpoint;
    run.top_k = opt.top_k;
    run.jobs = opt.jobs;
    run.want_hidden = opt.want_hidden;
    for (const auto& r : done) run.skip.insert(r.sample_id);
    run.on_result = [&](const TaskInstance& inst, const ScoreResult& score, const SampleResult& r) {
      store.append_partial(rec.cell_id, r);
      store.log(rec.cell_id + " " + rec.suite + " " + rec.checkpoint + " sample " + std::to_string(r.sample_id) +
                " latency_ms " + format_double(r.latency_ms));
      if (opt.on_result) opt.on_result(inst, score, r);
    };
    try {
      if (run.skip.size() < instances.size()) run_suite(backend, instances, run);
      auto results = store.read_partial(rec.cell_id);
      if (results.size() != instances.size()) {
        fail(ErrorCode::BackendError, "cell has " + std::to_string(results.size()) + " of " +
                                          std::to_string(instances.size()) + " results");
      }
      std::sort(results.begin(), results.end(), [](auto& a, auto& b) { return a.sample_id < b.sample_id; });
      fill_metrics(rec, results);
      store.finalize_cell(rec.cell_id, std::move(results));
      store.log(rec.cell_id + " complete");
      return rec;
    } catch (const Error& e) {
      rec.complete = false;
      rec.error = e.what();
      store.log(rec.cell_id + " attempt " + std::to_string(attempt + 1) + " failed: " + e.what());
    }
  }
  return rec;
}

struct SweepOptions {
  int jobs = 1;
  int retry_limit = 2;
  int top_k = 2;
  DataAssets assets;
};

struct SweepReport {
  std::vector<CellRecord> cells;

  std::size_t failed() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto& c) { return !c.complete; }));
  }
  std::size_t resumed() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto& c) { return c.resumed; }));
  }
};

inline Vocabulary load_manifest_vocab(const SweepManifest& m, const DataAssets& assets) {
  return load_vocab(m.vocab.empty() ? assets.desk_vocab_path() : m.vocab);
}

/// Suites are generated once and shared by every checkpoint, so time series
/// across checkpoints compare identical prompts.
inline SweepReport sweep(const SweepManifest& manifest, ResultStore& store, const SweepOptions& opt = {}) {
  const Vocabulary vocab = load_manifest_vocab(manifest, opt.assets);
  const std::string vocab_fp = hex64(fnv1a64([&] {
    std::string all;
    for (const auto& t : vocab.tokens()) all += t + '\n';
    return all;
  }()));

  std::optional<Lexicon> lexicon;
  std::optional<std::vector<CountryCapital>> capitals;
  struct Prepared {
    nlohmann::ordered_json spec;
    std::vector<TaskInstance> instances;
    std::string error;
  };
  std::vector<Prepared> suites;
  for (const auto& s : manifest.suites) {
    Prepared p;
    p.spec = suite_spec_to_json(s);
    p.spec["vocab"] = vocab_fp;
    try {
      std::optional<TokenPool> pool;
      if (uses_token_pool(s.task())) pool = build_pool(*s.pool, vocab, opt.assets);
      if (s.task() == TaskKind::TT && !lexicon) lexicon = load_lexicon(opt.assets.lexicon_path());
      if ((s.task() == TaskKind::CF || s.task() == TaskKind::CountryCapital) && !capitals) {
        capitals = load_capitals(opt.assets.capitals_path());
      }
      GenerationContext ctx{&vocab, pool ? &*pool : nullptr, lexicon ? &*lexicon : nullptr,
                            capitals ? &*capitals : nullptr};
      p.instances = generate_suite(s.config, ctx, s.seed, s.n_samples);
      store.write_suite(s.name, p.instances);
    } catch (const Error& e) {
      p.error = e.what();
      store.log("suite " + s.name + " failed: " + e.what());
    }
    suites.push_back(std::move(p));
  }

  std::vector<std::unique_ptr<Backend>> backends(manifest.checkpoints.size());
  std::vector<std::string> backend_errors(manifest.checkpoints.size());
  for (std::size_t c = 0; c < manifest.checkpoints.size(); ++c) {
    try {
      backends[c] = make_backend(manifest.checkpoints[c].backend, vocab.size());
    } catch (const Error& e) {
      backend_errors[c] = e.what();
      store.log("checkpoint " + manifest.checkpoints[c].key() + " failed: " + e.what());
    }
  }

  SweepReport report;
  for (std::size_t s = 0; s < manifest.suites.size(); ++s) {
    for (std::size_t c = 0; c < manifest.checkpoints.size(); ++c) {
      const auto& ck = manifest.checkpoints[c];
      CellRecord rec;
      rec.suite = manifest.suites[s].name;
      rec.checkpoint = ck.key();
      rec.suite_spec = suites[s].spec;
      rec.checkpoint_spec = checkpoint_to_json(ck);
      rec.cell_id = make_cell_id(rec.suite_spec, rec.checkpoint);
      report.cells.push_back(std::move(rec));
    }
  }
  const std::size_t n_ckpt = manifest.checkpoints.size();
  parallel_for(report.cells.size(), opt.jobs, [&](std::size_t i) {
    auto& rec = report.cells[i];
    const auto& prepared = suites[i / n_ckpt];
    const std::size_t c = i % n_ckpt;
    if (!prepared.error.empty()) {
      rec.error = prepared.error;
      return;
    }
    if (!backends[c]) {
      rec.error = backend_errors[c];
      return;
    }
    CellOptions cell;
    cell.top_k = opt.top_k;
    cell.retry_limit = opt.retry_limit;
    rec = evaluate_cell(store, rec, *backends[c], prepared.instances, cell);
  });
  store.merge_index(report.cells);
  return report;
}

}  // namespace iclprobe
