// The iclprobe command line: gen, eval, sweep, stats, suda, report.
//
// Exit codes: 0 success, 1 analysis or cell failure, 2 usage or config error.
// Options may also come from a JSON file given with --config; top-level keys
// set global flags and objects named after a subcommand set its flags. Flags
// on the command line win over the file, which wins over built-in defaults.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "iclprobe/analysis.hpp"
#include "iclprobe/assets.hpp"
#include "iclprobe/model/descriptor.hpp"
#include "iclprobe/parallel.hpp"
#include "iclprobe/suda/pipeline.hpp"
#include "iclprobe/sweep/sweep.hpp"
#include "iclprobe/tasks.hpp"

namespace iclprobe::cli {

namespace fs = std::filesystem;

/// JSON configuration files for CLI11.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    return effective(app).dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::FileError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

  /// Every option of the app and of the selected subcommands with the value
  /// in effect, as strings.
  static nlohmann::ordered_json effective(const CLI::App* app) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        if (opt->get_expected_max() > 1) j[name] = res;
        else j[name] = res.empty() ? std::string() : res.back();
      } else if (!opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = effective(sub);
    return j;
  }

 private:
  static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidRange:
    case ErrorCode::EmptyPool:
    case ErrorCode::PoolTooSmall:
    case ErrorCode::InsufficientData:
    case ErrorCode::DuplicateCell:
    case ErrorCode::EmptyStore:
    case ErrorCode::EmptySuite:
    case ErrorCode::EmptyInput:
    case ErrorCode::Io:
    case ErrorCode::Malformed:
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateString:
    case ErrorCode::NonDenseIds:
    case ErrorCode::UnknownSymbol:
      return 2;
    default:
      return 1;
  }
}

struct Globals {
  std::uint64_t seed = 42;
  int jobs = default_jobs();
  std::string out = "out";
  std::string data_dir = default_data_dir();
};

inline BackendDescriptor parse_backend_flag(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  nlohmann::json j{{"kind", kind}};
  if (kind == "tensor") j["path"] = rest;
  if (kind == "http") j["url"] = rest;
  return descriptor_from_json(j);
}

/// "NAME=VALUE" or plain "VALUE"; the name then comes from `fallback`.
inline std::pair<std::string, std::string> split_named(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) return {"", text};
  return {text.substr(0, eq), text.substr(eq + 1)};
}

inline std::vector<TaskInstance> read_suite_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open suite " + path);
  return read_suite(in, path);
}

inline std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

struct GenArgs {
  std::string vocab;
  std::string task;
  std::string name;
  std::size_t n = 1000;
  std::string index_range;
  std::string wordlist;
  bool no_filter_special = false;
  std::string manifest;
  std::optional<int> pattern_len, gap_len, inner_gap_len;
  std::optional<int> n_features, n_labels, n_distractors, demos_per_feature;
  std::optional<int> seq_len, target_index, n_demos;
  std::string src, tgt;
};

inline TaskConfig config_from_flags(const GenArgs& a) {
  const TaskKind kind = parse_task(a.task);
  nlohmann::json j = nlohmann::json::object();
  auto put = [&](const char* key, const std::optional<int>& v) {
    if (v) j[key] = *v;
  };
  put("pattern_len", a.pattern_len);
  put("gap_len", a.gap_len);
  put("inner_gap_len", a.inner_gap_len);
  put("n_features", a.n_features);
  put("n_labels", a.n_labels);
  put("n_distractors", a.n_distractors);
  put("n_demos_per_feature", a.demos_per_feature);
  put("seq_len", a.seq_len);
  put("target_index", a.target_index);
  put("n_demos", a.n_demos);
  if (!a.src.empty()) j["src_lang"] = a.src;
  if (!a.tgt.empty()) j["tgt_lang"] = a.tgt;
  auto config = config_from_json(kind, j);
  validate(config);
  return config;
}

inline PoolSpec pool_from_flags(const GenArgs& a) {
  if (!a.index_range.empty() && !a.wordlist.empty()) {
    fail(ErrorCode::InvalidConfig, "--index-range and --wordlist are mutually exclusive");
  }
  if (!a.index_range.empty()) {
    const auto colon = a.index_range.find(':');
    if (colon == std::string::npos) fail(ErrorCode::InvalidConfig, "--index-range expects LO:HI");
    try {
      return {IndexRangeSource{std::stoi(a.index_range.substr(0, colon)), std::stoi(a.index_range.substr(colon + 1)),
                               !a.no_filter_special},
              {}};
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidConfig, "--index-range expects integers LO:HI");
    }
  }
  if (a.wordlist.empty() || a.wordlist == "frequent_en") return {WordListSource{"frequent_en"}, {}};
  return {WordListSource{fs::path(a.wordlist).stem().string()}, a.wordlist};
}

inline std::vector<TaskInstance> generate_spec(const SuiteSpec& s, const Vocabulary& vocab, const DataAssets& assets) {
  std::optional<TokenPool> pool;
  std::optional<Lexicon> lexicon;
  std::optional<std::vector<CountryCapital>> capitals;
  if (uses_token_pool(s.task())) pool = build_pool(*s.pool, vocab, assets);
  if (s.task() == TaskKind::TT) lexicon = load_lexicon(assets.lexicon_path());
  if (s.task() == TaskKind::CF || s.task() == TaskKind::CountryCapital) capitals = load_capitals(assets.capitals_path());
  GenerationContext ctx{&vocab, pool ? &*pool : nullptr, lexicon ? &*lexicon : nullptr, capitals ? &*capitals : nullptr};
  return generate_suite(s.config, ctx, s.seed, s.n_samples);
}

inline int cmd_gen(const GenArgs& a, const Globals& g, std::ostream& out) {
  const DataAssets assets{g.data_dir};
  std::vector<SuiteSpec> specs;
  std::string vocab_path = a.vocab;
  if (!a.manifest.empty()) {
    const auto m = load_manifest(a.manifest, g.seed);
    specs = m.suites;
    if (vocab_path.empty()) vocab_path = m.vocab;
  } else {
    if (a.task.empty()) fail(ErrorCode::InvalidConfig, "--task or --manifest is required");
    SuiteSpec s;
    s.config = config_from_flags(a);
    s.name = a.name.empty() ? std::string(task_name(s.task())) : a.name;
    if (uses_token_pool(s.task())) s.pool = pool_from_flags(a);
    s.n_samples = a.n;
    s.seed = g.seed;
    s.group = default_group(s.config);
    specs.push_back(std::move(s));
  }
  const auto vocab = load_vocab(vocab_path.empty() ? assets.desk_vocab_path() : vocab_path);
  for (const auto& s : specs) {
    const auto instances = generate_spec(s, vocab, assets);
    const fs::path path = fs::path(g.out) / (s.name + ".jsonl");
    ResultStore::write_atomic(path, [&](std::ostream& o) { write_suite(o, instances); });
    const auto multi = std::count_if(instances.begin(), instances.end(), [](auto& i) { return i.multi_token_answer; });
    out << "suite " << s.name << ": " << instances.size() << " instances, " << multi
        << " multi-token answers -> " << path.string() << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string vocab;
  std::vector<std::string> suites;
  std::string backend = "metadata";
  std::string backend_json;
  std::string model = "model";
  std::int64_t step = 0;
  double params = 0.0;
  int top_k = 2;
  int retries = 2;
  std::string hidden_out;
};

inline int cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  const DataAssets assets{g.data_dir};
  const auto vocab = load_vocab(a.vocab.empty() ? assets.desk_vocab_path() : a.vocab);
  CheckpointSpec ck;
  ck.model = a.model;
  ck.step = a.step;
  ck.params = a.params;
  if (!a.backend_json.empty()) {
    try {
      ck.backend = descriptor_from_json(nlohmann::json::parse(a.backend_json));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("--backend-json: ") + e.what());
    }
  } else {
    ck.backend = parse_backend_flag(a.backend);
  }
  const auto backend = make_backend(ck.backend, vocab.size());
  ResultStore store(g.out);

  TensorArchive hidden;
  std::mutex hidden_mutex;
  const bool want_hidden = !a.hidden_out.empty();
  std::vector<CellRecord> records;
  for (const auto& entry : a.suites) {
    auto [name, path] = split_named(entry);
    const auto instances = read_suite_file(path);
    if (instances.empty()) fail(ErrorCode::EmptySuite, path + " holds no instances");
    if (name.empty()) name = fs::path(path).stem().string();

    const auto& first = instances.front();
    auto config = config_to_json(first.config);
    nlohmann::ordered_json spec{{"name", name}, {"task", std::string(task_name(first.kind))}, {"config", config}};
    if (first.pool) spec["pool"] = nlohmann::ordered_json::parse(pool_source_to_json(*first.pool).dump());
    spec["n_samples"] = instances.size();
    spec["seed"] = first.seed;
    spec["group"] = default_group(first.config);
    spec["source"] = file_fingerprint(path);

    CellRecord rec;
    rec.suite = name;
    rec.checkpoint = ck.key();
    rec.suite_spec = spec;
    rec.checkpoint_spec = checkpoint_to_json(ck);
    rec.cell_id = make_cell_id(spec, rec.checkpoint);

    CellOptions opt;
    opt.top_k = a.top_k;
    opt.jobs = g.jobs;
    opt.retry_limit = a.retries;
    opt.want_hidden = want_hidden;
    opt.force = want_hidden;
    if (want_hidden) {
      opt.on_result = [&, suite = name](const TaskInstance& inst, const ScoreResult& score, const SampleResult&) {
        if (!score.hidden_last) fail(ErrorCode::BackendError, "backend returned no hidden state");
        std::vector<float> h(score.hidden_last->begin(), score.hidden_last->end());
        const auto dim = static_cast<std::int64_t>(h.size());
        std::lock_guard lock(hidden_mutex);
        hidden.put(suda::hidden_key(suite, inst.sample_id), {dim}, std::move(h));
      };
    }
    rec = evaluate_cell(store, rec, *backend, instances, opt);
    if (rec.complete) {
      out << "suite " << name << " @ " << rec.checkpoint << ": accuracy " << format_double(rec.accuracy)
          << " mean_logprob " << format_double(rec.mean_logprob) << " (n=" << rec.n_samples << ")\n";
    } else {
      out << "suite " << name << " @ " << rec.checkpoint << ": FAILED " << rec.error << '\n';
    }
    records.push_back(std::move(rec));
  }
  store.merge_index(records);
  if (want_hidden) {
    if (const auto* tensor = dynamic_cast<const TensorEvalBackend*>(backend.get())) {
      const auto& w = tensor->unembedding();
      std::vector<float> data(static_cast<std::size_t>(w.size()));
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) data[static_cast<std::size_t>(i * w.cols() + j)] = static_cast<float>(w(i, j));
      }
      hidden.put("unembedding", {w.rows(), w.cols()}, std::move(data));
    }
    save_archive(a.hidden_out, hidden);
  }
  const bool failed = std::any_of(records.begin(), records.end(), [](auto& r) { return !r.complete; });
  return failed ? 1 : 0;
}

struct SweepArgs {
  std::string manifest;
  int top_k = 2;
  int retries = 2;
};

inline int cmd_sweep(const SweepArgs& a, const Globals& g, std::ostream& out) {
  const auto manifest = load_manifest(a.manifest, g.seed);
  ResultStore store(g.out);
  SweepOptions opt;
  opt.jobs = g.jobs;
  opt.retry_limit = a.retries;
  opt.top_k = a.top_k;
  opt.assets = DataAssets{g.data_dir};
  const auto report = sweep(manifest, store, opt);
  for (const auto& c : report.cells) {
    if (!c.complete) out << "cell " << c.suite << " @ " << c.checkpoint << " FAILED: " << c.error << '\n';
  }
  out << "cells: " << report.cells.size() - report.failed() << " complete (" << report.resumed() << " resumed), "
      << report.failed() << " failed\n";
  return report.failed() ? 1 : 0;
}

struct StatsArgs {
  std::string store;
  std::string metric = "accuracy";
  int window = 5;
  int lag_order = 1;
  std::string det_case = "constant";
  std::string critical_values;
};

inline int cmd_stats(const StatsArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const DataAssets assets{g.data_dir};
  const ResultStore store(a.store);
  const auto rows = load_cell_rows(store);
  const auto cv = stats::load_critical_values(a.critical_values.empty() ? assets.critical_values_path() : a.critical_values);
  StatsOptions opt{a.metric, a.window, a.lag_order, stats::parse_det_case(a.det_case)};
  const auto t = compute_stats(rows, cv, opt);
  const fs::path dir(g.out);
  t.correlations.save((dir / "correlations.csv").string());
  t.gaps.save((dir / "gaps.csv").string());
  t.johansen.save((dir / "johansen.csv").string());
  t.scaling.save((dir / "scaling.csv").string());
  out << "stats over " << rows.size() << " cells: " << t.correlations.size() << " correlation rows, " << t.gaps.size()
      << " gap rows, " << t.johansen.size() << " johansen rows, " << t.scaling.size() << " scaling rows\n";
  for (const auto& f : t.failures) err << "error: " << f << '\n';
  return t.failures.empty() ? 0 : 1;
}

struct SudaArgs {
  std::vector<std::string> checkpoints;
  std::vector<std::string> suites;
  double tau = 0.2;
  std::string variant = "projection";
};

inline int cmd_suda(const SudaArgs& a, const Globals& g, std::ostream& out) {
  std::vector<suda::CheckpointInput> cks;
  for (const auto& entry : a.checkpoints) {
    const auto [step, paths] = split_named(entry);
    if (step.empty()) fail(ErrorCode::InvalidConfig, "--checkpoint expects STEP=ARCHIVE[,ARCHIVE...]");
    suda::CheckpointInput ck;
    try {
      ck.step = std::stoll(step);
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidConfig, "--checkpoint step must be an integer: " + step);
    }
    std::stringstream ss(paths);
    std::string p;
    while (std::getline(ss, p, ',')) {
      if (!p.empty()) ck.archives.push_back(p);
    }
    cks.push_back(std::move(ck));
  }
  std::vector<suda::SuiteInput> suites;
  for (const auto& entry : a.suites) {
    auto [name, path] = split_named(entry);
    if (name.empty()) name = fs::path(path).stem().string();
    suites.push_back({name, read_suite_file(path)});
  }
  suda::SudaConfig cfg{a.tau, suda::parse_variant(a.variant)};
  const auto t = suda::run_suda(cks, suites, cfg, g.jobs);
  const fs::path dir(g.out);
  t.max_logit.save((dir / "suda_max_logit.csv").string());
  t.threshold_counts.save((dir / "suda_threshold_counts.csv").string());
  t.overlap.save((dir / "suda_overlap.csv").string());
  t.overlap_steps.save((dir / "suda_overlap_steps.csv").string());
  t.profiles.save((dir / "suda_profiles.csv").string());
  out << "suda over " << cks.size() << " checkpoints and " << suites.size() << " suites ("
      << suda::variant_name(cfg.variant) << ", tau " << format_double(cfg.threshold) << ")\n";
  return 0;
}

struct ReportArgs {
  std::string store;
  std::string suda_dir;
  std::string metric = "accuracy";
  int window = 5;
};

inline int cmd_report(const ReportArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  const DataAssets assets{g.data_dir};
  if (!fs::exists(fs::path(a.store) / "index.json")) fail(ErrorCode::EmptyStore, a.store + " has no index.json");
  const ResultStore store(a.store);
  const auto rows = load_cell_rows(store);
  const fs::path dir(g.out);

  CsvTable token_index({"model", "step", "group", "suite", "range_lo", "range_hi", "accuracy", "mean_logprob"});
  CsvTable task_config({"model", "step", "params", "task", "group", "suite", "accuracy", "mean_logprob",
                        "smoothed"});
  std::map<std::pair<std::string, std::string>, std::vector<const CellRow*>> by_series;
  for (const auto& r : rows) {
    if (r.range) {
      token_index.add(r.model, r.step, r.group, r.suite, r.range->first, r.range->second, r.accuracy, r.mean_logprob);
    }
    by_series[{r.model, r.suite}].push_back(&r);
  }
  for (const auto& [key, cells] : by_series) {
    stats::TimeSeries s;
    for (auto* c : cells) {
      s.steps.push_back(c->step);
      s.values.push_back(c->metric(a.metric));
    }
    const auto smooth = stats::running_average(s, a.window);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto* c = cells[i];
      task_config.add(c->model, c->step, c->params, c->task, c->group, c->suite, c->accuracy, c->mean_logprob,
                      smooth.values[i]);
    }
  }
  StatsOptions opt;
  opt.metric = a.metric;
  opt.window = a.window;
  const auto t = compute_stats(rows, stats::load_critical_values(assets.critical_values_path()), opt);

  CsvTable scaling_points({"suite", "model", "params", "best_step", "best_value", "power_fit", "saturating_fit"});
  std::map<std::string, std::map<std::string, const CellRow*>> best;
  for (const auto& r : rows) {
    if (r.params <= 0.0) continue;
    auto& slot = best[r.suite][r.model];
    if (!slot || r.metric(a.metric) > slot->metric(a.metric)) slot = &r;
  }
  for (const auto& [suite, per_model] : best) {
    std::vector<double> n, perf;
    for (const auto& [model, r] : per_model) {
      n.push_back(r->params);
      perf.push_back(r->metric(a.metric));
    }
    std::optional<stats::ScalingFit> power, saturating;
    try {
      power = stats::fit_power(n, perf);
    } catch (const Error&) {
    }
    try {
      saturating = stats::fit_saturating(n, perf);
    } catch (const Error&) {
    }
    for (const auto& [model, r] : per_model) {
      scaling_points.add(suite, model, r->params, r->step, r->metric(a.metric),
                         power ? power->predict(r->params) : std::nan(""),
                         saturating ? saturating->predict(r->params) : std::nan(""));
    }
  }

  token_index.save((dir / "token_index_curves.csv").string());
  t.gaps.save((dir / "gap_curves.csv").string());
  task_config.save((dir / "task_config_curves.csv").string());
  scaling_points.save((dir / "scaling_points.csv").string());
  if (!a.suda_dir.empty()) {
    const fs::path src = fs::path(a.suda_dir) / "suda_max_logit.csv";
    const fs::path counts = fs::path(a.suda_dir) / "suda_threshold_counts.csv";
    if (!fs::exists(src) || !fs::exists(counts)) fail(ErrorCode::Io, a.suda_dir + " lacks suda outputs");
    // Join max-logit and threshold-count rows on (step, suite).
    auto read = [](const fs::path& p) { return detail::read_csv(p.string()); };
    const auto ml = read(src);
    const auto tc = read(counts);
    std::map<std::pair<std::string, std::string>, std::string> strong;
    for (std::size_t i = 1; i < tc.size(); ++i) strong[{tc[i][0], tc[i][1]}] = tc[i][4];
    CsvTable series({"step", "suite", "variant", "direction", "max_logit", "n_strong"});
    for (std::size_t i = 1; i < ml.size(); ++i) {
      series.add_row({ml[i][0], ml[i][1], ml[i][2], ml[i][4], ml[i][5], strong[{ml[i][0], ml[i][1]}]});
    }
    series.save((dir / "suda_series.csv").string());
  }
  out << "report over " << rows.size() << " cells written to " << dir.string() << '\n';
  for (const auto& f : t.failures) err << "error: " << f << '\n';
  return t.failures.empty() ? 0 : 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"In-context-learning probe toolkit: task generation, checkpoint sweeps, statistics and SUDA"};
  app.name("iclprobe");
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values (flags on the command line take precedence)");
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  app.add_option("--seed", g.seed, "Root seed; every suite and sample seed derives from it");
  app.add_option("--jobs", g.jobs, "Worker threads for cells, samples and checkpoints")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--data-dir", g.data_dir, "Directory with the bundled data assets")->check(CLI::ExistingDirectory);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate probe suites as JSONL");
  gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary TSV (default: bundled desk vocabulary)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--task", gen.task, "Task: lsc, lscg, wc, wi, tt, cf, country_capital")
      ->check(CLI::IsMember({"lsc", "lscg", "wc", "wi", "tt", "cf", "country_capital"}));
  gen_cmd->add_option("--manifest", gen.manifest, "Generate every suite of a sweep manifest instead")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--name", gen.name, "Suite name (default: the task name)");
  gen_cmd->add_option("--n", gen.n, "Number of instances");
  gen_cmd->add_option("--index-range", gen.index_range, "Token pool from ids LO:HI");
  gen_cmd->add_option("--wordlist", gen.wordlist, "Token pool from a word list (bundled name or file)");
  gen_cmd->add_flag("--no-filter-special", gen.no_filter_special, "Keep special and empty tokens in index-range pools");
  gen_cmd->add_option("--pattern-len", gen.pattern_len, "lsc/lscg: pattern length |P|");
  gen_cmd->add_option("--gap-len", gen.gap_len, "lsc/lscg: gap length |R|");
  gen_cmd->add_option("--inner-gap-len", gen.inner_gap_len, "lscg: inner gap length |G|");
  gen_cmd->add_option("--n-features", gen.n_features, "wc: number of features |F|");
  gen_cmd->add_option("--n-labels", gen.n_labels, "wc: number of labels |L|");
  gen_cmd->add_option("--n-distractors", gen.n_distractors, "wc: distractors per line |D|");
  gen_cmd->add_option("--demos-per-feature", gen.demos_per_feature, "wc: demonstrations per feature");
  gen_cmd->add_option("--seq-len", gen.seq_len, "wi: sequence length |S|");
  gen_cmd->add_option("--target-index", gen.target_index, "wi: index of the target token");
  gen_cmd->add_option("--n-demos", gen.n_demos, "wi/tt: number of demonstrations");
  gen_cmd->add_option("--src", gen.src, "tt: source language (en, de, fr, es, it)");
  gen_cmd->add_option("--tgt", gen.tgt, "tt: target language (en, de, fr, es, it)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score suites against one backend");
  eval_cmd->add_option("--vocab", eval.vocab, "Vocabulary TSV (default: bundled desk vocabulary)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--suite", eval.suites, "Suite JSONL, optionally NAME=FILE; repeatable")->required();
  eval_cmd->add_option("--backend", eval.backend, "metadata | induction | tensor:ARCHIVE | http:URL");
  eval_cmd->add_option("--backend-json", eval.backend_json, "Backend descriptor as JSON (overrides --backend)");
  eval_cmd->add_option("--model", eval.model, "Model name recorded with the results");
  eval_cmd->add_option("--step", eval.step, "Training step recorded with the results");
  eval_cmd->add_option("--params", eval.params, "Model size N recorded with the results");
  eval_cmd->add_option("--top-k", eval.top_k, "Tokens requested per prompt")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--retries", eval.retries, "Retries per failed cell")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--hidden-out", eval.hidden_out, "Write final hidden states to this tensor archive");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Score every (suite, checkpoint) cell of a manifest");
  sweep_cmd->add_option("--manifest", sw.manifest, "Sweep manifest JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--top-k", sw.top_k, "Tokens requested per prompt")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--retries", sw.retries, "Retries per failed cell")->check(CLI::NonNegativeNumber);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Correlations, gap series, Johansen tests and scaling fits");
  stats_cmd->add_option("--store", st.store, "Result store written by eval or sweep")->required();
  stats_cmd->add_option("--metric", st.metric, "accuracy | mean_logprob")
      ->check(CLI::IsMember({"accuracy", "mean_logprob"}));
  stats_cmd->add_option("--window", st.window, "Running-average window (odd)");
  stats_cmd->add_option("--lag-order", st.lag_order, "Johansen: lagged differences")->check(CLI::NonNegativeNumber);
  stats_cmd->add_option("--det-case", st.det_case, "Johansen: constant | no_det")
      ->check(CLI::IsMember({"constant", "no_det"}));
  stats_cmd->add_option("--critical-values", st.critical_values, "Trace critical-value CSV")->check(CLI::ExistingFile);

  SudaArgs su;
  auto* suda_cmd = app.add_subcommand("suda", "Singular unembedding direction analysis over checkpoints");
  suda_cmd->add_option("--checkpoint", su.checkpoints, "STEP=ARCHIVE[,ARCHIVE...]; repeatable")->required();
  suda_cmd->add_option("--suite", su.suites, "Suite JSONL, optionally NAME=FILE; repeatable")->required();
  suda_cmd->add_option("--tau", su.tau, "Strong-direction threshold");
  suda_cmd->add_option("--variant", su.variant, "projection | rank1")->check(CLI::IsMember({"projection", "rank1"}));

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Plot-ready CSVs joining results, statistics and SUDA");
  report_cmd->add_option("--store", rep.store, "Result store written by eval or sweep")->required();
  report_cmd->add_option("--suda", rep.suda_dir, "Directory with suda outputs to join");
  report_cmd->add_option("--metric", rep.metric, "accuracy | mean_logprob")
      ->check(CLI::IsMember({"accuracy", "mean_logprob"}));
  report_cmd->add_option("--window", rep.window, "Running-average window (odd)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(g.out);
    {
      nlohmann::ordered_json eff{{"command", app.get_subcommands().front()->get_name()}};
      eff.update(JsonConfig::effective(&app));
      std::ofstream cfg(fs::path(g.out) / "effective_config.json");
      cfg << eff.dump(2) << '\n';
    }
    if (gen_cmd->parsed()) return cmd_gen(gen, g, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, g, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, g, out);
    if (stats_cmd->parsed()) return cmd_stats(st, g, out, err);
    if (suda_cmd->parsed()) return cmd_suda(su, g, out);
    if (report_cmd->parsed()) return cmd_report(rep, g, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace iclprobe::cli
