// Sweep manifests: which suites to generate and which checkpoints to score.
//
// {
//   "vocab": "vocab.tsv",                      (optional, bundled desk vocab by default)
//   "suites": [{"name":"lsc_0k","task":"lsc","config":{...},
//               "pool":{"kind":"index_range","lo":0,"hi":1000},
//               "n_samples":1000,"seed":42,"group":"lsc"}],
//   "checkpoints": [{"model":"m","step":512,"params":7e7,"backend":{...}}],
//   "metrics": ["accuracy","mean_logprob"]
// }
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "iclprobe/assets.hpp"
#include "iclprobe/model/descriptor.hpp"
#include "iclprobe/pool.hpp"
#include "iclprobe/tasks.hpp"

namespace iclprobe {

struct PoolSpec {
  PoolSource source;
  std::string path;  // word-list file for custom lists; empty for bundled ones
};

struct SuiteSpec {
  std::string name;
  TaskConfig config;
  std::optional<PoolSpec> pool;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::string group;  // suites in one group differ only in their pool

  TaskKind task() const { return config_task(config); }
};

struct CheckpointSpec {
  std::string model;
  std::int64_t step = 0;
  double params = 0.0;  // model size N; 0 when unknown
  BackendDescriptor backend;

  std::string key() const { return model + "@" + std::to_string(step); }
};

struct SweepManifest {
  std::string vocab;
  std::vector<SuiteSpec> suites;
  std::vector<CheckpointSpec> checkpoints;
  std::vector<std::string> metrics{"accuracy", "mean_logprob"};
};

inline nlohmann::ordered_json pool_spec_to_json(const PoolSpec& p) {
  auto j = nlohmann::ordered_json::parse(pool_source_to_json(p.source).dump());
  if (!p.path.empty()) j["path"] = p.path;
  return j;
}

template <typename Json>
PoolSpec pool_spec_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  PoolSpec p{pool_source_from_json(nlohmann::json::parse(j.dump())), {}};
  if (j.contains("path")) {
    std::filesystem::path path = j.at("path").template get<std::string>();
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    p.path = path.lexically_normal().string();
  }
  return p;
}

/// Config-derived label used when a suite does not name its group.
inline std::string default_group(const TaskConfig& config) {
  std::string out(task_name(config_task(config)));
  const auto j = config_to_json(config);
  if (j.empty()) return out;
  out += "[";
  bool first = true;
  for (const auto& [k, v] : j.items()) {
    out += (first ? "" : " ") + k + "=" + (v.is_string() ? v.template get<std::string>() : v.dump());
    first = false;
  }
  return out + "]";
}

/// Canonical form hashed into cell ids. Key order is fixed.
inline nlohmann::ordered_json suite_spec_to_json(const SuiteSpec& s) {
  nlohmann::ordered_json j{{"name", s.name},
                           {"task", std::string(task_name(s.task()))},
                           {"config", config_to_json(s.config)}};
  if (s.pool) j["pool"] = pool_spec_to_json(*s.pool);
  j["n_samples"] = s.n_samples;
  j["seed"] = s.seed;
  j["group"] = s.group;
  return j;
}

template <typename Json>
SuiteSpec suite_spec_from_json(const Json& j, std::uint64_t default_seed, const std::filesystem::path& base_dir = {}) {
  SuiteSpec s;
  const auto task = parse_task(j.at("task").template get<std::string>());
  s.name = j.value("name", std::string(task_name(task)));
  s.config = config_from_json(task, j.contains("config") ? j.at("config") : Json::object());
  validate(s.config);
  if (j.contains("pool")) s.pool = pool_spec_from_json(j.at("pool"), base_dir);
  if (uses_token_pool(task) && !s.pool) s.pool = PoolSpec{WordListSource{"frequent_en"}, {}};
  s.n_samples = j.value("n_samples", std::size_t{1000});
  s.seed = j.contains("seed") ? j.at("seed").template get<std::uint64_t>() : derive_seed(default_seed, s.name);
  s.group = j.value("group", default_group(s.config));
  return s;
}

inline nlohmann::ordered_json checkpoint_to_json(const CheckpointSpec& c) {
  return {{"model", c.model}, {"step", c.step}, {"params", c.params}, {"backend", descriptor_to_json(c.backend)}};
}

template <typename Json>
CheckpointSpec checkpoint_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  CheckpointSpec c;
  c.model = j.value("model", std::string("model"));
  c.step = j.value("step", std::int64_t{0});
  c.params = j.value("params", 0.0);
  c.backend = descriptor_from_json(j.at("backend"), base_dir);
  return c;
}

/// Relative paths inside the manifest resolve against its directory.
inline SweepManifest parse_manifest(const nlohmann::json& j, std::uint64_t default_seed,
                                    const std::filesystem::path& base_dir = {}) {
  SweepManifest m;
  try {
    if (j.contains("vocab")) {
      std::filesystem::path v = j.at("vocab").get<std::string>();
      if (v.is_relative() && !base_dir.empty()) v = base_dir / v;
      m.vocab = v.lexically_normal().string();
    }
    for (const auto& s : j.at("suites")) m.suites.push_back(suite_spec_from_json(s, default_seed, base_dir));
    for (const auto& c : j.at("checkpoints")) m.checkpoints.push_back(checkpoint_from_json(c, base_dir));
    if (j.contains("metrics")) m.metrics = j.at("metrics").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("manifest: ") + e.what());
  }
  if (m.suites.empty()) fail(ErrorCode::InvalidConfig, "manifest lists no suites");
  if (m.checkpoints.empty()) fail(ErrorCode::InvalidConfig, "manifest lists no checkpoints");
  for (const auto& metric : m.metrics) {
    if (metric != "accuracy" && metric != "mean_logprob") fail(ErrorCode::InvalidConfig, "unknown metric " + metric);
  }
  std::set<std::string> suite_names, ckpt_keys;
  for (const auto& s : m.suites) {
    if (!suite_names.insert(s.name).second) fail(ErrorCode::DuplicateCell, "suite " + s.name + " listed twice");
  }
  for (const auto& c : m.checkpoints) {
    if (!ckpt_keys.insert(c.key()).second) fail(ErrorCode::DuplicateCell, "checkpoint " + c.key() + " listed twice");
  }
  return m;
}

inline SweepManifest load_manifest(const std::string& path, std::uint64_t default_seed) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return parse_manifest(j, default_seed, std::filesystem::path(path).parent_path());
}

inline TokenPool build_pool(const PoolSpec& spec, const Vocabulary& vocab, const DataAssets& assets) {
  if (const auto* r = std::get_if<IndexRangeSource>(&spec.source)) {
    return build_pool_index_range(vocab, r->lo, r->hi, r->filter_special);
  }
  const auto& name = std::get<WordListSource>(spec.source).name;
  std::string path = spec.path;
  if (path.empty()) {
    if (name != "frequent_en") fail(ErrorCode::InvalidConfig, "unknown bundled word list " + name);
    path = assets.frequent_words_path();
  }
  return build_pool_wordlist(vocab, load_word_list(path), name).pool;
}

}  // namespace iclprobe
