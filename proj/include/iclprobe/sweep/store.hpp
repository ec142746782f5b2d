// On-disk result store.
//
//   <root>/index.json              one record per (suite, checkpoint) cell
//   <root>/cells/<id>.jsonl        finished cell, results sorted by sample_id
//   <root>/cells/<id>.partial      results appended while a cell runs
//   <root>/suites/<name>.jsonl     generated suites
//   <root>/run.log                 timestamps and latencies
//
// Cell ids hash the canonical suite spec together with the checkpoint key, so
// a rerun finds finished cells and resumes partial ones.
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "iclprobe/sweep/results.hpp"

namespace iclprobe {

namespace fs = std::filesystem;

inline std::string make_cell_id(const nlohmann::ordered_json& suite_spec, const std::string& checkpoint_key) {
  return hex64(fnv1a64(suite_spec.dump() + "\n" + checkpoint_key));
}

struct CellRecord {
  std::string cell_id;
  std::string suite;
  std::string checkpoint;
  nlohmann::ordered_json suite_spec;
  nlohmann::ordered_json checkpoint_spec;
  bool complete = false;
  std::size_t n_samples = 0;
  double accuracy = 0.0;
  double mean_logprob = 0.0;
  double mean_logprob_excl_floor = 0.0;  // NaN when every sample hit the floor
  std::size_t n_floor = 0;
  std::string error;
  bool resumed = false;  // not persisted
};

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline double number_or(const nlohmann::json& j, double fallback) {
  return j.is_number() ? j.get<double>() : fallback;
}

}  // namespace detail

/// -inf and NaN metrics are spelled null.
inline nlohmann::ordered_json record_to_json(const CellRecord& r) {
  nlohmann::ordered_json j{{"cell_id", r.cell_id},
                           {"suite", r.suite},
                           {"checkpoint", r.checkpoint},
                           {"suite_spec", r.suite_spec},
                           {"checkpoint_spec", r.checkpoint_spec},
                           {"status", r.complete ? "complete" : "failed"}};
  if (r.complete) {
    j["n_samples"] = r.n_samples;
    j["accuracy"] = r.accuracy;
    j["mean_logprob"] = detail::number_or_null(r.mean_logprob);
    j["mean_logprob_excl_floor"] = detail::number_or_null(r.mean_logprob_excl_floor);
    j["n_floor"] = r.n_floor;
  } else {
    j["error"] = r.error;
  }
  return j;
}

inline CellRecord record_from_json(const nlohmann::ordered_json& j) {
  CellRecord r;
  r.cell_id = j.at("cell_id").get<std::string>();
  r.suite = j.at("suite").get<std::string>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.suite_spec = j.at("suite_spec");
  r.checkpoint_spec = j.at("checkpoint_spec");
  r.complete = j.at("status").get<std::string>() == "complete";
  if (r.complete) {
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.mean_logprob = detail::number_or(j.at("mean_logprob"), kNegInf);
    r.mean_logprob_excl_floor = detail::number_or(j.at("mean_logprob_excl_floor"), std::nan(""));
    r.n_floor = j.at("n_floor").get<std::size_t>();
  } else {
    r.error = j.value("error", std::string());
  }
  return r;
}

inline void fill_metrics(CellRecord& rec, const std::vector<SampleResult>& results) {
  rec.complete = true;
  rec.error.clear();
  rec.n_samples = results.size();
  rec.accuracy = accuracy(results);
  rec.mean_logprob = mean_logprob(results, FloorPolicy::Include);
  rec.n_floor = static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](auto& r) { return r.floor; }));
  rec.mean_logprob_excl_floor =
      rec.n_floor == results.size() ? std::nan("") : mean_logprob(results, FloorPolicy::Exclude);
}

class ResultStore {
 public:
  explicit ResultStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_ / "cells", ec);
    if (ec) fail(ErrorCode::Io, "cannot create store at " + root_.string() + ": " + ec.message());
  }

  const fs::path& root() const noexcept { return root_; }
  fs::path cell_path(const std::string& id) const { return root_ / "cells" / (id + ".jsonl"); }
  fs::path partial_path(const std::string& id) const { return root_ / "cells" / (id + ".partial"); }
  fs::path index_path() const { return root_ / "index.json"; }
  fs::path suite_path(const std::string& name) const { return root_ / "suites" / (name + ".jsonl"); }

  bool is_complete(const std::string& id) const { return fs::exists(cell_path(id)); }

  static std::vector<SampleResult> read_results(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    std::vector<SampleResult> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        out.push_back(result_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception&) {
        // A torn final line from an interrupted run is dropped.
        if (path.extension() != ".partial") fail(ErrorCode::Malformed, path.string() + ": bad result line");
      }
    }
    return out;
  }

  std::vector<SampleResult> read_cell(const std::string& id) const { return read_results(cell_path(id)); }

  std::vector<SampleResult> read_partial(const std::string& id) const {
    if (!fs::exists(partial_path(id))) return {};
    auto results = read_results(partial_path(id));
    std::unordered_set<std::uint64_t> seen;
    std::vector<SampleResult> unique;
    for (auto& r : results) {
      if (seen.insert(r.sample_id).second) unique.push_back(std::move(r));
    }
    return unique;
  }

  void append_partial(const std::string& id, const SampleResult& r) {
    std::lock_guard lock(mutex_);
    std::ofstream out(partial_path(id), std::ios::app);
    out << result_to_json(r).dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::Io, "cannot append to " + partial_path(id).string());
  }

  void finalize_cell(const std::string& id, std::vector<SampleResult> results) {
    std::sort(results.begin(), results.end(), [](auto& a, auto& b) { return a.sample_id < b.sample_id; });
    write_atomic(cell_path(id), [&](std::ostream& out) {
      for (const auto& r : results) out << result_to_json(r).dump() << '\n';
    });
    std::error_code ec;
    fs::remove(partial_path(id), ec);
  }

  std::vector<CellRecord> read_index() const {
    if (!fs::exists(index_path())) return {};
    std::ifstream in(index_path());
    try {
      const auto j = nlohmann::ordered_json::parse(in);
      std::vector<CellRecord> out;
      for (const auto& c : j.at("cells")) out.push_back(record_from_json(c));
      return out;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Malformed, index_path().string() + ": " + e.what());
    }
  }

  /// New records replace old ones with the same cell id; the rest keep their
  /// position.
  void merge_index(const std::vector<CellRecord>& records) {
    auto all = read_index();
    for (const auto& r : records) {
      auto it = std::find_if(all.begin(), all.end(), [&](const CellRecord& o) { return o.cell_id == r.cell_id; });
      if (it == all.end()) all.push_back(r);
      else *it = r;
    }
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& r : all) cells.push_back(record_to_json(r));
    const nlohmann::ordered_json index{{"cells", cells}};
    write_atomic(index_path(), [&](std::ostream& out) { out << index.dump(2) << '\n'; });
  }

  void write_suite(const std::string& name, const std::vector<TaskInstance>& instances) {
    fs::create_directories(root_ / "suites");
    write_atomic(suite_path(name), [&](std::ostream& out) { iclprobe::write_suite(out, instances); });
  }

  /// Timestamped line in run.log; the only place wall-clock time is written.
  void log(const std::string& message) {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ofstream out(root_ / "run.log", std::ios::app);
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << message << '\n';
  }

  template <typename Writer>
  static void write_atomic(const fs::path& path, Writer&& writer) {
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
      writer(out);
      if (!out) fail(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
  }

 private:
  fs::path root_;
  std::mutex mutex_;
};

}  // namespace iclprobe
