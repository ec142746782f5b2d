// SUDA over checkpoints: SVD of each checkpoint's unembedding, per-suite
// profiles from archived hidden states, and the tables written by the suda
// subcommand.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "iclprobe/csv.hpp"
#include "iclprobe/model/tensor_archive.hpp"
#include "iclprobe/parallel.hpp"
#include "iclprobe/suda/suda.hpp"
#include "iclprobe/suda/svd.hpp"
#include "iclprobe/tasks.hpp"

namespace iclprobe::suda {

inline std::string hidden_key(const std::string& suite, std::uint64_t sample_id) {
  return "hidden/" + suite + "/" + std::to_string(sample_id);
}

struct CheckpointInput {
  std::int64_t step = 0;
  std::vector<std::string> archives;  // merged; later files win on name clashes
};

struct SuiteInput {
  std::string name;
  std::vector<TaskInstance> instances;
};

struct CheckpointProfiles {
  std::int64_t step = 0;
  Vector singular_values;
  std::map<std::string, SudaProfile> by_suite;
};

inline Matrix unembedding_matrix(const TensorArchive& archive) {
  const auto& t = archive.at("unembedding");
  if (t.shape.size() != 2) fail(ErrorCode::ShapeMismatch, "unembedding must be 2-d");
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(t.data.data(), t.shape[0], t.shape[1]).cast<double>();
}

inline CheckpointProfiles profile_checkpoint(const CheckpointInput& ck, const std::vector<SuiteInput>& suites,
                                             const SudaConfig& cfg) {
  TensorArchive merged;
  for (const auto& path : ck.archives) {
    const auto archive = load_archive(path);
    for (const auto& [name, t] : archive.entries()) merged.put(name, t.shape, t.data);
  }
  const auto factors = svd(unembedding_matrix(merged));
  CheckpointProfiles out{ck.step, factors.s, {}};
  for (const auto& suite : suites) {
    std::vector<std::vector<double>> hidden;
    std::vector<TokenId> answers;
    for (const auto& inst : suite.instances) {
      const auto key = hidden_key(suite.name, inst.sample_id);
      if (!merged.contains(key)) continue;
      const auto& t = merged.at(key);
      hidden.emplace_back(t.data.begin(), t.data.end());
      answers.push_back(inst.answer);
    }
    if (hidden.empty()) {
      fail(ErrorCode::EmptyInput, "step " + std::to_string(ck.step) + " has no hidden states for suite " + suite.name);
    }
    out.by_suite.emplace(suite.name, task_profile(factors, hidden, answers, cfg));
  }
  return out;
}

struct SudaTables {
  CsvTable max_logit{{"step", "suite", "variant", "n_samples", "direction", "value", "singular_value"}};
  CsvTable threshold_counts{{"step", "suite", "variant", "tau", "n_strong"}};
  CsvTable profiles{{"step", "suite", "variant", "direction", "score"}};
  CsvTable overlap;
  CsvTable overlap_steps;

  SudaTables() : overlap({"suite"}), overlap_steps({"suite"}) {}
};

/// Checkpoints are processed in parallel and reported in step order.
inline SudaTables run_suda(std::vector<CheckpointInput> checkpoints, const std::vector<SuiteInput>& suites,
                           const SudaConfig& cfg, int jobs = 1) {
  if (checkpoints.empty()) fail(ErrorCode::EmptyInput, "suda needs at least one checkpoint");
  if (suites.empty()) fail(ErrorCode::EmptyInput, "suda needs at least one suite");
  std::sort(checkpoints.begin(), checkpoints.end(), [](auto& a, auto& b) { return a.step < b.step; });
  std::vector<CheckpointProfiles> results(checkpoints.size());
  parallel_for(checkpoints.size(), jobs,
               [&](std::size_t i) { results[i] = profile_checkpoint(checkpoints[i], suites, cfg); });

  const std::string variant(variant_name(cfg.variant));
  SudaTables t;
  std::map<std::string, std::vector<SudaProfile>> by_suite;
  for (const auto& ck : results) {
    for (const auto& suite : suites) {
      const auto& p = ck.by_suite.at(suite.name);
      const auto best = max_logit(p);
      t.max_logit.add(ck.step, suite.name, variant, p.n_samples, best.index, best.value,
                      ck.singular_values(static_cast<Eigen::Index>(best.index)));
      t.threshold_counts.add(ck.step, suite.name, variant, cfg.threshold, strong_set(p, cfg.threshold).size());
      for (std::size_t i = 0; i < p.per_direction.size(); ++i) {
        t.profiles.add(ck.step, suite.name, variant, i, p.per_direction[i]);
      }
      by_suite[suite.name].push_back(p);
    }
  }
  const auto om = overlap_matrix(by_suite, cfg.threshold);
  std::vector<std::string> header{"suite"};
  header.insert(header.end(), om.tasks.begin(), om.tasks.end());
  t.overlap = CsvTable(header);
  t.overlap_steps = CsvTable(header);
  for (std::size_t a = 0; a < om.tasks.size(); ++a) {
    std::vector<std::string> row{om.tasks[a]}, steps{om.tasks[a]};
    for (std::size_t b = 0; b < om.tasks.size(); ++b) {
      row.push_back(CsvTable::to_cell(om.mean_iou[a][b]));
      steps.push_back(std::to_string(om.n_steps[a][b]));
    }
    t.overlap.add_row(std::move(row));
    t.overlap_steps.add_row(std::move(steps));
  }
  return t;
}

}  // namespace iclprobe::suda
