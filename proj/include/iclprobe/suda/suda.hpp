// Singular unembedding direction analysis.
//
// For W_U = U diag(S) Vh and a final hidden state x, each singular direction
// i gets a score:
//   PROJECTION  s_i = Vh_i . x
//   RANK1       s_i = U[t, i] * S_i * (Vh_i . x)   (sums to the logit of t)
// Profiles average scores over samples; strong sets and their pairwise IoU
// measure how much two tasks share directions.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "iclprobe/common.hpp"
#include "iclprobe/suda/svd.hpp"

namespace iclprobe::suda {

enum class ScoreVariant { Projection, Rank1 };

inline std::string_view variant_name(ScoreVariant v) { return v == ScoreVariant::Projection ? "projection" : "rank1"; }

inline ScoreVariant parse_variant(std::string_view name) {
  if (name == "projection" || name == "PROJECTION") return ScoreVariant::Projection;
  if (name == "rank1" || name == "RANK1") return ScoreVariant::Rank1;
  fail(ErrorCode::InvalidConfig, "unknown score variant " + std::string(name));
}

struct SudaConfig {
  double threshold = 0.2;
  ScoreVariant variant = ScoreVariant::Projection;
};

struct SudaProfile {
  std::vector<double> per_direction;
  std::size_t n_samples = 0;
  ScoreVariant variant = ScoreVariant::Projection;
};

inline std::vector<double> direction_scores(const SvdFactors& f, std::span<const double> x, TokenId t_ans,
                                            ScoreVariant variant) {
  if (static_cast<Eigen::Index>(x.size()) != f.vh.cols()) {
    fail(ErrorCode::DimensionMismatch, "hidden state has dimension " + std::to_string(x.size()) + ", factors expect " +
                                           std::to_string(f.vh.cols()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "hidden state is not finite");
  }
  if (variant == ScoreVariant::Rank1 && (t_ans < 0 || t_ans >= f.u.rows())) {
    fail(ErrorCode::OutOfRange, "answer token " + std::to_string(t_ans) + " outside unembedding rows");
  }
  const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Vector proj = f.vh * xv;
  std::vector<double> out(static_cast<std::size_t>(proj.size()));
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    out[static_cast<std::size_t>(i)] = variant == ScoreVariant::Projection ? proj(i) : f.u(t_ans, i) * f.s(i) * proj(i);
  }
  return out;
}

/// Per-direction mean over samples, with Neumaier compensated sums.
inline SudaProfile task_profile(const SvdFactors& f, const std::vector<std::vector<double>>& hidden,
                                const std::vector<TokenId>& answers, const SudaConfig& cfg) {
  if (hidden.empty()) fail(ErrorCode::EmptyInput, "profile needs at least one sample");
  if (hidden.size() != answers.size()) fail(ErrorCode::DimensionMismatch, "one answer per hidden state is required");
  const auto m = static_cast<std::size_t>(f.s.size());
  std::vector<double> sum(m, 0.0), comp(m, 0.0);
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    const auto scores = direction_scores(f, hidden[k], answers[k], cfg.variant);
    for (std::size_t i = 0; i < m; ++i) {
      const double t = sum[i] + scores[i];
      if (std::abs(sum[i]) >= std::abs(scores[i])) {
        comp[i] += (sum[i] - t) + scores[i];
      } else {
        comp[i] += (scores[i] - t) + sum[i];
      }
      sum[i] = t;
    }
  }
  SudaProfile p{std::vector<double>(m), hidden.size(), cfg.variant};
  for (std::size_t i = 0; i < m; ++i) p.per_direction[i] = (sum[i] + comp[i]) / static_cast<double>(hidden.size());
  return p;
}

struct MaxLogit {
  std::size_t index = 0;
  double value = 0.0;
};

inline MaxLogit max_logit(const SudaProfile& p) {
  if (p.per_direction.empty()) fail(ErrorCode::EmptyInput, "empty profile");
  MaxLogit best{0, p.per_direction[0]};
  for (std::size_t i = 1; i < p.per_direction.size(); ++i) {
    if (p.per_direction[i] > best.value) best = {i, p.per_direction[i]};
  }
  return best;
}

inline std::set<std::size_t> strong_set(const SudaProfile& p, double tau) {
  if (!std::isfinite(tau)) fail(ErrorCode::InvalidConfig, "threshold must be finite");
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < p.per_direction.size(); ++i) {
    if (p.per_direction[i] > tau) out.insert(i);
  }
  return out;
}

inline double iou(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  if (a.empty() && b.empty()) fail(ErrorCode::UndefinedIou, "IoU of two empty sets is undefined");
  std::size_t inter = 0;
  for (auto i : a) inter += b.count(i);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct OverlapMatrix {
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> mean_iou;  // NaN where no step had a nonempty set
  std::vector<std::vector<std::size_t>> n_steps;
};

/// Entry (A, B) is the mean over steps of IoU(strong_A, strong_B). Steps where
/// both strong sets are empty are skipped; the diagonal is 1 by definition.
inline OverlapMatrix overlap_matrix(const std::map<std::string, std::vector<SudaProfile>>& by_task, double tau) {
  OverlapMatrix out;
  if (by_task.empty()) fail(ErrorCode::EmptyInput, "overlap matrix needs at least one task");
  const std::size_t steps = by_task.begin()->second.size();
  std::vector<std::vector<std::set<std::size_t>>> sets;
  for (const auto& [task, profiles] : by_task) {
    if (profiles.size() != steps) fail(ErrorCode::MismatchedGrid, "task " + task + " has a different step grid");
    out.tasks.push_back(task);
    auto& row = sets.emplace_back();
    for (const auto& p : profiles) row.push_back(strong_set(p, tau));
  }
  const std::size_t k = out.tasks.size();
  out.mean_iou.assign(k, std::vector<double>(k, 1.0));
  out.n_steps.assign(k, std::vector<std::size_t>(k, steps));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double sum = 0.0;
      std::size_t used = 0;
      for (std::size_t t = 0; t < steps; ++t) {
        if (sets[a][t].empty() && sets[b][t].empty()) continue;
        sum += iou(sets[a][t], sets[b][t]);
        ++used;
      }
      const double mean = used ? sum / static_cast<double>(used) : std::nan("");
      out.mean_iou[a][b] = out.mean_iou[b][a] = mean;
      out.n_steps[a][b] = out.n_steps[b][a] = used;
    }
  }
  return out;
}

}  // namespace iclprobe::suda
