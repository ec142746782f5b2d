// Statistics over a result store: the tables behind the stats and report
// subcommands. Metrics are recomputed from the per-sample cell files rather
// than trusted from the index.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iclprobe/csv.hpp"
#include "iclprobe/stats/correlation.hpp"
#include "iclprobe/stats/johansen.hpp"
#include "iclprobe/stats/scaling.hpp"
#include "iclprobe/stats/timeseries.hpp"
#include "iclprobe/sweep/store.hpp"

namespace iclprobe {

struct CellRow {
  std::string suite;
  std::string task;
  std::string group;
  std::string model;
  std::int64_t step = 0;
  double params = 0.0;
  std::optional<std::pair<TokenId, TokenId>> range;  // index-range pools only
  double accuracy = 0.0;
  double mean_logprob = 0.0;

  double metric(std::string_view name) const { return name == "mean_logprob" ? mean_logprob : accuracy; }
};

/// Complete cells of a store, ordered by (model, group, suite, step).
inline std::vector<CellRow> load_cell_rows(const ResultStore& store) {
  const auto records = store.read_index();
  std::vector<CellRow> rows;
  for (const auto& rec : records) {
    if (!rec.complete) continue;
    const auto results = store.read_cell(rec.cell_id);
    if (results.empty()) continue;
    CellRow row;
    row.suite = rec.suite;
    row.task = rec.suite_spec.value("task", std::string());
    row.group = rec.suite_spec.value("group", row.task);
    row.model = rec.checkpoint_spec.value("model", std::string());
    row.step = rec.checkpoint_spec.value("step", std::int64_t{0});
    row.params = rec.checkpoint_spec.value("params", 0.0);
    if (rec.suite_spec.contains("pool")) {
      const auto& pool = rec.suite_spec["pool"];
      if (pool.value("kind", std::string()) == "index_range") {
        row.range = std::make_pair(pool.at("lo").get<TokenId>(), pool.at("hi").get<TokenId>());
      }
    }
    row.accuracy = accuracy(results);
    row.mean_logprob = mean_logprob(results);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::EmptyStore, "no completed cells in " + store.root().string());
  std::sort(rows.begin(), rows.end(), [](const CellRow& a, const CellRow& b) {
    return std::tie(a.model, a.group, a.suite, a.step) < std::tie(b.model, b.group, b.suite, b.step);
  });
  return rows;
}

struct StatsOptions {
  std::string metric = "accuracy";
  int window = 5;
  int lag_order = 1;
  stats::DetCase det_case = stats::DetCase::Constant;
};

struct StatsTables {
  CsvTable correlations{{"model", "step", "group", "metric", "method", "n", "r", "p_value", "status"}};
  CsvTable gaps{{"model", "group", "metric", "step", "first_last", "best_worst", "first_last_smoothed",
                 "best_worst_smoothed"}};
  CsvTable johansen{{"model", "task", "metric", "k", "t_eff", "rank", "eigenvalue", "trace_stat", "cv90", "cv95",
                     "cv99", "reject_95", "status"}};
  CsvTable scaling{{"suite", "metric", "form", "n_points", "a", "b", "c", "r_squared", "iterations", "status"}};
  std::vector<std::string> failures;
};

namespace detail {

/// Error codes that mean "this analysis does not apply to these data" rather
/// than a failure.
inline bool not_applicable(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateVariance:
    case ErrorCode::InsufficientData:
    case ErrorCode::InsufficientLength:
    case ErrorCode::SingularMatrix:
    case ErrorCode::NonPositiveInput:
    case ErrorCode::MismatchedGrid:
      return true;
    default:
      return false;
  }
}

inline std::string skip_status(const Error& e) { return "skipped: " + std::string(to_string(e.code())); }

/// Suite name -> series over steps for one model.
inline std::map<std::string, stats::TimeSeries> series_by_suite(const std::vector<CellRow>& rows, const std::string& model,
                                                                const std::string& metric) {
  std::map<std::string, stats::TimeSeries> out;
  for (const auto& r : rows) {
    if (r.model != model) continue;
    auto& s = out[r.suite];
    s.steps.push_back(r.step);
    s.values.push_back(r.metric(metric));
  }
  return out;
}

}  // namespace detail

inline StatsTables compute_stats(const std::vector<CellRow>& rows, const stats::CriticalValueTable& cv,
                                 const StatsOptions& opt = {}) {
  StatsTables t;
  std::set<std::string> models;
  for (const auto& r : rows) models.insert(r.model);

  auto guard = [&](const std::string& what, auto&& body, auto&& on_skip) {
    try {
      body();
    } catch (const Error& e) {
      if (detail::not_applicable(e.code())) {
        on_skip(e);
      } else {
        t.failures.push_back(what + ": " + e.what());
      }
    }
  };

  // Token-index correlations: per (model, step, group), accuracy against range start.
  std::map<std::tuple<std::string, std::int64_t, std::string>, std::vector<const CellRow*>> by_step_group;
  for (const auto& r : rows) {
    if (r.range) by_step_group[{r.model, r.step, r.group}].push_back(&r);
  }
  for (const auto& [key, cells] : by_step_group) {
    const auto& [model, step, group] = key;
    std::vector<const CellRow*> sorted = cells;
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->range->first < b->range->first; });
    std::vector<double> x, y;
    for (auto* c : sorted) {
      x.push_back(static_cast<double>(c->range->first));
      y.push_back(c->metric(opt.metric));
    }
    for (const char* method : {"pearson", "spearman"}) {
      guard(
          "correlation " + group,
          [&] {
            const auto res = std::string(method) == "pearson" ? stats::pearson(x, y) : stats::spearman(x, y);
            t.correlations.add(model, step, group, opt.metric, method, res.n, res.r, res.p_value, "ok");
          },
          [&](const Error& e) {
            t.correlations.add(model, step, group, opt.metric, method, x.size(), std::nan(""), std::nan(""),
                               detail::skip_status(e));
          });
    }
  }

  for (const auto& model : models) {
    const auto series = detail::series_by_suite(rows, model, opt.metric);

    // Gap series per group of index-range suites, keyed by range start.
    std::map<std::string, std::map<TokenId, stats::TimeSeries>> ranged;
    for (const auto& r : rows) {
      if (r.model == model && r.range) ranged[r.group][r.range->first] = series.at(r.suite);
    }
    for (const auto& [group, by_range] : ranged) {
      if (by_range.size() < 2) continue;
      guard(
          "gap " + group,
          [&] {
            const auto g = stats::gap_series(by_range);
            const auto fl = stats::running_average(g.first_last, opt.window);
            const auto bw = stats::running_average(g.best_worst, opt.window);
            for (std::size_t i = 0; i < g.first_last.size(); ++i) {
              t.gaps.add(model, group, opt.metric, g.first_last.steps[i], g.first_last.values[i],
                         g.best_worst.values[i], fl.values[i], bw.values[i]);
            }
          },
          [&](const Error&) {});
    }

    // Cointegration across the configurations of each task.
    std::map<std::string, std::vector<std::string>> suites_by_task;
    for (const auto& r : rows) {
      if (r.model != model) continue;
      auto& v = suites_by_task[r.task];
      if (std::find(v.begin(), v.end(), r.suite) == v.end()) v.push_back(r.suite);
    }
    for (const auto& [task, names] : suites_by_task) {
      if (names.size() < 2) continue;
      std::vector<stats::TimeSeries> group;
      for (const auto& n : names) group.push_back(series.at(n));
      guard(
          "johansen " + task,
          [&] {
            if (names.size() > 6) fail(ErrorCode::InsufficientData, "more than 6 series");
            const auto res = stats::johansen_trace(group, opt.lag_order, opt.det_case, cv);
            for (std::size_t r = 0; r < res.trace_stats.size(); ++r) {
              const auto& c = res.critical_values[r];
              t.johansen.add(model, task, opt.metric, names.size(), res.t_eff, r, res.eigenvalues[r],
                             res.trace_stats[r], c[0], c[1], c[2], static_cast<bool>(res.reject_at_95[r]), "ok");
            }
          },
          [&](const Error& e) {
            t.johansen.add(model, task, opt.metric, names.size(), std::size_t{0}, std::string(), std::nan(""),
                           std::nan(""), std::nan(""), std::nan(""), std::nan(""), std::string(),
                           detail::skip_status(e));
          });
    }
  }

  // Scaling: best checkpoint per model against model size, per suite.
  std::map<std::string, std::map<std::string, std::pair<double, double>>> best;  // suite -> model -> (N, perf)
  for (const auto& r : rows) {
    if (r.params <= 0.0) continue;
    auto [it, fresh] = best[r.suite].try_emplace(r.model, r.params, r.metric(opt.metric));
    if (!fresh) it->second.second = std::max(it->second.second, r.metric(opt.metric));
  }
  for (const auto& [suite, per_model] : best) {
    std::vector<double> n, perf;
    for (const auto& [model, point] : per_model) {
      n.push_back(point.first);
      perf.push_back(point.second);
    }
    for (auto form : {stats::ScalingForm::Power, stats::ScalingForm::Saturating}) {
      const std::string form_name(stats::scaling_form_name(form));
      guard(
          "scaling " + suite,
          [&] {
            const auto fit = stats::fit_power_law(n, perf, form);
            t.scaling.add(suite, opt.metric, form_name, n.size(), fit.a, fit.b,
                          form == stats::ScalingForm::Power ? std::nan("") : fit.c, fit.r_squared, fit.iterations, "ok");
          },
          [&](const Error& e) {
            t.scaling.add(suite, opt.metric, form_name, n.size(), std::nan(""), std::nan(""), std::nan(""),
                          std::nan(""), 0, detail::skip_status(e));
          });
    }
  }
  return t;
}

}  // namespace iclprobe
