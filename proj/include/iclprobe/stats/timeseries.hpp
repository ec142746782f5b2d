// Step-indexed series, centered smoothing and performance-gap series.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iclprobe/common.hpp"

namespace iclprobe::stats {

struct TimeSeries {
  std::vector<std::int64_t> steps;  // strictly increasing
  std::vector<double> values;

  std::size_t size() const noexcept { return steps.size(); }

  static TimeSeries from(std::vector<std::int64_t> steps, std::vector<double> values) {
    TimeSeries s{std::move(steps), std::move(values)};
    s.check();
    return s;
  }

  void check() const {
    if (steps.size() != values.size()) fail(ErrorCode::DimensionMismatch, "series steps and values differ in length");
    for (std::size_t i = 1; i < steps.size(); ++i) {
      if (steps[i] <= steps[i - 1]) fail(ErrorCode::MismatchedGrid, "series steps must be strictly increasing");
    }
  }

  bool operator==(const TimeSeries&) const = default;
};

/// Centered running mean. Windows near the edges are truncated to the points
/// that exist rather than padded.
inline TimeSeries running_average(const TimeSeries& series, int window) {
  if (window < 1 || window % 2 == 0) fail(ErrorCode::InvalidConfig, "window must be a positive odd integer");
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  TimeSeries out{series.steps, std::vector<double>(series.values.size())};
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, i - half);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, i + half);
    double sum = 0.0;
    for (auto j = lo; j <= hi; ++j) sum += series.values[static_cast<std::size_t>(j)];
    out.values[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

struct GapSeries {
  TimeSeries first_last;
  TimeSeries best_worst;
};

/// Series keyed by range; the map order defines "first" and "last".
template <typename Key>
GapSeries gap_series(const std::map<Key, TimeSeries>& by_range) {
  if (by_range.empty()) fail(ErrorCode::EmptyInput, "gap series needs at least one range");
  const auto& grid = by_range.begin()->second.steps;
  for (const auto& [key, s] : by_range) {
    s.check();
    if (s.steps != grid) fail(ErrorCode::MismatchedGrid, "all ranges must share the same step grid");
  }
  const auto& first = by_range.begin()->second.values;
  const auto& last = by_range.rbegin()->second.values;
  GapSeries g{{grid, std::vector<double>(grid.size())}, {grid, std::vector<double>(grid.size())}};
  for (std::size_t t = 0; t < grid.size(); ++t) {
    double lo = first[t], hi = first[t];
    for (const auto& [key, s] : by_range) {
      lo = std::min(lo, s.values[t]);
      hi = std::max(hi, s.values[t]);
    }
    g.first_last.values[t] = first[t] - last[t];
    g.best_worst.values[t] = hi - lo;
  }
  return g;
}

}  // namespace iclprobe::stats
