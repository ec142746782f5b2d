#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "iclprobe/analysis.hpp"
#include "iclprobe/rng.hpp"
#include "iclprobe/stats/correlation.hpp"
#include "iclprobe/stats/scaling.hpp"
#include "iclprobe/stats/timeseries.hpp"

using namespace iclprobe;
using namespace iclprobe::stats;
using Catch::Approx;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Malformed;
}

// Textbook formula in long double, one pass over raw sums.
double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

// Rank by counting smaller and equal values.
std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

// Two-sided tail of Student t by composite Simpson integration of the density.
double t_two_sided(double t, double df) {
  const double norm = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double x) { return norm * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int steps = 20000;
  const double h = t / steps;
  double s = f(0) + f(t);
  for (int i = 1; i < steps; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * s * h / 3.0;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  for (auto& x : v) x = ties ? std::round(rng.normal() * 3) : rng.normal() * 10 + 4;
  return v;
}

}  // namespace

TEST_CASE("pearson on small examples") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(pearson(x, std::vector<double>{2, 4, 6, 8, 10}).r == Approx(1.0).margin(1e-15));
  CHECK(pearson(x, std::vector<double>{5, 4, 3, 2, 1}).r == Approx(-1.0).margin(1e-15));
  CHECK(pearson(x, std::vector<double>{5, 4, 3, 2, 1}).p_value == 0.0);
  CHECK(pearson(x, std::vector<double>{1, 3, 2, 5, 4}).r == Approx(0.8).margin(1e-15));
}

TEST_CASE("spearman on small examples") {
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}).r == Approx(0.8).margin(1e-15));
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 10, 100, 1000}).r == Approx(1.0));
  CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
}

TEST_CASE("correlations match brute-force references on random vectors") {
  Rng rng(20240611);
  for (int trial = 0; trial < 50; ++trial) {
    const bool ties = trial % 2 == 1;
    const auto x = random_vector(rng, 51, ties);
    auto y = random_vector(rng, 51, ties);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.3 * x[i];
    CHECK(std::abs(pearson(x, y).r - naive_pearson(x, y)) < 1e-10);
    CHECK(std::abs(spearman(x, y).r - naive_pearson(counting_ranks(x), counting_ranks(y))) < 1e-10);
    if (!ties) {
      double d2 = 0;
      const auto rx = counting_ranks(x), ry = counting_ranks(y);
      for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
      CHECK(std::abs(spearman(x, y).r - (1 - 6 * d2 / (51.0 * (51 * 51 - 1)))) < 1e-10);
    }
  }
}

TEST_CASE("correlation symmetry and affine invariance") {
  Rng rng(5);
  const auto x = random_vector(rng, 30, false);
  const auto y = random_vector(rng, 30, false);
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = 3 * x[i] + 7;
  CHECK(pearson(x, y).r == Approx(pearson(y, x).r).margin(1e-15));
  CHECK(pearson(z, y).r == Approx(pearson(x, y).r).margin(1e-13));
  CHECK(spearman(z, y).r == Approx(spearman(x, y).r).margin(1e-15));
}

TEST_CASE("p-value agrees with integrated t density") {
  const double r = 0.5;
  const double t = r * std::sqrt(10.0 / (1 - r * r));
  const double reference = t_two_sided(t, 10.0);
  CHECK(std::abs(reference - 0.0979) < 1e-3);
  CHECK(std::abs(correlation_p_value(0.5, 12) - reference) < 1e-9);
  CHECK(correlation_p_value(0.0, 12) == Approx(1.0));
  CHECK(correlation_p_value(-0.5, 12) == Approx(correlation_p_value(0.5, 12)));
  for (double rr : {0.1, 0.3, 0.7, 0.95}) {
    const double tt = rr * std::sqrt(25.0 / (1 - rr * rr));
    CHECK(correlation_p_value(rr, 27) == Approx(t_two_sided(tt, 25.0)).margin(1e-9));
  }
}

TEST_CASE("correlation errors") {
  const std::vector<double> x{1, 2, 3};
  CHECK(code_of([&] { pearson(x, std::vector<double>{1, 2}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }) == ErrorCode::InsufficientData);
  CHECK(code_of([&] { pearson(x, std::vector<double>{4, 4, 4}); }) == ErrorCode::DegenerateVariance);
  CHECK(code_of([&] { spearman(x, std::vector<double>{4, 4, 4}); }) == ErrorCode::DegenerateVariance);
  CHECK(code_of([&] { pearson(x, std::vector<double>{1, NAN, 3}); }) == ErrorCode::NonFinite);
}

TEST_CASE("running average") {
  const auto impulse = TimeSeries::from({0, 1, 2, 3, 4}, {0, 0, 5, 0, 0});
  const auto s = running_average(impulse, 5);
  CHECK(s.values[2] == Approx(1.0));
  CHECK(s.values[0] == Approx(5.0 / 3));
  CHECK(s.steps == impulse.steps);

  const auto edge = TimeSeries::from({0, 1, 2, 3, 4, 5, 6}, {6, 0, 0, 0, 0, 0, 0});
  CHECK(running_average(edge, 5).values[0] == Approx(2.0));
  CHECK(running_average(edge, 1) == edge);

  const auto constant = TimeSeries::from({1, 2, 3, 4}, {0.25, 0.25, 0.25, 0.25});
  for (double v : running_average(constant, 3).values) CHECK(v == Approx(0.25));

  CHECK(code_of([&] { running_average(edge, 4); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { running_average(edge, 0); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { TimeSeries::from({1, 1}, {0, 0}); }) == ErrorCode::MismatchedGrid);
  CHECK(code_of([] { TimeSeries::from({1, 2}, {0}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("gap series") {
  std::map<int, TimeSeries> by_range{
      {0, TimeSeries::from({10, 20}, {0.9, 0.8})},
      {100, TimeSeries::from({10, 20}, {0.2, 0.95})},
      {200, TimeSeries::from({10, 20}, {0.5, 0.6})},
  };
  const auto g = gap_series(by_range);
  CHECK(g.first_last.values[0] == Approx(0.4));
  CHECK(g.first_last.values[1] == Approx(0.2));
  CHECK(g.best_worst.values[0] == Approx(0.7));
  CHECK(g.best_worst.values[1] == Approx(0.35));
  CHECK(g.first_last.steps == std::vector<std::int64_t>{10, 20});

  by_range[300] = TimeSeries::from({10, 30}, {0, 0});
  CHECK(code_of([&] { gap_series(by_range); }) == ErrorCode::MismatchedGrid);
  CHECK(code_of([] { gap_series(std::map<int, TimeSeries>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("power fit recovers planted exponent") {
  std::vector<double> n, perf;
  for (double e = 6; e <= 10; e += 0.5) {
    n.push_back(std::pow(10.0, e));
    perf.push_back(2 * std::pow(n.back(), 0.5));
  }
  const auto fit = fit_power(n, perf);
  CHECK(std::abs(fit.a - 2) < 1e-10);
  CHECK(std::abs(fit.b - 0.5) < 1e-10);
  CHECK(fit.r_squared == Approx(1.0));
  CHECK(fit.predict(1e8) == Approx(2e4));

  const auto flat = fit_power(n, std::vector<double>(n.size(), 0.4));
  CHECK(std::abs(flat.b) < 1e-12);
  CHECK(flat.a == Approx(0.4));

  Rng rng(11);
  for (auto& p : perf) p *= std::exp(0.05 * rng.normal());
  const auto noisy = fit_power(n, perf);
  // Least-squares residuals in log space are orthogonal to 1 and log N.
  double r1 = 0, rx = 0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double res = std::log(perf[i]) - std::log(noisy.a) - noisy.b * std::log(n[i]);
    r1 += res;
    rx += res * std::log(n[i]);
  }
  CHECK(std::abs(r1) < 1e-10);
  CHECK(std::abs(rx) < 1e-8);
}

TEST_CASE("saturating fit recovers planted parameters") {
  for (auto [c, a, b] : {std::tuple{0.9, 5.0, -0.3}, std::tuple{1.0, 40.0, -0.25}, std::tuple{0.5, 1e-4, 0.2}}) {
    std::vector<double> n, perf;
    for (double e = 6; e <= 10; e += 0.4) {
      n.push_back(std::pow(10.0, e));
      perf.push_back(c - a * std::pow(n.back(), b));
    }
    const auto fit = fit_saturating(n, perf);
    CHECK(std::abs(fit.c - c) < 1e-6);
    CHECK(std::abs(fit.a - a) / a < 1e-6);
    CHECK(std::abs(fit.b - b) < 1e-6);
    CHECK(fit.iterations <= 200);
    CHECK(fit.r_squared == Approx(1.0));
  }
}

TEST_CASE("scaling fit errors") {
  const std::vector<double> n{1e6, 1e7, 1e8};
  CHECK(code_of([&] { fit_power(n, std::vector<double>{0.1, 0.2}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { fit_power(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }) ==
        ErrorCode::InsufficientData);
  CHECK(code_of([&] { fit_power(n, std::vector<double>{0.1, 0.0, 0.3}); }) == ErrorCode::NonPositiveInput);
  CHECK(code_of([&] { fit_power(std::vector<double>{1e6, -1, 1e8}, std::vector<double>{0.1, 0.2, 0.3}); }) ==
        ErrorCode::NonPositiveInput);
  CHECK(code_of([&] { fit_power(std::vector<double>{5, 5, 5}, std::vector<double>{0.1, 0.2, 0.3}); }) ==
        ErrorCode::DegenerateVariance);
  CHECK(code_of([&] { fit_saturating(n, std::vector<double>{0.1, INFINITY, 0.3}); }) == ErrorCode::NonFinite);
  CHECK(fit_saturating(n, std::vector<double>{0.3, 0.3, 0.3}).c == 0.3);
}

namespace {

CellRow cell(std::string model, std::string suite, std::string group, std::int64_t step, double acc,
             std::optional<std::pair<TokenId, TokenId>> range = {}, double params = 0) {
  CellRow r;
  r.model = std::move(model);
  r.suite = std::move(suite);
  r.task = "lsc";
  r.group = std::move(group);
  r.step = step;
  r.accuracy = acc;
  r.mean_logprob = -acc;
  r.range = range;
  r.params = params;
  return r;
}

std::size_t column(const CsvTable& t, const std::string& name) { return t.column(name); }

}  // namespace

TEST_CASE("compute_stats over synthetic cells") {
  const auto cv = load_critical_values(DataAssets{}.critical_values_path());
  std::vector<CellRow> rows;
  for (int k = 0; k < 5; ++k) {
    const TokenId lo = 1000 * k;
    for (std::int64_t step : {100, 200, 300}) {
      rows.push_back(cell("m", "r" + std::to_string(k), "g", step, 0.9 - 0.1 * k - 0.01 * static_cast<double>(step) / 100,
                          std::pair{lo, lo + 1000}, 1e8));
    }
  }
  const auto t = compute_stats(rows, cv);
  CHECK(t.failures.empty());
  REQUIRE(t.correlations.size() == 6);  // 3 steps x 2 methods
  const auto r_col = column(t.correlations, "r");
  const auto status_col = column(t.correlations, "status");
  for (const auto& row : t.correlations.rows()) {
    CHECK(std::stod(row[r_col]) == Approx(-1.0));
    CHECK(row[status_col] == "ok");
  }
  REQUIRE(t.gaps.size() == 3);
  CHECK(std::stod(t.gaps.rows()[0][column(t.gaps, "first_last")]) == Approx(0.4));
  // Johansen on 5 series of length 3 is too short: reported, not failed.
  REQUIRE(t.johansen.size() == 1);
  CHECK(t.johansen.rows()[0][column(t.johansen, "status")] == "skipped: InsufficientLength");
  // One model means one point per suite: scaling is skipped.
  for (const auto& row : t.scaling.rows()) CHECK(row[column(t.scaling, "status")].rfind("skipped", 0) == 0);
}

TEST_CASE("compute_stats scaling across models") {
  const auto cv = load_critical_values(DataAssets{}.critical_values_path());
  std::vector<CellRow> rows;
  for (double e : {7.0, 8.0, 9.0, 10.0}) {
    const double n = std::pow(10.0, e);
    const std::string model = "m" + std::to_string(static_cast<int>(e));
    rows.push_back(cell(model, "s", "g", 1, 0.1, {}, n));
    rows.push_back(cell(model, "s", "g", 2, 3e-3 * std::pow(n, 0.25), {}, n));
  }
  const auto t = compute_stats(rows, cv);
  REQUIRE(t.scaling.size() == 2);
  const auto& power = t.scaling.rows()[0];
  CHECK(power[column(t.scaling, "form")] == "power");
  CHECK(std::stod(power[column(t.scaling, "b")]) == Approx(0.25));
  CHECK(std::stod(power[column(t.scaling, "a")]) == Approx(3e-3));
  CHECK(std::stoi(power[column(t.scaling, "n_points")]) == 4);
}
