// Johansen trace test for cointegration among k series.
//
// The vector error-correction model
//     dY_t = Pi Y_{t-k} + sum_{i=1..p} G_i dY_{t-i} + mu + e_t
// is concentrated by regressing dY_t and the lagged levels on the lagged
// differences (and a constant for the CONSTANT case). The squared canonical
// correlations between the two residual sets are the eigenvalues of
// S_kk^{-1} S_k0 S_00^{-1} S_0k, and the trace statistic for rank r is
// -T * sum_{i>r} ln(1 - lambda_i).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iclprobe/assets.hpp"
#include "iclprobe/common.hpp"
#include "iclprobe/stats/timeseries.hpp"

namespace iclprobe::stats {

enum class DetCase { NoDet, Constant };

inline std::string_view det_case_name(DetCase c) { return c == DetCase::NoDet ? "no_det" : "constant"; }

inline DetCase parse_det_case(std::string_view name) {
  if (name == "no_det" || name == "NO_DET" || name == "none") return DetCase::NoDet;
  if (name == "constant" || name == "CONSTANT") return DetCase::Constant;
  fail(ErrorCode::InvalidConfig, "unknown deterministic case " + std::string(name));
}

/// Asymptotic trace critical values keyed by (k - r, case).
class CriticalValueTable {
 public:
  using Row = std::array<double, 3>;  // 90%, 95%, 99%

  void set(int k_minus_r, DetCase c, Row row) { rows_[{k_minus_r, c}] = row; }

  const Row& at(int k_minus_r, DetCase c) const {
    auto it = rows_.find({k_minus_r, c});
    if (it == rows_.end()) {
      fail(ErrorCode::OutOfRange, "no critical values for k-r=" + std::to_string(k_minus_r) + " case " +
                                      std::string(det_case_name(c)));
    }
    return it->second;
  }

 private:
  std::map<std::pair<int, DetCase>, Row> rows_;
};

inline CriticalValueTable load_critical_values(const std::string& path) {
  const auto rows = detail::read_csv(path);
  const std::vector<std::string> header{"k_minus_r", "det_case", "cv90", "cv95", "cv99"};
  if (rows.empty() || rows.front() != header) fail(ErrorCode::Malformed, path + ": unexpected header");
  CriticalValueTable table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) fail(ErrorCode::Malformed, path + ": line " + std::to_string(i + 1));
    try {
      table.set(std::stoi(r[0]), parse_det_case(r[1]), {std::stod(r[2]), std::stod(r[3]), std::stod(r[4])});
    } catch (const std::logic_error&) {
      fail(ErrorCode::Malformed, path + ": line " + std::to_string(i + 1));
    }
  }
  return table;
}

struct JohansenResult {
  std::vector<double> eigenvalues;  // descending
  std::vector<double> trace_stats;  // per hypothesised rank r = 0..k-1
  std::vector<CriticalValueTable::Row> critical_values;
  std::vector<bool> reject_at_95;
  std::size_t t_eff = 0;
  int lag_order = 1;
  DetCase det_case = DetCase::Constant;

  /// Number of leading ranks rejected at 95%, i.e. the estimated rank.
  int rank_at_95() const {
    int r = 0;
    while (r < static_cast<int>(reject_at_95.size()) && reject_at_95[static_cast<std::size_t>(r)]) ++r;
    return r;
  }
};

namespace detail {

inline void demean(Eigen::MatrixXd& m) {
  if (m.rows() == 0) return;
  m.rowwise() -= m.colwise().mean();
}

inline Eigen::MatrixXd residualize(const Eigen::MatrixXd& y, const Eigen::MatrixXd& z) {
  if (z.cols() == 0) return y;
  const Eigen::MatrixXd beta = z.colPivHouseholderQr().solve(y);
  return y - z * beta;
}

}  // namespace detail

/// `data` holds one column per series and one row per time point.
/// `lag_order` is the number of lagged differences in the model.
inline JohansenResult johansen_trace(const Eigen::MatrixXd& data, int lag_order, DetCase det_case,
                                     const CriticalValueTable& table) {
  const auto k = static_cast<int>(data.cols());
  if (k < 2 || k > 6) fail(ErrorCode::InvalidConfig, "johansen needs between 2 and 6 series, got " + std::to_string(k));
  if (lag_order < 0) fail(ErrorCode::InvalidConfig, "lag order must be nonnegative");
  if (!data.allFinite()) fail(ErrorCode::NonFinite, "johansen input is not finite");
  const auto n = static_cast<int>(data.rows());
  const int t_eff = n - 1 - lag_order;
  if (t_eff < 10 * k) {
    fail(ErrorCode::InsufficientLength, "johansen needs at least " + std::to_string(10 * k) +
                                            " observations after lagging, have " + std::to_string(std::max(t_eff, 0)));
  }

  const Eigen::MatrixXd dx = data.bottomRows(n - 1) - data.topRows(n - 1);
  Eigen::MatrixXd dy = dx.bottomRows(t_eff);
  Eigen::MatrixXd z(t_eff, k * lag_order);
  for (int i = 1; i <= lag_order; ++i) z.middleCols((i - 1) * k, k) = dx.middleRows(lag_order - i, t_eff);
  // Levels enter at lag max(lag_order, 1) behind the differenced observation.
  Eigen::MatrixXd lv = lag_order == 0 ? Eigen::MatrixXd(data.topRows(t_eff)) : Eigen::MatrixXd(data.middleRows(1, t_eff));
  if (det_case == DetCase::Constant) {
    detail::demean(dy);
    detail::demean(z);
    detail::demean(lv);
  }
  const Eigen::MatrixXd r0 = detail::residualize(dy, z);
  const Eigen::MatrixXd rk = detail::residualize(lv, z);
  const double t = static_cast<double>(t_eff);
  const Eigen::MatrixXd s00 = r0.transpose() * r0 / t;
  const Eigen::MatrixXd sk0 = rk.transpose() * r0 / t;
  const Eigen::MatrixXd skk = rk.transpose() * rk / t;

  Eigen::LDLT<Eigen::MatrixXd> s00_ldlt(s00);
  Eigen::LLT<Eigen::MatrixXd> skk_llt(skk);
  const double scale = std::max(s00.diagonal().maxCoeff(), skk.diagonal().maxCoeff());
  if (skk_llt.info() != Eigen::Success || s00_ldlt.info() != Eigen::Success || !(scale > 0.0) ||
      s00_ldlt.vectorD().minCoeff() <= 1e-14 * s00.diagonal().maxCoeff()) {
    fail(ErrorCode::SingularMatrix, "residual moment matrix is singular");
  }
  const Eigen::MatrixXd l = skk_llt.matrixL();
  if (l.diagonal().cwiseAbs().minCoeff() <= 1e-7 * std::sqrt(skk.diagonal().maxCoeff())) {
    fail(ErrorCode::SingularMatrix, "level moment matrix is singular");
  }
  // L^{-1} S_k0 S_00^{-1} S_0k L^{-T} is symmetric and similar to the target.
  const Eigen::MatrixXd a = l.triangularView<Eigen::Lower>().solve(sk0);
  Eigen::MatrixXd m = a * s00_ldlt.solve(a.transpose());
  m = (m + m.transpose()).eval() * 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorCode::SingularMatrix, "eigenproblem did not converge");

  JohansenResult res;
  res.t_eff = static_cast<std::size_t>(t_eff);
  res.lag_order = lag_order;
  res.det_case = det_case;
  for (int i = k - 1; i >= 0; --i) {
    res.eigenvalues.push_back(std::clamp(eig.eigenvalues()[i], 0.0, std::nextafter(1.0, 0.0)));
  }
  for (int r = 0; r < k; ++r) {
    double sum = 0.0;
    for (int i = r; i < k; ++i) sum += std::log1p(-res.eigenvalues[static_cast<std::size_t>(i)]);
    res.trace_stats.push_back(-t * sum);
    const auto& cv = table.at(k - r, det_case);
    res.critical_values.push_back(cv);
    res.reject_at_95.push_back(res.trace_stats.back() > cv[1]);
  }
  return res;
}

inline JohansenResult johansen_trace(const std::vector<TimeSeries>& series, int lag_order, DetCase det_case,
                                     const CriticalValueTable& table) {
  if (series.empty()) fail(ErrorCode::EmptyInput, "johansen needs series");
  for (const auto& s : series) {
    s.check();
    if (s.steps != series.front().steps) fail(ErrorCode::MismatchedGrid, "series must share a step grid");
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(series.front().size()), static_cast<Eigen::Index>(series.size()));
  for (std::size_t j = 0; j < series.size(); ++j) {
    for (std::size_t i = 0; i < series[j].size(); ++i) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = series[j].values[i];
    }
  }
  return johansen_trace(data, lag_order, det_case, table);
}

}  // namespace iclprobe::stats
