// Thin SVD by one-sided (Hestenes) Jacobi rotations.
//
// Tall inputs are first reduced with a Householder QR so the rotations work
// on a square factor. Signs are fixed so the first non-negligible entry of
// every row of Vh is positive, which makes results reproducible.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "iclprobe/common.hpp"

namespace iclprobe::suda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SvdFactors {
  Matrix u;   // rows x m
  Vector s;   // m, descending
  Matrix vh;  // m x cols

  Eigen::Index rank_dim() const { return s.size(); }
  Matrix reconstruct() const { return u * s.asDiagonal() * vh; }
};

namespace detail {

/// Columns of `a` are rotated until mutually orthogonal; `v` accumulates the
/// rotations. Requires a.rows() >= a.cols().
inline void hestenes(Matrix& a, Matrix& v) {
  const Eigen::Index n = a.cols();
  v = Matrix::Identity(n, n);
  constexpr double eps = 2.220446049250313e-16;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
}

/// Completes the columns flagged in `missing` to an orthonormal set.
inline void complete_basis(Matrix& u, const std::vector<bool>& missing) {
  Eigen::Index next_axis = 0;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    if (!missing[static_cast<std::size_t>(j)]) continue;
    while (next_axis < u.rows()) {
      Vector cand = Vector::Unit(u.rows(), next_axis++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < u.cols(); ++k) {
          if (k == j || (missing[static_cast<std::size_t>(k)] && k > j)) continue;
          cand -= u.col(k).dot(cand) * u.col(k);
        }
      }
      const double norm = cand.norm();
      if (norm > 1e-8) {
        u.col(j) = cand / norm;
        break;
      }
    }
  }
}

/// SVD of a matrix with rows >= cols.
inline SvdFactors svd_tall(const Matrix& w) {
  const Eigen::Index m = w.rows();
  const Eigen::Index n = w.cols();
  Matrix q;
  Matrix a;
  const bool precondition = m > 2 * n;
  if (precondition) {
    Eigen::HouseholderQR<Matrix> qr(w);
    a = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    q = qr.householderQ() * Matrix::Identity(m, n);
  } else {
    a = w;
  }
  Matrix v;
  hestenes(a, v);

  Vector sigma(n);
  for (Eigen::Index j = 0; j < n; ++j) sigma(j) = a.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return sigma(x) > sigma(y); });

  const double tol = (sigma.size() ? sigma.maxCoeff() : 0.0) * static_cast<double>(std::max(m, n)) * 2.220446049250313e-16;
  SvdFactors f{Matrix(a.rows(), n), Vector(n), Matrix(n, n)};
  std::vector<bool> missing(static_cast<std::size_t>(n), false);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index j = order[static_cast<std::size_t>(k)];
    f.s(k) = sigma(j);
    f.vh.row(k) = v.col(j).transpose();
    if (sigma(j) > tol && sigma(j) > 0.0) {
      f.u.col(k) = a.col(j) / sigma(j);
    } else {
      f.u.col(k).setZero();
      missing[static_cast<std::size_t>(k)] = true;
    }
  }
  complete_basis(f.u, missing);
  if (precondition) f.u = q * f.u;
  return f;
}

inline void fix_signs(SvdFactors& f) {
  for (Eigen::Index k = 0; k < f.vh.rows(); ++k) {
    for (Eigen::Index j = 0; j < f.vh.cols(); ++j) {
      const double v = f.vh(k, j);
      if (std::abs(v) > 1e-10) {
        if (v < 0.0) {
          f.vh.row(k) *= -1.0;
          f.u.col(k) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace detail

/// Thin SVD W = U diag(S) Vh with m = min(rows, cols).
inline SvdFactors svd(const Matrix& w) {
  if (w.rows() < 1 || w.cols() < 1) fail(ErrorCode::DimensionMismatch, "svd needs a nonempty matrix");
  if (!w.allFinite()) fail(ErrorCode::NonFinite, "svd input has non-finite entries");
  SvdFactors f;
  if (w.rows() >= w.cols()) {
    f = detail::svd_tall(w);
  } else {
    auto t = detail::svd_tall(w.transpose());
    f.u = t.vh.transpose();
    f.s = t.s;
    f.vh = t.u.transpose();
  }
  detail::fix_signs(f);
  return f;
}

}  // namespace iclprobe::suda
