#pragma once

// Brute-force reference computations used as test oracles. Everything here is
// written from the defining sums with plain loops and shares no code with the
// library paths it checks.

#include "mixlab/random.hpp"
#include "mixlab/ssm.hpp"
#include "mixlab/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace oracle {

using mixlab::Matrix;
using mixlab::Vector;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * x(k);
    out(i) = s;
  }
  return out;
}

// Rank via one-sided Jacobi SVD, a different algorithm from the library's.
inline int rank(const Matrix& m, double tol = 1e-6) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > tol * s(0) ? 1 : 0;
  return r;
}

inline double dot_rows(const Matrix& c, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < c.cols(); ++k) s += c(i, k) * b(j, k);
  return s;
}

// Product a[lo] * ... * a[hi], 1 when the range is empty.
inline double prod(const Vector& a, Eigen::Index lo, Eigen::Index hi) {
  double p = 1.0;
  for (Eigen::Index k = lo; k <= hi; ++k) p *= a(k);
  return p;
}

// Forward semiseparable matrix: m_ij = c_i.b_j * a[j+1..i] for i >= j.
inline Matrix ssm_matrix(const mixlab::ScanParams& p) {
  const Eigen::Index t = p.length();
  Matrix m = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) m(i, j) = dot_rows(p.c, i, p.b, j) * prod(p.a, j + 1, i);
  }
  return m;
}

// Backward parameters in time order (entry t belongs to position t).
inline mixlab::ScanParams time_order(const mixlab::ScanParams& scan_order) {
  const Eigen::Index t = scan_order.length();
  mixlab::ScanParams out = scan_order;
  for (Eigen::Index i = 0; i < t; ++i) {
    out.a(i) = scan_order.a(t - 1 - i);
    out.delta(i) = scan_order.delta(t - 1 - i);
    out.b.row(i) = scan_order.b.row(t - 1 - i);
    out.c.row(i) = scan_order.c.row(t - 1 - i);
  }
  return out;
}

// Upper-triangular backward matrix: m_ij = c_i.b_j * a[i..j-1] for i <= j,
// with time-ordered parameters.
inline Matrix backward_matrix(const mixlab::ScanParams& bt) {
  const Eigen::Index t = bt.length();
  Matrix m = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = i; j < t; ++j) m(i, j) = dot_rows(bt.c, i, bt.b, j) * prod(bt.a, i, j - 1);
  }
  return m;
}

inline Matrix bimamba_matrix(const mixlab::ScanParams& fwd, const mixlab::ScanParams& bwd_scan_order) {
  return ssm_matrix(fwd) + backward_matrix(time_order(bwd_scan_order));
}

inline Matrix hydra_matrix(const mixlab::ScanParams& fwd, const mixlab::ScanParams& bwd_scan_order,
                           const Vector& diag) {
  const mixlab::ScanParams bt = time_order(bwd_scan_order);
  const Eigen::Index t = fwd.length();
  Matrix m = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) {
      if (i > j) {
        m(i, j) = dot_rows(fwd.c, i - 1, fwd.b, j) * prod(fwd.a, j + 1, i - 1);
      } else if (i == j) {
        m(i, j) = diag(i);
      } else {
        m(i, j) = dot_rows(bt.c, i + 1, bt.b, j) * prod(bt.a, i + 1, j - 1);
      }
    }
  }
  return m;
}

// Scan parameters drawn directly from std distributions: a in (0, 1], b and c
// Gaussian with a per-instance scale between 0.1 and 10.
inline mixlab::ScanParams random_params(mixlab::CounterRng& rng, Eigen::Index t, Eigen::Index n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale_b = std::pow(10.0, 2.0 * unit(rng) - 1.0);
  const double scale_c = std::pow(10.0, 2.0 * unit(rng) - 1.0);
  mixlab::ScanParams p;
  p.a.resize(t);
  p.delta.resize(t);
  p.b.resize(t, n);
  p.c.resize(t, n);
  for (Eigen::Index i = 0; i < t; ++i) {
    p.a(i) = 1.0 - unit(rng);
    p.delta(i) = 0.01 + unit(rng);
    for (Eigen::Index k = 0; k < n; ++k) {
      p.b(i, k) = scale_b * gauss(rng);
      p.c(i, k) = scale_c * gauss(rng);
    }
  }
  return p;
}

inline Matrix random_matrix(mixlab::CounterRng& rng, Eigen::Index rows, Eigen::Index cols,
                            double stddev = 1.0) {
  std::normal_distribution<double> gauss(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  }
  return m;
}

inline Vector random_vector(mixlab::CounterRng& rng, Eigen::Index n, double stddev = 1.0) {
  return random_matrix(rng, n, 1, stddev).col(0);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace oracle
