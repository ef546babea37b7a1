#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"

namespace steinflow::lp {

struct Solution {
  double objective = 0.0;
  Vector x;
  int pivots = 0;
};

/// maximize c.x  s.t.  A x <= b,  x >= 0, with b >= 0 so the origin is a
/// feasible start. Dense condensed-tableau simplex with Bland's rule, so it
/// terminates on the heavily degenerate programs the BL distance produces.
/// Throws if the program is unbounded.
inline Solution maximize(const Matrix& A, const Vector& b, const Vector& c, double tol = 1e-12) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (b.size() != m || c.size() != n) throw ContractViolation("lp: inconsistent dimensions");
  if ((b.array() < 0.0).any()) throw ContractViolation("lp: origin must be feasible (b >= 0)");

  // Row i < m: basic_i = T(i, n) - sum_j T(i, j) nonbasic_j.
  // Row m:     z       = T(m, n) - sum_j T(m, j) nonbasic_j.
  Matrix T(m + 1, n + 1);
  T.topLeftCorner(m, n) = A;
  T.topRightCorner(m, 1) = b;
  T.bottomLeftCorner(1, n) = -c.transpose();
  T(m, n) = 0.0;

  std::vector<Eigen::Index> nonbasic(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> basic(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < n; ++j) nonbasic[static_cast<std::size_t>(j)] = j;
  for (Eigen::Index i = 0; i < m; ++i) basic[static_cast<std::size_t>(i)] = n + i;

  Solution out;
  for (;;) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (T(m, j) < -tol && (enter < 0 || nonbasic[static_cast<std::size_t>(j)] < nonbasic[static_cast<std::size_t>(enter)])) {
        enter = j;
      }
    }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = T(i, enter);
      if (a <= tol) continue;
      const double ratio = T(i, n) / a;
      if (leave < 0 || ratio < best - tol) {
        best = ratio;
        leave = i;
      } else if (ratio <= best + tol && basic[static_cast<std::size_t>(i)] < basic[static_cast<std::size_t>(leave)]) {
        best = std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) throw Error("lp: objective is unbounded");

    const double pivot = T(leave, enter);
    const Vector pivot_col = T.col(enter);
    T.row(leave) /= pivot;
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave || pivot_col[i] == 0.0) continue;
      T.row(i) -= pivot_col[i] * T.row(leave);
    }
    T.col(enter) = -pivot_col / pivot;
    T(leave, enter) = 1.0 / pivot;
    std::swap(basic[static_cast<std::size_t>(leave)], nonbasic[static_cast<std::size_t>(enter)]);
    ++out.pivots;
  }

  out.objective = T(m, n);
  out.x = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index label = basic[static_cast<std::size_t>(i)];
    if (label < n) out.x[label] = T(i, n);
  }
  return out;
}

}  // namespace steinflow::lp
