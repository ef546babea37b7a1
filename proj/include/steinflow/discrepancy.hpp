#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steinflow/drift.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/lp.hpp"
#include "steinflow/targets.hpp"

namespace steinflow {

// --- kernelized Stein discrepancy ------------------------------------------

/// kappa_p(x, y) = s(x).s(y) k + s(x).grad_y k + s(y).grad_x k + tr grad_x grad_y k
inline double stein_kernel(const Target& target, const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                           const Eigen::Ref<const Vector>& y) {
  if (x.size() != target.dimension() || y.size() != target.dimension()) {
    throw ContractViolation("stein_kernel: point dimension does not match target");
  }
  const Vector sx = target.score(x);
  const Vector sy = target.score(y);
  return sx.dot(sy) * kernel_eval(spec, x, y) + sx.dot(kernel_grad_y(spec, x, y)) +
         sy.dot(kernel_grad_x(spec, x, y)) + kernel_trace_grad_xx(spec, x, y);
}

enum class Estimator { VStat, UStat };

inline std::string_view to_string(Estimator e) { return e == Estimator::VStat ? "VStat" : "UStat"; }

struct DiscrepancyReport {
  double value = 0.0;
  Estimator estimator = Estimator::VStat;
  int n_points = 0;
};

namespace detail {
inline void check_points(const Target& target, const Matrix& points, Eigen::Index min_n, const char* who) {
  if (points.rows() < min_n) {
    throw ContractViolation(std::string(who) + " needs at least " + std::to_string(min_n) + " points");
  }
  if (points.cols() != target.dimension()) throw ContractViolation(std::string(who) + ": dimension mismatch");
}

// Rows in lexicographic order. Summing in this order makes the estimators
// bitwise invariant under permutation of the input.
inline Matrix canonical_order(const Matrix& points) {
  return take_rows(points, lexicographic_order(points, points));
}
}  // namespace detail

/// S(mu_n || p) for the empirical measure of `points`: sqrt of the mean of
/// kappa_p over all ordered pairs, diagonal included.
inline DiscrepancyReport ksd_vstat(const Target& target, const KernelSpec& spec, const Matrix& points) {
  detail::check_points(target, points, 1, "ksd_vstat");
  const Matrix sorted = detail::canonical_order(points);
  const SteinKernelSums sums = stein_kernel_sums(spec, sorted, target.scores(sorted));
  const double n = static_cast<double>(points.rows());
  const double sq = sums.row_sums.sum() / (n * n);
  // Exact value is >= 0; clip only rounding-level negatives.
  return {std::sqrt(std::max(0.0, sq)), Estimator::VStat, static_cast<int>(points.rows())};
}

/// Unbiased variant over i != j, reported as a signed square root.
inline DiscrepancyReport ksd_ustat(const Target& target, const KernelSpec& spec, const Matrix& points) {
  detail::check_points(target, points, 2, "ksd_ustat");
  const Matrix sorted = detail::canonical_order(points);
  const SteinKernelSums sums = stein_kernel_sums(spec, sorted, target.scores(sorted));
  const double n = static_cast<double>(points.rows());
  const double sq = (sums.row_sums.sum() - sums.diagonal.sum()) / (n * (n - 1.0));
  return {std::copysign(std::sqrt(std::abs(sq)), sq), Estimator::UStat, static_cast<int>(points.rows())};
}

/// ||phi*||_H computed by expanding phi* in the kernel sections k(x_j, .) and
/// d/dx_a k(x_j, .) and evaluating the quadratic form of their Gram matrix.
/// Algebraically equal to ksd_vstat; the two are computed independently.
inline double stein_rkhs_norm(const Target& target, const KernelSpec& spec, const Matrix& points) {
  detail::check_points(target, points, 1, "stein_rkhs_norm");
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const Matrix scores = target.scores(points);
  const Eigen::Index blocks = d + 1;
  // Feature order per point j: k(x_j, .), d/dx_1 k(x_j, .), ..., d/dx_d k(x_j, .).
  Matrix gram(n * blocks, n * blocks);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = points.row(i).transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vector xj = points.row(j).transpose();
      const double k = kernel_eval(spec, xi, xj);
      const Vector gx = kernel_grad_x(spec, xi, xj);
      const Vector gy = kernel_grad_y(spec, xi, xj);
      const Matrix gxy = kernel_grad_xy(spec, xi, xj);
      auto block = gram.block(i * blocks, j * blocks, blocks, blocks);
      block(0, 0) = k;
      block.row(0).tail(d) = gy.transpose();
      block.col(0).tail(d) = gx;
      block.bottomRightCorner(d, d) = gxy;
    }
  }
  double total = 0.0;
  Vector coeff = Vector::Zero(n * blocks);
  for (Eigen::Index a = 0; a < d; ++a) {
    coeff.setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
      coeff[j * blocks] = scores(j, a) / static_cast<double>(n);
      coeff[j * blocks + 1 + a] = 1.0 / static_cast<double>(n);
    }
    total += coeff.dot(gram * coeff);
  }
  return std::sqrt(std::max(0.0, total));
}

// --- KL divergences --------------------------------------------------------

/// KL(N(mean0, cov0) || N(mean1, cov1)).
inline double kl_gaussian(const Vector& mean0, const Matrix& cov0, const Vector& mean1, const Matrix& cov1) {
  const GaussianTarget q(mean0, cov0);
  const GaussianTarget p(mean1, cov1);
  if (q.dimension() != p.dimension()) throw ContractViolation("kl_gaussian: dimension mismatch");
  const Vector dm = mean1 - mean0;
  const double d = static_cast<double>(q.dimension());
  const double trace = (p.precision() * cov0).trace();
  const double maha = dm.dot(p.precision() * dm);
  return std::max(0.0, 0.5 * (trace + maha - d + p.log_det_covariance() - q.log_det_covariance()));
}

inline double kl_gaussian(const GaussianTarget& q, const GaussianTarget& p) {
  return kl_gaussian(q.mean(), q.covariance(), p.mean(), p.covariance());
}

struct TrackedKl {
  double value = 0.0;
  double standard_error = 0.0;
  /// False when the target's normalizer is unknown: value is KL up to a constant.
  bool absolute = true;
};

/// Plug-in KL(mu || p) from tracked log densities: mean of log q(x_i) - log p(x_i).
inline TrackedKl kl_tracked(const ParticleEnsemble& ensemble, const Target& target) {
  if (!ensemble.tracking()) throw TrackingDisabled("kl_tracked: ensemble has no tracked log density");
  const Eigen::Index n = ensemble.size();
  if (n < 1) throw ContractViolation("kl_tracked: empty ensemble");
  Vector terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    terms[i] = (*ensemble.tracked_log_q)[i] - target.log_density(ensemble.positions.row(i).transpose());
  }
  const auto normalizer = target.log_normalizer();
  TrackedKl out;
  out.absolute = normalizer.has_value();
  const double mean = terms.mean();
  out.value = mean + normalizer.value_or(0.0);
  if (n > 1) {
    const double var = (terms.array() - mean).square().sum() / static_cast<double>(n - 1);
    out.standard_error = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

// --- bounded-Lipschitz distance --------------------------------------------

/// Discrete probability measure: rows of `points` with nonnegative weights summing to 1.
struct WeightedPoints {
  Matrix points;
  Vector weights;

  static WeightedPoints uniform(Matrix pts) {
    const Eigen::Index n = pts.rows();
    return {std::move(pts), Vector::Constant(n, 1.0 / static_cast<double>(std::max<Eigen::Index>(n, 1)))};
  }
};

constexpr Eigen::Index kMaxBlSupport = 256;

/// Exact BL distance between two discrete measures:
///   max sum_s (a_s - b_s) f_s  s.t. |f_s| <= 1, f_s - f_t <= |s - t|
/// over the union support. Feasible f on the support extend to the whole space
/// with the same BL norm, so the LP optimum is the metric itself.
inline double bl_distance(const WeightedPoints& first, const WeightedPoints& second) {
  for (const WeightedPoints* m : {&first, &second}) {
    if (m->points.rows() < 1 || m->weights.size() != m->points.rows()) {
      throw ContractViolation("bl_distance: each measure needs a nonempty support with one weight per point");
    }
    if ((m->weights.array() < 0.0).any()) throw ContractViolation("bl_distance: negative weight");
    if (std::abs(m->weights.sum() - 1.0) > 1e-9) throw ContractViolation("bl_distance: weights must sum to 1");
  }
  if (first.points.cols() != second.points.cols()) throw ContractViolation("bl_distance: dimension mismatch");

  // Union support with coincident points merged; signed mass a - b per point.
  std::vector<Vector> support;
  std::vector<double> mass;
  auto add = [&](const WeightedPoints& m, double sign) {
    for (Eigen::Index i = 0; i < m.points.rows(); ++i) {
      const Vector p = m.points.row(i).transpose();
      auto it = std::find_if(support.begin(), support.end(), [&](const Vector& s) { return s == p; });
      if (it == support.end()) {
        support.push_back(p);
        mass.push_back(sign * m.weights[i]);
      } else {
        mass[static_cast<std::size_t>(it - support.begin())] += sign * m.weights[i];
      }
    }
  };
  add(first, 1.0);
  add(second, -1.0);

  const auto m = static_cast<Eigen::Index>(support.size());
  if (m > kMaxBlSupport) throw ContractViolation("bl_distance: union support exceeds 256 points");
  if (m == 1) return 0.0;

  // Canonical form: support sorted lexicographically, and the sign of the mass
  // fixed so its first nonzero entry is positive (the feasible set is symmetric
  // under f -> -f). Swapping or reordering the inputs then yields the same LP.
  std::vector<std::size_t> order(support.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(support[a].begin(), support[a].end(), support[b].begin(), support[b].end());
  });
  {
    std::vector<Vector> sorted_support;
    std::vector<double> sorted_mass;
    for (std::size_t i : order) {
      sorted_support.push_back(support[i]);
      sorted_mass.push_back(mass[i]);
    }
    support = std::move(sorted_support);
    mass = std::move(sorted_mass);
  }
  const auto first_nonzero = std::find_if(mass.begin(), mass.end(), [](double v) { return v != 0.0; });
  if (first_nonzero == mass.end()) return 0.0;
  if (*first_nonzero < 0.0) {
    for (double& v : mass) v = -v;
  }

  // Shift g = f + 1 in [0, 2]; sum of mass is 0 so the objective is unchanged.
  const Eigen::Index rows = m * (m - 1) + m;
  Matrix A = Matrix::Zero(rows, m);
  Vector b(rows);
  Eigen::Index r = 0;
  for (Eigen::Index s = 0; s < m; ++s) {
    for (Eigen::Index t = 0; t < m; ++t) {
      if (s == t) continue;
      A(r, s) = 1.0;
      A(r, t) = -1.0;
      b[r] = (support[static_cast<std::size_t>(s)] - support[static_cast<std::size_t>(t)]).norm();
      ++r;
    }
  }
  for (Eigen::Index s = 0; s < m; ++s, ++r) {
    A(r, s) = 1.0;
    b[r] = 2.0;
  }
  Vector c(m);
  for (Eigen::Index s = 0; s < m; ++s) c[s] = mass[static_cast<std::size_t>(s)];
  return std::max(0.0, lp::maximize(A, b, c).objective);
}

}  // namespace steinflow
