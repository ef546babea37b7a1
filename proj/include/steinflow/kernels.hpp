#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "steinflow/errors.hpp"

namespace steinflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily { RBF, IMQ, Linear };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::RBF: return "rbf";
    case KernelFamily::IMQ: return "imq";
    case KernelFamily::Linear: return "linear";
  }
  return "unknown";
}

/// Positive-definite kernel k(x, y) with length-scale `bandwidth`.
///
///   RBF:    exp(-|x-y|^2 / (2 h^2))
///   IMQ:    (imq_offset + |x-y|^2 / h^2)^imq_exponent
///   Linear: x.y + 1   (bandwidth unused; no vanishing self-gradient)
///
/// RBF and IMQ are radial, k = f(|x-y|^2), and all derivatives below are
/// expressed through f' and f''.
struct KernelSpec {
  KernelFamily family = KernelFamily::RBF;
  double bandwidth = 1.0;
  double imq_exponent = -0.5;
  double imq_offset = 1.0;

  static KernelSpec rbf(double h) { return {KernelFamily::RBF, h, -0.5, 1.0}; }
  static KernelSpec imq(double h, double exponent = -0.5, double offset = 1.0) {
    return {KernelFamily::IMQ, h, exponent, offset};
  }
  static KernelSpec linear() { return {KernelFamily::Linear, 1.0, -0.5, 1.0}; }

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw ConfigError("kernel.bandwidth must be positive and finite, got " + std::to_string(bandwidth));
    }
    if (family == KernelFamily::IMQ) {
      if (!(imq_exponent > -1.0 && imq_exponent < 0.0)) {
        throw ConfigError("kernel.imq_exponent must lie in (-1, 0), got " + std::to_string(imq_exponent));
      }
      if (!(imq_offset > 0.0)) {
        throw ConfigError("kernel.imq_offset must be positive, got " + std::to_string(imq_offset));
      }
    }
  }

  bool radial() const { return family != KernelFamily::Linear; }
};

/// Radial profile f(r2) and its first two derivatives with respect to r2.
struct RadialProfile {
  double f;
  double df;
  double d2f;
};

inline RadialProfile radial_profile(const KernelSpec& spec, double r2) {
  const double h2 = spec.bandwidth * spec.bandwidth;
  if (spec.family == KernelFamily::RBF) {
    const double k = std::exp(-r2 / (2.0 * h2));
    return {k, -k / (2.0 * h2), k / (4.0 * h2 * h2)};
  }
  const double beta = spec.imq_exponent;
  const double base = spec.imq_offset + r2 / h2;
  const double k = std::pow(base, beta);
  return {k, beta / h2 * k / base, beta * (beta - 1.0) / (h2 * h2) * k / (base * base)};
}

namespace detail {
inline void check_pair(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size() || x.size() == 0) {
    throw ContractViolation("kernel arguments must share a dimension d >= 1 (got " + std::to_string(x.size()) +
                            " and " + std::to_string(y.size()) + ")");
  }
  spec.validate();
}
}  // namespace detail

inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  detail::check_pair(spec, x, y);
  if (spec.family == KernelFamily::Linear) return x.dot(y) + 1.0;
  return radial_profile(spec, (x - y).squaredNorm()).f;
}

/// Gradient of k(x, y) in its first argument.
inline Vector kernel_grad_x(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  detail::check_pair(spec, x, y);
  if (spec.family == KernelFamily::Linear) return y;
  const Vector diff = x - y;
  return 2.0 * radial_profile(spec, diff.squaredNorm()).df * diff;
}

/// Gradient of k(x, y) in its second argument.
inline Vector kernel_grad_y(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  detail::check_pair(spec, x, y);
  if (spec.family == KernelFamily::Linear) return x;
  const Vector diff = x - y;
  return -2.0 * radial_profile(spec, diff.squaredNorm()).df * diff;
}

/// Mixed second derivative matrix M(a, b) = d/dx_a d/dy_b k(x, y).
inline Matrix kernel_grad_xy(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  detail::check_pair(spec, x, y);
  const auto d = x.size();
  if (spec.family == KernelFamily::Linear) return Matrix::Identity(d, d);
  const Vector diff = x - y;
  const RadialProfile p = radial_profile(spec, diff.squaredNorm());
  return -2.0 * p.df * Matrix::Identity(d, d) - 4.0 * p.d2f * diff * diff.transpose();
}

/// sum_i d/dx_i d/dy_i k(x, y).
inline double kernel_trace_grad_xx(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  detail::check_pair(spec, x, y);
  const double d = static_cast<double>(x.size());
  if (spec.family == KernelFamily::Linear) return d;
  const double r2 = (x - y).squaredNorm();
  const RadialProfile p = radial_profile(spec, r2);
  return -2.0 * d * p.df - 4.0 * p.d2f * r2;
}

/// Median pairwise distance over sqrt(2 ln(n + 1)). Rows of `points` are points.
inline double median_bandwidth(const Eigen::Ref<const Matrix>& points) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw DegenerateEnsemble("median bandwidth needs at least two points");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((points.row(i) - points.row(j)).squaredNorm());
  }
  // Median of an even-length list is the mean of the two middle values.
  const std::size_t m = dist.size();
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double median = std::sqrt(*mid);
  if (m % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), mid);
    median = 0.5 * (median + std::sqrt(lower));
  }
  if (!(median > 0.0)) {
    throw DegenerateEnsemble("median bandwidth is zero: at least half of the pairwise distances vanish");
  }
  return median / std::sqrt(2.0 * std::log(static_cast<double>(n) + 1.0));
}

/// Kernel choice as configured: a fixed spec, or RBF/IMQ whose bandwidth is
/// re-derived from the current particles by the median rule.
struct KernelChoice {
  KernelSpec spec;
  bool median = true;

  static KernelChoice fixed(KernelSpec s) { return {s, false}; }
  static KernelChoice median_rule(KernelFamily family = KernelFamily::RBF) {
    KernelSpec s;
    s.family = family;
    return {s, true};
  }

  KernelSpec resolve(const Eigen::Ref<const Matrix>& positions) const {
    KernelSpec out = spec;
    if (median && spec.radial()) out.bandwidth = median_bandwidth(positions);
    out.validate();
    return out;
  }
};

}  // namespace steinflow
