#pragma once

// Batched kernel sums over a particle set. Every quantity that needs a full
// pass over the particles (phi*, its Jacobian or divergence, Stein-kernel row
// sums) goes through here. Each query row is reduced by a single worker over
// the particles in lexicographic order of (position, score), so results depend
// neither on the number of threads nor on how the particles are indexed.

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/parallel.hpp"

namespace steinflow {

enum class DriftDetail { Value, Divergence, Jacobian };

/// phi*(q) = (1/n) sum_j [ k(x_j, q) s(x_j) + grad_{x_j} k(x_j, q) ] at each query q.
struct DriftField {
  Matrix phi;                    // m x d
  Vector divergence;             // m, trace of the query Jacobian (Divergence, Jacobian)
  std::vector<Matrix> jacobian;  // m of d x d, entry (a, b) = d phi_a / d q_b (Jacobian)
};

namespace detail {

using Array = Eigen::ArrayXd;
using Array2 = Eigen::ArrayXXd;

/// Per-worker scratch for one query row against n particles.
struct RowScratch {
  Array2 diff;  // n x d, x_j - q
  Array r2, k, df, d2f;

  RowScratch(Eigen::Index n, Eigen::Index d) : diff(n, d), r2(n), k(n), df(n), d2f(n) {}

  void load(const Matrix& particles, const Eigen::Ref<const Vector>& q) {
    for (Eigen::Index a = 0; a < particles.cols(); ++a) diff.col(a) = particles.col(a).array() - q[a];
    r2 = diff.square().rowwise().sum();
  }

  void radial(const KernelSpec& spec, bool second_order) {
    const double h2 = spec.bandwidth * spec.bandwidth;
    if (spec.family == KernelFamily::RBF) {
      k = (r2 * (-0.5 / h2)).exp();
      df = k * (-0.5 / h2);
      if (second_order) d2f = k * (0.25 / (h2 * h2));
      return;
    }
    const double beta = spec.imq_exponent;
    const Array base = spec.imq_offset + r2 / h2;
    k = base.pow(beta);
    df = (beta / h2) * k / base;
    if (second_order) d2f = (beta * (beta - 1.0) / (h2 * h2)) * k / base.square();
  }
};

inline void check_sets(const Matrix& particles, const Matrix& scores, const Matrix& queries) {
  if (particles.rows() < 1) throw ContractViolation("need at least one particle");
  if (scores.rows() != particles.rows() || scores.cols() != particles.cols()) {
    throw ContractViolation("scores must have the same shape as particles");
  }
  if (queries.cols() != particles.cols()) throw ContractViolation("query dimension does not match particles");
}

/// Row permutation sorting (first, second) lexicographically, row by row.
inline std::vector<Eigen::Index> lexicographic_order(const Matrix& first, const Matrix& second) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(first.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [](const Matrix& m, Eigen::Index a, Eigen::Index b) -> int {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(a, c) != m(b, c)) return m(a, c) < m(b, c) ? -1 : 1;
    }
    return 0;
  };
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const int c = less(first, a, b);
    return c != 0 ? c < 0 : less(second, a, b) < 0;
  });
  return order;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
  return out;
}

}  // namespace detail

inline DriftField stein_drift(const KernelSpec& spec, const Matrix& particles, const Matrix& scores,
                              const Matrix& queries, DriftDetail detail_level = DriftDetail::Value) {
  detail::check_sets(particles, scores, queries);
  spec.validate();
  const Eigen::Index n = particles.rows();
  const Eigen::Index d = particles.cols();
  const Eigen::Index m = queries.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool want_div = detail_level != DriftDetail::Value;
  const bool want_jac = detail_level == DriftDetail::Jacobian;

  DriftField out;
  out.phi.resize(m, d);
  if (want_div) out.divergence.resize(m);
  if (want_jac) out.jacobian.assign(static_cast<std::size_t>(m), Matrix(d, d));

  const auto order = detail::lexicographic_order(particles, scores);
  const Matrix sorted_particles = detail::take_rows(particles, order);
  const Matrix sorted_scores = detail::take_rows(scores, order);
  const auto scores_arr = sorted_scores.array();
  const auto particles_arr = sorted_particles.array();

  parallel::for_chunks(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
    detail::RowScratch row(n, d);
    Matrix jac(d, d);
    Vector phi(d);
    for (auto qi = static_cast<Eigen::Index>(lo); qi < static_cast<Eigen::Index>(hi); ++qi) {
      const Vector q = queries.row(qi).transpose();
      if (spec.family == KernelFamily::Linear) {
        const detail::Array k = (sorted_particles * q).array() + 1.0;
        for (Eigen::Index a = 0; a < d; ++a) phi[a] = (scores_arr.col(a) * k).sum() * inv_n + q[a];
        if (want_div) {
          for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
              jac(a, b) = (scores_arr.col(a) * particles_arr.col(b)).sum() * inv_n + (a == b ? 1.0 : 0.0);
            }
          }
        }
      } else {
        row.load(sorted_particles, q);
        row.radial(spec, want_div);
        for (Eigen::Index a = 0; a < d; ++a) {
          phi[a] = (scores_arr.col(a) * row.k + 2.0 * row.df * row.diff.col(a)).sum() * inv_n;
        }
        if (want_div) {
          const double mean_df = row.df.sum() * inv_n;
          for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
              if (!want_jac && a != b) continue;
              double v = -2.0 * (row.df * scores_arr.col(a) * row.diff.col(b)).sum() * inv_n;
              v -= 4.0 * (row.d2f * row.diff.col(a) * row.diff.col(b)).sum() * inv_n;
              if (a == b) v -= 2.0 * mean_df;
              jac(a, b) = v;
            }
          }
        }
      }
      out.phi.row(qi) = phi.transpose();
      if (want_div) out.divergence[qi] = jac.diagonal().sum();
      if (want_jac) out.jacobian[static_cast<std::size_t>(qi)] = jac;
    }
  });
  return out;
}

/// Row sums of the Stein kernel: out[i] = sum_j kappa_p(x_i, x_j), plus the
/// diagonal kappa_p(x_i, x_i) for U-statistics.
struct SteinKernelSums {
  Vector row_sums;
  Vector diagonal;
};

inline SteinKernelSums stein_kernel_sums(const KernelSpec& spec, const Matrix& particles, const Matrix& scores) {
  detail::check_sets(particles, scores, particles);
  spec.validate();
  const Eigen::Index n = particles.rows();
  const Eigen::Index d = particles.cols();
  SteinKernelSums out{Vector(n), Vector(n)};
  const auto scores_arr = scores.array();
  const auto particles_arr = particles.array();
  const double dd = static_cast<double>(d);

  parallel::for_chunks(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
    detail::RowScratch row(n, d);
    detail::Array dots(n), s_diff(n), t_diff(n);
    for (auto i = static_cast<Eigen::Index>(lo); i < static_cast<Eigen::Index>(hi); ++i) {
      const Vector xi = particles.row(i).transpose();
      const Vector si = scores.row(i).transpose();
      dots = (scores * si).array();
      if (spec.family == KernelFamily::Linear) {
        const detail::Array k = (particles * xi).array() + 1.0;
        const detail::Array sx = (scores_arr * particles_arr).rowwise().sum();
        const double own = si.dot(xi);
        const detail::Array kappa = dots * k + own + sx + dd;
        out.row_sums[i] = kappa.sum();
        out.diagonal[i] = kappa[i];
        continue;
      }
      row.load(particles, xi);
      row.radial(spec, true);
      // diff = x_j - x_i; grad_y k(x_i, x_j) = 2 f' diff, grad_x k(x_i, x_j) = -2 f' diff.
      s_diff = (row.diff.matrix() * si).array();
      t_diff = (scores_arr * row.diff).rowwise().sum();
      const detail::Array kappa =
          dots * row.k + 2.0 * row.df * (s_diff - t_diff) - 2.0 * dd * row.df - 4.0 * row.d2f * row.r2;
      out.row_sums[i] = kappa.sum();
      out.diagonal[i] = kappa[i];
    }
  });
  return out;
}

}  // namespace steinflow
