#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>

#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/random.hpp"
#include "steinflow/targets.hpp"

namespace steinflow {

/// n particles in R^d (rows of `positions`) and, when tracking is on, the log
/// density of the current pushforward measure evaluated at each particle.
struct ParticleEnsemble {
  Matrix positions;
  std::optional<Vector> tracked_log_q;
  int iteration = 0;

  Eigen::Index size() const { return positions.rows(); }
  Eigen::Index dimension() const { return positions.cols(); }
  bool tracking() const { return tracked_log_q.has_value(); }

  /// i.i.d. draws from `initial`; the tracked density starts at its exact log pdf.
  static ParticleEnsemble from_gaussian(const GaussianTarget& initial, int n, Rng& rng, bool track = true) {
    if (n < 1) throw ContractViolation("ensemble needs n >= 1");
    ParticleEnsemble e;
    e.positions = initial.sample(rng, n);
    if (track) {
      Vector logq(n);
      for (int i = 0; i < n; ++i) logq[i] = initial.log_pdf(e.positions.row(i).transpose());
      e.tracked_log_q = std::move(logq);
    }
    return e;
  }

  /// Deterministic product grid over [lo, hi]^d; the first n grid nodes in
  /// lexicographic order. No density is attached.
  static ParticleEnsemble grid(int n, int d, double lo, double hi) {
    if (n < 1 || d < 1) throw ContractViolation("grid needs n >= 1 and d >= 1");
    if (!(hi >= lo)) throw ContractViolation("grid needs hi >= lo");
    int per_axis = 1;
    while (std::pow(static_cast<double>(per_axis), d) < n) ++per_axis;
    ParticleEnsemble e;
    e.positions.resize(n, d);
    const double step = per_axis > 1 ? (hi - lo) / (per_axis - 1) : 0.0;
    for (int i = 0; i < n; ++i) {
      int rem = i;
      for (int a = d - 1; a >= 0; --a) {
        e.positions(i, a) = lo + step * (rem % per_axis);
        rem /= per_axis;
      }
    }
    return e;
  }

  static ParticleEnsemble from_positions(Matrix positions) {
    ParticleEnsemble e;
    e.positions = std::move(positions);
    return e;
  }
};

}  // namespace steinflow
