#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "steinflow/discrepancy.hpp"
#include "steinflow/drift.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/targets.hpp"

namespace steinflow {

namespace detail {
inline void check_ensemble(const Target& target, const ParticleEnsemble& ensemble) {
  if (ensemble.size() < 1) throw ContractViolation("ensemble is empty");
  if (ensemble.dimension() != target.dimension()) throw ContractViolation("ensemble dimension does not match target");
}

inline Matrix single_row(const Eigen::Ref<const Vector>& q) { return q.transpose(); }

/// rho(J + J^T) for a square J.
inline double symmetric_spectral_radius(const Matrix& J) {
  if (J.rows() == 1) return std::abs(2.0 * J(0, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J + J.transpose(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/// log|det(I + eps J)|; nullopt when |det| < 1e-12.
inline std::optional<double> log_abs_det_step(const Matrix& J, double eps) {
  double logdet = 0.0;
  if (J.rows() == 1) {
    const double v = 1.0 + eps * J(0, 0);
    if (std::abs(v) < 1e-12) return std::nullopt;
    logdet = std::log(std::abs(v));
  } else {
    const Matrix M = Matrix::Identity(J.rows(), J.cols()) + eps * J;
    const Eigen::PartialPivLU<Matrix> lu(M);
    const Matrix& U = lu.matrixLU();
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      const double u = std::abs(U(i, i));
      if (u == 0.0) return std::nullopt;
      logdet += std::log(u);
    }
    if (logdet < std::log(1e-12)) return std::nullopt;
  }
  return logdet;
}
}  // namespace detail

/// phi*(query) against the empirical measure of `ensemble`.
inline Vector phi_star(const Target& target, const KernelSpec& spec, const ParticleEnsemble& ensemble,
                       const Eigen::Ref<const Vector>& query) {
  detail::check_ensemble(target, ensemble);
  if (query.size() != target.dimension()) throw ContractViolation("phi_star: query dimension mismatch");
  const Matrix& X = ensemble.positions;
  return stein_drift(spec, X, target.scores(X), detail::single_row(query)).phi.row(0).transpose();
}

/// d phi*(q) / dq, entry (a, b) = d phi*_a / d q_b.
inline Matrix phi_star_jacobian(const Target& target, const KernelSpec& spec, const ParticleEnsemble& ensemble,
                                const Eigen::Ref<const Vector>& query) {
  detail::check_ensemble(target, ensemble);
  if (query.size() != target.dimension()) throw ContractViolation("phi_star_jacobian: query dimension mismatch");
  const Matrix& X = ensemble.positions;
  return stein_drift(spec, X, target.scores(X), detail::single_row(query), DriftDetail::Jacobian).jacobian.front();
}

/// Step-size caps for one iteration.
///
/// `spectral` is (2 max_i rho(J_i + J_i^T))^-1 with J_i the drift Jacobian at
/// particle i, the particle-level stand-in for the sup over all x.
/// `analytic` is the RKHS bound (4 max_x sqrt(tr d_x d_x' k(x,x)) S)^-1, which
/// never exceeds the true cap and scales as 1/S.
struct StepCap {
  double spectral = std::numeric_limits<double>::infinity();
  double analytic = std::numeric_limits<double>::infinity();
  double ksd = 0.0;

  double value(bool conservative = false) const { return conservative ? std::min(spectral, analytic) : spectral; }
};

inline StepCap step_cap_from_drift(const KernelSpec& spec, const Matrix& positions, const DriftField& drift,
                                   double ksd) {
  StepCap cap;
  cap.ksd = ksd;
  double rho = 0.0;
  for (const Matrix& J : drift.jacobian) rho = std::max(rho, detail::symmetric_spectral_radius(J));
  if (rho > 0.0) cap.spectral = 1.0 / (2.0 * rho);
  double max_trace = 0.0;
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    const Vector x = positions.row(i).transpose();
    max_trace = std::max(max_trace, kernel_trace_grad_xx(spec, x, x));
  }
  const double bound = 2.0 * std::sqrt(max_trace) * ksd;
  if (bound > 0.0) cap.analytic = 1.0 / (2.0 * bound);
  return cap;
}

inline StepCap step_size_cap(const Target& target, const KernelSpec& spec, const ParticleEnsemble& ensemble) {
  detail::check_ensemble(target, ensemble);
  const Matrix& X = ensemble.positions;
  const Matrix scores = target.scores(X);
  const DriftField drift = stein_drift(spec, X, scores, X, DriftDetail::Jacobian);
  return step_cap_from_drift(spec, X, drift, ksd_vstat(target, spec, X).value);
}

/// Move every particle by eps * drift (precomputed against the pre-step
/// ensemble) and, when tracking, subtract log|det(I + eps J_i)|.
inline ParticleEnsemble apply_step(const ParticleEnsemble& ensemble, const DriftField& drift, double eps,
                                   bool track) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ContractViolation("step size must be finite and >= 0");
  if (track && !ensemble.tracking()) throw TrackingDisabled("svgd_step: tracking requested but ensemble has none");
  ParticleEnsemble next;
  next.positions = ensemble.positions + eps * drift.phi;
  next.iteration = ensemble.iteration + 1;
  if (track) {
    if (drift.jacobian.size() != static_cast<std::size_t>(ensemble.size())) {
      throw ContractViolation("apply_step: tracking needs per-particle drift Jacobians");
    }
    Vector logq = *ensemble.tracked_log_q;
    for (Eigen::Index i = 0; i < ensemble.size(); ++i) {
      const auto logdet = detail::log_abs_det_step(drift.jacobian[static_cast<std::size_t>(i)], eps);
      if (!logdet) {
        throw StepTooLarge("I + eps*J is singular at particle " + std::to_string(i) + " (eps = " + std::to_string(eps) +
                           ")");
      }
      logq[i] -= *logdet;
    }
    next.tracked_log_q = std::move(logq);
  }
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    if (!next.positions.row(i).allFinite()) {
      std::ostringstream msg;
      msg << "particle " << i << " became non-finite at iteration " << next.iteration << " (previous position "
          << ensemble.positions.row(i) << ", drift " << drift.phi.row(i) << ", eps " << eps << ")";
      throw Diverged(msg.str());
    }
  }
  return next;
}

/// One simultaneous SVGD update x_i <- x_i + eps phi*(x_i).
inline ParticleEnsemble svgd_step(const Target& target, const KernelSpec& spec, const ParticleEnsemble& ensemble,
                                  double eps, bool track_density) {
  detail::check_ensemble(target, ensemble);
  const Matrix& X = ensemble.positions;
  const DriftField drift =
      stein_drift(spec, X, target.scores(X), X, track_density ? DriftDetail::Jacobian : DriftDetail::Value);
  return apply_step(ensemble, drift, eps, track_density);
}

enum class StepMode { Constant, CappedBySpectral, KsdProportional };

struct StepSchedule {
  StepMode mode = StepMode::Constant;
  double base = 0.05;
  double beta = 1.0;
  double safety = 0.5;
  /// CappedBySpectral also applies the analytic 1/S cap.
  bool conservative = false;

  static StepSchedule constant(double eps) { return {StepMode::Constant, eps, 1.0, 1.0, false}; }
  static StepSchedule capped(double base, double safety) { return {StepMode::CappedBySpectral, base, 1.0, safety, false}; }
  static StepSchedule ksd_proportional(double base, double beta) {
    return {StepMode::KsdProportional, base, beta, 1.0, false};
  }

  void validate() const {
    if (!(base > 0.0)) throw ConfigError("schedule.base must be positive");
    if (!(beta > 0.0)) throw ConfigError("schedule.beta must be positive");
    if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("schedule.safety must lie in (0, 1]");
  }

  bool needs_jacobian() const { return mode == StepMode::CappedBySpectral; }

  double epsilon(const StepCap& cap) const {
    switch (mode) {
      case StepMode::Constant: return base;
      case StepMode::CappedBySpectral: return std::min(base, safety * cap.value(conservative));
      case StepMode::KsdProportional: return base * std::pow(cap.ksd, beta);
    }
    return base;
  }
};

/// One recorded row of a trajectory. `iteration` is the step count; `time` is
/// used by the continuous-time integrators.
struct TrajectoryRow {
  int iteration = 0;
  double time = 0.0;
  double epsilon = 0.0;
  double ksd = 0.0;
  std::optional<double> kl;
  std::optional<double> kl_standard_error;
  double bandwidth = 0.0;
  double wall_seconds = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  std::vector<std::pair<int, Matrix>> snapshots;
  ParticleEnsemble final_state;
  double wall_seconds = 0.0;
  bool timed = false;
};

struct RunOptions {
  int max_iter = 100;
  int record_every = 1;
  /// 0 keeps only the initial and final positions.
  int snapshot_every = 0;
  bool track_density = false;
};

namespace detail {
template <typename E>
[[noreturn]] void rethrow_with_context(const E& e, const std::string& context) {
  throw E(context + ": " + e.what());
}

inline TrajectoryRow make_row(const Target& target, const KernelSpec& spec, const ParticleEnsemble& state,
                              double eps, std::optional<double> ksd = std::nullopt) {
  TrajectoryRow row;
  row.iteration = state.iteration;
  row.epsilon = eps;
  row.bandwidth = spec.bandwidth;
  row.ksd = ksd ? *ksd : ksd_vstat(target, spec, state.positions).value;
  if (state.tracking()) {
    const TrackedKl kl = kl_tracked(state, target);
    row.kl = kl.value;
    row.kl_standard_error = kl.standard_error;
  }
  return row;
}
}  // namespace detail

/// Iterate svgd_step `max_iter` times. Rows are recorded at iteration 0, every
/// `record_every` iterations and at the final iteration.
inline TrajectoryRecord run(const Target& target, const KernelChoice& kernel, const ParticleEnsemble& initial,
                            const StepSchedule& schedule, const RunOptions& options) {
  detail::check_ensemble(target, initial);
  schedule.validate();
  if (options.max_iter < 1) throw ContractViolation("run: max_iter must be >= 1");
  if (options.record_every < 1) throw ContractViolation("run: record_every must be >= 1");
  if (options.track_density && !initial.tracking()) {
    throw TrackingDisabled("run: density tracking needs an initial ensemble with a known density");
  }
  const auto started = std::chrono::steady_clock::now();

  TrajectoryRecord record;
  ParticleEnsemble state = initial;
  const bool need_jac = options.track_density || schedule.needs_jacobian();
  const int start_iter = state.iteration;

  record.rows.push_back(detail::make_row(target, kernel.resolve(state.positions), state, 0.0));
  record.snapshots.emplace_back(state.iteration, state.positions);

  for (int step = 1; step <= options.max_iter; ++step) {
    try {
      const KernelSpec spec = kernel.resolve(state.positions);
      const Matrix& X = state.positions;
      const Matrix scores = target.scores(X);
      const DriftField drift = stein_drift(spec, X, scores, X, need_jac ? DriftDetail::Jacobian : DriftDetail::Value);
      StepCap cap;
      if (schedule.mode != StepMode::Constant) {
        const double ksd = ksd_vstat(target, spec, X).value;
        cap = schedule.needs_jacobian() ? step_cap_from_drift(spec, X, drift, ksd) : StepCap{};
        cap.ksd = ksd;
      }
      const double eps = schedule.epsilon(cap);
      // A vanishing KSD in proportional mode means the ensemble is at rest.
      if (!std::isfinite(eps) || eps < 0.0 || (eps == 0.0 && schedule.mode != StepMode::KsdProportional)) {
        throw Error("schedule produced an invalid step size " + std::to_string(eps));
      }
      state = apply_step(state, drift, eps, options.track_density);
      const bool last = step == options.max_iter;
      if (last || (state.iteration - start_iter) % options.record_every == 0) {
        record.rows.push_back(detail::make_row(target, kernel.resolve(state.positions), state, eps));
        record.rows.back().wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      }
      if (last || (options.snapshot_every > 0 && (state.iteration - start_iter) % options.snapshot_every == 0)) {
        record.snapshots.emplace_back(state.iteration, state.positions);
      }
    } catch (const Diverged& e) {
      detail::rethrow_with_context(e, "iteration " + std::to_string(state.iteration + 1));
    } catch (const StepTooLarge& e) {
      detail::rethrow_with_context(e, "iteration " + std::to_string(state.iteration + 1));
    } catch (const DegenerateEnsemble& e) {
      detail::rethrow_with_context(e, "iteration " + std::to_string(state.iteration + 1));
    }
  }
  record.final_state = state;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  record.timed = true;
  return record;
}

}  // namespace steinflow
