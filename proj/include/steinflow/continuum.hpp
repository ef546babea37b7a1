#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "steinflow/discrepancy.hpp"
#include "steinflow/drift.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/parallel.hpp"
#include "steinflow/random.hpp"
#include "steinflow/svgd.hpp"
#include "steinflow/targets.hpp"

namespace steinflow {

// --- Vlasov (continuous-time SVGD) ------------------------------------------

enum class Integrator { Euler, RK4 };

struct OdeConfig {
  Integrator integrator = Integrator::RK4;
  double dt = 0.01;
  double t_end = 1.0;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("flow.dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ConfigError("flow.t_end must be >= 0");
    if (t_end > 0.0 && dt > t_end) throw ConfigError("flow.dt must not exceed flow.t_end");
  }

  long steps() const { return std::lround(t_end / dt); }
};

/// Row i is phi* at particle i against the whole ensemble.
inline Matrix vlasov_rhs(const Target& target, const KernelSpec& spec, const Matrix& positions) {
  if (positions.rows() < 1) throw ContractViolation("vlasov_rhs: empty ensemble");
  if (positions.cols() != target.dimension()) throw ContractViolation("vlasov_rhs: dimension mismatch");
  return stein_drift(spec, positions, target.scores(positions), positions).phi;
}

struct FlowOptions {
  bool track_density = false;
  /// Record every this many integration steps (plus t = 0 and the end).
  int record_every = 1;
  int snapshot_every = 0;
};

namespace detail {
struct FlowDerivative {
  Matrix velocity;
  Vector log_q_rate;  // d log q / dt = -div phi*
};

inline FlowDerivative flow_derivative(const Target& target, const KernelChoice& kernel, const Matrix& X,
                                      bool track) {
  const KernelSpec spec = kernel.resolve(X);
  DriftField drift = stein_drift(spec, X, target.scores(X), X, track ? DriftDetail::Divergence : DriftDetail::Value);
  FlowDerivative out{std::move(drift.phi), {}};
  if (track) out.log_q_rate = -drift.divergence;
  return out;
}
}  // namespace detail

/// Advance positions (and tracked log densities) by one step of size dt.
inline void vlasov_step(const Target& target, const KernelChoice& kernel, ParticleEnsemble& state, double dt,
                        Integrator integrator, bool track) {
  const Matrix& X = state.positions;
  if (integrator == Integrator::Euler) {
    const auto k1 = detail::flow_derivative(target, kernel, X, track);
    state.positions = X + dt * k1.velocity;
    if (track) *state.tracked_log_q += dt * k1.log_q_rate;
    return;
  }
  const auto k1 = detail::flow_derivative(target, kernel, X, track);
  const auto k2 = detail::flow_derivative(target, kernel, X + 0.5 * dt * k1.velocity, track);
  const auto k3 = detail::flow_derivative(target, kernel, X + 0.5 * dt * k2.velocity, track);
  const auto k4 = detail::flow_derivative(target, kernel, X + dt * k3.velocity, track);
  state.positions = X + (dt / 6.0) * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity);
  if (track) {
    *state.tracked_log_q += (dt / 6.0) * (k1.log_q_rate + 2.0 * k2.log_q_rate + 2.0 * k3.log_q_rate + k4.log_q_rate);
  }
}

/// Advance `state` by `steps` steps without recording anything.
inline void advance_vlasov(const Target& target, const KernelChoice& kernel, ParticleEnsemble& state, double dt,
                           long steps, Integrator integrator, bool track) {
  if (track && !state.tracking()) throw TrackingDisabled("advance_vlasov: ensemble has no density");
  for (long n = 0; n < steps; ++n) {
    vlasov_step(target, kernel, state, dt, integrator, track);
    if (!state.positions.allFinite()) throw Diverged("vlasov flow became non-finite");
  }
}

/// Integrate dx_i/dt = phi*(x_i) for all particles. With tracking, the log
/// density of each particle follows d log q / dt = -(div phi*)(x_t).
inline TrajectoryRecord integrate_vlasov(const Target& target, const KernelChoice& kernel,
                                         const ParticleEnsemble& initial, const OdeConfig& cfg,
                                         const FlowOptions& options = {}) {
  cfg.validate();
  detail::check_ensemble(target, initial);
  if (options.record_every < 1) throw ContractViolation("integrate_vlasov: record_every must be >= 1");
  const bool track = options.track_density;
  if (track && !initial.tracking()) throw TrackingDisabled("integrate_vlasov: initial ensemble has no density");
  const auto started = std::chrono::steady_clock::now();

  TrajectoryRecord record;
  ParticleEnsemble state = initial;
  state.iteration = 0;
  auto push_row = [&](double t) {
    TrajectoryRow row = detail::make_row(target, kernel.resolve(state.positions), state, cfg.dt);
    row.time = t;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.rows.push_back(row);
  };
  push_row(0.0);
  record.rows.front().epsilon = 0.0;
  record.snapshots.emplace_back(0, state.positions);

  const long steps = cfg.t_end > 0.0 ? cfg.steps() : 0;
  for (long n = 1; n <= steps; ++n) {
    vlasov_step(target, kernel, state, cfg.dt, cfg.integrator, track);
    state.iteration = static_cast<int>(n);
    const double t = static_cast<double>(n) * cfg.dt;
    if (!state.positions.allFinite() || (track && !state.tracked_log_q->allFinite())) {
      throw Diverged("vlasov flow became non-finite at t = " + std::to_string(t));
    }
    const bool last = n == steps;
    if (last || n % options.record_every == 0) push_row(t);
    if (last || (options.snapshot_every > 0 && n % options.snapshot_every == 0)) {
      record.snapshots.emplace_back(static_cast<int>(n), state.positions);
    }
  }
  record.final_state = state;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  record.timed = true;
  return record;
}

struct PathIntegral {
  /// Trapezoid over the recorded grid plus the exponential tail.
  double estimate = 0.0;
  /// Trapezoid only.
  double truncated = 0.0;
  double tail = 0.0;
};

/// KL(mu_0 || p) as the time integral of S(mu_t || p)^2 along the flow. The
/// tail beyond the last record assumes S^2 keeps decaying at the rate seen
/// between the last two records (heuristic; zero if S^2 is not decreasing).
inline PathIntegral path_integral_kl(const TrajectoryRecord& trajectory) {
  const auto& rows = trajectory.rows;
  if (rows.size() < 2) throw ContractViolation("path_integral_kl: need at least two recorded times");
  PathIntegral out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double dt = rows[i].time - rows[i - 1].time;
    if (!(dt > 0.0)) throw ContractViolation("path_integral_kl: recorded times must increase");
    out.truncated += 0.5 * dt * (rows[i].ksd * rows[i].ksd + rows[i - 1].ksd * rows[i - 1].ksd);
  }
  const auto& a = rows[rows.size() - 2];
  const auto& b = rows.back();
  const double sa = a.ksd * a.ksd;
  const double sb = b.ksd * b.ksd;
  if (sa > 0.0 && sb > 0.0 && sb < sa) {
    const double rate = std::log(sa / sb) / (b.time - a.time);
    out.tail = sb / rate;
  }
  out.estimate = out.truncated + out.tail;
  return out;
}

// --- Langevin baseline -------------------------------------------------------

enum class NoiseConvention {
  /// sqrt(2 eps), consistent with dx = grad log p dt + sqrt(2) dW.
  Sde,
  /// 2 sqrt(eps): twice the noise variance of Sde.
  TwoRootEps
};

inline double langevin_noise_scale(double eps, NoiseConvention convention) {
  return convention == NoiseConvention::Sde ? std::sqrt(2.0 * eps) : 2.0 * std::sqrt(eps);
}

/// x + eps grad log p(x) + noise * xi with xi ~ N(0, I) drawn from `rng`.
inline Vector langevin_step(const Target& target, const Eigen::Ref<const Vector>& x, double eps, Rng& rng,
                            NoiseConvention convention = NoiseConvention::Sde) {
  if (!(eps >= 0.0)) throw ContractViolation("langevin_step: eps must be >= 0");
  std::normal_distribution<double> normal;
  Vector xi(x.size());
  for (auto& v : xi) v = normal(rng);
  return x + eps * target.score(x) + langevin_noise_scale(eps, convention) * xi;
}

struct LangevinOptions {
  double epsilon = 0.01;
  long steps = 100;
  int record_every = 1;
  NoiseConvention convention = NoiseConvention::Sde;
  std::uint64_t seed = 0;
};

/// Independent unadjusted Langevin chains, one per particle. Chain i draws
/// from stream ("langevin", i) of the master seed, so results do not depend on
/// how chains are spread over workers. Rows carry KSD of the chain population.
inline TrajectoryRecord run_langevin(const Target& target, const KernelChoice& kernel, const ParticleEnsemble& initial,
                                     const LangevinOptions& options) {
  detail::check_ensemble(target, initial);
  if (!(options.epsilon > 0.0)) throw ConfigError("langevin.epsilon must be positive");
  if (options.steps < 0) throw ConfigError("langevin steps must be >= 0");
  if (options.record_every < 1) throw ContractViolation("run_langevin: record_every must be >= 1");
  const auto started = std::chrono::steady_clock::now();
  const Eigen::Index n = initial.size();
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) streams.push_back(make_stream(options.seed, "langevin", static_cast<std::uint64_t>(i)));

  TrajectoryRecord record;
  ParticleEnsemble state = ParticleEnsemble::from_positions(initial.positions);
  auto push_row = [&](long step) {
    TrajectoryRow row;
    row.iteration = static_cast<int>(step);
    row.time = static_cast<double>(step) * options.epsilon;
    row.epsilon = step == 0 ? 0.0 : options.epsilon;
    const KernelSpec spec = kernel.resolve(state.positions);
    row.bandwidth = spec.bandwidth;
    row.ksd = ksd_vstat(target, spec, state.positions).value;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.rows.push_back(row);
  };
  push_row(0);
  record.snapshots.emplace_back(0, state.positions);
  for (long step = 1; step <= options.steps; ++step) {
    parallel::for_chunks(static_cast<std::size_t>(n), [&](std::size_t lo, std::size_t hi) {
      for (auto i = static_cast<Eigen::Index>(lo); i < static_cast<Eigen::Index>(hi); ++i) {
        const Vector x = state.positions.row(i).transpose();
        state.positions.row(i) =
            langevin_step(target, x, options.epsilon, streams[static_cast<std::size_t>(i)], options.convention).transpose();
      }
    }, 64);
    if (!state.positions.allFinite()) throw Diverged("langevin chains became non-finite at step " + std::to_string(step));
    state.iteration = static_cast<int>(step);
    const bool last = step == options.steps;
    if (last || step % options.record_every == 0) push_row(step);
  }
  if (options.steps > 0) record.snapshots.emplace_back(state.iteration, state.positions);
  record.final_state = state;
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  record.timed = true;
  return record;
}

// --- Ornstein-Uhlenbeck closed forms (p = N(0, 1)) ---------------------------

struct OuState {
  double mean = 0.0;
  double variance = 1.0;
  double time = 0.0;
};

/// Law at time t of the Langevin diffusion towards N(0, 1) started from N(mean, variance).
inline OuState ou_closed_form(const OuState& initial, double t) {
  if (!(t >= 0.0)) throw ContractViolation("ou_closed_form: t must be >= 0");
  if (!(initial.variance > 0.0)) throw ContractViolation("ou_closed_form: variance must be positive");
  const double decay = std::exp(-t);
  return {initial.mean * decay, 1.0 + (initial.variance - 1.0) * decay * decay, initial.time + t};
}

/// E_{x~q} |d/dx log(q/p)|^2 for 1D Gaussians q = N(qm, qv), p = N(pm, pv).
inline double fisher_divergence_gaussian(double q_mean, double q_var, double p_mean, double p_var) {
  if (!(q_var > 0.0) || !(p_var > 0.0)) throw ContractViolation("fisher_divergence_gaussian: variances must be positive");
  const double slope = 1.0 / p_var - 1.0 / q_var;
  const double offset = (q_mean - p_mean) / p_var;
  return q_var * slope * slope + offset * offset;
}

}  // namespace steinflow
