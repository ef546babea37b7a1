#pragma once

// Executable numerical checks of the inequalities and identities behind SVGD.
// Every check is deterministic given its configuration and seed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "steinflow/continuum.hpp"
#include "steinflow/discrepancy.hpp"
#include "steinflow/drift.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/random.hpp"
#include "steinflow/svgd.hpp"
#include "steinflow/targets.hpp"

namespace steinflow::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double bound_or_target = 0.0;
  double tolerance = 0.0;
  std::string details;
};

/// Shared experimental setup: Gaussian target, Gaussian start, RBF kernel.
struct GaussianSetup {
  Vector target_mean = Vector::Zero(1);
  Matrix target_cov = Matrix::Identity(1, 1);
  Vector init_mean = Vector::Constant(1, 2.0);
  Matrix init_cov = Matrix::Identity(1, 1);
  KernelSpec kernel = KernelSpec::rbf(1.0);
  int n = 2000;
};

struct DescentConfig {
  GaussianSetup setup;
  int steps = 20;
  double max_epsilon = 0.01;
  double safety = 0.5;
  /// When set, eps = step_scale * eps* regardless of max_epsilon and safety.
  std::optional<double> step_scale;
  double se_multiplier = 3.0;
};

struct RateConfig {
  GaussianSetup setup;
  double dt = 0.01;
  std::vector<double> times{0.5, 1.0, 2.0};
  double ratio_low = 0.85;
  double ratio_high = 1.15;
  /// Start from exact draws of the target instead of the initial Gaussian.
  bool start_at_target = false;
};

struct LogdetConfig {
  int trials = 10000;
  int max_dim = 8;
  double slack = 1e-12;
};

struct BlConfig {
  int pairs = 50;
  int max_points = 16;
  double epsilon = 0.05;
  double shift = 1.0;
  double bandwidth = 1.0;
  int grid_points = 161;
  double inflation = 1.5;
};

struct FixedPointConfig {
  int n = 10000;
  double bandwidth = 1.0;
  /// Nonzero shifts the exact sample (negative control; expected to fail).
  double shift = 0.0;
  double c_multiplier = 3.0;
};

struct NormIdentityConfig {
  int ensembles = 50;
  int max_n = 32;
  int max_dim = 4;
  double rel_tolerance = 1e-10;
};

struct VerifyConfig {
  std::uint64_t seed = 0;
  DescentConfig descent;
  RateConfig rate;
  LogdetConfig logdet;
  BlConfig bl;
  FixedPointConfig fixed_point;
  NormIdentityConfig norm_identity;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

inline double standard_error(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

/// Per-particle log q - log p.
inline Vector log_ratio(const ParticleEnsemble& e, const Target& target) {
  Vector out(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    out[i] = (*e.tracked_log_q)[i] - target.log_density(e.positions.row(i).transpose());
  }
  return out;
}

inline ParticleEnsemble draw_start(const GaussianSetup& s, std::uint64_t seed, std::string_view key,
                                   std::uint64_t index = 0, bool at_target = false) {
  Rng rng = make_stream(seed, key, index);
  const GaussianTarget init = at_target ? GaussianTarget(s.target_mean, s.target_cov)
                                        : GaussianTarget(s.init_mean, s.init_cov);
  if (s.n < 1) throw ConfigError("verify: n must be >= 1");
  return ParticleEnsemble::from_gaussian(init, s.n, rng, true);
}

}  // namespace detail

/// R = sup_x { L/2 k(x, x) + 2 tr d_x d_x' k(x, x) } for a translation-invariant kernel.
inline double descent_constant(const GaussianTarget& target, const KernelSpec& spec) {
  if (!spec.radial()) throw ConfigError("descent constant needs a radial kernel");
  const Vector origin = Vector::Zero(target.dimension());
  return 0.5 * *target.score_lipschitz() * kernel_eval(spec, origin, origin) +
         2.0 * kernel_trace_grad_xx(spec, origin, origin);
}

/// Per-step tracked KL change against -eps (1 - eps R) S^2 for `steps`
/// consecutive steps of size eps <= safety * eps*.
inline CheckResult check_descent_inequality(const DescentConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = "descent_inequality";
  const GaussianTarget target(cfg.setup.target_mean, cfg.setup.target_cov);
  const KernelSpec& spec = cfg.setup.kernel;
  if (cfg.setup.n < 2) throw ConfigError("descent check needs n >= 2");
  const double R = descent_constant(target, spec);
  ParticleEnsemble state = detail::draw_start(cfg.setup, seed, "verify.descent");

  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_tol = 0.0;
  int worst_step = -1;
  bool ok = true;
  double eps_used = 0.0;
  for (int step = 0; step < cfg.steps; ++step) {
    const Matrix& X = state.positions;
    const DriftField drift = stein_drift(spec, X, target.scores(X), X, DriftDetail::Jacobian);
    const double s = ksd_vstat(target, spec, X).value;
    const StepCap cap = step_cap_from_drift(spec, X, drift, s);
    double eps = cfg.step_scale ? *cfg.step_scale * cap.value() : std::min(cfg.max_epsilon, cfg.safety * cap.value());
    if (!std::isfinite(eps)) eps = cfg.max_epsilon;
    eps_used = eps;
    const Vector before = detail::log_ratio(state, target);
    ParticleEnsemble next;
    try {
      next = apply_step(state, drift, eps, true);
    } catch (const StepTooLarge& e) {
      res.passed = false;
      res.observed = std::numeric_limits<double>::infinity();
      res.details = std::string("step ") + std::to_string(step) + ": " + e.what();
      return res;
    }
    const Vector increments = detail::log_ratio(next, target) - before;
    const double change = increments.mean();
    const double bound = -eps * (1.0 - eps * R) * s * s;
    const double tol = cfg.se_multiplier * detail::standard_error(increments);
    const double excess = change - bound;
    if (excess > tol) ok = false;
    if (excess - tol > worst_excess - worst_tol) {
      worst_excess = excess;
      worst_tol = tol;
      worst_step = step;
    }
    state = std::move(next);
  }
  res.passed = ok;
  res.observed = cfg.steps > 0 ? worst_excess : 0.0;
  res.bound_or_target = 0.0;
  res.tolerance = worst_tol;
  res.details = "R=" + detail::fmt(R) + " steps=" + std::to_string(cfg.steps) + " last_eps=" + detail::fmt(eps_used) +
                " worst_step=" + std::to_string(worst_step) +
                " (observed = KL change minus bound, must not exceed tolerance)";
  return res;
}

/// Central difference of tracked KL along the RK4 Vlasov flow against -S^2.
inline CheckResult check_rate_identity(const RateConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = "rate_identity";
  const GaussianTarget target(cfg.setup.target_mean, cfg.setup.target_cov);
  const KernelChoice kernel = KernelChoice::fixed(cfg.setup.kernel);
  if (!(cfg.dt > 0.0)) throw ConfigError("verify.rate.dt must be positive");
  ParticleEnsemble state = detail::draw_start(cfg.setup, seed, "verify.rate", 0, cfg.start_at_target);
  std::vector<double> times = cfg.times;
  std::sort(times.begin(), times.end());

  bool ok = true;
  double worst_ratio = 1.0;
  double now = 0.0;
  std::ostringstream details;
  for (double t : times) {
    const long to_before = std::lround((t - cfg.dt - now) / cfg.dt);
    if (to_before < 0) throw ConfigError("verify.rate.times must be at least dt apart and >= dt");
    advance_vlasov(target, kernel, state, cfg.dt, to_before, Integrator::RK4, true);
    const Vector before = detail::log_ratio(state, target);
    advance_vlasov(target, kernel, state, cfg.dt, 1, Integrator::RK4, true);
    const double s = ksd_vstat(target, cfg.setup.kernel, state.positions).value;
    advance_vlasov(target, kernel, state, cfg.dt, 1, Integrator::RK4, true);
    now = t + cfg.dt;
    const Vector increments = (detail::log_ratio(state, target) - before) / (2.0 * cfg.dt);
    const double rate = increments.mean();
    const double ratio = s > 0.0 ? rate / (-s * s) : std::numeric_limits<double>::infinity();
    const double abs_tol = 3.0 * detail::standard_error(increments);
    const bool in_band = ratio >= cfg.ratio_low && ratio <= cfg.ratio_high;
    const bool absolute = std::abs(rate + s * s) <= abs_tol;
    if (!in_band && !absolute) ok = false;
    if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0) || !std::isfinite(ratio)) worst_ratio = ratio;
    details << "t=" << t << " ratio=" << detail::fmt(ratio) << " S2=" << detail::fmt(s * s) << "; ";
  }
  res.passed = ok;
  res.observed = worst_ratio;
  res.bound_or_target = 1.0;
  res.tolerance = std::max(1.0 - cfg.ratio_low, cfg.ratio_high - 1.0);
  res.details = details.str();
  return res;
}

/// log|det(I + eps B)| - (eps tr B - 2 eps^2 |B|_F^2); nonnegative whenever
/// 0 <= eps <= 1/(2 rho(B + B^T)).
inline double logdet_bound_slack(const Matrix& B, double eps) {
  const Matrix M = Matrix::Identity(B.rows(), B.cols()) + eps * B;
  return std::log(std::abs(M.determinant())) - (eps * B.trace() - 2.0 * eps * eps * B.squaredNorm());
}

inline CheckResult check_logdet_bound(const LogdetConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = "logdet_bound";
  if (cfg.trials < 1 || cfg.max_dim < 1) throw ConfigError("verify.logdet needs trials >= 1 and max_dim >= 1");
  Rng rng = make_stream(seed, "verify.logdet");
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dim(1, cfg.max_dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  int violations = 0;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const int d = dim(rng);
    Matrix B(d, d);
    for (auto& v : B.reshaped()) v = normal(rng);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(B + B.transpose(), Eigen::EigenvaluesOnly);
    const double rho = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double u = 1.0 - unit(rng);  // (0, 1]
    const double eps = rho > 0.0 ? u / (2.0 * rho) : u;
    const double slack = logdet_bound_slack(B, eps);
    if (slack < -cfg.slack) ++violations;
    worst = std::min(worst, slack);
  }
  res.passed = violations == 0;
  res.observed = worst;
  res.bound_or_target = 0.0;
  res.tolerance = cfg.slack;
  res.details = std::to_string(cfg.trials) + " trials, " + std::to_string(violations) + " violations";
  return res;
}

/// Grid estimate of max(sup |g|, Lip g) for g(x, y) = s(x) k(x, y) + grad_x k(x, y)
/// over the box [lo, hi]^(2d), inflated by `inflation`.
inline double bl_norm_estimate(const Target& target, const KernelSpec& spec, double lo, double hi, int points,
                               double inflation) {
  const int d = target.dimension();
  if (points < 2) throw ConfigError("verify.bl.grid_points must be >= 2");
  const int dims = 2 * d;
  const double step = (hi - lo) / (points - 1);
  const double h = step * 1e-3;
  auto g = [&](const Vector& z) -> Vector {
    const Vector x = z.head(d), y = z.tail(d);
    return target.score(x) * kernel_eval(spec, x, y) + kernel_grad_x(spec, x, y);
  };
  long total = 1;
  for (int c = 0; c < dims; ++c) total *= points;
  double sup = 0.0, lip = 0.0;
  Vector z(dims);
  Matrix jac(d, dims);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int c = 0; c < dims; ++c) {
      z[c] = lo + step * static_cast<double>(rem % points);
      rem /= points;
    }
    const Vector gz = g(z);
    sup = std::max(sup, gz.norm());
    for (int c = 0; c < dims; ++c) {
      Vector zp = z, zm = z;
      zp[c] += h;
      zm[c] -= h;
      jac.col(c) = (g(zp) - g(zm)) / (2.0 * h);
    }
    // Operator norm of the Jacobian bounds the local Lipschitz constant.
    Eigen::JacobiSVD<Matrix> svd(jac);
    lip = std::max(lip, svd.singularValues()(0));
  }
  return inflation * std::max(sup, lip);
}

namespace detail {
inline WeightedPoints push_forward(const Target& target, const KernelSpec& spec, const WeightedPoints& m,
                                   double eps) {
  const DriftField drift = stein_drift(spec, m.points, target.scores(m.points), m.points);
  return {m.points + eps * drift.phi, m.weights};
}
}  // namespace detail

/// BL(Phi(mu), Phi(mu')) <= (1 + 2 eps |g|_BL) BL(mu, mu') on random pairs of
/// small uniform empirical measures, one SVGD map per measure.
inline CheckResult check_bl_contraction(const BlConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = "bl_contraction";
  if (cfg.pairs < 0 || cfg.max_points < 1) throw ConfigError("verify.bl needs pairs >= 0 and max_points >= 1");
  const auto target = GaussianTarget::standard(1);
  const KernelSpec spec = KernelSpec::rbf(cfg.bandwidth);
  Rng rng = make_stream(seed, "verify.bl");
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> size(1, cfg.max_points);

  struct Pair {
    WeightedPoints a, b, fa, fb;
  };
  std::vector<Pair> pairs;
  double lo = 0.0, hi = 0.0;
  for (int k = 0; k < cfg.pairs; ++k) {
    Matrix pa(size(rng), 1), pb(size(rng), 1);
    for (auto& v : pa.reshaped()) v = normal(rng);
    for (auto& v : pb.reshaped()) v = normal(rng) + cfg.shift;
    Pair p{WeightedPoints::uniform(pa), WeightedPoints::uniform(pb), {}, {}};
    p.fa = detail::push_forward(target, spec, p.a, cfg.epsilon);
    p.fb = detail::push_forward(target, spec, p.b, cfg.epsilon);
    for (const WeightedPoints* m : {&p.a, &p.b, &p.fa, &p.fb}) {
      lo = std::min(lo, m->points.minCoeff());
      hi = std::max(hi, m->points.maxCoeff());
    }
    pairs.push_back(std::move(p));
  }
  // The box covers every pre- and post-step support with a margin.
  const double margin = 0.5;
  const double norm = bl_norm_estimate(target, spec, lo - margin, hi + margin, cfg.grid_points, cfg.inflation);
  const double factor = 1.0 + 2.0 * cfg.epsilon * norm;

  double worst = 0.0;
  int failures = 0;
  for (const Pair& p : pairs) {
    const double before = bl_distance(p.a, p.b);
    const double after = bl_distance(p.fa, p.fb);
    const double allowed = factor * before;
    // Equal measures map to equal measures; compare at rounding level then.
    if (after > allowed + 1e-12) ++failures;
    if (allowed > 0.0) worst = std::max(worst, after / allowed);
  }
  res.passed = failures == 0;
  res.observed = worst;
  res.bound_or_target = 1.0;
  res.tolerance = 0.0;
  res.details = std::to_string(cfg.pairs) + " pairs, |g|_BL estimate " + detail::fmt(norm) + ", box [" +
                detail::fmt(lo - margin) + ", " + detail::fmt(hi + margin) + "], " + std::to_string(failures) +
                " failures (observed = max after / allowed)";
  return res;
}

/// Mean drift norm on an exact sample of N(0, 1) against 3 sqrt(mean kappa_p(x, x)) / sqrt(n).
inline CheckResult check_fixed_point(const FixedPointConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = cfg.shift == 0.0 ? "fixed_point" : "fixed_point_shifted";
  if (cfg.n < 1) throw ConfigError("verify.fixed_point.n must be >= 1");
  const auto target = GaussianTarget::standard(1);
  const KernelSpec spec = KernelSpec::rbf(cfg.bandwidth);
  Rng rng = make_stream(seed, "verify.fixed_point");
  const Matrix X = target.sample(rng, cfg.n).array() + cfg.shift;
  const Matrix scores = target.scores(X);
  const Matrix phi = stein_drift(spec, X, scores, X).phi;
  const double mean_norm = phi.rowwise().norm().mean();
  const SteinKernelSums sums = stein_kernel_sums(spec, X, scores);
  const double threshold = cfg.c_multiplier * std::sqrt(sums.diagonal.mean()) / std::sqrt(static_cast<double>(cfg.n));
  res.passed = mean_norm < threshold;
  res.observed = mean_norm;
  res.bound_or_target = threshold;
  res.tolerance = 0.0;
  res.details = "n=" + std::to_string(cfg.n) + " shift=" + detail::fmt(cfg.shift);
  return res;
}

/// S computed as sqrt of the kappa_p double sum and as the RKHS norm of phi*.
inline CheckResult check_gradient_norm_identity(const NormIdentityConfig& cfg, std::uint64_t seed) {
  CheckResult res;
  res.name = "gradient_norm_identity";
  if (cfg.ensembles < 0 || cfg.max_n < 2 || cfg.max_dim < 1) {
    throw ConfigError("verify.norm_identity needs ensembles >= 0, max_n >= 2, max_dim >= 1");
  }
  Rng rng = make_stream(seed, "verify.norm_identity");
  std::uniform_int_distribution<int> size(2, cfg.max_n), dim(1, cfg.max_dim);
  std::uniform_real_distribution<double> bandwidth(0.3, 3.0);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int k = 0; k < cfg.ensembles; ++k) {
    const int d = dim(rng);
    const int n = size(rng);
    Matrix X(n, d);
    for (auto& v : X.reshaped()) v = 1.5 * normal(rng);
    const auto target = GaussianTarget::standard(d);
    const KernelSpec spec = KernelSpec::rbf(bandwidth(rng));
    const double a = ksd_vstat(target, spec, X).value;
    const double b = stein_rkhs_norm(target, spec, X);
    const double rel = std::abs(a - b) / std::max(std::abs(a), std::numeric_limits<double>::min());
    worst = std::max(worst, rel);
  }
  res.passed = worst < cfg.rel_tolerance;
  res.observed = worst;
  res.bound_or_target = 0.0;
  res.tolerance = cfg.rel_tolerance;
  res.details = std::to_string(cfg.ensembles) + " random ensembles (observed = max relative difference)";
  return res;
}

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"descent_inequality", "rate_identity",   "logdet_bound",
                                              "bl_contraction",     "fixed_point",     "gradient_norm_identity"};
  return names;
}

/// Run the named checks (all when `only` is not given) in a fixed order. A
/// check that throws is reported as failed; the remaining checks still run.
inline std::vector<CheckResult> report_all(const VerifyConfig& cfg,
                                           const std::optional<std::vector<std::string>>& only = std::nullopt) {
  const std::vector<std::pair<std::string, std::function<CheckResult()>>> checks{
      {"descent_inequality", [&] { return check_descent_inequality(cfg.descent, cfg.seed); }},
      {"rate_identity", [&] { return check_rate_identity(cfg.rate, cfg.seed); }},
      {"logdet_bound", [&] { return check_logdet_bound(cfg.logdet, cfg.seed); }},
      {"bl_contraction", [&] { return check_bl_contraction(cfg.bl, cfg.seed); }},
      {"fixed_point", [&] { return check_fixed_point(cfg.fixed_point, cfg.seed); }},
      {"gradient_norm_identity", [&] { return check_gradient_norm_identity(cfg.norm_identity, cfg.seed); }},
  };
  if (only) {
    for (const std::string& name : *only) {
      if (std::find(check_names().begin(), check_names().end(), name) == check_names().end()) {
        throw ConfigError("unknown check '" + name + "'");
      }
    }
  }
  std::vector<CheckResult> out;
  for (const auto& [name, fn] : checks) {
    if (only && std::find(only->begin(), only->end(), name) == only->end()) continue;
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      CheckResult failed;
      failed.name = name;
      failed.passed = false;
      failed.observed = std::numeric_limits<double>::quiet_NaN();
      failed.details = std::string("error: ") + e.what();
      out.push_back(failed);
    }
  }
  return out;
}

}  // namespace steinflow::verify
