#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "steinflow/continuum.hpp"
#include "test_support.hpp"

using namespace steinflow;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

const auto std_normal = GaussianTarget::standard(1);
const auto rbf1 = KernelSpec::rbf(1.0);

double rk4_error(double dt) {
  OdeConfig cfg{Integrator::RK4, dt, 1.0};
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1),
                                    ParticleEnsemble::from_positions(column({2.0})), cfg);
  return std::abs(rec.final_state.positions(0, 0) - 2.0 * std::exp(-1.0));
}

ParticleEnsemble shifted_start(int n, std::uint64_t seed) {
  Rng rng(seed);
  return ParticleEnsemble::from_gaussian(GaussianTarget::scalar(2.0, 1.0), n, rng);
}

}  // namespace

TEST(VlasovRhs, Examples) {
  EXPECT_DOUBLE_EQ(vlasov_rhs(std_normal, rbf1, column({2.0}))(0, 0), -2.0);
  const FunctionTarget flat(
      1, [](const Vector&) { return 0.0; }, [](const Vector& x) { return Vector(Vector::Zero(x.size())); });
  EXPECT_EQ(vlasov_rhs(flat, rbf1, column({0.7}))(0, 0), 0.0);
  EXPECT_THROW(vlasov_rhs(std_normal, rbf1, Matrix(0, 1)), ContractViolation);
  EXPECT_THROW(vlasov_rhs(std_normal, rbf1, Matrix::Zero(2, 2)), ContractViolation);
}

TEST(VlasovRhs, NearlyVanishesOnExactSamples) {
  Rng rng(3);
  const Matrix draws = std_normal.sample(rng, 2000);
  const Matrix rhs = vlasov_rhs(std_normal, rbf1, draws);
  // |phi*(x)| <= ||phi*||_H sqrt(k(x, x)) = S, and S^2 ~ mean kappa_p(x, x) / n under p.
  double diag = 0.0;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) diag += stein_kernel(std_normal, rbf1, draws.row(i), draws.row(i));
  const double mc = std::sqrt(diag / draws.rows() / draws.rows());
  EXPECT_LT(rhs.rowwise().norm().maxCoeff(), 3.0 * mc);
  EXPECT_LE(rhs.rowwise().norm().maxCoeff(), ksd_vstat(std_normal, rbf1, draws).value * (1.0 + 1e-12));
}

TEST(IntegrateVlasov, ScalarLinearOde) {
  OdeConfig cfg{Integrator::RK4, 0.01, 1.0};
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1),
                                    ParticleEnsemble::from_positions(column({2.0})), cfg);
  EXPECT_NEAR(rec.final_state.positions(0, 0), 2.0 * std::exp(-1.0), 1e-6);
  EXPECT_NEAR(rec.final_state.positions(0, 0), 0.73576, 1e-5);
  EXPECT_EQ(rec.rows.size(), 101u);
  EXPECT_NEAR(rec.rows.back().time, 1.0, 1e-12);
}

TEST(IntegrateVlasov, Rk4IsFourthOrder) {
  const double ratio = rk4_error(0.1) / rk4_error(0.05);
  EXPECT_GT(ratio, 13.0);
  EXPECT_LT(ratio, 19.0);
}

TEST(IntegrateVlasov, ZeroHorizonReturnsInitialState) {
  const auto init = shifted_start(20, 5);
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1), init, OdeConfig{Integrator::RK4, 0.01, 0.0},
                                    FlowOptions{true, 1, 0});
  EXPECT_EQ(rec.final_state.positions, init.positions);
  EXPECT_EQ(*rec.final_state.tracked_log_q, *init.tracked_log_q);
  EXPECT_EQ(rec.rows.size(), 1u);
}

TEST(IntegrateVlasov, ConfigValidation) {
  EXPECT_THROW((OdeConfig{Integrator::RK4, 0.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((OdeConfig{Integrator::RK4, 2.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((OdeConfig{Integrator::RK4, 0.1, -1.0}.validate()), ConfigError);
  EXPECT_EQ((OdeConfig{Integrator::RK4, 0.1, 1.0}.steps()), 10);
  EXPECT_EQ((OdeConfig{Integrator::RK4, 0.3, 1.0}.steps()), 3);
}

TEST(IntegrateVlasov, EulerStepIsOneSvgdStepBitwise) {
  const auto init = shifted_start(150, 7);
  for (const KernelSpec& spec : {rbf1, KernelSpec::imq(0.8)}) {
    const auto flow = integrate_vlasov(std_normal, KernelChoice::fixed(spec), init,
                                       OdeConfig{Integrator::Euler, 0.05, 0.05});
    const auto step = svgd_step(std_normal, spec, init, 0.05, false);
    EXPECT_EQ(flow.final_state.positions, step.positions);
  }
}

TEST(IntegrateVlasov, SingleParticleLogDensityLosesUnitRate) {
  // For one particle, div phi* = tr d_q d_x k at coincidence = d / h^2.
  ParticleEnsemble e = ParticleEnsemble::from_positions(column({2.0}));
  e.tracked_log_q = Vector::Constant(1, 0.25);
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1), e, OdeConfig{Integrator::RK4, 0.01, 1.5},
                                    FlowOptions{true, 10, 0});
  EXPECT_NEAR((*rec.final_state.tracked_log_q)[0], 0.25 - 1.5, 1e-12);
}

// Along the particle flow d/dt mean_i(log q - log p)(x_i) equals -S_V^2 exactly,
// so a central difference only carries integration error.
TEST(IntegrateVlasov, TrackedKlDecaysAtRateKsdSquared) {
  auto state = shifted_start(300, 9);
  const auto choice = KernelChoice::fixed(rbf1);
  const double dt = 0.01;
  advance_vlasov(std_normal, choice, state, dt, 49, Integrator::RK4, true);
  const double before = kl_tracked(state, std_normal).value;
  advance_vlasov(std_normal, choice, state, dt, 1, Integrator::RK4, true);
  const double s = ksd_vstat(std_normal, rbf1, state.positions).value;
  advance_vlasov(std_normal, choice, state, dt, 1, Integrator::RK4, true);
  const double after = kl_tracked(state, std_normal).value;
  const double rate = (after - before) / (2.0 * dt);
  EXPECT_NEAR(rate / (-s * s), 1.0, 1e-3);
}

TEST(IntegrateVlasov, MedianBandwidthIsResolvedPerStage) {
  const auto init = shifted_start(60, 11);
  const auto rec =
      integrate_vlasov(std_normal, KernelChoice::median_rule(), init, OdeConfig{Integrator::RK4, 0.05, 0.5});
  EXPECT_DOUBLE_EQ(rec.rows.front().bandwidth, median_bandwidth(init.positions));
  EXPECT_DOUBLE_EQ(rec.rows.back().bandwidth, median_bandwidth(rec.final_state.positions));
  EXPECT_LT(rec.rows.back().ksd, rec.rows.front().ksd);
}

TEST(PathIntegralKl, RecoversKlFromKsdPath) {
  const auto init = shifted_start(1000, 13);
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1), init, OdeConfig{Integrator::RK4, 0.05, 10.0});
  const PathIntegral pi = path_integral_kl(rec);
  EXPECT_NEAR(pi.estimate, 2.0, 0.3);
  EXPECT_GE(pi.truncated, 0.0);
  EXPECT_GE(pi.tail, 0.0);
  EXPECT_DOUBLE_EQ(pi.estimate, pi.truncated + pi.tail);
}

TEST(PathIntegralKl, ZeroPathAtTheTarget) {
  Rng rng(15);
  const auto init = ParticleEnsemble::from_gaussian(std_normal, 1000, rng);
  const auto rec = integrate_vlasov(std_normal, KernelChoice::fixed(rbf1), init, OdeConfig{Integrator::RK4, 0.1, 2.0});
  EXPECT_LT(path_integral_kl(rec).estimate, 0.05);
}

TEST(PathIntegralKl, NeedsTwoRows) {
  TrajectoryRecord rec;
  rec.rows.resize(1);
  EXPECT_THROW(path_integral_kl(rec), ContractViolation);
}

TEST(Langevin, Examples) {
  Rng rng(17);
  const Vector x = Vector::Constant(1, 1.3);
  EXPECT_EQ(langevin_step(std_normal, x, 0.0, rng), x);
  EXPECT_DOUBLE_EQ(langevin_noise_scale(0.01, NoiseConvention::Sde), std::sqrt(0.02));
  EXPECT_DOUBLE_EQ(langevin_noise_scale(0.01, NoiseConvention::TwoRootEps), 0.2);
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(langevin_step(std_normal, x, 0.1, a), langevin_step(std_normal, x, 0.1, b));
}

TEST(Langevin, LongChainHasUnitVariance) {
  Rng rng(19);
  Vector x = Vector::Zero(1);
  double sum = 0.0, sum2 = 0.0;
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    x = langevin_step(std_normal, x, 0.01, rng);
    sum += x[0];
    sum2 += x[0] * x[0];
  }
  const double mean = sum / steps;
  EXPECT_NEAR(sum2 / steps - mean * mean, 1.0, 0.05);
}

TEST(Langevin, ChainsDoNotDependOnWorkerCount) {
  const auto init = shifted_start(300, 21);
  LangevinOptions opts;
  opts.steps = 20;
  opts.seed = 99;
  parallel::set_worker_count(1);
  const auto one = run_langevin(std_normal, KernelChoice::fixed(rbf1), init, opts);
  parallel::set_worker_count(4);
  const auto four = run_langevin(std_normal, KernelChoice::fixed(rbf1), init, opts);
  parallel::set_worker_count(0);
  EXPECT_EQ(one.final_state.positions, four.final_state.positions);
  ASSERT_EQ(one.rows.size(), four.rows.size());
  for (std::size_t r = 0; r < one.rows.size(); ++r) EXPECT_EQ(one.rows[r].ksd, four.rows[r].ksd);
  EXPECT_NEAR(one.rows.back().time, 0.2, 1e-12);
}

TEST(OuClosedForm, Examples) {
  const OuState s0{2.0, 1.0, 0.0};
  const OuState same = ou_closed_form(s0, 0.0);
  EXPECT_EQ(same.mean, 2.0);
  EXPECT_EQ(same.variance, 1.0);
  const OuState half = ou_closed_form(s0, std::numbers::ln2);
  EXPECT_NEAR(half.mean, 1.0, 1e-15);
  EXPECT_NEAR(half.variance, 1.0, 1e-15);
  const OuState late = ou_closed_form(OuState{5.0, 9.0, 0.0}, 30.0);
  EXPECT_NEAR(late.mean, 0.0, 1e-12);
  EXPECT_NEAR(late.variance, 1.0, 1e-12);
}

TEST(FisherDivergence, Examples) {
  EXPECT_EQ(fisher_divergence_gaussian(0.3, 2.0, 0.3, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(fisher_divergence_gaussian(2.0, 1.0, 0.0, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(fisher_divergence_gaussian(0.0, 2.0, 0.0, 1.0), 0.5);
  EXPECT_THROW(fisher_divergence_gaussian(0.0, 0.0, 0.0, 1.0), ContractViolation);
}

TEST(FisherDivergence, MatchesQuadrature) {
  const double qm = 0.4, qv = 1.7, pm = -0.3, pv = 0.6;
  double total = 0.0;
  const double h = 1e-3;
  for (double x = -15.0; x <= 15.0; x += h) {
    const double q = std::exp(-0.5 * (x - qm) * (x - qm) / qv) / std::sqrt(2.0 * std::numbers::pi * qv);
    const double g = -(x - qm) / qv + (x - pm) / pv;
    total += q * g * g * h;
  }
  EXPECT_NEAR(fisher_divergence_gaussian(qm, qv, pm, pv), total, 1e-8);
}

TEST(LangevinRateIdentity, KlDecaysAtFisherRate) {
  const OuState s0{2.0, 4.0, 0.0};
  const double dt = 1e-4;
  for (double t : {0.1, 0.5, 1.0}) {
    auto kl_at = [&](double u) {
      const OuState s = ou_closed_form(s0, u);
      return kl_gaussian(GaussianTarget::scalar(s.mean, s.variance), std_normal);
    };
    const double rate = (kl_at(t + dt) - kl_at(t - dt)) / (2.0 * dt);
    const OuState s = ou_closed_form(s0, t);
    const double fisher = fisher_divergence_gaussian(s.mean, s.variance, 0.0, 1.0);
    EXPECT_NEAR(rate / -fisher, 1.0, 1e-4) << "t = " << t;
  }
}
