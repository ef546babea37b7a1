#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "steinflow/discrepancy.hpp"
#include "test_support.hpp"

using namespace steinflow;
using steinflow::testing::min_eigenvalue;
using steinflow::testing::random_points;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

// kappa_p from finite differences of kernel_eval and log_density only.
double fd_stein_kernel(const Target& p, const KernelSpec& spec, const Vector& x, const Vector& y) {
  const auto logp = [&](const Vector& v) { return p.log_density(v); };
  const Vector sx = steinflow::testing::fd_gradient(logp, x);
  const Vector sy = steinflow::testing::fd_gradient(logp, y);
  const Vector gx = steinflow::testing::fd_gradient([&](const Vector& v) { return kernel_eval(spec, v, y); }, x);
  const Vector gy = steinflow::testing::fd_gradient([&](const Vector& v) { return kernel_eval(spec, x, v); }, y);
  const double h = 1e-4;
  double trace = 0.0;
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    auto k = [&](double dx, double dy) {
      Vector xs = x, ys = y;
      xs[a] += dx;
      ys[a] += dy;
      return kernel_eval(spec, xs, ys);
    };
    trace += (k(h, h) - k(h, -h) - k(-h, h) + k(-h, -h)) / (4.0 * h * h);
  }
  return sx.dot(sy) * kernel_eval(spec, x, y) + sx.dot(gy) + sy.dot(gx) + trace;
}

Matrix exact_draws(const Target& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  return p.sample(rng, n);
}

}  // namespace

TEST(SteinKernel, Examples) {
  const auto p = GaussianTarget::standard(1);
  const auto rbf = KernelSpec::rbf(1.0);
  EXPECT_DOUBLE_EQ(stein_kernel(p, rbf, scalar(0.0), scalar(0.0)), 1.0);
  EXPECT_DOUBLE_EQ(stein_kernel(p, rbf, scalar(1.0), scalar(1.0)), 2.0);
  EXPECT_THROW(stein_kernel(p, rbf, Vector::Zero(2), scalar(0.0)), ContractViolation);
}

TEST(SteinKernel, SymmetricAndMatchesFiniteDifferenceOracle) {
  Matrix cov(2, 2);
  cov << 1.5, 0.4, 0.4, 0.8;
  const GaussianTarget gauss(Vector::Constant(2, 0.3), cov);
  const MixtureTarget mix({0.4, 0.6}, {GaussianTarget::standard(2), gauss});
  std::mt19937_64 rng(3);
  for (const Target* p : {static_cast<const Target*>(&gauss), static_cast<const Target*>(&mix)}) {
    for (const KernelSpec& spec : {KernelSpec::rbf(0.8), KernelSpec::imq(1.2), KernelSpec::linear()}) {
      for (int trial = 0; trial < 20; ++trial) {
        const Matrix pts = random_points(rng, 2, 2, 1.5);
        const Vector x = pts.row(0).transpose(), y = pts.row(1).transpose();
        const double value = stein_kernel(*p, spec, x, y);
        EXPECT_NEAR(value, stein_kernel(*p, spec, y, x), 1e-12 * std::max(1.0, std::abs(value)));
        EXPECT_NEAR(value, fd_stein_kernel(*p, spec, x, y), 1e-5 * std::max(1.0, std::abs(value)));
      }
    }
  }
}

TEST(SteinKernel, GramMatrixIsPositiveSemidefinite) {
  const MixtureTarget p({0.5, 0.5}, {GaussianTarget::scalar(-1.0, 0.5), GaussianTarget::scalar(1.5, 1.0)});
  std::mt19937_64 rng(5);
  for (const KernelSpec& spec : {KernelSpec::rbf(0.7), KernelSpec::imq(1.0)}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix pts = random_points(rng, 25, 1, 2.0);
      Matrix gram(pts.rows(), pts.rows());
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        for (Eigen::Index j = 0; j < pts.rows(); ++j)
          gram(i, j) = stein_kernel(p, spec, pts.row(i).transpose(), pts.row(j).transpose());
      EXPECT_GE(min_eigenvalue(gram), -1e-8 * gram.trace());
    }
  }
}

TEST(KsdVstat, Examples) {
  const auto p = GaussianTarget::standard(1);
  const auto rbf = KernelSpec::rbf(1.0);
  const auto one = ksd_vstat(p, rbf, Matrix::Zero(1, 1));
  EXPECT_DOUBLE_EQ(one.value, 1.0);
  EXPECT_EQ(one.estimator, Estimator::VStat);
  EXPECT_EQ(one.n_points, 1);
  EXPECT_THROW(ksd_vstat(p, rbf, Matrix(0, 1)), ContractViolation);
  EXPECT_THROW(ksd_vstat(p, rbf, Matrix::Zero(3, 2)), ContractViolation);

  Matrix single(1, 1), doubled(2, 1);
  single << 0.7;
  doubled << 0.7, 0.7;
  EXPECT_EQ(ksd_vstat(p, rbf, single).value, ksd_vstat(p, rbf, doubled).value);
}

TEST(KsdVstat, MatchesPairwiseSumOfSteinKernel) {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  const GaussianTarget p(Vector::Zero(2), cov);
  std::mt19937_64 rng(7);
  const Matrix pts = random_points(rng, 30, 2, 1.5);
  for (const KernelSpec& spec : {KernelSpec::rbf(1.1), KernelSpec::imq(0.9, -0.7, 1.5), KernelSpec::linear()}) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < pts.rows(); ++j)
        total += stein_kernel(p, spec, pts.row(i).transpose(), pts.row(j).transpose());
    const double n = static_cast<double>(pts.rows());
    EXPECT_NEAR(ksd_vstat(p, spec, pts).value, std::sqrt(total / (n * n)), 1e-12);
  }
}

TEST(KsdVstat, IsExactlyPermutationInvariant) {
  const auto p = GaussianTarget::standard(3);
  std::mt19937_64 rng(9);
  const Matrix pts = random_points(rng, 300, 3, 2.0);
  std::vector<Eigen::Index> order(300);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    Matrix shuffled(pts.rows(), pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) shuffled.row(i) = pts.row(order[static_cast<std::size_t>(i)]);
    EXPECT_EQ(ksd_vstat(p, KernelSpec::rbf(1.0), pts).value, ksd_vstat(p, KernelSpec::rbf(1.0), shuffled).value);
    EXPECT_EQ(ksd_ustat(p, KernelSpec::imq(1.0), pts).value, ksd_ustat(p, KernelSpec::imq(1.0), shuffled).value);
  }
}

TEST(KsdVstat, VanishesOnExactSamples) {
  const auto p = GaussianTarget::standard(1);
  const auto rbf = KernelSpec::rbf(1.0);
  const Matrix small = exact_draws(p, 250, 11);
  const Matrix large = exact_draws(p, 4000, 12);
  const double s_small = ksd_vstat(p, rbf, small).value;
  const double s_large = ksd_vstat(p, rbf, large).value;
  // Under p the V-statistic is dominated by its diagonal: S^2 ~ mean kappa(x,x) / n.
  double diag = 0.0;
  for (Eigen::Index i = 0; i < large.rows(); ++i) diag += stein_kernel(p, rbf, large.row(i), large.row(i));
  diag /= static_cast<double>(large.rows());
  EXPECT_LT(s_large, 3.0 * std::sqrt(diag / static_cast<double>(large.rows())));
  EXPECT_LT(s_large, s_small / 2.0);
}

TEST(KsdUstat, Examples) {
  const auto p = GaussianTarget::standard(1);
  const auto rbf = KernelSpec::rbf(1.0);
  const auto r = ksd_ustat(p, rbf, Matrix::Zero(2, 1));
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_EQ(r.estimator, Estimator::UStat);
  EXPECT_THROW(ksd_ustat(p, rbf, Matrix::Zero(1, 1)), ContractViolation);

  Matrix two(2, 1);
  two << -0.4, 1.3;
  const double pair = stein_kernel(p, rbf, scalar(-0.4), scalar(1.3));
  EXPECT_NEAR(ksd_ustat(p, rbf, two).value, std::copysign(std::sqrt(std::abs(pair)), pair), 1e-14);

  // Points far out on opposite sides give a negative off-diagonal term.
  Matrix spread(2, 1);
  spread << -3.0, 3.0;
  EXPECT_LT(stein_kernel(p, rbf, scalar(-3.0), scalar(3.0)), 0.0);
  EXPECT_LT(ksd_ustat(p, rbf, spread).value, 0.0);
}

TEST(KsdUstat, IsUnbiasedOnExactSamples) {
  const auto p = GaussianTarget::standard(1);
  const auto rbf = KernelSpec::rbf(1.0);
  std::vector<double> squares;
  for (int seed = 0; seed < 100; ++seed) {
    const double v = ksd_ustat(p, rbf, exact_draws(p, 50, 500 + seed)).value;
    squares.push_back(std::copysign(v * v, v));
  }
  double mean = 0.0;
  for (double s : squares) mean += s / 100.0;
  double var = 0.0;
  for (double s : squares) var += (s - mean) * (s - mean) / 99.0;
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(var / 100.0));
}

TEST(SteinRkhsNorm, AgreesWithVstatToTenDigits) {
  Matrix cov(2, 2);
  cov << 1.2, -0.3, -0.3, 0.7;
  const GaussianTarget gauss(Vector::Constant(2, -0.2), cov);
  const MixtureTarget mix({0.3, 0.7}, {GaussianTarget::standard(2), gauss});
  std::mt19937_64 rng(13);
  for (const Target* p : {static_cast<const Target*>(&gauss), static_cast<const Target*>(&mix)}) {
    for (const KernelSpec& spec : {KernelSpec::rbf(0.6), KernelSpec::imq(1.3), KernelSpec::linear()}) {
      const Matrix pts = random_points(rng, 40, 2, 2.0);
      const double v = ksd_vstat(*p, spec, pts).value;
      EXPECT_NEAR(stein_rkhs_norm(*p, spec, pts), v, 1e-10 * v);
    }
  }
}

TEST(KlGaussian, Examples) {
  EXPECT_EQ(kl_gaussian(GaussianTarget::scalar(0, 1), GaussianTarget::scalar(0, 1)), 0.0);
  EXPECT_NEAR(kl_gaussian(GaussianTarget::scalar(1, 1), GaussianTarget::scalar(0, 1)), 0.5, 1e-15);
  EXPECT_NEAR(kl_gaussian(GaussianTarget::scalar(0, 1), GaussianTarget::scalar(0, 4)),
              0.5 * (0.25 - 1.0 + std::log(4.0)), 1e-15);
  EXPECT_NEAR(kl_gaussian(GaussianTarget::scalar(0, 1), GaussianTarget::scalar(0, 4)), 0.3181, 1e-4);
  Matrix bad(1, 1);
  bad << -1.0;
  EXPECT_THROW(kl_gaussian(Vector::Zero(1), bad, Vector::Zero(1), Matrix::Identity(1, 1)), ConfigError);
}

TEST(KlGaussian, MatchesQuadratureIn1D) {
  const auto q = GaussianTarget::scalar(0.7, 0.5);
  const auto p = GaussianTarget::scalar(-0.4, 2.0);
  double total = 0.0;
  const double h = 1e-3;
  for (double x = -12.0; x <= 12.0; x += h) {
    const double lq = q.log_pdf(scalar(x));
    total += std::exp(lq) * (lq - p.log_pdf(scalar(x))) * h;
  }
  EXPECT_NEAR(kl_gaussian(q, p), total, 1e-8);
}

TEST(KlTracked, InitialEnsembleAgreesWithClosedForm) {
  const auto p = GaussianTarget::scalar(0.0, 1.0);
  const auto q0 = GaussianTarget::scalar(2.0, 1.0);
  Rng rng(17);
  const auto ensemble = ParticleEnsemble::from_gaussian(q0, 10000, rng);
  const TrackedKl kl = kl_tracked(ensemble, p);
  EXPECT_TRUE(kl.absolute);
  EXPECT_NEAR(kl.value, kl_gaussian(q0, p), 0.1);
  EXPECT_NEAR(kl.value, 2.0, 0.1);
  EXPECT_GT(kl.standard_error, 0.0);

  Rng rng2(18);
  const auto same = ParticleEnsemble::from_gaussian(p, 10000, rng2);
  EXPECT_NEAR(kl_tracked(same, p).value, 0.0, 1e-12);
}

TEST(KlTracked, Errors) {
  const auto p = GaussianTarget::standard(1);
  EXPECT_THROW(kl_tracked(ParticleEnsemble::from_positions(Matrix::Zero(3, 1)), p), TrackingDisabled);
}

TEST(KlTracked, GeneralTargetsAreFlaggedRelative) {
  const FunctionTarget f(
      1, [](const Vector& x) { return -0.5 * x.squaredNorm(); }, [](const Vector& x) { return Vector(-x); });
  Rng rng(19);
  const auto ensemble = ParticleEnsemble::from_gaussian(GaussianTarget::scalar(1.0, 1.0), 100, rng);
  EXPECT_FALSE(kl_tracked(ensemble, f).absolute);
}
