#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "steinflow/kernels.hpp"
#include "test_support.hpp"

using namespace steinflow;
using steinflow::testing::min_eigenvalue;
using steinflow::testing::random_points;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Mixed partial d/dx_a d/dy_b k by a four-point stencil on kernel_eval only.
double fd_mixed(const KernelSpec& spec, const Vector& x, const Vector& y, Eigen::Index a, Eigen::Index b,
                double step = 1e-4) {
  auto k = [&](double dx, double dy) {
    Vector xs = x, ys = y;
    xs[a] += dx;
    ys[b] += dy;
    return kernel_eval(spec, xs, ys);
  };
  return (k(step, step) - k(step, -step) - k(-step, step) + k(-step, -step)) / (4.0 * step * step);
}

std::vector<KernelSpec> radial_specs() {
  return {KernelSpec::rbf(0.5), KernelSpec::rbf(1.0), KernelSpec::rbf(2.3), KernelSpec::imq(0.7),
          KernelSpec::imq(1.5, -0.3, 2.0)};
}

}  // namespace

TEST(KernelEval, Examples) {
  EXPECT_EQ(kernel_eval(KernelSpec::rbf(1.0), vec({0, 0}), vec({0, 0})), 1.0);
  EXPECT_NEAR(kernel_eval(KernelSpec::rbf(1.0), vec({1, 0}), vec({0, 0})), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(kernel_eval(KernelSpec::rbf(1.0), vec({1, 0}), vec({0, 0})), 0.60653, 1e-5);
  EXPECT_EQ(kernel_eval(KernelSpec::imq(1.0, -0.5, 1.0), vec({3, -1}), vec({3, -1})), 1.0);
  EXPECT_EQ(kernel_eval(KernelSpec::linear(), vec({1, 2}), vec({3, 4})), 12.0);
}

TEST(KernelEval, Errors) {
  EXPECT_THROW(kernel_eval(KernelSpec::rbf(1.0), vec({0, 0}), vec({0})), ContractViolation);
  EXPECT_THROW(kernel_eval(KernelSpec::rbf(0.0), vec({0}), vec({0})), ConfigError);
  EXPECT_THROW(kernel_eval(KernelSpec::rbf(-1.0), vec({0}), vec({0})), ConfigError);
  EXPECT_THROW(kernel_grad_x(KernelSpec::imq(1.0, -1.5), vec({0}), vec({0})), ConfigError);
}

TEST(KernelGradX, Examples) {
  const KernelSpec rbf = KernelSpec::rbf(1.0);
  const Vector g = kernel_grad_x(rbf, vec({0.3, -2.0}), vec({0.3, -2.0}));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_NEAR(kernel_grad_x(rbf, vec({1.0}), vec({0.0}))[0], -std::exp(-0.5), 1e-15);
  EXPECT_NEAR(kernel_grad_x(rbf, vec({1.0}), vec({0.0}))[0], -0.60653, 1e-5);
}

TEST(KernelGradX, AntisymmetryForRadialFamilies) {
  std::mt19937_64 rng(7);
  for (const KernelSpec& spec : radial_specs()) {
    const Matrix pts = random_points(rng, 2, 3);
    const Vector x = pts.row(0).transpose(), y = pts.row(1).transpose();
    EXPECT_TRUE(kernel_grad_x(spec, x, y).isApprox(-kernel_grad_y(spec, x, y)));
    EXPECT_TRUE(kernel_grad_x(spec, x, y).isApprox(-kernel_grad_x(spec, y, x)));
    EXPECT_EQ(kernel_eval(spec, x, y), kernel_eval(spec, y, x));
  }
}

TEST(KernelGradX, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 5);
  auto specs = radial_specs();
  specs.push_back(KernelSpec::linear());
  for (int trial = 0; trial < 200; ++trial) {
    const KernelSpec& spec = specs[static_cast<std::size_t>(trial) % specs.size()];
    const int d = dim(rng);
    const Matrix pts = random_points(rng, 2, d);
    const Vector x = pts.row(0).transpose(), y = pts.row(1).transpose();
    const Vector fd = steinflow::testing::fd_gradient([&](const Vector& p) { return kernel_eval(spec, p, y); }, x);
    EXPECT_LT((kernel_grad_x(spec, x, y) - fd).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    const Vector fdy = steinflow::testing::fd_gradient([&](const Vector& p) { return kernel_eval(spec, x, p); }, y);
    EXPECT_LT((kernel_grad_y(spec, x, y) - fdy).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(KernelTrace, Examples) {
  EXPECT_DOUBLE_EQ(kernel_trace_grad_xx(KernelSpec::rbf(1.0), vec({0.4, 1.0}), vec({0.4, 1.0})), 2.0);
  EXPECT_DOUBLE_EQ(kernel_trace_grad_xx(KernelSpec::rbf(2.0), vec({5.0}), vec({5.0})), 0.25);
  EXPECT_DOUBLE_EQ(kernel_trace_grad_xx(KernelSpec::linear(), vec({1, 2, 3}), vec({0, 0, 0})), 3.0);
}

TEST(KernelTrace, MatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const KernelSpec spec = radial_specs()[static_cast<std::size_t>(trial) % 5];
    const int d = dim(rng);
    const Matrix pts = random_points(rng, 2, d, 0.7);
    const Vector x = pts.row(0).transpose();
    const Vector y = trial % 2 == 0 ? x : Vector(pts.row(1).transpose());
    double fd_trace = 0.0;
    const Matrix mixed = kernel_grad_xy(spec, x, y);
    for (Eigen::Index a = 0; a < d; ++a) {
      fd_trace += fd_mixed(spec, x, y, a, a);
      for (Eigen::Index b = 0; b < d; ++b) EXPECT_NEAR(mixed(a, b), fd_mixed(spec, x, y, a, b), 1e-6);
    }
    const double exact = kernel_trace_grad_xx(spec, x, y);
    EXPECT_LE(std::abs(exact - fd_trace), 1e-5 * std::max(1e-3, std::abs(exact))) << "trial " << trial;
    EXPECT_NEAR(mixed.trace(), exact, 1e-12 * std::max(1.0, std::abs(exact)));
  }
}

TEST(KernelInvariants, RbfSelfGradientIsExactlyZero) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix pts = random_points(rng, 1, 4, 10.0);
    const Vector x = pts.row(0).transpose();
    const Vector g = kernel_grad_x(KernelSpec::rbf(0.1 + trial * 0.1), x, x);
    for (double v : g) EXPECT_EQ(v, 0.0);
  }
}

TEST(KernelInvariants, GramMatricesArePositiveSemidefinite) {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> size(2, 32), dim(1, 5);
  auto specs = radial_specs();
  specs.push_back(KernelSpec::linear());
  for (int trial = 0; trial < 100; ++trial) {
    const KernelSpec& spec = specs[static_cast<std::size_t>(trial) % specs.size()];
    const Matrix pts = random_points(rng, size(rng), dim(rng), 1.5);
    Matrix gram(pts.rows(), pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < pts.rows(); ++j)
        gram(i, j) = kernel_eval(spec, pts.row(i).transpose(), pts.row(j).transpose());
    EXPECT_EQ(gram, gram.transpose());
    EXPECT_GE(min_eigenvalue(gram), -1e-8 * gram.trace()) << "trial " << trial;
  }
}

TEST(MedianBandwidth, Examples) {
  Matrix two(2, 1);
  two << 0.0, 1.0;
  EXPECT_NEAR(median_bandwidth(two), 1.0 / std::sqrt(2.0 * std::log(3.0)), 1e-15);
  EXPECT_NEAR(median_bandwidth(two), 0.6745, 5e-4);  // rounded display value
  Matrix three(3, 1);
  three << 0.0, 2.0, 4.0;
  EXPECT_NEAR(median_bandwidth(three), 2.0 / std::sqrt(2.0 * std::log(4.0)), 1e-15);
}

TEST(MedianBandwidth, IsHomogeneous) {
  std::mt19937_64 rng(23);
  const Matrix pts = random_points(rng, 17, 3);
  EXPECT_NEAR(median_bandwidth(3.5 * pts), 3.5 * median_bandwidth(pts), 1e-12);
}

TEST(MedianBandwidth, DegenerateEnsembles) {
  EXPECT_THROW(median_bandwidth(Matrix::Zero(1, 2)), DegenerateEnsemble);
  EXPECT_THROW(median_bandwidth(Matrix::Constant(5, 2, 3.0)), DegenerateEnsemble);
}

TEST(KernelChoice, MedianRuleResolvesAgainstPositions) {
  Matrix three(3, 1);
  three << 0.0, 2.0, 4.0;
  const KernelSpec spec = KernelChoice::median_rule().resolve(three);
  EXPECT_EQ(spec.family, KernelFamily::RBF);
  EXPECT_DOUBLE_EQ(spec.bandwidth, median_bandwidth(three));
  EXPECT_EQ(KernelChoice::fixed(KernelSpec::rbf(0.3)).resolve(three).bandwidth, 0.3);
}
