#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/random.hpp"

namespace steinflow {

/// Target distribution known through an unnormalized log density and its score.
///
/// Nothing in the library relies on the normalizing constant; built-in families
/// expose it through log_normalizer() so that KL estimates can be absolute.
class Target {
 public:
  virtual ~Target() = default;

  virtual int dimension() const = 0;
  virtual double log_density(const Eigen::Ref<const Vector>& x) const = 0;
  virtual Vector score(const Eigen::Ref<const Vector>& x) const = 0;

  /// d score / dx. Defaults to central differences of score().
  virtual Matrix score_jacobian(const Eigen::Ref<const Vector>& x) const {
    const int d = dimension();
    Matrix jac(d, d);
    Vector probe = x;
    for (int b = 0; b < d; ++b) {
      const double step = 1e-5 * std::max(1.0, std::abs(x[b]));
      probe[b] = x[b] + step;
      const Vector up = score(probe);
      probe[b] = x[b] - step;
      const Vector down = score(probe);
      probe[b] = x[b];
      jac.col(b) = (up - down) / (2.0 * step);
    }
    return jac;
  }

  /// log of the normalizing constant Z with p = exp(log_density) / Z, when known.
  virtual std::optional<double> log_normalizer() const { return std::nullopt; }

  /// Global Lipschitz constant of the score, when known in closed form.
  virtual std::optional<double> score_lipschitz() const { return std::nullopt; }

  virtual bool has_sampler() const { return false; }
  virtual Vector sample(Rng& /*rng*/) const { throw ContractViolation("target has no exact sampler"); }

  /// Scores for every row of `points` (n x d), returned as n x d.
  Matrix scores(const Eigen::Ref<const Matrix>& points) const {
    Matrix out(points.rows(), points.cols());
    for (Eigen::Index i = 0; i < points.rows(); ++i) out.row(i) = score(points.row(i).transpose()).transpose();
    return out;
  }

  Matrix sample(Rng& rng, int n) const {
    Matrix out(n, dimension());
    for (int i = 0; i < n; ++i) out.row(i) = sample(rng).transpose();
    return out;
  }

 protected:
  void check_dim(const Eigen::Ref<const Vector>& x) const {
    if (x.size() != dimension()) {
      throw ContractViolation("point has dimension " + std::to_string(x.size()) + ", target expects " +
                              std::to_string(dimension()));
    }
  }
};

/// N(mean, cov) with the Cholesky factor computed once at construction.
class GaussianTarget final : public Target {
 public:
  GaussianTarget(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto d = mean_.size();
    if (d < 1) throw ConfigError("gaussian mean must have dimension >= 1");
    if (cov_.rows() != d || cov_.cols() != d) {
      throw ConfigError("gaussian covariance must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    if (!mean_.allFinite() || !cov_.allFinite()) throw ConfigError("gaussian parameters must be finite");
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov_.cwiseAbs().maxCoeff())) {
      throw ConfigError("gaussian covariance is not symmetric");
    }
    chol_.compute(cov_);
    if (chol_.info() != Eigen::Success) throw ConfigError("gaussian covariance is not positive definite");
    const Matrix L = chol_.matrixL();
    if ((L.diagonal().array() <= 0.0).any()) throw ConfigError("gaussian covariance is not positive definite");
    lower_ = L;
    precision_ = chol_.solve(Matrix::Identity(d, d));
    log_det_ = 2.0 * lower_.diagonal().array().log().sum();
  }

  static GaussianTarget standard(int d) { return {Vector::Zero(d), Matrix::Identity(d, d)}; }
  static GaussianTarget scalar(double mean, double variance) {
    return {Vector::Constant(1, mean), Matrix::Constant(1, 1, variance)};
  }

  int dimension() const override { return static_cast<int>(mean_.size()); }

  /// Unnormalized: -1/2 (x - m)^T S^{-1} (x - m).
  double log_density(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    const Vector z = lower_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * z.squaredNorm();
  }

  Vector score(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    return -chol_.solve(x - mean_);
  }

  Matrix score_jacobian(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    return -precision_;
  }

  std::optional<double> log_normalizer() const override {
    return 0.5 * (static_cast<double>(dimension()) * std::log(2.0 * std::numbers::pi) + log_det_);
  }

  /// Spectral norm of the precision matrix.
  std::optional<double> score_lipschitz() const override {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(precision_, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  }

  using Target::sample;
  bool has_sampler() const override { return true; }
  Vector sample(Rng& rng) const override {
    std::normal_distribution<double> normal;
    Vector z(dimension());
    for (auto& v : z) v = normal(rng);
    return mean_ + lower_ * z;
  }

  /// Normalized log pdf.
  double log_pdf(const Eigen::Ref<const Vector>& x) const { return log_density(x) - *log_normalizer(); }

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& precision() const { return precision_; }
  const Matrix& cholesky_lower() const { return lower_; }
  double log_det_covariance() const { return log_det_; }

 private:
  Vector mean_;
  Matrix cov_;
  Eigen::LLT<Matrix> chol_;
  Matrix lower_;
  Matrix precision_;
  double log_det_ = 0.0;
};

/// Finite mixture sum_k w_k N(mean_k, cov_k). The log density is normalized.
class MixtureTarget final : public Target {
 public:
  MixtureTarget(std::vector<double> weights, std::vector<GaussianTarget> components)
      : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty() || weights_.size() != components_.size()) {
      throw ConfigError("mixture needs one weight per component and at least one component");
    }
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw ConfigError("mixture weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
    for (const auto& c : components_) {
      if (c.dimension() != components_.front().dimension()) {
        throw ConfigError("mixture components must share a dimension");
      }
    }
    log_weights_.reserve(weights_.size());
    for (double w : weights_) log_weights_.push_back(std::log(w));
  }

  int dimension() const override { return components_.front().dimension(); }

  double log_density(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    const Vector terms = component_log_terms(x);
    const double top = terms.maxCoeff();
    return top + std::log((terms.array() - top).exp().sum());
  }

  /// Responsibility-weighted component scores.
  Vector score(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    const Vector resp = responsibilities(x);
    Vector out = Vector::Zero(dimension());
    for (std::size_t k = 0; k < components_.size(); ++k) out += resp[static_cast<Eigen::Index>(k)] * components_[k].score(x);
    return out;
  }

  /// sum_k r_k (J_k + s_k s_k^T) - s s^T.
  Matrix score_jacobian(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    const Vector resp = responsibilities(x);
    const int d = dimension();
    Matrix out = Matrix::Zero(d, d);
    Vector mix = Vector::Zero(d);
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const Vector s = components_[k].score(x);
      const double r = resp[static_cast<Eigen::Index>(k)];
      out += r * (components_[k].score_jacobian(x) + s * s.transpose());
      mix += r * s;
    }
    return out - mix * mix.transpose();
  }

  std::optional<double> log_normalizer() const override { return 0.0; }

  using Target::sample;
  bool has_sampler() const override { return true; }
  Vector sample(Rng& rng) const override {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    return components_[pick(rng)].sample(rng);
  }

  Vector responsibilities(const Eigen::Ref<const Vector>& x) const {
    Vector terms = component_log_terms(x);
    terms.array() = (terms.array() - terms.maxCoeff()).exp();
    return terms / terms.sum();
  }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<GaussianTarget>& components() const { return components_; }

 private:
  Vector component_log_terms(const Eigen::Ref<const Vector>& x) const {
    Vector terms(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t k = 0; k < components_.size(); ++k) {
      terms[static_cast<Eigen::Index>(k)] = log_weights_[k] + components_[k].log_pdf(x);
    }
    return terms;
  }

  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<GaussianTarget> components_;
};

/// Target assembled from user callables; the normalizer is unknown.
class FunctionTarget final : public Target {
 public:
  using LogDensityFn = std::function<double(const Vector&)>;
  using ScoreFn = std::function<Vector(const Vector&)>;

  FunctionTarget(int dimension, LogDensityFn log_density, ScoreFn score)
      : dimension_(dimension), log_density_(std::move(log_density)), score_(std::move(score)) {
    if (dimension_ < 1) throw ConfigError("target dimension must be >= 1");
  }

  int dimension() const override { return dimension_; }
  double log_density(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    return log_density_(x);
  }
  Vector score(const Eigen::Ref<const Vector>& x) const override {
    check_dim(x);
    return score_(x);
  }

 private:
  int dimension_;
  LogDensityFn log_density_;
  ScoreFn score_;
};

using VectorField = std::function<Vector(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;

/// (S_p phi)(x) = score(x) . phi(x) + div phi(x).
inline double stein_operator_apply(const Target& target, const VectorField& phi, const ScalarField& div_phi,
                                   const Eigen::Ref<const Vector>& x) {
  if (x.size() != target.dimension()) throw ContractViolation("point dimension does not match target");
  const Vector value = phi(x);
  if (value.size() != x.size()) throw ContractViolation("vector field dimension does not match target");
  return target.score(x).dot(value) + div_phi(x);
}

/// Monte Carlo mean of S_p phi over exact draws; zero in expectation when
/// sampler draws from the target.
inline double stein_identity_residual(const Target& target, const VectorField& phi, const ScalarField& div_phi,
                                      const std::function<Vector(Rng&)>& sampler, int n_samples,
                                      std::uint64_t seed) {
  if (n_samples < 1) throw ContractViolation("stein_identity_residual needs n_samples >= 1");
  Rng rng(seed);
  double sum = 0.0;
  for (int i = 0; i < n_samples; ++i) sum += stein_operator_apply(target, phi, div_phi, sampler(rng));
  return sum / n_samples;
}

}  // namespace steinflow
