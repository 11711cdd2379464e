#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "epmix/exp_power.hpp"

namespace epmix {

enum class Parametrization { naive, centered, noncentered };

std::string_view to_string(Parametrization p);
/// Accepts "naive", "centered" and "noncentered" (also "non-centered").
Parametrization parse_parametrization(std::string_view name);

/// Flat vector of unconstrained sampler coordinates.
///   naive:       [z2]
///   centered:    [z2, log xi, logit(delta / pi)]
///   noncentered: [w,  log xi, logit(delta / pi)]
using UnconstrainedState = Eigen::VectorXd;

/// The differentiable part g(z) of the negative log posterior. Implementations
/// must be immutable once constructed; one instance is shared by every chain.
class SmoothTerm {
 public:
  virtual ~SmoothTerm() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> z) const = 0;
  /// Writes dg/dz into `grad` and returns g(z).
  virtual double value_and_grad(std::span<const double> z, std::span<double> grad) const = 0;
};

struct RegressionProblem {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  double sigma2 = 1.0;

  RegressionProblem(Eigen::VectorXd y, Eigen::MatrixXd X, double sigma2);

  std::size_t m() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t n2() const { return static_cast<std::size_t>(X.cols()); }
};

/// g(z) = ||y - X z||^2 / (2 sigma2). Gradient evaluations use the cached
/// Gram matrix so their cost does not grow with the number of rows.
class GaussianLikelihood final : public SmoothTerm {
 public:
  explicit GaussianLikelihood(RegressionProblem problem);

  std::size_t dim() const override { return problem_.n2(); }
  double value(std::span<const double> z) const override;
  double value_and_grad(std::span<const double> z, std::span<double> grad) const override;

  const RegressionProblem& problem() const { return problem_; }

 private:
  RegressionProblem problem_;
  Eigen::MatrixXd gram_;  // X'X
  Eigen::VectorXd xty_;   // X'y
  double yty_ = 0.0;
};

/// g = 0; the target then reduces to the prior alone.
class ZeroSmoothTerm final : public SmoothTerm {
 public:
  explicit ZeroSmoothTerm(std::size_t n) : n_(n) {}
  std::size_t dim() const override { return n_; }
  double value(std::span<const double>) const override { return 0.0; }
  double value_and_grad(std::span<const double>, std::span<double> grad) const override;

 private:
  std::size_t n_;
};

/// A posterior exp{-g(z) - lambda ||z||_q^q} in one of the three
/// parametrizations. Log densities include every normalizing constant of the
/// prior and latent laws, so integrals of exp(log_density) agree across
/// parametrizations.
class TargetSpec {
 public:
  TargetSpec(std::shared_ptr<const SmoothTerm> smooth, ExpPowerParams ep, Parametrization param);

  static TargetSpec regression(RegressionProblem problem, ExpPowerParams ep, Parametrization param);

  const SmoothTerm& smooth() const { return *smooth_; }
  const ExpPowerParams& ep() const { return ep_; }
  Parametrization parametrization() const { return param_; }
  std::size_t n2() const { return n2_; }
  std::size_t dim() const { return param_ == Parametrization::naive ? n2_ : 3 * n2_; }

  /// Log density in unconstrained coordinates (Jacobians included) with its
  /// gradient written to `grad`. Returns -inf when a coordinate leaves the
  /// representable range; non-finite results are what divergence checks see.
  double log_density(std::span<const double> state, std::span<double> grad) const;

  /// z2 implied by a state (identity block for naive and centered).
  void recover_z2(std::span<const double> state, std::span<double> z2) const;

  /// Inverse of the coordinate maps: builds the unconstrained state from
  /// z2 and latents (latents ignored for naive).
  UnconstrainedState state_from_constrained(std::span<const double> z2, std::span<const double> xi,
                                            std::span<const double> delta) const;

  /// ||y - X z2||^2/(2 sigma2) + lambda ||z2||_q^q (or g + penalty generally).
  double log_summary(std::span<const double> z2) const;

 private:
  double naive(std::span<const double> x, std::span<double> grad) const;
  double centered(std::span<const double> x, std::span<double> grad) const;
  double noncentered(std::span<const double> x, std::span<double> grad) const;

  std::shared_ptr<const SmoothTerm> smooth_;
  ExpPowerParams ep_;
  Parametrization param_;
  std::size_t n2_;
  // cached constants
  double c_ = 0.0;             // (2 - q) / q
  double lambda_pow_ = 0.0;    // lambda^{2/q}
  double log_const_ = 0.0;     // per-coordinate additive constant
  double log_scale0_ = 0.0;    // -log(2)/2 - log(lambda)/q
  double gamma_shape_ = 0.0;
};

std::pair<double, Eigen::VectorXd> log_target_and_grad(const TargetSpec& spec, const UnconstrainedState& state);

Eigen::VectorXd recover_z2(const TargetSpec& spec, const UnconstrainedState& state);

/// Posterior summary tracked across chains, computed by direct residuals.
double log_unnorm_posterior_summary(const RegressionProblem& problem, const ExpPowerParams& ep,
                                    const Eigen::VectorXd& z2);

}  // namespace epmix
