#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "epmix/random.hpp"

namespace epmix {

/// Exponential power law with density proportional to exp(-lambda |z|^q).
///
/// Valid for q in (0, 2]; q = 2 is the Gaussian with variance 1/(2 lambda)
/// and q = 1 the Laplace with rate lambda. Construction throws
/// std::domain_error on an invalid pair.
class ExpPowerParams {
 public:
  ExpPowerParams(double q, double lambda);

  double q() const { return q_; }
  double lambda() const { return lambda_; }

 private:
  double q_;
  double lambda_;
};

/// log of q lambda^{1/q} / (2 Gamma(1/q)), the per-coordinate normalizer.
double ep_log_norm_const(const ExpPowerParams& params);

/// Normalized joint log density of independent EP coordinates.
double ep_logpdf(const ExpPowerParams& params, std::span<const double> z);

/// Exact draws: |z|^q ~ Gamma(1/q, rate lambda) with a uniform random sign.
std::vector<double> ep_sample(const ExpPowerParams& params, std::size_t n, Rng& rng);

double ep_variance(const ExpPowerParams& params);

/// Rate lambda giving EP(q, lambda) the variance tau2.
double lambda_for_variance(double q, double tau2);

}  // namespace epmix
