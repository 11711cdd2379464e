#include "epmix/exp_power.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace epmix {

ExpPowerParams::ExpPowerParams(double q, double lambda) : q_(q), lambda_(lambda) {
  if (!(q > 0.0 && q <= 2.0)) {
    throw std::domain_error("exponent q must lie in (0, 2], got " + std::to_string(q));
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::domain_error("rate lambda must be positive and finite, got " + std::to_string(lambda));
  }
}

double ep_log_norm_const(const ExpPowerParams& params) {
  const double q = params.q();
  return std::log(q) + std::log(params.lambda()) / q - std::log(2.0) - std::lgamma(1.0 / q);
}

double ep_logpdf(const ExpPowerParams& params, std::span<const double> z) {
  double penalty = 0.0;
  for (double zi : z) penalty += std::pow(std::abs(zi), params.q());
  return static_cast<double>(z.size()) * ep_log_norm_const(params) - params.lambda() * penalty;
}

std::vector<double> ep_sample(const ExpPowerParams& params, std::size_t n, Rng& rng) {
  const double inv_q = 1.0 / params.q();
  std::vector<double> out(n);
  for (auto& z : out) {
    const double g = rng.gamma(inv_q) / params.lambda();
    z = rng.sign() * std::pow(g, inv_q);
  }
  return out;
}

double ep_variance(const ExpPowerParams& params) {
  const double q = params.q();
  return std::exp(-2.0 / q * std::log(params.lambda()) + std::lgamma(3.0 / q) - std::lgamma(1.0 / q));
}

double lambda_for_variance(double q, double tau2) {
  if (!(q > 0.0 && q <= 2.0)) throw std::domain_error("exponent q must lie in (0, 2]");
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw std::domain_error("target variance must be positive");
  const double log_ratio = std::lgamma(3.0 / q) - std::lgamma(1.0 / q) - std::log(tau2);
  return std::exp(0.5 * q * log_ratio);
}

}  // namespace epmix
