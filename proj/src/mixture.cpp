#include "epmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace epmix {

namespace {

constexpr double kPi = std::numbers::pi;

void check_angle(double delta) {
  if (!(delta > 0.0 && delta < kPi)) {
    throw std::domain_error("angle must lie strictly inside (0, pi), got " + std::to_string(delta));
  }
}

// Density of the angle up to log_norm, from its sine logs.
double zolotarev_log_kernel(const SinLogs& s, double q) { return -0.5 * log_angular_factor(s, q); }

double zolotarev_dlog_kernel(const SinLogs& s, double q) { return -0.5 * dlog_angular_factor(s, q); }

}  // namespace

void check_mixture_exponent(double q) {
  if (!(q > 0.0 && q < 2.0)) {
    throw std::domain_error("mixture representation needs q in (0, 2), got " + std::to_string(q));
  }
}

SinLogs sin_logs(double delta, double q) {
  check_angle(delta);
  SinLogs s;
  const double a1 = 0.5 * q * delta;
  const double a2 = 0.5 * (2.0 - q) * delta;
  // sin(delta) = sin(pi - delta); the smaller argument is the accurate one.
  const double a3 = delta <= 0.5 * kPi ? delta : kPi - delta;
  s.log_s1 = std::log(std::sin(a1));
  s.log_s2 = std::log(std::sin(a2));
  s.log_s3 = std::log(std::sin(a3));
  s.cot1 = std::cos(a1) / std::sin(a1);
  s.cot2 = std::cos(a2) / std::sin(a2);
  s.cot3 = std::cos(delta) / std::sin(a3);
  return s;
}

SinLogs sin_logs_from_logit(double t, double q) {
  // p = logistic(t), pc = 1 - p, both without cancellation.
  const double p = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  const double pc = t >= 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
  if (!(p > 0.0 && pc > 0.0)) {
    throw std::domain_error("logit angle coordinate out of representable range");
  }
  const double delta = kPi * p;
  SinLogs s;
  const double a1 = 0.5 * q * delta;
  const double a2 = 0.5 * (2.0 - q) * delta;
  const double a3 = kPi * std::min(p, pc);
  s.log_s1 = std::log(std::sin(a1));
  s.log_s2 = std::log(std::sin(a2));
  s.log_s3 = std::log(std::sin(a3));
  s.cot1 = std::cos(a1) / std::sin(a1);
  s.cot2 = std::cos(a2) / std::sin(a2);
  // cos(pi p) = -cos(pi pc)
  s.cot3 = (p <= pc ? std::cos(kPi * p) : -std::cos(kPi * pc)) / std::sin(a3);
  return s;
}

double log_angular_factor(const SinLogs& s, double q) {
  return s.log_s1 + (2.0 - q) / q * s.log_s2 - 2.0 / q * s.log_s3;
}

double dlog_angular_factor(const SinLogs& s, double q) {
  return 0.5 * q * s.cot1 + (2.0 - q) / q * 0.5 * (2.0 - q) * s.cot2 - 2.0 / q * s.cot3;
}

double log_k_factor(double delta, double q) {
  check_mixture_exponent(q);
  const SinLogs s = sin_logs(delta, q);
  return -q / (q - 2.0) * s.log_s1 + s.log_s2 + 2.0 / (q - 2.0) * s.log_s3;
}

double k_factor(double delta, double q) { return std::exp(log_k_factor(delta, q)); }

double k_factor_pow(double delta, double q) {
  check_mixture_exponent(q);
  check_angle(delta);
  return std::pow(std::sin(0.5 * q * delta), -0.5) *
         std::pow(std::sin(0.5 * (2.0 - q) * delta), (q - 2.0) / (2.0 * q)) *
         std::pow(std::sin(delta), 1.0 / q);
}

double zolotarev_log_norm_const(double q) {
  check_mixture_exponent(q);
  return std::lgamma(1.5) + std::lgamma(0.5 + 1.0 / q) - std::log(kPi) - std::lgamma(1.0 + 1.0 / q);
}

double zolotarev_logpdf(double delta, double q) {
  check_mixture_exponent(q);
  return zolotarev_log_norm_const(q) + zolotarev_log_kernel(sin_logs(delta, q), q);
}

ZolotarevSampler::ZolotarevSampler(double q) : q_(q), log_norm_(zolotarev_log_norm_const(q)) {
  constexpr int kSub = 8;
  const double width = kPi / static_cast<double>(kCells);
  const double c = (2.0 - q) / q;
  // Limit of the density at the left end of the support.
  const double log_f0 = log_norm_ - 0.5 * std::log(0.5 * q) - 0.5 * c * std::log(0.5 * (2.0 - q));

  auto logf = [&](double d) { return log_norm_ + zolotarev_log_kernel(sin_logs(d, q), q); };
  auto dlogf = [&](double d) { return zolotarev_dlog_kernel(sin_logs(d, q), q); };

  bound_.assign(kCells, 0.0);
  cumulative_.assign(kCells, 0.0);
  double mass = 0.0;
  for (std::size_t j = 0; j < kCells; ++j) {
    const double lo = static_cast<double>(j) * width;
    double best = -INFINITY;
    double prev_x = 0.0;
    double prev_slope = 0.0;
    for (int k = 0; k <= kSub; ++k) {
      double x = lo + width * k / kSub;
      double value;
      if (j == 0 && k == 0) {
        value = log_f0;
        x = 1e-9 * width;
      } else if (j + 1 == kCells && k == kSub) {
        // density vanishes at pi; probe the slope just inside
        x = kPi - 1e-9 * width;
        value = logf(x);
      } else {
        value = logf(x);
      }
      if (!std::isfinite(value) && !(j + 1 == kCells && k == kSub)) {
        throw std::runtime_error("Zolotarev envelope: non-finite density at " + std::to_string(x));
      }
      best = std::max(best, value);
      const double slope = dlogf(x);
      if (k > 0 && prev_slope > 0.0 && slope < 0.0) {
        // interior local maximum between prev_x and x
        double a = prev_x, b = x;
        for (int it = 0; it < 80; ++it) {
          const double m = 0.5 * (a + b);
          (dlogf(m) > 0.0 ? a : b) = m;
        }
        best = std::max(best, logf(0.5 * (a + b)));
      }
      prev_x = x;
      prev_slope = slope;
    }
    bound_[j] = std::exp(best) * (1.0 + 1e-9);
    mass += bound_[j] * width;
    cumulative_[j] = mass;
  }
  envelope_mass_ = mass;
}

double ZolotarevSampler::draw(Rng& rng, std::size_t* attempts) const {
  const double width = kPi / static_cast<double>(kCells);
  for (;;) {
    if (attempts) ++*attempts;
    const double target = rng.uniform() * envelope_mass_;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    const std::size_t j = std::min<std::size_t>(it - cumulative_.begin(), kCells - 1);
    const double delta = (static_cast<double>(j) + rng.uniform()) * width;
    if (!(delta > 0.0 && delta < kPi)) continue;
    const double f = std::exp(log_norm_ + zolotarev_log_kernel(sin_logs(delta, q_), q_));
    if (rng.uniform() * bound_[j] < f) return delta;
  }
}

std::vector<double> ZolotarevSampler::sample(std::size_t n, Rng& rng) const {
  std::vector<double> out(n);
  for (auto& d : out) d = draw(rng);
  return out;
}

std::vector<double> zolotarev_sample(double q, std::size_t n, Rng& rng) {
  return ZolotarevSampler(q).sample(n, rng);
}

double v_from_latents(double xi, double delta, double q) {
  check_mixture_exponent(q);
  if (!(xi > 0.0) || !std::isfinite(xi)) throw std::domain_error("xi must be positive and finite");
  const SinLogs s = sin_logs(delta, q);
  return 0.5 * std::exp((2.0 - q) / q * std::log(xi) - log_angular_factor(s, q));
}

std::vector<double> tilted_stable_sample(double q, std::size_t n, Rng& rng) {
  check_mixture_exponent(q);
  const ZolotarevSampler angles(q);
  const double shape = mixing_gamma_shape(q);
  std::vector<double> out(n);
  for (auto& v : out) {
    const double xi = rng.gamma(shape);
    const double delta = angles.draw(rng);
    v = v_from_latents(xi, delta, q);
  }
  return out;
}

std::vector<double> compose_ep_sample(const ExpPowerParams& params, std::size_t n, Rng& rng) {
  const double q = params.q();
  check_mixture_exponent(q);
  std::vector<double> v = tilted_stable_sample(q, n, rng);
  const double inv_rate = std::pow(params.lambda(), -2.0 / q);
  for (auto& x : v) x = rng.normal() * std::sqrt(x * inv_rate);
  return v;
}

}  // namespace epmix
