#pragma once

#include <cstddef>
#include <vector>

#include "epmix/exp_power.hpp"
#include "epmix/random.hpp"

namespace epmix {

/// Logs of the three sines that recur in the gamma–Zolotarev construction,
/// sin(q d / 2), sin((2 - q) d / 2) and sin(d), together with their
/// cotangents (the derivatives of the logs up to the inner chain factor).
struct SinLogs {
  double log_s1 = 0.0;  // log sin(q d / 2)
  double log_s2 = 0.0;  // log sin((2 - q) d / 2)
  double log_s3 = 0.0;  // log sin(d)
  double cot1 = 0.0;
  double cot2 = 0.0;
  double cot3 = 0.0;
};

/// Evaluates SinLogs at an angle in (0, pi). Throws std::domain_error at or
/// outside the boundary.
SinLogs sin_logs(double delta, double q);

/// Same, for d = pi * logistic(t). Uses the complementary logistic near pi so
/// that sin(d) keeps full relative precision for large t.
SinLogs sin_logs_from_logit(double t, double q);

/// log B(d) = log sin(qd/2) + ((2-q)/q) log sin((2-q)d/2) - (2/q) log sin(d).
/// B = k(d|q)^{(2-q)/q} is the angular factor multiplying z^2 in the
/// centered kernel and v = xi^{(2-q)/q} / (2 B).
double log_angular_factor(const SinLogs& s, double q);
/// d/dd log B(d).
double dlog_angular_factor(const SinLogs& s, double q);

void check_mixture_exponent(double q);

double log_k_factor(double delta, double q);
double k_factor(double delta, double q);
/// k(d|q)^{(q-2)/(2q)} by its expanded product form.
double k_factor_pow(double delta, double q);

double zolotarev_log_norm_const(double q);
double zolotarev_logpdf(double delta, double q);

/// Rejection sampler for the Zolotarev angle under a piecewise-constant
/// envelope on a fixed grid of (0, pi). Immutable after construction.
class ZolotarevSampler {
 public:
  static constexpr std::size_t kCells = 1024;

  explicit ZolotarevSampler(double q);

  double q() const { return q_; }
  /// One draw; `attempts`, when given, is incremented per proposal.
  double draw(Rng& rng, std::size_t* attempts = nullptr) const;
  std::vector<double> sample(std::size_t n, Rng& rng) const;
  /// Exact acceptance probability, 1 / envelope mass.
  double acceptance_rate() const { return 1.0 / envelope_mass_; }
  /// Per-cell density upper bounds.
  const std::vector<double>& cell_bounds() const { return bound_; }

 private:
  double q_;
  double log_norm_;
  double envelope_mass_ = 0.0;
  std::vector<double> bound_;
  std::vector<double> cumulative_;
};

std::vector<double> zolotarev_sample(double q, std::size_t n, Rng& rng);

/// Scale v of the normal mixture built from a gamma draw xi and angle delta.
double v_from_latents(double xi, double delta, double q);

/// Polynomially tilted positive (q/2)-stable scales.
std::vector<double> tilted_stable_sample(double q, std::size_t n, Rng& rng);

/// EP(q, lambda) draws through z = N(0, 1) * sqrt(v / lambda^{2/q}).
std::vector<double> compose_ep_sample(const ExpPowerParams& params, std::size_t n, Rng& rng);

/// Shape of the gamma law of xi: (2 + q) / (2q).
inline double mixing_gamma_shape(double q) { return (2.0 + q) / (2.0 * q); }

}  // namespace epmix
