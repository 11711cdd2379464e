#include "epmix/targets.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "epmix/mixture.hpp"

namespace epmix {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogPi = 1.1447298858494002;
constexpr double kHalfLog2Pi = 0.91893853320467274;
// Beyond this |u| or |t| the latent maps leave double range.
constexpr double kCoordLimit = 700.0;

struct Logistic {
  double p;   // logistic(t)
  double pc;  // 1 - logistic(t)
};

Logistic logistic(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return {1.0 / (1.0 + e), e / (1.0 + e)};
  }
  const double e = std::exp(t);
  return {e / (1.0 + e), 1.0 / (1.0 + e)};
}

double logit_angle(double delta) {
  if (!(delta > 0.0 && delta < kPi)) throw std::domain_error("angle outside (0, pi)");
  const double p = delta / kPi;
  return std::log(p) - std::log1p(-p);
}

double fail(std::span<double> grad) {
  for (auto& g : grad) g = std::numeric_limits<double>::quiet_NaN();
  return -std::numeric_limits<double>::infinity();
}

struct Scratch {
  std::vector<double> z, scale, dlog_scale_dt, dg;
  void resize(std::size_t n) {
    z.resize(n);
    scale.resize(n);
    dlog_scale_dt.resize(n);
    dg.resize(n);
  }
};

thread_local Scratch tl_scratch;

}  // namespace

std::string_view to_string(Parametrization p) {
  switch (p) {
    case Parametrization::naive: return "naive";
    case Parametrization::centered: return "centered";
    case Parametrization::noncentered: return "noncentered";
  }
  return "unknown";
}

Parametrization parse_parametrization(std::string_view name) {
  if (name == "naive") return Parametrization::naive;
  if (name == "centered") return Parametrization::centered;
  if (name == "noncentered" || name == "non-centered") return Parametrization::noncentered;
  throw std::invalid_argument("unknown parametrization '" + std::string(name) + "'");
}

RegressionProblem::RegressionProblem(Eigen::VectorXd y_in, Eigen::MatrixXd X_in, double sigma2_in)
    : y(std::move(y_in)), X(std::move(X_in)), sigma2(sigma2_in) {
  if (y.size() < 1 || X.cols() < 1) throw std::invalid_argument("regression problem needs m >= 1 and n2 >= 1");
  if (X.rows() != y.size()) throw std::invalid_argument("design rows must match response length");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("regression data contain non-finite values");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("noise variance must be positive");
}

GaussianLikelihood::GaussianLikelihood(RegressionProblem problem)
    : problem_(std::move(problem)),
      gram_(problem_.X.transpose() * problem_.X),
      xty_(problem_.X.transpose() * problem_.y),
      yty_(problem_.y.squaredNorm()) {}

double GaussianLikelihood::value(std::span<const double> z) const {
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  return (problem_.y - problem_.X * zv).squaredNorm() / (2.0 * problem_.sigma2);
}

double GaussianLikelihood::value_and_grad(std::span<const double> z, std::span<double> grad) const {
  const auto n = static_cast<Eigen::Index>(z.size());
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), n);
  Eigen::Map<Eigen::VectorXd> gv(grad.data(), n);
  gv.noalias() = gram_ * zv;
  const double quad = zv.dot(gv);
  const double lin = zv.dot(xty_);
  gv -= xty_;
  gv /= problem_.sigma2;
  return (yty_ - 2.0 * lin + quad) / (2.0 * problem_.sigma2);
}

double ZeroSmoothTerm::value_and_grad(std::span<const double>, std::span<double> grad) const {
  for (auto& g : grad) g = 0.0;
  return 0.0;
}

TargetSpec::TargetSpec(std::shared_ptr<const SmoothTerm> smooth, ExpPowerParams ep, Parametrization param)
    : smooth_(std::move(smooth)), ep_(ep), param_(param) {
  if (!smooth_) throw std::invalid_argument("target needs a smooth term");
  n2_ = smooth_->dim();
  if (n2_ < 1) throw std::invalid_argument("target dimension must be positive");
  const double q = ep_.q();
  const double lambda = ep_.lambda();
  if (param_ != Parametrization::naive) check_mixture_exponent(q);
  c_ = (2.0 - q) / q;
  lambda_pow_ = std::pow(lambda, 2.0 / q);
  gamma_shape_ = mixing_gamma_shape(q);
  log_scale0_ = -0.5 * std::log(2.0) - std::log(lambda) / q;
  switch (param_) {
    case Parametrization::naive:
      log_const_ = ep_log_norm_const(ep_);
      break;
    case Parametrization::centered:
      // q lambda^{1/q} / (2 pi Gamma(1/q)), plus log(pi) from the angle map.
      log_const_ = std::log(q) + std::log(lambda) / q - std::log(2.0) - kLogPi - std::lgamma(1.0 / q) + kLogPi;
      break;
    case Parametrization::noncentered:
      log_const_ = -kHalfLog2Pi - std::lgamma(gamma_shape_) + zolotarev_log_norm_const(q) + kLogPi;
      break;
  }
}

TargetSpec TargetSpec::regression(RegressionProblem problem, ExpPowerParams ep, Parametrization param) {
  return TargetSpec(std::make_shared<GaussianLikelihood>(std::move(problem)), ep, param);
}

double TargetSpec::log_density(std::span<const double> state, std::span<double> grad) const {
  if (state.size() != dim() || grad.size() != dim()) throw std::invalid_argument("state dimension mismatch");
  switch (param_) {
    case Parametrization::naive: return naive(state, grad);
    case Parametrization::centered: return centered(state, grad);
    case Parametrization::noncentered: return noncentered(state, grad);
  }
  return fail(grad);
}

double TargetSpec::naive(std::span<const double> x, std::span<double> grad) const {
  const double q = ep_.q();
  const double lambda = ep_.lambda();
  double lp = -smooth_->value_and_grad(x, grad);
  for (std::size_t i = 0; i < n2_; ++i) {
    grad[i] = -grad[i];
    const double az = std::abs(x[i]);
    lp -= lambda * std::pow(az, q);
    // subgradient 0 at the kink
    if (az > 0.0) grad[i] -= lambda * q * std::pow(az, q - 1.0) * (x[i] > 0.0 ? 1.0 : -1.0);
  }
  return lp + static_cast<double>(n2_) * log_const_;
}

double TargetSpec::centered(std::span<const double> x, std::span<double> grad) const {
  const auto n = n2_;
  const auto z = x.subspan(0, n);
  double lp = -smooth_->value_and_grad(z, grad.subspan(0, n));
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[n + i];
    const double t = x[2 * n + i];
    if (!(std::abs(u) < kCoordLimit && std::abs(t) < kCoordLimit)) return fail(grad);
    const double xi = std::exp(u);
    const Logistic lg = logistic(t);
    const SinLogs s = sin_logs_from_logit(t, ep_.q());
    const double log_b = log_angular_factor(s, ep_.q());
    const double prec = lambda_pow_ * std::exp(-c_ * u + log_b);  // lambda^{2/q} xi^{-c} B
    const double quad = prec * z[i] * z[i];
    const double ddelta = kPi * lg.p * lg.pc;
    lp += -xi - quad + u + std::log(lg.p) + std::log(lg.pc);
    grad[i] = -grad[i] - 2.0 * prec * z[i];
    grad[n + i] = -xi + c_ * quad + 1.0;
    grad[2 * n + i] = -quad * dlog_angular_factor(s, ep_.q()) * ddelta + (lg.pc - lg.p);
  }
  return lp + static_cast<double>(n) * log_const_;
}

double TargetSpec::noncentered(std::span<const double> x, std::span<double> grad) const {
  const auto n = n2_;
  Scratch& buf = tl_scratch;
  buf.resize(n);
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = x[i];
    const double u = x[n + i];
    const double t = x[2 * n + i];
    if (!(std::abs(u) < kCoordLimit && std::abs(t) < kCoordLimit)) return fail(grad);
    const Logistic lg = logistic(t);
    const SinLogs s = sin_logs_from_logit(t, ep_.q());
    const double log_b = log_angular_factor(s, ep_.q());
    const double xi = std::exp(u);
    buf.scale[i] = std::exp(log_scale0_ + 0.5 * c_ * u - 0.5 * log_b);
    buf.z[i] = buf.scale[i] * w;
    // d log(scale) / dt
    buf.dlog_scale_dt[i] = -0.5 * dlog_angular_factor(s, ep_.q()) * kPi * lg.p * lg.pc;
    lp += -0.5 * w * w + (gamma_shape_ - 1.0) * u - xi - 0.5 * log_b + u + std::log(lg.p) + std::log(lg.pc);
    grad[i] = -w;
    grad[n + i] = gamma_shape_ - xi;
    grad[2 * n + i] = buf.dlog_scale_dt[i] + (lg.pc - lg.p);
  }
  lp -= smooth_->value_and_grad(buf.z, buf.dg);
  for (std::size_t i = 0; i < n; ++i) {
    const double rz = -buf.dg[i] * buf.z[i];  // d(-g) / d log(scale_i)
    grad[i] -= buf.dg[i] * buf.scale[i];
    grad[n + i] += 0.5 * c_ * rz;
    grad[2 * n + i] += buf.dlog_scale_dt[i] * rz;
  }
  return lp + static_cast<double>(n) * log_const_;
}

void TargetSpec::recover_z2(std::span<const double> state, std::span<double> z2) const {
  if (state.size() != dim() || z2.size() != n2_) throw std::invalid_argument("state dimension mismatch");
  if (param_ != Parametrization::noncentered) {
    for (std::size_t i = 0; i < n2_; ++i) z2[i] = state[i];
    return;
  }
  for (std::size_t i = 0; i < n2_; ++i) {
    const double u = state[n2_ + i];
    const SinLogs s = sin_logs_from_logit(state[2 * n2_ + i], ep_.q());
    z2[i] = std::exp(log_scale0_ + 0.5 * c_ * u - 0.5 * log_angular_factor(s, ep_.q())) * state[i];
  }
}

UnconstrainedState TargetSpec::state_from_constrained(std::span<const double> z2, std::span<const double> xi,
                                                      std::span<const double> delta) const {
  if (z2.size() != n2_) throw std::invalid_argument("z2 dimension mismatch");
  UnconstrainedState x(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < n2_; ++i) x[i] = z2[i];
  if (param_ == Parametrization::naive) return x;
  if (xi.size() != n2_ || delta.size() != n2_) throw std::invalid_argument("latent dimension mismatch");
  for (std::size_t i = 0; i < n2_; ++i) {
    if (!(xi[i] > 0.0)) throw std::domain_error("xi must be positive");
    x[n2_ + i] = std::log(xi[i]);
    x[2 * n2_ + i] = logit_angle(delta[i]);
    if (param_ == Parametrization::noncentered) {
      const SinLogs s = sin_logs(delta[i], ep_.q());
      const double log_scale = log_scale0_ + 0.5 * c_ * std::log(xi[i]) - 0.5 * log_angular_factor(s, ep_.q());
      x[i] = z2[i] * std::exp(-log_scale);
    }
  }
  return x;
}

double TargetSpec::log_summary(std::span<const double> z2) const {
  double penalty = 0.0;
  for (double z : z2) penalty += std::pow(std::abs(z), ep_.q());
  return smooth_->value(z2) + ep_.lambda() * penalty;
}

std::pair<double, Eigen::VectorXd> log_target_and_grad(const TargetSpec& spec, const UnconstrainedState& state) {
  Eigen::VectorXd grad(state.size());
  const double lp = spec.log_density({state.data(), static_cast<std::size_t>(state.size())},
                                     {grad.data(), static_cast<std::size_t>(grad.size())});
  return {lp, std::move(grad)};
}

Eigen::VectorXd recover_z2(const TargetSpec& spec, const UnconstrainedState& state) {
  Eigen::VectorXd z2(static_cast<Eigen::Index>(spec.n2()));
  spec.recover_z2({state.data(), static_cast<std::size_t>(state.size())},
                  {z2.data(), static_cast<std::size_t>(z2.size())});
  return z2;
}

double log_unnorm_posterior_summary(const RegressionProblem& problem, const ExpPowerParams& ep,
                                    const Eigen::VectorXd& z2) {
  if (static_cast<std::size_t>(z2.size()) != problem.n2()) throw std::invalid_argument("z2 dimension mismatch");
  const double rss = (problem.y - problem.X * z2).squaredNorm();
  double penalty = 0.0;
  for (double z : z2) penalty += std::pow(std::abs(z), ep.q());
  return rss / (2.0 * problem.sigma2) + ep.lambda() * penalty;
}

}  // namespace epmix
