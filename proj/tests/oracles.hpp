#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>

#include "epmix/random.hpp"
#include "epmix/targets.hpp"
#include "support.hpp"

namespace epmix::testing {

/// Integral of exp(log target) over every unconstrained coordinate of a
/// one-coefficient problem, by nested adaptive Gauss–Kronrod on the real line.
inline double quadrature_evidence(const TargetSpec& target) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr unsigned depth = 12;
  constexpr double tol = 1e-7;
  Eigen::VectorXd x(static_cast<Eigen::Index>(target.dim()));
  Eigen::VectorXd g(x.size());
  auto density = [&] {
    const double lp = target.log_density({x.data(), static_cast<std::size_t>(x.size())},
                                         {g.data(), static_cast<std::size_t>(g.size())});
    return std::isfinite(lp) ? std::exp(lp) : 0.0;
  };
  if (target.dim() == 1) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double z) {
          x[0] = z;
          return density();
        },
        -inf, inf, depth, tol);
  }
  auto inner = [&](double t, double u) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double z) {
          x[0] = z;
          x[1] = u;
          x[2] = t;
          return density();
        },
        -inf, inf, depth, tol);
  };
  return gauss_kronrod<double, 61>::integrate(
      [&](double t) {
        return gauss_kronrod<double, 61>::integrate([&](double u) { return inner(t, u); }, -inf, inf, depth, tol);
      },
      -inf, inf, depth, tol);
}

/// Random interior state for a parametrization: z2/w normal, xi from its
/// Gamma((2 + q) / (2q)) prior and delta uniform on the middle of (0, pi).
/// Wider boxes reach log densities near 1e8 at small q, where central
/// differences lose every digit of the O(1) coordinates.
inline Eigen::VectorXd random_state(Parametrization p, std::size_t n2, double q, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(n2);
  Eigen::VectorXd x(p == Parametrization::naive ? n : 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = rng.normal();
    // keep away from the kink of |z|^q, where differences are meaningless
    if (std::abs(z) < 0.05) z = std::copysign(0.05, z) + z;
    x[i] = z;
  }
  if (p != Parametrization::naive) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x[n + i] = std::log(rng.gamma((2.0 + q) / (2.0 * q)));
      const double frac = rng.uniform(0.1, 0.9);
      x[2 * n + i] = std::log(frac / (1.0 - frac));
    }
  }
  return x;
}

/// Largest |analytic - finite difference| / max(1, |finite difference|)
/// over the coordinates of one state.
inline double gradient_error(const TargetSpec& target, const Eigen::VectorXd& x) {
  const auto [value, grad] = log_target_and_grad(target, x);
  (void)value;
  const Eigen::VectorXd fd = finite_difference(
      [&](const Eigen::VectorXd& y) { return log_target_and_grad(target, y).first; }, x, 1e-5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, std::abs(grad[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
  }
  return worst;
}

/// Closed-form Gaussian posterior of z under prior exp(-lambda |z|^2):
/// precision X'X / sigma2 + 2 lambda I.
struct RidgePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline RidgePosterior ridge_posterior(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double sigma2,
                                      double lambda) {
  const auto n = X.cols();
  const Eigen::MatrixXd prec =
      X.transpose() * X / sigma2 + 2.0 * lambda * Eigen::MatrixXd::Identity(n, n);
  const Eigen::LLT<Eigen::MatrixXd> llt(prec);
  RidgePosterior post;
  post.cov = llt.solve(Eigen::MatrixXd::Identity(n, n));
  post.mean = llt.solve(X.transpose() * y / sigma2);
  return post;
}

}  // namespace epmix::testing
