#include <cmath>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "epmix/dataset.hpp"
#include "epmix/mixture.hpp"
#include "epmix/targets.hpp"
#include "oracles.hpp"

using namespace epmix;
using namespace epmix::testing;

namespace {

constexpr double kPi = std::numbers::pi;

RegressionProblem small_problem(std::size_t m = 20, std::size_t n2 = 3, std::uint64_t seed = 5) {
  const auto d = make_synthetic_regression(m, n2, seed);
  return {d.y, d.X, 0.9};
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

TEST(Targets, ParseNames) {
  EXPECT_EQ(parse_parametrization("naive"), Parametrization::naive);
  EXPECT_EQ(parse_parametrization("centered"), Parametrization::centered);
  EXPECT_EQ(parse_parametrization("noncentered"), Parametrization::noncentered);
  EXPECT_EQ(parse_parametrization("non-centered"), Parametrization::noncentered);
  EXPECT_THROW(parse_parametrization("sideways"), std::invalid_argument);
  EXPECT_EQ(to_string(Parametrization::noncentered), "noncentered");
}

TEST(Targets, ProblemValidation) {
  Eigen::VectorXd y(2);
  y << 1, 2;
  Eigen::MatrixXd X(2, 1);
  X << 1, std::nan("");
  EXPECT_THROW(RegressionProblem(y, X, 1.0), std::invalid_argument);
  X << 1, 2;
  EXPECT_THROW(RegressionProblem(y, X, 0.0), std::invalid_argument);
  EXPECT_THROW(RegressionProblem(y, Eigen::MatrixXd(3, 1), 1.0), std::invalid_argument);
}

TEST(Targets, MixtureFormsNeedQBelowTwo) {
  const auto prob = small_problem();
  EXPECT_THROW(TargetSpec::regression(prob, {2.0, 0.5}, Parametrization::centered), std::domain_error);
  EXPECT_THROW(TargetSpec::regression(prob, {2.0, 0.5}, Parametrization::noncentered), std::domain_error);
  EXPECT_NO_THROW(TargetSpec::regression(prob, {2.0, 0.5}, Parametrization::naive));
}

TEST(Targets, NaiveGaussianCaseClosedForm) {
  const auto prob = small_problem();
  const double lambda = 0.7;
  const auto t = TargetSpec::regression(prob, {2.0, lambda}, Parametrization::naive);
  Rng rng(3);
  const auto post = ridge_posterior(prob.y, prob.X, prob.sigma2, lambda);
  const Eigen::MatrixXd prec = post.cov.inverse();
  double offset = std::nan("");
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd z(3);
    for (auto& v : z) v = rng.normal();
    const auto [lp, grad] = log_target_and_grad(t, z);
    const Eigen::VectorXd expected = -prob.X.transpose() * (prob.X * z - prob.y) / prob.sigma2 - 2 * lambda * z;
    EXPECT_LT((grad - expected).cwiseAbs().maxCoeff(), 1e-10);
    // equals the Gaussian posterior log density up to one constant
    const Eigen::VectorXd r = z - post.mean;
    const double gauss = -0.5 * r.dot(prec * r);
    if (std::isnan(offset)) offset = lp - gauss;
    EXPECT_NEAR(lp - gauss, offset, 1e-9);
  }
}

TEST(Targets, GradientsMatchFiniteDifferences) {
  const auto prob = small_problem();
  for (Parametrization p : {Parametrization::naive, Parametrization::centered, Parametrization::noncentered}) {
    for (double q : {0.2, 0.6, 1.0, 1.4, 1.8}) {
      const auto t = TargetSpec::regression(prob, {q, 1.3}, p);
      Rng rng(7, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(q * 10)});
      double worst = 0.0;
      for (int i = 0; i < 100; ++i) worst = std::max(worst, gradient_error(t, random_state(p, 3, q, rng)));
      EXPECT_LT(worst, 1e-5) << to_string(p) << " q=" << q;
    }
  }
}

TEST(Targets, NaiveSubgradientAtZero) {
  const auto prob = small_problem();
  const auto t = TargetSpec::regression(prob, {0.5, 1.0}, Parametrization::naive);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  const auto [lp, grad] = log_target_and_grad(t, z);
  EXPECT_TRUE(std::isfinite(lp));
  const Eigen::VectorXd like = prob.X.transpose() * prob.y / prob.sigma2;
  EXPECT_LT((grad - like).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Targets, NoncenteredEqualsCenteredPlusJacobian) {
  const auto prob = small_problem();
  Rng rng(19);
  for (double q : {0.3, 0.9, 1.6}) {
    const ExpPowerParams ep(q, 0.8);
    const auto c = TargetSpec::regression(prob, ep, Parametrization::centered);
    const auto nc = TargetSpec::regression(prob, ep, Parametrization::noncentered);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd s = random_state(Parametrization::noncentered, 3, q, rng);
      const Eigen::VectorXd z = recover_z2(nc, s);
      Eigen::VectorXd sc = s;
      sc.head(3) = z;
      double log_jac = 0.0;
      for (int j = 0; j < 3; ++j) log_jac += std::log(std::abs(z[j] / s[j]));
      const double lhs = log_target_and_grad(nc, s).first;
      EXPECT_NEAR(lhs, log_target_and_grad(c, sc).first + log_jac, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(Targets, RecoverZ2HandValue) {
  const auto prob = small_problem(10, 1);
  const auto nc = TargetSpec::regression(prob, {1.0, 1.0}, Parametrization::noncentered);
  Eigen::VectorXd s(3);
  s << 1.0, 0.0, 0.0;  // w = 1, xi = 1, delta = pi / 2
  EXPECT_NEAR(recover_z2(nc, s)[0], 1.0, 1e-14);
  s[0] = 0.0;
  EXPECT_EQ(recover_z2(nc, s)[0], 0.0);
}

TEST(Targets, RecoverZ2ConsistentWithMixtureScale) {
  const auto prob = small_problem();
  Rng rng(23);
  for (double q : {0.2, 0.7, 1.3, 1.9}) {
    const double lambda = 1.7;
    const auto nc = TargetSpec::regression(prob, {q, lambda}, Parametrization::noncentered);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd s = random_state(Parametrization::noncentered, 3, q, rng);
      const Eigen::VectorXd z = recover_z2(nc, s);
      for (int j = 0; j < 3; ++j) {
        const double v = v_from_latents(std::exp(s[3 + j]), kPi * logistic(s[6 + j]), q);
        EXPECT_NEAR(z[j] / (s[j] * std::sqrt(v / std::pow(lambda, 2 / q))), 1.0, 1e-12);
      }
    }
  }
}

TEST(Targets, StateFromConstrainedRoundTrip) {
  const auto prob = small_problem();
  Rng rng(29);
  for (Parametrization p : {Parametrization::naive, Parametrization::centered, Parametrization::noncentered}) {
    const auto t = TargetSpec::regression(prob, {0.6, 1.0}, p);
    const double z[] = {0.4, -1.2, 2.0};
    const double xi[] = {0.3, 1.5, 4.0};
    const double delta[] = {0.1, 1.5, 3.0};
    const auto s = t.state_from_constrained(z, xi, delta);
    const auto back = recover_z2(t, s);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back[j], z[j], 1e-12 * std::max(1.0, std::abs(z[j])));
    if (p != Parametrization::naive) {
      for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(std::exp(s[3 + j]), xi[j], 1e-12 * xi[j]);
        EXPECT_NEAR(kPi * logistic(s[6 + j]), delta[j], 1e-12);
      }
    }
  }
}

TEST(Targets, LatentDependenceOnlyThroughScale) {
  // two (xi, delta) pairs with the same v give the same regression term and
  // quadratic penalty; only the latent prior terms differ
  const auto prob = small_problem(10, 1);
  const double q = 0.8, lambda = 1.2;
  const auto c = TargetSpec::regression(prob, {q, lambda}, Parametrization::centered);
  const double d1 = 0.7, d2 = 2.1, xi1 = 1.3;
  const double cexp = (2 - q) / q;
  // solve xi2 so that v matches
  const double xi2 = std::pow(std::pow(xi1, cexp) * std::exp(log_k_factor(d2, q) * cexp - log_k_factor(d1, q) * cexp),
                              1 / cexp);
  ASSERT_NEAR(v_from_latents(xi1, d1, q), v_from_latents(xi2, d2, q), 1e-12);
  auto prior_terms = [&](double xi, double d) {
    return (mixing_gamma_shape(q) - 1) * std::log(xi) - xi + zolotarev_logpdf(d, q) - std::lgamma(mixing_gamma_shape(q));
  };
  for (double z : {-1.0, 0.3, 2.0}) {
    const double a[] = {z}, x1[] = {xi1}, x2[] = {xi2}, e1[] = {d1}, e2[] = {d2};
    const auto s1 = c.state_from_constrained(a, x1, e1);
    const auto s2 = c.state_from_constrained(a, x2, e2);
    // strip Jacobians and compare the conditional normal part
    auto jac = [](const Eigen::VectorXd& s) {
      const double t = s[2];
      return s[1] + std::log(kPi) + std::log(logistic(t)) + std::log(logistic(-t));
    };
    const double r1 = log_target_and_grad(c, s1).first - jac(s1) - prior_terms(xi1, d1);
    const double r2 = log_target_and_grad(c, s2).first - jac(s2) - prior_terms(xi2, d2);
    EXPECT_NEAR(r1, r2, 1e-10) << "z " << z;
  }
}

TEST(Targets, EvidenceAgreesAcrossParametrizations) {
  Eigen::VectorXd y(1);
  y << 0.7;
  Eigen::MatrixXd X(1, 1);
  X << 1.3;
  const RegressionProblem prob(y, X, 0.8);
  for (double q : {0.6, 1.4}) {
    const ExpPowerParams ep(q, 1.1);
    const double naive = quadrature_evidence(TargetSpec::regression(prob, ep, Parametrization::naive));
    const double cen = quadrature_evidence(TargetSpec::regression(prob, ep, Parametrization::centered));
    const double non = quadrature_evidence(TargetSpec::regression(prob, ep, Parametrization::noncentered));
    EXPECT_NEAR(cen / naive, 1.0, 1e-4) << "q " << q;
    EXPECT_NEAR(non / naive, 1.0, 1e-4) << "q " << q;
  }
}

TEST(Targets, PriorOnlyEvidenceIsOne) {
  // with g = 0 every target is a normalized density
  auto zero = std::make_shared<const ZeroSmoothTerm>(1);
  for (Parametrization p : {Parametrization::naive, Parametrization::centered, Parametrization::noncentered}) {
    const TargetSpec t(zero, {1.2, 0.9}, p);
    EXPECT_NEAR(quadrature_evidence(t), 1.0, 1e-5) << to_string(p);
  }
}

TEST(Targets, SummaryExamples) {
  const auto prob = small_problem();
  const ExpPowerParams ep(0.7, 1.4);
  EXPECT_NEAR(log_unnorm_posterior_summary(prob, ep, Eigen::VectorXd::Zero(3)),
              prob.y.squaredNorm() / (2 * prob.sigma2), 1e-12);
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd z(3);
    for (auto& v : z) v = rng.normal();
    double rss = 0.0;
    for (Eigen::Index r = 0; r < prob.X.rows(); ++r) {
      double fit = 0.0;
      for (Eigen::Index j = 0; j < 3; ++j) fit += prob.X(r, j) * z[j];
      rss += (prob.y[r] - fit) * (prob.y[r] - fit);
    }
    double pen = 0.0;
    for (double v : z) pen += std::pow(std::abs(v), 0.7);
    const double direct = rss / (2 * prob.sigma2) + 1.4 * pen;
    EXPECT_NEAR(log_unnorm_posterior_summary(prob, ep, z) / direct, 1.0, 1e-12);
    const auto t = TargetSpec::regression(prob, ep, Parametrization::centered);
    EXPECT_NEAR(t.log_summary({z.data(), 3}) / direct, 1.0, 1e-12);
  }
}

TEST(Targets, ExtremeCoordinatesAreNonFinite) {
  const auto prob = small_problem(10, 1);
  const auto c = TargetSpec::regression(prob, {0.5, 1.0}, Parametrization::centered);
  Eigen::VectorXd s(3);
  s << 0.1, 800.0, 0.0;
  EXPECT_FALSE(std::isfinite(log_target_and_grad(c, s).first));
}
