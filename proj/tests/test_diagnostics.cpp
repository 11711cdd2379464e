#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "epmix/diagnostics.hpp"
#include "epmix/random.hpp"
#include "support.hpp"

using namespace epmix;
using namespace epmix::testing;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double prev = rng.normal() / std::sqrt(1 - phi * phi);
  for (auto& v : x) {
    prev = phi * prev + rng.normal();
    v = prev;
  }
  return x;
}

std::vector<double> iid(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal() + shift;
  return x;
}

}  // namespace

TEST(Ess, IndependentSeries) {
  const auto x = iid(10000, 1);
  const double e = ess(x).ess;
  EXPECT_GE(e, 0.9 * 10000);
  EXPECT_LE(e, 1.1 * 10000);
}

TEST(Ess, Ar1ClosedForm) {
  const double phi = 0.9;
  const double expected = 10000 * (1 - phi) / (1 + phi);
  for (std::uint64_t seed : {2, 3, 4}) {
    EXPECT_NEAR(ess(ar1(phi, 10000, seed)).ess, expected, 0.2 * expected) << "seed " << seed;
  }
}

TEST(Ess, ConstantSeriesDegenerate) {
  const std::vector<double> x(100, 3.0);
  const auto r = ess(x);
  EXPECT_EQ(r.ess, 0.0);
  EXPECT_TRUE(r.degenerate);
}

TEST(Ess, RejectsShortOrNonFinite) {
  EXPECT_THROW(ess(std::vector<double>(5, 1.0)), std::invalid_argument);
  auto x = iid(50, 1);
  x[3] = std::nan("");
  EXPECT_THROW(ess(x), std::invalid_argument);
}

TEST(Ess, AffineInvariant) {
  const auto x = ar1(0.5, 2000, 7);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = -3.5 * x[i] + 12.0;
  EXPECT_NEAR(ess(y).ess, ess(x).ess, 1e-6 * ess(x).ess);
}

TEST(Ess, MinimumOverParameters) {
  const auto a = iid(1000, 5);
  const auto b = ar1(0.8, 1000, 6);
  Eigen::MatrixXd m(1000, 2);
  for (int i = 0; i < 1000; ++i) {
    m(i, 0) = a[i];
    m(i, 1) = b[i];
  }
  const auto r = min_ess_over_params(m);
  EXPECT_DOUBLE_EQ(r.ess, std::min(ess(a).ess, ess(b).ess));
  EXPECT_LE(r.ess, ess(a).ess);
  // single column equals plain ess
  EXPECT_DOUBLE_EQ(min_ess_over_params(m.leftCols(1)).ess, ess(a).ess);
  // a perfectly autocorrelated (stuck) coordinate drives the minimum to zero
  Eigen::MatrixXd stuck(1000, 3);
  stuck.leftCols(2) = m;
  stuck.col(2).setConstant(1.0);
  const auto s = min_ess_over_params(stuck);
  EXPECT_NEAR(s.ess, 0.0, 1e-12);
  EXPECT_TRUE(s.degenerate);
}

TEST(Kde, StandardNormalAtZero) {
  const auto x = iid(10000, 8);
  const auto k = kde(x);
  ASSERT_EQ(k.grid.size(), 512u);
  std::size_t i0 = 0;
  for (std::size_t i = 0; i < k.grid.size(); ++i) {
    if (std::abs(k.grid[i]) < std::abs(k.grid[i0])) i0 = i;
  }
  EXPECT_NEAR(k.density[i0], 1 / std::sqrt(2 * std::numbers::pi), 0.1 / std::sqrt(2 * std::numbers::pi));
}

TEST(Kde, IntegratesToOneAndNonNegative) {
  const auto x = ar1(0.3, 3000, 9);
  const auto k = kde(x);
  double area = 0.0;
  for (std::size_t i = 1; i < k.grid.size(); ++i) {
    area += 0.5 * (k.density[i] + k.density[i - 1]) * (k.grid[i] - k.grid[i - 1]);
  }
  EXPECT_NEAR(area, 1.0, 0.01);
  for (double d : k.density) EXPECT_GE(d, 0.0);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  EXPECT_NEAR(k.grid.front(), *lo - 3 * k.bandwidth, 1e-12);
  EXPECT_NEAR(k.grid.back(), *hi + 3 * k.bandwidth, 1e-12);
}

TEST(Kde, SilvermanBandwidth) {
  const auto x = iid(2000, 10);
  std::vector<double> s = x;
  std::sort(s.begin(), s.end());
  auto quantile = [&](double p) {
    const double h = (s.size() - 1) * p;
    const auto i = static_cast<std::size_t>(h);
    return s[i] + (h - i) * (s[i + 1] - s[i]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double sd = std::sqrt(sample_variance(x));
  EXPECT_NEAR(kde(x).bandwidth, 0.9 * std::min(sd, iqr / 1.34) * std::pow(2000.0, -0.2), 1e-12);
}

TEST(Kde, SymmetricInput) {
  auto x = iid(1000, 11);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) x.push_back(-x[i]);
  const auto k = kde(x);
  for (std::size_t i = 0; i < k.grid.size(); ++i) {
    EXPECT_NEAR(k.density[i], k.density[k.grid.size() - 1 - i], 1e-10);
  }
}

TEST(Kde, Bimodal) {
  auto x = iid(2000, 12, -3.0);
  const auto y = iid(2000, 13, 3.0);
  x.insert(x.end(), y.begin(), y.end());
  const auto k = kde(x);
  int maxima = 0;
  for (std::size_t i = 1; i + 1 < k.density.size(); ++i) {
    maxima += k.density[i] > k.density[i - 1] && k.density[i] >= k.density[i + 1];
  }
  EXPECT_EQ(maxima, 2);
}

TEST(Kde, ZeroSpreadThrows) { EXPECT_THROW(kde(std::vector<double>(10, 1.0)), std::invalid_argument); }

TEST(Rhat, IidChainsNearOne) {
  std::vector<std::vector<double>> chains;
  for (int c = 0; c < 4; ++c) chains.push_back(iid(1000, 20 + c));
  std::vector<std::span<const double>> spans(chains.begin(), chains.end());
  const double r = split_rhat(spans).rhat;
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.05);
}

TEST(Rhat, SingleLongChainSplit) {
  const auto x = iid(10000, 30);
  const std::vector<std::span<const double>> one{std::span<const double>(x)};
  EXPECT_NEAR(split_rhat(one).rhat, 1.0, 0.01);
}

TEST(Rhat, SeparatedMeans) {
  const auto a = iid(1000, 31, 0.0);
  const auto b = iid(1000, 32, 5.0);
  const std::vector<std::span<const double>> spans{std::span<const double>(a), std::span<const double>(b)};
  EXPECT_GT(split_rhat(spans).rhat, 1.1);
}

TEST(Rhat, DegenerateFlagged) {
  const std::vector<double> a(100, 1.0), b(100, 1.0);
  const std::vector<std::span<const double>> spans{std::span<const double>(a), std::span<const double>(b)};
  EXPECT_TRUE(split_rhat(spans).degenerate);
}

TEST(Summary, CapsEssAndCopiesCounts) {
  ChainDraws d;
  d.draws.resize(100, 1);
  // antithetic series: ESS above N
  for (int i = 0; i < 100; ++i) d.draws(i, 0) = (i % 2 ? 1.0 : -1.0) + 0.01 * i;
  d.log_summary = d.draws.col(0);
  d.divergences = 3;
  d.wall_time = 1.5;
  const auto s = summarize_chain(d, 1.02);
  EXPECT_LE(s.min_ess, 150.0);
  EXPECT_GE(s.min_ess_raw, s.min_ess);
  EXPECT_EQ(s.divergences, 3u);
  EXPECT_DOUBLE_EQ(s.wall_time, 1.5);
  EXPECT_DOUBLE_EQ(s.rhat_max, 1.02);
  EXPECT_NEAR(s.mean_log_summary, d.log_summary.mean(), 1e-15);
}
