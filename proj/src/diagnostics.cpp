#include "epmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace epmix {

namespace {

std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> centered(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - mean;

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, centered);
  for (auto& f : freq) f = std::norm(f);
  std::vector<double> acov;
  fft.inv(acov, freq);
  acov.resize(n);
  const double var = acov[0];
  if (!(var > 0.0)) return {};
  for (auto& a : acov) a /= var;
  return acov;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

EssResult ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 10) throw std::invalid_argument("ESS needs at least 10 draws");
  for (double v : series) {
    if (!std::isfinite(v)) throw std::invalid_argument("ESS input contains non-finite values");
  }
  const auto rho = autocorrelation(series);
  if (rho.empty()) return {0.0, true};

  // Geyer: sums of adjacent pairs, truncated at the first non-positive pair
  // and forced monotone.
  std::vector<double> pairs;
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    const double p = rho[t] + rho[t + 1];
    if (!(p > 0.0)) break;
    pairs.push_back(pairs.empty() ? p : std::min(p, pairs.back()));
  }
  const double tau = -1.0 + 2.0 * std::accumulate(pairs.begin(), pairs.end(), 0.0);
  return {static_cast<double>(n) / tau, false};
}

EssResult min_ess_over_params(const Eigen::MatrixXd& draws) {
  if (draws.cols() == 0 || draws.rows() == 0) throw std::invalid_argument("empty draws");
  EssResult best{std::numeric_limits<double>::infinity(), false};
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    for (Eigen::Index i = 0; i < draws.rows(); ++i) col[static_cast<std::size_t>(i)] = draws(i, j);
    const EssResult r = ess(col);
    best.degenerate = best.degenerate || r.degenerate;
    best.ess = std::min(best.ess, r.ess);
  }
  return best;
}

EssResult min_ess_over_params(const ChainDraws& draws) { return min_ess_over_params(draws.draws); }

KdeResult kde(std::span<const double> values, std::size_t grid_points) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("KDE needs at least two values");
  if (grid_points < 2) throw std::invalid_argument("KDE grid needs at least two points");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0) || !std::isfinite(spread)) throw std::invalid_argument("KDE input has zero spread");

  KdeResult out;
  out.bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  const double lo = sorted.front() - 3.0 * out.bandwidth;
  const double hi = sorted.back() + 3.0 * out.bandwidth;
  out.grid.resize(grid_points);
  out.density.assign(grid_points, 0.0);
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double norm = 1.0 / (static_cast<double>(n) * out.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = lo + step * static_cast<double>(g);
    out.grid[g] = x;
    double acc = 0.0;
    for (double v : sorted) {
      const double u = (x - v) / out.bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    out.density[g] = acc * norm;
  }
  return out;
}

RhatResult split_rhat(const std::vector<std::span<const double>>& chains) {
  if (chains.empty()) throw std::invalid_argument("split R-hat needs at least one chain");
  const std::size_t n = chains.front().size();
  if (n < 4) throw std::invalid_argument("split R-hat needs chains of length >= 4");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("split R-hat needs equal-length chains");
  }
  const std::size_t half = n / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (const auto part : {c.subspan(0, half), c.subspan(n - half, half)}) {
      const double m = std::accumulate(part.begin(), part.end(), 0.0) / static_cast<double>(half);
      double ss = 0.0;
      for (double v : part) ss += (v - m) * (v - m);
      means.push_back(m);
      vars.push_back(ss / static_cast<double>(half - 1));
    }
  }
  const double k = static_cast<double>(means.size());
  const double l = static_cast<double>(half);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / k;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= l / (k - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / k;
  if (!(w > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), true};
  const double var_plus = (l - 1.0) / l * w + b / l;
  return {std::sqrt(var_plus / w), false};
}

RhatResult max_split_rhat(const std::vector<const ChainDraws*>& chains) {
  if (chains.empty()) return {std::numeric_limits<double>::quiet_NaN(), true};
  const auto cols = chains.front()->draws.cols();
  RhatResult worst{-std::numeric_limits<double>::infinity(), false};
  std::vector<std::vector<double>> columns(chains.size());
  for (Eigen::Index j = 0; j < cols; ++j) {
    std::vector<std::span<const double>> views;
    for (std::size_t c = 0; c < chains.size(); ++c) {
      const auto& d = chains[c]->draws;
      columns[c].resize(static_cast<std::size_t>(d.rows()));
      for (Eigen::Index i = 0; i < d.rows(); ++i) columns[c][static_cast<std::size_t>(i)] = d(i, j);
      views.emplace_back(columns[c]);
    }
    const RhatResult r = split_rhat(views);
    if (r.degenerate) {
      worst.degenerate = true;
      continue;
    }
    worst.rhat = std::max(worst.rhat, r.rhat);
  }
  if (!std::isfinite(worst.rhat)) worst.rhat = std::numeric_limits<double>::quiet_NaN();
  return worst;
}

ChainSummary summarize_chain(const ChainDraws& draws, double rhat_max) {
  ChainSummary s;
  const auto n = static_cast<double>(draws.draws.rows());
  s.mean_log_summary = draws.log_summary.size() > 0 ? draws.log_summary.mean() : 0.0;
  const EssResult all = min_ess_over_params(draws.draws);
  s.min_ess_raw = all.ess;
  s.min_ess = std::min(all.ess, 1.5 * n);
  s.ess_degenerate = all.degenerate;
  if (draws.z2_draws.size() > 0) s.min_ess_z2 = std::min(min_ess_over_params(draws.z2_draws).ess, 1.5 * n);
  s.rhat_max = rhat_max;
  s.divergences = draws.divergences;
  s.wall_time = draws.wall_time;
  return s;
}

}  // namespace epmix
