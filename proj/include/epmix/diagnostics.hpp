#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "epmix/nuts.hpp"

namespace epmix {

struct EssResult {
  double ess = 0.0;
  /// Set for constant series (and propagated by min_ess_over_params).
  bool degenerate = false;
};

/// Within-chain effective sample size N / tau, with tau from Geyer's initial
/// monotone positive sequence over FFT autocorrelations.
EssResult ess(std::span<const double> series);

/// Minimum ESS over the columns of a draws x parameters matrix.
EssResult min_ess_over_params(const Eigen::MatrixXd& draws);
EssResult min_ess_over_params(const ChainDraws& draws);

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian KDE with Silverman's 0.9 min(sd, IQR/1.34) N^{-1/5} bandwidth on
/// an even grid spanning the data range plus three bandwidths each side.
KdeResult kde(std::span<const double> values, std::size_t grid_points = 512);

struct RhatResult {
  double rhat = 1.0;
  bool degenerate = false;
};

/// Split-chain potential scale reduction over equal-length chains; a single
/// chain is compared across its two halves.
RhatResult split_rhat(const std::vector<std::span<const double>>& chains);

struct ChainSummary {
  double mean_log_summary = 0.0;
  /// Capped at 1.5 x retained draws.
  double min_ess = 0.0;
  double min_ess_raw = 0.0;
  /// Minimum ESS over z2 coordinates, comparable across parametrizations.
  double min_ess_z2 = 0.0;
  bool ess_degenerate = false;
  double rhat_max = 1.0;
  std::size_t divergences = 0;
  double wall_time = 0.0;
};

ChainSummary summarize_chain(const ChainDraws& draws, double rhat_max);

/// Largest split R-hat over all unconstrained coordinates of a set of chains.
RhatResult max_split_rhat(const std::vector<const ChainDraws*>& chains);

}  // namespace epmix
