#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epmix/targets.hpp"

namespace epmix {

/// Log density with gradient: returns log p(x) and writes d log p / dx.
using LogDensityFn = std::function<double(std::span<const double>, std::span<double>)>;

struct SamplerConfig {
  std::size_t warmup_iters = 1000;
  std::size_t retain_iters = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double divergence_threshold = 1000.0;
  std::uint64_t seed = 0;
  std::size_t chains = 10;
  /// Threads used by run_chains; 0 means hardware concurrency.
  std::size_t workers = 0;

  double init_step_size = 1.0;
  double init_radius = 2.0;
  // dual averaging
  double da_gamma = 0.05;
  double da_t0 = 10.0;
  double da_kappa = 0.75;
  // windowed metric adaptation
  std::size_t init_buffer = 75;
  // Longer than the usual 50: averaging the step size over only 50 draws
  // leaves the post-warmup acceptance near 0.88 instead of the target.
  std::size_t term_buffer = 250;
  std::size_t base_window = 25;

  void validate() const;
};

struct ChainDraws {
  Eigen::MatrixXd draws;        // retain_iters x D, unconstrained
  Eigen::MatrixXd z2_draws;     // retain_iters x n2 (TargetSpec runs only)
  Eigen::VectorXd log_summary;  // per retained draw (TargetSpec runs only)
  Eigen::VectorXd log_density;
  /// Largest H - H0 over the leapfrog steps of each retained transition.
  Eigen::VectorXd energy_error;
  Eigen::VectorXd accept_stat;
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  std::vector<char> divergent;
  std::size_t divergences = 0;
  std::size_t warmup_divergences = 0;

  UnconstrainedState init;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;

  double warmup_time = 0.0;
  double sampling_time = 0.0;
  double wall_time = 0.0;
};

/// One chain of multinomial NUTS with diagonal-metric, windowed warmup.
///
/// The chain's random stream is keyed on (config.seed, chain_index), so a
/// chain produces the same draws regardless of which thread runs it. With no
/// init, starting points are drawn uniformly on (-init_radius, init_radius);
/// a supplied init whose density is non-finite is jittered by the same law up
/// to 100 times before giving up.
ChainDraws nuts_sample(const LogDensityFn& log_density, std::size_t dim, const SamplerConfig& config,
                       const std::optional<UnconstrainedState>& init, std::uint64_t chain_index = 0);

/// As above for a posterior target; also fills z2_draws and log_summary.
ChainDraws nuts_sample(const TargetSpec& target, const SamplerConfig& config,
                       const std::optional<UnconstrainedState>& init, std::uint64_t chain_index = 0);

struct ChainOutcome {
  std::optional<ChainDraws> draws;
  std::string error;

  bool ok() const { return draws.has_value(); }
};

/// Runs one chain per init (chain index = position), possibly in parallel.
/// A failing chain is reported in its own slot and never stops the others.
std::vector<ChainOutcome> run_chains(const TargetSpec& target, const SamplerConfig& config,
                                     const std::vector<UnconstrainedState>& inits);

/// Same with explicit logical chain ids (one per init) keying the streams.
std::vector<ChainOutcome> run_chains(const TargetSpec& target, const SamplerConfig& config,
                                     const std::vector<UnconstrainedState>& inits,
                                     std::span<const std::uint64_t> chain_ids);

/// Runs `count` independent jobs on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace epmix
