#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epmix/dataset.hpp"
#include "epmix/hyper.hpp"
#include "epmix/nuts.hpp"
#include "epmix/targets.hpp"

namespace epmix {

/// Invalid experiment configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string dataset_path;
  std::string response = "y";
  bool standardize = true;
  std::vector<Parametrization> parametrizations{Parametrization::naive, Parametrization::centered,
                                                Parametrization::noncentered};
  SamplerConfig sampler;
  /// Restricts the nine-point grid to these q values (matched to 1e-9).
  std::vector<double> q_list;
  /// Overrides the evidence estimates.
  std::optional<double> sigma2_override;
  std::optional<double> tau2_override;
  bool evidence_half_quadratic = true;
  std::string output_dir = "epmix_out";
  double plot_q = 0.2;
  /// Called after each finished chain with (done, total); serialized.
  std::function<void(std::size_t, std::size_t)> on_progress;

  void validate() const;
};

struct SummaryRow {
  std::string dataset;
  double q = 0.0;
  Parametrization parametrization = Parametrization::naive;
  std::size_t chain = 0;
  double mean_log_summary = 0.0;
  double min_ess = 0.0;
  double rhat_max = 0.0;
  std::size_t divergences = 0;
  double wall_time_s = 0.0;
  std::string status = "ok";
};

struct KdeRow {
  double q = 0.0;
  Parametrization parametrization = Parametrization::naive;
  std::size_t chain = 0;
  double grid_point = 0.0;
  double density = 0.0;
};

/// Per-chain detail beyond the fixed summary schema.
struct ChainDetail {
  double q = 0.0;
  Parametrization parametrization = Parametrization::naive;
  std::size_t chain = 0;
  double min_ess_z2 = 0.0;
  double step_size = 0.0;
  double mean_leapfrog = 0.0;
  double warmup_time_s = 0.0;
  double sampling_time_s = 0.0;
  std::vector<double> init_z2;
};

struct ExperimentReport {
  Dataset data;
  EvidenceFit fit;
  std::vector<ThetaPoint> grid;
  std::vector<SummaryRow> summary;
  std::vector<KdeRow> kde;
  std::vector<ChainDetail> details;
  /// Ordered key-value metadata; contains no timing values.
  std::vector<std::pair<std::string, std::string>> metadata;
  /// Soft checks that did not hold (timing based, so kept out of metadata).
  std::vector<std::string> warnings;
  std::size_t failed_chains = 0;
  std::size_t total_chains = 0;
};

/// Shared z2 starting point for (theta index, chain): uniform(-2, 2).
std::vector<double> shared_initial_z2(std::uint64_t seed, std::size_t theta_index, std::size_t chain, std::size_t n2);

/// Runs every (theta point, parametrization, chain) combination in memory.
ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes summary.csv, kde.csv, chains.csv, metadata.txt and the three SVG
/// figures into config.output_dir.
void write_report(const ExperimentReport& report, const ExperimentConfig& config);

std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string kde_csv(const std::vector<KdeRow>& rows);

std::vector<SummaryRow> parse_summary_csv(const std::string& text);
std::vector<KdeRow> parse_kde_csv(const std::string& text);

/// Reads a metadata.txt written by write_report.
std::map<std::string, std::string> read_metadata(const std::string& path);

/// Fixed header of the summary file.
inline constexpr const char* kSummaryHeader =
    "dataset,q,parametrization,chain,mean_log_summary,min_ess,rhat_max,divergences,wall_time_s,status";
inline constexpr const char* kKdeHeader = "q,parametrization,chain,grid_point,density";

/// Formats a double reproducibly ("%.10g"; "NA" for non-finite).
std::string format_number(double v);

}  // namespace epmix
