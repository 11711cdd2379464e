#pragma once

#include <string>
#include <vector>

#include "epmix/experiment.hpp"

namespace epmix {

struct SvgFigures {
  std::string summary;      // strips of mean log summary, min ESS, wall time
  std::string kde;          // per-chain density curves at one q
  std::string divergences;  // post-warmup divergences per chain
};

/// Renders the three figures. Rows whose status is not "ok" are skipped.
/// When no KDE rows exist at plot_q the nearest available q is used.
/// Throws std::invalid_argument when there is nothing to plot.
SvgFigures render_figures(const std::vector<SummaryRow>& summary, const std::vector<KdeRow>& kde, double plot_q);

/// Reads summary and KDE CSV files, writes fig1_summary.svg, fig2_kde.svg and
/// fig3_divergences.svg into out_dir and returns their paths.
std::vector<std::string> plot_summary(const std::string& summary_path, const std::string& kde_path,
                                      const std::string& out_dir, double plot_q = 0.2);

std::vector<std::string> write_figures(const SvgFigures& figures, const std::string& out_dir);

}  // namespace epmix
