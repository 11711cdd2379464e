#include "epmix/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "epmix/diagnostics.hpp"
#include "epmix/mixture.hpp"
#include "epmix/random.hpp"
#include "epmix/svg_plot.hpp"

#ifndef EPMIX_VERSION
#define EPMIX_VERSION "unknown"
#endif

namespace epmix {

namespace {

constexpr std::uint64_t kInitStream = 0x1d17;
constexpr std::uint64_t kLatentStream = 0x1a7e;
constexpr std::uint64_t kCellStream = 0xce11;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double parse_number(const std::string& s, const char* what) {
  if (s == "NA") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string("bad ") + what + " value '" + s + "'");
  }
}

std::size_t parse_count(const std::string& s, const char* what) {
  const double v = parse_number(s, what);
  if (!(v >= 0.0) || v != std::floor(v)) throw DataError(std::string("bad ") + what + " value '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::vector<std::string>> parse_with_header(const std::string& text, const std::string& header) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw DataError("empty CSV");
  std::string got;
  for (std::size_t j = 0; j < rows[0].size(); ++j) got += (j ? "," : "") + rows[0][j];
  if (got != header) throw DataError("unexpected header '" + got + "', expected '" + header + "'");
  rows.erase(rows.begin());
  return rows;
}

// Failure code for the summary's status column.
std::string status_from_error(const std::string& what) {
  if (what.find("initialization") != std::string::npos) return "init_failed";
  if (what.find("step size") != std::string::npos) return "adaptation_failed";
  return "sampler_error";
}

std::string join_numbers(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
  return out;
}

std::string q_key(double q) { return format_number(q); }

struct Job {
  std::size_t cell;
  std::size_t chain;
};

struct JobResult {
  std::optional<ChainDraws> draws;
  std::string error;
  Eigen::VectorXd init_z2;
};

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ExperimentConfig::validate() const {
  if (parametrizations.empty()) throw ConfigError("at least one parametrization is required");
  for (std::size_t i = 0; i < parametrizations.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (parametrizations[i] == parametrizations[j]) throw ConfigError("parametrization listed twice");
    }
  }
  if (sampler.chains < 1) throw ConfigError("chains must be at least 1");
  try {
    sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (sigma2_override && !(*sigma2_override > 0.0)) throw ConfigError("sigma2 override must be positive");
  if (tau2_override && !(*tau2_override > 0.0)) throw ConfigError("tau2 override must be positive");
  if (!(plot_q > 0.0 && plot_q < 2.0)) throw ConfigError("plot q must lie in (0, 2)");
  for (double q : q_list) {
    bool found = false;
    for (int k = 1; k <= 9; ++k) found = found || std::abs(q - 2.0 * k / 10.0) < 1e-9;
    if (!found) throw ConfigError("q = " + format_number(q) + " is not on the grid 0.2, 0.4, ..., 1.8");
  }
  if (output_dir.empty()) throw ConfigError("output directory must be set");
}

std::vector<double> shared_initial_z2(std::uint64_t seed, std::size_t theta_index, std::size_t chain,
                                      std::size_t n2) {
  Rng rng(seed, {kInitStream, theta_index, chain});
  std::vector<double> z(n2);
  for (auto& v : z) v = rng.uniform(-2.0, 2.0);
  return z;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.dataset_path.empty()) throw ConfigError("no dataset given");
  if (!std::filesystem::exists(config.dataset_path)) throw DataError("dataset '" + config.dataset_path + "' not found");
  return run_experiment(config, load_dataset(config.dataset_path, config.response, config.standardize));
}

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  if (data.y.size() < 2 || data.X.cols() < 1) throw DataError("dataset needs at least two rows and one covariate");

  ExperimentReport report;
  report.data = data;
  const std::size_t n2 = static_cast<std::size_t>(data.X.cols());
  const std::uint64_t seed = config.sampler.seed;

  if (config.sigma2_override && config.tau2_override) {
    report.fit.sigma2 = *config.sigma2_override;
    report.fit.tau2 = *config.tau2_override;
    report.fit.objective = EvidenceObjective(data.y, data.X, config.evidence_half_quadratic)(report.fit.sigma2,
                                                                                          report.fit.tau2);
  } else {
    try {
      report.fit = fit_sigma2_tau2(data.y, data.X, config.evidence_half_quadratic);
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
    if (config.sigma2_override) report.fit.sigma2 = *config.sigma2_override;
    if (config.tau2_override) report.fit.tau2 = *config.tau2_override;
  }

  // theta index k stays the position on the full nine-point grid so seeds do
  // not depend on which subset of q values is requested
  const auto full_grid = build_theta_grid(report.fit.sigma2, report.fit.tau2);
  std::vector<std::size_t> grid_index;
  for (std::size_t k = 0; k < full_grid.size(); ++k) {
    bool keep = config.q_list.empty();
    for (double q : config.q_list) keep = keep || std::abs(q - full_grid[k].q) < 1e-9;
    if (keep) {
      grid_index.push_back(k);
      report.grid.push_back(full_grid[k]);
    }
  }

  auto smooth = std::make_shared<const GaussianLikelihood>(RegressionProblem(data.y, data.X, report.fit.sigma2));
  const auto& params = config.parametrizations;
  const std::size_t chains = config.sampler.chains;

  std::vector<TargetSpec> cells;
  std::vector<SamplerConfig> cell_config;
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    const ThetaPoint& th = report.grid[g];
    for (Parametrization p : params) {
      cells.emplace_back(smooth, ExpPowerParams(th.q, th.lambda), p);
      SamplerConfig sc = config.sampler;
      sc.seed = Rng(seed, {kCellStream, grid_index[g], static_cast<std::uint64_t>(p)})();
      cell_config.push_back(sc);
    }
  }

  // shared starting points: z2 per (theta, chain), latents drawn from their
  // priors on the same keys, identical for every parametrization
  std::vector<Eigen::MatrixXd> z2_init(report.grid.size()), xi_init(report.grid.size()),
      delta_init(report.grid.size());
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    const double q = report.grid[g].q;
    ZolotarevSampler zol(q);
    z2_init[g].resize(static_cast<Eigen::Index>(chains), static_cast<Eigen::Index>(n2));
    xi_init[g].resizeLike(z2_init[g]);
    delta_init[g].resizeLike(z2_init[g]);
    for (std::size_t c = 0; c < chains; ++c) {
      const auto z = shared_initial_z2(seed, grid_index[g], c, n2);
      Rng rng(seed, {kLatentStream, grid_index[g], c});
      for (std::size_t i = 0; i < n2; ++i) {
        const auto r = static_cast<Eigen::Index>(c), j = static_cast<Eigen::Index>(i);
        z2_init[g](r, j) = z[i];
        xi_init[g](r, j) = rng.gamma(mixing_gamma_shape(q));
        delta_init[g](r, j) = zol.draw(rng);
      }
    }
  }

  std::vector<Job> jobs;
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    for (std::size_t c = 0; c < chains; ++c) jobs.push_back({cell, c});
  }
  std::vector<JobResult> results(jobs.size());
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(jobs.size(), config.sampler.workers, [&](std::size_t j) {
    const Job job = jobs[j];
    const std::size_t g = job.cell / params.size();
    const TargetSpec& target = cells[job.cell];
    const auto r = static_cast<Eigen::Index>(job.chain);
    const Eigen::VectorXd z = z2_init[g].row(r).transpose();
    const Eigen::VectorXd xi = xi_init[g].row(r).transpose();
    const Eigen::VectorXd delta = delta_init[g].row(r).transpose();
    JobResult& out = results[j];
    try {
      const UnconstrainedState init = target.state_from_constrained({z.data(), n2}, {xi.data(), n2},
                                                                    {delta.data(), n2});
      ChainDraws d = nuts_sample(target, cell_config[job.cell], init, job.chain);
      out.init_z2 = recover_z2(target, d.init);
      // keep only what the report needs
      d.log_density.resize(0);
      d.energy_error.resize(0);
      d.accept_stat.resize(0);
      d.tree_depth.clear();
      d.divergent.clear();
      out.draws = std::move(d);
    } catch (const std::exception& e) {
      out.error = e.what();
      out.init_z2 = z;
    }
    if (config.on_progress) {
      std::lock_guard lock(progress_mutex);
      config.on_progress(++done, jobs.size());
    }
  });

  report.total_chains = jobs.size();
  auto& meta = report.metadata;
  meta.emplace_back("version", EPMIX_VERSION);
  meta.emplace_back("seed", std::to_string(seed));
  meta.emplace_back("dataset", data.name);
  meta.emplace_back("dataset_path", config.dataset_path);
  meta.emplace_back("response", data.response);
  meta.emplace_back("standardize", data.standardized ? "true" : "false");
  meta.emplace_back("m", std::to_string(data.y.size()));
  meta.emplace_back("n2", std::to_string(n2));
  {
    std::string names;
    for (std::size_t i = 0; i < params.size(); ++i) names += (i ? "," : "") + std::string(to_string(params[i]));
    meta.emplace_back("parametrizations", names);
  }
  meta.emplace_back("chains", std::to_string(chains));
  meta.emplace_back("warmup_iters", std::to_string(config.sampler.warmup_iters));
  meta.emplace_back("retain_iters", std::to_string(config.sampler.retain_iters));
  meta.emplace_back("target_accept", format_number(config.sampler.target_accept));
  meta.emplace_back("max_tree_depth", std::to_string(config.sampler.max_tree_depth));
  meta.emplace_back("divergence_threshold", format_number(config.sampler.divergence_threshold));
  meta.emplace_back("metric", "diagonal, windowed adaptation (init_buffer=" +
                                  std::to_string(config.sampler.init_buffer) +
                                  " base_window=" + std::to_string(config.sampler.base_window) +
                                  " term_buffer=" + std::to_string(config.sampler.term_buffer) + ")");
  meta.emplace_back("evidence_form", config.evidence_half_quadratic ? "half" : "printed");
  meta.emplace_back("evidence_note", config.evidence_half_quadratic
                                         ? "quadratic form weighted 1/2 (Gaussian marginal likelihood); the "
                                           "unweighted form has its argmin at exactly twice these variances"
                                         : "quadratic form unweighted; argmin is twice the Gaussian "
                                           "marginal-likelihood estimates");
  meta.emplace_back("sigma2_hat", format_number(report.fit.sigma2));
  meta.emplace_back("tau2_hat", format_number(report.fit.tau2));
  meta.emplace_back("sigma2_source", config.sigma2_override ? "override" : "evidence");
  meta.emplace_back("tau2_source", config.tau2_override ? "override" : "evidence");
  meta.emplace_back("sigma2_at_boundary", report.fit.sigma2_at_boundary ? "true" : "false");
  meta.emplace_back("tau2_at_boundary", report.fit.tau2_at_boundary ? "true" : "false");
  meta.emplace_back("evidence_converged_starts", std::to_string(report.fit.converged_starts));
  meta.emplace_back("evidence_objective", format_number(report.fit.objective));
  for (const auto& th : report.grid) meta.emplace_back("lambda.q=" + q_key(th.q), format_number(th.lambda));
  meta.emplace_back("ess_estimator", "within-chain, Geyer initial monotone sequence, minimum over every sampled "
                                     "coordinate, capped at 1.5 x retained draws");
  meta.emplace_back("rhat", "split R-hat over the chains of a cell, maximum over sampled coordinates");
  meta.emplace_back("wall_time", "per chain, warmup included; split recorded in chains.csv");
  meta.emplace_back("init", "z2 uniform(-2,2) per (q, chain) shared across parametrizations; xi and delta from "
                            "their priors per (q, chain); noncentered w = z2 / scale(xi, delta)");
  meta.emplace_back("kde", "Gaussian kernel, Silverman bandwidth, 512 points, range +-3 bandwidths");
  meta.emplace_back("plot_q", format_number(config.plot_q));

  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    const std::size_t g = cell / params.size();
    const double q = report.grid[g].q;
    const Parametrization p = params[cell % params.size()];
    meta.emplace_back("cell_seed.q=" + q_key(q) + "." + std::string(to_string(p)),
                      std::to_string(cell_config[cell].seed));

    std::vector<const ChainDraws*> ok;
    for (std::size_t c = 0; c < chains; ++c) {
      const auto& res = results[cell * chains + c];
      if (res.draws) ok.push_back(&*res.draws);
    }
    double rhat = std::nan("");
    if (!ok.empty()) rhat = max_split_rhat(ok).rhat;

    for (std::size_t c = 0; c < chains; ++c) {
      const auto& res = results[cell * chains + c];
      meta.emplace_back("init_z2.q=" + q_key(q) + "." + std::string(to_string(p)) + ".chain=" + std::to_string(c),
                        join_numbers({res.init_z2.data(), static_cast<std::size_t>(res.init_z2.size())}));
      SummaryRow row;
      row.dataset = data.name;
      row.q = q;
      row.parametrization = p;
      row.chain = c;
      if (!res.draws) {
        ++report.failed_chains;
        row.mean_log_summary = row.min_ess = row.rhat_max = row.wall_time_s = std::nan("");
        row.status = status_from_error(res.error);
        meta.emplace_back("error.q=" + q_key(q) + "." + std::string(to_string(p)) + ".chain=" + std::to_string(c),
                          res.error);
        report.summary.push_back(row);
        continue;
      }
      const ChainDraws& d = *res.draws;
      const ChainSummary s = summarize_chain(d, rhat);
      row.mean_log_summary = s.mean_log_summary;
      row.min_ess = s.min_ess;
      row.rhat_max = s.rhat_max;
      row.divergences = s.divergences;
      row.wall_time_s = s.wall_time;
      report.summary.push_back(row);

      ChainDetail det;
      det.q = q;
      det.parametrization = p;
      det.chain = c;
      det.min_ess_z2 = s.min_ess_z2;
      det.step_size = d.step_size;
      double leap = 0.0;
      for (int n : d.n_leapfrog) leap += n;
      det.mean_leapfrog = d.n_leapfrog.empty() ? 0.0 : leap / static_cast<double>(d.n_leapfrog.size());
      det.warmup_time_s = d.warmup_time;
      det.sampling_time_s = d.sampling_time;
      det.init_z2.assign(res.init_z2.data(), res.init_z2.data() + res.init_z2.size());
      report.details.push_back(det);

      try {
        const KdeResult k = kde({d.log_summary.data(), static_cast<std::size_t>(d.log_summary.size())});
        for (std::size_t i = 0; i < k.grid.size(); ++i) report.kde.push_back({q, p, c, k.grid[i], k.density[i]});
      } catch (const std::exception&) {
        // a chain stuck at one value has no density to draw
      }
    }
  }
  meta.emplace_back("failed_chains", std::to_string(report.failed_chains));

  // soft check: the auxiliary variables should cost something at q = 1.8
  auto median_time = [&](Parametrization p) {
    std::vector<double> t;
    for (const auto& r : report.summary) {
      if (std::abs(r.q - 1.8) < 1e-9 && r.parametrization == p && r.status == "ok") t.push_back(r.wall_time_s);
    }
    if (t.empty()) return std::nan("");
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
  };
  const double tn = median_time(Parametrization::naive), tnc = median_time(Parametrization::noncentered);
  if (std::isfinite(tn) && std::isfinite(tnc) && !(tn < tnc)) {
    report.warnings.push_back("at q=1.8 naive median wall time (" + format_number(tn) +
                              " s) is not below noncentered (" + format_number(tnc) + " s)");
  }
  return report;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = std::string(kSummaryHeader) + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.dataset) + "," + format_number(r.q) + "," + std::string(to_string(r.parametrization)) + "," +
           std::to_string(r.chain) + "," + format_number(r.mean_log_summary) + "," + format_number(r.min_ess) + "," +
           format_number(r.rhat_max) + "," + std::to_string(r.divergences) + "," + format_number(r.wall_time_s) +
           "," + csv_field(r.status) + "\n";
  }
  return out;
}

std::string kde_csv(const std::vector<KdeRow>& rows) {
  std::string out = std::string(kKdeHeader) + "\n";
  for (const auto& r : rows) {
    out += format_number(r.q) + "," + std::string(to_string(r.parametrization)) + "," + std::to_string(r.chain) + "," +
           format_number(r.grid_point) + "," + format_number(r.density) + "\n";
  }
  return out;
}

std::vector<SummaryRow> parse_summary_csv(const std::string& text) {
  std::vector<SummaryRow> rows;
  for (const auto& f : parse_with_header(text, kSummaryHeader)) {
    if (f.size() != 10) throw DataError("summary row with " + std::to_string(f.size()) + " fields");
    SummaryRow r;
    r.dataset = f[0];
    r.q = parse_number(f[1], "q");
    try {
      r.parametrization = parse_parametrization(f[2]);
    } catch (const std::exception&) {
      throw DataError("unknown parametrization '" + f[2] + "'");
    }
    r.chain = parse_count(f[3], "chain");
    r.mean_log_summary = parse_number(f[4], "mean_log_summary");
    r.min_ess = parse_number(f[5], "min_ess");
    r.rhat_max = parse_number(f[6], "rhat_max");
    r.divergences = parse_count(f[7], "divergences");
    r.wall_time_s = parse_number(f[8], "wall_time_s");
    r.status = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<KdeRow> parse_kde_csv(const std::string& text) {
  std::vector<KdeRow> rows;
  for (const auto& f : parse_with_header(text, kKdeHeader)) {
    if (f.size() != 5) throw DataError("KDE row with " + std::to_string(f.size()) + " fields");
    KdeRow r;
    r.q = parse_number(f[0], "q");
    try {
      r.parametrization = parse_parametrization(f[1]);
    } catch (const std::exception&) {
      throw DataError("unknown parametrization '" + f[1] + "'");
    }
    r.chain = parse_count(f[2], "chain");
    r.grid_point = parse_number(f[3], "grid_point");
    r.density = parse_number(f[4], "density");
    rows.push_back(r);
  }
  return rows;
}

void write_report(const ExperimentReport& report, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + (dir / name).string() + "'");
    out << content;
  };
  write("summary.csv", summary_csv(report.summary));
  write("kde.csv", kde_csv(report.kde));

  std::string chains = "q,parametrization,chain,min_ess_z2,step_size,mean_leapfrog,warmup_time_s,sampling_time_s\n";
  for (const auto& d : report.details) {
    chains += format_number(d.q) + "," + std::string(to_string(d.parametrization)) + "," + std::to_string(d.chain) +
              "," + format_number(d.min_ess_z2) + "," + format_number(d.step_size) + "," +
              format_number(d.mean_leapfrog) + "," + format_number(d.warmup_time_s) + "," +
              format_number(d.sampling_time_s) + "\n";
  }
  write("chains.csv", chains);

  std::string meta;
  for (const auto& [k, v] : report.metadata) {
    std::string flat = v;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    meta += k + " = " + flat + "\n";
  }
  write("metadata.txt", meta);

  bool any_ok = std::any_of(report.summary.begin(), report.summary.end(), [](const SummaryRow& r) {
    return r.status == "ok";
  });
  if (any_ok) write_figures(render_figures(report.summary, report.kde, config.plot_q), dir.string());
}

std::map<std::string, std::string> read_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metadata '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace epmix
